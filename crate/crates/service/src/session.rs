use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use palimpsest_core::pipeline::{EvalOn, Evaluation, PreparedInput, RunOutput};
use palimpsest_core::{
    BitDepth, CompositeRecipe, IndexReport, Method, NormalizeScope, PipelineConfig, Provenance,
    Rect, RenderMode, SpectralStack, Tails, TrainingSet,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

/// Body of `POST /api/runs`. Anything left out takes the pipeline default.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub method: Method,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub ridge: Option<f64>,
    #[serde(default)]
    pub modes: Option<Vec<RenderMode>>,
    #[serde(default)]
    pub depths: Option<Vec<BitDepth>>,
    #[serde(default)]
    pub tails: Option<Tails>,
    #[serde(default)]
    pub planes: Option<Vec<usize>>,
    #[serde(default)]
    pub composite: Option<CompositeRecipe>,
    #[serde(default)]
    pub composites: Option<Vec<CompositeRecipe>>,
    #[serde(default)]
    pub eval_on: Option<EvalOn>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenderSummary {
    pub modes: Vec<RenderMode>,
    pub depths: Vec<BitDepth>,
    pub tails: Tails,
    pub composites: Vec<CompositeRecipe>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub method: Method,
    pub k: Option<usize>,
    pub render: RenderSummary,
    pub status: RunStatus,
    pub artifacts: Vec<String>,
    pub preview: Option<String>,
    pub model: Option<String>,
    pub report: Option<IndexReport>,
    pub evaluation_error: Option<String>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
}

impl RunRecord {
    pub(crate) fn finish(&mut self, out: RunOutput) {
        self.status = RunStatus::Done;
        self.k = Some(out.model.components());
        self.preview = Some(out.preview);
        self.model = Some(out.model_file);
        self.artifacts = out.artifacts;
        self.warnings = out.warnings.iter().map(|w| w.to_string()).collect();
        match out.evaluation {
            Some(Evaluation {
                outcome: Ok(report),
                ..
            }) => self.report = Some(report),
            Some(Evaluation {
                outcome: Err(e), ..
            }) => self.evaluation_error = Some(e),
            None => {}
        }
    }

    pub(crate) fn fail(&mut self, message: String) {
        self.status = RunStatus::Failed;
        self.error = Some(message);
    }
}

#[derive(Debug, Clone)]
pub struct LoadedStack {
    pub manifest: PathBuf,
    pub crop: Option<Rect>,
    pub scope: NormalizeScope,
    pub manifest_sha256: String,
    pub stack: Arc<SpectralStack>,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub stack: Option<LoadedStack>,
    pub training: Option<TrainingSet>,
    pub version: u64,
    pub runs: Vec<RunRecord>,
}

impl Session {
    pub fn new() -> Self {
        let nanos = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or_default();
        Session {
            id: format!("s{:x}", nanos & 0xffff_ffff_ffff),
            stack: None,
            training: None,
            version: 0,
            runs: Vec::new(),
        }
    }

    pub fn run_mut(&mut self, id: &str) -> Option<&mut RunRecord> {
        self.runs.iter_mut().find(|r| r.run_id == id)
    }

    pub fn run(&self, id: &str) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.run_id == id)
    }

    /// Everything a queued run needs, frozen at submission time.
    pub fn snapshot_input(&self, stack: &LoadedStack) -> PreparedInput {
        let training = self.training.clone();
        let annotations_sha256 = training
            .as_ref()
            .map(|t| palimpsest_core::pipeline::sha256_hex(t.to_text().as_bytes()));
        PreparedInput {
            stack: Arc::clone(&stack.stack),
            training,
            provenance: Provenance {
                manifest_sha256: Some(stack.manifest_sha256.clone()),
                annotations_sha256,
                crop: stack.crop,
            },
            warnings: Vec::new(),
        }
    }
}

/// Builds the pipeline config for a run request against the loaded stack.
pub fn run_config(
    req: &RunRequest,
    stack: &LoadedStack,
    out_dir: PathBuf,
    run_id: &str,
) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(stack.manifest.clone());
    cfg.input.crop = stack.crop;
    cfg.input.normalize = stack.scope;
    cfg.fit.method = req.method;
    cfg.fit.components = req.k;
    if let Some(r) = req.ridge {
        cfg.fit.ridge = r;
    }
    if let Some(m) = &req.modes {
        cfg.render.modes = m.clone();
    }
    if let Some(d) = &req.depths {
        cfg.render.depths = d.clone();
    }
    if let Some(t) = req.tails {
        cfg.render.tails = t;
    }
    cfg.render.planes = req.planes.clone();
    cfg.composites = match (&req.composites, req.composite) {
        (Some(list), _) => list.clone(),
        (None, Some(one)) => vec![one],
        (None, None) => Vec::new(),
    };
    if let Some(e) = req.eval_on {
        cfg.output.eval_on = e;
    }
    cfg.output.dir = out_dir;
    cfg.output.run = run_id.to_string();
    cfg
}
