//! One complete run: fit, project, render, composite, evaluate.
//!
//! The command-line tool and the HTTP service both go through [`execute`], so a
//! run with the same stack, annotations and config writes the same bytes
//! whichever front end started it.
//!
//! Config files are TOML:
//!
//! ```toml
//! [input]
//! manifest = "page/manifest.csv"
//! annotations = "page/points.csv"
//! crop = "120,80,1800,2400"
//!
//! [fit]
//! method = "cva"
//!
//! [render]
//! modes = ["full", "p1"]
//! depths = [8, 16]
//!
//! [[composite]]
//! red = 1
//! green = 0
//! blue = 2
//!
//! [output]
//! dir = "out"
//! run = "102v_cva"
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dimred::{
    fit_cva, fit_lda, fit_pca, fit_pca_unsupervised, project_plane, FitOptions, Method,
    ProjectionModel, Provenance,
};
use crate::error::{Error, Result, Warning};
use crate::linalg::DEFAULT_RIDGE;
use crate::metrics::{evaluate_image, evaluate_plane, IndexReport, RankedEntry};
use crate::raster::{BitDepth, GrayImage, ImageFormat, Raster};
use crate::render::{compose_rgb, render_plane, CompositeRecipe, RenderMode, RenderSpec, Tails};
use crate::stack::{NormalizeScope, Rect, SpectralStack};
use crate::training::{names, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default, rename = "composite", skip_serializing_if = "Vec::is_empty")]
    pub composites: Vec<CompositeRecipe>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Filled in when the config is echoed to `run.meta`; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub manifest: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<Rect>,
    #[serde(default)]
    pub normalize: NormalizeScope,
    /// Seed for generated data (`bench`); the pipeline itself draws no random numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub method: Method,
    /// Components kept; all bands when absent. LDA keeps every direction,
    /// of which only the first is significant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    pub ridge: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: Method::Cva,
            components: None,
            ridge: DEFAULT_RIDGE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderConfig {
    pub modes: Vec<RenderMode>,
    pub depths: Vec<BitDepth>,
    pub tails: Tails,
    pub format: ImageFormat,
    /// Planes written as grayscale; all when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planes: Option<Vec<usize>>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            modes: vec![RenderMode::FullRange],
            depths: vec![BitDepth::Eight],
            tails: Tails::Both,
            format: ImageFormat::Png,
            planes: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalOn {
    /// The quantized rendering scholars look at.
    #[default]
    Image,
    /// The unquantized score plane.
    Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub run: String,
    pub eval_on: EvalOn,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("."),
            run: "run".into(),
            eval_on: EvalOn::Image,
        }
    }
}

impl PipelineConfig {
    pub fn new(manifest: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: InputConfig {
                manifest: manifest.into(),
                annotations: None,
                crop: None,
                normalize: NormalizeScope::PerBand,
                seed: None,
            },
            fit: FitConfig::default(),
            render: RenderConfig::default(),
            composites: Vec::new(),
            output: OutputConfig::default(),
            provenance: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.provenance = None;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks what can be checked without touching the file system.
    pub fn validate(&self) -> Result<()> {
        if self.render.modes.is_empty() {
            return Err(Error::Config("render.modes is empty".into()));
        }
        if self.render.depths.is_empty() {
            return Err(Error::Config("render.depths is empty".into()));
        }
        if self.output.run.is_empty()
            || !self
                .output
                .run
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
        {
            return Err(Error::Config(format!(
                "run name '{}' must be non-empty and use only letters, digits, '-', '_', '.'",
                self.output.run
            )));
        }
        if !(self.fit.ridge >= 0.0 && self.fit.ridge.is_finite()) {
            return Err(Error::Config(format!(
                "ridge {} must be >= 0",
                self.fit.ridge
            )));
        }
        if self.fit.components == Some(0) {
            return Err(Error::InvalidComponents {
                requested: 0,
                max: usize::MAX,
            });
        }
        for r in &self.composites {
            if let Some((a, b)) = r.swap {
                if a > 2 || b > 2 || a == b {
                    return Err(Error::Config(format!("invalid channel swap {a}{b}")));
                }
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// A loaded, cropped, normalized stack with its (optional) annotations.
#[derive(Debug, Clone)]
pub struct PreparedInput {
    pub stack: Arc<SpectralStack>,
    pub training: Option<TrainingSet>,
    pub provenance: Provenance,
    pub warnings: Vec<Warning>,
}

impl PreparedInput {
    /// Wraps an in-memory stack; normalizes it unless it already is.
    pub fn from_stack(
        stack: SpectralStack,
        training: Option<TrainingSet>,
        scope: NormalizeScope,
    ) -> Result<Self> {
        let (stack, warnings) = if stack.is_normalized() {
            (stack, Vec::new())
        } else {
            stack.normalize(scope)?
        };
        let annotations_sha256 = training
            .as_ref()
            .map(|t| sha256_hex(t.to_text().as_bytes()));
        Ok(PreparedInput {
            stack: Arc::new(stack),
            training,
            provenance: Provenance {
                manifest_sha256: None,
                annotations_sha256,
                crop: None,
            },
            warnings,
        })
    }
}

/// The stack named by a manifest, cropped and normalized as configured.
pub fn load_stack(
    manifest: &Path,
    crop: Option<Rect>,
    scope: NormalizeScope,
) -> Result<(SpectralStack, Vec<Warning>, String)> {
    let bytes = fs::read(manifest).map_err(|e| Error::io(manifest, e))?;
    let mut stack = SpectralStack::load(manifest)?;
    if let Some(rect) = crop {
        stack = stack.crop(rect)?;
    }
    let (stack, warnings) = stack.normalize(scope)?;
    Ok((stack, warnings, sha256_hex(&bytes)))
}

pub fn load_annotations(path: &Path) -> Result<(TrainingSet, Vec<Warning>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TrainingSet::parse(&text)
}

/// Annotations recorded on a different crop cannot be used as-is.
pub fn check_annotation_crop(training: &TrainingSet, crop: Option<Rect>) -> Result<()> {
    match training.source.crop {
        Some(declared) if Some(declared) != crop => Err(Error::Config(format!(
            "annotations were taken on crop {declared}, run uses {}",
            crop.map_or("the full page".to_string(), |c| c.to_string())
        ))),
        _ => Ok(()),
    }
}

pub fn prepare(config: &PipelineConfig) -> Result<PreparedInput> {
    config.validate()?;
    let (stack, mut warnings, manifest_sha) = load_stack(
        &config.input.manifest,
        config.input.crop,
        config.input.normalize,
    )?;
    let training = match &config.input.annotations {
        Some(path) => {
            let (ts, w) = load_annotations(path)?;
            check_annotation_crop(&ts, config.input.crop)?;
            warnings.extend(w);
            Some(ts)
        }
        None => None,
    };
    let annotations_sha256 = training
        .as_ref()
        .map(|t| sha256_hex(t.to_text().as_bytes()));
    Ok(PreparedInput {
        stack: Arc::new(stack),
        training,
        provenance: Provenance {
            manifest_sha256: Some(manifest_sha),
            annotations_sha256,
            crop: config.input.crop,
        },
        warnings,
    })
}

/// Fits the configured method to a prepared input.
pub fn fit(input: &PreparedInput, fit: &FitConfig) -> Result<ProjectionModel> {
    let bands = input.stack.band_count();
    let k = fit.components.unwrap_or(bands);
    let opts = FitOptions { ridge: fit.ridge };
    let mut model = if fit.method.is_supervised() {
        let ts = input
            .training
            .as_ref()
            .filter(|t| !t.is_empty())
            .ok_or(Error::EmptyTrainingSet)?;
        let dm = ts.assemble(&input.stack)?;
        match fit.method {
            Method::Cva => fit_cva(&dm, k, opts)?,
            Method::Lda => fit_lda(&dm, opts)?,
            Method::Pca => fit_pca(&dm, k)?,
            Method::PcaUnsupervised => unreachable!("unsupervised handled below"),
        }
    } else {
        fit_pca_unsupervised(&input.stack, None, k)?
    };
    model.provenance = input.provenance.clone();
    Ok(model)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub fit: Duration,
    pub project: Duration,
    pub render: Duration,
    pub write: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub image: String,
    pub plane: usize,
    pub outcome: std::result::Result<IndexReport, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub run: String,
    pub dir: PathBuf,
    #[serde(skip)]
    pub model: ProjectionModel,
    pub model_file: String,
    /// File names, relative to `dir`, in the order written.
    pub artifacts: Vec<String>,
    pub preview: String,
    pub evaluation: Option<Evaluation>,
    pub warnings: Vec<Warning>,
    #[serde(skip)]
    pub timings: StageTimings,
}

pub fn model_file_name(run: &str) -> String {
    format!("{run}.model.json")
}

pub fn plane_file_name(
    run: &str,
    k: usize,
    mode: RenderMode,
    depth: BitDepth,
    ext: &str,
) -> String {
    format!("{run}_plane{k}_{}_{}bit.{ext}", mode.tag(), depth.bits())
}

pub const RUN_META: &str = "run.meta";

/// Plane shown in the green channel: the first recipe's green after its swap, else plane 0.
pub fn green_plane(composites: &[CompositeRecipe]) -> usize {
    match composites.first() {
        Some(r) => {
            let mut ch = [r.red, r.green, r.blue];
            if let Some((a, b)) = r.swap {
                if a < 3 && b < 3 {
                    ch.swap(a, b);
                }
            }
            ch[1]
        }
        None => 0,
    }
}

struct Writer<'a> {
    dir: &'a Path,
    format: ImageFormat,
    artifacts: Vec<String>,
}

impl Writer<'_> {
    fn image(&mut self, name: String, img: Raster, format: ImageFormat) -> Result<()> {
        crate::raster::save_image(&img, &self.dir.join(&name), format)?;
        self.artifacts.push(name);
        Ok(())
    }

    fn text(&mut self, name: String, text: &str) -> Result<()> {
        let path = self.dir.join(&name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(name);
        Ok(())
    }
}

/// Runs the whole pipeline and writes every artifact under `config.output.dir`.
pub fn execute(input: &PreparedInput, config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let run = config.output.run.as_str();
    let dir = config.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut timings = StageTimings::default();
    let mut warnings = input.warnings.clone();

    let t = Instant::now();
    let model = fit(input, &config.fit)?;
    timings.fit = t.elapsed();

    let mut out = Writer {
        dir,
        format: config.render.format,
        artifacts: Vec::new(),
    };
    let t = Instant::now();
    out.text(model_file_name(run), &model.to_json())?;
    timings.write += t.elapsed();
    render_outputs(input, model, config, out, timings, &mut warnings)
}

/// Projects and renders with an existing model: everything [`execute`] writes
/// except the model file.
pub fn render_with_model(
    input: &PreparedInput,
    model: ProjectionModel,
    config: &PipelineConfig,
) -> Result<RunOutput> {
    config.validate()?;
    let dir = config.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let out = Writer {
        dir,
        format: config.render.format,
        artifacts: Vec::new(),
    };
    let mut warnings = input.warnings.clone();
    render_outputs(input, model, config, out, StageTimings::default(), &mut warnings)
}

fn render_outputs(
    input: &PreparedInput,
    model: ProjectionModel,
    config: &PipelineConfig,
    mut out: Writer<'_>,
    mut timings: StageTimings,
    warnings: &mut Vec<Warning>,
) -> Result<RunOutput> {
    let run = config.output.run.as_str();
    let dir = config.output.dir.as_path();
    let k_total = model.components();
    let check = |k: usize| {
        if k < k_total {
            Ok(k)
        } else {
            Err(Error::PlaneIndex {
                index: k,
                count: k_total,
            })
        }
    };
    let written: Vec<usize> = match &config.render.planes {
        Some(p) => p.iter().map(|&k| check(k)).collect::<Result<_>>()?,
        None => (0..k_total).collect(),
    };
    let green = check(green_plane(&config.composites))?;
    let mut needed: Vec<usize> = written.clone();
    for r in &config.composites {
        needed.extend([check(r.red)?, check(r.green)?, check(r.blue)?]);
    }
    needed.push(green);
    needed.sort_unstable();
    needed.dedup();

    let primary_mode = config.render.modes[0];
    let primary_depth = config.render.depths[0];
    let ext = config.render.format.extension();
    // first mode at first depth, and the same mode at 8 bits for the preview
    let mut primary: BTreeMap<usize, GrayImage> = BTreeMap::new();
    let mut preview_planes: BTreeMap<usize, GrayImage> = BTreeMap::new();
    let mut green_raw = None;

    for &k in &needed {
        let t = Instant::now();
        let plane = project_plane(&input.stack, &model, k)?;
        timings.project += t.elapsed();
        for &mode in &config.render.modes {
            for &depth in &config.render.depths {
                let spec = RenderSpec {
                    mode,
                    depth,
                    tails: config.render.tails,
                };
                let t = Instant::now();
                let (img, w) = render_plane(&plane, &spec, &model, k)?;
                timings.render += t.elapsed();
                warnings.extend(w);
                if written.contains(&k) {
                    let t = Instant::now();
                    out.image(
                        plane_file_name(run, k, mode, depth, ext),
                        Raster::Gray(img.clone()),
                        out.format,
                    )?;
                    timings.write += t.elapsed();
                }
                if mode == primary_mode && depth == BitDepth::Eight {
                    preview_planes.insert(k, img.clone());
                }
                if mode == primary_mode && depth == primary_depth {
                    primary.insert(k, img);
                }
            }
        }
        if !preview_planes.contains_key(&k) {
            let spec = RenderSpec {
                mode: primary_mode,
                depth: BitDepth::Eight,
                tails: config.render.tails,
            };
            preview_planes.insert(k, render_plane(&plane, &spec, &model, k)?.0);
        }
        if k == green {
            green_raw = Some(plane);
        }
    }

    let t = Instant::now();
    for recipe in &config.composites {
        let chans = [
            &primary[&recipe.red],
            &primary[&recipe.green],
            &primary[&recipe.blue],
        ];
        let rgb = compose_rgb(
            &chans.map(|c| c.clone()),
            &CompositeRecipe {
                red: 0,
                green: 1,
                blue: 2,
                swap: recipe.swap,
            },
        )?;
        out.image(recipe.file_name(run, ext), Raster::Rgb(rgb), out.format)?;
    }

    let preview = format!("{run}_preview.png");
    let preview_img = match config.composites.first() {
        Some(recipe) => {
            let p = &preview_planes;
            let chans = [&p[&recipe.red], &p[&recipe.green], &p[&recipe.blue]].map(|c| c.clone());
            Raster::Rgb(compose_rgb(
                &chans,
                &CompositeRecipe {
                    red: 0,
                    green: 1,
                    blue: 2,
                    swap: recipe.swap,
                },
            )?)
        }
        None => Raster::Gray(preview_planes[&green].clone()),
    };
    out.image(preview.clone(), preview_img, ImageFormat::Png)?;
    timings.write += t.elapsed();

    let evaluation = match &input.training {
        Some(ts) => {
            let under = ts.points_of(names::UNDERWRITING);
            let parch = ts.points_of(names::PARCHMENT);
            if under.is_empty() || parch.is_empty() {
                None
            } else {
                let (image, outcome) = match config.output.eval_on {
                    EvalOn::Image => (
                        plane_file_name(run, green, primary_mode, primary_depth, ext),
                        evaluate_image(&primary[&green], &under, &parch),
                    ),
                    EvalOn::Plane => (
                        format!("{run}_plane{green}_raw"),
                        evaluate_plane(
                            green_raw.as_ref().expect("green projected"),
                            &under,
                            &parch,
                        ),
                    ),
                };
                let entry = RankedEntry {
                    image: image.clone(),
                    outcome: outcome.map_err(|e| e.to_string()),
                };
                out.text(
                    format!("{run}_eval.csv"),
                    &crate::metrics::format_csv(std::slice::from_ref(&entry)),
                )?;
                Some(Evaluation {
                    image,
                    plane: green,
                    outcome: entry.outcome,
                })
            }
        }
        None => None,
    };

    let mut echo = config.clone();
    echo.provenance = Some(input.provenance.clone());
    out.text(RUN_META.into(), &echo.to_toml())?;

    Ok(RunOutput {
        run: run.to_string(),
        dir: dir.to_path_buf(),
        model,
        model_file: model_file_name(run),
        artifacts: out.artifacts,
        preview,
        evaluation,
        warnings: std::mem::take(warnings),
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{SyntheticPage, SyntheticSpec};

    fn page_input(seed: u64) -> PreparedInput {
        let page = SyntheticPage::generate(&SyntheticSpec::new(64, 48, 6, seed)).unwrap();
        let ts = page.training_set(20, seed);
        PreparedInput::from_stack(page.stack, Some(ts), NormalizeScope::PerBand).unwrap()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = PipelineConfig::from_toml("[input]\nmanifest = \"m.csv\"\n[fit]\nmethod = \"pca\"\n")
            .unwrap();
        assert_eq!(cfg.fit.method, Method::Pca);
        assert_eq!(cfg.fit.ridge, DEFAULT_RIDGE);
        assert_eq!(cfg.render, RenderConfig::default());
    }

    fn config(dir: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::new("unused.csv");
        cfg.output.dir = dir.to_path_buf();
        cfg.output.run = "t".into();
        cfg.render.modes = vec![RenderMode::FullRange, "p5".parse().unwrap()];
        cfg.composites = vec![CompositeRecipe::new(1, 0, 2).with_swap(1, 2)];
        cfg
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = config(Path::new("out"));
        cfg.input.crop = Some(Rect::new(1, 2, 3, 4));
        cfg.render.depths = vec![BitDepth::Eight, BitDepth::Sixteen];
        cfg.provenance = Some(Provenance {
            manifest_sha256: Some("ab".into()),
            annotations_sha256: None,
            crop: None,
        });
        let text = cfg.to_toml();
        assert!(text.contains("crop = \"1,2,3,4\""), "{text}");
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn config_errors_are_usage_errors() {
        let bad =
            "[input]\nmanifest = \"m.csv\"\n[fit]\nmethod = \"cva\"\nridge = 1e-8\nbogus = 1\n";
        let e = PipelineConfig::from_toml(bad).unwrap_err();
        assert_eq!(e.category(), crate::error::ErrorCategory::Usage);
        let e =
            PipelineConfig::from_toml("[input]\nmanifest = \"m\"\n[render]\nmodes = [\"p2\"]\n")
                .unwrap_err();
        assert_eq!(e.category(), crate::error::ErrorCategory::Usage);
        let minimal = PipelineConfig::from_toml("[input]\nmanifest = \"m.csv\"\n").unwrap();
        assert_eq!(minimal.fit.method, Method::Cva);
        assert_eq!(minimal.render.modes, vec![RenderMode::FullRange]);
    }

    #[test]
    fn green_plane_follows_swap() {
        assert_eq!(green_plane(&[]), 0);
        assert_eq!(green_plane(&[CompositeRecipe::new(1, 0, 2)]), 0);
        assert_eq!(
            green_plane(&[CompositeRecipe::new(1, 0, 2).with_swap(1, 2)]),
            2
        );
    }

    #[test]
    fn execute_writes_expected_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let input = page_input(3);
        let mut cfg = config(dir.path());
        cfg.render.planes = Some(vec![0]);
        let out = execute(&input, &cfg).unwrap();
        assert_eq!(
            out.artifacts,
            vec![
                "t.model.json",
                "t_plane0_full_8bit.png",
                "t_plane0_p5_8bit.png",
                "t_R1G0B2_swap12.png",
                "t_preview.png",
                "t_eval.csv",
                "run.meta",
            ]
        );
        for name in &out.artifacts {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        let eval = out.evaluation.unwrap();
        assert_eq!(eval.plane, 2);
        assert!(eval.outcome.is_ok());
        let meta = fs::read_to_string(dir.path().join(RUN_META)).unwrap();
        assert!(meta.contains("annotations_sha256"));
        let echoed = PipelineConfig::from_toml(&meta).unwrap();
        assert_eq!(echoed.fit, cfg.fit);
    }

    #[test]
    fn execute_is_deterministic() {
        let input = page_input(5);
        let dir = tempfile::tempdir().unwrap();
        let first = execute(&input, &config(dir.path())).unwrap();
        let bytes: Vec<Vec<u8>> = first
            .artifacts
            .iter()
            .map(|n| fs::read(dir.path().join(n)).unwrap())
            .collect();
        let second = execute(&input, &config(dir.path())).unwrap();
        assert_eq!(first.artifacts, second.artifacts);
        for (name, before) in first.artifacts.iter().zip(bytes) {
            assert_eq!(fs::read(dir.path().join(name)).unwrap(), before, "{name}");
        }
    }

    #[test]
    fn supervised_methods_need_annotations() {
        let mut input = page_input(1);
        input.training = None;
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        assert!(matches!(
            execute(&input, &cfg),
            Err(Error::EmptyTrainingSet)
        ));
        cfg.fit.method = Method::PcaUnsupervised;
        cfg.render.modes = vec![RenderMode::FullRange];
        let out = execute(&input, &cfg).unwrap();
        assert!(out.evaluation.is_none());
        cfg.render.modes = vec![RenderMode::TrainingRange];
        assert!(matches!(
            execute(&input, &cfg),
            Err(Error::NoTrainingScores)
        ));
    }

    #[test]
    fn mismatched_annotation_crop_is_rejected() {
        let mut ts = TrainingSet::new();
        ts.source.crop = Some(Rect::new(0, 0, 5, 5));
        assert!(check_annotation_crop(&ts, None).is_err());
        assert!(check_annotation_crop(&ts, Some(Rect::new(0, 0, 5, 5))).is_ok());
        assert!(check_annotation_crop(&TrainingSet::new(), Some(Rect::new(0, 0, 5, 5))).is_ok());
    }
}
