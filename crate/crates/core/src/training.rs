//! Annotated class points and the design matrix built from them.
//!
//! The annotation format is line-oriented text:
//!
//! ```text
//! # manifest: pages/102v.csv
//! # crop: 120,80,1800,2400
//! #class:outside
//! class,x,y
//! underwriting,512,300
//! parchment,40,41
//! ```
//!
//! `#class:<name>` declares a class even if it has no points, `# manifest:` and
//! `# crop:` record where the coordinates come from, other `#` lines are comments.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::linalg::Matrix;
use crate::stack::{Rect, SpectralStack};

/// Canonical class names used by the palimpsest workflow.
pub mod names {
    pub const OVERWRITING: &str = "overwriting";
    pub const UNDERWRITING: &str = "underwriting";
    pub const PARCHMENT: &str = "parchment";
    pub const BOTH: &str = "both";
    pub const OUTSIDE: &str = "outside";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: usize,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotatedPoint {
    pub x: u32,
    pub y: u32,
    pub class_id: usize,
}

/// Where annotation coordinates were taken from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSource {
    pub manifest: Option<String>,
    pub crop: Option<Rect>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingSet {
    classes: Vec<ClassLabel>,
    points: Vec<AnnotatedPoint>,
    seen: HashSet<AnnotatedPoint>,
    pub source: AnnotationSource,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `name`, declaring it if needed.
    pub fn declare_class(&mut self, name: &str) -> usize {
        if let Some(id) = self.class_id(name) {
            return id;
        }
        let id = self.classes.len();
        self.classes.push(ClassLabel {
            id,
            name: name.to_string(),
        });
        id
    }

    /// Adds a point; returns `false` if the same (class, x, y) is already present.
    pub fn add_point(&mut self, class: &str, x: u32, y: u32) -> bool {
        let class_id = self.declare_class(class);
        let p = AnnotatedPoint { x, y, class_id };
        if !self.seen.insert(p) {
            return false;
        }
        self.points.push(p);
        true
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn points(&self) -> &[AnnotatedPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(class name, point count)` in class order, including empty classes.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let mut counts = vec![0; self.classes.len()];
        for p in &self.points {
            counts[p.class_id] += 1;
        }
        self.classes
            .iter()
            .zip(counts)
            .map(|(c, n)| (c.name.clone(), n))
            .collect()
    }

    /// Points of one class, in annotation order.
    pub fn points_of(&self, name: &str) -> Vec<(u32, u32)> {
        match self.class_id(name) {
            Some(id) => self
                .points
                .iter()
                .filter(|p| p.class_id == id)
                .map(|p| (p.x, p.y))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Parses annotation text. Duplicate points are dropped with a warning.
    pub fn parse(text: &str) -> Result<(TrainingSet, Vec<Warning>)> {
        let text = text.strip_prefix('\u{feff}').unwrap_or(text);
        let mut ts = TrainingSet::new();
        let mut warnings = Vec::new();
        let mut saw_data = false;
        for (i, raw) in text.split('\n').enumerate() {
            let line_no = i + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw).trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Annotation {
                line: line_no,
                message,
            };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(name) = comment.strip_prefix("class:") {
                    let name = name.trim();
                    if name.is_empty() {
                        return Err(err("empty class name in #class: directive".into()));
                    }
                    ts.declare_class(name);
                } else if let Some(m) = comment.trim_start().strip_prefix("manifest:") {
                    ts.source.manifest = Some(m.trim().to_string());
                } else if let Some(r) = comment.trim_start().strip_prefix("crop:") {
                    let rect = r
                        .trim()
                        .parse::<Rect>()
                        .map_err(|_| err(format!("invalid crop rectangle '{}'", r.trim())))?;
                    ts.source.crop = Some(rect);
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err(format!(
                    "expected class,x,y but found {} fields",
                    fields.len()
                )));
            }
            if !saw_data
                && fields[0].eq_ignore_ascii_case("class")
                && fields[1].eq_ignore_ascii_case("x")
                && fields[2].eq_ignore_ascii_case("y")
            {
                saw_data = true;
                continue;
            }
            saw_data = true;
            let class = fields[0];
            if class.is_empty() {
                return Err(err("empty class name".into()));
            }
            let coord = |s: &str| -> Result<u32> {
                let v: i64 = s
                    .parse()
                    .map_err(|_| err(format!("invalid coordinate '{s}'")))?;
                if v < 0 {
                    return Err(err(format!("negative coordinate {v}")));
                }
                u32::try_from(v).map_err(|_| err(format!("coordinate {v} too large")))
            };
            let (x, y) = (coord(fields[1])?, coord(fields[2])?);
            if !ts.add_point(class, x, y) {
                warnings.push(Warning::DuplicatePoint {
                    line: line_no,
                    class: class.to_string(),
                    x,
                    y,
                });
            }
        }
        if ts.classes.is_empty() {
            return Err(Error::EmptyAnnotations);
        }
        Ok((ts, warnings))
    }

    /// Serializes to the format read by [`TrainingSet::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(m) = &self.source.manifest {
            let _ = writeln!(out, "# manifest: {m}");
        }
        if let Some(r) = &self.source.crop {
            let _ = writeln!(out, "# crop: {r}");
        }
        for c in &self.classes {
            let _ = writeln!(out, "#class:{}", c.name);
        }
        out.push_str("class,x,y\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{}", self.classes[p.class_id].name, p.x, p.y);
        }
        out
    }

    /// Samples every annotated point across all bands of `stack`.
    pub fn assemble(&self, stack: &SpectralStack) -> Result<DesignMatrix> {
        if self.points.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        let n = self.points.len();
        let b = stack.band_count();
        let mut values = Matrix::zeros(b, n);
        let w = stack.width() as usize;
        for (j, p) in self.points.iter().enumerate() {
            if !stack.contains(p.x, p.y) {
                return Err(Error::PointOutOfBounds {
                    x: p.x,
                    y: p.y,
                    class: self.classes[p.class_id].name.clone(),
                    width: stack.width(),
                    height: stack.height(),
                });
            }
            let idx = p.y as usize * w + p.x as usize;
            for (i, band) in stack.bands().iter().enumerate() {
                values[(i, j)] = band.samples()[idx] as f64;
            }
        }
        DesignMatrix::new(
            values,
            self.points.iter().map(|p| p.class_id).collect(),
            self.classes.iter().map(|c| c.name.clone()).collect(),
        )
        .map(|dm| dm.with_normalized(stack.is_normalized()))
    }
}

/// B×N matrix whose column `j` is the spectral vector of point `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: Matrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
    normalized: bool,
}

impl DesignMatrix {
    pub fn new(values: Matrix, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != values.cols() {
            return Err(Error::Shape(format!(
                "{} labels for {} columns",
                labels.len(),
                values.cols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Shape(format!(
                "label {bad} refers to one of {} classes",
                class_names.len()
            )));
        }
        Ok(DesignMatrix {
            values,
            labels,
            class_names,
            normalized: false,
        })
    }

    /// Records whether the samples came from a 0–255 normalized stack.
    pub fn with_normalized(mut self, normalized: bool) -> Self {
        self.normalized = normalized;
        self
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    /// Unlabelled matrix (every column in a single class).
    pub fn unlabelled(values: Matrix) -> Self {
        let n = values.cols();
        DesignMatrix {
            values,
            labels: vec![0; n],
            class_names: vec!["all".into()],
            normalized: false,
        }
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn bands(&self) -> usize {
        self.values.rows()
    }

    pub fn samples(&self) -> usize {
        self.values.cols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j)
    }

    /// Point count per declared class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Same labels with new values (used after standardization).
    pub fn with_values(&self, values: Matrix) -> Result<Self> {
        Ok(
            DesignMatrix::new(values, self.labels.clone(), self.class_names.clone())?
                .with_normalized(self.normalized),
        )
    }
}
