use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::stack::Rect;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad arguments or configuration.
    Usage,
    /// Missing, malformed or inconsistent input data.
    Data,
    /// A numerical degeneracy (singular matrices, coincident clusters, ...).
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Usage => 1,
            ErrorCategory::Data => 2,
            ErrorCategory::Numeric => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {}: {message}", path.display())]
    Decode { path: PathBuf, message: String },
    #[error("cannot encode {}: {message}", path.display())]
    Encode { path: PathBuf, message: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("manifest lists no bands")]
    EmptyManifest,
    #[error("band {band_id}: dimensions {got_width}x{got_height} differ from {width}x{height}")]
    DimensionMismatch {
        band_id: usize,
        got_width: u32,
        got_height: u32,
        width: u32,
        height: u32,
    },
    #[error("band {band_id}: bit depth {got} differs from {expected}")]
    MixedBitDepth {
        band_id: usize,
        got: u8,
        expected: u8,
    },
    #[error("{}: expected a single-channel 8- or 16-bit image, found {found}", path.display())]
    UnsupportedSource { path: PathBuf, found: String },
    #[error("stack is already normalized")]
    AlreadyNormalized,
    #[error("stack is empty: {0}")]
    InvalidStack(String),
    #[error("rectangle {rect} lies outside the {width}x{height} stack")]
    RectOutOfBounds { rect: Rect, width: u32, height: u32 },
    #[error("rectangle {0} has zero area")]
    EmptyRect(Rect),
    #[error("pixel ({x}, {y}) is outside the {width}x{height} image")]
    PixelOutOfBounds {
        x: u32,
        y: u32,
        width: u32,
        height: u32,
    },
    #[error("annotation line {line}: {message}")]
    Annotation { line: usize, message: String },
    #[error("annotation file contains no classes or points")]
    EmptyAnnotations,
    #[error("point ({x}, {y}) of class '{class}' is outside the {width}x{height} stack")]
    PointOutOfBounds {
        x: u32,
        y: u32,
        class: String,
        width: u32,
        height: u32,
    },
    #[error("training set has no points")]
    EmptyTrainingSet,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("need at least 2 classes with points, got {0}")]
    TooFewClasses(usize),
    #[error("LDA requires exactly 2 classes, got {0}")]
    LdaClassCount(usize),
    #[error("{which} is not symmetric (max deviation {deviation:e})")]
    NotSymmetric { which: &'static str, deviation: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("regularized matrix is not positive definite (condition estimate {condition:e})")]
    NotPositiveDefinite { condition: f64 },
    #[error("eigenvalue iteration did not converge")]
    NoConvergence,
    #[error("requested {requested} components, valid range is 1..={max}")]
    InvalidComponents { requested: usize, max: usize },
    #[error("stack has {stack} bands but the model expects {model}")]
    BandCountMismatch { stack: usize, model: usize },
    #[error("model was fitted on {model} data but the stack is {stack}")]
    NormalizationMismatch {
        model: &'static str,
        stack: &'static str,
    },
    #[error("score plane has a non-finite value at pixel index {0}")]
    NonFinite(usize),
    #[error("model has no training scores (unsupervised fit); use full-range rescaling")]
    NoTrainingScores,
    #[error("percentile must be one of 0.01, 0.1, 1, 5; got {0}")]
    InvalidPercentile(f64),
    #[error("plane index {index} out of range ({count} planes)")]
    PlaneIndex { index: usize, count: usize },
    #[error("image mismatch: {0}")]
    ImageMismatch(String),
    #[error("unknown band id {0}")]
    UnknownBand(usize),
    #[error("thresholds must satisfy t1 < t2 <= {max}; got t1={t1}, t2={t2}")]
    InvalidThresholds { t1: u16, t2: u16, max: u16 },
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("polynomial order must be 2, 3 or 4, got {0}")]
    InvalidOrder(u32),
    #[error("unsupported output: {0}")]
    UnsupportedFormat(String),
    #[error("annotations have no '{0}' points")]
    MissingClass(String),
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("clusters are not comparable: {0}")]
    ClusterMismatch(String),
    #[error("clusters indistinguishable by centroid")]
    CoincidentCentroids,
    #[error("degenerate: singleton clusters")]
    SingletonClusters,
    #[error("model document: {0}")]
    ModelFormat(String),
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Config(_)
            | InvalidPercentile(_)
            | InvalidThresholds { .. }
            | InvalidAlpha(_)
            | InvalidOrder(_)
            | InvalidComponents { .. }
            | UnsupportedFormat(_) => ErrorCategory::Usage,
            NotSymmetric { .. }
            | NotPositiveDefinite { .. }
            | NoConvergence
            | NonFinite(_)
            | CoincidentCentroids
            | SingletonClusters => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Non-fatal conditions recorded alongside a result.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// A band with min == max was mapped to an all-zero plane.
    ConstantBand { band_id: usize },
    /// A plane with no dynamic range was rendered as all zeros.
    ConstantPlane,
    /// A clipping window collapsed (lo == hi); output is all zeros.
    DegenerateRange { lo: f64, hi: f64 },
    /// A repeated (class, x, y) annotation was dropped.
    DuplicatePoint {
        line: usize,
        class: String,
        x: u32,
        y: u32,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::ConstantBand { band_id } => {
                write!(f, "band {band_id} is constant; mapped to zeros")
            }
            Warning::ConstantPlane => write!(f, "plane is constant; rendered as zeros"),
            Warning::DegenerateRange { lo, hi } => {
                write!(f, "clipping range [{lo}, {hi}] is empty; rendered as zeros")
            }
            Warning::DuplicatePoint { line, class, x, y } => {
                write!(f, "line {line}: duplicate point {class},{x},{y} ignored")
            }
        }
    }
}
