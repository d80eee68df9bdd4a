//! Spectral enhancement of multispectral manuscript images.
//!
//! A [`SpectralStack`] of co-registered bands and a [`TrainingSet`] of
//! labelled pixels feed the projections in [`dimred`]; [`render`] turns the
//! resulting score planes into images and [`metrics`] scores how well an
//! image separates underwriting from parchment.

pub mod dimred;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod stack;
pub mod synthetic;
pub mod training;

pub use dimred::{Method, ProjectionModel, Provenance};
pub use error::{Error, ErrorCategory, Result, Warning};
pub use linalg::{solve_gen_eig_sym, EigenSolution, Matrix};
pub use metrics::{Cluster, IndexReport};
pub use pipeline::{PipelineConfig, PreparedInput, RunOutput};
pub use raster::{BitDepth, GrayImage, ImageFormat, Raster, RgbImage};
pub use render::{CompositeRecipe, Percentile, RenderMode, RenderSpec, ScorePlane, Tails};
pub use stack::{NormalizeScope, Rect, SpectralStack};
pub use training::{DesignMatrix, TrainingSet};
