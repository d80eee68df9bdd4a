//! CVA, LDA and PCA projections fitted to annotated pixels, and their
//! application to whole stacks.
//!
//! CVA works on the raw (0–255 normalized) band values: it solves
//! `B_b v = λ W v` with the pooled within-class scatter `W` and the
//! between-class scatter `B_b`,
//!
//! ```text
//! W   = Σ_c Σ_{j∈c} (x_j − m_c)(x_j − m_c)ᵀ
//! B_b = Σ_c n_c (m_c − m)(m_c − m)ᵀ
//! ```
//!
//! LDA is the two-class special case on standardized rows; PCA diagonalizes the
//! sample covariance (divisor N−1) of standardized rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_gen_eig_sym, symmetric_eigen, Matrix, DEFAULT_RIDGE};
use crate::render::ScorePlane;
use crate::stack::{Rect, SpectralStack};
use crate::training::DesignMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cva,
    Lda,
    Pca,
    PcaUnsupervised,
}

impl Method {
    pub fn is_supervised(self) -> bool {
        !matches!(self, Method::PcaUnsupervised)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Cva => "cva",
            Method::Lda => "lda",
            Method::Pca => "pca",
            Method::PcaUnsupervised => "pca_unsupervised",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "cva" => Ok(Method::Cva),
            "lda" => Ok(Method::Lda),
            "pca" => Ok(Method::Pca),
            "pca_unsupervised" => Ok(Method::PcaUnsupervised),
            _ => Err(Error::Config(format!(
                "unknown method '{s}' (expected cva, lda, pca, pca_unsupervised)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Ridge factor ε in `W' = W + ε·(tr W / B)·I`.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            ridge: DEFAULT_RIDGE,
        }
    }
}

/// Within- and between-class scatter of a labelled design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPair {
    pub within: Matrix,
    pub between: Matrix,
    /// Means of the populated classes, in class-id order.
    pub class_means: Vec<Vec<f64>>,
    /// Class id of each entry in `class_means`.
    pub class_ids: Vec<usize>,
    pub grand_mean: Vec<f64>,
}

/// Recentres each row to mean 0 and scales it to unit sample standard deviation
/// (divisor N−1). Constant rows are only centred and report a std of 1.
pub fn standardize(dm: &DesignMatrix) -> Result<(DesignMatrix, Vec<f64>, Vec<f64>)> {
    let (b, n) = (dm.bands(), dm.samples());
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let x = dm.values();
    let mut out = Matrix::zeros(b, n);
    let mut means = Vec::with_capacity(b);
    let mut stds = Vec::with_capacity(b);
    for i in 0..b {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = (v - mean) / std;
        }
        means.push(mean);
        stds.push(std);
    }
    Ok((dm.with_values(out)?, means, stds))
}

pub fn compute_scatter(dm: &DesignMatrix) -> Result<ScatterPair> {
    let (b, n) = (dm.bands(), dm.samples());
    let x = dm.values();
    let counts = dm.class_counts();
    let class_ids: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    if class_ids.len() < 2 {
        return Err(Error::TooFewClasses(class_ids.len()));
    }

    let mut sums = vec![vec![0.0; b]; counts.len()];
    for (j, &label) in dm.labels().iter().enumerate() {
        for (i, s) in sums[label].iter_mut().enumerate() {
            *s += x[(i, j)];
        }
    }
    let grand_mean: Vec<f64> = (0..b)
        .map(|i| x.row(i).iter().sum::<f64>() / n as f64)
        .collect();
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            if c == 0 {
                vec![0.0; b]
            } else {
                s.iter().map(|v| v / c as f64).collect()
            }
        })
        .collect();

    let mut within = Matrix::zeros(b, b);
    let mut dev = vec![0.0; b];
    for (j, &label) in dm.labels().iter().enumerate() {
        for i in 0..b {
            dev[i] = x[(i, j)] - means[label][i];
        }
        add_outer(&mut within, &dev, 1.0);
    }
    let mut between = Matrix::zeros(b, b);
    for &c in &class_ids {
        for i in 0..b {
            dev[i] = means[c][i] - grand_mean[i];
        }
        add_outer(&mut between, &dev, counts[c] as f64);
    }
    Ok(ScatterPair {
        within,
        between,
        class_means: class_ids.iter().map(|&c| means[c].clone()).collect(),
        class_ids,
        grand_mean,
    })
}

/// `m += w · v vᵀ`, filling both triangles from the same products.
fn add_outer(m: &mut Matrix, v: &[f64], w: f64) {
    let n = v.len();
    for i in 0..n {
        for j in i..n {
            let p = w * v[i] * v[j];
            m[(i, j)] += p;
            if i != j {
                m[(j, i)] += p;
            }
        }
    }
}

/// Fitted linear projection.
///
/// A score is `Σ_b coefficients[b][k] · (x_b − mean_b) / std_b`, with the
/// division skipped when `std` is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub method: Method,
    pub mean: Vec<f64>,
    pub std: Option<Vec<f64>>,
    /// B×K, one column per component.
    pub coefficients: Matrix,
    pub eigenvalues: Vec<f64>,
    /// K×N scores of the training columns (supervised fits only).
    pub training_scores: Option<Matrix>,
    /// Whether the model was fitted on a 0–255 normalized stack.
    pub normalized_input: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop: Option<Rect>,
}

impl ProjectionModel {
    pub fn bands(&self) -> usize {
        self.coefficients.rows()
    }

    pub fn components(&self) -> usize {
        self.coefficients.cols()
    }

    /// Scores of one spectral vector on every component.
    pub fn score(&self, x: &[f64]) -> Vec<f64> {
        (0..self.components())
            .map(|k| {
                let mut acc = 0.0;
                for b in 0..self.bands() {
                    acc += self.coefficients[(b, k)] * self.transform(b, x[b]);
                }
                acc
            })
            .collect()
    }

    #[inline]
    fn transform(&self, band: usize, value: f64) -> f64 {
        match &self.std {
            Some(std) => (value - self.mean[band]) / std[band],
            None => value - self.mean[band],
        }
    }

    fn with_training_scores(mut self, dm: &DesignMatrix) -> Self {
        let k = self.components();
        let n = dm.samples();
        let mut scores = Matrix::zeros(k, n);
        for j in 0..n {
            for (c, s) in self.score(&dm.column(j)).into_iter().enumerate() {
                scores[(c, j)] = s;
            }
        }
        self.training_scores = Some(scores);
        self
    }

    /// Min and max training score of component `k`.
    pub fn training_range(&self, k: usize) -> Result<(f64, f64)> {
        let scores = self
            .training_scores
            .as_ref()
            .ok_or(Error::NoTrainingScores)?;
        if k >= scores.rows() {
            return Err(Error::PlaneIndex {
                index: k,
                count: scores.rows(),
            });
        }
        Ok(scores
            .row(k)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            }))
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            method: self.method,
            bands: self.bands(),
            components: self.components(),
            normalized_input: self.normalized_input,
            mean: self.mean.clone(),
            std: self.std.clone(),
            eigenvalues: self.eigenvalues.clone(),
            coefficients: self.coefficients.as_slice().to_vec(),
            training_scores: self.training_scores.as_ref().map(|m| ScoreBlock {
                rows: m.rows(),
                cols: m.cols(),
                values: m.as_slice().to_vec(),
            }),
            provenance: self.provenance.clone(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("model document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unexpected format '{}'",
                doc.format
            )));
        }
        if doc.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {}",
                doc.version
            )));
        }
        let b = doc.bands;
        let k = doc.components;
        let bad = |what: &str| Error::ModelFormat(format!("{what} has the wrong length"));
        if doc.mean.len() != b {
            return Err(bad("mean"));
        }
        if doc.std.as_ref().is_some_and(|s| s.len() != b) {
            return Err(bad("std"));
        }
        if doc.eigenvalues.len() != k {
            return Err(bad("eigenvalues"));
        }
        let coefficients =
            Matrix::from_vec(b, k, doc.coefficients).map_err(|_| bad("coefficients"))?;
        let training_scores = match doc.training_scores {
            Some(block) if block.rows == k => Some(
                Matrix::from_vec(block.rows, block.cols, block.values)
                    .map_err(|_| bad("training_scores"))?,
            ),
            Some(_) => return Err(bad("training_scores")),
            None => None,
        };
        Ok(ProjectionModel {
            method: doc.method,
            mean: doc.mean,
            std: doc.std,
            coefficients,
            eigenvalues: doc.eigenvalues,
            training_scores,
            normalized_input: doc.normalized_input,
            provenance: doc.provenance,
        })
    }
}

const MODEL_FORMAT: &str = "palimpsest-projection-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    method: Method,
    bands: usize,
    components: usize,
    normalized_input: bool,
    mean: Vec<f64>,
    std: Option<Vec<f64>>,
    eigenvalues: Vec<f64>,
    /// Row-major B×K.
    coefficients: Vec<f64>,
    training_scores: Option<ScoreBlock>,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct ScoreBlock {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

fn check_components(k: usize, b: usize) -> Result<()> {
    if k == 0 || k > b {
        return Err(Error::InvalidComponents {
            requested: k,
            max: b,
        });
    }
    Ok(())
}

fn keep_columns(m: &Matrix, k: usize) -> Matrix {
    let mut out = Matrix::zeros(m.rows(), k);
    for j in 0..k {
        out.set_column(j, &m.column(j));
    }
    out
}

/// Canonical variates on the raw design matrix; keeps the top `k` directions.
pub fn fit_cva(dm: &DesignMatrix, k: usize, opts: FitOptions) -> Result<ProjectionModel> {
    check_components(k, dm.bands())?;
    let scatter = compute_scatter(dm)?;
    let sol = solve_gen_eig_sym(&scatter.between, &scatter.within, opts.ridge)?;
    let model = ProjectionModel {
        method: Method::Cva,
        mean: scatter.grand_mean,
        std: None,
        coefficients: keep_columns(&sol.eigenvectors, k),
        eigenvalues: sol.eigenvalues[..k].to_vec(),
        training_scores: None,
        normalized_input: dm.normalized(),
        provenance: Provenance::default(),
    };
    Ok(model.with_training_scores(dm))
}

/// Two-class canonical variates on standardized rows; keeps all B directions.
pub fn fit_lda(dm: &DesignMatrix, opts: FitOptions) -> Result<ProjectionModel> {
    let populated = dm.class_counts().iter().filter(|&&c| c > 0).count();
    if populated != 2 {
        return Err(Error::LdaClassCount(populated));
    }
    let (z, mean, std) = standardize(dm)?;
    let inner = fit_cva(&z, dm.bands(), opts)?;
    let model = ProjectionModel {
        method: Method::Lda,
        mean,
        std: Some(std),
        coefficients: inner.coefficients,
        eigenvalues: inner.eigenvalues,
        training_scores: None,
        normalized_input: dm.normalized(),
        provenance: Provenance::default(),
    };
    Ok(model.with_training_scores(dm))
}

/// Principal components of the standardized design matrix (labels ignored).
pub fn fit_pca(dm: &DesignMatrix, k: usize) -> Result<ProjectionModel> {
    check_components(k, dm.bands())?;
    let (z, mean, std) = standardize(dm)?;
    let n = z.samples();
    let zv = z.values();
    let cov = zv.matmul(&zv.transpose()).scaled(1.0 / (n - 1) as f64);
    let sol = symmetric_eigen(&symmetrized(cov))?;
    let model = ProjectionModel {
        method: Method::Pca,
        mean,
        std: Some(std),
        coefficients: keep_columns(&sol.eigenvectors, k),
        eigenvalues: sol.eigenvalues[..k].to_vec(),
        training_scores: None,
        normalized_input: dm.normalized(),
        provenance: Provenance::default(),
    };
    Ok(model.with_training_scores(dm))
}

fn symmetrized(mut m: Matrix) -> Matrix {
    for i in 0..m.rows() {
        for j in i + 1..m.cols() {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

/// PCA over every pixel of `region` (the whole stack when `None`).
///
/// Moments are accumulated in exact integer arithmetic, so the result does not
/// depend on summation order.
pub fn fit_pca_unsupervised(
    stack: &SpectralStack,
    region: Option<Rect>,
    k: usize,
) -> Result<ProjectionModel> {
    let b = stack.band_count();
    check_components(k, b)?;
    let rect = region.unwrap_or(Rect::new(0, 0, stack.width(), stack.height()));
    if rect.area() == 0 {
        return Err(Error::EmptyRect(rect));
    }
    if !rect.fits_within(stack.width(), stack.height()) {
        return Err(Error::RectOutOfBounds {
            rect,
            width: stack.width(),
            height: stack.height(),
        });
    }
    let n = rect.area();
    if n < 2 {
        return Err(Error::TooFewSamples(n as usize));
    }

    let w = stack.width() as usize;
    let bands = stack.bands();
    let mut sums = vec![0u64; b];
    let mut cross = vec![0u64; b * b];
    let mut pixel = vec![0u64; b];
    for y in rect.y0..rect.y0 + rect.height {
        for x in rect.x0..rect.x0 + rect.width {
            let idx = y as usize * w + x as usize;
            for (i, band) in bands.iter().enumerate() {
                pixel[i] = band.samples()[idx] as u64;
                sums[i] += pixel[i];
            }
            for i in 0..b {
                let pi = pixel[i];
                for j in i..b {
                    cross[i * b + j] += pi * pixel[j];
                }
            }
        }
    }

    // (N−1)·cov_ij = Σ x_i x_j − Σ x_i Σ x_j / N, kept exact as N·Σxy − Σx·Σy.
    let n_i = n as i128;
    let scaled_cov = |i: usize, j: usize| -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let num = n_i * cross[lo * b + hi] as i128 - sums[i] as i128 * sums[j] as i128;
        num as f64 / (n_i as f64 * (n - 1) as f64)
    };
    let mean: Vec<f64> = sums.iter().map(|&s| s as f64 / n as f64).collect();
    let std: Vec<f64> = (0..b)
        .map(|i| {
            let var = scaled_cov(i, i);
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut corr = Matrix::zeros(b, b);
    for i in 0..b {
        for j in 0..b {
            corr[(i, j)] = scaled_cov(i, j) / (std[i] * std[j]);
        }
    }
    let sol = symmetric_eigen(&corr)?;
    Ok(ProjectionModel {
        method: Method::PcaUnsupervised,
        mean,
        std: Some(std),
        coefficients: keep_columns(&sol.eigenvectors, k),
        eigenvalues: sol.eigenvalues[..k].to_vec(),
        training_scores: None,
        normalized_input: stack.is_normalized(),
        provenance: Provenance {
            crop: region,
            ..Provenance::default()
        },
    })
}

fn check_compatible(stack: &SpectralStack, model: &ProjectionModel) -> Result<()> {
    if stack.band_count() != model.bands() {
        return Err(Error::BandCountMismatch {
            stack: stack.band_count(),
            model: model.bands(),
        });
    }
    if stack.is_normalized() != model.normalized_input {
        let label = |n: bool| if n { "normalized" } else { "raw" };
        return Err(Error::NormalizationMismatch {
            model: label(model.normalized_input),
            stack: label(stack.is_normalized()),
        });
    }
    Ok(())
}

/// Projects every pixel onto component `k`.
///
/// Each band's contribution is tabulated per sample value and summed per pixel
/// in band order, so the output is bit-identical however rows are scheduled.
pub fn project_plane(
    stack: &SpectralStack,
    model: &ProjectionModel,
    k: usize,
) -> Result<ScorePlane> {
    check_compatible(stack, model)?;
    if k >= model.components() {
        return Err(Error::PlaneIndex {
            index: k,
            count: model.components(),
        });
    }
    let codes = stack.bit_depth().max_code() as usize + 1;
    let tables: Vec<Vec<f64>> = (0..model.bands())
        .map(|b| {
            let c = model.coefficients[(b, k)];
            (0..codes)
                .map(|v| c * model.transform(b, v as f64))
                .collect()
        })
        .collect();
    let width = stack.width() as usize;
    let bands = stack.bands();
    let mut values = vec![0.0; stack.pixel_count()];
    values
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            let start = y * width;
            for (band, table) in bands.iter().zip(&tables) {
                let samples = &band.samples()[start..start + width];
                for (acc, &s) in row.iter_mut().zip(samples) {
                    *acc += table[s as usize];
                }
            }
        });
    ScorePlane::new(stack.width(), stack.height(), values)
}

/// Projects the stack onto every component of `model`.
pub fn project_stack(stack: &SpectralStack, model: &ProjectionModel) -> Result<Vec<ScorePlane>> {
    (0..model.components())
        .map(|k| project_plane(stack, model, k))
        .collect()
}
