//! Two-cluster validity indices: Davies-Bouldin and the scatter-difference
//! variant of Dunn.
//!
//! With `S` the mean p-norm distance of a cluster's points to its centroid and
//! `M` the distance between centroids:
//!
//! ```text
//! db   = (S_i + S_j) / M
//! dunn = (M - S_i - S_j) / max(S_i, S_j)
//! ```
//!
//! `dunn` goes negative once the scatters overlap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use crate::render::ScorePlane;

/// Points of equal dimension, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    dim: usize,
    values: Vec<f64>,
    p: f64,
}

impl Cluster {
    /// `points` must be non-empty and share one dimension ≥ 1.
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptyCluster)?.len();
        if dim == 0 {
            return Err(Error::ClusterMismatch("zero-dimensional points".into()));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::ClusterMismatch("points of mixed dimension".into()));
        }
        Ok(Cluster {
            dim,
            values: points.concat(),
            p: 2.0,
        })
    }

    /// A cluster of scalars.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyCluster);
        }
        Ok(Cluster {
            dim: 1,
            values: values.to_vec(),
            p: 2.0,
        })
    }

    pub fn with_norm(mut self, p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Config(format!(
                "norm order {p} must be a finite value >= 1"
            )));
        }
        self.p = p;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm_order(&self) -> f64 {
        self.p
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for pt in self.points() {
            for (a, v) in c.iter_mut().zip(pt) {
                *a += v;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|a| *a /= n);
        c
    }
}

fn p_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    if p == 2.0 {
        return a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Mean distance of the members to the centroid.
pub fn scatter(c: &Cluster) -> f64 {
    let centroid = c.centroid();
    let total: f64 = c.points().map(|x| p_distance(x, &centroid, c.p)).sum();
    total / c.len() as f64
}

fn check_comparable(ci: &Cluster, cj: &Cluster) -> Result<()> {
    if ci.dim != cj.dim {
        return Err(Error::ClusterMismatch(format!(
            "dimensions {} and {}",
            ci.dim, cj.dim
        )));
    }
    if ci.p != cj.p {
        return Err(Error::ClusterMismatch(format!(
            "norm orders {} and {}",
            ci.p, cj.p
        )));
    }
    Ok(())
}

pub fn centroid_distance(ci: &Cluster, cj: &Cluster) -> Result<f64> {
    check_comparable(ci, cj)?;
    Ok(p_distance(&ci.centroid(), &cj.centroid(), ci.p))
}

fn db_from(si: f64, sj: f64, m: f64) -> Result<f64> {
    if m == 0.0 {
        return Err(Error::CoincidentCentroids);
    }
    Ok((si + sj) / m)
}

fn dunn_from(si: f64, sj: f64, m: f64) -> Result<f64> {
    let worst = si.max(sj);
    if worst == 0.0 {
        return Err(Error::SingletonClusters);
    }
    Ok((m - si - sj) / worst)
}

pub fn db_index(ci: &Cluster, cj: &Cluster) -> Result<f64> {
    let m = centroid_distance(ci, cj)?;
    db_from(scatter(ci), scatter(cj), m)
}

pub fn dunn_index(ci: &Cluster, cj: &Cluster) -> Result<f64> {
    let m = centroid_distance(ci, cj)?;
    dunn_from(scatter(ci), scatter(cj), m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub s_i: f64,
    pub s_j: f64,
    pub m: f64,
    pub db: f64,
    pub dunn: f64,
}

impl IndexReport {
    pub fn compute(ci: &Cluster, cj: &Cluster) -> Result<Self> {
        let m = centroid_distance(ci, cj)?;
        let (s_i, s_j) = (scatter(ci), scatter(cj));
        Ok(IndexReport {
            s_i,
            s_j,
            m,
            db: db_from(s_i, s_j, m)?,
            dunn: dunn_from(s_i, s_j, m)?,
        })
    }

    /// `image,S_i,S_j,M,db,dunn` without a trailing newline.
    pub fn csv_line(&self, image: &str) -> String {
        format!(
            "{image},{},{},{},{},{}",
            self.s_i, self.s_j, self.m, self.db, self.dunn
        )
    }
}

pub const CSV_HEADER: &str = "image,S_i,S_j,M,db,dunn";

fn sample_points<T: Copy>(
    width: u32,
    height: u32,
    points: &[(u32, u32)],
    class: &str,
    get: impl Fn(u32, u32) -> T,
) -> Result<Vec<T>> {
    points
        .iter()
        .map(|&(x, y)| {
            if x >= width || y >= height {
                Err(Error::PointOutOfBounds {
                    x,
                    y,
                    class: class.into(),
                    width,
                    height,
                })
            } else {
                Ok(get(x, y))
            }
        })
        .collect()
}

fn report_for(under: Vec<f64>, parch: Vec<f64>) -> Result<IndexReport> {
    IndexReport::compute(&Cluster::scalar(&under)?, &Cluster::scalar(&parch)?)
}

/// Indices of the underwriting and parchment samples read from a rendered image.
pub fn evaluate_image(
    img: &GrayImage,
    under: &[(u32, u32)],
    parch: &[(u32, u32)],
) -> Result<IndexReport> {
    let read = |x, y| img.get(x, y).expect("bounds checked") as f64;
    let u = sample_points(img.width(), img.height(), under, "underwriting", read)?;
    let p = sample_points(img.width(), img.height(), parch, "parchment", read)?;
    report_for(u, p)
}

/// As [`evaluate_image`], on unquantized scores.
pub fn evaluate_plane(
    plane: &ScorePlane,
    under: &[(u32, u32)],
    parch: &[(u32, u32)],
) -> Result<IndexReport> {
    let read = |x, y| plane.get(x, y).expect("bounds checked");
    let u = sample_points(plane.width(), plane.height(), under, "underwriting", read)?;
    let p = sample_points(plane.width(), plane.height(), parch, "parchment", read)?;
    report_for(u, p)
}

/// One evaluated image, or the reason it could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub image: String,
    pub outcome: std::result::Result<IndexReport, String>,
}

/// Sorts ascending by db; failed entries go last in their original order.
pub fn rank_by_db(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| match (&a.outcome, &b.outcome) {
        (Ok(x), Ok(y)) => x.db.total_cmp(&y.db),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => std::cmp::Ordering::Equal,
    });
}

/// CSV with header; failed rows carry `error:<message>` in the db column.
pub fn format_csv(entries: &[RankedEntry]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for e in entries {
        match &e.outcome {
            Ok(r) => out.push_str(&r.csv_line(&e.image)),
            Err(msg) => out.push_str(&format!("{},,,,error:{},", e.image, msg.replace(',', ";"))),
        }
        out.push('\n');
    }
    out
}

/// Fixed-width table: one row per image with db and Dunn next to the raw terms.
pub fn format_table(entries: &[RankedEntry]) -> String {
    let width = entries
        .iter()
        .map(|e| e.image.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap_or(5);
    let mut out = format!(
        "{:<width$}  {:>10}  {:>10}  {:>10}  {:>10}  {:>10}\n",
        "Image", "DB", "Dunn", "S_i", "S_j", "M"
    );
    for e in entries {
        match &e.outcome {
            Ok(r) => out.push_str(&format!(
                "{:<width$}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}\n",
                e.image, r.db, r.dunn, r.s_i, r.s_j, r.m
            )),
            Err(msg) => out.push_str(&format!("{:<width$}  error: {msg}\n", e.image)),
        }
    }
    out
}
