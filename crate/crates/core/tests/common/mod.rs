//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls into the library's numerical code.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Dense {
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            a[i][j] = v;
            a[j][i] = v;
        }
    }
    a
}

/// `GᵀG + 0.1·I` for a random square `G`: positive definite, modest condition.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Dense {
    let g: Dense = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = (0..n).map(|k| g[k][i] * g[k][j]).sum::<f64>();
        }
        m[i][i] += 0.1;
    }
    m
}

pub fn quad(a: &Dense, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            s += v[i] * a[i][j] * v[j];
        }
    }
    s
}

pub fn bilinear(a: &Dense, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..u.len() {
        for j in 0..v.len() {
            s += u[i] * a[i][j] * v[j];
        }
    }
    s
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-3 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Maximum of `vᵀAv / vᵀMv` by a coarse random grid followed by exact
/// maximization over the planes spanned by the incumbent and each axis.
pub fn rayleigh_max(a: &Dense, m: &Dense, rng: &mut ChaCha8Rng) -> f64 {
    let n = a.len();
    let r = |v: &[f64]| quad(a, v) / quad(m, v);
    let mut best = unit_vector(rng, n);
    for _ in 0..200 * n {
        let v = unit_vector(rng, n);
        if r(&v) > r(&best) {
            best = v;
        }
    }
    let mut value = r(&best);
    for _sweep in 0..2000 {
        let before = value;
        for axis in 0..n {
            let mut e = vec![0.0; n];
            e[axis] = 1.0;
            // 2×2 pencil on span{best, e}
            let (a11, a12, a22) = (quad(a, &best), bilinear(a, &best, &e), a[axis][axis]);
            let (m11, m12, m22) = (quad(m, &best), bilinear(m, &best, &e), m[axis][axis]);
            let qa = m11 * m22 - m12 * m12;
            if qa <= 0.0 {
                continue;
            }
            let qb = -(a11 * m22 + a22 * m11 - 2.0 * a12 * m12);
            let qc = a11 * a22 - a12 * a12;
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            let lam = (-qb + disc.sqrt()) / (2.0 * qa);
            // null vector of [[a11 − λm11, a12 − λm12], [·, a22 − λm22]]
            let (r11, r12, r22) = (a11 - lam * m11, a12 - lam * m12, a22 - lam * m22);
            let (s, t) = if r11.abs() + r12.abs() >= r12.abs() + r22.abs() {
                (-r12, r11)
            } else {
                (r22, -r12)
            };
            let cand: Vec<f64> = best.iter().zip(&e).map(|(b, e)| s * b + t * e).collect();
            let len = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 {
                continue;
            }
            let cand: Vec<f64> = cand.into_iter().map(|x| x / len).collect();
            let cv = r(&cand);
            if cv > value {
                best = cand;
                value = cv;
            }
        }
        if (value - before).abs() <= 1e-15 * value.abs().max(1e-300) {
            break;
        }
    }
    value
}

/// Labelled samples, one row per observation.
pub struct Labelled {
    pub rows: Dense,
    pub labels: Vec<usize>,
    pub classes: usize,
}

/// Classes drawn around random centres with random anisotropic spread.
pub fn random_labelled(
    rng: &mut ChaCha8Rng,
    dims: usize,
    classes: usize,
    per_class: usize,
) -> Labelled {
    let spread: Vec<f64> = (0..dims).map(|_| rng.random_range(0.2..3.0)).collect();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        let centre: Vec<f64> = (0..dims).map(|_| rng.random_range(-5.0..5.0)).collect();
        for _ in 0..per_class {
            let shared = rng.random_range(-1.0..1.0);
            rows.push(
                (0..dims)
                    .map(|d| centre[d] + spread[d] * rng.random_range(-1.0..1.0) + 0.5 * shared)
                    .collect(),
            );
            labels.push(c);
        }
    }
    Labelled {
        rows,
        labels,
        classes,
    }
}

/// Between/within scatter ratio of direction `w`, from first principles.
pub fn fisher_ratio(data: &Labelled, w: &[f64]) -> f64 {
    let proj: Vec<f64> = data
        .rows
        .iter()
        .map(|x| x.iter().zip(w).map(|(a, b)| a * b).sum())
        .collect();
    let grand = proj.iter().sum::<f64>() / proj.len() as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for c in 0..data.classes {
        let members: Vec<f64> = proj
            .iter()
            .zip(&data.labels)
            .filter(|(_, &l)| l == c)
            .map(|(p, _)| *p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        between += members.len() as f64 * (mean - grand).powi(2);
        within += members.iter().map(|p| (p - mean).powi(2)).sum::<f64>();
    }
    between / within
}

/// Davies-Bouldin and Dunn terms evaluated directly from their definitions.
pub struct BruteIndices {
    pub s_i: f64,
    pub s_j: f64,
    pub m: f64,
    pub db: f64,
    pub dunn: f64,
}

fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        acc += (a[k] - b[k]).abs().powf(p);
    }
    acc.powf(1.0 / p)
}

fn centroid(points: &Dense) -> Vec<f64> {
    let n = points[0].len();
    (0..n)
        .map(|k| points.iter().map(|x| x[k]).sum::<f64>() / points.len() as f64)
        .collect()
}

pub fn brute_indices(ci: &Dense, cj: &Dense, p: f64) -> BruteIndices {
    let (ai, aj) = (centroid(ci), centroid(cj));
    let s = |pts: &Dense, a: &[f64]| {
        pts.iter().map(|x| minkowski(x, a, p)).sum::<f64>() / pts.len() as f64
    };
    let (s_i, s_j) = (s(ci, &ai), s(cj, &aj));
    let m = minkowski(&ai, &aj, p);
    BruteIndices {
        s_i,
        s_j,
        m,
        db: (s_i + s_j) / m,
        dunn: (m - s_i - s_j) / s_i.max(s_j),
    }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Nearest-rank percentile by full sort: the value at rank `ceil(q·N/100)`.
pub fn nearest_rank_sorted(values: &[f64], q_hundredths: u64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as u64;
    let mut rank = q_hundredths * n / 10_000;
    if rank * 10_000 < q_hundredths * n {
        rank += 1;
    }
    s[(rank.max(1) - 1) as usize]
}
