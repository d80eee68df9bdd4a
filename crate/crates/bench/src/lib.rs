//! Fixtures shared by the benchmarks.

use palimpsest_core::pipeline::PreparedInput;
use palimpsest_core::synthetic::{SyntheticPage, SyntheticSpec};
use palimpsest_core::{Matrix, NormalizeScope};

/// A normalized synthetic page with 50 training points per class.
pub fn page(width: u32, height: u32, bands: usize, seed: u64) -> PreparedInput {
    let page = SyntheticPage::generate(&SyntheticSpec::new(width, height, bands, seed))
        .expect("valid page spec");
    let training = page.training_set(50, seed);
    PreparedInput::from_stack(page.stack, Some(training), NormalizeScope::PerBand)
        .expect("synthetic page normalizes")
}

/// Symmetric pencil `(A, M)` of order `n` with `M` positive definite. Entries
/// come from a fixed integer hash so no RNG is needed.
pub fn pencil(n: usize) -> (Matrix, Matrix) {
    let h = |i: usize, j: usize| ((i * 7919 + j * 104_729 + 13) % 1000) as f64 / 500.0 - 1.0;
    let mut a = Matrix::zeros(n, n);
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = h(i.min(j), i.max(j));
            g[(i, j)] = h(i + n, j);
        }
    }
    let mut m = g.transpose().matmul(&g);
    for i in 0..n {
        m[(i, i)] += 0.1;
    }
    (a, m)
}
