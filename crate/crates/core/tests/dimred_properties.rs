mod common;

use common::{fisher_ratio, random_labelled, rng, unit_vector, Labelled};
use palimpsest_core::dimred::{fit_cva, fit_lda, fit_pca, standardize, FitOptions};
use palimpsest_core::linalg::normalize_sign;
use palimpsest_core::synthetic::{SyntheticPage, SyntheticSpec};
use palimpsest_core::{DesignMatrix, Matrix, NormalizeScope};

fn design(data: &Labelled) -> DesignMatrix {
    let b = data.rows[0].len();
    let n = data.rows.len();
    let mut values = Matrix::zeros(b, n);
    for (j, row) in data.rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            values[(i, j)] = *v;
        }
    }
    let names = (0..data.classes).map(|c| format!("class{c}")).collect();
    DesignMatrix::new(values, data.labels.clone(), names).unwrap()
}

#[test]
fn first_canonical_direction_beats_random_directions() {
    let mut r = rng(2024);
    for trial in 0..30 {
        let dims = 2 + trial % 9;
        let data = random_labelled(&mut r, dims, 3 + trial % 3, 15 + dims);
        let model = fit_cva(&design(&data), 1, FitOptions::default()).unwrap();
        let best = fisher_ratio(&data, &model.coefficients.column(0));
        for _ in 0..1000 {
            let w = unit_vector(&mut r, dims);
            assert!(
                fisher_ratio(&data, &w) <= best * (1.0 + 1e-9),
                "trial {trial}"
            );
        }
    }
}

#[test]
fn lda_equals_cva_on_standardized_input() {
    let mut r = rng(88);
    for trial in 0..20 {
        let dims = 2 + trial % 8;
        let dm = design(&random_labelled(&mut r, dims, 2, 12 + dims));
        let lda = fit_lda(&dm, FitOptions::default()).unwrap();
        let (std_dm, _, _) = standardize(&dm).unwrap();
        let cva = fit_cva(&std_dm, 1, FitOptions::default()).unwrap();
        let mut a = lda.coefficients.column(0);
        let mut b = cva.coefficients.column(0);
        normalize_sign(&mut a);
        normalize_sign(&mut b);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-10, "trial {trial}");
        }
    }
}

#[test]
fn four_classes_give_three_significant_variates() {
    let page = SyntheticPage::generate(&SyntheticSpec::new(128, 128, 23, 4)).unwrap();
    let ts = page.training_set(50, 4);
    let (stack, _) = page.stack.normalize(NormalizeScope::PerBand).unwrap();
    let model = fit_cva(&ts.assemble(&stack).unwrap(), 23, FitOptions::default()).unwrap();
    let top = model.eigenvalues[0];
    let significant = model
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-6 * top)
        .count();
    assert_eq!(significant, 3, "{:?}", model.eigenvalues);
}

#[test]
fn pca_eigenvalues_sum_to_total_variance() {
    let mut r = rng(3);
    let data = random_labelled(&mut r, 6, 3, 20);
    let dm = design(&data);
    let model = fit_pca(&dm, 6).unwrap();
    // every standardized row has unit sample variance
    let total: f64 = model.eigenvalues.iter().sum();
    assert!((total - 6.0).abs() < 1e-8, "{total}");
    // first direction maximizes variance of standardized data over random directions
    let (std_dm, _, _) = standardize(&dm).unwrap();
    let var = |w: &[f64]| {
        let n = std_dm.samples();
        let proj: Vec<f64> = (0..n)
            .map(|j| std_dm.column(j).iter().zip(w).map(|(a, b)| a * b).sum())
            .collect();
        let mean = proj.iter().sum::<f64>() / n as f64;
        proj.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    let first = model.coefficients.column(0);
    assert!((var(&first) - model.eigenvalues[0]).abs() < 1e-9);
    for _ in 0..500 {
        assert!(var(&unit_vector(&mut r, 6)) <= model.eigenvalues[0] + 1e-12);
    }
}
