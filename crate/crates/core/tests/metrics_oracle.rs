mod common;

use common::{brute_indices, rel_close, rng, Dense};
use palimpsest_core::metrics::{db_index, dunn_index, IndexReport};
use palimpsest_core::Cluster;
use rand::Rng;

fn random_cluster(r: &mut rand_chacha::ChaCha8Rng, dim: usize, centre: f64) -> Dense {
    let n = r.random_range(2..12);
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| centre + r.random_range(-3.0..3.0))
                .collect()
        })
        .collect()
}

fn cluster(points: &Dense, p: f64) -> Cluster {
    Cluster::new(points).unwrap().with_norm(p).unwrap()
}

#[test]
fn indices_match_direct_evaluation() {
    let mut r = rng(12);
    for trial in 0..1000 {
        let dim = 1 + trial % 4;
        let p = [2.0, 1.0, 3.0][trial % 3];
        let a = random_cluster(&mut r, dim, 0.0);
        let shift = r.random_range(-4.0..8.0);
        let b = random_cluster(&mut r, dim, shift);
        let want = brute_indices(&a, &b, p);
        let got = IndexReport::compute(&cluster(&a, p), &cluster(&b, p)).unwrap();
        assert!(rel_close(got.s_i, want.s_i, 1e-12), "trial {trial}");
        assert!(rel_close(got.s_j, want.s_j, 1e-12), "trial {trial}");
        assert!(rel_close(got.m, want.m, 1e-12), "trial {trial}");
        assert!(rel_close(got.db, want.db, 1e-12), "trial {trial}");
        assert!(rel_close(got.dunn, want.dunn, 1e-12), "trial {trial}");
        let (ca, cb) = (cluster(&a, p), cluster(&b, p));
        assert_eq!(db_index(&ca, &cb).unwrap(), got.db);
        assert_eq!(dunn_index(&ca, &cb).unwrap(), got.dunn);
    }
}

#[test]
fn overlapping_clusters_give_negative_dunn() {
    let a = Cluster::scalar(&[0.0, 10.0, 20.0]).unwrap();
    let b = Cluster::scalar(&[5.0, 15.0, 25.0]).unwrap();
    let d = dunn_index(&a, &b).unwrap();
    assert!(d < 0.0);
    assert!(db_index(&a, &b).unwrap() > 1.0);
}

#[test]
fn hand_derived_pair() {
    let a = Cluster::scalar(&[0.0, 2.0]).unwrap();
    let b = Cluster::scalar(&[10.0, 12.0]).unwrap();
    assert!((db_index(&a, &b).unwrap() - 0.2).abs() <= 1e-12);
    assert!((dunn_index(&a, &b).unwrap() - 8.0).abs() <= 1e-12);
}
