use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn two_point_graph() -> RegionGraph {
    // Two points at distance 1; with the median rule sigma_b = 1 and the
    // single edge carries weight exp(-1/2).
    build_knn_graph(&[0.0, 1.0], 1, 1, BandwidthRule::MedianKnn).unwrap()
}

#[test]
fn two_points_weight_and_degree() {
    let g = two_point_graph();
    assert_eq!(g.num_vertices(), 2);
    assert_eq!(g.bandwidth(), 1.0);
    let w = fmath::exp(-0.5);
    assert!((g.weights().get(0, 1).unwrap() - w).abs() < 1e-15);
    assert!((g.weights().get(1, 0).unwrap() - w).abs() < 1e-15);
    assert_eq!(g.weights().get(0, 0), None);
    assert!((g.degrees()[0] - w).abs() < 1e-15);
}

#[test]
fn two_points_laplacian_and_basis() {
    let g = two_point_graph();
    let l = normalized_laplacian(&g).unwrap();
    // Degrees are equal, so the normalized off-diagonal is exactly -1 and
    // the eigenpairs are (0, (1,1)/sqrt 2) and (2, (1,-1)/sqrt 2).
    assert!((l.get(0, 0).unwrap() - 1.0).abs() < 1e-15);
    assert!((l.get(0, 1).unwrap() + 1.0).abs() < 1e-15);
    let basis = spectral_basis(&l, 2, EigMethod::Dense).unwrap();
    assert!(basis.values()[0].abs() < 1e-12);
    assert!((basis.values()[1] - 2.0).abs() < 1e-12);
    let s = 1.0 / fmath::sqrt(2.0);
    assert!((basis.vectors()[(0, 0)] - s).abs() < 1e-12);
    assert!((basis.vectors()[(1, 0)] - s).abs() < 1e-12);
    // Sign convention: the first largest-magnitude entry is positive.
    assert!((basis.vectors()[(0, 1)] - s).abs() < 1e-12);
    assert!((basis.vectors()[(1, 1)] + s).abs() < 1e-12);
}

#[test]
fn path_graph_eigenvalues() {
    // Three collinear points, k = 1 with a fixed bandwidth: the middle point
    // is each endpoint's nearest neighbor, giving an unweighted path whose
    // normalized Laplacian has eigenvalues {0, 1, 2}.
    let g = build_knn_graph(&[0.0, 1.0, 2.0], 1, 1, BandwidthRule::Fixed(1e9)).unwrap();
    assert_eq!(g.weights().nnz(), 4);
    let l = normalized_laplacian(&g).unwrap();
    let basis = spectral_basis(&l, 3, EigMethod::Dense).unwrap();
    for (got, want) in basis.values().iter().zip([0.0, 1.0, 2.0]) {
        assert!((got - want).abs() < 1e-9, "eigenvalue {got} vs {want}");
    }
}

#[test]
fn constant_direction_in_kernel() {
    // D^{1/2} 1 is always an eigenvector of L for eigenvalue 0.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<f64> = (0..40 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = build_knn_graph(&pts, 3, 4, BandwidthRule::MedianKnn).unwrap();
    let l = normalized_laplacian(&g).unwrap();
    let v: Vec<f64> = g.degrees().iter().map(|&d| fmath::sqrt(d)).collect();
    let mut out = vec![0.0; 40];
    l.mul_vec(&v, &mut out);
    let worst = out.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    assert!(worst < 1e-12, "kernel residual {worst}");
}

#[test]
fn duplicate_points_connect_with_unit_weight() {
    let g = build_knn_graph(&[3.5, 3.5], 1, 1, BandwidthRule::MedianKnn).unwrap();
    assert_eq!(g.bandwidth(), 1.0); // zero-median fallback
    assert_eq!(g.weights().get(0, 1), Some(1.0));
}

#[test]
fn union_symmetrization_keeps_asymmetric_hits() {
    // 0 and 1 are mutual nearest neighbors; 2 picks 1, and 1 never picks 2.
    // The union keeps the (1, 2) edge in both directions.
    let g = build_knn_graph(&[0.0, 0.4, 1.0], 1, 1, BandwidthRule::Fixed(1.0)).unwrap();
    assert!(g.weights().get(1, 2).is_some());
    assert!(g.weights().get(2, 1).is_some());
    assert_eq!(g.weights().get(0, 2), None);
    assert_eq!(g.weights().max_asymmetry(), 0.0);
}

#[test]
fn bandwidth_median_is_over_undirected_edges() {
    // Edges of the path 0-1-2 with spacings 1 and 3: median of {1, 3} = 2.
    let g = build_knn_graph(&[0.0, 1.0, 4.0], 1, 1, BandwidthRule::MedianKnn).unwrap();
    assert!((g.bandwidth() - 2.0).abs() < 1e-15);
}

#[test]
fn rejects_bad_inputs() {
    assert!(build_knn_graph(&[0.0], 1, 1, BandwidthRule::MedianKnn).is_err());
    assert!(build_knn_graph(&[0.0, 1.0], 1, 2, BandwidthRule::MedianKnn).is_err());
    assert!(build_knn_graph(&[0.0, 1.0], 1, 0, BandwidthRule::MedianKnn).is_err());
    assert!(build_knn_graph(&[0.0, f64::NAN], 1, 1, BandwidthRule::MedianKnn).is_err());
    assert!(build_knn_graph(&[0.0, 1.0], 1, 1, BandwidthRule::Fixed(0.0)).is_err());
    assert!(build_knn_graph(&[0.0, 1.0, 2.0], 2, 1, BandwidthRule::MedianKnn).is_err());
}

#[test]
fn lanczos_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 120;
    let pts: Vec<f64> = (0..n * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let g = build_knn_graph(&pts, 4, 6, BandwidthRule::MedianKnn).unwrap();
    let l = normalized_laplacian(&g).unwrap();
    let m = 8;
    let dense = spectral_basis(&l, m, EigMethod::Dense).unwrap();
    let fast = spectral_basis(&l, m, EigMethod::Lanczos).unwrap();
    for j in 0..m {
        assert!(
            (dense.values()[j] - fast.values()[j]).abs() < 1e-8,
            "eigenvalue {j}: {} vs {}",
            dense.values()[j],
            fast.values()[j]
        );
    }
    // Eigenvectors may differ when eigenvalues cluster, but the subspaces
    // must agree: projecting one basis onto the other preserves norms.
    let cross = dense.vectors().transpose() * fast.vectors();
    for j in 0..m {
        let mut norm2 = 0.0;
        for i in 0..m {
            norm2 += cross[(i, j)] * cross[(i, j)];
        }
        assert!((norm2 - 1.0).abs() < 1e-7, "subspace mismatch in column {j}");
    }
}

#[test]
fn lanczos_survives_subspace_expansion() {
    // A slow-mixing graph (many vertices, few neighbors) whose low pairs do
    // not converge within the first Krylov round, so the iteration must
    // resume after enlarging its target; the resumed recurrence has to pick
    // up exactly where the previous round stopped.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 215;
    let pts: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(0.0..10.0)).collect();
    let g = build_knn_graph(&pts, 3, 6, BandwidthRule::MedianKnn).unwrap();
    let l = normalized_laplacian(&g).unwrap();
    let m = 10;
    let dense = spectral_basis(&l, m, EigMethod::Dense).unwrap();
    let fast = spectral_basis(&l, m, EigMethod::Lanczos).unwrap();
    for j in 0..m {
        assert!(
            (dense.values()[j] - fast.values()[j]).abs() < 1e-8,
            "eigenvalue {j}: {} vs {}",
            dense.values()[j],
            fast.values()[j]
        );
    }
}

#[test]
fn auto_threshold_picks_dense_for_small_graphs() {
    let g = two_point_graph();
    let l = normalized_laplacian(&g).unwrap();
    let auto = spectral_basis(&l, 2, EigMethod::Auto).unwrap();
    let dense = spectral_basis(&l, 2, EigMethod::Dense).unwrap();
    assert_eq!(auto, dense);
}

#[test]
fn verify_flags_wrong_basis() {
    let g = two_point_graph();
    let l = normalized_laplacian(&g).unwrap();
    let bad = SpectralBasis::new(Mat::from_row_slice(2, 1, &[1.0, 0.0]), vec![0.0]);
    assert!(bad.verify(&l).is_err());
}

#[test]
fn extreme_outlier_keeps_positive_weight() {
    // Points 0..2 sit at unit spacing; point 3 is so far that the Gaussian
    // kernel underflows f64. The weight must stay positive so the outlier is
    // never isolated and the normalized Laplacian remains well defined.
    let g = build_knn_graph(&[0.0, 1.0, 2.0, 1.0e6], 1, 1, BandwidthRule::MedianKnn).unwrap();
    assert_eq!(g.bandwidth(), 1.0);
    let w_far = g.weights().get(2, 3).unwrap();
    assert!(w_far > 0.0 && w_far <= f64::MIN_POSITIVE);
    assert!(g.degrees().iter().all(|&d| d > 0.0));
    let l = normalized_laplacian(&g).unwrap();
    let basis = spectral_basis(&l, 4, EigMethod::Dense).unwrap();
    assert!(basis.values().iter().all(|s| s.is_finite()));
}

#[test]
fn graph_reassembles_from_its_own_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let pts: Vec<f64> = (0..120).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let g = build_knn_graph(&pts, 3, 4, BandwidthRule::MedianKnn).unwrap();
    let rebuilt = RegionGraph::from_parts(g.weights().clone(), g.bandwidth()).unwrap();
    assert_eq!(&rebuilt, &g);
}

#[test]
fn from_parts_rejects_broken_structure() {
    let sym = CsrMatrix::from_triplets(2, &[(0, 1, 0.5), (1, 0, 0.5)]).unwrap();
    assert!(RegionGraph::from_parts(sym.clone(), 0.0).is_err());
    let asym = CsrMatrix::from_triplets(2, &[(0, 1, 0.5)]).unwrap();
    assert!(RegionGraph::from_parts(asym, 1.0).is_err());
    let diag = CsrMatrix::from_triplets(2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5)]).unwrap();
    assert!(RegionGraph::from_parts(diag, 1.0).is_err());
    let big = CsrMatrix::from_triplets(2, &[(0, 1, 1.5), (1, 0, 1.5)]).unwrap();
    assert!(RegionGraph::from_parts(big, 1.0).is_err());
    assert!(RegionGraph::from_parts(sym, 1.0).is_ok());
}
