//! Lanczos iteration for the low end of the Laplacian spectrum.
//!
//! The normalized Laplacian has its spectrum in [0, 2], so the iteration
//! runs on the shifted operator `A = 2I - L`, whose *largest* eigenvalues
//! `theta = 2 - sigma` are the ones Lanczos finds first. Full
//! reorthogonalization (two Gram-Schmidt passes against every stored basis
//! vector) keeps the basis orthonormal to machine precision; this trades
//! memory and flops for the predictable convergence the explicit residual
//! gate below demands.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fix_signs, SpectralBasis};
use crate::error::{Error, Result};
use crate::fmath;
use crate::sparse::CsrMatrix;
use crate::Mat;

/// Explicit per-pair residual gate `||L v - sigma v|| <= RESIDUAL_TOL`.
const RESIDUAL_TOL: f64 = 1e-9;

/// Seed for the deterministic start vector.
const START_SEED: u64 = 0x1ab5;

/// A Lanczos step whose continuation norm falls below this is treated as an
/// invariant-subspace breakdown and restarted with a fresh vector.
const BREAKDOWN_TOL: f64 = 1e-12;

pub(super) fn smallest_eigenpairs(l: &CsrMatrix, m: usize) -> Result<SpectralBasis> {
    let n = l.dim();
    debug_assert!(m >= 1 && m <= n);

    // Basis columns, tridiagonal entries, and the not-yet-normalized
    // continuation vector of the most recent step.
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);

    let first = fresh_direction(&mut rng, &q, n)
        .ok_or_else(|| Error::numerical("could not draw a start vector"))?;
    q.push(first);

    let mut target = n.min((2 * m + 30).max(60));
    let mut best_residual = f64::INFINITY;
    let mut av = vec![0.0; n];
    loop {
        // A previous round may have appended the trailing diagonal entry for
        // the last basis vector (see below). The build loop recomputes that
        // entry when it extends from the same vector, so drop it here or the
        // tridiagonal matrix would carry it twice.
        alpha.truncate(beta.len());
        while q.len() < target + 1 && q.len() < n {
            let j = q.len() - 1;
            apply_shifted(l, &q[j], &mut av);
            let a_j = dot(&q[j], &av);
            alpha.push(a_j);
            // w = A q_j - alpha_j q_j - beta_{j-1} q_{j-1}, then two full
            // reorthogonalization sweeps.
            for i in 0..n {
                av[i] -= a_j * q[j][i];
            }
            if j > 0 && beta[j - 1] != 0.0 {
                for i in 0..n {
                    av[i] -= beta[j - 1] * q[j - 1][i];
                }
            }
            for _ in 0..2 {
                for col in &q {
                    let proj = dot(col, &av);
                    for i in 0..n {
                        av[i] -= proj * col[i];
                    }
                }
            }
            let norm = fmath::sqrt(dot(&av, &av));
            if norm <= BREAKDOWN_TOL {
                // Invariant subspace: restart from a new direction, leaving a
                // zero coupling in the tridiagonal matrix.
                match fresh_direction(&mut rng, &q, n) {
                    Some(v) => {
                        beta.push(0.0);
                        q.push(v);
                    }
                    None => break, // the basis already spans the whole space
                }
            } else {
                beta.push(norm);
                let inv = 1.0 / norm;
                q.push(av.iter().map(|v| v * inv).collect());
            }
        }
        // One trailing alpha so the tridiagonal matrix is square.
        if alpha.len() < q.len() {
            let j = q.len() - 1;
            apply_shifted(l, &q[j], &mut av);
            alpha.push(dot(&q[j], &av));
        }

        let dim = q.len();
        if dim >= m {
            let (theta, s) = tridiag_eigen(&alpha[..dim], &beta[..dim - 1])?;
            // Largest theta of the shifted operator = smallest sigma of L.
            // `tridiag_eigen` returns ascending order.
            let picked: Vec<usize> = (dim - m..dim).rev().collect();

            // Cheap residual estimate |beta_last * s_last| decides whether
            // assembling Ritz vectors is worth it.
            let last_beta = if dim < n && dim - 1 < beta.len() {
                beta[dim - 1].abs()
            } else {
                0.0
            };
            let est = picked
                .iter()
                .map(|&c| (last_beta * s[(dim - 1, c)]).abs())
                .fold(0.0f64, f64::max);
            if est <= 0.5 * RESIDUAL_TOL || dim >= n || target >= n {
                let (vectors, values) = assemble(&q, &s, &theta, &picked, n);
                let res = max_residual(l, &vectors, &values, &mut av);
                best_residual = best_residual.min(res);
                if res <= RESIDUAL_TOL {
                    let mut vectors = vectors;
                    fix_signs(&mut vectors);
                    return Ok(SpectralBasis::new(vectors, values));
                }
            }
        }

        if target >= n || dim >= n {
            return Err(Error::NonConvergence {
                what: "Lanczos eigen residual",
                residual: best_residual,
                tolerance: RESIDUAL_TOL,
            });
        }
        target = n.min(target * 2);
    }
}

/// `y = (2I - L) x`.
fn apply_shifted(l: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    l.mul_vec(x, y);
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = 2.0 * xi - *yi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draw a random unit vector orthogonal to every column in `q`. `None` once
/// the columns already span the whole space.
fn fresh_direction(rng: &mut ChaCha8Rng, q: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for col in q {
                let proj = dot(col, &v);
                for i in 0..n {
                    v[i] -= proj * col[i];
                }
            }
        }
        let norm = fmath::sqrt(dot(&v, &v));
        if norm > 1e-8 {
            let inv = 1.0 / norm;
            for vi in &mut v {
                *vi *= inv;
            }
            return Some(v);
        }
        if q.len() >= n {
            return None;
        }
    }
    None
}

/// Eigendecomposition of the symmetric tridiagonal matrix with the given
/// diagonal and off-diagonal; returns ascending eigenvalues and the matching
/// eigenvector columns. Clustered Ritz values are routine here, so this goes
/// through the QL routine that keeps full vector accuracy in that case.
fn tridiag_eigen(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let dim = diag.len();
    let mut values = diag.to_vec();
    let mut vectors = Mat::identity(dim, dim);
    super::tridiag::symmetric_tridiagonal_eigen(&mut values, off, &mut vectors)?;
    Ok((values, vectors))
}

/// Ritz vectors `x = Q s` for the selected tridiagonal columns, with
/// eigenvalues mapped back to the Laplacian as `sigma = 2 - theta`.
fn assemble(
    q: &[Vec<f64>],
    s: &Mat,
    theta: &[f64],
    picked: &[usize],
    n: usize,
) -> (Mat, Vec<f64>) {
    let mut vectors = Mat::zeros(n, picked.len());
    let mut values = Vec::with_capacity(picked.len());
    for (out, &c) in picked.iter().enumerate() {
        values.push(2.0 - theta[c]);
        for (j, col) in q.iter().enumerate() {
            let w = s[(j, c)];
            if w != 0.0 {
                for i in 0..n {
                    vectors[(i, out)] += w * col[i];
                }
            }
        }
    }
    (vectors, values)
}

fn max_residual(l: &CsrMatrix, vectors: &Mat, values: &[f64], scratch: &mut [f64]) -> f64 {
    let n = vectors.nrows();
    let mut col = vec![0.0; n];
    let mut worst = 0.0f64;
    for (j, &sigma) in values.iter().enumerate() {
        for i in 0..n {
            col[i] = vectors[(i, j)];
        }
        l.mul_vec(&col, scratch);
        let mut r2 = 0.0;
        for i in 0..n {
            let r = scratch[i] - sigma * col[i];
            r2 += r * r;
        }
        worst = worst.max(fmath::sqrt(r2));
    }
    worst
}
