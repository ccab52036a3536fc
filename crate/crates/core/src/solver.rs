//! Alternating minimizer for denoising region labels on the spectral basis.
//!
//! The objective
//!
//! ```text
//!   min_{Yhat >= 0, U}  1/2 ||Yhat - V U||_F^2
//!                       + lambda * sum_{i,j} sqrt(sigma_i) |u_ij|
//!                       + gamma * ||Yhat - Ybar||_1
//! ```
//!
//! couples a spectral-smoothness penalty (coefficients on high-frequency
//! eigenvectors pay more) with an L1 fidelity to the propagated labels that
//! forgives a few grossly wrong entries instead of averaging them in. Both
//! blocks have exact minimizers: `U` by per-coefficient shrinkage thanks to
//! the orthonormal basis, `Yhat` by an elementwise two-candidate soft
//! threshold. Alternating them descends monotonically and settles in a
//! handful of iterations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::graph::{RegionGraph, SpectralBasis};
use crate::{Mat, Vec64};

/// Weights and stopping rule for [`wssl_solve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    /// Spectral-smoothness weight on the coefficient penalty.
    pub lambda: f64,
    /// Fidelity weight on the L1 distance to the propagated labels.
    pub gamma: f64,
    /// Stop once the relative Frobenius change of the iterate drops below.
    pub tol: f64,
    /// Hard iteration cap.
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            gamma: 0.01,
            tol: 1e-4,
            max_iter: 10,
        }
    }
}

impl SolverParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be finite and non-negative"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::invalid("gamma must be finite and non-negative"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid("tol must be finite and positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be at least 1"));
        }
        Ok(())
    }
}

/// What [`wssl_solve`] did: iteration count, the restricted objective after
/// every half-step (U-step then label-step, in order), the relative change
/// at the last iteration, and whether the tolerance was reached.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub final_relative_change: f64,
    pub converged: bool,
}

/// Exact minimizer of `(z - x)^2 + 2 gamma |z - y|` over `z >= 0`.
///
/// The minimum sits at one of two candidates: `z1 = max(x - gamma, y)`
/// covers the branch where `z` lands at or above `y`, and
/// `z2 = max(0, min(x + gamma, y))` the branch at or below. Comparing the
/// objective at both picks the true minimizer; ties go to `z1`.
pub fn soft_threshold_element(x: f64, y: f64, gamma: f64) -> f64 {
    debug_assert!(y >= 0.0 && gamma >= 0.0);
    let z1 = (x - gamma).max(y);
    let z2 = (x + gamma).min(y).max(0.0);
    let f = |z: f64| (z - x) * (z - x) + 2.0 * gamma * (z - y).abs();
    if f(z1) <= f(z2) {
        z1
    } else {
        z2
    }
}

/// Elementwise soft threshold of a reconstruction `F` toward the propagated
/// labels: the exact minimizer of the label block at fixed coefficients.
pub fn update_labels(f: &Mat, ybar: &Mat, gamma: f64) -> Result<Mat> {
    if f.shape() != ybar.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: F is {:?}, propagated labels are {:?}",
            f.shape(),
            ybar.shape()
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid("gamma must be finite and non-negative"));
    }
    let mut out = ybar.clone();
    for j in 0..f.ncols() {
        for i in 0..f.nrows() {
            out[(i, j)] = soft_threshold_element(f[(i, j)], ybar[(i, j)], gamma);
        }
    }
    Ok(out)
}

fn shrink(c: f64, threshold: f64) -> f64 {
    let mag = c.abs() - threshold;
    if mag > 0.0 {
        mag * c.signum()
    } else {
        0.0
    }
}

/// Per-coefficient shrinkage threshold; tiny negative eigenvalues from
/// floating-point eigensolves clamp to zero rather than poisoning the
/// square root.
fn penalty_weight(sigma: f64, lambda: f64) -> f64 {
    lambda * fmath::sqrt(sigma.max(0.0))
}

/// Exact solution of one category's coefficient subproblem
/// `min_u 1/2 ||V u - yhat||^2 + lambda sum_i sqrt(sigma_i) |u_i|`.
///
/// Orthonormality of the basis decouples the coordinates, so each
/// coefficient is an independent scalar shrinkage of `c = V^T yhat`. The
/// flat eigenvector (`sigma_1 = 0`) is never penalized: shrinking by a zero
/// threshold is the identity.
pub fn solve_sparse_coding_column(
    basis: &SpectralBasis,
    yhat_col: &[f64],
    lambda: f64,
) -> Result<Vec64> {
    if yhat_col.len() != basis.num_vertices() {
        return Err(Error::invalid(format!(
            "column has {} entries for a basis over {} vertices",
            yhat_col.len(),
            basis.num_vertices()
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda must be finite and non-negative"));
    }
    let v = basis.vectors();
    let m = basis.len();
    let mut u = Vec64::zeros(m);
    for i in 0..m {
        let mut c = 0.0;
        for k in 0..yhat_col.len() {
            c += v[(k, i)] * yhat_col[k];
        }
        u[i] = shrink(c, penalty_weight(basis.values()[i], lambda));
    }
    Ok(u)
}

/// Proximal-gradient solver for the same subproblem, kept as a cross-check:
/// it never assumes the basis is orthonormal, only that the Gram matrix has
/// a positive largest eigenvalue (used as the Lipschitz constant).
pub fn solve_sparse_coding_column_proximal(
    basis: &SpectralBasis,
    yhat_col: &[f64],
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Vec64> {
    if yhat_col.len() != basis.num_vertices() {
        return Err(Error::invalid("column length does not match basis"));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid("lambda must be finite and non-negative"));
    }
    let v = basis.vectors();
    let m = basis.len();
    let gram = v.transpose() * v;
    let lipschitz = gram
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(Error::numerical("degenerate basis: zero Gram spectrum"));
    }
    let step = 1.0 / lipschitz;
    let c = v.transpose() * Vec64::from_column_slice(yhat_col);
    let mut u = Vec64::zeros(m);
    for _ in 0..max_iter {
        let grad = &gram * &u - &c;
        let mut max_delta = 0.0f64;
        for i in 0..m {
            let next = shrink(
                u[i] - step * grad[i],
                step * penalty_weight(basis.values()[i], lambda),
            );
            max_delta = max_delta.max((next - u[i]).abs());
            u[i] = next;
        }
        if max_delta <= tol {
            break;
        }
    }
    Ok(u)
}

/// The full objective with the reconstruction restricted to the basis span:
/// `1/2 ||Yhat - V U||_F^2 + lambda sum sqrt(sigma_i)|u_ij| + gamma ||Yhat - Ybar||_1`.
pub fn restricted_objective(
    yhat: &Mat,
    u: &Mat,
    basis: &SpectralBasis,
    ybar: &Mat,
    lambda: f64,
    gamma: f64,
) -> f64 {
    let f = basis.vectors() * u;
    let mut fit = 0.0;
    for j in 0..yhat.ncols() {
        for i in 0..yhat.nrows() {
            let r = yhat[(i, j)] - f[(i, j)];
            fit += r * r;
        }
    }
    let mut penalty = 0.0;
    for i in 0..u.nrows() {
        let w = penalty_weight(basis.values()[i], lambda);
        for j in 0..u.ncols() {
            penalty += w * u[(i, j)].abs();
        }
    }
    let mut fidelity = 0.0;
    for j in 0..yhat.ncols() {
        for i in 0..yhat.nrows() {
            fidelity += (yhat[(i, j)] - ybar[(i, j)]).abs();
        }
    }
    0.5 * fit + penalty + gamma * fidelity
}

/// Alternating minimization of the restricted objective, starting from the
/// propagated labels themselves.
///
/// Each iteration solves the coefficient block exactly per category, then
/// the label block exactly per element; the objective therefore never
/// increases. Stops when the relative Frobenius change of the label iterate
/// drops below `params.tol`, or after `params.max_iter` iterations.
pub fn wssl_solve(
    basis: &SpectralBasis,
    ybar: &Mat,
    params: &SolverParams,
) -> Result<(Mat, SolveReport)> {
    params.validate()?;
    if ybar.nrows() != basis.num_vertices() {
        return Err(Error::invalid(format!(
            "labels cover {} regions but the basis has {} vertices",
            ybar.nrows(),
            basis.num_vertices()
        )));
    }
    if ybar.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(
            "propagated labels must be finite and non-negative",
        ));
    }

    let n = ybar.nrows();
    let c = ybar.ncols();
    let m = basis.len();
    let mut yhat = ybar.clone();
    let mut u = Mat::zeros(m, c);
    let mut report = SolveReport {
        iterations: 0,
        objective_trace: Vec::with_capacity(2 * params.max_iter),
        final_relative_change: f64::INFINITY,
        converged: false,
    };
    let mut col = vec![0.0; n];
    for iter in 1..=params.max_iter {
        // Coefficient half-step: the per-category subproblems are
        // independent; solving them in any order gives identical columns.
        for j in 0..c {
            for i in 0..n {
                col[i] = yhat[(i, j)];
            }
            let uj = solve_sparse_coding_column(basis, &col, params.lambda)?;
            for i in 0..m {
                u[(i, j)] = uj[i];
            }
        }
        report.objective_trace.push(restricted_objective(
            &yhat,
            &u,
            basis,
            ybar,
            params.lambda,
            params.gamma,
        ));

        // Label half-step.
        let f = basis.vectors() * &u;
        let next = update_labels(&f, ybar, params.gamma)?;
        report.objective_trace.push(restricted_objective(
            &next,
            &u,
            basis,
            ybar,
            params.lambda,
            params.gamma,
        ));
        if next.iter().any(|v| !v.is_finite()) || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite iterate at iteration {iter}"
            )));
        }

        let old_norm = yhat.norm();
        let delta = (&next - &yhat).norm();
        report.final_relative_change = if old_norm > 0.0 {
            delta / old_norm
        } else if delta > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        yhat = next;
        report.iterations = iter;
        if report.final_relative_change < params.tol {
            report.converged = true;
            break;
        }
    }
    Ok((yhat, report))
}

/// Label-propagation baseline on the same graph:
/// `F = (1 - alpha) (I - alpha D^{-1/2} W D^{-1/2})^{-1} Ybar`,
/// solved per category by conjugate gradients. The system matrix is
/// symmetric positive definite with spectrum inside `[1 - alpha, 1 + alpha]`.
pub fn lgc_baseline(graph: &RegionGraph, ybar: &Mat, alpha: f64) -> Result<Mat> {
    if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
        return Err(Error::invalid("propagation strength alpha must lie in (0, 1)"));
    }
    let n = graph.num_vertices();
    if ybar.nrows() != n {
        return Err(Error::invalid(format!(
            "labels cover {} regions but the graph has {n} vertices",
            ybar.nrows()
        )));
    }
    if ybar.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("labels must be finite"));
    }
    let inv_sqrt: Vec<f64> = graph
        .degrees()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / fmath::sqrt(d))
            } else {
                Err(Error::invalid(format!("vertex {i} is isolated (zero degree)")))
            }
        })
        .collect::<Result<_>>()?;

    // y = (I - alpha S) x with S the symmetrically normalized weights.
    let mut scaled = vec![0.0; n];
    let mut propagated = vec![0.0; n];
    let mut apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            scaled[i] = x[i] * inv_sqrt[i];
        }
        graph.weights().mul_vec(&scaled, &mut propagated);
        for i in 0..n {
            y[i] = x[i] - alpha * propagated[i] * inv_sqrt[i];
        }
    };

    let mut out = Mat::zeros(n, ybar.ncols());
    let mut b = vec![0.0; n];
    for j in 0..ybar.ncols() {
        for i in 0..n {
            b[i] = ybar[(i, j)];
        }
        let x = cg_solve(&mut apply, &b, 1e-13, 10 * n + 100)?;
        for i in 0..n {
            out[(i, j)] = (1.0 - alpha) * x[i];
        }
    }
    Ok(out)
}

/// Conjugate gradients for a symmetric positive definite operator. Converges
/// when the residual norm falls below `rtol` times the right-hand side norm.
fn cg_solve(
    apply: &mut impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let b_norm = fmath::sqrt(b.iter().map(|v| v * v).sum());
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = rtol * b_norm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for _ in 0..max_iter {
        if fmath::sqrt(rr) <= target {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap.is_finite() && pap > 0.0) {
            return Err(Error::numerical(
                "conjugate gradients broke down: operator not positive definite",
            ));
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_next: f64 = r.iter().map(|v| v * v).sum();
        let mix = rr_next / rr;
        rr = rr_next;
        for i in 0..n {
            p[i] = r[i] + mix * p[i];
        }
    }
    if fmath::sqrt(rr) <= target {
        Ok(x)
    } else {
        Err(Error::NonConvergence {
            what: "conjugate gradients residual",
            residual: fmath::sqrt(rr) / b_norm,
            tolerance: rtol,
        })
    }
}
