//! The region similarity graph and its truncated spectral basis.
//!
//! Regions become vertices of a k-NN graph with Gaussian edge weights. The
//! normalized Laplacian `L = I - D^{-1/2} W D^{-1/2}` of that graph has its
//! spectrum in [0, 2]; the denoising solver only ever needs the `m`
//! eigenvectors of `L` with smallest eigenvalues, so the full symmetric
//! factor `Sigma^{1/2} V^T` is never formed.

mod lanczos;
mod tridiag;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::sparse::CsrMatrix;
use crate::Mat;

/// How the Gaussian kernel bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Median Euclidean distance over all retained k-NN edges.
    MedianKnn,
    /// Fixed bandwidth, must be positive and finite.
    Fixed(f64),
}

/// Which eigensolver backs [`spectral_basis`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    /// Dense below [`DENSE_LIMIT`] vertices, Lanczos above.
    Auto,
    /// Full dense symmetric eigendecomposition.
    Dense,
    /// Iterative Lanczos with full reorthogonalization.
    Lanczos,
}

/// Vertex count above which [`EigMethod::Auto`] switches to Lanczos.
pub const DENSE_LIMIT: usize = 2000;

/// Orthonormality and eigen-residual bound every returned basis satisfies.
pub const BASIS_TOL: f64 = 1e-8;

/// Sparse symmetric k-NN similarity graph over regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGraph {
    weights: CsrMatrix,
    degrees: Vec<f64>,
    bandwidth: f64,
}

impl RegionGraph {
    /// Reassemble a graph from a stored weight matrix, revalidating every
    /// structural invariant: symmetry, zero diagonal, weights in (0, 1], and
    /// strictly positive degrees.
    pub fn from_parts(weights: CsrMatrix, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid("bandwidth must be positive and finite"));
        }
        if weights.max_asymmetry() != 0.0 {
            return Err(Error::invalid("weight matrix must be exactly symmetric"));
        }
        for r in 0..weights.dim() {
            let (cols, vals) = weights.row(r);
            for (&c, &w) in cols.iter().zip(vals) {
                if c as usize == r {
                    return Err(Error::invalid("weight matrix diagonal must be zero"));
                }
                if !(w > 0.0 && w <= 1.0) {
                    return Err(Error::invalid(format!(
                        "weight ({r}, {c}) = {w} outside (0, 1]"
                    )));
                }
            }
        }
        let degrees = weights.row_sums();
        if let Some(i) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::invalid(format!("vertex {i} is isolated (zero degree)")));
        }
        Ok(Self {
            weights,
            degrees,
            bandwidth,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.weights.dim()
    }

    /// Symmetric weight matrix with zero diagonal.
    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    /// Degree vector `d_i = sum_j w_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Bandwidth the Gaussian kernel was evaluated with.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

/// The `m` smallest eigenpairs of a normalized Laplacian. Columns of
/// `vectors` are orthonormal, `values` ascend, and each column's sign is
/// fixed so its first entry of largest magnitude is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    vectors: Mat,
    values: Vec<f64>,
}

impl SpectralBasis {
    pub fn new(vectors: Mat, values: Vec<f64>) -> Self {
        Self { vectors, values }
    }

    pub fn num_vertices(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// N x m eigenvector matrix.
    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    /// Ascending eigenvalues.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Check orthonormality, the per-column eigen residual against `l`, and
    /// eigenvalue ordering, at tolerance [`BASIS_TOL`].
    pub fn verify(&self, l: &CsrMatrix) -> Result<()> {
        let m = self.len();
        let gram = self.vectors.transpose() * &self.vectors;
        let mut ortho = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let target = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((gram[(i, j)] - target).abs());
            }
        }
        if ortho > BASIS_TOL {
            return Err(Error::numerical(format!(
                "spectral basis not orthonormal: deviation {ortho:.3e}"
            )));
        }
        if self.values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::numerical("eigenvalues not ascending"));
        }
        let n = self.num_vertices();
        let mut lv = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..m {
            for i in 0..n {
                col[i] = self.vectors[(i, j)];
            }
            l.mul_vec(&col, &mut lv);
            let mut res2 = 0.0;
            for i in 0..n {
                let r = lv[i] - self.values[j] * col[i];
                res2 += r * r;
            }
            let res = fmath::sqrt(res2);
            if res > BASIS_TOL {
                return Err(Error::NonConvergence {
                    what: "spectral basis residual",
                    residual: res,
                    tolerance: BASIS_TOL,
                });
            }
        }
        Ok(())
    }
}

/// Build the union-symmetrized k-NN graph with Gaussian weights
/// `w_ij = exp(-||x_i - x_j||^2 / (2 sigma_b^2))`.
///
/// `features` holds `n` points of `dim` coordinates each, row-major. An edge
/// is kept when either endpoint ranks the other among its `k` nearest by
/// Euclidean distance; ties on distance break by index. Duplicate points are
/// legal and connect with weight 1.
pub fn build_knn_graph(
    features: &[f64],
    dim: usize,
    k: usize,
    rule: BandwidthRule,
) -> Result<RegionGraph> {
    if dim == 0 || features.len() % dim != 0 {
        return Err(Error::invalid("feature buffer length not a multiple of dim"));
    }
    let n = features.len() / dim;
    if n < 2 {
        return Err(Error::invalid("need at least two points"));
    }
    if k == 0 {
        return Err(Error::invalid("neighbor count k must be positive"));
    }
    if k >= n {
        return Err(Error::invalid(format!(
            "neighbor count k = {k} must be smaller than the point count {n}"
        )));
    }
    if !features.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("features must be finite"));
    }

    let row = |i: usize| &features[i * dim..(i + 1) * dim];

    // Directed k-NN hits, then union symmetrization.
    let mut adj: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    let mut cand: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        cand.clear();
        let xi = row(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let xj = row(j);
            let mut d2 = 0.0;
            for (a, b) in xi.iter().zip(xj) {
                let diff = a - b;
                d2 += diff * diff;
            }
            cand.push((d2, j as u32));
        }
        let cmp = |a: &(f64, u32), b: &(f64, u32)| {
            a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1))
        };
        cand.select_nth_unstable_by(k - 1, cmp);
        for &(d2, j) in &cand[..k] {
            adj[i].push((j, d2));
            adj[j as usize].push((i as u32, d2));
        }
    }
    for list in &mut adj {
        list.sort_by_key(|&(c, _)| c);
        list.dedup_by_key(|&mut (c, _)| c);
    }

    // Each undirected edge counted once for the bandwidth statistic.
    let bandwidth = match rule {
        BandwidthRule::Fixed(s) => {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("fixed bandwidth must be positive and finite"));
            }
            s
        }
        BandwidthRule::MedianKnn => {
            let mut dists: Vec<f64> = Vec::new();
            for (i, list) in adj.iter().enumerate() {
                for &(j, d2) in list {
                    if (j as usize) > i {
                        dists.push(fmath::sqrt(d2));
                    }
                }
            }
            dists.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
            let mid = dists.len() / 2;
            let median = if dists.len() % 2 == 1 {
                dists[mid]
            } else {
                0.5 * (dists[mid - 1] + dists[mid])
            };
            // All retained distances zero means every connected pair is a
            // duplicate; any bandwidth then yields weight exp(0) = 1.
            if median > 0.0 {
                median
            } else {
                1.0
            }
        }
    };

    let inv_two_sigma2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let rows: Vec<Vec<(u32, f64)>> = adj
        .into_iter()
        .map(|list| {
            list.into_iter()
                // The true kernel value is positive for any finite distance;
                // flooring at the smallest normal float keeps extreme outliers
                // attached instead of leaving a zero-degree vertex.
                .map(|(j, d2)| (j, fmath::exp(-d2 * inv_two_sigma2).max(f64::MIN_POSITIVE)))
                .collect()
        })
        .collect();
    let weights = CsrMatrix::from_sorted_rows(n, &rows)?;
    let degrees = weights.row_sums();
    Ok(RegionGraph {
        weights,
        degrees,
        bandwidth,
    })
}

/// Normalized Laplacian `L = I - D^{-1/2} W D^{-1/2}` as a sparse symmetric
/// matrix with unit diagonal.
pub fn normalized_laplacian(graph: &RegionGraph) -> Result<CsrMatrix> {
    let n = graph.num_vertices();
    let inv_sqrt: Vec<f64> = graph
        .degrees
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
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let (cols, vals) = graph.weights.row(i);
        let mut out = Vec::with_capacity(cols.len() + 1);
        let mut diagonal_placed = false;
        for (&c, &w) in cols.iter().zip(vals) {
            if !diagonal_placed && (c as usize) > i {
                out.push((i as u32, 1.0));
                diagonal_placed = true;
            }
            out.push((c, -w * inv_sqrt[i] * inv_sqrt[c as usize]));
        }
        if !diagonal_placed {
            out.push((i as u32, 1.0));
        }
        rows.push(out);
    }
    CsrMatrix::from_sorted_rows(n, &rows)
}

/// The `m` algebraically smallest eigenpairs of `l`.
pub fn spectral_basis(l: &CsrMatrix, m: usize, method: EigMethod) -> Result<SpectralBasis> {
    let n = l.dim();
    if m == 0 {
        return Err(Error::invalid("basis size m must be positive"));
    }
    if m > n {
        return Err(Error::invalid(format!(
            "basis size m = {m} exceeds vertex count {n}"
        )));
    }
    let use_dense = match method {
        EigMethod::Dense => true,
        EigMethod::Lanczos => false,
        EigMethod::Auto => n <= DENSE_LIMIT,
    };
    let basis = if use_dense {
        dense_smallest(l, m)?
    } else {
        lanczos::smallest_eigenpairs(l, m)?
    };
    basis.verify(l)?;
    Ok(basis)
}

fn dense_smallest(l: &CsrMatrix, m: usize) -> Result<SpectralBasis> {
    let n = l.dim();
    if n == 1 {
        let vectors = Mat::from_element(1, 1, 1.0);
        let dense = l.to_dense();
        return Ok(SpectralBasis::new(vectors, vec![dense[(0, 0)]]));
    }
    // Householder reduction to tridiagonal form, then an implicit-shift QL
    // pass that stays accurate on repeated eigenvalues (see `tridiag`).
    let (q, diag, off) = nalgebra::SymmetricTridiagonal::new(l.to_dense()).unpack();
    let mut values: Vec<f64> = diag.iter().copied().collect();
    let off: Vec<f64> = off.iter().copied().collect();
    let mut z = q;
    tridiag::symmetric_tridiagonal_eigen(&mut values, &off, &mut z)?;
    let mut vectors = Mat::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            vectors[(i, j)] = z[(i, j)];
        }
    }
    values.truncate(m);
    fix_signs(&mut vectors);
    Ok(SpectralBasis::new(vectors, values))
}

/// Flip each column so its first entry of largest absolute value is positive.
pub(crate) fn fix_signs(vectors: &mut Mat) {
    let (n, m) = vectors.shape();
    for j in 0..m {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..n {
            let a = vectors[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if vectors[(best, j)] < 0.0 {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
}

#[cfg(test)]
mod tests;
