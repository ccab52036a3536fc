//! On-disk cache of the region graph and its spectral basis, keyed by a
//! content hash of the feature table and the graph parameters. The format is
//! little-endian binary behind an eight-byte version magic; loads revalidate
//! every structural invariant, so a stale or corrupt file can only fail, not
//! poison a run.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use tagparse_core::graph::{normalized_laplacian, RegionGraph, SpectralBasis};
use tagparse_core::regions::{RegionSet, FEATURE_DIM};
use tagparse_core::sparse::CsrMatrix;
use tagparse_core::Mat;

use crate::error::{with_path, CliError, Result};

const MAGIC: &[u8; 8] = b"TPGC0001";

/// Hash of everything the cached graph and basis depend on.
pub fn content_hash(regions: &RegionSet, k: usize, m: usize) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((FEATURE_DIM as u64).to_le_bytes());
    hasher.update((regions.len() as u64).to_le_bytes());
    for v in regions.features_flat() {
        hasher.update(v.to_le_bytes());
    }
    hasher.update((k as u64).to_le_bytes());
    hasher.update((m as u64).to_le_bytes());
    hasher.finalize().into()
}

pub fn write_cache(
    path: &Path,
    regions: &RegionSet,
    k: usize,
    graph: &RegionGraph,
    basis: &SpectralBasis,
) -> Result<()> {
    let n = graph.num_vertices();
    let m = basis.len();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&content_hash(regions, k, m));
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&graph.bandwidth().to_le_bytes());
    let w = graph.weights();
    out.extend_from_slice(&(w.nnz() as u64).to_le_bytes());
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0u64);
    for r in 0..n {
        row_ptr.push(row_ptr[r] + w.row(r).0.len() as u64);
    }
    for p in &row_ptr {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for r in 0..n {
        for &c in w.row(r).0 {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for r in 0..n {
        for &v in w.row(r).1 {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for v in basis.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in basis.vectors().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    with_path(fs::write(path, out), path)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let slice = self
            .data
            .get(self.pos..self.pos + n)
            .ok_or_else(|| CliError::data(format!("{}: truncated cache", self.path.display())))?;
        self.pos += n;
        Ok(slice)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Load a cache written for exactly these regions and parameters; any
/// mismatch — version, hash, structure, or eigen-residual — is a data error.
pub fn read_cache(
    path: &Path,
    regions: &RegionSet,
    k: usize,
    m: usize,
) -> Result<(RegionGraph, SpectralBasis)> {
    let data = with_path(fs::read(path), path)?;
    let mut cur = Cursor {
        data: &data,
        pos: 0,
        path,
    };
    if cur.take(8)? != MAGIC {
        return Err(CliError::data(format!(
            "{}: not a graph cache (or unsupported version)",
            path.display()
        )));
    }
    let stored_hash = cur.take(32)?;
    if stored_hash != content_hash(regions, k, m) {
        return Err(CliError::data(format!(
            "{}: cache does not match the region table and parameters",
            path.display()
        )));
    }
    let n = cur.u64()? as usize;
    let file_k = cur.u64()? as usize;
    let file_m = cur.u64()? as usize;
    if n != regions.len() || file_k != k || file_m != m {
        return Err(CliError::data(format!(
            "{}: cache header disagrees with its own hash inputs",
            path.display()
        )));
    }
    let bandwidth = cur.f64()?;
    let nnz = cur.u64()? as usize;
    let mut row_ptr = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        row_ptr.push(cur.u64()? as usize);
    }
    if row_ptr[0] != 0 || row_ptr[n] != nnz {
        return Err(CliError::data(format!(
            "{}: inconsistent row offsets",
            path.display()
        )));
    }
    let mut cols = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        cols.push(cur.u32()?);
    }
    let mut vals = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        vals.push(cur.f64()?);
    }
    let mut rows = Vec::with_capacity(n);
    for r in 0..n {
        let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
        if lo > hi || hi > nnz {
            return Err(CliError::data(format!(
                "{}: inconsistent row offsets",
                path.display()
            )));
        }
        rows.push(
            cols[lo..hi]
                .iter()
                .copied()
                .zip(vals[lo..hi].iter().copied())
                .collect::<Vec<_>>(),
        );
    }
    let weights = CsrMatrix::from_sorted_rows(n, &rows)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let graph = RegionGraph::from_parts(weights, bandwidth)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(m);
    for _ in 0..m {
        values.push(cur.f64()?);
    }
    let mut vectors = Mat::zeros(n, m);
    for v in vectors.iter_mut() {
        *v = cur.f64()?;
    }
    if cur.pos != data.len() {
        return Err(CliError::data(format!(
            "{}: trailing bytes after cache payload",
            path.display()
        )));
    }
    let basis = SpectralBasis::new(vectors, values);
    let laplacian = normalized_laplacian(&graph)?;
    basis
        .verify(&laplacian)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok((graph, basis))
}
