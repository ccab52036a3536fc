//! Full-covariance Gaussian mixtures over the 6-d pixel features.
//!
//! EM with a deterministic k-means++ seeding. Instead of a model-selection
//! criterion, the mixture starts intentionally large and is cut down after
//! convergence: exact-duplicate components merge, components below a weight
//! floor drop, and the survivors renormalize. Covariances are kept positive
//! definite by flooring their eigenvalues, which is the exact constrained
//! M-step (the objective separates in the scatter matrix's eigenbasis), so
//! the likelihood ascent property survives the floor.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{PixelFeatureMap, PIXEL_FEATURE_DIM};
use crate::error::{Error, Result};
use crate::fmath;
use crate::Mat;

const DIM: usize = PIXEL_FEATURE_DIM;

/// Components with weight below this are dropped after EM.
pub const WEIGHT_FLOOR: f64 = 0.01;

/// Lower bound on covariance eigenvalues.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Components whose means and covariances agree entrywise within this merge.
const DUPLICATE_TOL: f64 = 1e-9;

const LOG_TWO_PI: f64 = 1.837877066409345483560659472811235279722794947275566825634303;

/// One mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: [f64; DIM],
    /// 6x6 symmetric positive-definite covariance.
    pub covariance: Mat,
}

/// A fitted mixture; construction validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GmmComponent>,
}

impl GaussianMixture {
    pub fn new(components: Vec<GmmComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let mut total = 0.0;
        for (k, comp) in components.iter().enumerate() {
            if !(comp.weight.is_finite() && comp.weight >= 0.0) {
                return Err(Error::invalid(format!("component {k} has invalid weight")));
            }
            total += comp.weight;
            if comp.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("component {k} has non-finite mean")));
            }
            if comp.covariance.shape() != (DIM, DIM) {
                return Err(Error::invalid(format!("component {k} covariance is not 6x6")));
            }
            for i in 0..DIM {
                for j in 0..DIM {
                    let v = comp.covariance[(i, j)];
                    if !v.is_finite() || (v - comp.covariance[(j, i)]).abs() > 1e-9 {
                        return Err(Error::invalid(format!(
                            "component {k} covariance not finite and symmetric"
                        )));
                    }
                }
            }
            if comp.covariance.clone().cholesky().is_none() {
                return Err(Error::invalid(format!(
                    "component {k} covariance not positive definite"
                )));
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { components })
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[GmmComponent] {
        &self.components
    }

    /// Index of the maximum-responsibility component for one feature vector;
    /// ties resolve to the lowest index.
    pub fn classify(&self, feature: &[f64]) -> usize {
        let prepared = prepare(&self.components);
        argmax_component(&prepared, feature)
    }

    /// Maximum-responsibility component per pixel.
    pub fn classify_map(&self, features: &PixelFeatureMap) -> Vec<u32> {
        let prepared = prepare(&self.components);
        (0..features.len())
            .map(|n| argmax_component(&prepared, features.pixel(n)) as u32)
            .collect()
    }
}

/// Per-component quantities reused across density evaluations.
struct Prepared {
    log_weight: f64,
    mean: [f64; DIM],
    /// Lower Cholesky factor of the covariance.
    lower: Mat,
    log_det: f64,
}

fn prepare(components: &[GmmComponent]) -> Vec<Prepared> {
    components
        .iter()
        .map(|comp| {
            let lower = comp
                .covariance
                .clone()
                .cholesky()
                .expect("covariance positive definite by construction")
                .l();
            let log_det = 2.0 * (0..DIM).map(|i| fmath::ln(lower[(i, i)])).sum::<f64>();
            Prepared {
                log_weight: if comp.weight > 0.0 {
                    fmath::ln(comp.weight)
                } else {
                    f64::NEG_INFINITY
                },
                mean: comp.mean,
                lower,
                log_det,
            }
        })
        .collect()
}

/// Log of the component's Gaussian density at `x`, via one forward
/// substitution against the Cholesky factor.
fn log_density(p: &Prepared, x: &[f64]) -> f64 {
    let mut z = [0.0; DIM];
    for i in 0..DIM {
        let mut s = x[i] - p.mean[i];
        for j in 0..i {
            s -= p.lower[(i, j)] * z[j];
        }
        z[i] = s / p.lower[(i, i)];
    }
    let quad: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (DIM as f64 * LOG_TWO_PI + p.log_det + quad)
}

fn argmax_component(prepared: &[Prepared], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, p) in prepared.iter().enumerate() {
        let score = p.log_weight + log_density(p, x);
        if score > best_score {
            best_score = score;
            best = k;
        }
    }
    best
}

/// Fit a mixture by EM; see [`fit_gmm_em_traced`] for the likelihood trace.
pub fn fit_gmm_em(
    features: &PixelFeatureMap,
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<GaussianMixture> {
    fit_gmm_em_traced(features, k, max_iter, tol, seed).map(|(gmm, _)| gmm)
}

/// Fit a mixture by EM and also return the per-iteration log-likelihood,
/// one entry per E-step (non-decreasing within 1e-9).
///
/// Initialization is k-means++ on the given seed; iteration stops when the
/// relative log-likelihood change drops below `tol` or after `max_iter`
/// update steps. The returned mixture has duplicates merged, low-weight
/// components dropped, and weights renormalized.
pub fn fit_gmm_em_traced(
    features: &PixelFeatureMap,
    k: usize,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<(GaussianMixture, Vec<f64>)> {
    let n = features.len();
    if k == 0 {
        return Err(Error::invalid("component count must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "component count {k} exceeds pixel count {n}"
        )));
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::invalid("tolerance must be finite and non-negative"));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }

    // k-means++ seeding, then shared diagonal covariances from the global
    // per-channel variance.
    let mut weights = vec![1.0 / k as f64; k];
    let mut means = kmeans_pp_centers(features, k, seed);
    let mut covs = vec![global_diagonal_covariance(features); k];

    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * k];
    for _ in 0..max_iter {
        // E-step at the current parameters; also the likelihood evaluation.
        let prepared: Vec<Prepared> = prepare(
            &weights
                .iter()
                .zip(&means)
                .zip(&covs)
                .map(|((&weight, &mean), cov)| GmmComponent {
                    weight,
                    mean,
                    covariance: cov.clone(),
                })
                .collect::<Vec<_>>(),
        );
        let mut ll = 0.0;
        for npix in 0..n {
            let x = features.pixel(npix);
            let row = &mut resp[npix * k..(npix + 1) * k];
            let mut peak = f64::NEG_INFINITY;
            for (p, slot) in prepared.iter().zip(row.iter_mut()) {
                *slot = p.log_weight + log_density(p, x);
                peak = peak.max(*slot);
            }
            let mut sum = 0.0;
            for slot in row.iter_mut() {
                *slot = fmath::exp(*slot - peak);
                sum += *slot;
            }
            ll += peak + fmath::ln(sum);
            for slot in row.iter_mut() {
                *slot /= sum;
            }
        }
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| (ll - prev).abs() / (1.0 + prev.abs()) < tol);
        trace.push(ll);
        if done {
            break;
        }

        // M-step.
        for comp in 0..k {
            let mut mass = 0.0;
            for npix in 0..n {
                mass += resp[npix * k + comp];
            }
            weights[comp] = mass / n as f64;
            if mass <= 1e-12 {
                // Starved component: keep its parameters; the weight floor
                // will discard it after convergence.
                continue;
            }
            let mut mean = [0.0; DIM];
            for npix in 0..n {
                let r = resp[npix * k + comp];
                for (m, &x) in mean.iter_mut().zip(features.pixel(npix)) {
                    *m += r * x;
                }
            }
            for m in &mut mean {
                *m /= mass;
            }
            let mut scatter = Mat::zeros(DIM, DIM);
            for npix in 0..n {
                let r = resp[npix * k + comp];
                let x = features.pixel(npix);
                for i in 0..DIM {
                    let di = x[i] - mean[i];
                    for j in 0..=i {
                        scatter[(i, j)] += r * di * (x[j] - mean[j]);
                    }
                }
            }
            for i in 0..DIM {
                for j in 0..=i {
                    let v = scatter[(i, j)] / mass;
                    scatter[(i, j)] = v;
                    scatter[(j, i)] = v;
                }
            }
            means[comp] = mean;
            covs[comp] = floor_eigenvalues(&scatter);
        }
    }

    let components = prune(weights, means, covs);
    Ok((GaussianMixture::new(components)?, trace))
}

fn kmeans_pp_centers(features: &PixelFeatureMap, k: usize, seed: u64) -> Vec<[f64; DIM]> {
    let n = features.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<[f64; DIM]> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centers.push(copy_pixel(features, first));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(features.pixel(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // Every point coincides with an existing center; any index works
            // and the duplicate components merge after EM.
            first
        };
        let center = copy_pixel(features, next);
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(squared_distance(features.pixel(i), &center));
        }
        centers.push(center);
    }
    centers
}

fn copy_pixel(features: &PixelFeatureMap, index: usize) -> [f64; DIM] {
    let mut out = [0.0; DIM];
    out.copy_from_slice(features.pixel(index));
    out
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

fn global_diagonal_covariance(features: &PixelFeatureMap) -> Mat {
    let n = features.len();
    let mut mean = [0.0; DIM];
    for i in 0..n {
        for (m, &x) in mean.iter_mut().zip(features.pixel(i)) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = [0.0; DIM];
    for i in 0..n {
        for ((v, &x), &m) in var.iter_mut().zip(features.pixel(i)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let mut cov = Mat::zeros(DIM, DIM);
    for (i, &v) in var.iter().enumerate() {
        cov[(i, i)] = (v / n as f64).max(COVARIANCE_FLOOR);
    }
    cov
}

/// Clamp the eigenvalues of a symmetric matrix from below; this is the
/// exact maximizer of the Gaussian likelihood over covariances constrained
/// to eigenvalues >= the floor.
fn floor_eigenvalues(scatter: &Mat) -> Mat {
    let eig = scatter.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&v| v >= COVARIANCE_FLOOR) {
        return scatter.clone();
    }
    let mut out = Mat::zeros(DIM, DIM);
    for q in 0..DIM {
        let lam = eig.eigenvalues[q].max(COVARIANCE_FLOOR);
        for i in 0..DIM {
            for j in 0..DIM {
                out[(i, j)] += lam * eig.eigenvectors[(i, q)] * eig.eigenvectors[(j, q)];
            }
        }
    }
    // Exact symmetry, lost to rounding in the reconstruction.
    for i in 0..DIM {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Merge duplicate components, drop low-weight ones, renormalize.
fn prune(weights: Vec<f64>, means: Vec<[f64; DIM]>, covs: Vec<Mat>) -> Vec<GmmComponent> {
    let k = weights.len();
    let mut merged_weight = weights;
    let mut alive = vec![true; k];
    for i in 0..k {
        if !alive[i] {
            continue;
        }
        for j in (i + 1)..k {
            if !alive[j] {
                continue;
            }
            let mean_close = means[i]
                .iter()
                .zip(&means[j])
                .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL);
            let cov_close = (&covs[i] - &covs[j]).abs().max() <= DUPLICATE_TOL;
            if mean_close && cov_close {
                merged_weight[i] += merged_weight[j];
                alive[j] = false;
            }
        }
    }
    let mut components: Vec<GmmComponent> = (0..k)
        .filter(|&i| alive[i] && merged_weight[i] >= WEIGHT_FLOOR)
        .map(|i| GmmComponent {
            weight: merged_weight[i],
            mean: means[i],
            covariance: covs[i].clone(),
        })
        .collect();
    if components.is_empty() {
        // Pathological configuration (everything under the floor): keep the
        // heaviest surviving component rather than returning nothing.
        let best = (0..k)
            .filter(|&i| alive[i])
            .max_by(|&a, &b| {
                merged_weight[a]
                    .partial_cmp(&merged_weight[b])
                    .expect("finite weights")
            })
            .expect("at least one live component");
        components.push(GmmComponent {
            weight: merged_weight[best],
            mean: means[best],
            covariance: covs[best].clone(),
        });
    }
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for comp in &mut components {
        comp.weight /= total;
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A feature map whose pixels are handed in directly.
    fn map_from_rows(rows: &[[f64; DIM]]) -> PixelFeatureMap {
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        PixelFeatureMap::new(rows.len(), 1, data).unwrap()
    }

    #[test]
    fn identical_pixels_collapse_to_one_component() {
        let pix = [50.0, 2.0, -3.0, 0.5, 1.0, 0.25];
        let rows = vec![pix; 40];
        let gmm = fit_gmm_em(&map_from_rows(&rows), 3, 50, 1e-8, 0).unwrap();
        assert_eq!(gmm.num_components(), 1);
        let comp = &gmm.components()[0];
        assert!((comp.weight - 1.0).abs() < 1e-12);
        for (m, p) in comp.mean.iter().zip(&pix) {
            assert!((m - p).abs() < 1e-9);
        }
    }

    #[test]
    fn separated_clouds_recover_centroids() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let centers: [[f64; 6]; 2] = [
            [20.0, -40.0, 10.0, 0.1, 0.5, 0.2],
            [80.0, 45.0, -30.0, 0.9, 3.0, 0.8],
        ];
        for base in &centers {
            for _ in 0..60 {
                let mut p = *base;
                for (slot, scale) in p.iter_mut().zip([1.0, 1.0, 1.0, 0.01, 0.05, 0.01]) {
                    *slot += rng.gen_range(-1.0..1.0) * scale * 0.003;
                }
                p[3] = p[3].clamp(0.0, 1.0);
                p[5] = p[5].clamp(0.0, 1.0);
                rows.push(p);
            }
        }
        let features = map_from_rows(&rows);
        let gmm = fit_gmm_em(&features, 2, 100, 1e-9, 1).unwrap();
        assert_eq!(gmm.num_components(), 2);
        // Each true centroid must be matched by some component mean.
        for (c, base) in centers.iter().enumerate() {
            let centroid: Vec<f64> = (0..DIM)
                .map(|d| rows[c * 60..(c + 1) * 60].iter().map(|r| r[d]).sum::<f64>() / 60.0)
                .collect();
            let hit = gmm.components().iter().any(|comp| {
                comp.mean
                    .iter()
                    .zip(&centroid)
                    .all(|(m, t)| (m - t).abs() < 1e-2)
            });
            assert!(hit, "no component near centroid of cloud {c} ({base:?})");
        }
    }

    #[test]
    fn log_likelihood_is_non_decreasing() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<[f64; DIM]> = (0..120)
            .map(|_| {
                [
                    rng.gen_range(0.0..100.0),
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(-50.0..50.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..5.0),
                    rng.gen_range(0.0..1.0),
                ]
            })
            .collect();
        let features = map_from_rows(&rows);
        let (_, trace) = fit_gmm_em_traced(&features, 4, 40, 0.0, 2).unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "likelihood dropped: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn classification_prefers_the_nearer_component() {
        let near = [10.0, 0.0, 0.0, 0.1, 0.1, 0.1];
        let far = [90.0, 0.0, 0.0, 0.9, 4.0, 0.9];
        let cov = Mat::identity(DIM, DIM);
        let gmm = GaussianMixture::new(vec![
            GmmComponent { weight: 0.5, mean: near, covariance: cov.clone() },
            GmmComponent { weight: 0.5, mean: far, covariance: cov },
        ])
        .unwrap();
        assert_eq!(gmm.classify(&[12.0, 0.0, 0.0, 0.1, 0.2, 0.1]), 0);
        assert_eq!(gmm.classify(&[88.0, 1.0, 0.0, 0.8, 3.5, 0.9]), 1);
    }

    #[test]
    fn rejects_invalid_fits_and_mixtures() {
        let rows = vec![[0.0; DIM]; 5];
        let features = map_from_rows(&rows);
        assert!(fit_gmm_em(&features, 0, 10, 1e-6, 0).is_err());
        assert!(fit_gmm_em(&features, 6, 10, 1e-6, 0).is_err());
        assert!(GaussianMixture::new(Vec::new()).is_err());
        let bad_weight = GmmComponent {
            weight: 0.5,
            mean: [0.0; DIM],
            covariance: Mat::identity(DIM, DIM),
        };
        assert!(GaussianMixture::new(vec![bad_weight]).is_err());
        let not_pd = GmmComponent {
            weight: 1.0,
            mean: [0.0; DIM],
            covariance: Mat::zeros(DIM, DIM),
        };
        assert!(GaussianMixture::new(vec![not_pd]).is_err());
    }
}
