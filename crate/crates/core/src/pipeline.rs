//! End-to-end orchestration: images + tags in, per-region label scores out.
//!
//! The stages are split along their data dependencies. Everything that
//! depends only on the images — segmentation, descriptors, the region
//! graph, and its spectral basis — lives in [`SceneModel`] and is built
//! once. Everything downstream of the tags — initial labels, smoothing,
//! context propagation, and the solvers — runs per tag table, so sweeping
//! tag corruption levels reuses one scene model.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::graph::{
    build_knn_graph, normalized_laplacian, spectral_basis, BandwidthRule, EigMethod, RegionGraph,
    SpectralBasis,
};
use crate::labels::{context_matrix, context_propagate, infer_initial_labels, size_smooth, TagTable};
use crate::raster::Rgb8Image;
use crate::regions::RegionSet;
use crate::segment::{
    describe_all_regions, fit_gmm_em, pixel_features, segment_image, RegionMap,
};
use crate::solver::{lgc_baseline, wssl_solve, SolveReport, SolverParams};
use crate::Mat;

/// Knobs for the tag-independent half of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Mixture components fitted per image before pruning.
    pub gmm_components: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: f64,
    /// Regions below this fraction of the image area are merged away.
    pub min_region_frac: f64,
    /// Neighbors per region in the k-NN graph.
    pub knn: usize,
    /// Spectral basis size (smallest-eigenvalue count).
    pub basis_size: usize,
    pub bandwidth: BandwidthRule,
    pub eig: EigMethod,
    /// Base seed; each image's mixture fit derives its own stream from it.
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            gmm_components: 10,
            gmm_max_iter: 60,
            gmm_tol: 1e-6,
            min_region_frac: 0.005,
            knn: 550,
            basis_size: 35,
            bandwidth: BandwidthRule::MedianKnn,
            eig: EigMethod::Auto,
            seed: 0,
        }
    }
}

/// One image's segmentation output kept alongside the pooled structures.
#[derive(Debug, Clone)]
pub struct SceneModel {
    pub region_maps: Vec<RegionMap>,
    pub regions: RegionSet,
    pub graph: RegionGraph,
    pub basis: SpectralBasis,
}

/// Decorrelate per-image mixture seeds from one base seed.
fn image_seed(base: u64, image: usize) -> u64 {
    base ^ (image as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Segment every image, pool the region descriptors, and build the region
/// graph with its spectral basis.
pub fn build_scene_model(images: &[Rgb8Image], config: &SceneConfig) -> Result<SceneModel> {
    if images.is_empty() {
        return Err(Error::invalid("need at least one image"));
    }
    let mut region_maps = Vec::with_capacity(images.len());
    let mut per_image = Vec::with_capacity(images.len());
    for (i, image) in images.iter().enumerate() {
        let features = pixel_features(image)?;
        let gmm = fit_gmm_em(
            &features,
            config.gmm_components,
            config.gmm_max_iter,
            config.gmm_tol,
            image_seed(config.seed, i),
        )?;
        let map = segment_image(&features, &gmm, config.min_region_frac)?;
        per_image.push(describe_all_regions(image, &features, &map, i)?);
        region_maps.push(map);
    }
    let regions = RegionSet::from_descriptors(&per_image)?;
    if config.knn >= regions.len() {
        return Err(Error::invalid(
            "neighbor count must be below the pooled region count",
        ));
    }
    if config.basis_size > regions.len() {
        return Err(Error::invalid(
            "basis size must not exceed the pooled region count",
        ));
    }
    let graph = build_knn_graph(
        regions.features_flat(),
        crate::regions::FEATURE_DIM,
        config.knn,
        config.bandwidth,
    )?;
    let laplacian = normalized_laplacian(&graph)?;
    let basis = spectral_basis(&laplacian, config.basis_size, config.eig)?;
    Ok(SceneModel {
        region_maps,
        regions,
        graph,
        basis,
    })
}

/// Tag-dependent label preparation: indicator labels, area smoothing, and
/// context propagation. Returns the solver-ready initial label matrix.
///
/// Propagation is an exact linear solve of a nonnegative system, so any
/// negative output entry is round-off; entries within 1e-12 of zero are
/// clamped and anything more negative is reported as a numerical error.
pub fn initial_labels(regions: &RegionSet, tags: &TagTable, alpha: f64) -> Result<Mat> {
    let raw = infer_initial_labels(regions, tags)?;
    let smoothed = size_smooth(&raw, regions)?;
    let context = context_matrix(tags)?;
    let mut propagated = context_propagate(&smoothed, &context.matrix, alpha)?;
    for value in propagated.iter_mut() {
        if *value < 0.0 {
            if *value < -1e-12 {
                return Err(Error::numerical(
                    "context propagation produced a significantly negative label",
                ));
            }
            *value = 0.0;
        }
    }
    Ok(propagated)
}

/// Sparse-label solve on the scene model's spectral basis.
pub fn parse_with_wssl(
    model: &SceneModel,
    initial: &Mat,
    params: &SolverParams,
) -> Result<(Mat, SolveReport)> {
    wssl_solve(&model.basis, initial, params)
}

/// Plain label-propagation baseline on the scene model's graph.
pub fn parse_with_lgc(model: &SceneModel, initial: &Mat, alpha: f64) -> Result<Mat> {
    lgc_baseline(&model.graph, initial, alpha)
}
