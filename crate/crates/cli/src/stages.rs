//! Shared stage plumbing for the subcommands: image loading, segmentation,
//! graph construction, label solving, and staged output directories whose
//! partial contents vanish on error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tagparse_core::eval::{assign_labels, render_label_maps, LabelAssignment};
use tagparse_core::graph::{
    build_knn_graph, normalized_laplacian, spectral_basis, RegionGraph, SpectralBasis,
};
use tagparse_core::labels::TagTable;
use tagparse_core::pipeline::initial_labels;
use tagparse_core::raster::{LabelMap, Rgb8Image};
use tagparse_core::regions::{RegionSet, FEATURE_DIM};
use tagparse_core::segment::{
    describe_all_regions, fit_gmm_em, pixel_features, segment_image, RegionMap,
};
use tagparse_core::Mat;

use crate::config::RunConfig;
use crate::error::{with_path, CliError, Result};
use crate::report::StageTimings;
use crate::{pngio, pnm};

/// List files in `dir` with one of `extensions`, sorted by file name so image
/// ids are stable across runs and machines.
pub fn sorted_files(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = with_path(fs::read_dir(dir), dir)?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = with_path(entry, dir)?.path();
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| e.eq_ignore_ascii_case(x)));
        if matches {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!(
            "{}: no files with extension {}",
            dir.display(),
            extensions.join("/")
        )));
    }
    Ok(paths)
}

/// Load every color image in `dir` (PNG or PPM), sorted by file name.
pub fn load_images(dir: &Path) -> Result<Vec<Rgb8Image>> {
    sorted_files(dir, &["png", "ppm"])?
        .iter()
        .map(|path| {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext.eq_ignore_ascii_case("png") {
                pngio::read_png(path)
            } else {
                pnm::read_ppm(path)
            }
        })
        .collect()
}

/// Load every 8-bit label map in `dir`, sorted by file name.
pub fn load_label_maps(dir: &Path) -> Result<Vec<LabelMap>> {
    sorted_files(dir, &["pgm"])?
        .iter()
        .map(|path| pnm::read_label_pgm(path))
        .collect()
}

/// Load every region map in `dir`, sorted by file name, revalidating region
/// structure.
pub fn load_region_maps(dir: &Path) -> Result<Vec<RegionMap>> {
    sorted_files(dir, &["pgm"])?
        .iter()
        .map(|path| {
            let (width, height, labels) = pnm::read_region_pgm(path)?;
            RegionMap::new(width, height, labels)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Oversegment every image and pool the region descriptors.
pub fn segment_stage(
    images: &[Rgb8Image],
    config: &RunConfig,
) -> Result<(Vec<RegionMap>, RegionSet)> {
    let scene = config.scene_config();
    let mut region_maps = Vec::with_capacity(images.len());
    let mut per_image = Vec::with_capacity(images.len());
    for (i, image) in images.iter().enumerate() {
        let features = pixel_features(image)?;
        let gmm = fit_gmm_em(
            &features,
            scene.gmm_components,
            scene.gmm_max_iter,
            scene.gmm_tol,
            image_seed(scene.seed, i),
        )?;
        let map = segment_image(&features, &gmm, scene.min_region_frac)?;
        per_image.push(describe_all_regions(image, &features, &map, i)?);
        region_maps.push(map);
    }
    let regions = RegionSet::from_descriptors(&per_image)?;
    Ok((region_maps, regions))
}

/// Mirror of the per-image seed derivation used by the in-crate pipeline, so
/// stage-wise runs and single-shot runs segment identically.
fn image_seed(base: u64, image: usize) -> u64 {
    base ^ (image as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Build the k-NN graph and spectral basis from a pooled region table.
pub fn graph_stage(regions: &RegionSet, config: &RunConfig) -> Result<(RegionGraph, SpectralBasis)> {
    if config.k >= regions.len() {
        return Err(CliError::data(format!(
            "k = {} must be below the region count {}",
            config.k,
            regions.len()
        )));
    }
    if config.m > regions.len() {
        return Err(CliError::data(format!(
            "m = {} must not exceed the region count {}",
            config.m,
            regions.len()
        )));
    }
    let scene = config.scene_config();
    let graph = build_knn_graph(regions.features_flat(), FEATURE_DIM, config.k, scene.bandwidth)?;
    let laplacian = normalized_laplacian(&graph)?;
    let basis = spectral_basis(&laplacian, config.m, scene.eig)?;
    Ok((graph, basis))
}

/// Tag-dependent half of a parse: initial labels from tags, then scores from
/// the chosen solver.
pub struct ScoredLabels {
    pub scores: Mat,
    pub assignment: LabelAssignment,
    pub maps: Vec<LabelMap>,
}

/// Assign hard labels and paint per-pixel maps when region maps are at hand.
pub fn score_stage(scores: Mat, region_maps: Option<&[RegionMap]>) -> Result<ScoredLabels> {
    let assignment = assign_labels(&scores)?;
    let maps = match region_maps {
        Some(region_maps) => render_label_maps(region_maps, &assignment.categories)?,
        None => Vec::new(),
    };
    Ok(ScoredLabels {
        scores,
        assignment,
        maps,
    })
}

/// Build the solver-ready initial label matrix from regions and tags.
pub fn label_stage(regions: &RegionSet, tags: &TagTable, alpha: f64) -> Result<Mat> {
    if tags.num_images() != regions.num_images() {
        return Err(CliError::data(format!(
            "tag table covers {} images but the region table covers {}",
            tags.num_images(),
            regions.num_images()
        )));
    }
    initial_labels(regions, tags, alpha).map_err(Into::into)
}

/// Run `stage` under a label, tagging any error with it and recording the
/// elapsed time.
pub fn timed<T>(
    timings: &mut StageTimings,
    label: &'static str,
    stage: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let start = Instant::now();
    let result = stage().map_err(|e| e.in_stage(label));
    timings.push(label, start.elapsed());
    result
}

/// An output directory that comes into place only on success: contents are
/// staged in a sibling, then swapped in, so a failed run leaves no partial
/// outputs behind.
pub struct StagedDir {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl StagedDir {
    pub fn create(target: &Path) -> Result<Self> {
        if target.exists() {
            // Every subcommand's output carries one of these markers, so a
            // previous run may be replaced but arbitrary directories may not.
            let is_our_output = target.join("report.txt").exists()
                || target.join("tags.tsv").exists()
                || target.join("regions.tsv").exists();
            let is_empty = target
                .read_dir()
                .map(|mut d| d.next().is_none())
                .unwrap_or(false);
            if !is_our_output && !is_empty {
                return Err(CliError::data(format!(
                    "{}: refusing to overwrite a directory that is not a previous run",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| CliError::usage("output path needs a directory name"))?;
        let mut staging_name = name.to_os_string();
        staging_name.push(".partial");
        let staging = target.with_file_name(staging_name);
        if staging.exists() {
            with_path(fs::remove_dir_all(&staging), &staging)?;
        }
        with_path(fs::create_dir_all(&staging), &staging)?;
        Ok(StagedDir {
            staging,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    /// Path to write into while the run is in flight.
    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.staging.join(name);
        with_path(fs::create_dir_all(&dir), &dir)?;
        Ok(dir)
    }

    /// Swap the staged contents into the target path.
    pub fn commit(mut self) -> Result<()> {
        if self.target.exists() {
            with_path(fs::remove_dir_all(&self.target), &self.target)?;
        }
        with_path(fs::rename(&self.staging, &self.target), &self.staging)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for StagedDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

/// File name for the `i`-th output of a kind, zero-padded for stable sorting.
pub fn numbered(prefix: &str, i: usize, ext: &str) -> String {
    format!("{prefix}_{i:05}.{ext}")
}
