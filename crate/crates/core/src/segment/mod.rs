//! Oversegmentation of RGB images into contiguous regions plus the region
//! descriptors consumed by the graph and solver stages.
//!
//! The stages per image: convert pixels to 6-d color + texture features,
//! fit an intentionally oversized Gaussian mixture, cut the pixel
//! assignments into 4-connected regions with small ones merged away, and
//! summarize each region as a 137-d descriptor (channel means and standard
//! deviations plus a 5x5x5 color histogram) together with its area share.

mod color;
mod descriptor;
mod gmm;
mod partition;
mod texture;

pub use descriptor::{describe_all_regions, region_descriptor};
pub use gmm::{
    fit_gmm_em, fit_gmm_em_traced, GaussianMixture, GmmComponent, COVARIANCE_FLOOR, WEIGHT_FLOOR,
};
pub use partition::segment_image;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::Rgb8Image;
use crate::regions::FEATURE_DIM;

/// Channels per pixel: CIELAB L, a, b, then anisotropy, contrast, polarity.
pub const PIXEL_FEATURE_DIM: usize = 6;

/// Per-pixel 6-d feature planes of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelFeatureMap {
    width: usize,
    height: usize,
    /// Row-major, [`PIXEL_FEATURE_DIM`] interleaved values per pixel.
    data: Vec<f64>,
}

impl PixelFeatureMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("feature map must be non-empty"));
        }
        if data.len() != width * height * PIXEL_FEATURE_DIM {
            return Err(Error::invalid(format!(
                "feature buffer holds {} values for a {width}x{height} map",
                data.len()
            )));
        }
        for px in data.chunks_exact(PIXEL_FEATURE_DIM) {
            if px.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("pixel features must be finite"));
            }
            if !(0.0..=1.0).contains(&px[3]) || px[4] < 0.0 || !(0.0..=1.0).contains(&px[5]) {
                return Err(Error::invalid(
                    "texture features out of range: anisotropy and polarity lie in [0,1], contrast is non-negative",
                ));
            }
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false // construction forbids zero-size maps
    }

    /// The 6 feature values of the pixel at a row-major index.
    #[inline]
    pub fn pixel(&self, index: usize) -> &[f64] {
        &self.data[index * PIXEL_FEATURE_DIM..(index + 1) * PIXEL_FEATURE_DIM]
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64] {
        self.pixel(y * self.width + x)
    }
}

/// Per-pixel region assignment of one segmented image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    num_regions: usize,
}

impl RegionMap {
    /// Validates that labels are contiguous from 0 and that every region is
    /// one 4-connected piece.
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("region map must be non-empty"));
        }
        if labels.len() != width * height {
            return Err(Error::invalid(format!(
                "label buffer holds {} entries for a {width}x{height} map",
                labels.len()
            )));
        }
        let num_regions = labels.iter().max().copied().unwrap_or(0) as usize + 1;
        let mut seen = vec![false; num_regions];
        for &r in &labels {
            seen[r as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "region indices not contiguous: {missing} unused below {num_regions}"
            )));
        }
        let (_, pieces) = partition::connected_components(&labels, width, height);
        if pieces != num_regions {
            return Err(Error::invalid(format!(
                "{num_regions} regions split into {pieces} 4-connected pieces"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            num_regions,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_regions(&self) -> usize {
        self.num_regions
    }

    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Pixel count per region.
    pub fn region_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_regions];
        for &r in &self.labels {
            sizes[r as usize] += 1;
        }
        sizes
    }
}

/// One region summarized for the downstream graph: the 137-d feature vector
/// (3 color means, 3 color standard deviations, 3 texture means, 3 texture
/// standard deviations, 125 histogram bins) plus the region's area share
/// and owning image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDescriptor {
    pub feature: [f64; FEATURE_DIM],
    /// Region area / image area, in (0, 1].
    pub rho: f64,
    pub image_id: usize,
}

/// Per-pixel CIELAB color and texture features of an RGB image.
pub fn pixel_features(image: &Rgb8Image) -> Result<PixelFeatureMap> {
    let (width, height) = (image.width(), image.height());
    let mut data = vec![0.0; width * height * PIXEL_FEATURE_DIM];
    let mut l_plane = vec![0.0; width * height];
    for y in 0..height {
        for x in 0..width {
            let [r, g, b] = image.get(x, y);
            let lab = color::srgb_to_lab(r, g, b);
            let idx = y * width + x;
            data[idx * PIXEL_FEATURE_DIM..idx * PIXEL_FEATURE_DIM + 3].copy_from_slice(&lab);
            l_plane[idx] = lab[0];
        }
    }
    let tex = texture::texture_features(&l_plane, width, height);
    for (idx, t) in tex.iter().enumerate() {
        data[idx * PIXEL_FEATURE_DIM + 3..(idx + 1) * PIXEL_FEATURE_DIM].copy_from_slice(t);
    }
    PixelFeatureMap::new(width, height, data)
}
