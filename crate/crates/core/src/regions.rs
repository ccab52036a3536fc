//! The pooled region table every learning stage works on.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::segment::RegionDescriptor;

/// Length of a region feature vector: 3 mean colors, 3 color standard
/// deviations, 3 mean textures, 3 texture standard deviations and a 125-bin
/// color histogram.
pub const FEATURE_DIM: usize = 137;

/// All regions pooled across the image collection. Row `i` of `features`
/// describes region `i`; `rho[i]` is the fraction of its image the region
/// covers and `image_index[i]` identifies that image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    features: Vec<f64>,
    rho: Vec<f64>,
    image_index: Vec<usize>,
    num_images: usize,
}

impl RegionSet {
    pub fn new(
        features: Vec<f64>,
        rho: Vec<f64>,
        image_index: Vec<usize>,
        num_images: usize,
    ) -> Result<Self> {
        let n = rho.len();
        if features.len() != n * FEATURE_DIM {
            return Err(Error::invalid(format!(
                "feature buffer holds {} values, expected {} regions x {}",
                features.len(),
                n,
                FEATURE_DIM
            )));
        }
        if image_index.len() != n {
            return Err(Error::invalid("image_index length does not match region count"));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("region features must be finite"));
        }
        for (i, &r) in rho.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::invalid(format!("rho[{i}] = {r} outside (0, 1]")));
            }
        }
        if let Some(&bad) = image_index.iter().find(|&&m| m >= num_images) {
            return Err(Error::invalid(format!(
                "image index {bad} out of range for {num_images} images"
            )));
        }
        Ok(Self {
            features,
            rho,
            image_index,
            num_images,
        })
    }

    /// Pool per-image descriptor lists into one region table. Regions keep
    /// their per-image order; image `i`'s regions precede image `i+1`'s.
    pub fn from_descriptors(per_image: &[Vec<RegionDescriptor>]) -> Result<Self> {
        let num_images = per_image.len();
        let n: usize = per_image.iter().map(|d| d.len()).sum();
        let mut features = Vec::with_capacity(n * FEATURE_DIM);
        let mut rho = Vec::with_capacity(n);
        let mut image_index = Vec::with_capacity(n);
        for (img, descriptors) in per_image.iter().enumerate() {
            for d in descriptors {
                features.extend_from_slice(&d.feature);
                rho.push(d.rho);
                image_index.push(img);
            }
        }
        Self::new(features, rho, image_index, num_images)
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn num_images(&self) -> usize {
        self.num_images
    }

    #[inline]
    pub fn feature(&self, region: usize) -> &[f64] {
        &self.features[region * FEATURE_DIM..(region + 1) * FEATURE_DIM]
    }

    pub fn features_flat(&self) -> &[f64] {
        &self.features
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn image_index(&self) -> &[usize] {
        &self.image_index
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_mismatched_lengths() {
        let err = RegionSet::new(vec![0.0; FEATURE_DIM], vec![0.5, 0.5], vec![0, 0], 1);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_rho_outside_unit_interval() {
        let err = RegionSet::new(vec![0.0; FEATURE_DIM], vec![1.5], vec![0], 1);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
        let err = RegionSet::new(vec![0.0; FEATURE_DIM], vec![0.0], vec![0], 1);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_unknown_image_index() {
        let err = RegionSet::new(vec![0.0; FEATURE_DIM], vec![0.5], vec![3], 2);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
