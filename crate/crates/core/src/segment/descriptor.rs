//! Region descriptors: channel statistics plus a joint color histogram.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{PixelFeatureMap, RegionDescriptor, RegionMap, PIXEL_FEATURE_DIM};
use crate::error::{Error, Result};
use crate::fmath;
use crate::raster::Rgb8Image;
use crate::regions::FEATURE_DIM;

/// Histogram bins per color channel; the joint histogram has `BINS^3` cells.
const BINS: usize = 5;

/// Fixed channel ranges the histogram divides evenly: L in [0, 100], a and
/// b in [-110, 110]. Values outside (possible only marginally) clamp into
/// the end bins, keeping descriptors comparable across images.
const CHANNEL_LO: [f64; 3] = [0.0, -110.0, -110.0];
const CHANNEL_SPAN: [f64; 3] = [100.0, 220.0, 220.0];

fn histogram_bin(lab: &[f64]) -> usize {
    let mut bin = 0;
    for c in 0..3 {
        let t = (lab[c] - CHANNEL_LO[c]) / CHANNEL_SPAN[c] * BINS as f64;
        let b = (t as i64).clamp(0, BINS as i64 - 1) as usize;
        bin = bin * BINS + b;
    }
    bin
}

/// Summarize one region: means and population standard deviations of the 6
/// feature channels, the normalized 125-bin color histogram, and the area
/// share. The descriptor's `image_id` is 0; callers pooling several images
/// assign it (see [`describe_all_regions`]).
pub fn region_descriptor(
    image: &Rgb8Image,
    features: &PixelFeatureMap,
    region_map: &RegionMap,
    region_index: usize,
) -> Result<RegionDescriptor> {
    if image.width() != features.width()
        || image.height() != features.height()
        || image.width() != region_map.width()
        || image.height() != region_map.height()
    {
        return Err(Error::invalid("image, feature map, and region map sizes differ"));
    }
    if region_index >= region_map.num_regions() {
        return Err(Error::invalid(format!(
            "region {region_index} out of range for {} regions",
            region_map.num_regions()
        )));
    }
    let target = region_index as u32;
    let area = features.len();
    // Welford accumulation: constant channels come out with an exactly zero
    // variance, and the running mean stays well-conditioned for long regions.
    let mut count = 0usize;
    let mut mean = [0.0; PIXEL_FEATURE_DIM];
    let mut m2 = [0.0; PIXEL_FEATURE_DIM];
    let mut hist = vec![0.0; BINS * BINS * BINS];
    for (idx, &r) in region_map.labels().iter().enumerate() {
        if r == target {
            count += 1;
            let px = features.pixel(idx);
            for c in 0..PIXEL_FEATURE_DIM {
                let delta = px[c] - mean[c];
                mean[c] += delta / count as f64;
                m2[c] += delta * (px[c] - mean[c]);
            }
            hist[histogram_bin(&px[..3])] += 1.0;
        }
    }
    debug_assert!(count > 0, "validated region maps have no empty regions");
    let mut var = m2;
    for v in &mut var {
        *v /= count as f64;
    }
    for h in &mut hist {
        *h /= count as f64;
    }

    let mut feature = [0.0; FEATURE_DIM];
    feature[..3].copy_from_slice(&mean[..3]);
    for c in 0..3 {
        feature[3 + c] = fmath::sqrt(var[c]);
    }
    feature[6..9].copy_from_slice(&mean[3..6]);
    for c in 0..3 {
        feature[9 + c] = fmath::sqrt(var[3 + c]);
    }
    feature[12..].copy_from_slice(&hist);
    Ok(RegionDescriptor {
        feature,
        rho: count as f64 / area as f64,
        image_id: 0,
    })
}

/// Descriptors for every region of one image, tagged with `image_id`.
pub fn describe_all_regions(
    image: &Rgb8Image,
    features: &PixelFeatureMap,
    region_map: &RegionMap,
    image_id: usize,
) -> Result<Vec<RegionDescriptor>> {
    (0..region_map.num_regions())
        .map(|r| {
            region_descriptor(image, features, region_map, r).map(|mut d| {
                d.image_id = image_id;
                d
            })
        })
        .collect()
}
