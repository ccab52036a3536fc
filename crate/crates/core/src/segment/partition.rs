//! From per-pixel mixture assignments to contiguous regions.

use alloc::vec;
use alloc::vec::Vec;

use super::{GaussianMixture, PixelFeatureMap, RegionMap};
use crate::error::{Error, Result};

/// Segment a feature map against its fitted mixture.
///
/// Every pixel goes to its maximum-responsibility component; 4-connected
/// runs of equal assignment become regions; any region covering less than
/// `min_region_frac` of the image is absorbed into the neighbor it shares
/// the longest boundary with, repeatedly, until all survivors are large
/// enough (or only one region remains). Region indices are renumbered in
/// raster order of first appearance.
pub fn segment_image(
    features: &PixelFeatureMap,
    gmm: &GaussianMixture,
    min_region_frac: f64,
) -> Result<RegionMap> {
    if !(min_region_frac.is_finite() && (0.0..1.0).contains(&min_region_frac)) {
        return Err(Error::invalid("min_region_frac must lie in [0, 1)"));
    }
    let (width, height) = (features.width(), features.height());
    let assignments = gmm.classify_map(features);
    let (mut regions, mut count) = connected_components(&assignments, width, height);
    merge_small_regions(&mut regions, &mut count, width, height, min_region_frac);
    canonical_order(&mut regions, count);
    RegionMap::new(width, height, regions)
}

/// Label 4-connected components of equal values, ids assigned in raster
/// order of first appearance. Returns the component map and the count.
pub(crate) fn connected_components(values: &[u32], width: usize, height: usize) -> (Vec<u32>, usize) {
    const UNSET: u32 = u32::MAX;
    let mut out = vec![UNSET; values.len()];
    let mut next = 0u32;
    let mut stack: Vec<usize> = Vec::new();
    for start in 0..values.len() {
        if out[start] != UNSET {
            continue;
        }
        out[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if values[q] == values[p] && out[q] == UNSET {
                    out[q] = next;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        next += 1;
    }
    (out, next as usize)
}

/// Repeatedly absorb the smallest under-threshold region into the neighbor
/// sharing the longest boundary. Ties pick the lowest region id on both
/// sides, keeping the procedure deterministic.
fn merge_small_regions(
    regions: &mut [u32],
    count: &mut usize,
    width: usize,
    height: usize,
    min_region_frac: f64,
) {
    let threshold = min_region_frac * (width * height) as f64;
    while *count > 1 {
        let mut sizes = vec![0usize; *count];
        for &r in regions.iter() {
            sizes[r as usize] += 1;
        }
        let mut small: Option<(usize, usize)> = None; // (size, id)
        for (id, &size) in sizes.iter().enumerate() {
            if (size as f64) < threshold && small.is_none_or(|(s, _)| size < s) {
                small = Some((size, id));
            }
        }
        let Some((_, small)) = small else { break };

        // Shared-boundary length with each neighboring region, counted in
        // adjacent pixel pairs.
        let mut contact = vec![0usize; *count];
        let mut touch = |a: u32, b: u32| {
            if a != b {
                if a as usize == small {
                    contact[b as usize] += 1;
                } else if b as usize == small {
                    contact[a as usize] += 1;
                }
            }
        };
        for y in 0..height {
            for x in 0..width {
                let p = y * width + x;
                if x + 1 < width {
                    touch(regions[p], regions[p + 1]);
                }
                if y + 1 < height {
                    touch(regions[p], regions[p + width]);
                }
            }
        }
        let mut best: Option<(usize, usize)> = None; // (boundary, id)
        for (id, &len) in contact.iter().enumerate() {
            if id != small && len > 0 && best.is_none_or(|(b, _)| len > b) {
                best = Some((len, id));
            }
        }
        // With more than one region on a connected grid a neighbor always
        // exists, but stay defensive.
        let Some((_, target)) = best else { break };
        // Absorbed pixels must point at the target's id *after* the ids
        // above `small` shift down to close the gap.
        let shifted_target = if target > small { target - 1 } else { target } as u32;
        for r in regions.iter_mut() {
            if *r as usize == small {
                *r = shifted_target;
            } else if (*r as usize) > small {
                *r -= 1;
            }
        }
        *count -= 1;
    }
}

/// Renumber ids to raster order of first appearance.
fn canonical_order(regions: &mut [u32], count: usize) {
    const UNSET: u32 = u32::MAX;
    let mut remap = vec![UNSET; count];
    let mut next = 0u32;
    for r in regions.iter() {
        if remap[*r as usize] == UNSET {
            remap[*r as usize] = next;
            next += 1;
        }
    }
    for r in regions.iter_mut() {
        *r = remap[*r as usize];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::{fit_gmm_em, pixel_features, GmmComponent};
    use crate::raster::Rgb8Image;
    use crate::Mat;

    fn two_tone_image(width: usize, height: usize) -> Rgb8Image {
        let mut img = Rgb8Image::new(width, height).unwrap();
        for y in 0..height {
            for x in 0..width {
                let rgb = if x < width / 2 { [200, 40, 40] } else { [40, 40, 200] };
                img.set(x, y, rgb);
            }
        }
        img
    }

    #[test]
    fn merge_into_higher_id_keeps_region_contiguous() {
        // The absorbed region appears first in raster order, so its merge
        // target holds a higher id; the relabel must account for the id
        // shift that closes the gap.
        let values = [7u32, 3, 3, 3, 3, 3];
        let (mut regions, mut count) = connected_components(&values, 6, 1);
        assert_eq!(count, 2);
        merge_small_regions(&mut regions, &mut count, 6, 1, 0.3);
        assert_eq!(count, 1);
        assert_eq!(regions, vec![0; 6]);
    }

    #[test]
    fn single_component_yields_one_region() {
        let img = two_tone_image(16, 12);
        let features = pixel_features(&img).unwrap();
        let gmm = crate::segment::GaussianMixture::new(vec![GmmComponent {
            weight: 1.0,
            mean: [50.0, 0.0, 0.0, 0.5, 1.0, 0.5],
            covariance: Mat::identity(6, 6),
        }])
        .unwrap();
        let map = segment_image(&features, &gmm, 0.005).unwrap();
        assert_eq!(map.num_regions(), 1);
        assert!(map.labels().iter().all(|&r| r == 0));
    }

    #[test]
    fn two_halves_split_on_the_color_edge() {
        let (w, h) = (24, 16);
        let img = two_tone_image(w, h);
        let features = pixel_features(&img).unwrap();
        let gmm = fit_gmm_em(&features, 2, 60, 1e-8, 0).unwrap();
        let map = segment_image(&features, &gmm, 0.005).unwrap();
        assert_eq!(map.num_regions(), 2);
        // Left half is region 0 (first appearance), right half region 1;
        // the texture window straddles the edge, so only judge pixels away
        // from the boundary strip.
        for y in 0..h {
            for x in 0..w {
                let r = map.label(x, y);
                if x < w / 2 - 5 {
                    assert_eq!(r, 0, "pixel ({x},{y})");
                } else if x >= w / 2 + 5 {
                    assert_eq!(r, 1, "pixel ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn salt_noise_is_absorbed() {
        // Direct exercise of the merge rule: a checker of isolated single
        // pixels inside a large background, threshold 0.5%.
        let (w, h) = (40, 40);
        let mut values = vec![0u32; w * h];
        for (i, v) in values.iter_mut().enumerate() {
            let (x, y) = (i % w, i / w);
            if x % 7 == 3 && y % 9 == 4 {
                *v = 1;
            }
        }
        let (mut regions, mut count) = connected_components(&values, w, h);
        assert!(count > 2);
        merge_small_regions(&mut regions, &mut count, w, h, 0.005);
        canonical_order(&mut regions, count);
        let mut sizes = vec![0usize; count];
        for &r in &regions {
            sizes[r as usize] += 1;
        }
        let threshold = 0.005 * (w * h) as f64;
        for (id, &s) in sizes.iter().enumerate() {
            assert!(s as f64 >= threshold, "region {id} too small: {s}");
        }
        assert_eq!(count, 1);
    }

    #[test]
    fn merge_prefers_longest_boundary() {
        // A 1-wide strip (region 1) sits between a tall block it touches
        // along 6 pixels (region 0) and a short block along 2 pixels
        // (region 2): the strip must join region 0.
        let (w, h) = (3, 6);
        #[rustfmt::skip]
        let values = vec![
            0, 1, 2,
            0, 1, 2,
            0, 1, 0,
            0, 1, 0,
            0, 1, 0,
            0, 1, 0,
        ];
        let (mut regions, mut count) = connected_components(&values, w, h);
        // Components: left column, middle strip, top-right block, and the
        // right-bottom part of region 0.
        assert_eq!(count, 4);
        // Absorb anything under 40% of 18 pixels = 7.2: the strip (6 px),
        // the top-right block (2 px), and the bottom-right limb (4 px) all
        // qualify and cascade into the left column.
        merge_small_regions(&mut regions, &mut count, w, h, 0.4);
        assert_eq!(count, 1);
    }

    #[test]
    fn connected_components_splits_diagonal_touch() {
        // Diagonal contact is not 4-adjacency.
        let values = vec![
            1, 0, //
            0, 1,
        ];
        let (_, count) = connected_components(&values, 2, 2);
        assert_eq!(count, 4);
    }
}
