//! Synthetic tagged scenes with pixel-exact ground truth.
//!
//! Real weakly-tagged corpora are large and externally licensed; these
//! generated scenes reproduce the *structure* of the problem at desk scale:
//! each image is a background category with a few elliptical blobs of other
//! categories painted over it, every category renders with a distinctive
//! color (some striped), and the image-level tags are exactly the
//! categories that survive into the final ground truth. A separate operation
//! corrupts tags by attaching wrong labels to a chosen share of images,
//! which is the knob the accuracy benchmarks sweep.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fmath;
use crate::labels::TagTable;
use crate::raster::{LabelMap, Rgb8Image};

/// How one category renders: a base color, optionally overlaid with
/// brightened diagonal stripes so that texture also separates categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryStyle {
    pub base_rgb: [u8; 3],
    pub stripe: bool,
}

/// Parameters of a synthetic scene set.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_images: usize,
    pub num_categories: usize,
    pub width: usize,
    pub height: usize,
    /// Blobs painted per image, drawn uniformly from this inclusive range.
    pub min_blobs: usize,
    pub max_blobs: usize,
    pub palette: Vec<CategoryStyle>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// A spec with the default blob range (1..=3) and an auto-generated
    /// palette of distinct hues, stripes on every other category.
    pub fn standard(
        num_images: usize,
        num_categories: usize,
        width: usize,
        height: usize,
        seed: u64,
    ) -> Self {
        let palette = (0..num_categories)
            .map(|c| CategoryStyle {
                base_rgb: hsv_to_rgb(c as f64 * 360.0 / num_categories as f64, 0.78, 0.82),
                stripe: c % 2 == 1,
            })
            .collect();
        Self {
            num_images,
            num_categories,
            width,
            height,
            min_blobs: 1,
            max_blobs: 3,
            palette,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_images == 0 {
            return Err(Error::invalid("need at least one image"));
        }
        if self.num_categories < 2 {
            return Err(Error::invalid("need at least two categories"));
        }
        if self.num_categories >= LabelMap::VOID as usize {
            return Err(Error::invalid("category count collides with the void index"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be positive"));
        }
        if self.min_blobs == 0 || self.min_blobs > self.max_blobs {
            return Err(Error::invalid("blob range must satisfy 1 <= min <= max"));
        }
        if self.palette.len() < self.num_categories {
            return Err(Error::invalid("palette smaller than the category count"));
        }
        for i in 0..self.num_categories {
            for j in (i + 1)..self.num_categories {
                if self.palette[i] == self.palette[j] {
                    return Err(Error::invalid("palette entries must be distinct per category"));
                }
            }
        }
        Ok(())
    }
}

/// Images, their pixel ground truth, and the clean image-level tags.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenes {
    pub images: Vec<Rgb8Image>,
    pub ground_truth: Vec<LabelMap>,
    pub tags: TagTable,
}

/// Generate the scene set. Deterministic in `spec.seed`.
///
/// Background categories rotate through a seed-shuffled permutation, so with
/// `num_images >= num_categories` every category is guaranteed to appear.
/// Tags are read back from the final ground truth, so a blob fully painted
/// over by a later blob contributes no tag.
pub fn synth_dataset(spec: &SyntheticSpec) -> Result<SyntheticScenes> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h, c) = (spec.width, spec.height, spec.num_categories);
    let mut background_order: Vec<usize> = (0..c).collect();
    background_order.shuffle(&mut rng);

    let mut images = Vec::with_capacity(spec.num_images);
    let mut ground_truth = Vec::with_capacity(spec.num_images);
    let mut tags = TagTable::new(spec.num_images, c)?;
    for img_idx in 0..spec.num_images {
        let background = background_order[img_idx % c];
        let mut gt = LabelMap::filled(w, h, background as u8)?;
        let blobs = rng.gen_range(spec.min_blobs..=spec.max_blobs);
        for _ in 0..blobs {
            // Uniform over the categories other than the background.
            let draw = rng.gen_range(0..c - 1);
            let category = if draw >= background { draw + 1 } else { draw };
            let cx = rng.gen_range(0.15 * w as f64..0.85 * w as f64);
            let cy = rng.gen_range(0.15 * h as f64..0.85 * h as f64);
            let rx = rng.gen_range(w as f64 / 8.0..w as f64 / 3.0);
            let ry = rng.gen_range(h as f64 / 8.0..h as f64 / 3.0);
            for y in 0..h {
                for x in 0..w {
                    let dx = (x as f64 - cx) / rx;
                    let dy = (y as f64 - cy) / ry;
                    if dx * dx + dy * dy <= 1.0 {
                        gt.set(x, y, category as u8);
                    }
                }
            }
        }

        let mut image = Rgb8Image::new(w, h)?;
        for y in 0..h {
            for x in 0..w {
                let style = spec.palette[gt.get(x, y) as usize];
                let mut rgb = style.base_rgb;
                if style.stripe && ((x + y) / 3) % 2 == 0 {
                    for ch in &mut rgb {
                        *ch = ch.saturating_add(36);
                    }
                }
                for ch in &mut rgb {
                    let jitter: i16 = rng.gen_range(-6..=6);
                    *ch = (*ch as i16 + jitter).clamp(0, 255) as u8;
                }
                image.set(x, y, rgb);
            }
        }

        for category in 0..c {
            if gt.raw().contains(&(category as u8)) {
                tags.add_tag(img_idx, category)?;
            }
        }
        images.push(image);
        ground_truth.push(gt);
    }
    Ok(SyntheticScenes {
        images,
        ground_truth,
        tags,
    })
}

/// Attach one wrong tag to a uniformly chosen share of images.
///
/// `round(percent / 100 * num_images)` images are selected without
/// replacement; each gains exactly one category drawn uniformly from those
/// it does not already carry. The generator is owned by this call, so noise
/// draws never perturb any other randomness.
pub fn inject_tag_noise(tags: &TagTable, percent: f64, seed: u64) -> Result<TagTable> {
    if !(percent.is_finite() && (0.0..=100.0).contains(&percent)) {
        return Err(Error::invalid("noise percent must lie in [0, 100]"));
    }
    let m = tags.num_images();
    let c = tags.num_categories();
    for img in 0..m {
        if tags.tags(img).len() >= c {
            return Err(Error::invalid(
                "every image must have at least one absent category to corrupt",
            ));
        }
    }
    let picked = fmath::round(percent / 100.0 * m as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    let mut out = tags.clone();
    for &img in &order[..picked] {
        let absent: Vec<usize> = (0..c).filter(|&cat| !tags.has_tag(img, cat)).collect();
        let wrong = absent[rng.gen_range(0..absent.len())];
        out.add_tag(img, wrong)?;
    }
    Ok(out)
}

/// HSV to 8-bit RGB; `h` in degrees, `s` and `v` in [0, 1].
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let mut sector = (h / 60.0) % 6.0;
    if sector < 0.0 {
        sector += 6.0;
    }
    let f = sector - fmath::floor(sector);
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as u32 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [
        fmath::round(r * 255.0) as u8,
        fmath::round(g * 255.0) as u8,
        fmath::round(b * 255.0) as u8,
    ]
}
