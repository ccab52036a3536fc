//! From image-level tags to region-level initial labels.
//!
//! Tags only say which categories appear somewhere in an image. Every region
//! of a tagged image starts with the full tag set of its image, scaled by
//! the region's area share, and the resulting soft labels are then blended
//! across co-occurring categories so that frequently co-tagged categories
//! reinforce each other.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath;
use crate::regions::RegionSet;
use crate::Mat;

/// Condition-number ceiling for the propagation solve.
const COND_LIMIT: f64 = 1e12;

/// Which categories each image is tagged with, by category index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagTable {
    num_categories: usize,
    tags: Vec<Vec<usize>>,
}

impl TagTable {
    pub fn new(num_images: usize, num_categories: usize) -> Result<Self> {
        if num_images == 0 || num_categories == 0 {
            return Err(Error::invalid("tag table needs at least one image and category"));
        }
        Ok(Self {
            num_categories,
            tags: vec![Vec::new(); num_images],
        })
    }

    /// Tag an image with a category; duplicates are ignored.
    pub fn add_tag(&mut self, image: usize, category: usize) -> Result<()> {
        if image >= self.tags.len() {
            return Err(Error::invalid(format!("image index {image} out of range")));
        }
        if category >= self.num_categories {
            return Err(Error::invalid(format!("category index {category} out of range")));
        }
        let list = &mut self.tags[image];
        if let Err(pos) = list.binary_search(&category) {
            list.insert(pos, category);
        }
        Ok(())
    }

    pub fn num_images(&self) -> usize {
        self.tags.len()
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    /// Sorted category indices of one image.
    pub fn tags(&self, image: usize) -> &[usize] {
        &self.tags[image]
    }

    pub fn has_tag(&self, image: usize, category: usize) -> bool {
        self.tags[image].binary_search(&category).is_ok()
    }

    /// M x C 0/1 indicator matrix.
    pub fn to_indicator_matrix(&self) -> Mat {
        let mut z = Mat::zeros(self.tags.len(), self.num_categories);
        for (i, list) in self.tags.iter().enumerate() {
            for &c in list {
                z[(i, c)] = 1.0;
            }
        }
        z
    }
}

/// N x C binary matrix marking every region of a tagged image as a weak
/// positive for each of its image's categories.
pub fn infer_initial_labels(regions: &RegionSet, tags: &TagTable) -> Result<Mat> {
    if regions.num_images() != tags.num_images() {
        return Err(Error::invalid(format!(
            "region set covers {} images but the tag table has {}",
            regions.num_images(),
            tags.num_images()
        )));
    }
    let mut y = Mat::zeros(regions.len(), tags.num_categories());
    for (i, &image) in regions.image_index().iter().enumerate() {
        for &c in tags.tags(image) {
            y[(i, c)] = 1.0;
        }
    }
    Ok(y)
}

/// Scale each region's label row by the region's area share, so large
/// regions carry more of their image's tag mass than small ones.
pub fn size_smooth(labels: &Mat, regions: &RegionSet) -> Result<Mat> {
    if labels.nrows() != regions.len() {
        return Err(Error::invalid(format!(
            "label matrix has {} rows for {} regions",
            labels.nrows(),
            regions.len()
        )));
    }
    let mut out = labels.clone();
    for (i, &rho) in regions.rho().iter().enumerate() {
        for j in 0..out.ncols() {
            out[(i, j)] *= rho;
        }
    }
    Ok(out)
}

/// Category co-occurrence context: clamped Pearson correlation of the tag
/// indicator columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMatrix {
    /// C x C symmetric matrix, unit diagonal, entries in [0, 1].
    pub matrix: Mat,
    /// Categories whose indicator column is constant across images; their
    /// correlations are undefined and were set to zero. Callers should warn
    /// when this is non-empty.
    pub constant_categories: Vec<usize>,
}

/// Pairwise Pearson correlation between category indicator columns, with
/// negative correlations clamped to zero and the diagonal fixed at one.
/// Sample statistics use the M - 1 denominator.
pub fn context_matrix(tags: &TagTable) -> Result<ContextMatrix> {
    let m = tags.num_images();
    let c = tags.num_categories();
    if m < 2 {
        return Err(Error::invalid("correlation needs at least two images"));
    }
    let z = tags.to_indicator_matrix();
    let denom = (m - 1) as f64;
    let mut means = vec![0.0; c];
    for (j, mean) in means.iter_mut().enumerate() {
        let mut sum = 0.0;
        for i in 0..m {
            sum += z[(i, j)];
        }
        *mean = sum / m as f64;
    }
    let mut stds = vec![0.0; c];
    let mut constant = Vec::new();
    for j in 0..c {
        let mut ss = 0.0;
        for i in 0..m {
            let d = z[(i, j)] - means[j];
            ss += d * d;
        }
        stds[j] = fmath::sqrt(ss / denom);
        if stds[j] == 0.0 {
            constant.push(j);
        }
    }
    let mut a = Mat::identity(c, c);
    for j in 0..c {
        for k in (j + 1)..c {
            let value = if stds[j] == 0.0 || stds[k] == 0.0 {
                0.0
            } else {
                let mut cov = 0.0;
                for i in 0..m {
                    cov += (z[(i, j)] - means[j]) * (z[(i, k)] - means[k]);
                }
                (cov / denom / (stds[j] * stds[k])).clamp(0.0, 1.0)
            };
            a[(j, k)] = value;
            a[(k, j)] = value;
        }
    }
    Ok(ContextMatrix {
        matrix: a,
        constant_categories: constant,
    })
}

/// Blend size-smoothed labels across correlated categories:
/// `out = smoothed * (I - alpha * Dc^{-1/2} A Dc^{-1/2})^{-1}`
/// with `Dc` the diagonal of row sums of the context matrix `A`.
///
/// The normalized context matrix always has spectral radius exactly 1, so
/// any `alpha < 1` keeps the system positive definite.
pub fn context_propagate(smoothed: &Mat, context: &Mat, alpha: f64) -> Result<Mat> {
    let c = context.nrows();
    if context.ncols() != c {
        return Err(Error::invalid("context matrix must be square"));
    }
    if smoothed.ncols() != c {
        return Err(Error::invalid(format!(
            "label matrix has {} columns for {c} categories",
            smoothed.ncols()
        )));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid("context strength alpha must lie in [0, 1)"));
    }
    for j in 0..c {
        if (context[(j, j)] - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("context matrix diagonal must be one"));
        }
        for k in 0..c {
            let v = context[(j, k)];
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid("context entries must lie in [0, 1]"));
            }
            if (v - context[(k, j)]).abs() > 1e-12 {
                return Err(Error::invalid("context matrix must be symmetric"));
            }
        }
    }

    // Row sums are at least 1 thanks to the unit diagonal.
    let inv_sqrt: Vec<f64> = (0..c)
        .map(|j| {
            let sum: f64 = (0..c).map(|k| context[(j, k)]).sum();
            1.0 / fmath::sqrt(sum)
        })
        .collect();
    let mut system = Mat::zeros(c, c);
    for j in 0..c {
        for k in 0..c {
            let s = context[(j, k)] * inv_sqrt[j] * inv_sqrt[k];
            system[(j, k)] = if j == k { 1.0 - alpha * s } else { -alpha * s };
        }
    }

    let eig = system.clone().symmetric_eigen();
    let lambda_min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let lambda_max = eig.eigenvalues.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if lambda_min <= 0.0 || lambda_max / lambda_min > COND_LIMIT {
        return Err(Error::numerical(format!(
            "context system ill-conditioned: eigenvalue range [{lambda_min:.3e}, {lambda_max:.3e}]"
        )));
    }
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::numerical("context system not positive definite"))?;
    // out = smoothed * system^{-1}; with a symmetric system this is the
    // transpose of system^{-1} * smoothed^T.
    let solved = chol.solve(&smoothed.transpose());
    Ok(solved.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_image_table() -> TagTable {
        // Indicator columns (1,1,0) and (1,0,0).
        let mut t = TagTable::new(3, 2).unwrap();
        t.add_tag(0, 0).unwrap();
        t.add_tag(0, 1).unwrap();
        t.add_tag(1, 0).unwrap();
        t
    }

    #[test]
    fn tag_table_dedupes_and_sorts() {
        let mut t = TagTable::new(2, 3).unwrap();
        t.add_tag(0, 2).unwrap();
        t.add_tag(0, 0).unwrap();
        t.add_tag(0, 2).unwrap();
        assert_eq!(t.tags(0), &[0, 2]);
        assert!(t.has_tag(0, 2));
        assert!(!t.has_tag(1, 2));
        assert!(t.add_tag(2, 0).is_err());
        assert!(t.add_tag(0, 3).is_err());
    }

    #[test]
    fn correlation_of_half_overlapping_columns() {
        let ctx = context_matrix(&three_image_table()).unwrap();
        assert!(ctx.constant_categories.is_empty());
        assert!((ctx.matrix[(0, 1)] - 0.5).abs() < 1e-15);
        assert!((ctx.matrix[(1, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(ctx.matrix[(0, 0)], 1.0);
        assert_eq!(ctx.matrix[(1, 1)], 1.0);
    }

    #[test]
    fn negative_correlation_clamps_to_zero() {
        // Columns (1,0) and (0,1) have correlation -1.
        let mut t = TagTable::new(2, 2).unwrap();
        t.add_tag(0, 0).unwrap();
        t.add_tag(1, 1).unwrap();
        let ctx = context_matrix(&t).unwrap();
        assert_eq!(ctx.matrix[(0, 1)], 0.0);
    }

    #[test]
    fn constant_column_is_reported_and_zeroed() {
        // Category 1 is tagged everywhere, category 2 nowhere.
        let mut t = TagTable::new(3, 3).unwrap();
        for i in 0..3 {
            t.add_tag(i, 1).unwrap();
        }
        t.add_tag(0, 0).unwrap();
        let ctx = context_matrix(&t).unwrap();
        assert_eq!(ctx.constant_categories, vec![1, 2]);
        assert_eq!(ctx.matrix[(0, 1)], 0.0);
        assert_eq!(ctx.matrix[(1, 2)], 0.0);
        assert_eq!(ctx.matrix[(1, 1)], 1.0);
    }

    #[test]
    fn propagation_matches_closed_form_two_categories() {
        // A = [[1, 1/2], [1/2, 1]], alpha = 0.05, input row (1, 0).
        // Row sums are 3/2, the normalized context is A / (3/2), and the
        // 2 x 2 system inverts in closed form to give
        // out = (3480, 60) / 3363.
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let y = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let out = context_propagate(&y, &a, 0.05).unwrap();
        assert!((out[(0, 0)] - 3480.0 / 3363.0).abs() < 1e-12);
        assert!((out[(0, 1)] - 60.0 / 3363.0).abs() < 1e-12);
    }

    #[test]
    fn zero_alpha_is_identity() {
        let a = Mat::from_row_slice(2, 2, &[1.0, 0.7, 0.7, 1.0]);
        let y = Mat::from_row_slice(2, 2, &[0.3, 0.4, 0.1, 0.9]);
        let out = context_propagate(&y, &a, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((out[(i, j)] - y[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn alpha_close_to_one_still_solves() {
        // The normalized context has spectral radius exactly 1, so the
        // system stays positive definite for any alpha below 1.
        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let y = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        assert!(context_propagate(&y, &a, 0.999).is_ok());
        assert!(context_propagate(&y, &a, 1.0).is_err());
    }

    #[test]
    fn propagation_validates_context() {
        let y = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        let skew = Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(context_propagate(&y, &skew, 0.05).is_err());
        let off_diag = Mat::from_row_slice(2, 2, &[0.9, 0.3, 0.3, 1.0]);
        assert!(context_propagate(&y, &off_diag, 0.05).is_err());
        let negative = Mat::from_row_slice(2, 2, &[1.0, -0.1, -0.1, 1.0]);
        assert!(context_propagate(&y, &negative, 0.05).is_err());
    }

    #[test]
    fn initial_labels_follow_image_tags() {
        use crate::regions::FEATURE_DIM;
        let features = vec![0.0; 3 * FEATURE_DIM];
        let regions =
            RegionSet::new(features, vec![0.6, 0.4, 1.0], vec![0, 0, 1], 3).unwrap();
        let tags = three_image_table();
        let y = infer_initial_labels(&regions, &tags).unwrap();
        assert_eq!(y[(0, 0)], 1.0);
        assert_eq!(y[(0, 1)], 1.0);
        assert_eq!(y[(1, 0)], 1.0);
        assert_eq!(y[(2, 0)], 1.0);
        assert_eq!(y[(2, 1)], 0.0);
        let smoothed = size_smooth(&y, &regions).unwrap();
        assert!((smoothed[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((smoothed[(1, 0)] - 0.4).abs() < 1e-15);
        assert_eq!(smoothed[(2, 1)], 0.0);
    }
}
