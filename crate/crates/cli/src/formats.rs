//! Tab-separated tables tying the stages together: region descriptors, tags,
//! and per-region label scores. All floats print in shortest round-trip form
//! so rewriting a table never perturbs a value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use tagparse_core::labels::TagTable;
use tagparse_core::regions::{RegionSet, FEATURE_DIM};
use tagparse_core::Mat;

use crate::error::{with_path, CliError, Result};

fn parse_field<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| CliError::data(format!("line {line}: bad {what} {field:?}")))
}

/// Write the pooled region table: one row per region, global ids in order.
pub fn write_regions_tsv(path: &Path, regions: &RegionSet) -> Result<()> {
    let mut out = String::from("region_id\timage_id\trho");
    for f in 0..FEATURE_DIM {
        let _ = write!(out, "\tf{f}");
    }
    out.push('\n');
    for r in 0..regions.len() {
        let _ = write!(out, "{r}\t{}\t{}", regions.image_index()[r], regions.rho()[r]);
        for v in regions.feature(r) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    with_path(fs::write(path, out), path)
}

/// Read a region table back, revalidating ids, ordering, and feature width.
pub fn read_regions_tsv(path: &Path) -> Result<RegionSet> {
    let text = with_path(fs::read_to_string(path), path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    let mut expected = String::from("region_id\timage_id\trho");
    for f in 0..FEATURE_DIM {
        let _ = write!(expected, "\tf{f}");
    }
    if header != expected {
        return Err(CliError::data(format!(
            "{}: unexpected header (want region_id, image_id, rho, f0..f{})",
            path.display(),
            FEATURE_DIM - 1
        )));
    }
    let mut features = Vec::new();
    let mut rho = Vec::new();
    let mut image_index = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 + FEATURE_DIM {
            return Err(CliError::data(format!(
                "line {lineno}: expected {} fields, got {}",
                3 + FEATURE_DIM,
                fields.len()
            )));
        }
        let region_id: usize = parse_field(fields[0], "region_id", lineno)?;
        if region_id != rho.len() {
            return Err(CliError::data(format!(
                "line {lineno}: region_id {region_id} out of order (expected {})",
                rho.len()
            )));
        }
        let image: usize = parse_field(fields[1], "image_id", lineno)?;
        if let Some(&prev) = image_index.last() {
            if image < prev {
                return Err(CliError::data(format!(
                    "line {lineno}: image_id {image} decreases (previous {prev})"
                )));
            }
        }
        image_index.push(image);
        rho.push(parse_field(fields[2], "rho", lineno)?);
        for field in &fields[3..] {
            features.push(parse_field(*field, "feature", lineno)?);
        }
    }
    let num_images = image_index.last().map_or(0, |&m| m + 1);
    RegionSet::new(features, rho, image_index, num_images).map_err(Into::into)
}

/// Write image tags: one row per image, categories comma-separated.
pub fn write_tags_tsv(path: &Path, tags: &TagTable) -> Result<()> {
    let mut out = String::from("image_id\ttags\n");
    for image in 0..tags.num_images() {
        let list = tags
            .tags(image)
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let _ = writeln!(out, "{image}\t{list}");
    }
    with_path(fs::write(path, out), path)
}

/// Read image tags. The table stores no category count, so the caller passes
/// one (`None` infers the smallest count covering every index).
pub fn read_tags_tsv(path: &Path, num_categories: Option<usize>) -> Result<TagTable> {
    let text = with_path(fs::read_to_string(path), path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    if header != "image_id\ttags" {
        return Err(CliError::data(format!(
            "{}: unexpected header (want image_id, tags)",
            path.display()
        )));
    }
    let mut per_image: Vec<Vec<usize>> = Vec::new();
    let mut max_seen = None::<usize>;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let (id_field, list) = line
            .split_once('\t')
            .ok_or_else(|| CliError::data(format!("line {lineno}: expected 2 fields")))?;
        let image: usize = parse_field(id_field, "image_id", lineno)?;
        if image != per_image.len() {
            return Err(CliError::data(format!(
                "line {lineno}: image_id {image} out of order (expected {})",
                per_image.len()
            )));
        }
        let mut cats = Vec::new();
        if !list.is_empty() {
            for part in list.split(',') {
                let c: usize = parse_field(part, "category", lineno)?;
                max_seen = Some(max_seen.map_or(c, |m: usize| m.max(c)));
                cats.push(c);
            }
        }
        per_image.push(cats);
    }
    let needed = max_seen.map_or(0, |m| m + 1);
    let num_categories = match num_categories {
        Some(c) => {
            if c < needed {
                return Err(CliError::data(format!(
                    "{}: category index {} outside the declared {c} categories",
                    path.display(),
                    needed - 1
                )));
            }
            c
        }
        None => needed,
    };
    let mut table = TagTable::new(per_image.len(), num_categories)?;
    for (image, cats) in per_image.iter().enumerate() {
        for &c in cats {
            table.add_tag(image, c)?;
        }
    }
    Ok(table)
}

/// Write per-region assignments and score columns.
pub fn write_labels_tsv(path: &Path, categories: &[usize], scores: &Mat) -> Result<()> {
    let c = scores.ncols();
    let mut out = String::from("region_id\tcategory");
    for j in 0..c {
        let _ = write!(out, "\tscore_{j}");
    }
    out.push('\n');
    for r in 0..scores.nrows() {
        let _ = write!(out, "{r}\t{}", categories[r]);
        for j in 0..c {
            let _ = write!(out, "\t{}", scores[(r, j)]);
        }
        out.push('\n');
    }
    with_path(fs::write(path, out), path)
}

/// Read per-region assignments and score columns back.
pub fn read_labels_tsv(path: &Path) -> Result<(Vec<usize>, Mat)> {
    let text = with_path(fs::read_to_string(path), path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() < 3 || cols[0] != "region_id" || cols[1] != "category" {
        return Err(CliError::data(format!(
            "{}: unexpected header (want region_id, category, score columns)",
            path.display()
        )));
    }
    for (j, col) in cols[2..].iter().enumerate() {
        if *col != format!("score_{j}") {
            return Err(CliError::data(format!(
                "{}: unexpected score column {col:?}",
                path.display()
            )));
        }
    }
    let c = cols.len() - 2;
    let mut categories = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 + c {
            return Err(CliError::data(format!(
                "line {lineno}: expected {} fields, got {}",
                2 + c,
                fields.len()
            )));
        }
        let region_id: usize = parse_field(fields[0], "region_id", lineno)?;
        if region_id != categories.len() {
            return Err(CliError::data(format!(
                "line {lineno}: region_id {region_id} out of order (expected {})",
                categories.len()
            )));
        }
        categories.push(parse_field(fields[1], "category", lineno)?);
        for field in &fields[2..] {
            values.push(parse_field(*field, "score", lineno)?);
        }
    }
    let scores = Mat::from_row_slice(categories.len(), c, &values);
    Ok((categories, scores))
}
