//! Netpbm readers and writers: binary PPM for color images, binary PGM for
//! label and region maps. Region indices can exceed 255, so PGM supports the
//! 16-bit big-endian variant; label maps stay 8-bit with 255 reserved for
//! void.

use std::fs;
use std::path::Path;

use tagparse_core::raster::{LabelMap, Rgb8Image};

use crate::error::{with_path, CliError, Result};

/// Header token scanner over the raw bytes: skips whitespace and `#` comments.
struct Tokens<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(data: &'a [u8]) -> Self {
        Tokens { data, pos: 0 }
    }

    fn skip_separators(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Option<&'a [u8]> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn next_usize(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .next()
            .ok_or_else(|| CliError::data(format!("truncated header: missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::data(format!("bad {what} in header")))
    }

    /// Position just past the single whitespace byte that ends the header.
    fn raster_start(&self) -> usize {
        self.pos + 1
    }
}

fn parse_dims(tokens: &mut Tokens<'_>) -> Result<(usize, usize, usize)> {
    let width = tokens.next_usize("width")?;
    let height = tokens.next_usize("height")?;
    let maxval = tokens.next_usize("maxval")?;
    if width == 0 || height == 0 {
        return Err(CliError::data("image dimensions must be positive"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(CliError::data(format!("maxval {maxval} outside 1..=65535")));
    }
    Ok((width, height, maxval))
}

/// Read a color image from a binary (P6) or ASCII (P3) PPM file.
pub fn read_ppm(path: &Path) -> Result<Rgb8Image> {
    let data = with_path(fs::read(path), path)?;
    let mut tokens = Tokens::new(&data);
    let magic = tokens
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?
        .to_vec();
    let (width, height, maxval) = parse_dims(&mut tokens)?;
    if maxval != 255 {
        return Err(CliError::data(format!(
            "{}: only maxval 255 color images are supported, got {maxval}",
            path.display()
        )));
    }
    let n = width * height * 3;
    let raw = match magic.as_slice() {
        b"P6" => {
            let start = tokens.raster_start();
            data.get(start..start + n)
                .ok_or_else(|| CliError::data(format!("{}: truncated raster", path.display())))?
                .to_vec()
        }
        b"P3" => {
            let mut raw = Vec::with_capacity(n);
            for _ in 0..n {
                let v = tokens.next_usize("sample")?;
                if v > 255 {
                    return Err(CliError::data(format!(
                        "{}: sample {v} exceeds maxval",
                        path.display()
                    )));
                }
                raw.push(v as u8);
            }
            raw
        }
        other => {
            return Err(CliError::data(format!(
                "{}: not a PPM file (magic {:?})",
                path.display(),
                String::from_utf8_lossy(other)
            )))
        }
    };
    Rgb8Image::from_raw(width, height, raw).map_err(Into::into)
}

/// Write a color image as binary PPM.
pub fn write_ppm(path: &Path, image: &Rgb8Image) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.raw());
    with_path(fs::write(path, out), path)
}

/// Write an 8-bit label map as binary PGM; 255 marks void pixels.
pub fn write_label_pgm(path: &Path, map: &LabelMap) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend_from_slice(map.raw());
    with_path(fs::write(path, out), path)
}

/// Read an 8-bit label map from a binary (P5) or ASCII (P2) PGM file.
pub fn read_label_pgm(path: &Path) -> Result<LabelMap> {
    let (width, height, maxval, samples) = read_pgm_samples(path)?;
    if maxval > 255 {
        return Err(CliError::data(format!(
            "{}: label maps are 8-bit, got maxval {maxval}",
            path.display()
        )));
    }
    let raw = samples.into_iter().map(|v| v as u8).collect();
    LabelMap::from_raw(width, height, raw).map_err(Into::into)
}

/// Write a region map as binary PGM, widening to 16-bit big-endian samples
/// when any region index exceeds 255.
pub fn write_region_pgm(path: &Path, width: usize, height: usize, labels: &[u32]) -> Result<()> {
    let max = labels.iter().copied().max().unwrap_or(0);
    if max > 65535 {
        return Err(CliError::data(format!(
            "region index {max} does not fit a 16-bit PGM"
        )));
    }
    let maxval: u32 = if max > 255 { 65535 } else { 255 };
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    if maxval > 255 {
        for &v in labels {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    } else {
        out.extend(labels.iter().map(|&v| v as u8));
    }
    with_path(fs::write(path, out), path)
}

/// Read a region map written by [`write_region_pgm`] back as raw indices.
pub fn read_region_pgm(path: &Path) -> Result<(usize, usize, Vec<u32>)> {
    let (width, height, _, samples) = read_pgm_samples(path)?;
    Ok((width, height, samples))
}

fn read_pgm_samples(path: &Path) -> Result<(usize, usize, usize, Vec<u32>)> {
    let data = with_path(fs::read(path), path)?;
    let mut tokens = Tokens::new(&data);
    let magic = tokens
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?
        .to_vec();
    let (width, height, maxval) = parse_dims(&mut tokens)?;
    let n = width * height;
    let samples = match magic.as_slice() {
        b"P5" => {
            let start = tokens.raster_start();
            if maxval > 255 {
                let bytes = data.get(start..start + 2 * n).ok_or_else(|| {
                    CliError::data(format!("{}: truncated raster", path.display()))
                })?;
                bytes
                    .chunks_exact(2)
                    .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]])))
                    .collect()
            } else {
                data.get(start..start + n)
                    .ok_or_else(|| CliError::data(format!("{}: truncated raster", path.display())))?
                    .iter()
                    .map(|&b| u32::from(b))
                    .collect()
            }
        }
        b"P2" => {
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                samples.push(tokens.next_usize("sample")? as u32);
            }
            samples
        }
        other => {
            return Err(CliError::data(format!(
                "{}: not a PGM file (magic {:?})",
                path.display(),
                String::from_utf8_lossy(other)
            )))
        }
    };
    if let Some(&bad) = samples.iter().find(|&&v| v as usize > maxval) {
        return Err(CliError::data(format!(
            "{}: sample {bad} exceeds maxval {maxval}",
            path.display()
        )));
    }
    Ok((width, height, maxval, samples))
}
