//! PNG reading and writing for color images.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use tagparse_core::raster::Rgb8Image;

use crate::error::{with_path, CliError, Result};

/// Read a PNG of any color type into 8-bit RGB; palette and grayscale images
/// are expanded, 16-bit channels are narrowed, and alpha is dropped.
pub fn read_png(path: &Path) -> Result<Rgb8Image> {
    let file = with_path(File::open(path), path)?;
    let mut decoder = png::Decoder::new(file);
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder
        .read_info()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    buf.truncate(info.buffer_size());
    let (width, height) = (info.width as usize, info.height as usize);
    let rgb = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&v| [v, v, v]).collect(),
        png::ColorType::GrayscaleAlpha => {
            buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect()
        }
        other => {
            return Err(CliError::data(format!(
                "{}: unsupported PNG color type {other:?}",
                path.display()
            )))
        }
    };
    Rgb8Image::from_raw(width, height, rgb).map_err(Into::into)
}

/// Write a color image as an 8-bit RGB PNG.
pub fn write_png(path: &Path, image: &Rgb8Image) -> Result<()> {
    let file = with_path(File::create(path), path)?;
    let mut encoder = png::Encoder::new(
        BufWriter::new(file),
        image.width() as u32,
        image.height() as u32,
    );
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    writer
        .write_image_data(image.raw())
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(())
}
