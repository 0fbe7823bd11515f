//! PNG and binary PPM input/output, 8-bit RGB only.

use std::path::Path;

use image::{DynamicImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::ImageReader::open(path)?
        .with_guessed_format()?
        .decode()?;
    match img {
        DynamicImage::ImageRgb8(rgb) => Ok(rgb),
        other => Err(Error::InvalidInput(format!(
            "{}: expected 8-bit RGB, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Writes PNG or PPM depending on the extension (`.ppm`/`.pnm` select PPM).
pub fn write_rgb(path: &Path, img: &RgbImage) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let format = match ext.as_deref() {
        Some("ppm") | Some("pnm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    img.save_with_format(path, format)?;
    Ok(())
}
