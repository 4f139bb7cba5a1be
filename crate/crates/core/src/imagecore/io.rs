use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use super::{to_grayscale, GrayImage, ImageError, Result};

/// Decodes PNG or binary PGM/PPM bytes into a grayscale raster. Color input
/// goes through [`to_grayscale`].
pub fn decode_image(bytes: &[u8]) -> Result<GrayImage> {
    let format = image::guess_format(bytes).map_err(|e| ImageError::Decode(e.to_string()))?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(ImageError::Decode(format!("unsupported format {format:?}")));
    }
    let img = image::load_from_memory_with_format(bytes, format)
        .map_err(|e| ImageError::Decode(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => GrayImage::new(w, h, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => to_grayscale(w, h, buf.as_raw()),
        other => to_grayscale(w, h, other.to_rgb8().as_raw()),
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = std::fs::read(path.as_ref())?;
    decode_image(&bytes)
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("dimensions checked at construction");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ImageError::Encode(e.to_string()))?;
    Ok(out.into_inner())
}

/// Binary PGM (P5, maxval 255).
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn write_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}
