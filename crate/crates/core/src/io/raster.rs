use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::field::{Field2D, Mask};

fn open(path: &Path) -> Result<DynamicImage> {
    Ok(ImageReader::open(path)?.with_guessed_format()?.decode()?)
}

/// 8-bit grey or colour image scaled to `[0, 1]`; grey gives one channel,
/// colour three (alpha is dropped).
pub fn read_image(path: impl AsRef<Path>) -> Result<Field2D> {
    let img = open(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let scale = |v: &u8| *v as f64 / 255.0;
    match img {
        DynamicImage::ImageLuma8(buf) => Field2D::from_vec(w, h, 1, buf.as_raw().iter().map(scale).collect()),
        DynamicImage::ImageLumaA8(_) => {
            Field2D::from_vec(w, h, 1, img.to_luma8().as_raw().iter().map(scale).collect())
        }
        DynamicImage::ImageRgb8(buf) => Field2D::from_vec(w, h, 3, buf.as_raw().iter().map(scale).collect()),
        DynamicImage::ImageRgba8(_) => {
            Field2D::from_vec(w, h, 3, img.to_rgb8().as_raw().iter().map(scale).collect())
        }
        other => Err(Error::Format(format!(
            "reference images must be 8-bit, got {:?}",
            other.color()
        ))),
    }
}

/// Writes a one- or three-channel field in `[0, 1]` as an 8-bit image; the
/// format follows the extension.
pub fn write_image(path: impl AsRef<Path>, f: &Field2D) -> Result<()> {
    let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let data: Vec<u8> = f.data().iter().map(|&v| q(v)).collect();
    let (w, h) = (f.width() as u32, f.height() as u32);
    match f.channels() {
        1 => GrayImage::from_raw(w, h, data).unwrap().save(path)?,
        3 => RgbImage::from_raw(w, h, data).unwrap().save(path)?,
        c => {
            return Err(Error::InvalidArgument(format!(
                "images need one or three channels, got {c}"
            )))
        }
    }
    Ok(())
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    img.save(path)?;
    Ok(())
}

/// Any nonzero colour sample marks a known pixel.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = open(path.as_ref())?.to_rgb16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let bits = img.pixels().map(|p| p.0.iter().any(|&v| v != 0)).collect();
    Mask::from_vec(w, h, bits)
}

/// Known pixels as 255, unknown as 0, single channel.
pub fn write_mask(path: impl AsRef<Path>, m: &Mask) -> Result<()> {
    let data = m.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    GrayImage::from_raw(m.width() as u32, m.height() as u32, data)
        .unwrap()
        .save(path)?;
    Ok(())
}
