use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Rgb};

use crate::error::{Error, Result};
use crate::field::{Field2D, Mask};

const ZERO: f64 = 32768.0;
const SCALE: f64 = 64.0;

pub type KittiImage = ImageBuffer<Rgb<u16>, Vec<u16>>;

/// Invalid pixels decode to zero flow.
pub fn decode_kitti(img: &KittiImage) -> (Field2D, Mask) {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut flow = Field2D::zeros(w, h, 2);
    let mut mask = Mask::new(w, h, false);
    for (x, y, p) in img.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        if p[2] != 0 {
            mask.set(x, y, true);
            flow.set(x, y, 0, (p[0] as f64 - ZERO) / SCALE);
            flow.set(x, y, 1, (p[1] as f64 - ZERO) / SCALE);
        }
    }
    (flow, mask)
}

/// Components are rounded to 1/64 px and clamped to the 16-bit range;
/// invalid pixels are written as zero flow.
pub fn encode_kitti(flow: &Field2D, mask: &Mask) -> Result<KittiImage> {
    if flow.channels() != 2 || !mask.same_dims(flow.width(), flow.height()) {
        return Err(Error::InvalidArgument(
            "KITTI encoding needs a two-channel flow and a mask of equal size".into(),
        ));
    }
    let enc = |v: f64| (v * SCALE + ZERO).round().clamp(0.0, 65535.0) as u16;
    let (w, h) = (flow.width() as u32, flow.height() as u32);
    Ok(ImageBuffer::from_fn(w, h, |x, y| {
        let (x, y) = (x as usize, y as usize);
        if mask.get(x, y) {
            Rgb([enc(flow.get(x, y, 0)), enc(flow.get(x, y, 1)), 1])
        } else {
            Rgb([ZERO as u16, ZERO as u16, 0])
        }
    }))
}

pub fn read_kitti_png(path: impl AsRef<Path>) -> Result<(Field2D, Mask)> {
    let img = ImageReader::open(path)?.with_guessed_format()?.decode()?;
    match img {
        DynamicImage::ImageRgb16(buf) => Ok(decode_kitti(&buf)),
        other => Err(Error::Format(format!(
            "KITTI flow must be a 16-bit RGB PNG, got {:?}",
            other.color()
        ))),
    }
}

pub fn write_kitti_png(path: impl AsRef<Path>, flow: &Field2D, mask: &Mask) -> Result<()> {
    encode_kitti(flow, mask)?.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}
