//! File formats: Middlebury `.flo`, KITTI 16-bit flow PNG, parameter-map
//! stacks, 8-bit images and masks, and flow color coding.

mod color;
mod flo;
mod kitti;
mod raster;
mod zfield;

use std::path::Path;

pub use color::{flow_to_color, percentile_magnitude};
pub use flo::{read_flo, read_flo_from, write_flo, write_flo_to, FLO_MAGIC};
pub use kitti::{decode_kitti, encode_kitti, read_kitti_png, write_kitti_png};
pub use raster::{read_image, read_mask, write_image, write_mask, write_rgb};
pub use zfield::{read_zfield, read_zfield_from, write_zfield, write_zfield_to, ZFIELD_MAGIC, ZFIELD_VERSION};

use crate::error::Result;
use crate::field::{Field2D, Mask};

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

/// Reads a flow by extension: `.png` as KITTI (with its validity mask),
/// anything else as `.flo` (every pixel valid).
pub fn read_flow(path: impl AsRef<Path>) -> Result<(Field2D, Mask)> {
    let path = path.as_ref();
    if has_extension(path, "png") {
        read_kitti_png(path)
    } else {
        let f = read_flo(path)?;
        let m = Mask::new(f.width(), f.height(), true);
        Ok((f, m))
    }
}

/// Writes a flow by extension: `.png` as KITTI with every pixel valid,
/// anything else as `.flo`.
pub fn write_flow(path: impl AsRef<Path>, flow: &Field2D) -> Result<()> {
    let path = path.as_ref();
    if has_extension(path, "png") {
        write_kitti_png(path, flow, &Mask::new(flow.width(), flow.height(), true))
    } else {
        write_flo(path, flow)
    }
}
