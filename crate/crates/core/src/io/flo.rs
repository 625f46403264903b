use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field2D;

pub const FLO_MAGIC: f32 = 202021.25;

pub fn read_flo(path: impl AsRef<Path>) -> Result<Field2D> {
    read_flo_from(BufReader::new(File::open(path)?))
}

pub fn read_flo_from<R: Read>(mut r: R) -> Result<Field2D> {
    let mut header = [0u8; 12];
    r.read_exact(&mut header).map_err(|_| Error::Corrupt("truncated .flo header".into()))?;
    let magic = f32::from_le_bytes(header[0..4].try_into().unwrap());
    if magic != FLO_MAGIC {
        return Err(Error::Format(format!(".flo magic is {magic}, expected {FLO_MAGIC}")));
    }
    let w = i32::from_le_bytes(header[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(header[8..12].try_into().unwrap());
    if w <= 0 || h <= 0 {
        return Err(Error::Format(format!("invalid .flo dimensions {w}x{h}")));
    }
    let (w, h) = (w as usize, h as usize);
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Format("oversized .flo dimensions".into()))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(Error::Corrupt(format!(
            ".flo payload has {} bytes, expected {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    Field2D::from_vec(w, h, 2, data)
}

/// Values are stored as `f32`.
pub fn write_flo(path: impl AsRef<Path>, flow: &Field2D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_flo_to(&mut w, flow)?;
    w.flush()?;
    Ok(())
}

pub fn write_flo_to<W: Write>(mut w: W, flow: &Field2D) -> Result<()> {
    if flow.channels() != 2 {
        return Err(Error::InvalidArgument(format!(
            ".flo needs two channels, got {}",
            flow.channels()
        )));
    }
    let dim = |n: usize| i32::try_from(n).map_err(|_| Error::InvalidArgument("flow too large for .flo".into()));
    w.write_all(&FLO_MAGIC.to_le_bytes())?;
    w.write_all(&dim(flow.width())?.to_le_bytes())?;
    w.write_all(&dim(flow.height())?.to_le_bytes())?;
    let mut buf = Vec::with_capacity(flow.data().len() * 4);
    for &v in flow.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}
