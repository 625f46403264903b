use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::tensor::ZField;

pub const ZFIELD_MAGIC: [u8; 4] = *b"NXZF";
pub const ZFIELD_VERSION: u32 = 1;

/// Reads a parameter-map stack, finest level first.
pub fn read_zfield(path: impl AsRef<Path>) -> Result<Vec<ZField>> {
    read_zfield_from(BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Corrupt(format!("z-field truncated in {what}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_zfield_from<R: Read>(mut r: R) -> Result<Vec<ZField>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Corrupt("z-field truncated in magic".into()))?;
    if magic != ZFIELD_MAGIC {
        return Err(Error::Format("z-field magic mismatch".into()));
    }
    let version = read_u32(&mut r, "version")?;
    if version != ZFIELD_VERSION {
        return Err(Error::Format(format!("unsupported z-field version {version}")));
    }
    let levels = read_u32(&mut r, "level count")? as usize;
    if levels == 0 {
        return Err(Error::Format("z-field has no levels".into()));
    }
    let mut out: Vec<ZField> = Vec::new();
    for l in 0..levels {
        let w = read_u32(&mut r, "level header")? as usize;
        let h = read_u32(&mut r, "level header")? as usize;
        let c = read_u32(&mut r, "level header")? as usize;
        if c != ZField::CHANNELS {
            return Err(Error::Format(format!("z-field level {l} has {c} channels, expected 5")));
        }
        if w == 0 || h == 0 {
            return Err(Error::Format(format!("z-field level {l} is empty")));
        }
        if let Some(prev) = out.last() {
            if w != prev.width() / 2 || h != prev.height() / 2 {
                return Err(Error::Format(format!(
                    "z-field level {l} is {w}x{h}, expected {}x{}",
                    prev.width() / 2,
                    prev.height() / 2
                )));
            }
        }
        let n = w
            .checked_mul(h)
            .and_then(|n| n.checked_mul(c * 4))
            .ok_or_else(|| Error::Format("oversized z-field level".into()))?;
        let mut payload = Vec::new();
        (&mut r).take(n as u64).read_to_end(&mut payload)?;
        if payload.len() != n {
            return Err(Error::Corrupt(format!("z-field level {l} payload truncated")));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        let z = ZField::new(Field2D::from_vec(w, h, c, data)?)
            .map_err(|e| Error::Format(format!("z-field level {l}: {e}")))?;
        out.push(z);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Corrupt("trailing bytes after z-field payload".into()));
    }
    Ok(out)
}

pub fn write_zfield(path: impl AsRef<Path>, levels: &[ZField]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_zfield_to(&mut w, levels)?;
    w.flush()?;
    Ok(())
}

/// Values are stored as `f32`.
pub fn write_zfield_to<W: Write>(mut w: W, levels: &[ZField]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no z-field levels to write".into()));
    }
    for pair in levels.windows(2) {
        if pair[1].width() != pair[0].width() / 2 || pair[1].height() != pair[0].height() / 2 {
            return Err(Error::InvalidArgument("z-field levels must halve in size".into()));
        }
    }
    let u32_of = |n: usize| u32::try_from(n).map_err(|_| Error::InvalidArgument("z-field too large".into()));
    w.write_all(&ZFIELD_MAGIC)?;
    w.write_all(&ZFIELD_VERSION.to_le_bytes())?;
    w.write_all(&u32_of(levels.len())?.to_le_bytes())?;
    for z in levels {
        w.write_all(&u32_of(z.width())?.to_le_bytes())?;
        w.write_all(&u32_of(z.height())?.to_le_bytes())?;
        w.write_all(&(ZField::CHANNELS as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(z.field().data().len() * 4);
        for &v in z.field().data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}
