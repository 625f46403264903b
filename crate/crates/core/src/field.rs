//! Dense multi-channel grids, binary masks and the pyramid operators.
//!
//! All grids use unit grid spacing on every pyramid level. Data is stored
//! row-major with channels interleaved, i.e. the value of channel `k` at
//! pixel `(x, y)` lives at `(y * width + x) * channels + k`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Field2D {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a field by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for k in 0..channels {
                    data.push(f(x, y, k));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, k: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + k]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, k: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + k] = value;
    }

    /// All channel values of one pixel.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &Field2D) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_dims(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn channel_mean(&self, k: usize) -> f64 {
        let n = self.pixel_count();
        if n == 0 {
            return 0.0;
        }
        self.data.iter().skip(k).step_by(self.channels).sum::<f64>() / n as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Field2D) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Largest absolute element-wise difference; infinite if shapes differ.
    pub fn max_abs_diff(&self, other: &Field2D) -> f64 {
        if !self.same_shape(other) {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "mask length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn density(&self) -> f64 {
        if self.bits.is_empty() {
            return 0.0;
        }
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn is_full(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn not(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn same_dims(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// Input index range covered by output index `o` along an axis of length `n`.
///
/// Output length is `n / 2`; for odd `n` the trailing sample is folded into the
/// last block so that no input sample is dropped.
#[inline]
fn block(o: usize, n: usize) -> std::ops::Range<usize> {
    let start = 2 * o;
    if o + 1 == n / 2 && n % 2 == 1 {
        start..start + 3
    } else {
        start..start + 2
    }
}

fn check_poolable(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return Err(Error::InvalidPyramid(format!(
            "cannot pool a {width}x{height} grid by a factor of 2"
        )));
    }
    Ok(())
}

pub fn avg_pool2(f: &Field2D) -> Result<Field2D> {
    check_poolable(f.width, f.height)?;
    let (ow, oh, c) = (f.width / 2, f.height / 2, f.channels);
    let mut out = Field2D::zeros(ow, oh, c);
    let mut acc = vec![0.0; c];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut n = 0usize;
            for y in block(oy, f.height) {
                for x in block(ox, f.width) {
                    for (a, v) in acc.iter_mut().zip(f.pixel(x, y)) {
                        *a += v;
                    }
                    n += 1;
                }
            }
            for (k, a) in acc.iter().enumerate() {
                out.set(ox, oy, k, a / n as f64);
            }
        }
    }
    Ok(out)
}

pub fn max_pool2(m: &Mask) -> Result<Mask> {
    check_poolable(m.width, m.height)?;
    let (ow, oh) = (m.width / 2, m.height / 2);
    Ok(Mask::from_fn(ow, oh, |ox, oy| {
        block(oy, m.height).any(|y| block(ox, m.width).any(|x| m.get(x, y)))
    }))
}

/// Averages only the known samples of every block. Blocks without known
/// samples produce zero and an unset mask bit.
pub fn sparse_avg_pool2(flow: &Field2D, m: &Mask) -> Result<(Field2D, Mask)> {
    if !m.same_dims(flow.width, flow.height) {
        return Err(Error::InvalidArgument(
            "flow and mask dimensions differ".into(),
        ));
    }
    check_poolable(flow.width, flow.height)?;
    let (ow, oh, c) = (flow.width / 2, flow.height / 2, flow.channels);
    let mut out = Field2D::zeros(ow, oh, c);
    let mut mask = Mask::new(ow, oh, false);
    let mut acc = vec![0.0; c];
    for oy in 0..oh {
        for ox in 0..ow {
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut n = 0usize;
            for y in block(oy, flow.height) {
                for x in block(ox, flow.width) {
                    if m.get(x, y) {
                        for (a, v) in acc.iter_mut().zip(flow.pixel(x, y)) {
                            *a += v;
                        }
                        n += 1;
                    }
                }
            }
            if n > 0 {
                for (k, a) in acc.iter().enumerate() {
                    out.set(ox, oy, k, a / n as f64);
                }
                mask.set(ox, oy, true);
            }
        }
    }
    Ok((out, mask))
}

/// Bilinear resampling with half-pixel centres (`align_corners = false`),
/// clamped at the borders.
pub fn upsample_bilinear(f: &Field2D, target_w: usize, target_h: usize) -> Result<Field2D> {
    if target_w < f.width || target_h < f.height {
        return Err(Error::InvalidArgument(format!(
            "cannot upsample {}x{} to smaller {target_w}x{target_h}",
            f.width, f.height
        )));
    }
    if f.width == 0 || f.height == 0 {
        return Err(Error::InvalidArgument("cannot upsample an empty field".into()));
    }
    let taps = |dst: usize, src_len: usize, dst_len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
            .clamp(0.0, (src_len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(src_len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..target_w).map(|x| taps(x, f.width, target_w)).collect();
    let ys: Vec<_> = (0..target_h).map(|y| taps(y, f.height, target_h)).collect();
    let c = f.channels;
    let mut out = Field2D::zeros(target_w, target_h, c);
    for (ty, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (tx, &(x0, x1, fx)) in xs.iter().enumerate() {
            for k in 0..c {
                let top = f.get(x0, y0, k) * (1.0 - fx) + f.get(x1, y0, k) * fx;
                let bottom = f.get(x0, y1, k) * (1.0 - fx) + f.get(x1, y1, k) * fx;
                out.set(tx, ty, k, top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    Ok(out)
}

/// Co-registered inputs at one pyramid resolution.
#[derive(Debug, Clone)]
pub struct PyramidLevel {
    pub image: Field2D,
    pub mask: Mask,
    pub sparse_flow: Field2D,
    /// 0 is the finest level.
    pub level_index: usize,
}

impl PyramidLevel {
    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }
}

/// Builds `levels` resolutions, finest first.
pub fn build_pyramid(
    image: &Field2D,
    mask: &Mask,
    sparse_flow: &Field2D,
    levels: usize,
) -> Result<Vec<PyramidLevel>> {
    if levels == 0 {
        return Err(Error::InvalidPyramid("at least one level is required".into()));
    }
    let (w, h) = (image.width(), image.height());
    if !mask.same_dims(w, h) || !sparse_flow.same_dims(w, h) {
        return Err(Error::InvalidArgument(
            "image, mask and flow dimensions differ".into(),
        ));
    }
    let min_side = 1usize
        .checked_shl((levels - 1) as u32)
        .ok_or_else(|| Error::InvalidPyramid(format!("{levels} levels is too many")))?;
    if w < min_side || h < min_side {
        return Err(Error::InvalidPyramid(format!(
            "{w}x{h} is too small for {levels} levels (needs {min_side} in both axes)"
        )));
    }

    // Unknown flow samples are exactly zero on every level.
    let mut flow0 = sparse_flow.clone();
    let c = flow0.channels();
    for (i, &known) in mask.bits().iter().enumerate() {
        if !known {
            flow0.data_mut()[i * c..(i + 1) * c].fill(0.0);
        }
    }

    let mut out = vec![PyramidLevel {
        image: image.clone(),
        mask: mask.clone(),
        sparse_flow: flow0,
        level_index: 0,
    }];
    for k in 1..levels {
        let prev = &out[k - 1];
        let image = avg_pool2(&prev.image)?;
        let (sparse_flow, mask) = sparse_avg_pool2(&prev.sparse_flow, &prev.mask)?;
        out.push(PyramidLevel {
            image,
            mask,
            sparse_flow,
            level_index: k,
        });
    }
    Ok(out)
}
