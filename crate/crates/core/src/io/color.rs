//! The Middlebury flow colour wheel.

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::field::Field2D;

const RY: usize = 15;
const YG: usize = 6;
const GC: usize = 4;
const CB: usize = 11;
const BM: usize = 13;
const MR: usize = 6;
const NCOLS: usize = RY + YG + GC + CB + BM + MR;

fn wheel() -> [[f64; 3]; NCOLS] {
    let mut w = [[0.0; 3]; NCOLS];
    let mut i = 0;
    let mut segment = |len: usize, f: &dyn Fn(f64) -> [f64; 3]| {
        for k in 0..len {
            w[i] = f(255.0 * k as f64 / len as f64);
            i += 1;
        }
    };
    segment(RY, &|t| [255.0, t, 0.0]);
    segment(YG, &|t| [255.0 - t, 255.0, 0.0]);
    segment(GC, &|t| [0.0, 255.0, t]);
    segment(CB, &|t| [0.0, 255.0 - t, 255.0]);
    segment(BM, &|t| [t, 0.0, 255.0]);
    segment(MR, &|t| [255.0, 0.0, 255.0 - t]);
    w
}

/// The 99th percentile of the finite flow magnitudes (0 for none).
pub fn percentile_magnitude(flow: &Field2D) -> f64 {
    let mut mags: Vec<f64> = flow
        .data()
        .chunks_exact(2)
        .map(|p| p[0].hypot(p[1]))
        .filter(|m| m.is_finite())
        .collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    let idx = ((mags.len() - 1) as f64 * 0.99).round() as usize;
    mags[idx]
}

/// Direction picks the hue, magnitude relative to `max_mag` the saturation;
/// zero flow is white and magnitudes above `max_mag` are darkened.
pub fn flow_to_color(flow: &Field2D, max_mag: Option<f64>) -> Result<RgbImage> {
    if flow.channels() != 2 {
        return Err(Error::InvalidArgument("flow coloring needs two channels".into()));
    }
    let max = max_mag.unwrap_or_else(|| percentile_magnitude(flow));
    let max = if max > 0.0 && max.is_finite() { max } else { 1.0 };
    let wheel = wheel();
    let (w, h) = (flow.width(), flow.height());
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let p = flow.pixel(x as usize, y as usize);
        let (u, v) = if p[0].is_finite() && p[1].is_finite() { (p[0], p[1]) } else { (0.0, 0.0) };
        let rad = u.hypot(v) / max;
        let a = (-v).atan2(-u) / std::f64::consts::PI;
        let fk = (a + 1.0) / 2.0 * (NCOLS - 1) as f64;
        let k0 = (fk.floor() as usize).min(NCOLS - 1);
        let k1 = if k0 + 1 == NCOLS { 0 } else { k0 + 1 };
        let f = fk - k0 as f64;
        let rgb = std::array::from_fn(|c| {
            let col = ((1.0 - f) * wheel[k0][c] + f * wheel[k1][c]) / 255.0;
            let col = if rad <= 1.0 { 1.0 - rad * (1.0 - col) } else { col * 0.75 };
            (255.0 * col).floor() as u8
        });
        Rgb(rgb)
    }))
}
