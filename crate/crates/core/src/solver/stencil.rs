//! Fused 3x3 stencil for `div(D grad u)` with the (alpha, beta) weighting.
//!
//! The grid is tiled by 2x2 cells whose corners are pixels; a cell carries
//! the mean of the tensor parameters of its four pixels. Every cell couples
//! its pixels through six links (two horizontal, two vertical, two
//! diagonal). Cells never extend past the image, so no flux crosses the
//! border. Link weights per cell:
//!
//! ```text
//! horizontal  ((1 - alpha) a - alpha c - beta b) / 2
//! vertical    ((1 - alpha) c - alpha a - beta b) / 2
//! (x,y)-(x+1,y+1)   (alpha (a + c) + (1 + beta) b) / 2
//! (x,y+1)-(x+1,y)   (alpha (a + c) - (1 - beta) b) / 2
//! ```
//!
//! The operator is `A(u)_p = sum_q w_pq (u_q - u_p)`, symmetric in `p, q`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::tensor::TensorField;

/// Mean tensor parameters of the cell whose top-left pixel is `(i, j)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CellParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CellParams {
    pub(crate) fn at(t: &TensorField, i: usize, j: usize) -> Self {
        let w = t.width;
        let idx = [j * w + i, j * w + i + 1, (j + 1) * w + i, (j + 1) * w + i + 1];
        let mean = |v: &[f64]| idx.iter().map(|&k| v[k]).sum::<f64>() * 0.25;
        Self {
            a: mean(&t.a),
            b: mean(&t.b),
            c: mean(&t.c),
            alpha: mean(&t.alpha),
            beta: mean(&t.beta),
        }
    }
}

/// Precomputed link weights. Each array is indexed by the link's anchor
/// pixel; entries for links leaving the image are zero.
#[derive(Debug, Clone)]
pub struct Stencil {
    width: usize,
    height: usize,
    /// `(x, y)` to `(x + 1, y)`
    east: Vec<f64>,
    /// `(x, y)` to `(x, y + 1)`
    south: Vec<f64>,
    /// `(x, y)` to `(x + 1, y + 1)`
    south_east: Vec<f64>,
    /// `(x, y)` to `(x + 1, y - 1)`
    north_east: Vec<f64>,
}

impl Stencil {
    pub fn new(t: &TensorField) -> Self {
        let (w, h) = (t.width, t.height);
        let n = w * h;
        let mut s = Self {
            width: w,
            height: h,
            east: vec![0.0; n],
            south: vec![0.0; n],
            south_east: vec![0.0; n],
            north_east: vec![0.0; n],
        };
        for j in 0..h.saturating_sub(1) {
            for i in 0..w.saturating_sub(1) {
                let p = CellParams::at(t, i, j);
                let horizontal = 0.5 * ((1.0 - p.alpha) * p.a - p.alpha * p.c - p.beta * p.b);
                let vertical = 0.5 * ((1.0 - p.alpha) * p.c - p.alpha * p.a - p.beta * p.b);
                let diag_main = 0.5 * (p.alpha * (p.a + p.c) + (1.0 + p.beta) * p.b);
                let diag_anti = 0.5 * (p.alpha * (p.a + p.c) - (1.0 - p.beta) * p.b);
                s.east[j * w + i] += horizontal;
                s.east[(j + 1) * w + i] += horizontal;
                s.south[j * w + i] += vertical;
                s.south[j * w + i + 1] += vertical;
                s.south_east[j * w + i] += diag_main;
                s.north_east[(j + 1) * w + i] += diag_anti;
            }
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// The eight neighbour weights of `(x, y)` in row-major 3x3 order,
    /// centre excluded (it is minus their sum).
    pub fn weights_at(&self, x: usize, y: usize) -> [f64; 8] {
        let (w, h) = (self.width, self.height);
        let i = y * w + x;
        let (l, r, u, d) = (x > 0, x + 1 < w, y > 0, y + 1 < h);
        [
            if l && u { self.south_east[i - w - 1] } else { 0.0 },
            if u { self.south[i - w] } else { 0.0 },
            if r && u { self.north_east[i] } else { 0.0 },
            if l { self.east[i - 1] } else { 0.0 },
            if r { self.east[i] } else { 0.0 },
            if l && d { self.north_east[i + w - 1] } else { 0.0 },
            if d { self.south[i] } else { 0.0 },
            if r && d { self.south_east[i] } else { 0.0 },
        ]
    }

    /// Writes `A(u)` into `out`. Rows are processed in parallel; every output
    /// sample depends only on `u`, so results do not depend on the thread count.
    pub fn apply_into(&self, u: &Field2D, out: &mut Field2D) {
        debug_assert!(u.same_dims(self.width, self.height) && out.same_shape(u));
        let (w, c) = (self.width, u.channels());
        let src = u.data();
        out.data_mut()
            .par_chunks_mut(w * c)
            .enumerate()
            .for_each(|(y, row)| {
                for x in 0..w {
                    let wts = self.weights_at(x, y);
                    let center = (y * w + x) * c;
                    for k in 0..c {
                        let up = src[center + k];
                        let mut acc = 0.0;
                        let mut t = 0;
                        for dy in -1isize..=1 {
                            for dx in -1isize..=1 {
                                if dx == 0 && dy == 0 {
                                    continue;
                                }
                                let wt = wts[t];
                                t += 1;
                                if wt != 0.0 {
                                    let qx = (x as isize + dx) as usize;
                                    let qy = (y as isize + dy) as usize;
                                    acc += wt * (src[(qy * w + qx) * c + k] - up);
                                }
                            }
                        }
                        row[x * c + k] = acc;
                    }
                }
            });
    }

    pub fn apply(&self, u: &Field2D) -> Field2D {
        let mut out = Field2D::zeros(u.width(), u.height(), u.channels());
        self.apply_into(u, &mut out);
        out
    }
}

pub(crate) fn check_dims(u: &Field2D, t: &TensorField) -> Result<()> {
    if !t.same_dims(u.width(), u.height()) {
        return Err(Error::InvalidArgument(format!(
            "field is {}x{} but tensor field is {}x{}",
            u.width(),
            u.height(),
            t.width,
            t.height
        )));
    }
    Ok(())
}

/// `div(D grad u)` per channel by the fused stencil.
pub fn divergence_stencil(u: &Field2D, t: &TensorField) -> Result<Field2D> {
    check_dims(u, t)?;
    Ok(Stencil::new(t).apply(u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_has_zero_divergence() {
        let mut t = TensorField::identity(6, 5, 0.3);
        for (i, b) in t.b.iter_mut().enumerate() {
            *b = 0.1 * ((i % 3) as f64 - 1.0);
        }
        let u = Field2D::filled(6, 5, 2, 3.5);
        let out = divergence_stencil(&u, &t).unwrap();
        assert!(out.data().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn identity_tensor_is_five_point_laplacian() {
        let t = TensorField::identity(9, 9, 0.0);
        let u = Field2D::from_fn(9, 9, 2, |x, y, k| if k == 0 { (x * x) as f64 } else { (y * y) as f64 });
        let out = divergence_stencil(&u, &t).unwrap();
        for y in 1..8 {
            for x in 1..8 {
                assert!((out.get(x, y, 0) - 2.0).abs() < 1e-12);
                assert!((out.get(x, y, 1) - 2.0).abs() < 1e-12);
            }
        }
        let s = Stencil::new(&t);
        assert_eq!(s.weights_at(4, 4), [0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.weights_at(0, 0), [0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn mixed_derivative_sign() {
        // D = [[1/2, 1/2], [1/2, 1/2]], alpha = 0, beta = 0: u = x y gives 2 b = 1
        let mut t = TensorField::identity(7, 7, 0.0);
        t.a.fill(0.5);
        t.b.fill(0.5);
        t.c.fill(0.5);
        let u = Field2D::from_fn(7, 7, 1, |x, y, _| (x * y) as f64);
        let out = divergence_stencil(&u, &t).unwrap();
        assert!((out.get(3, 3, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let t = TensorField::identity(4, 4, 0.0);
        let u = Field2D::zeros(4, 5, 2);
        assert!(matches!(divergence_stencil(&u, &t), Err(Error::InvalidArgument(_))));
    }
}
