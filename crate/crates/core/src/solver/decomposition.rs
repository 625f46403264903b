//! Reference divergence built from four 2x2 difference kernels, a per-cell
//! 4x4 weight matrix `H`, and the mirrored-negated adjoint kernels:
//!
//! `A(u) = -K^T H K u`, with `K u = (Wx1 u, Wx2 u, Wy1 u, Wy2 u)` per cell.
//!
//! This path is intentionally naive. It exists to check [`super::Stencil`].

use crate::error::Result;
use crate::field::Field2D;
use crate::solver::stencil::{check_dims, CellParams};
use crate::tensor::TensorField;

/// 2x2 correlation kernel indexed `[row][col]`, rows along +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel2x2(pub [[f64; 2]; 2]);

impl Kernel2x2 {
    /// Mirror about the kernel centre and negate.
    pub fn adjoint(&self) -> Self {
        let k = self.0;
        Kernel2x2([[-k[1][1], -k[1][0]], [-k[0][1], -k[0][0]]])
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSet {
    pub kernels: [Kernel2x2; 4],
}

impl KernelSet {
    /// Forward differences along the top row, bottom row, left column and
    /// right column of a cell.
    pub const fn standard() -> Self {
        Self {
            kernels: [
                Kernel2x2([[-1.0, 1.0], [0.0, 0.0]]),
                Kernel2x2([[0.0, 0.0], [-1.0, 1.0]]),
                Kernel2x2([[-1.0, 0.0], [1.0, 0.0]]),
                Kernel2x2([[0.0, -1.0], [0.0, 1.0]]),
            ],
        }
    }

    pub fn adjoints(&self) -> [Kernel2x2; 4] {
        self.kernels.map(|k| k.adjoint())
    }
}

impl Default for KernelSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Weighting of the four cell differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HWeights(pub [[f64; 4]; 4]);

impl HWeights {
    pub fn new(a: f64, b: f64, c: f64, alpha: f64, beta: f64) -> Self {
        let a1 = (1.0 - alpha) / 2.0 * a;
        let a2 = alpha / 2.0 * a;
        let c1 = (1.0 - alpha) / 2.0 * c;
        let c2 = alpha / 2.0 * c;
        let b1 = (1.0 - beta) / 4.0 * b;
        let b2 = (1.0 + beta) / 4.0 * b;
        HWeights([
            [a1, a2, b1, b2],
            [a2, a1, b2, b1],
            [b1, b2, c1, c2],
            [b2, b1, c2, c1],
        ])
    }

    pub fn is_symmetric(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| self.0[i][j] == self.0[j][i]))
    }

    pub fn mul(&self, w: [f64; 4]) -> [f64; 4] {
        std::array::from_fn(|i| (0..4).map(|j| self.0[i][j] * w[j]).sum())
    }
}

/// `div(D grad u)` per channel via kernels, `H`, and adjoint kernels.
pub fn divergence_decomposed(u: &Field2D, t: &TensorField) -> Result<Field2D> {
    check_dims(u, t)?;
    let (w, h, ch) = (u.width(), u.height(), u.channels());
    let mut out = Field2D::zeros(w, h, ch);
    if w < 2 || h < 2 {
        return Ok(out);
    }
    let kernels = KernelSet::standard();
    let (cw, chh) = (w - 1, h - 1);

    // q = H K u on the cell grid, four entries per cell and channel
    let mut q = vec![[0.0f64; 4]; cw * chh * ch];
    for j in 0..chh {
        for i in 0..cw {
            let p = CellParams::at(t, i, j);
            let hw = HWeights::new(p.a, p.b, p.c, p.alpha, p.beta);
            for k in 0..ch {
                let diffs: [f64; 4] = std::array::from_fn(|m| {
                    let kern = kernels.kernels[m].0;
                    let mut acc = 0.0;
                    for (r, row) in kern.iter().enumerate() {
                        for (s, &wt) in row.iter().enumerate() {
                            acc += wt * u.get(i + s, j + r, k);
                        }
                    }
                    acc
                });
                q[(j * cw + i) * ch + k] = hw.mul(diffs);
            }
        }
    }

    // correlate q with the adjoint kernels; cell (x - 1 + s, y - 1 + r)
    let adjoints = kernels.adjoints();
    for y in 0..h {
        for x in 0..w {
            for k in 0..ch {
                let mut acc = 0.0;
                for r in 0..2 {
                    for s in 0..2 {
                        let (ci, cj) = (x + s, y + r);
                        if ci == 0 || cj == 0 || ci > cw || cj > chh {
                            continue;
                        }
                        let cell = &q[((cj - 1) * cw + (ci - 1)) * ch + k];
                        for (m, adj) in adjoints.iter().enumerate() {
                            acc += adj.0[r][s] * cell[m];
                        }
                    }
                }
                out.set(x, y, k, acc);
            }
        }
    }
    Ok(out)
}
