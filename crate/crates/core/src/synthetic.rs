//! Deterministic test scenes and random operator instances.

use rand::Rng;

use crate::field::Field2D;
use crate::tensor::{compose, TensorField};

/// Reference image and dense ground-truth flow.
#[derive(Debug, Clone)]
pub struct Scene {
    pub image: Field2D,
    pub flow: Field2D,
}

/// A slanted straight edge splitting the frame into two regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSceneSpec {
    pub width: usize,
    pub height: usize,
    /// Grey values left and right of the edge.
    pub intensities: (f64, f64),
    /// Horizontal shift of the edge per row.
    pub slope: f64,
    /// Flow affine coefficients `[u0, ux, uy, v0, vx, vy]` per region.
    pub left_motion: [f64; 6],
    pub right_motion: [f64; 6],
}

impl Default for EdgeSceneSpec {
    fn default() -> Self {
        Self {
            width: 96,
            height: 96,
            intensities: (0.3, 0.7),
            slope: 0.3,
            left_motion: [1.0, 0.01, -0.005, -0.5, 0.004, 0.01],
            right_motion: [-3.0, -0.008, 0.012, 2.0, 0.006, -0.01],
        }
    }
}

impl EdgeSceneSpec {
    /// Whether `(x, y)` lies left of the edge.
    pub fn is_left(&self, x: usize, y: usize) -> bool {
        let cx = self.width as f64 / 2.0 + self.slope * (y as f64 - self.height as f64 / 2.0);
        (x as f64) < cx
    }
}

/// Piecewise-constant image with a piecewise-affine flow whose
/// discontinuity follows the image edge.
pub fn edge_scene(spec: &EdgeSceneSpec) -> Scene {
    let (w, h) = (spec.width, spec.height);
    let image = Field2D::from_fn(w, h, 1, |x, y, _| {
        if spec.is_left(x, y) {
            spec.intensities.0
        } else {
            spec.intensities.1
        }
    });
    let flow = Field2D::from_fn(w, h, 2, |x, y, k| {
        let m = if spec.is_left(x, y) { &spec.left_motion } else { &spec.right_motion };
        let o = 3 * k;
        m[o] + m[o + 1] * x as f64 + m[o + 2] * y as f64
    });
    Scene { image, flow }
}

/// Flow that varies linearly from 0 at the left column to 1 at the right,
/// in both channels.
pub fn horizontal_ramp(width: usize, height: usize) -> Field2D {
    let d = (width.max(2) - 1) as f64;
    Field2D::from_fn(width, height, 2, |x, _, _| x as f64 / d)
}

/// A tensor field with random orientations, eigenvalues in `[0, 1]`,
/// `alpha` in `[0, 1/2]` and admissible `beta`.
pub fn random_tensor_field<R: Rng>(width: usize, height: usize, rng: &mut R) -> TensorField {
    let n = width * height;
    let mut t = TensorField::identity(width, height, 0.0);
    for i in 0..n {
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::PI);
        let (a, b, c) = compose(rng.gen(), rng.gen(), [theta.cos(), theta.sin()]);
        let alpha = rng.gen_range(0.0..=0.5);
        let bound = 1.0 - 2.0 * alpha;
        t.a[i] = a;
        t.b[i] = b;
        t.c[i] = c;
        t.alpha[i] = alpha;
        t.beta[i] = if bound > 0.0 { rng.gen_range(-bound..=bound) } else { 0.0 };
    }
    t
}

pub fn random_field<R: Rng>(width: usize, height: usize, channels: usize, rng: &mut R) -> Field2D {
    Field2D::from_fn(width, height, channels, |_, _, _| rng.gen_range(-1.0..1.0))
}
