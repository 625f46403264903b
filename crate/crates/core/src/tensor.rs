//! Diffusion tensors and discretization parameters.
//!
//! Two providers produce a [`TensorField`]: edge-enhancing diffusion driven
//! by the structure tensor of the reference image ([`eed_tensor`]), and the
//! five-channel parameter maps ([`ZField`]) consumed by [`z_to_tensor`].

use crate::error::{Error, Result};
use crate::field::Field2D;

const PSD_TOL: f64 = 1e-9;

/// Separable Gaussian blur with standard deviation `rho`, kernel radius
/// `ceil(3 rho)` and mirrored borders. `rho == 0` returns the input.
pub fn gaussian_smooth(f: &Field2D, rho: f64) -> Field2D {
    if rho <= 0.0 || f.pixel_count() == 0 {
        return f.clone();
    }
    let radius = (3.0 * rho).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * rho * rho)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);

    let (w, h, c) = (f.width(), f.height(), f.channels());
    let mut tmp = Field2D::zeros(w, h, c);
    for y in 0..h {
        for x in 0..w {
            for k in 0..c {
                let mut acc = 0.0;
                for (t, weight) in kernel.iter().enumerate() {
                    let xi = reflect(x as isize + t as isize - radius, w);
                    acc += weight * f.get(xi, y, k);
                }
                tmp.set(x, y, k, acc);
            }
        }
    }
    let mut out = Field2D::zeros(w, h, c);
    for y in 0..h {
        for x in 0..w {
            for k in 0..c {
                let mut acc = 0.0;
                for (t, weight) in kernel.iter().enumerate() {
                    let yi = reflect(y as isize + t as isize - radius, h);
                    acc += weight * tmp.get(x, yi, k);
                }
                out.set(x, y, k, acc);
            }
        }
    }
    out
}

/// Half-sample symmetric reflection of `i` into `0..n`.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Per-pixel symmetric 2x2 structure tensor entries.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensorField {
    pub width: usize,
    pub height: usize,
    pub s11: Vec<f64>,
    pub s12: Vec<f64>,
    pub s22: Vec<f64>,
}

#[inline]
fn derivative(values: impl Fn(usize) -> f64, i: usize, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else if i == 0 {
        values(1) - values(0)
    } else if i == n - 1 {
        values(n - 1) - values(n - 2)
    } else {
        0.5 * (values(i + 1) - values(i - 1))
    }
}

/// Channel-summed outer products of the gradients of the smoothed image.
pub fn structure_tensor(image: &Field2D, rho: f64) -> StructureTensorField {
    let smooth = gaussian_smooth(image, rho);
    let (w, h, c) = (image.width(), image.height(), image.channels());
    let n = w * h;
    let mut st = StructureTensorField {
        width: w,
        height: h,
        s11: vec![0.0; n],
        s12: vec![0.0; n],
        s22: vec![0.0; n],
    };
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            for k in 0..c {
                let dx = derivative(|xi| smooth.get(xi, y, k), x, w);
                let dy = derivative(|yi| smooth.get(x, yi, k), y, h);
                st.s11[i] += dx * dx;
                st.s12[i] += dx * dy;
                st.s22[i] += dy * dy;
            }
        }
    }
    st
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub mu1: f64,
    pub mu2: f64,
    pub v1: [f64; 2],
    pub v2: [f64; 2],
}

impl EigenPair {
    /// `mu1 v1 v1^T + mu2 v2 v2^T` as `(s11, s12, s22)`.
    pub fn reconstruct(&self) -> (f64, f64, f64) {
        compose(self.mu1, self.mu2, self.v1)
    }
}

/// Closed-form eigendecomposition of `[[s11, s12], [s12, s22]]` with
/// `mu1 >= mu2`. Isotropic input yields `v1 = (1, 0)`, `v2 = (0, 1)`.
pub fn eigen2x2(s11: f64, s12: f64, s22: f64) -> EigenPair {
    let mean = 0.5 * (s11 + s22);
    let half_diff = 0.5 * (s11 - s22);
    let radius = half_diff.hypot(s12);
    let (mu1, mu2) = (mean + radius, mean - radius);
    if radius == 0.0 {
        return EigenPair {
            mu1,
            mu2,
            v1: [1.0, 0.0],
            v2: [0.0, 1.0],
        };
    }
    // Two algebraically equivalent candidates; the longer one is better conditioned.
    let a = [mu1 - s22, s12];
    let b = [s12, mu1 - s11];
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
    let len = v[0].hypot(v[1]);
    let v1 = [v[0] / len, v[1] / len];
    EigenPair {
        mu1,
        mu2,
        v1,
        v2: [-v1[1], v1[0]],
    }
}

/// `mu1 v1 v1^T + mu2 v2 v2^T` with `v2` the 90° rotation of unit `v1`.
#[inline]
pub fn compose(mu1: f64, mu2: f64, v1: [f64; 2]) -> (f64, f64, f64) {
    let [x, y] = v1;
    (
        mu1 * x * x + mu2 * y * y,
        (mu1 - mu2) * x * y,
        mu1 * y * y + mu2 * x * x,
    )
}

/// Perona-Malik diffusivity `1 / (1 + x^2 / lambda^2)`.
#[inline]
pub fn perona_malik(x: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + (x * x) / (lambda * lambda))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Off-diagonal discretization weight that keeps the stencil stable.
#[inline]
pub fn beta_for(alpha: f64, b: f64) -> f64 {
    (1.0 - 2.0 * alpha) * sign(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusivityParams {
    /// Contrast parameter of the diffusivity.
    pub lambda: f64,
    /// Standard deviation of the pre-smoothing Gaussian, in pixels.
    pub rho: f64,
}

impl DiffusivityParams {
    pub fn new(lambda: f64, rho: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be non-negative, got {rho}")));
        }
        Ok(Self { lambda, rho })
    }
}

/// Per-pixel diffusion tensor `D = [[a, b], [b, c]]` together with the
/// stencil parameters `alpha` and `beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub width: usize,
    pub height: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl TensorField {
    /// `D = I` everywhere with constant `alpha` and `beta = 0`.
    pub fn identity(width: usize, height: usize, alpha: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            a: vec![1.0; n],
            b: vec![0.0; n],
            c: vec![1.0; n],
            alpha: vec![alpha; n],
            beta: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_dims(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Checks that every pixel has a positive semidefinite `D` with
    /// eigenvalues at most one, `alpha` in `[0, 1/2]` and
    /// `|beta| <= 1 - 2 alpha`.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if [&self.a, &self.b, &self.c, &self.alpha, &self.beta]
            .iter()
            .any(|v| v.len() != n)
        {
            return Err(Error::InvalidArgument("tensor field buffers have inconsistent lengths".into()));
        }
        for i in 0..n {
            let (a, b, c) = (self.a[i], self.b[i], self.c[i]);
            let (alpha, beta) = (self.alpha[i], self.beta[i]);
            if ![a, b, c, alpha, beta].iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite tensor entry at pixel {i}")));
            }
            let e = eigen2x2(a, b, c);
            if e.mu2 < -PSD_TOL || e.mu1 > 1.0 + PSD_TOL {
                return Err(Error::InvalidArgument(format!(
                    "tensor at pixel {i} has eigenvalues ({}, {}) outside [0, 1]",
                    e.mu1, e.mu2
                )));
            }
            if !(0.0..=0.5).contains(&alpha) || beta.abs() > 1.0 - 2.0 * alpha + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "alpha={alpha}, beta={beta} at pixel {i} violate the stability constraint"
                )));
            }
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 0.5], got {alpha}")));
    }
    Ok(())
}

/// Edge-enhancing diffusion tensor of the reference image: the diffusivity
/// damps the dominant structure direction, the orthogonal one keeps 1.
pub fn eed_tensor(image: &Field2D, params: DiffusivityParams, alpha: f64) -> Result<TensorField> {
    check_alpha(alpha)?;
    let st = structure_tensor(image, params.rho);
    let n = st.width * st.height;
    let mut t = TensorField::identity(st.width, st.height, alpha);
    for i in 0..n {
        let e = eigen2x2(st.s11[i], st.s12[i], st.s22[i]);
        let (a, b, c) = compose(perona_malik(e.mu1, params.lambda), 1.0, e.v1);
        t.a[i] = a;
        t.b[i] = b;
        t.c[i] = c;
        t.beta[i] = beta_for(alpha, b);
    }
    Ok(t)
}

/// Five-channel parameter map for one pyramid level:
/// `z0` drives `alpha`, `z1`/`z2` the eigenvalues and `(z3, z4)` the
/// dominant eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct ZField(Field2D);

impl ZField {
    pub const CHANNELS: usize = 5;

    pub fn new(field: Field2D) -> Result<Self> {
        if field.channels() != Self::CHANNELS {
            return Err(Error::InvalidArgument(format!(
                "z-field needs {} channels, got {}",
                Self::CHANNELS,
                field.channels()
            )));
        }
        if !field.is_finite() {
            return Err(Error::InvalidArgument("z-field contains non-finite values".into()));
        }
        Ok(Self(field))
    }

    pub fn field(&self) -> &Field2D {
        &self.0
    }

    pub fn into_field(self) -> Field2D {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

/// Below this norm `(z3, z4)` has no usable direction.
const Z_DIRECTION_EPS: f64 = 1e-8;

/// Maps a parameter map onto a tensor field. Both eigenvalues pass through
/// the diffusivity, `alpha = sigmoid(z0) / 2`.
pub fn z_to_tensor(z: &ZField, lambda: f64) -> Result<TensorField> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let f = z.field();
    let (w, h) = (f.width(), f.height());
    let mut t = TensorField::identity(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let p = f.pixel(x, y);
            let alpha = 0.5 * sigmoid(p[0]);
            let mu1 = perona_malik(p[1], lambda);
            let mu2 = perona_malik(p[2], lambda);
            let norm = p[3].hypot(p[4]);
            let v1 = if norm < Z_DIRECTION_EPS {
                [1.0, 0.0]
            } else {
                [p[3] / norm, p[4] / norm]
            };
            let (a, b, c) = compose(mu1, mu2, v1);
            t.a[i] = a;
            t.b[i] = b;
            t.c[i] = c;
            t.alpha[i] = alpha;
            t.beta[i] = beta_for(alpha, b);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smoothing_identity_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Field2D::from_fn(7, 5, 2, |_, _, _| rng.gen());
        assert_eq!(gaussian_smooth(&f, 0.0), f);

        let c = Field2D::filled(9, 4, 3, 0.3);
        for rho in [0.5, 1.0, 4.0] {
            let s = gaussian_smooth(&c, rho);
            assert!(s.max_abs_diff(&c) < 1e-14, "rho={rho}");
        }
    }

    #[test]
    fn smoothing_impulse_mass() {
        let mut f = Field2D::zeros(15, 15, 1);
        f.set(7, 7, 0, 1.0);
        let s = gaussian_smooth(&f, 1.0);
        let total: f64 = s.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!((s.get(6, 7, 0) - s.get(8, 7, 0)).abs() < 1e-15);
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(12, 5), 2);
        assert_eq!(reflect(3, 1), 0);
    }

    #[test]
    fn structure_tensor_constant_and_ramp() {
        let st = structure_tensor(&Field2D::filled(6, 6, 3, 0.4), 1.0);
        assert!(st.s11.iter().chain(&st.s12).chain(&st.s22).all(|&v| v.abs() < 1e-15));

        let ramp = Field2D::from_fn(8, 8, 1, |x, _, _| x as f64);
        let st = structure_tensor(&ramp, 0.0);
        for y in 1..7 {
            for x in 1..7 {
                let i = y * 8 + x;
                assert_eq!((st.s11[i], st.s12[i], st.s22[i]), (1.0, 0.0, 0.0));
            }
        }
    }

    #[test]
    fn structure_tensor_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = Field2D::from_fn(8, 8, 3, |_, _, _| rng.gen());
        for rho in [0.0, 1.0] {
            let st = structure_tensor(&img, rho);
            for i in 0..64 {
                let e = eigen2x2(st.s11[i], st.s12[i], st.s22[i]);
                assert!(e.mu2 >= -1e-9);
                assert!(st.s11[i] >= 0.0 && st.s22[i] >= 0.0);
            }
        }
    }

    #[test]
    fn eigen_analytic_cases() {
        let e = eigen2x2(2.0, 1.0, 2.0);
        assert!((e.mu1 - 3.0).abs() < 1e-15 && (e.mu2 - 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.v1[0] - r).abs() < 1e-15 && (e.v1[1] - r).abs() < 1e-15);

        let e = eigen2x2(1.0, 0.0, 0.0);
        assert_eq!((e.mu1, e.mu2, e.v1), (1.0, 0.0, [1.0, 0.0]));

        let e = eigen2x2(0.5, 0.0, 0.5);
        assert_eq!((e.v1, e.v2), ([1.0, 0.0], [0.0, 1.0]));

        let e = eigen2x2(0.0, 0.0, 4.0);
        assert_eq!((e.mu1, e.mu2), (4.0, 0.0));
        assert!((e.v1[1].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_reconstruction_random_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            // rebuild oracle: B B^T is PSD
            let m: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let s11 = m[0] * m[0] + m[1] * m[1];
            let s12 = m[0] * m[2] + m[1] * m[3];
            let s22 = m[2] * m[2] + m[3] * m[3];
            let e = eigen2x2(s11, s12, s22);
            let (r11, r12, r22) = e.reconstruct();
            let err = (r11 - s11).abs().max((r12 - s12).abs()).max((r22 - s22).abs());
            assert!(err < 1e-9, "err={err}");
            assert!(e.mu1 >= e.mu2);
            assert!((e.v1[0].hypot(e.v1[1]) - 1.0).abs() < 1e-9);
            assert!((e.v1[0] * e.v2[0] + e.v1[1] * e.v2[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn perona_malik_values() {
        assert_eq!(perona_malik(0.0, 0.3), 1.0);
        assert_eq!(perona_malik(0.3, 0.3), 0.5);
        assert!((perona_malik(0.6, 0.3) - 0.2).abs() < 1e-15);
        assert!(perona_malik(1.0, 0.3) < perona_malik(0.5, 0.3));
    }

    #[test]
    fn eed_constant_image_is_identity() {
        let img = Field2D::filled(12, 9, 3, 0.5);
        let t = eed_tensor(&img, DiffusivityParams::new(1e-4, 1.0).unwrap(), 0.3).unwrap();
        assert_eq!(t, TensorField::identity(12, 9, 0.3));
    }

    #[test]
    fn eed_ramp() {
        let img = Field2D::from_fn(10, 10, 1, |x, _, _| x as f64);
        let t = eed_tensor(&img, DiffusivityParams::new(1.0, 0.0).unwrap(), 0.2).unwrap();
        for y in 1..9 {
            for x in 1..9 {
                let i = y * 10 + x;
                assert_eq!((t.a[i], t.b[i], t.c[i]), (0.5, 0.0, 1.0));
                assert_eq!(t.beta[i], 0.0);
            }
        }
        t.validate().unwrap();
    }

    #[test]
    fn eed_rejects_bad_alpha() {
        let img = Field2D::zeros(4, 4, 3);
        let p = DiffusivityParams::new(1.0, 1.0).unwrap();
        assert!(eed_tensor(&img, p, 0.6).is_err());
        assert!(eed_tensor(&img, p, -0.1).is_err());
        assert!(DiffusivityParams::new(0.0, 1.0).is_err());
        assert!(DiffusivityParams::new(1.0, -1.0).is_err());
    }

    fn z_single(z: [f64; 5]) -> ZField {
        ZField::new(Field2D::from_vec(1, 1, 5, z.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn z_neutral_gives_identity() {
        let t = z_to_tensor(&z_single([0.0, 0.0, 0.0, 1.0, 0.0]), 1.0).unwrap();
        assert_eq!((t.a[0], t.b[0], t.c[0]), (1.0, 0.0, 1.0));
        assert_eq!(t.alpha[0], 0.25);
        assert_eq!(t.beta[0], 0.0);
    }

    #[test]
    fn z_large_alpha_limit() {
        let t = z_to_tensor(&z_single([40.0, 0.3, 2.0, 1.0, 1.0]), 1.0).unwrap();
        assert!((t.alpha[0] - 0.5).abs() < 1e-12);
        assert!(t.beta[0].abs() < 1e-12);
    }

    #[test]
    fn z_equal_eigenvalues_isotropic() {
        let lambda = 0.7;
        let t = z_to_tensor(&z_single([0.0, lambda, lambda, 1.0, 1.0]), lambda).unwrap();
        assert!((t.a[0] - 0.5).abs() < 1e-15);
        assert!(t.b[0].abs() < 1e-15);
        assert!((t.c[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn z_degenerate_direction_falls_back() {
        let t = z_to_tensor(&z_single([0.0, 1.0, 0.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!((t.a[0], t.b[0], t.c[0]), (0.5, 0.0, 1.0));
        t.validate().unwrap();
    }

    #[test]
    fn z_rejects_bad_inputs() {
        assert!(ZField::new(Field2D::zeros(2, 2, 4)).is_err());
        assert!(ZField::new(Field2D::filled(2, 2, 5, f64::NAN)).is_err());
        assert!(z_to_tensor(&z_single([0.0; 5]), 0.0).is_err());
    }

    #[test]
    fn identity_validates() {
        TensorField::identity(3, 3, 0.5).validate().unwrap();
        let mut bad = TensorField::identity(3, 3, 0.2);
        bad.beta[4] = 0.7;
        assert!(bad.validate().is_err());
        let mut bad = TensorField::identity(3, 3, 0.2);
        bad.a[0] = 1.5;
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn eed_output_valid(seed in any::<u64>(), lambda in 1e-4f64..1.0, rho in 0.0f64..2.0, alpha in 0.0f64..=0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = Field2D::from_fn(9, 7, 3, |_, _, _| rng.gen());
            let t = eed_tensor(&img, DiffusivityParams::new(lambda, rho).unwrap(), alpha).unwrap();
            prop_assert!(t.validate().is_ok());
            for i in 0..t.len() {
                let e = eigen2x2(t.a[i], t.b[i], t.c[i]);
                prop_assert!(e.mu2 > 0.0 && e.mu1 <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn z_output_valid(z in proptest::collection::vec(-20.0f64..20.0, 5 * 12), lambda in 0.01f64..10.0) {
            let zf = ZField::new(Field2D::from_vec(4, 3, 5, z).unwrap()).unwrap();
            let t = z_to_tensor(&zf, lambda).unwrap();
            prop_assert!(t.validate().is_ok());
        }

        #[test]
        fn z_direction_scale_invariant(z in proptest::collection::vec(-5.0f64..5.0, 5), k in 0.01f64..100.0) {
            prop_assume!(z[3].hypot(z[4]) > 1e-3);
            let t1 = z_to_tensor(&z_single([z[0], z[1], z[2], z[3], z[4]]), 1.3).unwrap();
            let t2 = z_to_tensor(&z_single([z[0], z[1], z[2], k * z[3], k * z[4]]), 1.3).unwrap();
            prop_assert!((t1.a[0] - t2.a[0]).abs() < 1e-9);
            prop_assert!((t1.b[0] - t2.b[0]).abs() < 1e-9);
            prop_assert!((t1.c[0] - t2.c[0]).abs() < 1e-9);
        }

        #[test]
        fn z_rotation_swaps_eigenvalues(z in proptest::collection::vec(-5.0f64..5.0, 5)) {
            prop_assume!(z[3].hypot(z[4]) > 1e-3);
            let rotated = z_to_tensor(&z_single([z[0], z[1], z[2], -z[4], z[3]]), 0.8).unwrap();
            let swapped = z_to_tensor(&z_single([z[0], z[2], z[1], z[3], z[4]]), 0.8).unwrap();
            prop_assert!((rotated.a[0] - swapped.a[0]).abs() < 1e-9);
            prop_assert!((rotated.b[0] - swapped.b[0]).abs() < 1e-9);
            prop_assert!((rotated.c[0] - swapped.c[0]).abs() < 1e-9);
        }
    }
}
