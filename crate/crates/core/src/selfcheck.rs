//! Numerical self-tests of the diffusion operator, runnable from the command
//! line on any build.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::field::{Field2D, Mask};
use crate::solver::{divergence_decomposed, explicit_step_with, Stencil, DEFAULT_TAU};
use crate::synthetic::{random_field, random_tensor_field};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfcheckOptions {
    pub tau: f64,
    pub seed: u64,
    pub instances: usize,
    pub size: usize,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            seed: 0,
            instances: 20,
            size: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst measured value of the checked quantity.
    pub measured: f64,
    pub threshold: f64,
}

impl CheckResult {
    fn at_most(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            passed: measured <= threshold,
            measured,
            threshold,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain struct serializes")
    }
}

/// Largest eigenvalue of `-A` for the mask-free problem by power iteration.
pub fn spectral_radius(stencil: &Stencil, iterations: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut v = random_field(stencil.width(), stencil.height(), 1, rng);
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let n = v.norm_l2();
        if n == 0.0 {
            return 0.0;
        }
        v.data_mut().iter_mut().for_each(|x| *x /= n);
        let av = stencil.apply(&v);
        estimate = -v.dot(&av);
        v = av;
    }
    estimate
}

pub fn run(opts: &SelfcheckOptions) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let n = opts.size.max(2);
    let mut equivalence = 0.0f64;
    let mut adjoint = 0.0f64;
    let mut mean_drift = 0.0f64;
    let mut energy = f64::NEG_INFINITY;
    let mut growth = 0.0f64;
    let mut radius_tau = 0.0f64;

    for _ in 0..opts.instances.max(1) {
        let t = random_tensor_field(n, n, &mut rng);
        let stencil = Stencil::new(&t);
        let u = random_field(n, n, 2, &mut rng);
        let v = random_field(n, n, 2, &mut rng);

        let fused = stencil.apply(&u);
        let reference = divergence_decomposed(&u, &t).expect("dims agree");
        let scale = reference.data().iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        equivalence = equivalence.max(fused.max_abs_diff(&reference) / scale);

        let av = stencil.apply(&v);
        let lhs = v.dot(&fused);
        let rhs = av.dot(&u);
        adjoint = adjoint.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));

        energy = energy.max(u.dot(&fused) / u.dot(&u));

        let none = Mask::new(n, n, false);
        let zero = Field2D::zeros(n, n, 2);
        let mut w = u.clone();
        for _ in 0..50 {
            w = explicit_step_with(&stencil, &w, &zero, &none, DEFAULT_TAU);
        }
        for k in 0..2 {
            let m0 = u.channel_mean(k);
            mean_drift = mean_drift.max((w.channel_mean(k) - m0).abs() / m0.abs().max(1e-12));
        }

        let stepped = explicit_step_with(&stencil, &u, &zero, &none, opts.tau);
        growth = growth.max(stepped.norm_l2() / u.norm_l2() - 1.0);
        radius_tau = radius_tau.max(opts.tau * spectral_radius(&stencil, 60, &mut rng));
    }

    vec![
        CheckResult::at_most("stencil_equivalence", equivalence, 1e-6),
        CheckResult::at_most("adjointness", adjoint, 1e-9),
        CheckResult::at_most("mean_conservation", mean_drift, 1e-8),
        CheckResult::at_most("negative_semidefinite", energy, 1e-9),
        CheckResult::at_most("stability_norm_growth", growth, 1e-12),
        CheckResult::at_most("stability_spectral", radius_tau, 2.0),
    ]
}
