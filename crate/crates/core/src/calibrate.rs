//! Grid search over the contrast parameter and the stencil parameter of the
//! explicit EED pipeline.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field2D, Mask};
use crate::metrics::{epe, genmask, subsample};
use crate::pipeline::{inpaint, PipelineConfig, Schedule, TensorMode};

pub const MAX_SAMPLES: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub lambda_range: (f64, f64),
    /// Logarithmically spaced.
    pub lambda_steps: usize,
    pub alpha_range: (f64, f64),
    /// Linearly spaced.
    pub alpha_steps: usize,
    pub search_tol: f64,
    pub final_tol: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda_range: (1e-6, 1e-2),
            lambda_steps: 9,
            alpha_range: (0.001, 0.5),
            alpha_steps: 14,
            search_tol: 1e-5,
            final_tol: 1e-6,
        }
    }
}

impl GridSpec {
    /// A one-point grid.
    pub fn single(lambda: f64, alpha: f64) -> Self {
        Self {
            lambda_range: (lambda, lambda),
            lambda_steps: 1,
            alpha_range: (alpha, alpha),
            alpha_steps: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (l0, l1) = self.lambda_range;
        let (a0, a1) = self.alpha_range;
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.lambda_steps == 0 || self.alpha_steps == 0 {
            return bad("grid steps must be positive");
        }
        if !(l0 > 0.0 && l0 <= l1 && l1.is_finite()) {
            return bad("lambda range must be positive and ordered");
        }
        if !(0.0..=0.5).contains(&a0) || !(0.0..=0.5).contains(&a1) || a0 > a1 {
            return bad("alpha range must be ordered inside [0, 1/2]");
        }
        if (self.lambda_steps == 1) != (l0 == l1) || (self.alpha_steps == 1) != (a0 == a1) {
            return bad("a single step needs a degenerate range and vice versa");
        }
        if !(self.search_tol > 0.0 && self.final_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let (l0, l1) = self.lambda_range;
        let n = self.lambda_steps;
        if n == 1 {
            return vec![l0];
        }
        let (e0, e1) = (l0.log10(), l1.log10());
        (0..n)
            .map(|k| match k {
                0 => l0,
                k if k == n - 1 => l1,
                k => 10f64.powf(e0 + (e1 - e0) * k as f64 / (n - 1) as f64),
            })
            .collect()
    }

    pub fn alphas(&self) -> Vec<f64> {
        let (a0, a1) = self.alpha_range;
        let n = self.alpha_steps;
        if n == 1 {
            return vec![a0];
        }
        (0..n)
            .map(|k| match k {
                k if k == n - 1 => a1,
                k => a0 + (a1 - a0) * k as f64 / (n - 1) as f64,
            })
            .collect()
    }
}

/// Cartesian product, lambda-major.
pub fn grid_points(spec: &GridSpec) -> Vec<(f64, f64)> {
    let alphas = spec.alphas();
    spec.lambdas()
        .into_iter()
        .flat_map(|l| alphas.iter().map(move |&a| (l, a)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub lambda: f64,
    pub alpha: f64,
    /// `None` when the point failed.
    pub epe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub lambda: f64,
    pub alpha: f64,
    pub epe: f64,
    pub table: Vec<GridRow>,
}

/// A training pair: reference image and dense ground-truth flow.
pub type Sample = (Field2D, Field2D);

/// Evaluates every grid point on up to [`MAX_SAMPLES`] samples and returns
/// the pair with the lowest mean EPE. Sample `i` uses the mask drawn with
/// seed `seed + i` at every grid point. `base` supplies the levels, ρ and τ;
/// its schedule is replaced by convergence at the search tolerance.
pub fn calibrate(
    samples: &[Sample],
    density: f64,
    spec: &GridSpec,
    seed: u64,
    base: &PipelineConfig,
) -> Result<Calibration> {
    spec.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("calibration needs at least one sample".into()));
    }
    let samples = &samples[..samples.len().min(MAX_SAMPLES)];
    let prepared: Vec<(&Field2D, &Field2D, Mask, Field2D)> = samples
        .iter()
        .enumerate()
        .map(|(i, (img, gt))| {
            let mask = genmask(gt.width(), gt.height(), density, seed.wrapping_add(i as u64))?;
            let sparse = subsample(gt, &mask);
            Ok((img, gt, mask, sparse))
        })
        .collect::<Result<_>>()?;

    let (max_iterations, cycle_len) = match base.schedule {
        Schedule::Converge { max_iterations, cycle_len, .. } => (max_iterations, cycle_len),
        Schedule::OneCyclePerLevel { .. } => (
            crate::solver::DEFAULT_MAX_ITERATIONS,
            crate::solver::DEFAULT_CYCLE_LEN,
        ),
    };

    let table: Vec<GridRow> = grid_points(spec)
        .into_par_iter()
        .map(|(lambda, alpha)| {
            let cfg = PipelineConfig {
                mode: TensorMode::ExplicitEed,
                lambdas: vec![lambda; base.levels],
                alpha,
                schedule: Schedule::Converge {
                    tol: spec.search_tol,
                    max_iterations,
                    cycle_len,
                },
                ..base.clone()
            };
            let run = || -> Result<f64> {
                let mut total = 0.0;
                for (img, gt, mask, sparse) in &prepared {
                    let out = inpaint(img, mask, sparse, &cfg, None)?;
                    total += epe(&out.flow, gt, None)?;
                }
                Ok(total / prepared.len() as f64)
            };
            let epe = match run() {
                Ok(e) if e.is_finite() => Some(e),
                Ok(e) => {
                    log::warn!("grid point lambda={lambda} alpha={alpha} gave EPE {e}; skipped");
                    None
                }
                Err(err) => {
                    log::warn!("grid point lambda={lambda} alpha={alpha} failed: {err}; skipped");
                    None
                }
            };
            GridRow { lambda, alpha, epe }
        })
        .collect();

    let best = table
        .iter()
        .filter_map(|r| r.epe.map(|e| (r, e)))
        .min_by(|(r, e), (s, f)| {
            e.total_cmp(f)
                .then(r.alpha.total_cmp(&s.alpha))
                .then(r.lambda.total_cmp(&s.lambda))
        })
        .ok_or_else(|| Error::Numeric("every grid point failed".into()))?;
    Ok(Calibration {
        lambda: best.0.lambda,
        alpha: best.0.alpha,
        epe: best.1,
        table,
    })
}

/// CSV with header `lambda,alpha,epe`; failed points have an empty EPE.
pub fn write_table_csv<W: Write>(writer: W, table: &[GridRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["lambda", "alpha", "epe"])?;
    for r in table {
        w.write_record([
            r.lambda.to_string(),
            r.alpha.to_string(),
            r.epe.map(|e| e.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
