//! Coarse-to-fine inpainting driver.
//!
//! The coarsest level starts from zero, each finer level from the bilinearly
//! upsampled result of the level below with its own known samples restored.

use crate::error::{Error, Result};
use crate::field::{build_pyramid, upsample_bilinear, Field2D, Mask, PyramidLevel};
use crate::solver::{solve_with, SolveOutcome, SolverConfig, Stencil, StopMode};
use crate::tensor::{eed_tensor, z_to_tensor, DiffusivityParams, TensorField, ZField};

pub const DEFAULT_LEVELS: usize = 4;
/// Operator applications per level, coarse to fine.
pub const DEFAULT_ITERATIONS: [usize; 4] = [5, 15, 30, 45];
pub const DEFAULT_RHO: f64 = 1.0;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorMode {
    /// Tensors from the structure tensor of the reference image.
    ExplicitEed,
    /// Tensors from externally supplied five-channel parameter maps.
    NeuroexplicitZ,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// One FSI cycle per level whose length is that level's count,
    /// listed coarse to fine.
    OneCyclePerLevel { iterations: Vec<usize> },
    /// FSI cycles of fixed length until the relative residual drops below `tol`.
    Converge {
        tol: f64,
        max_iterations: usize,
        cycle_len: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub levels: usize,
    pub mode: TensorMode,
    /// Diffusivity contrast parameter per level, coarse to fine.
    pub lambdas: Vec<f64>,
    pub rho: f64,
    /// Constant stencil parameter used in explicit mode and for the
    /// homogeneous baseline.
    pub alpha: f64,
    pub tau: f64,
    pub schedule: Schedule,
}

impl PipelineConfig {
    /// Explicit edge-enhancing diffusion, converged on every level.
    pub fn explicit_eed(lambda: f64, alpha: f64) -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            mode: TensorMode::ExplicitEed,
            lambdas: vec![lambda; DEFAULT_LEVELS],
            rho: DEFAULT_RHO,
            alpha,
            tau: crate::solver::DEFAULT_TAU,
            schedule: Schedule::Converge {
                tol: DEFAULT_RESIDUAL_TOL,
                max_iterations: crate::solver::DEFAULT_MAX_ITERATIONS,
                cycle_len: crate::solver::DEFAULT_CYCLE_LEN,
            },
        }
    }

    /// Parameter-map driven diffusion with a fixed budget of one cycle per level.
    pub fn neuroexplicit() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            mode: TensorMode::NeuroexplicitZ,
            lambdas: vec![1.0; DEFAULT_LEVELS],
            rho: DEFAULT_RHO,
            alpha: 0.0,
            tau: crate::solver::DEFAULT_TAU,
            schedule: Schedule::OneCyclePerLevel {
                iterations: DEFAULT_ITERATIONS.to_vec(),
            },
        }
    }

    /// Same configuration with `n` levels. Per-level lists keep their finest
    /// entries; extra coarse levels repeat the coarsest entry.
    pub fn with_levels(mut self, n: usize) -> Self {
        fn resize<T: Copy>(v: &mut Vec<T>, n: usize, fallback: T) {
            let first = v.first().copied().unwrap_or(fallback);
            while v.len() < n {
                v.insert(0, first);
            }
            let drop = v.len() - n;
            v.drain(..drop);
        }
        resize(&mut self.lambdas, n, 1.0);
        if let Schedule::OneCyclePerLevel { iterations } = &mut self.schedule {
            resize(iterations, n, 0);
        }
        self.levels = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::Config("at least one pyramid level is required".into()));
        }
        if self.lambdas.len() != self.levels {
            return Err(Error::Config(format!(
                "{} lambdas given for {} levels",
                self.lambdas.len(),
                self.levels
            )));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Config(format!("lambda must be positive, got {l}")));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::Config(format!("rho must be non-negative, got {}", self.rho)));
        }
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 0.5], got {}", self.alpha)));
        }
        if let Schedule::OneCyclePerLevel { iterations } = &self.schedule {
            if iterations.len() != self.levels {
                return Err(Error::Config(format!(
                    "{} iteration counts given for {} levels",
                    iterations.len(),
                    self.levels
                )));
            }
        }
        // checks tau and the residual settings
        self.solver_config(0).validate()
    }

    /// Solver settings for level `coarse_rank` (0 = coarsest).
    pub fn solver_config(&self, coarse_rank: usize) -> SolverConfig {
        match &self.schedule {
            Schedule::OneCyclePerLevel { iterations } => {
                let n = iterations.get(coarse_rank).copied().unwrap_or(0);
                SolverConfig {
                    tau: self.tau,
                    fsi_cycle_len: n.max(1),
                    stop: StopMode::FixedIterations(n),
                }
            }
            Schedule::Converge {
                tol,
                max_iterations,
                cycle_len,
            } => SolverConfig {
                tau: self.tau,
                fsi_cycle_len: *cycle_len,
                stop: StopMode::Residual {
                    tol: *tol,
                    max_iterations: *max_iterations,
                },
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct InpaintOutput {
    pub flow: Field2D,
    /// Per-level solver statistics, coarse to fine.
    pub levels: Vec<LevelReport>,
    /// Set when the mask had no known pixel; the result is then all zero.
    pub empty_mask: bool,
}

impl InpaintOutput {
    pub fn converged(&self) -> bool {
        self.levels.iter().all(|l| l.converged)
    }

    pub fn applications(&self) -> usize {
        self.levels.iter().map(|l| l.applications).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelReport {
    pub level_index: usize,
    pub width: usize,
    pub height: usize,
    pub converged: bool,
    pub applications: usize,
    pub residual: f64,
}

impl LevelReport {
    fn new(level: &PyramidLevel, out: &SolveOutcome) -> Self {
        Self {
            level_index: level.level_index,
            width: level.width(),
            height: level.height(),
            converged: out.converged,
            applications: out.applications,
            residual: out.residual,
        }
    }
}

enum Tensors<'a> {
    Eed,
    Maps(&'a [ZField]),
    Identity,
}

fn check_inputs(mask: &Mask, sparse_flow: &Field2D) -> Result<()> {
    if sparse_flow.channels() != 2 {
        return Err(Error::InvalidArgument(format!(
            "flow must have 2 channels, got {}",
            sparse_flow.channels()
        )));
    }
    if !mask.same_dims(sparse_flow.width(), sparse_flow.height()) {
        return Err(Error::InvalidArgument("mask and flow dimensions differ".into()));
    }
    Ok(())
}

/// Reconstructs a dense flow field. `z_levels` (finest first) is required
/// in parameter-map mode and ignored otherwise.
pub fn inpaint(
    image: &Field2D,
    mask: &Mask,
    sparse_flow: &Field2D,
    cfg: &PipelineConfig,
    z_levels: Option<&[ZField]>,
) -> Result<InpaintOutput> {
    cfg.validate()?;
    check_inputs(mask, sparse_flow)?;
    if !image.same_dims(sparse_flow.width(), sparse_flow.height()) {
        return Err(Error::InvalidArgument("image and flow dimensions differ".into()));
    }
    let tensors = match cfg.mode {
        TensorMode::ExplicitEed => Tensors::Eed,
        TensorMode::NeuroexplicitZ => {
            let z = z_levels.ok_or_else(|| {
                Error::Config("parameter-map mode requires one z-field per level".into())
            })?;
            if z.len() != cfg.levels {
                return Err(Error::Config(format!(
                    "{} z-field levels given for {} pyramid levels",
                    z.len(),
                    cfg.levels
                )));
            }
            Tensors::Maps(z)
        }
    };
    run(image, mask, sparse_flow, cfg, tensors)
}

/// Baseline with `D = I` on every level and constant `cfg.alpha`.
pub fn inpaint_homogeneous(
    mask: &Mask,
    sparse_flow: &Field2D,
    cfg: &PipelineConfig,
) -> Result<InpaintOutput> {
    cfg.validate()?;
    check_inputs(mask, sparse_flow)?;
    let image = Field2D::zeros(sparse_flow.width(), sparse_flow.height(), 1);
    run(&image, mask, sparse_flow, cfg, Tensors::Identity)
}

fn run(
    image: &Field2D,
    mask: &Mask,
    sparse_flow: &Field2D,
    cfg: &PipelineConfig,
    tensors: Tensors<'_>,
) -> Result<InpaintOutput> {
    let (w, h) = (sparse_flow.width(), sparse_flow.height());
    if mask.is_empty() {
        log::warn!("mask has no known pixels; returning a zero field");
        return Ok(InpaintOutput {
            flow: Field2D::zeros(w, h, 2),
            levels: Vec::new(),
            empty_mask: true,
        });
    }
    let pyramid = build_pyramid(image, mask, sparse_flow, cfg.levels)?;

    let mut reports = Vec::with_capacity(cfg.levels);
    let mut current: Option<Field2D> = None;
    for (rank, level) in pyramid.iter().rev().enumerate() {
        let k = level.level_index;
        let lambda = cfg.lambdas[rank];
        let t = match tensors {
            Tensors::Eed => eed_tensor(&level.image, DiffusivityParams::new(lambda, cfg.rho)?, cfg.alpha)?,
            Tensors::Maps(z) => {
                let zk = &z[k];
                if !(zk.width() == level.width() && zk.height() == level.height()) {
                    return Err(Error::Config(format!(
                        "z-field level {k} is {}x{} but the pyramid level is {}x{}",
                        zk.width(),
                        zk.height(),
                        level.width(),
                        level.height()
                    )));
                }
                z_to_tensor(zk, lambda)?
            }
            Tensors::Identity => TensorField::identity(level.width(), level.height(), cfg.alpha),
        };
        let init = match current.take() {
            None => Field2D::zeros(level.width(), level.height(), 2),
            Some(coarse) => upsample_bilinear(&coarse, level.width(), level.height())?,
        };
        let stencil = Stencil::new(&t);
        let out = solve_with(&stencil, &level.sparse_flow, &level.mask, &init, &cfg.solver_config(rank))?;
        reports.push(LevelReport::new(level, &out));
        current = Some(out.flow);
    }
    Ok(InpaintOutput {
        flow: current.expect("at least one level"),
        levels: reports,
        empty_mask: false,
    })
}
