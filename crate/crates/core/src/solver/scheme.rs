use crate::error::{Error, Result};
use crate::field::{Field2D, Mask, PyramidLevel};
use crate::solver::stencil::{check_dims, Stencil};
use crate::tensor::TensorField;

/// Largest stable explicit time step for unit grid spacing and tensors with
/// eigenvalues at most one: the operator norm is bounded by 8.
pub const TAU_MAX: f64 = 0.25;

pub const DEFAULT_TAU: f64 = 0.25;
pub const DEFAULT_CYCLE_LEN: usize = 20;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Guards the relative residual against an all-zero iterate.
const RESIDUAL_EPS: f64 = 1e-12;

/// Extrapolation weight of step `l` in an FSI cycle.
#[inline]
pub fn fsi_gamma(l: usize) -> f64 {
    (4 * l + 2) as f64 / (2 * l + 3) as f64
}

pub fn fsi_gammas(cycle_len: usize) -> Vec<f64> {
    (0..cycle_len).map(fsi_gamma).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopMode {
    /// Exactly this many operator applications, grouped into cycles.
    FixedIterations(usize),
    /// Cycles until the relative change over one cycle drops below `tol`,
    /// or `max_iterations` operator applications have been spent.
    Residual { tol: f64, max_iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub fsi_cycle_len: usize,
    pub stop: StopMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            fsi_cycle_len: DEFAULT_CYCLE_LEN,
            stop: StopMode::Residual {
                tol: 1e-6,
                max_iterations: DEFAULT_MAX_ITERATIONS,
            },
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= TAU_MAX) {
            return Err(Error::Config(format!(
                "time step {} outside the stable range (0, {TAU_MAX}]",
                self.tau
            )));
        }
        if self.fsi_cycle_len == 0 {
            return Err(Error::Config("FSI cycle length must be at least 1".into()));
        }
        if let StopMode::Residual { tol, max_iterations } = self.stop {
            if tol.is_nan() || tol <= 0.0 {
                return Err(Error::Config(format!("residual tolerance must be positive, got {tol}")));
            }
            if max_iterations == 0 {
                return Err(Error::Config("iteration cap must be positive".into()));
            }
        }
        Ok(())
    }
}

fn check_data(u: &Field2D, f: &Field2D, m: &Mask) -> Result<()> {
    if !u.same_shape(f) || !m.same_dims(u.width(), u.height()) {
        return Err(Error::InvalidArgument(
            "iterate, data and mask shapes differ".into(),
        ));
    }
    Ok(())
}

/// Overwrites every known pixel with its datum.
pub fn impose_dirichlet(u: &mut Field2D, f: &Field2D, m: &Mask) {
    let c = u.channels();
    let (dst, src) = (u.data_mut(), f.data());
    for (i, _) in m.bits().iter().enumerate().filter(|(_, &b)| b) {
        dst[i * c..(i + 1) * c].copy_from_slice(&src[i * c..(i + 1) * c]);
    }
}

/// Runs one cycle with the given extrapolation weights. `prev` and `cur`
/// both hold the cycle's starting value on entry; `cur` holds the result on
/// exit. `scratch` must have the same shape.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_cycle(
    stencil: &Stencil,
    prev: &mut Field2D,
    cur: &mut Field2D,
    scratch: &mut Field2D,
    f: &Field2D,
    m: &Mask,
    tau: f64,
    gammas: &[f64],
) {
    for &gamma in gammas {
        stencil.apply_into(cur, scratch);
        {
            let next = scratch.data_mut();
            let (c, p) = (cur.data(), prev.data());
            if gamma == 1.0 {
                for (n, &ci) in next.iter_mut().zip(c) {
                    *n = ci + tau * *n;
                }
            } else {
                for ((n, &ci), &pi) in next.iter_mut().zip(c).zip(p) {
                    *n = gamma * (ci + tau * *n) + (1.0 - gamma) * pi;
                }
            }
        }
        impose_dirichlet(scratch, f, m);
        // prev <- cur, cur <- next; the stale buffer becomes scratch
        std::mem::swap(prev, cur);
        std::mem::swap(cur, scratch);
    }
}

/// One forward-Euler step `u + tau A(u)` with the known pixels reset to `f`.
pub fn explicit_step(
    u: &Field2D,
    t: &TensorField,
    f: &Field2D,
    m: &Mask,
    tau: f64,
) -> Result<Field2D> {
    check_dims(u, t)?;
    check_data(u, f, m)?;
    Ok(explicit_step_with(&Stencil::new(t), u, f, m, tau))
}

pub fn explicit_step_with(stencil: &Stencil, u: &Field2D, f: &Field2D, m: &Mask, tau: f64) -> Field2D {
    let mut out = stencil.apply(u);
    for (o, &ui) in out.data_mut().iter_mut().zip(u.data()) {
        *o = ui + tau * *o;
    }
    impose_dirichlet(&mut out, f, m);
    out
}

/// One FSI cycle of `cycle_len` extrapolated steps.
pub fn fsi_cycle(
    u: &Field2D,
    t: &TensorField,
    f: &Field2D,
    m: &Mask,
    tau: f64,
    cycle_len: usize,
) -> Result<Field2D> {
    if cycle_len == 0 {
        return Err(Error::Config("FSI cycle length must be at least 1".into()));
    }
    fsi_cycle_weighted(u, t, f, m, tau, &fsi_gammas(cycle_len))
}

/// A cycle with caller-supplied extrapolation weights; all-ones weights give
/// plain explicit steps.
pub fn fsi_cycle_weighted(
    u: &Field2D,
    t: &TensorField,
    f: &Field2D,
    m: &Mask,
    tau: f64,
    gammas: &[f64],
) -> Result<Field2D> {
    check_dims(u, t)?;
    check_data(u, f, m)?;
    let stencil = Stencil::new(t);
    let mut cur = u.clone();
    impose_dirichlet(&mut cur, f, m);
    let mut prev = cur.clone();
    let mut scratch = cur.clone();
    run_cycle(&stencil, &mut prev, &mut cur, &mut scratch, f, m, tau, gammas);
    Ok(cur)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub flow: Field2D,
    pub converged: bool,
    /// Operator applications spent.
    pub applications: usize,
    pub cycles: usize,
    /// Relative change over the last cycle (0 when no cycle ran).
    pub residual: f64,
}

fn relative_change(after: &Field2D, before: &Field2D) -> f64 {
    let diff: f64 = after
        .data()
        .iter()
        .zip(before.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / before.norm_l2().max(RESIDUAL_EPS)
}

/// Solves the inpainting problem on one pyramid level starting from `init`.
pub fn solve_level(
    level: &PyramidLevel,
    t: &TensorField,
    init: &Field2D,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let (f, m) = (&level.sparse_flow, &level.mask);
    check_dims(init, t)?;
    check_data(init, f, m)?;
    let stencil = Stencil::new(t);
    solve_with(&stencil, f, m, init, cfg)
}

pub(crate) fn solve_with(
    stencil: &Stencil,
    f: &Field2D,
    m: &Mask,
    init: &Field2D,
    cfg: &SolverConfig,
) -> Result<SolveOutcome> {
    let mut cur = init.clone();
    impose_dirichlet(&mut cur, f, m);
    let done = |flow, converged, applications, cycles, residual| {
        Ok(SolveOutcome {
            flow,
            converged,
            applications,
            cycles,
            residual,
        })
    };
    if m.is_full() {
        return done(cur, true, 0, 0, 0.0);
    }

    let len = cfg.fsi_cycle_len;
    let full_gammas = fsi_gammas(len);
    let mut prev = cur.clone();
    let mut scratch = cur.clone();
    let mut start = cur.clone();
    let mut applications = 0;
    let mut cycles = 0;
    let mut residual = 0.0;

    match cfg.stop {
        StopMode::FixedIterations(total) => {
            while applications < total {
                let steps = len.min(total - applications);
                start.data_mut().copy_from_slice(cur.data());
                prev.data_mut().copy_from_slice(cur.data());
                let gammas = if steps == len { &full_gammas[..] } else { &full_gammas[..steps] };
                run_cycle(stencil, &mut prev, &mut cur, &mut scratch, f, m, cfg.tau, gammas);
                applications += steps;
                cycles += 1;
                residual = relative_change(&cur, &start);
            }
            ensure_finite(&cur)?;
            done(cur, true, applications, cycles, residual)
        }
        StopMode::Residual { tol, max_iterations } => {
            while applications < max_iterations {
                start.data_mut().copy_from_slice(cur.data());
                prev.data_mut().copy_from_slice(cur.data());
                run_cycle(stencil, &mut prev, &mut cur, &mut scratch, f, m, cfg.tau, &full_gammas);
                applications += len;
                cycles += 1;
                residual = relative_change(&cur, &start);
                if !residual.is_finite() {
                    return Err(Error::Numeric("iterate diverged".into()));
                }
                if residual < tol {
                    return done(cur, true, applications, cycles, residual);
                }
            }
            log::warn!(
                "no convergence after {applications} iterations (relative residual {residual:e})"
            );
            ensure_finite(&cur)?;
            done(cur, false, applications, cycles, residual)
        }
    }
}

fn ensure_finite(u: &Field2D) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric("iterate contains non-finite values".into()))
    }
}
