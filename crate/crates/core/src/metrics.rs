//! Endpoint error, outlier rates, mask generation and density sweeps.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field2D, Mask};
use crate::pipeline::{inpaint, PipelineConfig};
use crate::tensor::ZField;

/// Which pixels enter a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalScope {
    /// Every pixel with ground truth.
    #[serde(rename = "all")]
    All,
    /// Pixels outside the input mask.
    #[serde(rename = "unknown")]
    Unknown,
    /// Ground-truth pixels that were left out of the input mask; requires a
    /// ground-truth validity mask.
    #[serde(rename = "heldout")]
    Heldout,
}

impl EvalScope {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalScope::All => "all",
            EvalScope::Unknown => "unknown",
            EvalScope::Heldout => "heldout",
        }
    }

    /// Pixels to evaluate given the input mask and an optional validity mask.
    pub fn select(self, input: &Mask, valid: Option<&Mask>) -> Result<Mask> {
        match (self, valid) {
            (EvalScope::All, Some(v)) => Ok(v.clone()),
            (EvalScope::All, None) => Ok(Mask::new(input.width(), input.height(), true)),
            (EvalScope::Unknown | EvalScope::Heldout, Some(v)) => Ok(v.and(&input.not())),
            (EvalScope::Unknown, None) => Ok(input.not()),
            (EvalScope::Heldout, None) => Err(Error::InvalidArgument(
                "held-out scope needs a ground-truth validity mask".into(),
            )),
        }
    }
}

impl std::str::FromStr for EvalScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(EvalScope::All),
            "unknown" => Ok(EvalScope::Unknown),
            "heldout" => Ok(EvalScope::Heldout),
            other => Err(Error::InvalidArgument(format!("unknown scope '{other}'"))),
        }
    }
}

/// Outlier rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlMode {
    /// Error above 3 px and above 5 % of the true magnitude.
    And,
    /// Error above 3 px or above 5 % of the true magnitude.
    Or,
}

impl std::str::FromStr for FlMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "and" => Ok(FlMode::And),
            "or" => Ok(FlMode::Or),
            other => Err(Error::InvalidArgument(format!("unknown fl mode '{other}'"))),
        }
    }
}

const FL_ABS: f64 = 3.0;
const FL_REL: f64 = 0.05;

fn check_pair(est: &Field2D, gt: &Field2D, scope: Option<&Mask>) -> Result<()> {
    if est.channels() != 2 || !est.same_shape(gt) {
        return Err(Error::InvalidArgument(
            "estimate and ground truth must be two-channel fields of equal size".into(),
        ));
    }
    if let Some(m) = scope {
        if !m.same_dims(est.width(), est.height()) {
            return Err(Error::InvalidArgument("scope mask dimensions differ".into()));
        }
    }
    Ok(())
}

/// Per-pixel `(endpoint error, true magnitude)` over the scope.
fn in_scope<'a>(
    est: &'a Field2D,
    gt: &'a Field2D,
    scope: Option<&'a Mask>,
) -> impl Iterator<Item = (f64, f64)> + 'a {
    let e = est.data().chunks_exact(2);
    let g = gt.data().chunks_exact(2);
    e.zip(g).enumerate().filter_map(move |(i, (e, g))| {
        if scope.is_some_and(|m| !m.bits()[i]) {
            return None;
        }
        Some(((e[0] - g[0]).hypot(e[1] - g[1]), g[0].hypot(g[1])))
    })
}

/// Mean endpoint error over the scope (all pixels when `None`).
pub fn epe(est: &Field2D, gt: &Field2D, scope: Option<&Mask>) -> Result<f64> {
    check_pair(est, gt, scope)?;
    let (sum, n) = in_scope(est, gt, scope).fold((0.0, 0usize), |(s, n), (err, _)| (s + err, n + 1));
    if n == 0 {
        return Err(Error::UndefinedMetric("EPE over an empty set of pixels".into()));
    }
    Ok(sum / n as f64)
}

#[inline]
fn is_outlier(err: f64, magnitude: f64, mode: FlMode) -> bool {
    let abs = err > FL_ABS;
    let rel = err > FL_REL * magnitude;
    match mode {
        FlMode::And => abs && rel,
        FlMode::Or => abs || rel,
    }
}

/// Fraction of in-scope pixels flagged as outliers.
pub fn fl_rate(est: &Field2D, gt: &Field2D, scope: Option<&Mask>, mode: FlMode) -> Result<f64> {
    check_pair(est, gt, scope)?;
    let (bad, n) = in_scope(est, gt, scope).fold((0usize, 0usize), |(b, n), (err, mag)| {
        (b + is_outlier(err, mag, mode) as usize, n + 1)
    });
    if n == 0 {
        return Err(Error::UndefinedMetric("Fl over an empty set of pixels".into()));
    }
    Ok(bad as f64 / n as f64)
}

fn known_count(density: f64, total: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::InvalidArgument(format!("density must lie in [0, 1], got {density}")));
    }
    Ok(((density * total as f64).floor() as usize).min(total))
}

/// Exactly `floor(density * w * h)` known pixels: the largest of one seeded
/// uniform draw per pixel (row-major), ties broken by pixel index.
pub fn genmask(width: usize, height: usize, density: f64, seed: u64) -> Result<Mask> {
    genmask_within(&Mask::new(width, height, true), density, seed)
}

/// As [`genmask`], restricted to the pixels set in `valid`. The target
/// count is relative to the full image and capped by the valid count.
pub fn genmask_within(valid: &Mask, density: f64, seed: u64) -> Result<Mask> {
    let (w, h) = (valid.width(), valid.height());
    let k = known_count(density, w * h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..w * h).map(|_| rng.gen::<f64>()).collect();
    let mut order: Vec<usize> = (0..w * h).filter(|&i| valid.bits()[i]).collect();
    order.sort_by(|&i, &j| draws[j].total_cmp(&draws[i]).then(i.cmp(&j)));
    let mut bits = vec![false; w * h];
    for &i in order.iter().take(k) {
        bits[i] = true;
    }
    Mask::from_vec(w, h, bits)
}

/// Keeps `flow` on the mask and zeroes it elsewhere.
pub fn subsample(flow: &Field2D, mask: &Mask) -> Field2D {
    let c = flow.channels();
    let mut out = flow.clone();
    for (i, &known) in mask.bits().iter().enumerate() {
        if !known {
            out.data_mut()[i * c..(i + 1) * c].fill(0.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub density: f64,
    pub seed: u64,
    pub epe: f64,
    #[serde(rename = "fl")]
    pub fl_rate: f64,
    pub n_pixels: usize,
    #[serde(rename = "scope")]
    pub eval_scope: EvalScope,
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub scope: EvalScope,
    pub fl_mode: FlMode,
    /// Ground-truth validity (sparse ground truth); masks are drawn inside it.
    pub valid: Option<Mask>,
    /// Parameter maps for the parameter-map pipeline mode.
    pub z_levels: Option<Vec<ZField>>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            scope: EvalScope::All,
            fl_mode: FlMode::And,
            valid: None,
            z_levels: None,
        }
    }
}

/// For every `(density, seed)`: draw a mask, subsample the ground truth,
/// inpaint and score against the full ground truth. Rows come out in
/// density-major order.
pub fn density_sweep(
    image: &Field2D,
    gt: &Field2D,
    densities: &[f64],
    seeds: &[u64],
    cfg: &PipelineConfig,
    opts: &SweepOptions,
) -> Result<Vec<EvalReport>> {
    if densities.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one density and one seed".into()));
    }
    let (w, h) = (gt.width(), gt.height());
    let jobs: Vec<(f64, u64)> = densities
        .iter()
        .flat_map(|&d| seeds.iter().map(move |&s| (d, s)))
        .collect();
    jobs.par_iter()
        .map(|&(density, seed)| {
            let mask = match &opts.valid {
                Some(v) => genmask_within(v, density, seed)?,
                None => genmask(w, h, density, seed)?,
            };
            let sparse = subsample(gt, &mask);
            let out = inpaint(image, &mask, &sparse, cfg, opts.z_levels.as_deref())?;
            let scope = opts.scope.select(&mask, opts.valid.as_ref())?;
            Ok(EvalReport {
                density,
                seed,
                epe: epe(&out.flow, gt, Some(&scope))?,
                fl_rate: fl_rate(&out.flow, gt, Some(&scope), opts.fl_mode)?,
                n_pixels: scope.count(),
                eval_scope: opts.scope,
            })
        })
        .collect()
}

/// CSV with header `density,seed,epe,fl,n_pixels,scope`, LF line endings.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    for r in reports {
        w.serialize(r)?;
    }
    if reports.is_empty() {
        w.write_record(["density", "seed", "epe", "fl", "n_pixels", "scope"])?;
    }
    w.flush()?;
    Ok(())
}
