use std::fmt;
use std::fs::File;
use std::io::{self as stdio, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use flowinpaint::calibrate::{self, GridSpec};
use flowinpaint::io;
use flowinpaint::metrics::{self, EvalScope, FlMode, SweepOptions};
use flowinpaint::pipeline::{self, PipelineConfig, Schedule};
use flowinpaint::selfcheck::{self, SelfcheckOptions};
use flowinpaint::{ErrorClass, Field2D, Mask, ZField};

#[derive(Parser)]
#[command(name = "flowinpaint", version, about = "Dense optical flow from sparse samples by diffusion inpainting")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "NXF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct a dense flow from sparse samples.
    Inpaint(InpaintArgs),
    /// Score a flow against ground truth, or run a density sweep.
    Eval(EvalArgs),
    /// Draw a random mask with an exact number of known pixels.
    Genmask(GenmaskArgs),
    /// Grid search over lambda and alpha for the EED pipeline.
    Gridsearch(GridsearchArgs),
    /// Render a flow with the standard color wheel.
    Flowviz(FlowvizArgs),
    /// Run the numerical self-tests of the diffusion operator.
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Edge-enhancing diffusion from the reference image.
    Eed,
    /// Homogeneous diffusion (D = I).
    Homogeneous,
    /// Diffusion tensors from a z-field file.
    Z,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    All,
    Unknown,
    Heldout,
}

impl From<ScopeArg> for EvalScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::All => EvalScope::All,
            ScopeArg::Unknown => EvalScope::Unknown,
            ScopeArg::Heldout => EvalScope::Heldout,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FlArg {
    And,
    Or,
}

impl From<FlArg> for FlMode {
    fn from(f: FlArg) -> Self {
        match f {
            FlArg::And => FlMode::And,
            FlArg::Or => FlMode::Or,
        }
    }
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, value_enum, default_value = "eed")]
    mode: Mode,
    /// Z-field stack, required with `--mode z`.
    #[arg(long)]
    zfile: Option<PathBuf>,
    #[arg(long, default_value_t = pipeline::DEFAULT_LEVELS)]
    levels: usize,
    /// Operator applications per level, coarse to fine, one FSI cycle each.
    /// Without it EED and homogeneous modes iterate to `--tol`.
    #[arg(long, value_delimiter = ',')]
    iterations: Option<Vec<usize>>,
    /// Diffusivity contrast parameter (default 1e-4, or 1 in z mode).
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = pipeline::DEFAULT_RHO)]
    rho: f64,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = flowinpaint::solver::DEFAULT_TAU)]
    tau: f64,
    /// Relative change per FSI cycle at which a level counts as converged.
    #[arg(long, default_value_t = pipeline::DEFAULT_RESIDUAL_TOL)]
    tol: f64,
    #[arg(long, default_value_t = flowinpaint::solver::DEFAULT_CYCLE_LEN)]
    cycle_len: usize,
    #[arg(long, default_value_t = flowinpaint::solver::DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
}

#[derive(Args)]
struct InpaintArgs {
    /// Reference image (8-bit PNG or PPM).
    #[arg(long)]
    image: PathBuf,
    /// Flow samples (.flo, or KITTI .png with validity).
    #[arg(long)]
    flow: PathBuf,
    /// Known-pixel mask (PNG, nonzero = known).
    #[arg(long, conflicts_with_all = ["density", "seed"])]
    mask: Option<PathBuf>,
    /// Draw a mask with this fraction of known pixels instead.
    #[arg(long, requires = "seed")]
    density: Option<f64>,
    #[arg(long, requires = "density")]
    seed: Option<u64>,
    /// Ground truth; prints EPE and Fl of the result.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Output flow (.flo, or .png for KITTI encoding).
    #[arg(long, short)]
    out: PathBuf,
    /// Optional color rendering of the result.
    #[arg(long)]
    color: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth flow (.flo, or KITTI .png with validity).
    #[arg(long)]
    gt: PathBuf,
    /// Estimated flow to score directly.
    #[arg(long, conflicts_with_all = ["image", "densities", "seeds"])]
    est: Option<PathBuf>,
    /// Input mask of a direct comparison, for the unknown and heldout scopes.
    #[arg(long, requires = "est")]
    mask: Option<PathBuf>,
    /// Reference image for a density sweep.
    #[arg(long, requires_all = ["densities", "seeds"])]
    image: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    densities: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum, default_value = "all")]
    scope: ScopeArg,
    #[arg(long, value_enum, default_value = "and")]
    fl_mode: FlArg,
    /// Sweep CSV destination (stdout when absent).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct GenmaskArgs {
    #[arg(long, required_unless_present = "within")]
    width: Option<usize>,
    #[arg(long, required_unless_present = "within")]
    height: Option<usize>,
    /// Draw only among the valid pixels of this KITTI flow.
    #[arg(long, conflicts_with_all = ["width", "height"])]
    within: Option<PathBuf>,
    #[arg(long)]
    density: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct GridsearchArgs {
    /// Reference images, paired in order with `--flow`.
    #[arg(long, required = true)]
    image: Vec<PathBuf>,
    /// Dense ground-truth flows.
    #[arg(long, required = true)]
    flow: Vec<PathBuf>,
    #[arg(long)]
    density: f64,
    /// Sample i uses the mask drawn with seed + i.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 9)]
    lambda_steps: usize,
    #[arg(long, default_value_t = 14)]
    alpha_steps: usize,
    #[arg(long, default_value_t = pipeline::DEFAULT_LEVELS)]
    levels: usize,
    /// Full table as CSV (stdout when absent).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FlowvizArgs {
    #[arg(long)]
    flow: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Magnitude of full saturation (default: 99th percentile).
    #[arg(long)]
    max_mag: Option<f64>,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Time step for the stability probe.
    #[arg(long, default_value_t = flowinpaint::solver::DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long, default_value_t = 32)]
    size: usize,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<flowinpaint::Error> for Failure {
    fn from(e: flowinpaint::Error) -> Self {
        let code = match e.class() {
            ErrorClass::Usage => 1,
            ErrorClass::Format => 2,
            ErrorClass::Numeric => 3,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<stdio::Error> for Failure {
    fn from(e: stdio::Error) -> Self {
        flowinpaint::Error::from(e).into()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn pipeline_config(p: &PipelineArgs) -> CliResult<PipelineConfig> {
    let mut cfg = match p.mode {
        Mode::Z => PipelineConfig::neuroexplicit(),
        Mode::Eed | Mode::Homogeneous => {
            let mut c = PipelineConfig::explicit_eed(1e-4, p.alpha);
            c.schedule = Schedule::Converge {
                tol: p.tol,
                max_iterations: p.max_iterations,
                cycle_len: p.cycle_len,
            };
            c
        }
    }
    .with_levels(p.levels);
    if let Some(l) = p.lambda {
        cfg.lambdas = vec![l; p.levels];
    }
    if let Some(iterations) = &p.iterations {
        cfg.schedule = Schedule::OneCyclePerLevel { iterations: iterations.clone() };
    }
    cfg.rho = p.rho;
    cfg.alpha = p.alpha;
    cfg.tau = p.tau;
    cfg.validate()?;
    Ok(cfg)
}

fn load_z(p: &PipelineArgs) -> CliResult<Option<Vec<ZField>>> {
    match (p.mode, &p.zfile) {
        (Mode::Z, None) => Err(Failure::usage("--mode z requires --zfile")),
        (Mode::Z, Some(path)) => Ok(Some(io::read_zfield(path)?)),
        (_, Some(_)) => Err(Failure::usage("--zfile is only used with --mode z")),
        (_, None) => Ok(None),
    }
}

fn run_pipeline(
    p: &PipelineArgs,
    cfg: &PipelineConfig,
    z: Option<&[ZField]>,
    image: &Field2D,
    mask: &Mask,
    sparse: &Field2D,
) -> CliResult<Field2D> {
    let out = match p.mode {
        Mode::Homogeneous => pipeline::inpaint_homogeneous(mask, sparse, cfg)?,
        Mode::Eed | Mode::Z => pipeline::inpaint(image, mask, sparse, cfg, z)?,
    };
    if !out.converged() {
        log::warn!("at least one level stopped at the iteration cap");
    }
    Ok(out.flow)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdio::stdout().lock()),
    })
}

fn inpaint(a: InpaintArgs) -> CliResult {
    let cfg = pipeline_config(&a.pipeline)?;
    let z = load_z(&a.pipeline)?;
    let image = io::read_image(&a.image)?;
    let (flow, valid) = io::read_flow(&a.flow)?;
    let mask = match (&a.mask, a.density, a.seed) {
        (Some(path), _, _) => io::read_mask(path)?.and(&valid),
        (None, Some(d), Some(s)) => metrics::genmask_within(&valid, d, s)?,
        _ => return Err(Failure::usage("give either --mask or --density with --seed")),
    };
    if !mask.same_dims(flow.width(), flow.height()) {
        return Err(Failure::usage("mask and flow dimensions differ"));
    }
    let sparse = metrics::subsample(&flow, &mask);
    let result = run_pipeline(&a.pipeline, &cfg, z.as_deref(), &image, &mask, &sparse)?;
    io::write_flow(&a.out, &result)?;
    if let Some(path) = &a.color {
        io::write_rgb(path, &io::flow_to_color(&result, None)?)?;
    }
    if let Some(path) = &a.gt {
        let (gt, gt_valid) = io::read_flow(path)?;
        let e = metrics::epe(&result, &gt, Some(&gt_valid))?;
        let fl = metrics::fl_rate(&result, &gt, Some(&gt_valid), FlMode::And)?;
        println!("epe={e:.6} fl={fl:.6} n_pixels={}", gt_valid.count());
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let (gt, valid) = io::read_flow(&a.gt)?;
    let valid = (!valid.is_full()).then_some(valid);
    let scope = EvalScope::from(a.scope);
    if let Some(est_path) = &a.est {
        let (est, _) = io::read_flow(est_path)?;
        let input = match &a.mask {
            Some(p) => io::read_mask(p)?,
            None if scope == EvalScope::All => Mask::new(gt.width(), gt.height(), false),
            None => return Err(Failure::usage("--scope unknown/heldout needs --mask")),
        };
        let sel = scope.select(&input, valid.as_ref())?;
        let e = metrics::epe(&est, &gt, Some(&sel))?;
        let fl = metrics::fl_rate(&est, &gt, Some(&sel), a.fl_mode.into())?;
        println!("epe={e:.6} fl={fl:.6} n_pixels={} scope={}", sel.count(), scope.as_str());
        return Ok(());
    }
    let (Some(image_path), Some(densities), Some(seeds)) = (&a.image, &a.densities, &a.seeds) else {
        return Err(Failure::usage("give --est, or --image with --densities and --seeds"));
    };
    let cfg = pipeline_config(&a.pipeline)?;
    if a.pipeline.mode == Mode::Homogeneous {
        return Err(Failure::usage("density sweeps run in eed or z mode"));
    }
    let opts = SweepOptions {
        scope,
        fl_mode: a.fl_mode.into(),
        valid,
        z_levels: load_z(&a.pipeline)?,
    };
    let image = io::read_image(image_path)?;
    let rows = metrics::density_sweep(&image, &gt, densities, seeds, &cfg, &opts)?;
    let mut out = open_output(a.csv.as_deref())?;
    metrics::write_reports_csv(&mut out, &rows)?;
    out.flush()?;
    Ok(())
}

fn genmask(a: GenmaskArgs) -> CliResult {
    let mask = match (&a.within, a.width, a.height) {
        (Some(path), _, _) => {
            let (_, valid) = io::read_flow(path)?;
            metrics::genmask_within(&valid, a.density, a.seed)?
        }
        (None, Some(w), Some(h)) => metrics::genmask(w, h, a.density, a.seed)?,
        _ => return Err(Failure::usage("give --width and --height, or --within")),
    };
    io::write_mask(&a.out, &mask)?;
    println!("known={} of {}", mask.count(), mask.width() * mask.height());
    Ok(())
}

fn gridsearch(a: GridsearchArgs) -> CliResult {
    if a.image.len() != a.flow.len() {
        return Err(Failure::usage("--image and --flow must be given the same number of times"));
    }
    let samples = a
        .image
        .iter()
        .zip(&a.flow)
        .map(|(i, f)| Ok((io::read_image(i)?, io::read_flow(f)?.0)))
        .collect::<CliResult<Vec<_>>>()?;
    let spec = GridSpec {
        lambda_steps: a.lambda_steps,
        alpha_steps: a.alpha_steps,
        ..GridSpec::default()
    };
    let base = PipelineConfig::explicit_eed(1e-4, 0.3).with_levels(a.levels);
    let cal = calibrate::calibrate(&samples, a.density, &spec, a.seed, &base)?;
    let mut out = open_output(a.csv.as_deref())?;
    calibrate::write_table_csv(&mut out, &cal.table)?;
    out.flush()?;
    eprintln!("best lambda={:e} alpha={} epe={:.6}", cal.lambda, cal.alpha, cal.epe);
    Ok(())
}

fn flowviz(a: FlowvizArgs) -> CliResult {
    let (flow, _) = io::read_flow(&a.flow)?;
    io::write_rgb(&a.out, &io::flow_to_color(&flow, a.max_mag)?)?;
    Ok(())
}

fn selfcheck(a: SelfcheckArgs) -> CliResult {
    let results = selfcheck::run(&SelfcheckOptions {
        tau: a.tau,
        seed: a.seed,
        instances: a.instances,
        size: a.size,
    });
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        eprintln!("{verdict} {} measured={:.3e} threshold={:.3e}", r.name, r.measured, r.threshold);
    }
    for r in &results {
        println!("{}", r.to_json());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        return Err(Failure::numeric(format!("{failed} self-checks failed")));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Inpaint(a) => inpaint(a),
        Command::Eval(a) => eval(a),
        Command::Genmask(a) => genmask(a),
        Command::Gridsearch(a) => gridsearch(a),
        Command::Flowviz(a) => flowviz(a),
        Command::Selfcheck(a) => selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
