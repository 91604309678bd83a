use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use colt_ot::bench::{
    fit_complexity, run_experiment, solve, ExperimentConfig, Instance, ProblemKind, SolverKind, DEFAULT_SPACING_2D,
    TIMING_OUTER,
};
use colt_ot::data::{benchmark_mixtures, read_csv_vector, rescale, uniform_random_2d, DEFAULT_ETA};
use colt_ot::solvers::{DeltaSchedule, IterConfig, DEFAULT_INNER, DEFAULT_OUTER};
use colt_ot::{Error, Problem1D, Problem2D, Result};

#[derive(Parser)]
#[command(name = "colt-ot", version, about = "Linear-time Wasserstein-1 solvers on uniform grids")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// W1 between two 1D distributions (benchmark mixtures by default).
    #[command(name = "w1-1d")]
    W1OneD(OneDArgs),
    /// W1 between two seeded random fields on an n x m grid.
    #[command(name = "w1-2d")]
    W1TwoD(TwoDArgs),
    /// W1 between two grayscale PGM images.
    #[command(name = "image-w1")]
    ImageW1(ImageArgs),
    /// Run a benchmark grid and write trace and summary CSVs.
    Bench(BenchArgs),
    /// Fit log(time) = slope * log(size) + intercept.
    Fit(FitArgs),
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t = SolverArg::Fs2)]
    solver: SolverArg,
    /// Proximal regularization (constant schedule).
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Entropic regularization for sinkhorn and fs1.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Inner scaling sweeps per outer step.
    #[arg(long, default_value_t = DEFAULT_INNER)]
    inner: usize,
    /// Outer steps; defaults to 500, or 10 with --timing.
    #[arg(long)]
    outer: Option<usize>,
    /// Also compute the exact W1 (closed form in 1D, LP on small 2D grids).
    #[arg(long)]
    oracle: bool,
    /// Print the wall time of the solve.
    #[arg(long)]
    timing: bool,
    /// Directory to write the convergence trace to.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SolverArgs {
    fn iter_config(&self) -> IterConfig<f64> {
        let outer = self.outer.unwrap_or(if self.timing { TIMING_OUTER } else { DEFAULT_OUTER });
        IterConfig { schedule: DeltaSchedule::Constant(self.delta), inner: self.inner, outer, tol: None }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sinkhorn,
    Fs1,
    Ipot,
    Fs2,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Sinkhorn => SolverKind::Sinkhorn,
            SolverArg::Fs1 => SolverKind::Fs1,
            SolverArg::Ipot => SolverKind::Ipot,
            SolverArg::Fs2 => SolverKind::Fs2,
        }
    }
}

#[derive(Args)]
struct OneDArgs {
    /// Number of grid nodes on [0, 100].
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Source vector (CSV, one value per line); rescaled with --eta.
    #[arg(long, requires = "target")]
    source: Option<PathBuf>,
    #[arg(long, requires = "source")]
    target: Option<PathBuf>,
    /// Grid spacing for CSV inputs.
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct TwoDArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid spacing in both directions.
    #[arg(long, default_value_t = DEFAULT_SPACING_2D)]
    h: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct ImageArgs {
    source: PathBuf,
    target: PathBuf,
    /// Downsampled height.
    #[arg(long, default_value_t = 32)]
    n: usize,
    /// Downsampled width.
    #[arg(long, default_value_t = 32)]
    m: usize,
    #[arg(long, default_value_t = DEFAULT_SPACING_2D)]
    h: f64,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Gaussian1d,
    Random2d,
    Images,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = ProblemArg::Gaussian1d)]
    problem: ProblemArg,
    /// Problem sizes (1D node count or 2D side length).
    #[arg(long = "n", value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long = "solver", value_enum, value_delimiter = ',', default_values_t = [SolverArg::Ipot, SolverArg::Fs2])]
    solvers: Vec<SolverArg>,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long = "epsilon", value_delimiter = ',', default_values_t = [0.05])]
    epsilons: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_INNER)]
    inner: usize,
    /// Outer steps; defaults to 500, or 10 with --timing.
    #[arg(long)]
    outer: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
    /// Grid spacing for the 2D problems.
    #[arg(long, default_value_t = DEFAULT_SPACING_2D)]
    h: f64,
    /// Skip oracle values in the summary.
    #[arg(long = "no-oracle", action = clap::ArgAction::SetFalse)]
    oracle: bool,
    /// Run cells sequentially.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    /// Images for --problem images.
    #[arg(long)]
    source: Option<PathBuf>,
    #[arg(long)]
    target: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_delimiter = ',', conflicts_with = "summary")]
    sizes: Vec<f64>,
    #[arg(long, value_delimiter = ',', conflicts_with = "summary")]
    times: Vec<f64>,
    /// Fit median times of one solver from a bench summary.csv.
    #[arg(long, requires = "solver")]
    summary: Option<PathBuf>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
}

fn report(inst: &Instance, args: &SolverArgs) -> Result<()> {
    let kind = SolverKind::from(args.solver);
    let cost = if kind.is_dense() { Some(inst.cost_matrix()?) } else { None };
    let start = Instant::now();
    let res = solve(kind, inst, cost.as_ref(), args.epsilon)?;
    let elapsed = start.elapsed();
    if !res.w1.is_finite() {
        return Err(Error::Numerical(format!("non-finite W1 {}", res.w1)));
    }
    println!("solver = {kind}");
    println!("size = {}", inst.descriptor());
    println!("w1 = {:.16e}", res.w1);
    if let Some(last) = res.trace.last() {
        println!("iterations = {}", last.iterations);
        println!("col_residual = {:.3e}", last.col_residual);
    }
    if args.oracle {
        match inst.oracle_w1()? {
            Some(w) => {
                println!("oracle_w1 = {w:.16e}");
                println!("rel_error = {:.3e}", (res.w1 - w).abs() / w);
            }
            None => println!("oracle_w1 = (grid too large for the LP oracle)"),
        }
    }
    if args.timing {
        println!("time_s = {:.6}", elapsed.as_secs_f64());
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("trace_{kind}_{}.csv", inst.descriptor()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["outer", "iterations", "w1", "row_residual", "col_residual", "elapsed_s"])?;
        for r in &res.trace.records {
            w.write_record([
                r.outer.to_string(),
                r.iterations.to_string(),
                format!("{:.16e}", r.w1),
                format!("{:.16e}", r.row_residual),
                format!("{:.16e}", r.col_residual),
                format!("{:.16e}", r.elapsed.as_secs_f64()),
            ])?;
        }
        w.flush()?;
        println!("trace = {}", path.display());
    }
    Ok(())
}

fn run_1d(a: OneDArgs) -> Result<()> {
    let (u, v, h) = match (&a.source, &a.target) {
        (Some(s), Some(t)) => (rescale(&read_csv_vector(s)?, a.eta)?, rescale(&read_csv_vector(t)?, a.eta)?, a.h),
        _ => benchmark_mixtures(a.n)?,
    };
    let p = Problem1D::new(u, v, h)?.with_config(a.solver.iter_config())?;
    report(&Instance::OneD(p), &a.solver)
}

fn run_2d(a: TwoDArgs) -> Result<()> {
    let u = uniform_random_2d(a.n, a.m, a.seed)?;
    let v = uniform_random_2d(a.n, a.m, a.seed.wrapping_add(1))?;
    let p = Problem2D::new(u, v, a.n, a.m, a.h, a.h)?.with_config(a.solver.iter_config())?;
    report(&Instance::TwoD(p), &a.solver)
}

fn run_image(a: ImageArgs) -> Result<()> {
    let load = |path: &PathBuf| -> Result<Vec<f64>> {
        colt_ot::data::load_pgm(path)?.downsample(a.n, a.m)?.to_marginal(a.eta)
    };
    let (u, v) = (load(&a.source)?, load(&a.target)?);
    let p = Problem2D::new(u, v, a.n, a.m, a.h, a.h)?.with_config(a.solver.iter_config())?;
    report(&Instance::TwoD(p), &a.solver)
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let kind = match a.problem {
        ProblemArg::Gaussian1d => ProblemKind::Gaussian1D,
        ProblemArg::Random2d => ProblemKind::Random2D,
        ProblemArg::Images => match (a.source, a.target) {
            (Some(source), Some(target)) => ProblemKind::Images { source, target },
            _ => return Err(Error::InvalidArgument("--problem images needs --source and --target".into())),
        },
    };
    let mut cfg = ExperimentConfig::new(kind, a.sizes, a.solvers.into_iter().map(SolverKind::from).collect(), a.out);
    cfg.delta = a.delta;
    cfg.epsilons = a.epsilons;
    cfg.inner = a.inner;
    cfg.outer = a.outer.unwrap_or(if a.timing { TIMING_OUTER } else { DEFAULT_OUTER });
    cfg.seed = a.seed;
    cfg.repetitions = a.reps;
    cfg.eta = a.eta;
    cfg.spacing = a.h;
    cfg.oracle = a.oracle;
    cfg.timing = a.timing;
    let summary = run_experiment(&cfg)?;
    let failed = summary.records.iter().filter(|r| r.failure.is_some()).count();
    println!("summary = {}", summary.summary_path.display());
    println!("traces = {}", summary.trace_paths.len());
    println!("failed_cells = {failed}");
    Ok(())
}

fn summary_points(path: &PathBuf, solver: SolverKind) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse(format!("summary lacks column {name}")))
    };
    let (c_solver, c_size, c_status, c_time) = (col("solver")?, col("size")?, col("status")?, col("median_s")?);
    let (mut sizes, mut times) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        if rec.get(c_solver) != Some(solver.as_str()) || rec.get(c_status) != Some("ok") {
            continue;
        }
        let size = rec.get(c_size).unwrap_or_default();
        // "n" or "n x m": fit against the total number of grid points
        let points: f64 = size
            .split('x')
            .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad size {size:?}"))))
            .product::<Result<f64>>()?;
        let t: f64 = rec
            .get(c_time)
            .unwrap_or_default()
            .parse()
            .map_err(|_| Error::Parse("bad median_s".into()))?;
        sizes.push(points);
        times.push(t);
    }
    Ok((sizes, times))
}

fn run_fit(a: FitArgs) -> Result<()> {
    let (sizes, times) = match (&a.summary, a.solver) {
        (Some(path), Some(s)) => summary_points(path, s.into())?,
        _ => (a.sizes, a.times),
    };
    let fit = fit_complexity(&sizes, &times)?;
    println!("points = {}", sizes.len());
    println!("slope = {:.6}", fit.slope);
    println!("intercept = {:.6}", fit.intercept);
    println!("r2 = {:.6}", fit.r2);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match cli.cmd {
        Command::W1OneD(a) => run_1d(a),
        Command::W1TwoD(a) => run_2d(a),
        Command::ImageW1(a) => run_image(a),
        Command::Bench(a) => run_bench(a),
        Command::Fit(a) => run_fit(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
