//! Benchmark harness: experiment configs, CSV traces and summaries,
//! complexity fits and plan comparisons.
//!
//! CSV layout (schema version 1). Every float is written with 17
//! significant digits. Timing columns are always last so that golden
//! comparisons can drop them.
//!
//! `trace_<solver>[_eps<k>]_<size>.csv`:
//! `outer,iterations,w1,row_residual,col_residual,elapsed_s`
//!
//! `summary.csv`:
//! `solver,size,epsilon,status,w1,oracle_w1,oracle_rel_error,plan_frobenius_vs_ipot,repetitions,median_s,mean_s,speedup_ipot_over_fs2`

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::data::{benchmark_mixtures, load_pgm, uniform_random_2d, DEFAULT_ETA};
use crate::dense::{DenseMatrix, DENSE_LIMIT};
use crate::error::{Error, Result};
use crate::instrument::dense_evals;
use crate::oracles::{lp_transport_exact, w1_1d_exact, LP_LIMIT};
use crate::solvers::{
    fs1_1d, fs1_2d, fs2_1d, fs2_2d, ipot_dense, sinkhorn_dense, ConvergenceTrace, DeltaSchedule, IterConfig,
    Problem1D, Problem2D, TransportPlan,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable holding the worker count for parallel cells.
pub const WORKERS_ENV: &str = "COLT_OT_WORKERS";
pub const TIMING_OUTER: usize = 10;
pub const DEFAULT_SPACING_2D: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    /// The two benchmark Gaussian mixtures on `[0, 100]`; size is `N`.
    Gaussian1D,
    /// Seeded uniform fields on a square grid; size is the side length.
    Random2D,
    /// Two PGM images downsampled to a square grid; size is the side length.
    Images { source: PathBuf, target: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Sinkhorn,
    Fs1,
    Ipot,
    Fs2,
}

impl SolverKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverKind::Sinkhorn => "sinkhorn",
            SolverKind::Fs1 => "fs1",
            SolverKind::Ipot => "ipot",
            SolverKind::Fs2 => "fs2",
        }
    }

    pub fn is_entropic(&self) -> bool {
        matches!(self, SolverKind::Sinkhorn | SolverKind::Fs1)
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, SolverKind::Sinkhorn | SolverKind::Ipot)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sinkhorn" => Ok(SolverKind::Sinkhorn),
            "fs1" => Ok(SolverKind::Fs1),
            "ipot" => Ok(SolverKind::Ipot),
            "fs2" => Ok(SolverKind::Fs2),
            _ => Err(Error::InvalidArgument(format!("unknown solver {s:?} (sinkhorn, fs1, ipot, fs2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ProblemKind,
    pub sizes: Vec<usize>,
    pub solvers: Vec<SolverKind>,
    pub delta: f64,
    /// Regularizations for the entropic solvers.
    pub epsilons: Vec<f64>,
    pub inner: usize,
    pub outer: usize,
    pub seed: u64,
    pub repetitions: usize,
    pub out: PathBuf,
    /// Run cells sequentially so timings do not contend.
    pub timing: bool,
    pub eta: f64,
    /// Grid spacing `h1 = h2` for the 2D kinds.
    pub spacing: f64,
    /// Compute oracle values where one applies.
    pub oracle: bool,
}

impl ExperimentConfig {
    pub fn new(kind: ProblemKind, sizes: Vec<usize>, solvers: Vec<SolverKind>, out: impl Into<PathBuf>) -> Self {
        Self {
            kind,
            sizes,
            solvers,
            delta: 1.0,
            epsilons: vec![1.0 / 20.0],
            inner: crate::solvers::DEFAULT_INNER,
            outer: crate::solvers::DEFAULT_OUTER,
            seed: 0,
            repetitions: 1,
            out: out.into(),
            timing: false,
            eta: DEFAULT_ETA,
            spacing: DEFAULT_SPACING_2D,
            oracle: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidArgument("no sizes given".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::InvalidArgument("no solvers given".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("repetitions must be >= 1".into()));
        }
        if self.inner == 0 || self.outer == 0 {
            return Err(Error::InvalidArgument("inner and outer iteration counts must be >= 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {}", self.delta)));
        }
        if self.solvers.iter().any(SolverKind::is_entropic)
            && (self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())))
        {
            return Err(Error::InvalidArgument("entropic solvers need positive epsilons".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {}", self.spacing)));
        }
        if self.sizes.iter().any(|&s| s < 2) {
            return Err(Error::InvalidArgument("sizes must be >= 2".into()));
        }
        Ok(())
    }

    fn iter_config(&self) -> IterConfig<f64> {
        IterConfig { schedule: DeltaSchedule::Constant(self.delta), inner: self.inner, outer: self.outer, tol: None }
    }
}

/// A generated problem instance.
#[derive(Debug, Clone)]
pub enum Instance {
    OneD(Problem1D<f64>),
    TwoD(Problem2D<f64>),
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig, size: usize) -> Result<Self> {
        let ic = cfg.iter_config();
        Ok(match &cfg.kind {
            ProblemKind::Gaussian1D => {
                let (u, v, h) = benchmark_mixtures(size)?;
                Instance::OneD(Problem1D::new(u, v, h)?.with_config(ic)?)
            }
            ProblemKind::Random2D => {
                let u = uniform_random_2d(size, size, cfg.seed)?;
                let v = uniform_random_2d(size, size, cfg.seed.wrapping_add(1))?;
                let h = cfg.spacing;
                Instance::TwoD(Problem2D::new(u, v, size, size, h, h)?.with_config(ic)?)
            }
            ProblemKind::Images { source, target } => {
                let a = load_pgm(source)?.downsample(size, size)?.to_marginal(cfg.eta)?;
                let b = load_pgm(target)?.downsample(size, size)?.to_marginal(cfg.eta)?;
                let h = cfg.spacing;
                Instance::TwoD(Problem2D::new(a, b, size, size, h, h)?.with_config(ic)?)
            }
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Instance::OneD(p) => p.n(),
            Instance::TwoD(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn descriptor(&self) -> String {
        match self {
            Instance::OneD(p) => p.n().to_string(),
            Instance::TwoD(p) => format!("{}x{}", p.n, p.m),
        }
    }

    pub fn cost_matrix(&self) -> Result<DenseMatrix<f64>> {
        match self {
            Instance::OneD(p) => p.cost_matrix(),
            Instance::TwoD(p) => p.cost_matrix(),
        }
    }

    /// Exact W₁: closed form in 1D, the LP oracle on small 2D grids.
    pub fn oracle_w1(&self) -> Result<Option<f64>> {
        match self {
            Instance::OneD(p) => Ok(Some(w1_1d_exact(&p.u, &p.v, p.h)?)),
            Instance::TwoD(p) if p.len() <= LP_LIMIT => {
                Ok(Some(lp_transport_exact(&p.u, &p.v, &p.cost_matrix()?)?.objective))
            }
            Instance::TwoD(_) => Ok(None),
        }
    }
}

/// Output of one solver run.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub w1: f64,
    pub plan: TransportPlan<f64>,
    pub trace: ConvergenceTrace<f64>,
}

/// Run one solver. Dense solvers take the precomputed cost matrix so that
/// building it stays outside any timed region.
pub fn solve(
    solver: SolverKind,
    inst: &Instance,
    cost: Option<&DenseMatrix<f64>>,
    epsilon: f64,
) -> Result<SolveResult> {
    let need_cost = || cost.ok_or_else(|| Error::InvalidArgument(format!("{solver} needs a cost matrix")));
    let sweeps = |c: &IterConfig<f64>| c.inner * c.outer;
    match (solver, inst) {
        (SolverKind::Fs2, Instance::OneD(p)) => {
            let o = fs2_1d(p)?;
            Ok(SolveResult { w1: o.w1, plan: TransportPlan::Colt(o.plan), trace: o.trace })
        }
        (SolverKind::Fs2, Instance::TwoD(p)) => {
            let o = fs2_2d(p)?;
            Ok(SolveResult { w1: o.w1, plan: TransportPlan::Block(o.plan), trace: o.trace })
        }
        (SolverKind::Fs1, Instance::OneD(p)) => {
            let o = fs1_1d(p, epsilon, sweeps(&p.config))?;
            Ok(SolveResult { w1: o.w1, plan: o.plan, trace: o.trace })
        }
        (SolverKind::Fs1, Instance::TwoD(p)) => {
            let o = fs1_2d(p, epsilon, sweeps(&p.config))?;
            Ok(SolveResult { w1: o.w1, plan: o.plan, trace: o.trace })
        }
        (SolverKind::Ipot, Instance::OneD(p)) => dense_result(ipot_dense(p, need_cost()?)?),
        (SolverKind::Ipot, Instance::TwoD(p)) => dense_result(ipot_dense(p, need_cost()?)?),
        (SolverKind::Sinkhorn, Instance::OneD(p)) => {
            dense_result(sinkhorn_dense(p, need_cost()?, epsilon, sweeps(&p.config))?)
        }
        (SolverKind::Sinkhorn, Instance::TwoD(p)) => {
            dense_result(sinkhorn_dense(p, need_cost()?, epsilon, sweeps(&p.config))?)
        }
    }
}

fn dense_result(o: crate::solvers::DenseOutput<f64>) -> Result<SolveResult> {
    Ok(SolveResult { w1: o.w1, plan: TransportPlan::Dense(o.plan), trace: o.trace })
}

/// `‖A − B‖_F`, densifying implicit plans under the size guard.
pub fn compare_plans(a: &TransportPlan<f64>, b: &TransportPlan<f64>) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!("plan sizes differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() > DENSE_LIMIT {
        return Err(Error::DenseGuard { size: a.len(), limit: DENSE_LIMIT });
    }
    a.to_dense()?.frobenius_dist(&b.to_dense()?)
}

/// Least-squares line through `(log size, log time)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_complexity(sizes: &[f64], times: &[f64]) -> Result<ComplexityFit> {
    crate::error::check_len(sizes.len(), times.len())?;
    if sizes.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 points, got {}", sizes.len())));
    }
    if sizes.iter().chain(times).any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("sizes and times must be positive".into()));
    }
    let x: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("sizes must not all be equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(ComplexityFit { slope, intercept, r2 })
}

/// One summary row.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub solver: SolverKind,
    pub size: String,
    pub epsilon: Option<f64>,
    /// `None` on success, the error message otherwise.
    pub failure: Option<String>,
    pub w1: Option<f64>,
    pub oracle_w1: Option<f64>,
    pub oracle_error: Option<f64>,
    pub plan_frobenius_vs_ipot: Option<f64>,
    pub repetitions: usize,
    pub median_s: Option<f64>,
    pub mean_s: Option<f64>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub records: Vec<TimingRecord>,
    pub summary_path: PathBuf,
    pub trace_paths: Vec<PathBuf>,
}

struct Cell {
    size_index: usize,
    solver: SolverKind,
    eps_index: Option<usize>,
}

struct CellOutcome {
    record: TimingRecord,
    result: Option<SolveResult>,
    trace_path: PathBuf,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn run_cell(cfg: &ExperimentConfig, inst: &Instance, cost: Option<&DenseMatrix<f64>>, cell: &Cell) -> CellOutcome {
    let eps = cell.eps_index.map(|k| cfg.epsilons[k]);
    let tag = match cell.eps_index {
        Some(k) => format!("{}_eps{k}", cell.solver),
        None => cell.solver.to_string(),
    };
    let trace_path = cfg.out.join(format!("trace_{tag}_{}.csv", inst.descriptor()));
    let mut record = TimingRecord {
        solver: cell.solver,
        size: inst.descriptor(),
        epsilon: eps,
        failure: None,
        w1: None,
        oracle_w1: None,
        oracle_error: None,
        plan_frobenius_vs_ipot: None,
        repetitions: cfg.repetitions,
        median_s: None,
        mean_s: None,
        speedup: None,
    };
    let mut times = Vec::with_capacity(cfg.repetitions);
    let mut result = None;
    for _ in 0..cfg.repetitions {
        let before = dense_evals();
        let start = Instant::now();
        let out = solve(cell.solver, inst, cost, eps.unwrap_or(1.0));
        let elapsed = start.elapsed().as_secs_f64();
        if !cell.solver.is_dense() {
            assert_eq!(dense_evals(), before, "dense evaluation inside a timed {} run", cell.solver);
        }
        match out {
            Ok(r) => {
                times.push(elapsed.max(f64::MIN_POSITIVE));
                result.get_or_insert(r);
            }
            Err(e) => {
                record.failure = Some(e.to_string());
                return CellOutcome { record, result: None, trace_path };
            }
        }
    }
    record.median_s = Some(median(&times));
    record.mean_s = Some(times.iter().sum::<f64>() / times.len() as f64);
    record.w1 = result.as_ref().map(|r| r.w1);
    CellOutcome { record, result, trace_path }
}

fn write_trace(path: &Path, trace: &ConvergenceTrace<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "outer,iterations,w1,row_residual,col_residual,elapsed_s")?;
    for r in &trace.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.outer,
            r.iterations,
            fmt_f(r.w1),
            fmt_f(r.row_residual),
            fmt_f(r.col_residual),
            fmt_f(r.elapsed.as_secs_f64())
        )?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, records: &[TimingRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "solver,size,epsilon,status,w1,oracle_w1,oracle_rel_error,plan_frobenius_vs_ipot,repetitions,median_s,mean_s,speedup_ipot_over_fs2"
    )?;
    for r in records {
        let status = match &r.failure {
            None => "ok".to_string(),
            Some(msg) => format!("\"failed: {}\"", msg.replace('"', "'")),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.solver,
            r.size,
            fmt_opt(r.epsilon),
            status,
            fmt_opt(r.w1),
            fmt_opt(r.oracle_w1),
            fmt_opt(r.oracle_error),
            fmt_opt(r.plan_frobenius_vs_ipot),
            r.repetitions,
            fmt_opt(r.median_s),
            fmt_opt(r.mean_s),
            fmt_opt(r.speedup)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// Run every `(size, solver, ε)` cell, write one trace CSV per cell and a
/// summary CSV. Solver failures become failed rows; I/O failures abort.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out)?;

    let mut solvers = cfg.solvers.clone();
    solvers.sort();
    solvers.dedup();

    let instances: Vec<Instance> = cfg.sizes.iter().map(|&s| Instance::build(cfg, s)).collect::<Result<_>>()?;
    let needs_dense = solvers.iter().any(SolverKind::is_dense);
    let costs: Vec<Option<DenseMatrix<f64>>> = instances
        .iter()
        .map(|inst| if needs_dense { inst.cost_matrix().ok() } else { None })
        .collect();

    let mut cells = Vec::new();
    for size_index in 0..instances.len() {
        for &solver in &solvers {
            if solver.is_entropic() {
                cells.extend((0..cfg.epsilons.len()).map(|k| Cell { size_index, solver, eps_index: Some(k) }));
            } else {
                cells.push(Cell { size_index, solver, eps_index: None });
            }
        }
    }

    let run = |c: &Cell| run_cell(cfg, &instances[c.size_index], costs[c.size_index].as_ref(), c);
    let mut outcomes: Vec<CellOutcome> = if cfg.timing {
        cells.iter().map(run).collect()
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = worker_count() {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run).collect())
    };

    // oracle values, reference comparisons and speed-ups, outside all timing
    for (size_index, inst) in instances.iter().enumerate() {
        let idx: Vec<usize> = (0..cells.len()).filter(|&i| cells[i].size_index == size_index).collect();
        let oracle = if cfg.oracle { inst.oracle_w1().ok().flatten() } else { None };
        let ipot = idx.iter().copied().find(|&i| cells[i].solver == SolverKind::Ipot);
        let fs2 = idx.iter().copied().find(|&i| cells[i].solver == SolverKind::Fs2);
        let reference = ipot.and_then(|i| outcomes[i].result.as_ref().map(|r| r.plan.clone()));
        for &i in &idx {
            let o = &mut outcomes[i];
            if let (Some(w), Some(w_star)) = (o.record.w1, oracle) {
                o.record.oracle_w1 = Some(w_star);
                o.record.oracle_error = Some((w - w_star).abs() / w_star.abs().max(f64::MIN_POSITIVE));
            }
            if let (Some(r), Some(reference)) = (&o.result, &reference) {
                o.record.plan_frobenius_vs_ipot = compare_plans(&r.plan, reference).ok();
            }
        }
        if let (Some(a), Some(b)) = (ipot, fs2) {
            if let (Some(ti), Some(tf)) = (outcomes[a].record.median_s, outcomes[b].record.median_s) {
                outcomes[b].record.speedup = Some(ti / tf);
            }
        }
    }

    let mut trace_paths = Vec::new();
    for o in &outcomes {
        if let Some(r) = &o.result {
            write_trace(&o.trace_path, &r.trace)?;
            trace_paths.push(o.trace_path.clone());
        }
    }
    let records: Vec<TimingRecord> = outcomes.into_iter().map(|o| o.record).collect();
    let summary_path = cfg.out.join("summary.csv");
    write_summary(&summary_path, &records)?;
    Ok(ExperimentSummary { records, summary_path, trace_paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_exact_power_laws() {
        let sizes = [100.0, 200.0, 400.0, 800.0, 1600.0];
        let lin: Vec<f64> = sizes.iter().map(|n| 3e-7 * n).collect();
        let quad: Vec<f64> = sizes.iter().map(|n| 2e-9 * n * n).collect();
        let f = fit_complexity(&sizes, &lin).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!((fit_complexity(&sizes, &quad).unwrap().slope - 2.0).abs() < 1e-12);
        assert!(fit_complexity(&sizes[..2], &lin[..2]).is_err());
        assert!(fit_complexity(&sizes[..3], &[1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn compare_plan_examples() {
        let a = DenseMatrix::from_fn(3, 3, |i, j| (i + 2 * j) as f64 * 0.01);
        let mut b = a.clone();
        assert_eq!(compare_plans(&TransportPlan::Dense(a.clone()), &TransportPlan::Dense(b.clone())).unwrap(), 0.0);
        b.set(1, 2, b.get(1, 2) + 1e-8);
        let d = compare_plans(&TransportPlan::Dense(a.clone()), &TransportPlan::Dense(b)).unwrap();
        assert!((d - 1e-8).abs() < 1e-15);
        let c = TransportPlan::Dense(DenseMatrix::zeros(2, 2));
        assert!(compare_plans(&TransportPlan::Dense(a), &c).is_err());
    }

    #[test]
    fn solver_names_round_trip() {
        for s in [SolverKind::Sinkhorn, SolverKind::Fs1, SolverKind::Ipot, SolverKind::Fs2] {
            assert_eq!(s.as_str().parse::<SolverKind>().unwrap(), s);
        }
        assert!("lp".parse::<SolverKind>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(ProblemKind::Gaussian1D, vec![50], vec![], "unused");
        assert!(cfg.validate().is_err());
        cfg.solvers = vec![SolverKind::Fs2];
        assert!(cfg.validate().is_ok());
        cfg.repetitions = 0;
        assert!(cfg.validate().is_err());
    }
}
