//! Experiment runner: oracle quantiles, bootstrap estimates and
//! extrapolations over a grid of feature counts, written as CSV.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use crate::bootstrap::{empirical_quantile, extrapolate, select_feature_count, ErrorMode};
use crate::datasets::{
    gen_friedman, gen_gaussian_pair, gen_lorenz, gen_swiss_roll, load_csv, minmax_scale, subsample, PointSet,
    LORENZ_BURN_IN, LORENZ_DT, LORENZ_X0,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernels::Kernel;
use crate::mmd::MmdProblem;
use crate::oracle::{run_trials, ErrorTarget, OpPath, PreparedTarget, TrialRecord, TrialSettings};
use crate::ridge::RidgeProblem;
use crate::rng::{stream, TAG_DATA};

/// CSV header shared by every task.
pub const CSV_HEADER: [&str; 6] = [
    "s",
    "oracle_quantile",
    "mean_bootstrap_estimate",
    "sd_bootstrap_estimate",
    "mean_extrapolated_estimate",
    "sd_extrapolated_estimate",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    MatrixLinf,
    MatrixOp,
    Krr,
    Mmd,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::MatrixLinf => "matrix-linf",
            Task::MatrixOp => "matrix-op",
            Task::Krr => "krr",
            Task::Mmd => "mmd",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix-linf" => Ok(Task::MatrixLinf),
            "matrix-op" => Ok(Task::MatrixOp),
            "krr" => Ok(Task::Krr),
            "mmd" => Ok(Task::Mmd),
            _ => Err(Error::invalid(format!(
                "unknown task {s:?} (expected matrix-linf, matrix-op, krr or mmd)"
            ))),
        }
    }
}

/// Where the data comes from. Parsed from `name` or `name:key=value,...`.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    /// `swiss-roll:n=300`
    SwissRoll { n: usize },
    /// `lorenz:n=300,dt=0.01,burn-in=1000`
    Lorenz { n: usize, dt: f64, burn_in: usize },
    /// `gaussian-pair:n=2000,d=10,var1=0.1,var2=0.1933`
    GaussianPair { n: usize, d: usize, var1: f64, var2: f64 },
    /// `friedman:n=2000,test=500,d=10,noise=1`
    Friedman { n: usize, test: usize, d: usize, noise: f64 },
    /// `csv:path=data.csv,header=true,rows=2000,cols=50,test=500`
    ///
    /// For regression the last column holds the labels and `test` rows are
    /// held out; otherwise every column is a feature.
    Csv {
        path: PathBuf,
        header: bool,
        rows: Option<usize>,
        cols: Option<usize>,
        test: usize,
    },
}

impl FromStr for DatasetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut pairs = Vec::new();
        for item in rest.split(',').filter(|i| !i.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("dataset option {item:?} is not key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut opts = Options { pairs };
        let spec = match name {
            "swiss-roll" => DatasetSpec::SwissRoll {
                n: opts.take("n", 300)?,
            },
            "lorenz" => DatasetSpec::Lorenz {
                n: opts.take("n", 300)?,
                dt: opts.take("dt", LORENZ_DT)?,
                burn_in: opts.take("burn-in", LORENZ_BURN_IN)?,
            },
            "gaussian-pair" => DatasetSpec::GaussianPair {
                n: opts.take("n", 2000)?,
                d: opts.take("d", 10)?,
                var1: opts.take("var1", 0.1)?,
                var2: opts.take("var2", 0.1933)?,
            },
            "friedman" => DatasetSpec::Friedman {
                n: opts.take("n", 2000)?,
                test: opts.take("test", 500)?,
                d: opts.take("d", 10)?,
                noise: opts.take("noise", 1.0)?,
            },
            "csv" => DatasetSpec::Csv {
                path: opts
                    .take_raw("path")
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::invalid("csv dataset needs path=..."))?,
                header: opts.take("header", false)?,
                rows: opts.take_opt("rows")?,
                cols: opts.take_opt("cols")?,
                test: opts.take("test", 0)?,
            },
            _ => {
                return Err(Error::invalid(format!(
                    "unknown dataset {name:?} (expected swiss-roll, lorenz, gaussian-pair, friedman or csv)"
                )))
            }
        };
        if let Some((k, _)) = opts.pairs.first() {
            return Err(Error::invalid(format!("unknown option {k:?} for dataset {name}")));
        }
        Ok(spec)
    }
}

struct Options {
    pairs: Vec<(String, String)>,
}

impl Options {
    fn take_raw(&mut self, key: &str) -> Option<String> {
        let pos = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn take_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.take_raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::invalid(format!("bad value {v:?} for dataset option {key}")))
            })
            .transpose()
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take_opt(key)?.unwrap_or(default))
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub task: Task,
    pub dataset: DatasetSpec,
    pub kernel: Kernel,
    /// Strictly increasing feature counts.
    pub s_grid: Vec<usize>,
    /// Base feature count for extrapolation; at most `s_grid[0]`.
    pub s0: usize,
    pub alpha: f64,
    /// Bootstrap iterations `N`.
    pub n_boot: usize,
    /// Monte Carlo trials per grid point.
    pub trials: usize,
    pub seed: u64,
    /// Ridge parameter (regression only).
    pub lambda: f64,
    /// Replace regression labels by their square roots.
    pub sqrt_y: bool,
    /// Divide every value column by the oracle quantile at the smallest `s`.
    pub rescale: bool,
    /// `None` uses the task default.
    pub mode: Option<ErrorMode>,
    /// Operator-norm pseudo-error route.
    pub op_path: OpPath,
    pub execution: Execution,
}

impl ExperimentSpec {
    /// A spec with the given task, dataset and kernel and default settings.
    pub fn new(task: Task, dataset: DatasetSpec, kernel: Kernel) -> Self {
        ExperimentSpec {
            task,
            dataset,
            kernel,
            s_grid: vec![50, 100, 200, 400],
            s0: 50,
            alpha: 0.1,
            n_boot: 50,
            trials: 100,
            seed: 0,
            lambda: 1.0,
            sqrt_y: false,
            rescale: false,
            mode: None,
            op_path: OpPath::Power(None),
            execution: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s_grid.is_empty() {
            return Err(Error::invalid("s-grid is empty"));
        }
        if self.s_grid[0] == 0 || self.s_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("s-grid must be positive and strictly increasing"));
        }
        if self.s0 == 0 || self.s0 > self.s_grid[0] {
            return Err(Error::invalid(format!(
                "s0 = {} must lie in [1, {}]",
                self.s0, self.s_grid[0]
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.n_boot == 0 || self.trials == 0 {
            return Err(Error::invalid("n-boot and trials must be positive"));
        }
        if self.task == Task::Krr && (self.lambda.is_nan() || self.lambda <= 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        Ok(())
    }

    fn settings(&self, target: &ErrorTarget) -> TrialSettings {
        TrialSettings {
            iterations: self.n_boot,
            alpha: self.alpha,
            mode: self.mode.unwrap_or_else(|| target.default_mode()),
            execution: self.execution,
        }
    }
}

fn load_points(spec: &DatasetSpec, seed: u64) -> Result<PointSet> {
    let mut rng = stream(seed, &[TAG_DATA]);
    match spec {
        DatasetSpec::SwissRoll { n } => gen_swiss_roll(*n, &mut rng),
        DatasetSpec::Lorenz { n, dt, burn_in } => gen_lorenz(*n, *dt, LORENZ_X0, *burn_in),
        DatasetSpec::Friedman { n, d, noise, .. } => gen_friedman(*n, *d, *noise, &mut rng),
        DatasetSpec::Csv { path, header, rows, cols, .. } => {
            let set = load_csv(path, *header, false)?;
            let rows = rows.unwrap_or(set.len());
            let cols = cols.unwrap_or(set.dim());
            subsample(&set, rows, cols, &mut rng)
        }
        DatasetSpec::GaussianPair { .. } => Err(Error::invalid("matrix tasks need a single point set")),
    }
}

fn ridge_problem(spec: &DatasetSpec, seed: u64, lambda: f64, sqrt_y: bool) -> Result<RidgeProblem> {
    let mut rng = stream(seed, &[TAG_DATA]);
    let (train, test) = match spec {
        DatasetSpec::Friedman { n, test, d, noise } => {
            let all = gen_friedman(n + test, *d, *noise, &mut rng)?;
            let train: Vec<usize> = (0..*n).collect();
            let held: Vec<usize> = (*n..n + test).collect();
            (all.select_rows(&train), all.select_rows(&held))
        }
        DatasetSpec::Csv { path, header, rows, cols, test } => {
            let set = load_csv(path, *header, true)?;
            let rows = rows.unwrap_or(set.len());
            let cols = cols.unwrap_or(set.dim());
            let set = minmax_scale(&subsample(&set, rows, cols, &mut rng)?);
            set.split(set.len().saturating_sub(*test), &mut rng)?
        }
        _ => return Err(Error::invalid("krr needs a labelled dataset (friedman or csv)")),
    };
    let (train, test) = if sqrt_y {
        (train.sqrt_labels()?, test.sqrt_labels()?)
    } else {
        (train, test)
    };
    RidgeProblem::new(
        train.points.clone(),
        train.require_labels()?.clone(),
        test.points.clone(),
        test.require_labels()?.clone(),
        lambda,
    )
}

/// Builds the error target for a spec (generating or loading its data).
pub fn build_target(spec: &ExperimentSpec) -> Result<ErrorTarget> {
    Ok(match spec.task {
        Task::MatrixLinf => ErrorTarget::MatrixLinf {
            points: load_points(&spec.dataset, spec.seed)?.points,
        },
        Task::MatrixOp => ErrorTarget::MatrixOp {
            points: load_points(&spec.dataset, spec.seed)?.points,
            path: spec.op_path,
        },
        Task::Krr => ErrorTarget::Krr {
            problem: ridge_problem(&spec.dataset, spec.seed, spec.lambda, spec.sqrt_y)?,
        },
        Task::Mmd => match &spec.dataset {
            DatasetSpec::GaussianPair { n, d, var1, var2 } => {
                let (x, y) = gen_gaussian_pair(*n, *d, *var1, *var2, &mut stream(spec.seed, &[TAG_DATA]))?;
                ErrorTarget::Mmd {
                    problem: MmdProblem::new(x.points, y.points)?,
                }
            }
            _ => return Err(Error::invalid("mmd needs the gaussian-pair dataset")),
        },
    })
}

/// One row of the result table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub s: usize,
    pub oracle_quantile: f64,
    pub mean_bootstrap_estimate: f64,
    pub sd_bootstrap_estimate: f64,
    pub mean_extrapolated_estimate: f64,
    pub sd_extrapolated_estimate: f64,
    /// Fraction of trials whose true error is at most the bootstrap
    /// estimate at this `s`. Not rescaled and not written to CSV.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTable {
    pub rows: Vec<ExperimentRow>,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every grid point and the extrapolation base `s0`.
///
/// Trial `t` at feature count `s` draws its map and bootstrap seed from
/// `(seed, s, t)`, so rows do not depend on each other or on scheduling.
/// Standard deviations are over trials (zero for a single trial).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    spec.validate()?;
    let target = build_target(spec)?;
    let settings = spec.settings(&target);
    let prepared = PreparedTarget::new(target, spec.kernel)?;
    let records: Vec<TrialRecord> = spec
        .s_grid
        .iter()
        .map(|&s| run_trials(&prepared, s, spec.trials, spec.seed, &settings))
        .collect::<Result<_>>()?;
    let base = if spec.s0 == spec.s_grid[0] {
        records[0].estimates.clone()
    } else {
        run_trials(&prepared, spec.s0, spec.trials, spec.seed, &settings)?.estimates
    };
    let mut rows = Vec::with_capacity(spec.s_grid.len());
    for (&s, record) in spec.s_grid.iter().zip(&records) {
        let oracle_quantile = empirical_quantile(&record.true_errors, 1.0 - spec.alpha)?;
        let (mean_b, sd_b) = mean_sd(&record.estimates);
        let extrapolated: Vec<f64> = base.iter().map(|&e| extrapolate(e, spec.s0, s)).collect();
        let (mean_e, sd_e) = mean_sd(&extrapolated);
        rows.push(ExperimentRow {
            s,
            oracle_quantile,
            mean_bootstrap_estimate: mean_b,
            sd_bootstrap_estimate: sd_b,
            mean_extrapolated_estimate: mean_e,
            sd_extrapolated_estimate: sd_e,
            coverage: record.coverage(),
        });
    }
    let mut table = ExperimentTable { rows };
    if spec.rescale {
        table.rescale()?;
    }
    Ok(table)
}

impl ExperimentTable {
    /// Divides every value column by the first row's oracle quantile, so
    /// the oracle column starts at 1.
    pub fn rescale(&mut self) -> Result<()> {
        let base = self.rows.first().map_or(0.0, |r| r.oracle_quantile);
        if !(base.abs() > 0.0 && base.is_finite()) {
            return Err(Error::invalid("cannot rescale by a zero oracle quantile"));
        }
        for r in &mut self.rows {
            r.oracle_quantile /= base;
            r.mean_bootstrap_estimate /= base;
            r.sd_bootstrap_estimate /= base;
            r.mean_extrapolated_estimate /= base;
            r.sd_extrapolated_estimate /= base;
        }
        Ok(())
    }

    /// Writes the table as CSV. Floats use Rust's shortest round-trip
    /// formatting, so identical tables give identical bytes.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.s.to_string(),
                r.oracle_quantile.to_string(),
                r.mean_bootstrap_estimate.to_string(),
                r.sd_bootstrap_estimate.to_string(),
                r.mean_extrapolated_estimate.to_string(),
                r.sd_extrapolated_estimate.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

/// Outcome of choosing `s1` from a pilot run at `s0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectReport {
    pub s0: usize,
    pub estimate: f64,
    pub tol: f64,
    pub s1: usize,
    /// The estimate extrapolated to `s1`; at most `tol` up to rounding.
    pub predicted: f64,
}

impl fmt::Display for SelectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "s0 = {}", self.s0)?;
        writeln!(f, "estimate at s0 = {}", self.estimate)?;
        writeln!(f, "tolerance = {}", self.tol)?;
        writeln!(f, "recommended s1 = {}", self.s1)?;
        write!(f, "predicted error at s1 = {}", self.predicted)
    }
}

/// Bootstraps one pilot feature map of size `s0` and recommends the
/// smallest `s1` whose extrapolated error is within `tol`.
pub fn run_select(spec: &ExperimentSpec, tol: f64) -> Result<SelectReport> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if spec.s0 == 0 || !(spec.alpha > 0.0 && spec.alpha < 1.0) || spec.n_boot == 0 {
        return Err(Error::invalid("select needs s0 >= 1, alpha in (0, 1) and n-boot >= 1"));
    }
    let target = build_target(spec)?;
    let settings = spec.settings(&target);
    let prepared = PreparedTarget::new(target, spec.kernel)?;
    let pilot = run_trials(&prepared, spec.s0, 1, spec.seed, &settings)?;
    report_from_estimate(pilot.estimates[0], spec.s0, tol)
}

/// The recommendation for a given pilot estimate.
pub fn report_from_estimate(estimate: f64, s0: usize, tol: f64) -> Result<SelectReport> {
    let s1 = select_feature_count(estimate, s0, tol)?;
    Ok(SelectReport {
        s0,
        estimate,
        tol,
        s1,
        predicted: extrapolate(estimate, s0, s1),
    })
}
