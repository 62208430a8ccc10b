//! `rffboot`: runs random-feature error-estimation experiments and writes
//! CSV tables.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rffboot::experiment::{run_experiment, run_select, DatasetSpec, ExperimentSpec, Task};
use rffboot::oracle::OpPath;
use rffboot::{ErrorMode, Execution, Kernel, KernelFamily};

#[derive(Parser)]
#[command(name = "rffboot", version, about = "Bootstrap error estimates for random Fourier features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Oracle quantiles, bootstrap estimates and extrapolations over an s-grid, as CSV.
    Run(Common),
    /// Recommend a feature count s1 from a pilot bootstrap at s0.
    Select {
        #[command(flatten)]
        common: Common,
        /// Target error for the recommended feature count.
        #[arg(long)]
        tol: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Absolute,
    Signed,
}

#[derive(Clone, Copy, ValueEnum)]
enum OpPathArg {
    Power,
    Qr,
}

#[derive(Args)]
struct Common {
    /// matrix-linf, matrix-op, krr or mmd.
    #[arg(long)]
    task: Task,
    /// Dataset as name[:key=value,...]: swiss-roll:n=300, lorenz:n=300,dt=0.01,burn-in=1000,
    /// gaussian-pair:n=2000,d=10,var1=0.1,var2=0.1933, friedman:n=2000,test=500,d=10,noise=1,
    /// csv:path=FILE,header=false,rows=R,cols=C,test=T.
    #[arg(long)]
    dataset: DatasetSpec,
    /// gaussian, laplacian or cauchy.
    #[arg(long, default_value = "gaussian")]
    kernel: KernelFamily,
    /// Kernel bandwidth (σ for gaussian, γ for laplacian and cauchy).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Comma-separated, strictly increasing feature counts.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    s_grid: Vec<usize>,
    /// Extrapolation base; defaults to the smallest grid value.
    #[arg(long)]
    s0: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Bootstrap iterations N.
    #[arg(long, default_value_t = 50)]
    n_boot: usize,
    /// Monte Carlo trials per grid point.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Ridge parameter (krr).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Take square roots of regression labels (krr).
    #[arg(long)]
    sqrt_y: bool,
    /// Divide value columns by the oracle quantile at the smallest s.
    #[arg(long)]
    rescale: bool,
    /// Pseudo-error sign handling; defaults to signed for krr, absolute otherwise.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Operator-norm route (matrix-op).
    #[arg(long, default_value = "power")]
    op_path: OpPathArg,
}

impl Common {
    fn spec(&self) -> rffboot::Result<ExperimentSpec> {
        let kernel = Kernel::new(self.kernel, self.scale)?;
        let mut spec = ExperimentSpec::new(self.task, self.dataset.clone(), kernel);
        spec.s_grid = self.s_grid.clone();
        spec.s0 = self.s0.or(self.s_grid.first().copied()).unwrap_or(0);
        spec.alpha = self.alpha;
        spec.n_boot = self.n_boot;
        spec.trials = self.trials;
        spec.seed = self.seed;
        spec.lambda = self.lambda;
        spec.sqrt_y = self.sqrt_y;
        spec.rescale = self.rescale;
        spec.mode = self.mode.map(|m| match m {
            ModeArg::Absolute => ErrorMode::Absolute,
            ModeArg::Signed => ErrorMode::Signed,
        });
        spec.op_path = match self.op_path {
            OpPathArg::Power => OpPath::Power(None),
            OpPathArg::Qr => OpPath::Qr,
        };
        spec.execution = Execution::Parallel;
        Ok(spec)
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<rffboot::Error> for Failure {
    fn from(e: rffboot::Error) -> Self {
        match e {
            rffboot::Error::InvalidInput(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn write_output(out: &Option<PathBuf>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    let result = match out {
        Some(path) => File::create(path)
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                body(&mut w)?;
                w.flush()
            })
            .map_err(|e| format!("{}: {e}", path.display())),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).and_then(|_| w.flush()).map_err(|e| format!("stdout: {e}"))
        }
    };
    result.map_err(Failure::Runtime)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(common) => {
            let spec = common.spec()?;
            let table = run_experiment(&spec)?;
            for r in &table.rows {
                eprintln!("s = {}: coverage {:.3} over {} trials", r.s, r.coverage, spec.trials);
            }
            write_output(&common.out, |w| table.write_csv(w))
        }
        Command::Select { common, tol } => {
            let spec = common.spec()?;
            let report = run_select(&spec, tol)?;
            write_output(&common.out, |w| writeln!(w, "{report}"))
        }
    }
}

fn workers(command: &Command) -> usize {
    match command {
        Command::Run(c) | Command::Select { common: c, .. } => c.workers,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers(&cli.command)).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
