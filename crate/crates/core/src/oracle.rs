//! Monte Carlo ground truth for error quantiles, and coverage checks of
//! bootstrap estimates against it.
//!
//! Each trial draws an independent feature map, so the true error of that
//! map can be computed against exactly evaluated quantities (`K`, `ψ(k)` or
//! `T`) that are prepared once per instance.

use nalgebra::DMatrix;

use crate::bootstrap::{empirical_quantile, run_bootstrap, BootstrapConfig, ErrorFunctional, ErrorMode};
use crate::errnorms::{linf_error, opnorm_error, LinfFunctional, PowerOpFunctional, PowerOptions, QrOpFunctional};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{exact_kernel_matrix, FeatureMap, FeatureMatrix};
use crate::kernels::Kernel;
use crate::mmd::{mmd_exact, MmdFunctional, MmdProblem};
use crate::ridge::{psi_exact, KrrFunctional, RidgeProblem};
use crate::rng::{derive_seed, stream, TAG_BOOTSTRAP, TAG_FEATURES};

/// Minimum number of Monte Carlo trials.
pub const MIN_TRIALS: usize = 30;
/// Default number of Monte Carlo trials.
pub const DEFAULT_TRIALS: usize = 300;

/// How the bootstrap evaluates operator-norm pseudo-errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpPath {
    /// Matrix-free power iteration; `None` picks [`PowerOptions::for_dim`].
    Power(Option<PowerOptions>),
    /// Thin-QR reduction to an `s × s` eigenproblem.
    Qr,
}

/// The quantity whose approximation error is studied.
#[derive(Debug, Clone)]
pub enum ErrorTarget {
    /// `‖K̃ − K‖∞` on the rows of `points`.
    MatrixLinf { points: DMatrix<f64> },
    /// `‖K̃ − K‖op` on the rows of `points`.
    MatrixOp { points: DMatrix<f64>, path: OpPath },
    /// `ψ(k̃) − ψ(k)` for ridge-regression test MSE.
    Krr { problem: RidgeProblem },
    /// `T̃ − T` for the MMD statistic.
    Mmd { problem: MmdProblem },
}

impl ErrorTarget {
    fn dim(&self) -> usize {
        match self {
            ErrorTarget::MatrixLinf { points } | ErrorTarget::MatrixOp { points, .. } => points.ncols(),
            ErrorTarget::Krr { problem } => problem.dim(),
            ErrorTarget::Mmd { problem } => problem.dim(),
        }
    }

    /// Absolute for matrix norms and MMD, signed for regression MSE.
    pub fn default_mode(&self) -> ErrorMode {
        match self {
            ErrorTarget::Krr { .. } => ErrorMode::Signed,
            _ => ErrorMode::Absolute,
        }
    }
}

#[derive(Debug, Clone)]
enum Exact {
    Matrix(DMatrix<f64>),
    Scalar(f64),
}

/// An error target with its exact reference quantity computed.
#[derive(Debug, Clone)]
pub struct PreparedTarget {
    target: ErrorTarget,
    kernel: Kernel,
    exact: Exact,
}

/// One feature map's true error and its bootstrap functional.
pub struct Realization {
    /// Signed for functionals; always nonnegative for matrix norms.
    pub true_error: f64,
    pub functional: Box<dyn ErrorFunctional>,
}

impl PreparedTarget {
    pub fn new(target: ErrorTarget, kernel: Kernel) -> Result<Self> {
        let exact = match &target {
            ErrorTarget::MatrixLinf { points } | ErrorTarget::MatrixOp { points, .. } => {
                if points.nrows() == 0 || points.ncols() == 0 {
                    return Err(Error::invalid("error target needs at least one point"));
                }
                Exact::Matrix(exact_kernel_matrix(&kernel, points))
            }
            ErrorTarget::Krr { problem } => Exact::Scalar(psi_exact(problem, &kernel)?),
            ErrorTarget::Mmd { problem } => Exact::Scalar(mmd_exact(problem, &kernel)),
        };
        Ok(PreparedTarget { target, kernel, exact })
    }

    pub fn target(&self) -> &ErrorTarget {
        &self.target
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// `ψ(k)` or `T`; `None` for matrix targets.
    pub fn exact_value(&self) -> Option<f64> {
        match self.exact {
            Exact::Scalar(v) => Some(v),
            Exact::Matrix(_) => None,
        }
    }

    pub fn sample_map(&self, s: usize, rng: &mut crate::rng::StreamRng) -> Result<FeatureMap> {
        FeatureMap::sample(&self.kernel, self.target.dim(), s, rng)
    }

    /// True error of `map` and the bootstrap functional built from it.
    pub fn realize(&self, map: &FeatureMap) -> Result<Realization> {
        match (&self.target, &self.exact) {
            (ErrorTarget::MatrixLinf { points }, Exact::Matrix(k)) => {
                let z = map.feature_matrix(points)?;
                let true_error = linf_error(&z.gram(), k)?;
                Ok(Realization {
                    true_error,
                    functional: Box::new(LinfFunctional::new(z)),
                })
            }
            (ErrorTarget::MatrixOp { points, path }, Exact::Matrix(k)) => {
                let z = map.feature_matrix(points)?;
                let true_error = opnorm_error(&z.gram(), k)?;
                let functional: Box<dyn ErrorFunctional> = match path {
                    OpPath::Power(None) => Box::new(PowerOpFunctional::new(z)),
                    OpPath::Power(Some(options)) => Box::new(PowerOpFunctional::with_options(z, *options)),
                    OpPath::Qr => Box::new(QrOpFunctional::new(&z)?),
                };
                Ok(Realization { true_error, functional })
            }
            (ErrorTarget::Krr { problem }, Exact::Scalar(psi)) => {
                let z = map.feature_matrix(&problem.x_train)?;
                let functional = KrrFunctional::new(problem, &z, map)?;
                Ok(Realization {
                    true_error: functional.psi_tilde() - psi,
                    functional: Box::new(functional),
                })
            }
            (ErrorTarget::Mmd { problem }, Exact::Scalar(t)) => {
                let functional = MmdFunctional::new(problem, map)?;
                Ok(Realization {
                    true_error: functional.statistic() - t,
                    functional: Box::new(functional),
                })
            }
            _ => unreachable!("exact quantity always matches the target kind"),
        }
    }

    /// True error of `map` alone.
    pub fn true_error(&self, map: &FeatureMap) -> Result<f64> {
        match (&self.target, &self.exact) {
            (ErrorTarget::MatrixLinf { points }, Exact::Matrix(k)) => linf_error(&gram_of(map, points)?, k),
            (ErrorTarget::MatrixOp { points, .. }, Exact::Matrix(k)) => opnorm_error(&gram_of(map, points)?, k),
            _ => Ok(self.realize(map)?.true_error),
        }
    }
}

fn gram_of(map: &FeatureMap, points: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(FeatureMatrix::gram(&map.feature_matrix(points)?))
}

/// Stream for the feature map of trial `t` at `s` features.
fn trial_stream(seed: u64, s: usize, t: usize) -> crate::rng::StreamRng {
    stream(seed, &[TAG_FEATURES, s as u64, t as u64])
}

/// Bootstrap seed for trial `t` at `s` features.
pub fn trial_bootstrap_seed(seed: u64, s: usize, t: usize) -> u64 {
    derive_seed(seed, &[TAG_BOOTSTRAP, s as u64, t as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub trials: usize,
    /// One true error per trial (after the error mode), in trial order.
    pub error_samples: Vec<f64>,
    /// Empirical `(1 − α)`-quantile of `error_samples`.
    pub quantile: f64,
}

fn check_trials(trials: usize, alpha: f64, s: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::invalid(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if s == 0 {
        return Err(Error::invalid("feature count must be positive"));
    }
    Ok(())
}

/// Quantile of the true error over `trials` independent feature maps of
/// size `s`.
pub fn oracle_quantile(
    target: &PreparedTarget,
    s: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
    mode: ErrorMode,
    execution: Execution,
) -> Result<OracleResult> {
    check_trials(trials, alpha, s)?;
    let error_samples = execution.try_map(trials, |t| {
        let map = target.sample_map(s, &mut trial_stream(seed, s, t))?;
        Ok::<_, Error>(mode.apply(target.true_error(&map)?))
    })?;
    let quantile = empirical_quantile(&error_samples, 1.0 - alpha)?;
    Ok(OracleResult {
        trials,
        error_samples,
        quantile,
    })
}

/// Bootstrap settings for one trial of a Monte Carlo study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSettings {
    pub iterations: usize,
    pub alpha: f64,
    pub mode: ErrorMode,
    pub execution: Execution,
}

/// Per-trial true errors and bootstrap estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub true_errors: Vec<f64>,
    pub estimates: Vec<f64>,
}

impl TrialRecord {
    /// Fraction of trials with `true error ≤ estimate`.
    pub fn coverage(&self) -> f64 {
        let hits = self
            .true_errors
            .iter()
            .zip(&self.estimates)
            .filter(|(e, q)| e <= q)
            .count();
        hits as f64 / self.estimates.len() as f64
    }
}

/// Runs `trials` independent (feature map, bootstrap) pairs at `s`
/// features. Trial `t` uses the same feature map as trial `t` of
/// [`oracle_quantile`] with the same seed.
pub fn run_trials(
    target: &PreparedTarget,
    s: usize,
    trials: usize,
    seed: u64,
    settings: &TrialSettings,
) -> Result<TrialRecord> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    check_trials(MIN_TRIALS, settings.alpha, s)?;
    let inner = BootstrapConfig::new(settings.iterations, settings.alpha, 0)?
        .with_mode(settings.mode)
        .with_execution(Execution::Sequential);
    let pairs = settings.execution.try_map(trials, |t| {
        let map = target.sample_map(s, &mut trial_stream(seed, s, t))?;
        let realization = target.realize(&map)?;
        let config = BootstrapConfig {
            seed: trial_bootstrap_seed(seed, s, t),
            ..inner
        };
        let boot = run_bootstrap(&realization.functional, &config)?;
        Ok::<_, Error>((settings.mode.apply(realization.true_error), boot.estimate))
    })?;
    let (true_errors, estimates) = pairs.into_iter().unzip();
    Ok(TrialRecord { true_errors, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::gen_swiss_roll;

    fn swiss(n: usize) -> DMatrix<f64> {
        gen_swiss_roll(n, &mut stream(1, &[])).unwrap().points
    }

    fn linf_target(n: usize) -> PreparedTarget {
        PreparedTarget::new(ErrorTarget::MatrixLinf { points: swiss(n) }, Kernel::gaussian(1.0).unwrap()).unwrap()
    }

    #[test]
    fn coincident_points_and_bounds() {
        let points = DMatrix::from_element(10, 3, 0.25);
        let target = PreparedTarget::new(ErrorTarget::MatrixLinf { points }, Kernel::gaussian(1.0).unwrap()).unwrap();
        let res = oracle_quantile(&target, 20, 0.1, 40, 3, ErrorMode::Absolute, Execution::Sequential).unwrap();
        // K̃ⱼⱼ' = k̃(x, x) = (2/s) Σ cos²(·) everywhere, and K ≡ 1
        for (t, &e) in res.error_samples.iter().enumerate() {
            let map = target.sample_map(20, &mut trial_stream(3, 20, t)).unwrap();
            let x = [0.25; 3];
            let kxx = map.approx_kernel(&x, &x).unwrap();
            assert!((e - (kxx - 1.0).abs()).abs() < 1e-12);
        }
        assert!(res.quantile >= 0.0);

        let res = oracle_quantile(&linf_target(40), 5, 0.1, 60, 4, ErrorMode::Absolute, Execution::Sequential).unwrap();
        assert!(res.error_samples.iter().all(|&e| (0.0..=3.0).contains(&e)));
        assert_eq!(res.quantile, empirical_quantile(&res.error_samples, 0.9).unwrap());
    }

    #[test]
    fn validates_arguments() {
        let t = linf_target(10);
        assert!(oracle_quantile(&t, 5, 0.1, 29, 0, ErrorMode::Absolute, Execution::Sequential).is_err());
        assert!(oracle_quantile(&t, 0, 0.1, 30, 0, ErrorMode::Absolute, Execution::Sequential).is_err());
        assert!(oracle_quantile(&t, 5, 1.0, 30, 0, ErrorMode::Absolute, Execution::Sequential).is_err());
    }

    #[test]
    fn schedule_independent() {
        let t = linf_target(30);
        let a = oracle_quantile(&t, 10, 0.1, 40, 5, ErrorMode::Absolute, Execution::Sequential).unwrap();
        let b = oracle_quantile(&t, 10, 0.1, 40, 5, ErrorMode::Absolute, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let settings = |execution| TrialSettings {
            iterations: 20,
            alpha: 0.1,
            mode: ErrorMode::Absolute,
            execution,
        };
        let ra = run_trials(&t, 10, 5, 5, &settings(Execution::Sequential)).unwrap();
        let rb = run_trials(&t, 10, 5, 5, &settings(Execution::Parallel)).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(ra.true_errors, a.error_samples[..5]);
    }

    #[test]
    fn seed_stability() {
        let t = linf_target(100);
        let a = oracle_quantile(&t, 100, 0.1, 300, 10, ErrorMode::Absolute, Execution::Parallel).unwrap();
        let b = oracle_quantile(&t, 100, 0.1, 300, 11, ErrorMode::Absolute, Execution::Parallel).unwrap();
        assert!((a.quantile - b.quantile).abs() < 0.15 * a.quantile.max(b.quantile));
    }

    #[test]
    fn doubling_s_scales_by_inverse_root_two() {
        let t = linf_target(100);
        let a = oracle_quantile(&t, 100, 0.1, 300, 12, ErrorMode::Absolute, Execution::Parallel).unwrap();
        let b = oracle_quantile(&t, 200, 0.1, 300, 12, ErrorMode::Absolute, Execution::Parallel).unwrap();
        let ratio = b.quantile / a.quantile;
        assert!((0.63..=0.79).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn nonincreasing_over_grid() {
        let t = linf_target(60);
        let q: Vec<f64> = [25, 50, 100, 200]
            .iter()
            .map(|&s| oracle_quantile(&t, s, 0.1, 300, 13, ErrorMode::Absolute, Execution::Parallel).unwrap().quantile)
            .collect();
        for w in q.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{q:?}");
        }
    }

    #[test]
    fn functional_targets_are_signed() {
        use crate::datasets::gen_gaussian_pair;
        let (x, y) = gen_gaussian_pair(30, 2, 0.1, 0.2, &mut stream(14, &[])).unwrap();
        let problem = MmdProblem::new(x.points, y.points).unwrap();
        let kernel = Kernel::gaussian(1.0).unwrap();
        let t = PreparedTarget::new(ErrorTarget::Mmd { problem: problem.clone() }, kernel).unwrap();
        assert_eq!(t.exact_value(), Some(mmd_exact(&problem, &kernel)));
        let signed = oracle_quantile(&t, 10, 0.1, 50, 15, ErrorMode::Signed, Execution::Sequential).unwrap();
        assert!(signed.error_samples.iter().any(|&e| e < 0.0));
        let abs = oracle_quantile(&t, 10, 0.1, 50, 15, ErrorMode::Absolute, Execution::Sequential).unwrap();
        for (a, b) in abs.error_samples.iter().zip(&signed.error_samples) {
            assert_eq!(*a, b.abs());
        }
    }
}
