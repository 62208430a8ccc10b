//! Column-resampling bootstrap for RFF error estimation.
//!
//! Given a feature matrix `Z` with `s` i.i.d. columns, each iteration draws
//! `s` column indices with replacement, forms `Z* = Z(:, idx)`, and records
//! a pseudo-error such as `‖Z*Z*ᵀ − ZZᵀ‖` or `ψ(k̃*) − ψ(k̃)`. The empirical
//! `(1 − α)`-quantile of the pseudo-errors estimates the `(1 − α)`-quantile
//! of the unknown error `‖K̃ − K‖` (or `ψ(k̃) − ψ(k)`).

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{stream, StreamRng};

/// Bootstrap iterations used when none are specified.
pub const DEFAULT_ITERATIONS: usize = 50;

/// A draw of `s` column indices with replacement from `0..s`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resample {
    indices: Vec<usize>,
    counts: Vec<u32>,
}

impl Resample {
    /// Uniform i.i.d. indices. `s` must be positive.
    pub fn draw<R: Rng + ?Sized>(s: usize, rng: &mut R) -> Self {
        assert!(s > 0, "cannot resample zero columns");
        let indices = (0..s).map(|_| rng.random_range(0..s)).collect();
        Self::from_valid(s, indices)
    }

    /// `(0, 1, …, s − 1)`: reproduces `Z` exactly.
    pub fn identity(s: usize) -> Self {
        Self::from_valid(s, (0..s).collect())
    }

    pub fn from_indices(s: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.len() != s || s == 0 {
            return Err(Error::invalid(format!(
                "resample of width {s} needs {s} indices, got {}",
                indices.len()
            )));
        }
        if let Some(bad) = indices.iter().find(|&&i| i >= s) {
            return Err(Error::invalid(format!("resample index {bad} out of range 0..{s}")));
        }
        Ok(Self::from_valid(s, indices))
    }

    fn from_valid(s: usize, indices: Vec<usize>) -> Self {
        let mut counts = vec![0u32; s];
        for &i in &indices {
            counts[i] += 1;
        }
        Resample { indices, counts }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// How many times each column was drawn.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }
}

/// Draws a bootstrap index vector of width `s`.
pub fn resample_indices<R: Rng + ?Sized>(s: usize, rng: &mut R) -> Result<Resample> {
    if s == 0 {
        return Err(Error::invalid("resample width must be positive"));
    }
    Ok(Resample::draw(s, rng))
}

/// Maps a column resample to one pseudo-error value.
///
/// Implementations hold read-only precomputed data (the feature matrix, a
/// QR factor, ...) and must return exactly `0.0` for
/// [`Resample::identity`]. Functional deltas are returned signed; the
/// configured [`ErrorMode`] decides whether to take the absolute value.
pub trait ErrorFunctional: Sync {
    /// Feature count `s` the functional was built for.
    fn width(&self) -> usize;

    /// `rng` is the iteration's private stream, already advanced past the
    /// resample draw; randomised evaluators (power iteration) use it.
    fn evaluate(&self, resample: &Resample, rng: &mut StreamRng) -> Result<f64>;
}

impl<T: ErrorFunctional + ?Sized> ErrorFunctional for &T {
    fn width(&self) -> usize {
        (**self).width()
    }

    fn evaluate(&self, resample: &Resample, rng: &mut StreamRng) -> Result<f64> {
        (**self).evaluate(resample, rng)
    }
}

impl<T: ErrorFunctional + ?Sized> ErrorFunctional for Box<T> {
    fn width(&self) -> usize {
        (**self).width()
    }

    fn evaluate(&self, resample: &Resample, rng: &mut StreamRng) -> Result<f64> {
        (**self).evaluate(resample, rng)
    }
}

/// Whether pseudo-errors keep their sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorMode {
    #[default]
    Absolute,
    Signed,
}

impl ErrorMode {
    pub fn apply(self, value: f64) -> f64 {
        match self {
            ErrorMode::Absolute => value.abs(),
            ErrorMode::Signed => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub mode: ErrorMode,
    pub execution: Execution,
}

impl BootstrapConfig {
    pub fn new(iterations: usize, alpha: f64, seed: u64) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::invalid("bootstrap needs at least one iteration"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(BootstrapConfig {
            iterations,
            alpha,
            seed,
            mode: ErrorMode::default(),
            execution: Execution::default(),
        })
    }

    pub fn with_mode(mut self, mode: ErrorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// One pseudo-error per iteration, in iteration order.
    pub pseudo_errors: Vec<f64>,
    /// Empirical `(1 − α)`-quantile of `pseudo_errors`.
    pub estimate: f64,
    pub s: usize,
    pub alpha: f64,
    pub iterations: usize,
}

impl BootstrapResult {
    /// The estimate carried to `s1` features by [`extrapolate`].
    pub fn extrapolate_to(&self, s1: usize) -> f64 {
        extrapolate(self.estimate, self.s, s1)
    }
}

/// Smallest `a` in `values` with `#{v ≤ a} / N ≥ level`.
pub fn empirical_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("quantile of an empty list"));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1], got {level}")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("quantile input contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut k = 0;
    while k < n {
        // last index of the run of ties at sorted[k]
        let mut end = k;
        while end + 1 < n && sorted[end + 1] == sorted[k] {
            end += 1;
        }
        if (end + 1) as f64 / n as f64 >= level {
            return Ok(sorted[k]);
        }
        k = end + 1;
    }
    Ok(sorted[n - 1])
}

/// Runs `config.iterations` resampling iterations of `functional`.
///
/// Iteration `j` draws from the stream `(config.seed, j)`, so the result is
/// identical for any execution mode or worker count.
pub fn run_bootstrap<F>(functional: &F, config: &BootstrapConfig) -> Result<BootstrapResult>
where
    F: ErrorFunctional + ?Sized,
{
    let s = functional.width();
    if s == 0 {
        return Err(Error::invalid("functional has zero width"));
    }
    let pseudo_errors = config.execution.try_map(config.iterations, |j| {
        let mut rng = stream(config.seed, &[j as u64]);
        let resample = Resample::draw(s, &mut rng);
        functional
            .evaluate(&resample, &mut rng)
            .map(|v| config.mode.apply(v))
            .map_err(|e| Error::Iteration {
                iteration: j,
                source: Box::new(e),
            })
    })?;
    let estimate = empirical_quantile(&pseudo_errors, 1.0 - config.alpha)?;
    Ok(BootstrapResult {
        pseudo_errors,
        estimate,
        s,
        alpha: config.alpha,
        iterations: config.iterations,
    })
}

/// `√(s0/s1)` times an estimate made at `s0` features.
///
/// # Panics
///
/// If `s0` or `s1` is zero.
pub fn extrapolate(estimate_at_s0: f64, s0: usize, s1: usize) -> f64 {
    assert!(s0 > 0 && s1 > 0, "feature counts must be positive");
    (s0 as f64 / s1 as f64).sqrt() * estimate_at_s0
}

/// Feature count `s1 = ⌈s0·(ε̃(s0)/tol)²⌉` whose extrapolated error meets
/// `tol`, never less than `s0`.
pub fn select_feature_count(estimate_at_s0: f64, s0: usize, tol: f64) -> Result<usize> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    if !(estimate_at_s0 >= 0.0 && estimate_at_s0.is_finite()) {
        return Err(Error::invalid(format!(
            "estimate must be finite and nonnegative, got {estimate_at_s0}"
        )));
    }
    if s0 == 0 {
        return Err(Error::invalid("s0 must be positive"));
    }
    if estimate_at_s0 <= tol {
        return Ok(s0);
    }
    let ratio = estimate_at_s0 / tol;
    let target = s0 as f64 * ratio * ratio;
    // snap values that only miss an integer by rounding noise
    let nearest = target.round();
    let s1 = if (target - nearest).abs() <= 1e-9 * target {
        nearest
    } else {
        target.ceil()
    };
    Ok((s1 as usize).max(s0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    struct Constant(usize, f64);

    impl ErrorFunctional for Constant {
        fn width(&self) -> usize {
            self.0
        }

        fn evaluate(&self, _: &Resample, _: &mut StreamRng) -> Result<f64> {
            Ok(self.1)
        }
    }

    /// Pseudo-error: signed count of column 0 minus one, plus noise from the
    /// iteration stream to exercise randomised evaluators.
    struct Probe(usize);

    impl ErrorFunctional for Probe {
        fn width(&self) -> usize {
            self.0
        }

        fn evaluate(&self, r: &Resample, rng: &mut StreamRng) -> Result<f64> {
            Ok(r.counts()[0] as f64 - 1.0 + rng.random::<f64>())
        }
    }

    struct FailsAt(usize);

    impl ErrorFunctional for FailsAt {
        fn width(&self) -> usize {
            3
        }

        fn evaluate(&self, r: &Resample, _: &mut StreamRng) -> Result<f64> {
            if r.indices() == [0, 0, 0] {
                Err(Error::Solver(format!("{}", self.0)))
            } else {
                Ok(0.0)
            }
        }
    }

    #[test]
    fn quantile_definition() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(empirical_quantile(&v, 0.9).unwrap(), 9.0);
        assert_eq!(empirical_quantile(&v, 0.91).unwrap(), 10.0);
        assert_eq!(empirical_quantile(&v, 0.05).unwrap(), 1.0);
        assert_eq!(empirical_quantile(&[2.5; 7], 0.3).unwrap(), 2.5);
        assert_eq!(empirical_quantile(&[3.0, 1.0, 1.0, 2.0], 0.5).unwrap(), 1.0);
        assert!(empirical_quantile(&[], 0.5).is_err());
        assert!(empirical_quantile(&[1.0], 0.0).is_err());
        assert!(empirical_quantile(&[f64::NAN], 0.5).is_err());
    }

    /// Brute-force scan over every candidate in the list.
    fn brute_quantile(values: &[f64], level: f64) -> f64 {
        let n = values.len() as f64;
        values
            .iter()
            .copied()
            .filter(|&a| values.iter().filter(|&&v| v <= a).count() as f64 / n >= level)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn quantile_matches_brute_force_on_random_list() {
        let mut rng = stream(99, &[]);
        let v: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * 50.0).floor()).collect();
        for level in [0.95, 0.9, 0.5, 0.01, 1.0] {
            assert_eq!(empirical_quantile(&v, level).unwrap(), brute_quantile(&v, level));
        }
    }

    #[test]
    fn resample_basics() {
        let mut rng = stream(1, &[]);
        assert_eq!(resample_indices(1, &mut rng).unwrap().indices(), &[0]);
        assert!(resample_indices(0, &mut rng).is_err());
        let a = resample_indices(20, &mut stream(5, &[])).unwrap();
        let b = resample_indices(20, &mut stream(5, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.counts().iter().sum::<u32>(), 20);
        assert!(Resample::from_indices(3, vec![0, 3, 1]).is_err());
        assert!(Resample::from_indices(3, vec![0, 1]).is_err());
    }

    /// Multinomial check: each position is uniform on 0..5.
    #[test]
    fn resample_positions_are_uniform() {
        let s = 5;
        let draws = 100_000;
        let mut rng = stream(6, &[]);
        let mut freq = vec![vec![0usize; s]; s];
        for _ in 0..draws {
            let r = Resample::draw(s, &mut rng);
            for (pos, &i) in r.indices().iter().enumerate() {
                freq[pos][i] += 1;
            }
        }
        let p = 1.0 / s as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for row in &freq {
            for &c in row {
                assert!((c as f64 / draws as f64 - p).abs() <= 4.0 * se);
            }
        }
    }

    #[test]
    fn zero_functional_gives_zero_estimate() {
        let cfg = BootstrapConfig::new(40, 0.1, 3).unwrap();
        let r = run_bootstrap(&Constant(7, 0.0), &cfg).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.pseudo_errors.len(), 40);
        assert_eq!(r.s, 7);
    }

    #[test]
    fn deterministic_across_execution_modes() {
        let base = BootstrapConfig::new(64, 0.1, 42).unwrap().with_mode(ErrorMode::Signed);
        let seq = run_bootstrap(&Probe(9), &base.with_execution(Execution::Sequential)).unwrap();
        let par = run_bootstrap(&Probe(9), &base.with_execution(Execution::Parallel)).unwrap();
        assert_eq!(seq, par);
        assert!(seq.pseudo_errors.iter().any(|&v| v < 0.0));
        let abs = run_bootstrap(&Probe(9), &base.with_mode(ErrorMode::Absolute)).unwrap();
        assert!(abs.pseudo_errors.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn failures_carry_the_iteration() {
        let cfg = BootstrapConfig::new(500, 0.1, 0).unwrap();
        match run_bootstrap(&FailsAt(1), &cfg) {
            Err(Error::Iteration { source, .. }) => assert!(matches!(*source, Error::Solver(_))),
            other => panic!("expected iteration error, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(BootstrapConfig::new(0, 0.1, 0).is_err());
        assert!(BootstrapConfig::new(10, 0.0, 0).is_err());
        assert!(BootstrapConfig::new(10, 1.0, 0).is_err());
    }

    #[test]
    fn extrapolation_and_selection() {
        assert_eq!(extrapolate(0.37, 50, 50), 0.37);
        assert!((extrapolate(0.8, 50, 200) - 0.4).abs() < 1e-15);
        assert_eq!(select_feature_count(0.8, 50, 0.08).unwrap(), 5000);
        assert_eq!(select_feature_count(0.3, 100, 0.1).unwrap(), 900);
        assert_eq!(select_feature_count(0.05, 100, 0.1).unwrap(), 100);
        assert_eq!(select_feature_count(0.1, 100, 0.1).unwrap(), 100);
        assert!(select_feature_count(0.3, 100, 0.0).is_err());
        assert!(select_feature_count(-0.3, 100, 0.1).is_err());
    }

    proptest! {
        #[test]
        fn quantile_is_member_and_satisfies_definition(
            values in prop::collection::vec(-100.0f64..100.0, 1..60),
            alpha in 0.01f64..0.99,
        ) {
            let level = 1.0 - alpha;
            let q = empirical_quantile(&values, level).unwrap();
            prop_assert!(values.contains(&q));
            let n = values.len() as f64;
            prop_assert!(values.iter().filter(|&&v| v <= q).count() as f64 / n >= level);
            prop_assert_eq!(q, brute_quantile(&values, level));
        }

        #[test]
        fn selected_count_meets_tolerance(est in 0.0f64..5.0, s0 in 1usize..500, tol in 0.01f64..1.0) {
            let s1 = select_feature_count(est, s0, tol).unwrap();
            prop_assert!(s1 >= s0);
            prop_assert!(extrapolate(est, s0, s1) <= tol * (1.0 + 1e-8));
        }
    }
}
