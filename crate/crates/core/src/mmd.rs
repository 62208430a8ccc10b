//! Unbiased MMD² two-sample statistic with exact and random-feature
//! kernels.
//!
//! With random features the statistic reduces to column means
//! `z̄ₓ = (1/n) Σⱼ z(xⱼ)` and column sums of squares, so it costs `O(ns)`
//! instead of `O(n²s)`. The bootstrap functional goes one step further:
//! resampling columns only permutes and repeats per-column summaries, so
//! each iteration is `O(s)`.

use nalgebra::{DMatrix, DVector};

use crate::bootstrap::{ErrorFunctional, Resample};
use crate::error::{check_dim, Error, Result};
use crate::features::{cross_kernel_matrix, exact_kernel_matrix, FeatureMap};
use crate::kernels::Kernel;
use crate::rng::StreamRng;

/// Two equally sized samples in the same dimension.
#[derive(Debug, Clone)]
pub struct MmdProblem {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl MmdProblem {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        check_dim(x.nrows(), y.nrows())?;
        check_dim(x.ncols(), y.ncols())?;
        if x.nrows() < 2 {
            return Err(Error::invalid("MMD needs at least two points per sample"));
        }
        if x.ncols() == 0 {
            return Err(Error::invalid("MMD samples need dimension at least 1"));
        }
        Ok(MmdProblem { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// The same problem with the samples swapped.
    pub fn swapped(&self) -> Self {
        MmdProblem {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

fn off_diagonal_sum(m: &DMatrix<f64>) -> f64 {
    m.sum() - m.trace()
}

/// `T` assembled from the three Gram blocks of any kernel.
fn statistic_from_grams(kxx: &DMatrix<f64>, kxy: &DMatrix<f64>, kyy: &DMatrix<f64>) -> f64 {
    let n = kxx.nrows() as f64;
    let within = 1.0 / (n * (n - 1.0));
    within * off_diagonal_sum(kxx) - 2.0 / (n * n) * kxy.sum() + within * off_diagonal_sum(kyy)
}

/// Exact unbiased `MMD²` with kernel `k`.
pub fn mmd_exact(problem: &MmdProblem, kernel: &Kernel) -> f64 {
    statistic_from_grams(
        &exact_kernel_matrix(kernel, &problem.x),
        &cross_kernel_matrix(kernel, &problem.x, &problem.y),
        &exact_kernel_matrix(kernel, &problem.y),
    )
}

/// `T̃` by substituting `k̃` into every pairwise term (quadratic in `n`).
pub fn mmd_rff_quadratic(problem: &MmdProblem, map: &FeatureMap) -> Result<f64> {
    check_dim(problem.dim(), map.dim())?;
    let zx = map.feature_matrix(&problem.x)?.into_matrix();
    let zy = map.feature_matrix(&problem.y)?.into_matrix();
    Ok(statistic_from_grams(
        &(&zx * zx.transpose()),
        &(&zx * zy.transpose()),
        &(&zy * zy.transpose()),
    ))
}

/// Per-column summaries of one sample's feature matrix.
#[derive(Debug, Clone)]
struct ColumnStats {
    /// `(1/n) Σⱼ Zⱼᵢ`.
    means: DVector<f64>,
    /// `Σⱼ Zⱼᵢ²`.
    sum_squares: DVector<f64>,
}

impl ColumnStats {
    fn new(z: &DMatrix<f64>) -> Self {
        let n = z.nrows() as f64;
        ColumnStats {
            means: DVector::from_iterator(z.ncols(), z.column_iter().map(|c| c.sum() / n)),
            sum_squares: DVector::from_iterator(z.ncols(), z.column_iter().map(|c| c.norm_squared())),
        }
    }
}

/// Linear-time `T̃` from column summaries, with columns taken in `idx` order.
fn linear_statistic(n: usize, x: &ColumnStats, y: &ColumnStats, idx: &[usize]) -> f64 {
    let n = n as f64;
    let (mut xx, mut yy, mut xy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in idx {
        let (mx, my) = (x.means[i], y.means[i]);
        xx += mx * mx;
        yy += my * my;
        xy += mx * my;
        sx += x.sum_squares[i];
        sy += y.sum_squares[i];
    }
    let c = n * n / (n * n - n);
    c * (xx - sx / (n * n)) - 2.0 * xy + c * (yy - sy / (n * n))
}

/// `T̃` from mean embeddings `z̄ₓ`, `z̄ᵧ` in `O(ns)`.
pub fn mmd_rff_linear(problem: &MmdProblem, map: &FeatureMap) -> Result<f64> {
    check_dim(problem.dim(), map.dim())?;
    let x = ColumnStats::new(map.feature_matrix(&problem.x)?.as_matrix());
    let y = ColumnStats::new(map.feature_matrix(&problem.y)?.as_matrix());
    let all: Vec<usize> = (0..map.len()).collect();
    Ok(linear_statistic(problem.n(), &x, &y, &all))
}

/// Level-`α` acceptance threshold `4/√(−m·ln α)` for the large-sample
/// statistic with kernel bound `K = 1`; the null is accepted when the
/// statistic falls below it.
pub fn acceptance_threshold(m: usize, alpha: f64) -> Result<f64> {
    if m == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("threshold needs m >= 1 and alpha in (0, 1)"));
    }
    Ok(4.0 / (-(m as f64) * alpha.ln()).sqrt())
}

/// Bootstrap functional `T̃* − T̃`. Both samples are resampled with the same
/// index vector, which is the only way to evaluate it.
#[derive(Debug, Clone)]
pub struct MmdFunctional {
    n: usize,
    x: ColumnStats,
    y: ColumnStats,
    baseline: f64,
}

impl MmdFunctional {
    pub fn new(problem: &MmdProblem, map: &FeatureMap) -> Result<Self> {
        check_dim(problem.dim(), map.dim())?;
        let x = ColumnStats::new(map.feature_matrix(&problem.x)?.as_matrix());
        let y = ColumnStats::new(map.feature_matrix(&problem.y)?.as_matrix());
        let all: Vec<usize> = (0..map.len()).collect();
        let baseline = linear_statistic(problem.n(), &x, &y, &all);
        Ok(MmdFunctional {
            n: problem.n(),
            x,
            y,
            baseline,
        })
    }

    /// `T̃` for the original features.
    pub fn statistic(&self) -> f64 {
        self.baseline
    }

    /// `T̃*` for the resampled features.
    pub fn resampled_statistic(&self, resample: &Resample) -> Result<f64> {
        check_dim(self.x.means.len(), resample.len())?;
        Ok(linear_statistic(self.n, &self.x, &self.y, resample.indices()))
    }
}

impl ErrorFunctional for MmdFunctional {
    fn width(&self) -> usize {
        self.x.means.len()
    }

    fn evaluate(&self, resample: &Resample, _rng: &mut StreamRng) -> Result<f64> {
        Ok(self.resampled_statistic(resample)? - self.baseline)
    }
}
