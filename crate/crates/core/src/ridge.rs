//! Kernel ridge regression with exact and random-feature kernels, and the
//! test-MSE functional `ψ`.
//!
//! RFF ridge regression fits `β̃` from `(ZᵀZ + λI)β̃ = Zᵀy` and predicts
//! `f(x') = z(x')ᵀβ̃`, where `z(x') = (Z₁(x'), …, Z_s(x')) / √s` uses the
//! same `1/√s` normalisation as the rows of `Z`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::bootstrap::{ErrorFunctional, Resample};
use crate::errnorms::qr_r_factor;
use crate::error::{check_dim, Error, Result};
use crate::features::{cross_kernel_matrix, exact_kernel_matrix, FeatureMap, FeatureMatrix};
use crate::kernels::Kernel;
use crate::rng::StreamRng;

/// Training and test data plus the ridge parameter `λ`.
#[derive(Debug, Clone)]
pub struct RidgeProblem {
    pub x_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub x_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
    pub lambda: f64,
}

impl RidgeProblem {
    pub fn new(
        x_train: DMatrix<f64>,
        y_train: DVector<f64>,
        x_test: DMatrix<f64>,
        y_test: DVector<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if x_train.nrows() == 0 || x_test.nrows() == 0 {
            return Err(Error::invalid("ridge problem needs training and test points"));
        }
        check_dim(x_train.nrows(), y_train.len())?;
        check_dim(x_test.nrows(), y_test.len())?;
        check_dim(x_train.ncols(), x_test.ncols())?;
        Ok(RidgeProblem {
            x_train,
            y_train,
            x_test,
            y_test,
            lambda,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    /// Mean squared error of `predictions` against `y_test`.
    pub fn test_mse(&self, predictions: &DVector<f64>) -> f64 {
        (&self.y_test - predictions).norm_squared() / self.y_test.len() as f64
    }
}

fn spd_solve(mut a: DMatrix<f64>, lambda: f64, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    if a.iter().any(|v| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver("non-finite system".into()));
    }
    let chol: Cholesky<f64, Dyn> =
        Cholesky::new(a).ok_or_else(|| Error::Solver("matrix is not positive definite".into()))?;
    Ok(chol.solve(rhs))
}

/// `β` solving `(K + λI)β = y` on the training points.
pub fn fit_exact(problem: &RidgeProblem, kernel: &Kernel) -> Result<DVector<f64>> {
    let k = exact_kernel_matrix(kernel, &problem.x_train);
    spd_solve(k, problem.lambda, &problem.y_train)
}

/// Test MSE of the exact kernel ridge regressor `f(·) = Σ βᵢ k(xᵢ, ·)`.
pub fn psi_exact(problem: &RidgeProblem, kernel: &Kernel) -> Result<f64> {
    let beta = fit_exact(problem, kernel)?;
    let cross = cross_kernel_matrix(kernel, &problem.x_test, &problem.x_train);
    Ok(problem.test_mse(&(cross * beta)))
}

/// A fitted random-feature regressor.
#[derive(Debug, Clone)]
pub struct RffRidgeFit {
    pub beta: DVector<f64>,
    pub map: FeatureMap,
}

impl RffRidgeFit {
    pub fn predict(&self, points: &DMatrix<f64>) -> Result<DVector<f64>> {
        Ok(self.map.feature_matrix(points)?.as_matrix() * &self.beta)
    }
}

/// Solves `(ZᵀZ + λI)β̃ = Zᵀy` for the training feature matrix `z`.
pub fn fit_rff(problem: &RidgeProblem, z: &FeatureMatrix, map: &FeatureMap) -> Result<RffRidgeFit> {
    check_dim(problem.x_train.nrows(), z.nrows())?;
    check_dim(map.len(), z.ncols())?;
    check_dim(problem.dim(), map.dim())?;
    let zm = z.as_matrix();
    let beta = spd_solve(zm.tr_mul(zm), problem.lambda, &zm.tr_mul(&problem.y_train))?;
    Ok(RffRidgeFit {
        beta,
        map: map.clone(),
    })
}

/// Test MSE of a random-feature regressor.
pub fn psi_rff(fit: &RffRidgeFit, problem: &RidgeProblem) -> Result<f64> {
    check_dim(problem.dim(), fit.map.dim())?;
    Ok(problem.test_mse(&fit.predict(&problem.x_test)?))
}

/// Bootstrap functional `ψ(k̃*) − ψ(k̃)` using a one-time QR factor of `Z`.
///
/// With `Z = QR`, `Z(:, idx)ᵀZ(:, idx) = R(:, idx)ᵀR(:, idx)`, so each
/// iteration solves an `s × s` system without touching the `n` training
/// rows. `RᵀR` is formed once and each iteration gathers its `(idx, idx)`
/// entries. Test features are computed once and column-resampled.
#[derive(Debug, Clone)]
pub struct KrrFunctional {
    r: DMatrix<f64>,
    rtr: DMatrix<f64>,
    b: DVector<f64>,
    test_features: DMatrix<f64>,
    y_test: DVector<f64>,
    lambda: f64,
    baseline: f64,
}

impl KrrFunctional {
    pub fn new(problem: &RidgeProblem, z: &FeatureMatrix, map: &FeatureMap) -> Result<Self> {
        check_dim(problem.x_train.nrows(), z.nrows())?;
        check_dim(map.len(), z.ncols())?;
        let zm = z.as_matrix();
        let r = qr_r_factor(zm)?;
        let mut functional = KrrFunctional {
            rtr: r.tr_mul(&r),
            r,
            b: zm.tr_mul(&problem.y_train),
            test_features: map.feature_matrix(&problem.x_test)?.into_matrix(),
            y_test: problem.y_test.clone(),
            lambda: problem.lambda,
            baseline: 0.0,
        };
        functional.baseline = functional.psi_resampled(&Resample::identity(map.len()))?;
        Ok(functional)
    }

    /// Triangular factor of the training feature matrix.
    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// `ψ(k̃)` for the original (unresampled) features.
    pub fn psi_tilde(&self) -> f64 {
        self.baseline
    }

    /// `ψ(k̃*)` for the resampled feature set.
    pub fn psi_resampled(&self, resample: &Resample) -> Result<f64> {
        check_dim(self.r.ncols(), resample.len())?;
        let idx = resample.indices();
        let gram = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.rtr[(idx[a], idx[b])]);
        let b_sel = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.b[i]));
        let beta = spd_solve(gram, self.lambda, &b_sel)?;
        let predictions = self.test_features.select_columns(idx) * beta;
        Ok((&self.y_test - predictions).norm_squared() / self.y_test.len() as f64)
    }
}

impl ErrorFunctional for KrrFunctional {
    fn width(&self) -> usize {
        self.r.ncols()
    }

    fn evaluate(&self, resample: &Resample, _rng: &mut StreamRng) -> Result<f64> {
        Ok(self.psi_resampled(resample)? - self.baseline)
    }
}
