//! Error functionals for `K̃ − K` and their bootstrap counterparts.
//!
//! A column resample `Z* = Z(:, idx)` satisfies
//! `Z*Z*ᵀ − ZZᵀ = Σᵢ (cᵢ − 1) zᵢzᵢᵀ = Z·diag(c − 1)·Zᵀ`, where `cᵢ` counts
//! how often column `i` was drawn. All bootstrap paths below work with that
//! weighted form, which skips columns drawn exactly once and is exactly
//! zero for the identity resample.

mod power;
mod qr;

use nalgebra::DMatrix;

pub use power::{opnorm_diff_powermethod, power_opnorm, PowerEstimate, PowerOptions};
pub use qr::{qr_factor, qr_r_factor, QrFactor};

use crate::bootstrap::{ErrorFunctional, Resample};
use crate::error::{check_dim, Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::StreamRng;

/// `‖A − B‖∞ = max |Aⱼⱼ' − Bⱼⱼ'|`.
pub fn linf_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs())))
}

/// Operator norm of a symmetric matrix from its dense eigenvalues.
pub fn symmetric_opnorm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().symmetric_eigenvalues().amax()
}

/// `‖A − B‖op` for symmetric `A`, `B` via a dense eigensolver.
pub fn opnorm_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::invalid("operator-norm error needs equal square shapes"));
    }
    Ok(symmetric_opnorm(&(a - b)))
}

/// `‖Z(:, idx)Z(:, idx)ᵀ − ZZᵀ‖op` computed from the `s × s` factor `R` of
/// a thin QR of `Z`. Unitary invariance makes this equal to the `n × n`
/// quantity.
pub fn opnorm_diff_qr(r: &DMatrix<f64>, resample: &Resample) -> Result<f64> {
    check_dim(r.ncols(), resample.len())?;
    let (cols, weights) = active_columns(resample);
    if cols.is_empty() {
        return Ok(0.0);
    }
    let b = r.select_columns(&cols);
    let mut a = b.clone();
    for (mut col, w) in a.column_iter_mut().zip(&weights) {
        col *= *w;
    }
    Ok(symmetric_opnorm(&(a * b.transpose())))
}

/// Columns with a nonzero weight `cᵢ − 1`, and those weights.
pub(crate) fn active_columns(resample: &Resample) -> (Vec<usize>, Vec<f64>) {
    resample
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 1)
        .map(|(i, &c)| (i, c as f64 - 1.0))
        .unzip()
}

const ROW_BLOCK: usize = 64;

/// `max |(Z·diag(w)·Zᵀ)ⱼⱼ'|` restricted to the given columns, exploiting
/// symmetry by only forming row blocks of the upper triangle.
fn weighted_gram_linf(z: &DMatrix<f64>, cols: &[usize], weights: &[f64]) -> f64 {
    if cols.is_empty() {
        return 0.0;
    }
    let n = z.nrows();
    let mut a = z.select_columns(cols);
    let bt = a.transpose();
    for (mut col, w) in a.column_iter_mut().zip(weights) {
        col *= *w;
    }
    let mut block = DMatrix::zeros(ROW_BLOCK.min(n), n);
    let mut best = 0.0f64;
    for r0 in (0..n).step_by(ROW_BLOCK) {
        let h = ROW_BLOCK.min(n - r0);
        let w = n - r0;
        let mut c = block.view_mut((0, 0), (h, w));
        c.gemm(1.0, &a.rows(r0, h), &bt.columns(r0, w), 0.0);
        best = c.iter().fold(best, |m, v| m.max(v.abs()));
    }
    best
}

/// Bootstrap functional `‖Z*Z*ᵀ − ZZᵀ‖∞`.
#[derive(Debug, Clone)]
pub struct LinfFunctional {
    z: DMatrix<f64>,
}

impl LinfFunctional {
    pub fn new(z: FeatureMatrix) -> Self {
        LinfFunctional { z: z.into_matrix() }
    }
}

impl ErrorFunctional for LinfFunctional {
    fn width(&self) -> usize {
        self.z.ncols()
    }

    fn evaluate(&self, resample: &Resample, _rng: &mut StreamRng) -> Result<f64> {
        check_dim(self.width(), resample.len())?;
        let (cols, weights) = active_columns(resample);
        Ok(weighted_gram_linf(&self.z, &cols, &weights))
    }
}

/// Bootstrap functional `‖Z*Z*ᵀ − ZZᵀ‖op` by matrix-free power iteration
/// on `n`-vectors.
#[derive(Debug, Clone)]
pub struct PowerOpFunctional {
    z: DMatrix<f64>,
    options: PowerOptions,
}

impl PowerOpFunctional {
    /// Uses [`PowerOptions::for_dim`] of the row count.
    pub fn new(z: FeatureMatrix) -> Self {
        let options = PowerOptions::for_dim(z.nrows());
        Self::with_options(z, options)
    }

    pub fn with_options(z: FeatureMatrix, options: PowerOptions) -> Self {
        PowerOpFunctional {
            z: z.into_matrix(),
            options,
        }
    }
}

impl ErrorFunctional for PowerOpFunctional {
    fn width(&self) -> usize {
        self.z.ncols()
    }

    fn evaluate(&self, resample: &Resample, rng: &mut StreamRng) -> Result<f64> {
        check_dim(self.width(), resample.len())?;
        let (cols, weights) = active_columns(resample);
        if cols.is_empty() {
            return Ok(0.0);
        }
        let b = self.z.select_columns(&cols);
        let weights = nalgebra::DVector::from_vec(weights);
        let mut t = nalgebra::DVector::zeros(cols.len());
        let estimate = power_opnorm(
            self.z.nrows(),
            |v, out| {
                t.gemv_tr(1.0, &b, v, 0.0);
                t.component_mul_assign(&weights);
                out.gemv(1.0, &b, &t, 0.0);
            },
            &self.options,
            rng,
        );
        Ok(estimate.norm)
    }
}

/// Bootstrap functional `‖R(:, idx)R(:, idx)ᵀ − RRᵀ‖op` on the QR factor.
#[derive(Debug, Clone)]
pub struct QrOpFunctional {
    r: DMatrix<f64>,
}

impl QrOpFunctional {
    /// Factors `Z` once; needs `n ≥ s`.
    pub fn new(z: &FeatureMatrix) -> Result<Self> {
        Ok(QrOpFunctional {
            r: qr_r_factor(z.as_matrix())?,
        })
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

impl ErrorFunctional for QrOpFunctional {
    fn width(&self) -> usize {
        self.r.ncols()
    }

    fn evaluate(&self, resample: &Resample, _rng: &mut StreamRng) -> Result<f64> {
        opnorm_diff_qr(&self.r, resample)
    }
}
