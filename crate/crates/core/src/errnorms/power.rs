use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Stopping rule for power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    /// Stop once the relative change of the eigenvalue estimate of `M²`
    /// drops below this.
    pub tol: f64,
    /// Each iteration applies `M` twice.
    pub max_iter: usize,
}

impl PowerOptions {
    /// `tol = 1e-4` and `⌈10·ln(n + 1)⌉` iterations.
    pub fn for_dim(n: usize) -> Self {
        PowerOptions {
            tol: 1e-4,
            max_iter: (10.0 * ((n + 1) as f64).ln()).ceil().max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Operator norm of the symmetric (possibly indefinite) operator `apply`
/// on `Rⁿ`.
///
/// Iterates on `M²`, whose dominant eigenvalue is `‖M‖op²` whatever the
/// signs of `M`'s extreme eigenvalues, and returns the square root of the
/// Rayleigh quotient `vᵀM²v = ‖Mv‖²`.
pub fn power_opnorm<F>(n: usize, mut apply: F, options: &PowerOptions, rng: &mut StreamRng) -> PowerEstimate
where
    F: FnMut(&DVector<f64>, &mut DVector<f64>),
{
    let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let norm = v.norm();
    if norm == 0.0 {
        return PowerEstimate {
            norm: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    v /= norm;
    let mut w = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let mut previous: Option<f64> = None;
    let mut lambda = 0.0;
    for it in 1..=options.max_iter {
        apply(&v, &mut w);
        lambda = w.norm_squared();
        if lambda == 0.0 {
            return PowerEstimate {
                norm: 0.0,
                iterations: it,
                converged: true,
            };
        }
        apply(&w, &mut u);
        v.copy_from(&u);
        v /= u.norm();
        if let Some(prev) = previous {
            if (lambda - prev).abs() <= options.tol * lambda {
                return PowerEstimate {
                    norm: lambda.sqrt(),
                    iterations: it,
                    converged: true,
                };
            }
        }
        previous = Some(lambda);
    }
    PowerEstimate {
        norm: lambda.sqrt(),
        iterations: options.max_iter,
        converged: false,
    }
}

/// `‖Z*Z*ᵀ − ZZᵀ‖op` from products `Z*[(Z*)ᵀv] − Z[Zᵀv]`; the `n × n`
/// difference is never formed.
pub fn opnorm_diff_powermethod(
    z_star: &DMatrix<f64>,
    z: &DMatrix<f64>,
    options: &PowerOptions,
    rng: &mut StreamRng,
) -> Result<PowerEstimate> {
    if z_star.shape() != z.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            z_star.shape(),
            z.shape()
        )));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::invalid("power-iteration tolerance must be positive"));
    }
    let s = z.ncols();
    let mut a = DVector::zeros(s);
    let mut b = DVector::zeros(s);
    let mut t = DVector::zeros(z.nrows());
    Ok(power_opnorm(
        z.nrows(),
        |v, out| {
            a.gemv_tr(1.0, z_star, v, 0.0);
            b.gemv_tr(1.0, z, v, 0.0);
            out.gemv(1.0, z_star, &a, 0.0);
            t.gemv(1.0, z, &b, 0.0);
            *out -= &t;
        },
        options,
        rng,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errnorms::symmetric_opnorm;
    use crate::rng::stream;
    use rand::Rng;

    #[test]
    fn default_iteration_budget_is_logarithmic() {
        assert_eq!(PowerOptions::for_dim(300).max_iter, 58);
        assert_eq!(PowerOptions::for_dim(0).max_iter, 1);
    }

    #[test]
    fn equal_inputs_give_zero() {
        let z = DMatrix::from_fn(10, 3, |i, j| (i * 3 + j) as f64);
        let p = opnorm_diff_powermethod(&z, &z, &PowerOptions::for_dim(10), &mut stream(0, &[])).unwrap();
        assert_eq!(p.norm, 0.0);
        assert!(opnorm_diff_powermethod(&z, &z, &PowerOptions { tol: 0.0, max_iter: 5 }, &mut stream(0, &[])).is_err());
    }

    #[test]
    fn rank_one_difference() {
        // Z = 0, Z* = [w] → M = wwᵀ, ‖M‖op = ‖w‖²
        let w = DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]);
        let z_star = DMatrix::from_column_slice(4, 1, w.as_slice());
        let z = DMatrix::zeros(4, 1);
        let opts = PowerOptions { tol: 1e-12, max_iter: 100 };
        let p = opnorm_diff_powermethod(&z_star, &z, &opts, &mut stream(2, &[])).unwrap();
        assert!((p.norm - w.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn opposite_sign_extremes() {
        // diag(3, −3, 1): power iteration on M alone oscillates
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -3.0, 1.0]));
        let opts = PowerOptions { tol: 1e-12, max_iter: 200 };
        let p = power_opnorm(3, |v, out| out.gemv(1.0, &m, v, 0.0), &opts, &mut stream(1, &[]));
        assert!(p.converged);
        assert!((p.norm - 3.0).abs() < 1e-10);
    }

    /// Dense symmetric eigensolver as the reference.
    #[test]
    fn matches_dense_eigensolver() {
        let mut rng = stream(17, &[]);
        let (n, s) = (100, 20);
        let z = DMatrix::from_fn(n, s, |_, _| rng.random_range(-0.3..0.3));
        let zs = z.select_columns(&(0..s).map(|_| rng.random_range(0..s)).collect::<Vec<_>>());
        let dense = symmetric_opnorm(&(&zs * zs.transpose() - &z * z.transpose()));
        let opts = PowerOptions { tol: 1e-4, max_iter: 1000 };
        let p = opnorm_diff_powermethod(&zs, &z, &opts, &mut rng).unwrap();
        assert!(((p.norm - dense) / dense).abs() <= 0.01, "{} vs {dense}", p.norm);
        assert!(p.norm <= dense * (1.0 + 1e-12));
    }
}
