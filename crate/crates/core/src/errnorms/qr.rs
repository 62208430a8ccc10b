use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin QR factorisation `Z = QR` with `Q` (`n × s`) orthonormal and `R`
/// (`s × s`) upper triangular.
#[derive(Debug, Clone)]
pub struct QrFactor {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Householder vectors stored below the diagonal of the working matrix.
struct Reflectors {
    work: DMatrix<f64>,
    /// `vᵢ` lives in `work[i.., i]` with `vᵢ[0] = 1` implied; `taus[i]` is
    /// `2/‖vᵢ‖²`, or zero for a skipped column.
    vectors: Vec<DVector<f64>>,
    taus: Vec<f64>,
}

fn householder(z: &DMatrix<f64>) -> Result<Reflectors> {
    let (n, s) = z.shape();
    if n < s {
        return Err(Error::invalid(format!("QR needs n >= s, got {n} x {s}")));
    }
    if s == 0 {
        return Err(Error::invalid("QR needs at least one column"));
    }
    let mut work = z.clone();
    let mut vectors = Vec::with_capacity(s);
    let mut taus = Vec::with_capacity(s);
    let mut scratch = DVector::zeros(s);
    for k in 0..s {
        let mut v = work.view((k, k), (n - k, 1)).column(0).clone_owned();
        let alpha = v.norm();
        if alpha == 0.0 {
            vectors.push(v);
            taus.push(0.0);
            continue;
        }
        let beta = if v[0] > 0.0 { -alpha } else { alpha };
        v[0] -= beta;
        let vv = v.norm_squared();
        let tau = 2.0 / vv;
        // A[k.., k..] -= tau v (vᵀ A[k.., k..])
        let mut block = work.view_mut((k, k), (n - k, s - k));
        let mut proj = scratch.rows_mut(0, s - k);
        proj.gemv_tr(1.0, &block, &v, 0.0);
        block.ger(-tau, &v, &proj, 1.0);
        work[(k, k)] = beta;
        for i in (k + 1)..n {
            work[(i, k)] = 0.0;
        }
        vectors.push(v);
        taus.push(tau);
    }
    Ok(Reflectors { work, vectors, taus })
}

/// Householder thin QR of `z`; needs `n ≥ s`.
pub fn qr_factor(z: &DMatrix<f64>) -> Result<QrFactor> {
    let (n, s) = z.shape();
    let refl = householder(z)?;
    let r = refl.work.view((0, 0), (s, s)).upper_triangle();
    let mut q = DMatrix::zeros(n, s);
    q.fill_with_identity();
    let mut scratch = DVector::zeros(s);
    for k in (0..s).rev() {
        let tau = refl.taus[k];
        if tau == 0.0 {
            continue;
        }
        let v = &refl.vectors[k];
        let mut block = q.view_mut((k, 0), (n - k, s));
        scratch.gemv_tr(1.0, &block, v, 0.0);
        block.ger(-tau, v, &scratch, 1.0);
    }
    Ok(QrFactor { q, r })
}

/// The `R` factor alone, skipping the cost of accumulating `Q`.
pub fn qr_r_factor(z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = z.ncols();
    let refl = householder(z)?;
    Ok(refl.work.view((0, 0), (s, s)).upper_triangle())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn check_invariants(z: &DMatrix<f64>, f: &QrFactor) {
        let s = z.ncols();
        let qtq = f.q.transpose() * &f.q;
        let ortho = (qtq - DMatrix::identity(s, s)).amax();
        assert!(ortho <= 1e-10, "QᵀQ − I = {ortho}");
        let recon = (&f.q * &f.r - z).amax();
        assert!(recon <= 1e-10 * z.amax().max(1.0), "QR − Z = {recon}");
        assert_eq!(f.r, f.r.upper_triangle());
    }

    #[test]
    fn random_reconstruction() {
        let mut rng = stream(4, &[]);
        let z = DMatrix::from_fn(50, 10, |_, _| rng.random_range(-1.0..1.0));
        let f = qr_factor(&z).unwrap();
        check_invariants(&z, &f);
        assert_eq!(qr_r_factor(&z).unwrap(), f.r);
    }

    #[test]
    fn orthonormal_columns_give_unit_diagonal() {
        let mut rng = stream(5, &[]);
        let a = DMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
        let q0 = qr_factor(&a).unwrap().q;
        let f = qr_factor(&q0).unwrap();
        check_invariants(&q0, &f);
        for i in 0..6 {
            assert!((f.r[(i, i)].abs() - 1.0).abs() < 1e-12);
            for j in (i + 1)..6 {
                assert!(f.r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn padded_identity() {
        let mut z = DMatrix::zeros(7, 4);
        z.fill_with_identity();
        let f = qr_factor(&z).unwrap();
        check_invariants(&z, &f);
        let abs_r = f.r.abs();
        assert!((abs_r - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
    }

    #[test]
    fn rank_deficient_and_bad_shapes() {
        let mut z = DMatrix::zeros(5, 3);
        z.column_mut(0).fill(1.0);
        z.column_mut(2).fill(2.0);
        let f = qr_factor(&z).unwrap();
        assert!((&f.q * &f.r - &z).amax() < 1e-12);
        assert!(qr_factor(&DMatrix::zeros(2, 3)).is_err());
    }
}
