//! Random feature maps `Zᵢ(x) = √2·cos(⟨x, Wᵢ⟩ + Uᵢ)` and the feature
//! matrix `Z` whose `i`-th column is `(Zᵢ(x₁), …, Zᵢ(xₙ)) / √s`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::kernels::{Kernel, SpectralSample};

/// A sampled set of `s` random features in dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    kernel: Option<Kernel>,
    /// `s × d`, row `i` is `Wᵢ`.
    frequencies: DMatrix<f64>,
    phases: DVector<f64>,
}

impl FeatureMap {
    /// Draws `s` features for `kernel` in dimension `dim`.
    pub fn sample<R: Rng + ?Sized>(kernel: &Kernel, dim: usize, s: usize, rng: &mut R) -> Result<Self> {
        let samples = kernel.sample_spectral(dim, s, rng)?;
        let mut map = Self::from_samples(&samples)?;
        map.kernel = Some(*kernel);
        Ok(map)
    }

    /// Builds a map from explicit `(W, U)` pairs.
    pub fn from_samples(samples: &[SpectralSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::invalid("a feature map needs at least one sample"))?;
        let dim = first.frequency.len();
        if dim == 0 {
            return Err(Error::invalid("frequencies must have dimension at least 1"));
        }
        for sample in samples {
            check_dim(dim, sample.frequency.len())?;
        }
        let frequencies = DMatrix::from_fn(samples.len(), dim, |i, j| samples[i].frequency[j]);
        let phases = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.phase));
        Ok(FeatureMap {
            kernel: None,
            frequencies,
            phases,
        })
    }

    /// Number of features `s`.
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frequencies.ncols()
    }

    /// The kernel the map was sampled for, if it was sampled.
    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }

    pub fn sample_at(&self, i: usize) -> Option<SpectralSample> {
        (i < self.len()).then(|| SpectralSample {
            frequency: self.frequencies.row(i).iter().copied().collect(),
            phase: self.phases[i],
        })
    }

    /// Unnormalised feature value `Zᵢ(x)` (0-based `i`).
    pub fn eval_feature(&self, i: usize, x: &[f64]) -> Result<f64> {
        if i >= self.len() {
            return Err(Error::invalid(format!(
                "feature index {i} out of range for {} features",
                self.len()
            )));
        }
        check_dim(self.dim(), x.len())?;
        let dot: f64 = self.frequencies.row(i).iter().zip(x).map(|(w, v)| w * v).sum();
        Ok(SQRT_2 * (dot + self.phases[i]).cos())
    }

    /// `k̃(x, x') = (1/s) Σᵢ Zᵢ(x) Zᵢ(x')`.
    pub fn approx_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        check_dim(self.dim(), y.len())?;
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.eval_feature(i, x)? * self.eval_feature(i, y)?;
        }
        Ok(acc / self.len() as f64)
    }

    /// Feature matrix for the rows of `points` (`n × d`).
    pub fn feature_matrix(&self, points: &DMatrix<f64>) -> Result<FeatureMatrix> {
        check_dim(self.dim(), points.ncols())?;
        let mut z = points * self.frequencies.transpose();
        let norm = SQRT_2 / (self.len() as f64).sqrt();
        for (i, mut col) in z.column_iter_mut().enumerate() {
            let u = self.phases[i];
            col.apply(|v| *v = norm * (*v + u).cos());
        }
        Ok(FeatureMatrix(z))
    }
}

/// `n × s` feature matrix `Z`; `K̃ = ZZᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(DMatrix<f64>);

impl FeatureMatrix {
    /// Wraps an arbitrary `n × s` matrix, e.g. for testing error norms.
    pub fn from_matrix(z: DMatrix<f64>) -> Self {
        FeatureMatrix(z)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    /// Feature count `s`.
    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    /// `K̃ = ZZᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        &self.0 * self.0.transpose()
    }

    /// `Z(:, idx)`.
    pub fn select_columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.0.select_columns(idx)
    }
}

/// Exact kernel matrix `Kⱼⱼ' = k(xⱼ, xⱼ')` for the rows of `points`.
pub fn exact_kernel_matrix(kernel: &Kernel, points: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = points.transpose();
    let n = points.nrows();
    let mut k = DMatrix::identity(n, n);
    for j in 0..n {
        let xj = cols.column(j);
        for jj in (j + 1)..n {
            let v = kernel.eval_unchecked(xj.as_slice(), cols.column(jj).as_slice());
            k[(j, jj)] = v;
            k[(jj, j)] = v;
        }
    }
    k
}

/// Kernel cross matrix `Cᵢⱼ = k(aᵢ, bⱼ)`.
pub fn cross_kernel_matrix(kernel: &Kernel, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ac = a.transpose();
    let bc = b.transpose();
    DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        kernel.eval_unchecked(ac.column(i).as_slice(), bc.column(j).as_slice())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn fixed_map(w: Vec<f64>, u: f64) -> FeatureMap {
        FeatureMap::from_samples(&[SpectralSample { frequency: w, phase: u }]).unwrap()
    }

    #[test]
    fn degenerate_features() {
        let m = fixed_map(vec![0.0, 0.0], 0.0);
        assert_eq!(m.len(), 1);
        assert_eq!(m.eval_feature(0, &[3.0, -1.0]).unwrap(), SQRT_2);
        let m = fixed_map(vec![0.0, 0.0], PI);
        assert_relative_eq!(m.eval_feature(0, &[3.0, -1.0]).unwrap(), -SQRT_2);
        assert!(m.eval_feature(1, &[0.0, 0.0]).is_err());
        assert!(m.eval_feature(0, &[0.0]).is_err());

        let m = fixed_map(vec![0.0], 0.0);
        let z = m.feature_matrix(&DMatrix::from_element(1, 1, 4.0)).unwrap();
        assert_eq!(z.as_matrix()[(0, 0)], SQRT_2);
    }

    #[test]
    fn approx_kernel_of_zero_frequencies_is_two() {
        let samples = vec![SpectralSample { frequency: vec![0.0; 3], phase: 0.0 }; 5];
        let m = FeatureMap::from_samples(&samples).unwrap();
        assert_relative_eq!(m.approx_kernel(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn sampled_map_is_deterministic() {
        let k = Kernel::gaussian(1.0).unwrap();
        let a = FeatureMap::sample(&k, 3, 100, &mut stream(1, &[])).unwrap();
        let b = FeatureMap::sample(&k, 3, 100, &mut stream(1, &[])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        assert!((0..100).all(|i| (0.0..2.0 * PI).contains(&a.sample_at(i).unwrap().phase)));
        assert!(FeatureMap::sample(&k, 3, 0, &mut stream(1, &[])).is_err());
    }

    fn random_points(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream(seed, &[]);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn matrix_entries_bounded_and_consistent_with_function_view() {
        let k = Kernel::laplacian(2.0).unwrap();
        let pts = random_points(12, 4, 9);
        let map = FeatureMap::sample(&k, 4, 37, &mut stream(2, &[])).unwrap();
        let z = map.feature_matrix(&pts).unwrap();
        let bound = SQRT_2 / 37f64.sqrt();
        assert!(z.as_matrix().iter().all(|v| v.abs() <= bound + 1e-15));

        let pc = pts.transpose();
        let x = |j: usize| pc.column(j).iter().copied().collect::<Vec<_>>();
        for j in 0..12 {
            for i in 0..37 {
                let direct = map.eval_feature(i, &x(j)).unwrap() / 37f64.sqrt();
                assert_relative_eq!(z.as_matrix()[(j, i)], direct, epsilon = 1e-13);
            }
        }
        let g = z.gram();
        for j in 0..12 {
            for jj in 0..12 {
                let v = map.approx_kernel(&x(j), &x(jj)).unwrap();
                assert!((g[(j, jj)] - v).abs() <= 1e-12);
                assert!((0.0..=2.0).contains(&map.approx_kernel(&x(j), &x(j)).unwrap()));
            }
        }
        let eig = g.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-10);
        assert!(map.feature_matrix(&random_points(3, 2, 1)).is_err());
    }

    #[test]
    fn exact_matrix_small_cases() {
        let g = Kernel::gaussian(1.0).unwrap();
        assert_eq!(exact_kernel_matrix(&g, &DMatrix::from_element(1, 2, 3.0)), DMatrix::identity(1, 1));
        let pts = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 3.0]);
        let k = exact_kernel_matrix(&g, &pts);
        // hand-evaluated exp(-Δ²/2)
        assert_relative_eq!(k[(0, 1)], (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k[(0, 2)], (-4.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k[(1, 2)], (-2.0f64).exp(), max_relative = 1e-15);
        assert_eq!(k, k.transpose());
        assert!(k.diagonal().iter().all(|&v| v == 1.0));
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert_eq!(exact_kernel_matrix(&g, &dup)[(0, 1)], 1.0);
    }

    /// Monte Carlo unbiasedness: averaging ZZᵀ over 500 independent maps
    /// (s = 50) stays within 4 standard errors of K entrywise.
    #[test]
    fn gram_is_unbiased() {
        let k = Kernel::gaussian(1.5).unwrap();
        let pts = random_points(10, 2, 21);
        let exact = exact_kernel_matrix(&k, &pts);
        let m = 500;
        let mut sum = DMatrix::zeros(10, 10);
        let mut sumsq = DMatrix::zeros(10, 10);
        for t in 0..m {
            let map = FeatureMap::sample(&k, 2, 50, &mut stream(22, &[t])).unwrap();
            let g = map.feature_matrix(&pts).unwrap().gram();
            sumsq += g.component_mul(&g);
            sum += g;
        }
        for j in 0..10 {
            for jj in 0..10 {
                let mean = sum[(j, jj)] / m as f64;
                let var = (sumsq[(j, jj)] / m as f64 - mean * mean) * m as f64 / (m - 1) as f64;
                let se = (var / m as f64).sqrt().max(1e-12);
                assert!((mean - exact[(j, jj)]).abs() <= 4.0 * se, "({j},{jj})");
            }
        }
    }

    #[test]
    fn single_feature_mean_is_kernel() {
        let k = Kernel::cauchy(2.0).unwrap();
        let (x, y) = ([0.3, -0.4], [1.1, 0.2]);
        let m = 100_000;
        let vals: Vec<f64> = (0..m)
            .map(|t| {
                let map = FeatureMap::sample(&k, 2, 1, &mut stream(5, &[t])).unwrap();
                map.approx_kernel(&x, &y).unwrap()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let exact = k.eval(&x, &y).unwrap();
        assert!((mean - exact).abs() <= 4.0 * (var / m as f64).sqrt());
    }
}
