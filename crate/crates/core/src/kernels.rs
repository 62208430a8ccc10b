//! Shift-invariant kernels and their spectral distributions.
//!
//! Each kernel is normalised so that `k(x, x) = 1`. By Bochner's theorem it
//! is the characteristic function of a spectral distribution `ρ`, so
//! `k(x, x') = E[cos⟨W, x − x'⟩]` for `W ~ ρ`; the random features in
//! [`crate::features`] are built from draws of `ρ`.
//!
//! | family    | `k(x, x')`                     | `ρ` (per coordinate)          |
//! |-----------|--------------------------------|-------------------------------|
//! | Gaussian  | `exp(−‖Δ‖₂² / (2σ²))`          | `Normal(0, 1/σ²)`             |
//! | Laplacian | `exp(−‖Δ‖₁ / γ)`               | `Cauchy(0, 1/γ)`              |
//! | Cauchy    | `∏ⱼ 1 / (1 + Δⱼ² / γ)`         | `Laplace(0, 1/√γ)`            |

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Gaussian,
    Laplacian,
    Cauchy,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Cauchy => "cauchy",
        })
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "laplacian" | "laplace" => Ok(KernelFamily::Laplacian),
            "cauchy" => Ok(KernelFamily::Cauchy),
            other => Err(Error::invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A shift-invariant kernel: a family plus its bandwidth.
///
/// `scale` is `σ` for the Gaussian kernel and `γ` for the Laplacian and
/// Cauchy kernels (see the module table). `exp(−‖Δ‖²/10)` is therefore
/// `Kernel::gaussian(5f64.sqrt())`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    scale: f64,
}

/// One draw `(W, U)` from `ρ × Uniform[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub frequency: Vec<f64>,
    pub phase: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!(
                "kernel scale must be positive and finite, got {scale}"
            )));
        }
        Ok(Kernel { family, scale })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma)
    }

    pub fn laplacian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Laplacian, gamma)
    }

    pub fn cauchy(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Cauchy, gamma)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `k(x, x')`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        if x.is_empty() {
            return Err(Error::invalid("points must have dimension at least 1"));
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// `k(x, x')` without the dimension check. Slices must have equal length.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let deltas = x.iter().zip(y).map(|(a, b)| a - b);
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = deltas.map(|d| d * d).sum();
                (-sq / (2.0 * self.scale * self.scale)).exp()
            }
            KernelFamily::Laplacian => {
                let l1: f64 = deltas.map(f64::abs).sum();
                (-l1 / self.scale).exp()
            }
            KernelFamily::Cauchy => deltas.map(|d| 1.0 / (1.0 + d * d / self.scale)).product(),
        }
    }

    /// Draws one frequency coordinate from the family's spectral law.
    fn sample_frequency_coord<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                z / self.scale
            }
            KernelFamily::Laplacian => {
                // inverse CDF of Cauchy(0, 1/γ); u ∈ (0, 1)
                let u = open_unit(rng);
                (PI * (u - 0.5)).tan() / self.scale
            }
            KernelFamily::Cauchy => {
                // Laplace(0, b): sign-flipped Exp(1) scaled by b = 1/√γ
                let e = -open_unit(rng).ln();
                let b = 1.0 / self.scale.sqrt();
                if rng.random::<bool>() {
                    e * b
                } else {
                    -e * b
                }
            }
        }
    }

    /// Draws `count` i.i.d. `(W, U)` pairs in dimension `dim`.
    pub fn sample_spectral<R: Rng + ?Sized>(
        &self,
        dim: usize,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<SpectralSample>> {
        if dim == 0 || count == 0 {
            return Err(Error::invalid("spectral sampling needs dim >= 1 and count >= 1"));
        }
        let phase = Uniform::new(0.0, TAU).expect("valid phase range");
        Ok((0..count)
            .map(|_| {
                let frequency = (0..dim).map(|_| self.sample_frequency_coord(rng)).collect();
                SpectralSample {
                    frequency,
                    phase: phase.sample(rng),
                }
            })
            .collect())
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.family, self.scale)
    }
}

/// Uniform draw on the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
