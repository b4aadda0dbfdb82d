//! Exact equilibrium samples of the Gaussian β-ensemble with density
//! ∝ exp(−β N^{-1/3} Σ μ_i²/4) Π_{i<j} |μ_i − μ_j|^β, via the tridiagonal model.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coupling::noise::{domain, mix};
use crate::dbm::{edge_shift, ParticleState};
use crate::error::{invalid, Error, Result};
use crate::tridiag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbeSample {
    pub values: Vec<f64>,
    pub n: usize,
    pub beta: f64,
    pub seed: u64,
}

impl GbeSample {
    pub fn to_state(&self) -> Result<ParticleState> {
        ParticleState::new(self.values.clone(), self.beta)
    }

    /// Lowest `k` values in edge coordinates μ_i + 2N^{2/3}.
    pub fn edge_window(&self, k: usize) -> Vec<f64> {
        let s = edge_shift(self.n);
        self.values[..k.min(self.n)].iter().map(|v| v + s).collect()
    }
}

/// Matrix entries of the scaled tridiagonal model: diagonal and off-diagonal.
fn tridiagonal_model(n: usize, beta: f64, rng: &mut ChaCha12Rng) -> (Vec<f64>, Vec<f64>) {
    // eigenvalues of (N(0,1) diag, χ_{(N−i)β}/√2 off-diag) have density ∝ exp(−Σμ²/2)Π|Δμ|^β;
    // scaling by √(2N^{1/3}/β) gives the target weight
    let scale = (2.0 * (n as f64).cbrt() / beta).sqrt();
    let diag: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    let off: Vec<f64> = (1..n)
        .map(|i| {
            let dof = (n - i) as f64 * beta;
            let chi2 = ChiSquared::new(dof).expect("positive degrees of freedom");
            scale * (chi2.sample(rng) / 2.0).sqrt()
        })
        .collect();
    (diag, off)
}

fn rng_for(n: usize, beta: f64, seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix(&[domain::GBE, seed, n as u64, beta.to_bits()]))
}

fn check(n: usize, beta: f64) -> Result<()> {
    if n < 1 {
        return Err(invalid("N must be at least 1"));
    }
    if !(beta >= 1.0) || !beta.is_finite() {
        return Err(invalid(format!("beta must be finite and >= 1, got {beta}")));
    }
    Ok(())
}

fn strictly_sorted(values: &[f64]) -> Result<()> {
    if values.windows(2).all(|w| w[0] < w[1]) {
        Ok(())
    } else {
        Err(Error::Numerical("tied eigenvalues in β-ensemble sample".into()))
    }
}

pub fn sample_gbe(n: usize, beta: f64, seed: u64) -> Result<GbeSample> {
    check(n, beta)?;
    let mut rng = rng_for(n, beta, seed);
    let (diag, off) = tridiagonal_model(n, beta, &mut rng);
    let values = tridiag::eigenvalues(&diag, &off)?;
    strictly_sorted(&values)?;
    Ok(GbeSample {
        values,
        n,
        beta,
        seed,
    })
}

/// Same law as the lowest `k` values of `sample_gbe(n, beta, seed)`, by bisection.
///
/// Bit-identical matrices to the full sampler; eigenvalues agree to solver precision.
pub fn sample_gbe_lowest(n: usize, beta: f64, seed: u64, k: usize) -> Result<GbeSample> {
    check(n, beta)?;
    let mut rng = rng_for(n, beta, seed);
    let (diag, off) = tridiagonal_model(n, beta, &mut rng);
    let values = tridiag::smallest_eigenvalues(&diag, &off, k);
    strictly_sorted(&values)?;
    Ok(GbeSample {
        values,
        n,
        beta,
        seed,
    })
}

/// −2N^{2/3} − μ₁.
pub fn edge_statistic(sample: &GbeSample) -> f64 {
    -edge_shift(sample.n) - sample.values[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semicircle::SemicircleModel;
    use crate::stats::ks::ks_one_sample;

    #[test]
    fn one_particle_is_gaussian_with_variance_two_over_beta() {
        for beta in [1.0, 2.0, 4.0] {
            let m = 20_000;
            let xs: Vec<f64> = (0..m).map(|s| sample_gbe(1, beta, s).unwrap().values[0]).collect();
            let mean = xs.iter().sum::<f64>() / m as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0);
            let target = 2.0 / beta;
            assert!(mean.abs() < 4.0 * (target / m as f64).sqrt());
            assert!((var / target - 1.0).abs() < 4.0 * (2.0 / m as f64).sqrt(), "β={beta} var={var}");
        }
    }

    #[test]
    fn bulk_follows_semicircle() {
        let s = sample_gbe(1024, 2.0, 3).unwrap();
        let scale = 1024f64.powf(2.0 / 3.0);
        let model = SemicircleModel::default();
        let scaled: Vec<f64> = s.values.iter().map(|v| v / scale).collect();
        let d = ks_one_sample(&scaled, |e| model.cdf(e));
        assert!(d < 0.05, "KS {d}");
    }

    #[test]
    fn lowest_matches_full() {
        let full = sample_gbe(300, 2.0, 17).unwrap();
        let low = sample_gbe_lowest(300, 2.0, 17, 5).unwrap();
        for i in 0..5 {
            assert!((full.values[i] - low.values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_and_sorted() {
        let a = sample_gbe(64, 4.0, 1).unwrap();
        let b = sample_gbe(64, 4.0, 1).unwrap();
        assert_eq!(a, b);
        assert!(a.values.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_gbe(8, 0.5, 1).is_err());
        assert!(sample_gbe(0, 2.0, 1).is_err());
    }

    #[test]
    fn edge_statistic_definition() {
        let n = 27;
        let mut values = vec![0.0; n];
        values[0] = -2.0 * 9.0;
        for (i, v) in values.iter_mut().enumerate().skip(1) {
            *v = i as f64;
        }
        let s = GbeSample {
            values,
            n,
            beta: 2.0,
            seed: 0,
        };
        assert!(edge_statistic(&s).abs() < 1e-12);
    }
}
