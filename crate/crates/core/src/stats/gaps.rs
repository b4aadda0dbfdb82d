//! Small-gap tail exponent: P[(μ_{i+1} − μ_i) î^{1/3} ≤ s] ≈ c s^{α}.
//!
//! The fit is ln F(s) = c + α ln s + b s² over a fixed range of order
//! statistics. The s² term absorbs the leading Gaussian-type curvature
//! (a gap density s^β e^{−a s²} has exactly this expansion); without it the
//! slope over any practical window is biased low for β = 4.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semicircle::hat_index;
use crate::stats::regression::ols2;

/// Pre-registered fitting window, in event counts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapTailConfig {
    /// Lower end of the window: the s at which this many gaps lie below.
    pub min_events: usize,
    /// Upper end as a fraction of the sample.
    pub max_fraction: f64,
    pub bootstrap: usize,
    pub bootstrap_seed: u64,
}

impl Default for GapTailConfig {
    fn default() -> Self {
        Self {
            min_events: 30,
            max_fraction: 0.1,
            bootstrap: 400,
            bootstrap_seed: 0x6761_7073,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    pub s_grid: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub window: (f64, f64),
    pub events_in_window: (usize, usize),
    pub slope: f64,
    pub slope_ci: (f64, f64),
    /// Coefficient b of the s² term.
    pub curvature: f64,
    /// Fewer events than the window asks for; the fit used what was there.
    pub flagged: bool,
    pub config: GapTailConfig,
}

/// (μ_{i+1} − μ_i)·î^{1/3} for each sample of size n.
pub fn normalized_gaps<'a>(samples: impl IntoIterator<Item = &'a [f64]>, i: usize, n: usize) -> Vec<f64> {
    let scale = (hat_index(i, n) as f64).cbrt();
    samples
        .into_iter()
        .map(|v| (v[i] - v[i - 1]) * scale)
        .collect()
}

/// (α, b) from ln(m/n) = c + α ln s_(m) + b s_(m)² over order statistics m in [lo, hi].
fn window_fit(sorted: &[f64], lo: usize, hi: usize) -> Result<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut x = Vec::with_capacity(hi - lo + 1);
    let mut z = Vec::with_capacity(hi - lo + 1);
    let mut y = Vec::with_capacity(hi - lo + 1);
    for m in lo..=hi {
        let s = sorted[m - 1];
        if s > 0.0 {
            x.push(s.ln());
            z.push(s * s);
            y.push((m as f64 / n).ln());
        }
    }
    ols2(&x, &z, &y)
}

fn window_bounds(n: usize, cfg: &GapTailConfig) -> (usize, usize, bool) {
    let lo = cfg.min_events.max(2);
    let hi = (n as f64 * cfg.max_fraction).floor() as usize;
    if hi >= 4 * lo && hi <= n {
        (lo, hi, false)
    } else {
        (lo.min(n / 4).max(2), (4 * lo).min(n), true)
    }
}

pub fn gap_tail_exponent(gaps: &[f64], s_grid: &[f64], cfg: &GapTailConfig) -> Result<TailFit> {
    if !(cfg.max_fraction > 0.0 && cfg.max_fraction <= 1.0) {
        return Err(crate::error::invalid("max_fraction must lie in (0, 1]"));
    }
    if gaps.len() < 4 * cfg.min_events.max(2) {
        return Err(Error::InsufficientData(format!("{} gaps", gaps.len())));
    }
    let mut sorted = gaps.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let probabilities = s_grid
        .iter()
        .map(|&s| sorted.partition_point(|&g| g <= s) as f64 / n as f64)
        .collect();
    let (lo, hi, flagged) = window_bounds(n, cfg);
    let (slope, curvature) = window_fit(&sorted, lo, hi)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.bootstrap_seed);
    let mut boot = Vec::with_capacity(cfg.bootstrap);
    let mut resample = vec![0.0; n];
    for _ in 0..cfg.bootstrap {
        for r in resample.iter_mut() {
            *r = sorted[rng.random_range(0..n)];
        }
        resample.sort_by(f64::total_cmp);
        if let Ok((s, _)) = window_fit(&resample, lo, hi) {
            boot.push(s);
        }
    }
    boot.sort_by(f64::total_cmp);
    let slope_ci = if boot.len() >= 20 {
        let q = |p: f64| boot[((boot.len() - 1) as f64 * p).round() as usize];
        let (a, b) = (q(0.025), q(0.975));
        if flagged {
            // widen for the shortened window
            (a - (b - a), b + (b - a))
        } else {
            (a, b)
        }
    } else {
        (f64::NEG_INFINITY, f64::INFINITY)
    };
    Ok(TailFit {
        s_grid: s_grid.to_vec(),
        probabilities,
        window: (sorted[lo - 1], sorted[hi - 1]),
        events_in_window: (lo, hi),
        slope,
        slope_ci,
        curvature,
        flagged,
        config: *cfg,
    })
}

/// Log-spaced grid covering the lower part of the gap distribution.
pub fn default_s_grid(gaps: &[f64], points: usize) -> Vec<f64> {
    let mut v = gaps.to_vec();
    v.sort_by(f64::total_cmp);
    let lo = v.iter().copied().find(|&g| g > 0.0).unwrap_or(1e-6);
    let hi = v[v.len() / 2];
    (0..points)
        .map(|k| lo * (hi / lo).powf(k as f64 / (points - 1).max(1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn planted_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alpha in [2.0, 3.0, 5.0] {
            let gaps: Vec<f64> = (0..200_000)
                .map(|_| rng.random::<f64>().powf(1.0 / alpha))
                .collect();
            let grid = default_s_grid(&gaps, 40);
            let fit = gap_tail_exponent(&gaps, &grid, &GapTailConfig::default()).unwrap();
            // within three bootstrap standard errors
            let se = (fit.slope_ci.1 - fit.slope_ci.0) / (2.0 * 1.96);
            assert!((fit.slope - alpha).abs() < 3.0 * se, "{fit:?}");
            assert!(fit.probabilities.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn planted_gaussian_tail() {
        // density ∝ s^{α−1} e^{−s²}: s² ~ Gamma(α/2, 1)
        use rand_distr::{Distribution, Gamma};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for alpha in [2.0, 5.0] {
            let g: Gamma<f64> = Gamma::new(alpha / 2.0, 1.0).unwrap();
            let gaps: Vec<f64> = (0..200_000).map(|_| g.sample(&mut rng).sqrt()).collect();
            let cfg = GapTailConfig { bootstrap: 0, ..Default::default() };
            let fit = gap_tail_exponent(&gaps, &[], &cfg).unwrap();
            // about three standard deviations at this sample size
            assert!((fit.slope - alpha).abs() < 0.45, "{fit:?}");
        }
    }

    #[test]
    fn exact_quantiles_give_exact_exponent() {
        let n = 20_000;
        let gaps: Vec<f64> = (1..=n).map(|k| (k as f64 / n as f64).powf(0.2)).collect();
        let fit = gap_tail_exponent(&gaps, &[], &GapTailConfig { bootstrap: 0, ..Default::default() }).unwrap();
        assert!((fit.slope - 5.0).abs() < 1e-9 && fit.curvature.abs() < 1e-8, "{fit:?}");
    }

    #[test]
    fn short_samples_are_flagged() {
        let gaps: Vec<f64> = (1..=200).map(|k| k as f64 / 200.0).collect();
        let fit = gap_tail_exponent(&gaps, &[], &GapTailConfig::default()).unwrap();
        assert!(fit.flagged);
        assert_eq!(fit.events_in_window, (30, 120));
    }
}
