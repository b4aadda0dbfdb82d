//! Pathwise statistics of a single particle: local Brownian behaviour and
//! Hölder regularity of the drift part.

use serde::Serialize;

use crate::coupling::noise::NoiseSource;
use crate::dbm::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::stats::regression::{t95, wls};

/// (1/√ε) sup_{0≤t≤S} |(λ_i(s+εt) − λ_i(s)) − √(2/β)(B_i(s+εt) − B_i(s))|.
pub fn brownian_increment_stat(
    traj: &Trajectory,
    noise: &NoiseSource,
    i: usize,
    s: f64,
    eps: f64,
    horizon: f64,
) -> Result<f64> {
    if noise.dt_base != traj.dt_base {
        return Err(invalid("noise grid differs from the trajectory grid"));
    }
    if i < 1 || i > traj.kept() {
        return Err(Error::IndexOutOfRange { index: i, n: traj.kept() });
    }
    let tol = 1e-9 * traj.dt_base;
    let start = traj
        .times
        .iter()
        .position(|&t| (t - s).abs() <= tol.max(1e-12 * s.abs()))
        .ok_or_else(|| invalid(format!("no snapshot at s = {s}")))?;
    let end_t = s + eps * horizon;
    let sigma = (2.0 / traj.beta).sqrt();
    let x0 = traj.x(start, i);
    let k0 = traj.steps[start];
    let mut b = 0.0;
    let mut k_prev = k0;
    let mut sup = 0.0f64;
    let mut used = 0;
    for snap in start + 1..traj.len() {
        if traj.times[snap] > end_t + tol {
            break;
        }
        let k = traj.steps[snap];
        b += noise.brownian_between(i, k_prev, k);
        k_prev = k;
        sup = sup.max((traj.x(snap, i) - x0 - sigma * b).abs());
        used += 1;
    }
    if used < 2 || (traj.times[start + used] - end_t).abs() > traj.dt_base {
        return Err(invalid(format!(
            "trajectory does not resolve eps·S = {} from s = {s}",
            eps * horizon
        )));
    }
    Ok(sup / eps.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub ci: (f64, f64),
    /// Lags in units of the path's total duration.
    pub scales: Vec<f64>,
    pub mean_increment: Vec<f64>,
}

/// Fixed analysis window for Hölder fits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HolderConfig {
    pub coarsest_level: u32,
    /// Smallest lag, in grid intervals.
    pub min_intervals: usize,
    pub min_scales: usize,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self {
            coarsest_level: 4,
            min_intervals: 8,
            min_scales: 5,
        }
    }
}

/// Empirical Hölder exponent from the scaling of increments.
///
/// For a path of 2^m + 1 equally spaced points on a unit interval, the mean of
/// |p(t + 2^{-k}) − p(t)| over every grid start t is regressed on the lag 2^{-k}
/// in log-log coordinates, weighted by inverse lag, for k from `coarsest_level` down to lags of
/// `min_intervals` grid steps.
pub fn holder_exponent(path: &[f64], cfg: &HolderConfig) -> Result<HolderFit> {
    let intervals = path.len().saturating_sub(1);
    if intervals < 2 || !intervals.is_power_of_two() {
        return Err(invalid("path needs 2^m + 1 points"));
    }
    let m = intervals.trailing_zeros();
    let finest = m.saturating_sub(cfg.min_intervals.next_power_of_two().trailing_zeros());
    let levels: Vec<u32> = (cfg.coarsest_level..=finest).collect();
    if levels.len() < cfg.min_scales {
        return Err(Error::InsufficientData(format!(
            "{} dyadic scales, need {}",
            levels.len(),
            cfg.min_scales
        )));
    }
    let mut scales = Vec::new();
    let mut osc = Vec::new();
    for &k in &levels {
        let lag = intervals >> k;
        let total: f64 = path.windows(lag + 1).map(|w| (w[lag] - w[0]).abs()).sum();
        scales.push(1.0 / (1u64 << k) as f64);
        osc.push(total / (intervals + 1 - lag) as f64);
    }
    if osc.iter().any(|&o| !(o > 0.0)) {
        return Err(invalid("path is constant at some scale"));
    }
    let lx: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let ly: Vec<f64> = osc.iter().map(|o| o.ln()).collect();
    // the mean over a path of unit length has variance roughly proportional to the lag
    let weights: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
    let fit = wls(&lx, &ly, &weights)?;
    let half = t95(fit.points - 2) * fit.slope_se;
    Ok(HolderFit {
        exponent: fit.slope,
        ci: (fit.slope - half, fit.slope + half),
        scales,
        mean_increment: osc,
    })
}

/// λ_i − √(2/β) B_i along the snapshots, relative to the first snapshot.
pub fn drift_corrected_path(traj: &Trajectory, noise: &NoiseSource, i: usize) -> Result<Vec<f64>> {
    if noise.dt_base != traj.dt_base {
        return Err(invalid("noise grid differs from the trajectory grid"));
    }
    let sigma = (2.0 / traj.beta).sqrt();
    let mut out = Vec::with_capacity(traj.len());
    let mut b = 0.0;
    let x0 = traj.x(0, i);
    out.push(0.0);
    for s in 1..traj.len() {
        b += noise.brownian_between(i, traj.steps[s - 1], traj.steps[s]);
        out.push(traj.x(s, i) - x0 - sigma * b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::noise::inverse_normal_cdf;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        inverse_normal_cdf(rng.random::<f64>().clamp(1e-300, 1.0 - 1e-16))
    }

    /// Random midpoint displacement with Hurst index h on 2^m + 1 points.
    fn midpoint_path(m: u32, h: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 1usize << m;
        let mut p = vec![0.0; n + 1];
        p[n] = gaussian(&mut rng);
        let mut step = n;
        while step > 1 {
            let half = step / 2;
            let delta = half as f64 / n as f64;
            let sd = delta.powf(h) * (1.0 - 2f64.powf(2.0 * h - 2.0)).sqrt();
            for j in (half..n).step_by(step) {
                p[j] = 0.5 * (p[j - half] + p[j + half]) + sd * gaussian(&mut rng);
            }
            step = half;
        }
        p
    }

    #[test]
    fn smooth_path_is_lipschitz() {
        let n = 1 << 14;
        let path: Vec<f64> = (0..=n).map(|k| (k as f64 / n as f64).powi(2)).collect();
        let fit = holder_exponent(&path, &HolderConfig::default()).unwrap();
        assert!((fit.exponent - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn brownian_path_gives_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1 << 14;
        let mut total = 0.0;
        for _ in 0..10 {
            let mut path = vec![0.0; n + 1];
            for k in 1..=n {
                path[k] = path[k - 1] + gaussian(&mut rng) / (n as f64).sqrt();
            }
            let fit = holder_exponent(&path, &HolderConfig::default()).unwrap();
            assert!((fit.exponent - 0.5).abs() < 0.05, "{fit:?}");
            total += fit.exponent;
        }
        assert!((total / 10.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn fractional_path_recovers_hurst() {
        let mut total = 0.0;
        for seed in 0..10 {
            let fit = holder_exponent(&midpoint_path(14, 0.75, seed), &HolderConfig::default()).unwrap();
            total += fit.exponent;
        }
        assert!((total / 10.0 - 0.75).abs() < 0.05, "{}", total / 10.0);
    }

    #[test]
    fn too_few_scales() {
        let path = vec![0.0; 257];
        assert!(matches!(
            holder_exponent(&path, &HolderConfig::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
