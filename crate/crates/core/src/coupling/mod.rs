//! Systems of different sizes driven by the same Brownian motions.

pub mod noise;

use serde::{Deserialize, Serialize};

use crate::coupling::noise::{domain, mix, NoiseSource};
use crate::cutoff::{simulate_window_with, Closure, EdgeWindow};
use crate::dbm::{simulate_with, RegularizationConfig, SnapshotPlan, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::gbe::{sample_gbe, sample_gbe_lowest};
use crate::stats::regression::{median, ols};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    Full,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub beta: f64,
    /// Length of the measurement window.
    pub duration: f64,
    pub t_burn: f64,
    pub dt_base: f64,
    pub mode: CouplingMode,
    /// Window size K = ⌈N^ω⌉ in window mode.
    pub omega: f64,
    pub delta_c: f64,
    pub closure: Closure,
    /// Keep −x/(2N^{1/3}) in the window drift.
    pub confinement_term: bool,
    /// Number of lowest particles recorded.
    pub keep: usize,
    pub decimation: u64,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            beta: 2.0,
            duration: 1.0,
            t_burn: 4.0,
            dt_base: 1e-4,
            mode: CouplingMode::Window,
            omega: 0.5,
            delta_c: 0.1,
            closure: Closure::Ghosts,
            confinement_term: true,
            keep: 4,
            decimation: 10,
        }
    }
}

impl CouplingConfig {
    pub fn window_k(&self, n: usize) -> usize {
        ((n as f64).powf(self.omega).ceil() as usize).clamp(self.keep.max(1), n)
    }
}

/// Sampler seed for size N. Depends only on (seed, N), so equal sizes get equal data.
pub fn initial_seed(init_seed: u64, n: usize) -> u64 {
    mix(&[domain::GBE, init_seed, n as u64])
}

/// Edge trajectory (edge coordinates, lowest `keep` particles) of one size.
pub fn coupled_trajectory(
    n: usize,
    config: &CouplingConfig,
    noise_seed: u64,
    init_seed: u64,
) -> Result<Trajectory> {
    let noise = NoiseSource::new(noise_seed, config.dt_base);
    let reg = RegularizationConfig::for_n(n, config.dt_base);
    let burn_steps = (config.t_burn / config.dt_base).round() as u64;
    let plan = SnapshotPlan {
        decimation: config.decimation,
        keep: Some(config.keep),
        record_from: burn_steps,
    };
    let total = config.t_burn + config.duration;
    let seed = initial_seed(init_seed, n);
    match config.mode {
        CouplingMode::Full => {
            let sample = sample_gbe(n, config.beta, seed)?;
            simulate_with(&sample.to_state()?, total, &noise, &reg, &plan)
        }
        CouplingMode::Window => {
            let k = config.window_k(n);
            let window = EdgeWindow::mean_field(k, n, config.beta, config.delta_c, reg)?
                .with_closure(config.closure)
                .with_confinement_term(config.confinement_term);
            let sample = sample_gbe_lowest(n, config.beta, seed, k)?;
            let mut initial = sample.edge_window(k);
            if config.closure == Closure::Ghosts {
                // rare at the top of the window; the burn-in forgets it
                window.admit(&mut initial);
            }
            simulate_window_with(&initial, 0.0, total, &noise, &window, &plan)
        }
    }
}

/// One trajectory per entry of `n_list`, all driven by the noise with `noise_seed`.
pub fn coupled_run(
    n_list: &[usize],
    config: &CouplingConfig,
    noise_seed: u64,
    init_seed: u64,
) -> Result<Vec<(usize, Trajectory)>> {
    if n_list.is_empty() {
        return Err(invalid("empty N list"));
    }
    if let Some(&n) = n_list.iter().find(|&&n| n < config.keep) {
        return Err(invalid(format!("N = {n} is below the number of probed particles")));
    }
    n_list
        .iter()
        .map(|&n| Ok((n, coupled_trajectory(n, config, noise_seed, init_seed)?)))
        .collect()
}

/// max over snapshots with t in [t0, t1] and i ≤ i_max of |x_i^A(t) − x_i^B(t)|.
pub fn sup_difference(a: &Trajectory, b: &Trajectory, i_max: usize, window: (f64, f64)) -> Result<f64> {
    if a.steps != b.steps || a.dt_base != b.dt_base {
        return Err(Error::GridMismatch(format!(
            "{} vs {} snapshots",
            a.steps.len(),
            b.steps.len()
        )));
    }
    if i_max > a.kept() || i_max > b.kept() {
        return Err(invalid(format!("i_max = {i_max} exceeds recorded particles")));
    }
    let mut sup = 0.0f64;
    for s in 0..a.len() {
        let t = a.times[s];
        if t < window.0 - 1e-12 || t > window.1 + 1e-12 {
            continue;
        }
        for i in 1..=i_max {
            sup = sup.max((a.x(s, i) - b.x(s, i)).abs());
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingReport {
    pub pairs: Vec<(usize, usize)>,
    /// sup_diff[p][s]: pair p, seed s.
    pub sup_diff: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub i_max: usize,
    pub window: (f64, f64),
    pub seeds: Vec<u64>,
    /// Slope of log₂(median) against log₂(N).
    pub fitted_slope: Option<f64>,
    /// sup(N,4N) ≤ sup(N,2N) + sup(2N,4N) checked on every seed and rung.
    pub telescoping_violations: usize,
}

/// Sup-differences of one seed along a ladder of sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRow {
    pub seed: u64,
    /// sup_diff(N_k, N_{k+1}) for consecutive sizes.
    pub sup_diff: Vec<f64>,
    pub telescoping_violations: usize,
}

/// Consecutive entries of `runs` are compared; every triple is checked against
/// sup(N₁, N₃) ≤ sup(N₁, N₂) + sup(N₂, N₃).
pub fn ladder_row(seed: u64, runs: &[(usize, Trajectory)], i_max: usize, window: (f64, f64)) -> Result<LadderRow> {
    if runs.len() < 2 {
        return Err(invalid("a ladder needs at least two sizes"));
    }
    let sup_diff = runs
        .windows(2)
        .map(|w| sup_difference(&w[0].1, &w[1].1, i_max, window))
        .collect::<Result<Vec<_>>>()?;
    let mut telescoping_violations = 0;
    for (k, w) in runs.windows(3).enumerate() {
        let direct = sup_difference(&w[0].1, &w[2].1, i_max, window)?;
        if direct > sup_diff[k] + sup_diff[k + 1] {
            telescoping_violations += 1;
        }
    }
    Ok(LadderRow {
        seed,
        sup_diff,
        telescoping_violations,
    })
}

impl CouplingReport {
    /// Aggregates per-seed rows over the ladder `sizes` (rows in any order).
    pub fn from_rows(sizes: &[usize], mut rows: Vec<LadderRow>, i_max: usize, window: (f64, f64)) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InsufficientData("no seeds".into()));
        }
        rows.sort_by_key(|r| r.seed);
        let pairs: Vec<(usize, usize)> = sizes.windows(2).map(|w| (w[0], w[1])).collect();
        if rows.iter().any(|r| r.sup_diff.len() != pairs.len()) {
            return Err(invalid("rows do not match the ladder"));
        }
        let sup_diff: Vec<Vec<f64>> = (0..pairs.len())
            .map(|p| rows.iter().map(|r| r.sup_diff[p]).collect())
            .collect();
        let medians: Vec<f64> = sup_diff.iter().map(|v| median(v)).collect();
        let fitted_slope = if pairs.len() >= 2 && medians.iter().all(|&m| m > 0.0) {
            let lx: Vec<f64> = pairs.iter().map(|p| (p.0 as f64).log2()).collect();
            let ly: Vec<f64> = medians.iter().map(|m| m.log2()).collect();
            Some(ols(&lx, &ly)?.slope)
        } else {
            None
        };
        Ok(Self {
            pairs,
            sup_diff,
            medians,
            i_max,
            window,
            seeds: rows.iter().map(|r| r.seed).collect(),
            fitted_slope,
            telescoping_violations: rows.iter().map(|r| r.telescoping_violations).sum(),
        })
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.medians.windows(2).all(|w| w[1] < w[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CouplingConfig {
        CouplingConfig {
            duration: 0.05,
            t_burn: 0.05,
            dt_base: 1e-3,
            decimation: 5,
            ..CouplingConfig::default()
        }
    }

    #[test]
    fn equal_sizes_give_identical_paths() {
        let runs = coupled_run(&[64, 64], &small(), 3, 4).unwrap();
        let d = sup_difference(&runs[0].1, &runs[1].1, 4, (0.05, 0.1)).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn shift_gives_the_shift() {
        let runs = coupled_run(&[64], &small(), 3, 4).unwrap();
        let a = runs[0].1.clone();
        let mut b = a.clone();
        b.edge_offset += 0.25;
        let d = sup_difference(&a, &b, 4, (0.0, 1.0)).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
        let mut c = a.clone();
        c.steps.pop();
        assert!(matches!(sup_difference(&a, &c, 1, (0.0, 1.0)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn ladder_rows_and_report() {
        let cfg = small();
        let runs = coupled_run(&[64, 128, 256], &cfg, 2, 5).unwrap();
        let row = ladder_row(2, &runs, 2, (0.05, 0.1)).unwrap();
        assert_eq!(row.sup_diff.len(), 2);
        assert_eq!(row.telescoping_violations, 0);
        let report = CouplingReport::from_rows(&[64, 128, 256], vec![row.clone(), LadderRow { seed: 1, ..row }], 2, (0.05, 0.1)).unwrap();
        assert_eq!(report.seeds, vec![1, 2]);
        assert_eq!(report.pairs, vec![(64, 128), (128, 256)]);
        assert!(report.fitted_slope.is_some());
        assert!(ladder_row(0, &runs[..1], 2, (0.0, 1.0)).is_err());
    }

    #[test]
    fn first_record_is_after_burn_in() {
        let runs = coupled_run(&[64, 128], &small(), 1, 1).unwrap();
        assert_eq!(runs[0].1.steps, runs[1].1.steps);
        assert!((runs[0].1.times[0] - 0.05).abs() < 1e-12);
    }
}
