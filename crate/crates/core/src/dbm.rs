//! Full N-particle Dyson Brownian motion
//!
//! dλ_i = √(2/β) dB_i + Σ_{j≠i} 1/(λ_i − λ_j + ε_ij) dt − λ_i/(2N^{1/3}) dt,
//!
//! integrated on a base grid of width `dt_base` with ordering-preserving
//! rejection. Time is tracked as an integer base-step index so that runs of
//! different lengths land on the same grid points bit for bit.

use serde::{Deserialize, Serialize};

use crate::coupling::noise::NoiseSource;
use crate::error::{invalid, Result};
use crate::integrate::{add_interaction, DriftField, StepStats, Stepper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub lambdas: Vec<f64>,
    pub t: f64,
    pub n: usize,
    pub beta: f64,
}

impl ParticleState {
    pub fn new(lambdas: Vec<f64>, beta: f64) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(invalid("empty particle configuration"));
        }
        if !lambdas.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("particles must be strictly increasing"));
        }
        if !(beta >= 1.0) {
            return Err(invalid(format!("beta must be >= 1, got {beta}")));
        }
        Ok(Self {
            n: lambdas.len(),
            lambdas,
            t: 0.0,
            beta,
        })
    }

    pub fn edge_shift(&self) -> f64 {
        edge_shift(self.n)
    }

    /// x_i = λ_i + 2N^{2/3} (0-based index).
    pub fn x(&self, i: usize) -> f64 {
        self.lambdas[i] + self.edge_shift()
    }

    pub fn edge_view(&self) -> Vec<f64> {
        let s = self.edge_shift();
        self.lambdas.iter().map(|l| l + s).collect()
    }
}

/// 2N^{2/3}.
pub fn edge_shift(n: usize) -> f64 {
    2.0 * (n as f64).powf(2.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub epsilon: f64,
    pub dt_base: f64,
    pub dt_min: f64,
}

impl RegularizationConfig {
    /// ε = 10⁻⁸ N^{-1/3}, dt_min = dt_base/2¹⁰.
    pub fn for_n(n: usize, dt_base: f64) -> Self {
        Self {
            epsilon: 1e-8 * (n as f64).powf(-1.0 / 3.0),
            dt_base,
            dt_min: dt_base / 1024.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon must be finite and nonnegative"));
        }
        if !(self.dt_base > 0.0) || !(self.dt_min > 0.0) || self.dt_min > self.dt_base {
            return Err(invalid("need 0 < dt_min <= dt_base"));
        }
        self.max_level().map(|_| ())
    }

    /// Number of halvings from dt_base to dt_min; the ratio must be a power of two.
    pub fn max_level(&self) -> Result<u32> {
        let ratio = self.dt_base / self.dt_min;
        let level = ratio.log2().round();
        if !(0.0..=40.0).contains(&level) || (ratio / 2f64.powf(level) - 1.0).abs() > 1e-9 {
            return Err(invalid("dt_base/dt_min must be a power of two"));
        }
        Ok(level as u32)
    }
}

/// Snapshot sequence of a run. Stored values are `positions`; edge coordinates
/// are `positions + edge_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub beta: f64,
    pub dt_base: f64,
    pub edge_offset: f64,
    pub steps: Vec<u64>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub rejections: u64,
    pub floor_crossings: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Edge coordinate of particle i (1-based) at snapshot s.
    pub fn x(&self, s: usize, i: usize) -> f64 {
        self.positions[s][i - 1] + self.edge_offset
    }

    /// DBM coordinate λ_i = x_i − 2N^{2/3} (1-based).
    pub fn lambda(&self, s: usize, i: usize) -> f64 {
        self.x(s, i) - edge_shift(self.n)
    }

    pub fn kept(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Path of particle i in edge coordinates.
    pub fn x_path(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|s| self.x(s, i)).collect()
    }

    /// Path of particle i in λ coordinates.
    pub fn lambda_path(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|s| self.lambda(s, i)).collect()
    }
}

/// Which snapshots a run records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPlan {
    /// Record every `decimation` base steps.
    pub decimation: u64,
    /// Keep only the lowest `keep` particles (all when `None`).
    pub keep: Option<usize>,
    /// First base-step index that is recorded.
    pub record_from: u64,
}

impl SnapshotPlan {
    pub fn every(decimation: u64) -> Self {
        Self {
            decimation,
            keep: None,
            record_from: 0,
        }
    }
}

pub(crate) struct DbmField {
    pub eps: f64,
    pub confinement: f64,
    pub n: usize,
}

impl DriftField for DbmField {
    fn len(&self) -> usize {
        self.n
    }

    fn drift(&self, pos: &[f64], out: &mut [f64]) -> Result<()> {
        add_interaction(pos, self.eps, out);
        for (o, l) in out.iter_mut().zip(pos) {
            *o -= l * self.confinement;
        }
        Ok(())
    }
}

fn field_for(state: &ParticleState, reg: &RegularizationConfig) -> DbmField {
    DbmField {
        eps: reg.epsilon,
        confinement: 0.5 / (state.n as f64).cbrt(),
        n: state.n,
    }
}

/// Drift vector Σ_{j≠i} 1/(λ_i − λ_j + ε_ij) − λ_i/(2N^{1/3}).
pub fn drift(state: &ParticleState, reg: &RegularizationConfig) -> Vec<f64> {
    let mut out = vec![0.0; state.n];
    field_for(state, reg)
        .drift(&state.lambdas, &mut out)
        .expect("full drift is total");
    out
}

fn grid_position(t: f64, dt_base: f64) -> Result<u64> {
    let k = (t / dt_base).round();
    if k < 0.0 || (k * dt_base - t).abs() > 1e-9 * dt_base.max(t.abs()) {
        return Err(invalid(format!("time {t} is not on the base grid")));
    }
    Ok(k as u64)
}

/// Outcome of a single public step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepQuality {
    pub rejections: u64,
    pub floor_crossings: u64,
}

/// One Euler–Maruyama step of length dt = dt_base/2^ℓ starting at `state.t`.
pub fn step(
    state: &ParticleState,
    dt: f64,
    noise: &NoiseSource,
    reg: &RegularizationConfig,
) -> Result<(ParticleState, StepQuality)> {
    reg.validate()?;
    if !(dt > 0.0) {
        return Err(invalid("dt must be positive"));
    }
    if dt > reg.dt_base * (1.0 + 1e-12) {
        return Err(invalid("dt exceeds dt_base"));
    }
    if noise.dt_base != reg.dt_base {
        return Err(invalid("noise and regularization disagree on dt_base"));
    }
    let level_f = (reg.dt_base / dt).log2().round();
    let level = level_f as u32;
    if (reg.dt_base / 2f64.powf(level_f) - dt).abs() > 1e-12 * dt {
        return Err(invalid("dt must be dt_base / 2^l"));
    }
    let max_level = reg.max_level()?;
    if level > max_level {
        return Err(invalid("dt below dt_min"));
    }
    let sub = reg.dt_base / (1u64 << level) as f64;
    let idx = (state.t / sub).round();
    if idx < 0.0 || (idx * sub - state.t).abs() > 1e-9 * sub.max(state.t.abs()) {
        return Err(invalid("state time is not aligned to the step grid"));
    }
    let idx = idx as u64;
    let k = idx >> level;
    let p = idx & ((1u64 << level) - 1);

    let field = field_for(state, reg);
    let mut stepper = Stepper::new(&field, noise, (2.0 / state.beta).sqrt(), max_level);
    let mut pos = state.lambdas.clone();
    stepper.sub_step(&mut pos, k, level, p)?;
    let next = ParticleState {
        lambdas: pos,
        t: (idx + 1) as f64 * sub,
        n: state.n,
        beta: state.beta,
    };
    Ok((
        next,
        StepQuality {
            rejections: stepper.stats.rejections,
            floor_crossings: stepper.stats.floor_crossings,
        },
    ))
}

pub(crate) fn run<F: DriftField>(
    field: &F,
    initial: &[f64],
    t0: f64,
    duration: f64,
    noise: &NoiseSource,
    reg: &RegularizationConfig,
    beta: f64,
    plan: &SnapshotPlan,
) -> Result<(Trajectory, StepStats)> {
    reg.validate()?;
    if noise.dt_base != reg.dt_base {
        return Err(invalid("noise and regularization disagree on dt_base"));
    }
    if !(duration >= 0.0) {
        return Err(invalid("duration must be nonnegative"));
    }
    if plan.decimation == 0 {
        return Err(invalid("decimation must be at least 1"));
    }
    let k0 = grid_position(t0, reg.dt_base)?;
    let n_steps = grid_position(duration, reg.dt_base)?;
    let keep = plan.keep.unwrap_or(initial.len()).min(initial.len());
    let mut stepper = Stepper::new(field, noise, (2.0 / beta).sqrt(), reg.max_level()?);
    let mut pos = initial.to_vec();
    let mut traj = Trajectory {
        n: 0,
        beta,
        dt_base: reg.dt_base,
        edge_offset: 0.0,
        steps: Vec::new(),
        times: Vec::new(),
        positions: Vec::new(),
        rejections: 0,
        floor_crossings: 0,
    };
    let record = |traj: &mut Trajectory, k: u64, pos: &[f64]| {
        let rel = k - k0;
        if k >= plan.record_from && ((rel % plan.decimation == 0) || rel == n_steps) {
            traj.steps.push(k);
            traj.times.push(k as f64 * reg.dt_base);
            traj.positions.push(pos[..keep].to_vec());
        }
    };
    record(&mut traj, k0, &pos);
    for k in k0..k0 + n_steps {
        stepper.base_step(&mut pos, k)?;
        record(&mut traj, k + 1, &pos);
    }
    traj.rejections = stepper.stats.rejections;
    traj.floor_crossings = stepper.stats.floor_crossings;
    Ok((traj, stepper.stats))
}

/// Integrates over [t, t+T] and records a snapshot every `decimation` base steps.
pub fn simulate(
    initial: &ParticleState,
    duration: f64,
    noise: &NoiseSource,
    reg: &RegularizationConfig,
    decimation: u64,
) -> Result<Trajectory> {
    simulate_with(initial, duration, noise, reg, &SnapshotPlan::every(decimation))
}

pub fn simulate_with(
    initial: &ParticleState,
    duration: f64,
    noise: &NoiseSource,
    reg: &RegularizationConfig,
    plan: &SnapshotPlan,
) -> Result<Trajectory> {
    let field = field_for(initial, reg);
    let (mut traj, _) = run(
        &field,
        &initial.lambdas,
        initial.t,
        duration,
        noise,
        reg,
        initial.beta,
        plan,
    )?;
    traj.n = initial.n;
    traj.edge_offset = edge_shift(initial.n);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg(dt: f64) -> RegularizationConfig {
        RegularizationConfig {
            epsilon: 0.0,
            dt_base: dt,
            dt_min: dt / 1024.0,
        }
    }

    #[test]
    fn drift_examples() {
        let s = ParticleState::new(vec![4.0], 2.0).unwrap();
        assert_eq!(drift(&s, &reg(1e-3)), vec![-2.0]);
        let s = ParticleState::new(vec![-1.0, 1.0], 2.0).unwrap();
        let d = drift(&s, &reg(1e-3));
        // −1/2 from the pair, +1/(2·2^{1/3}) from the confinement
        let expected = -0.5 + 1.0 / (2.0 * 2f64.cbrt());
        assert!((d[0] - expected).abs() < 1e-15);
        assert!((d[1] + expected).abs() < 1e-15);
        assert!((d[0] + 0.103_150_5).abs() < 1e-6);
    }

    #[test]
    fn zero_duration_is_initial_snapshot() {
        let s = ParticleState::new(vec![-1.0, 0.5, 2.0], 2.0).unwrap();
        let r = reg(1e-3);
        let traj = simulate(&s, 0.0, &NoiseSource::new(1, 1e-3), &r, 1).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.positions[0], s.lambdas);
    }

    #[test]
    fn step_is_deterministic_and_matches_simulate() {
        let s = ParticleState::new(vec![-3.0, -1.0, 0.5, 2.0], 1.0).unwrap();
        let r = reg(1e-2);
        let ns = NoiseSource::new(5, 1e-2);
        let (a, _) = step(&s, 1e-2, &ns, &r).unwrap();
        let (b, _) = step(&s, 1e-2, &ns, &r).unwrap();
        assert_eq!(a, b);
        let traj = simulate(&s, 1e-2, &ns, &r, 1).unwrap();
        assert_eq!(traj.positions[1], a.lambdas);
        assert!(step(&s, 3e-3, &ns, &r).is_err());
        assert!(step(&s, 0.0, &ns, &r).is_err());
    }

    #[test]
    fn half_steps_use_bridge_noise() {
        // two half steps under zero drift must reproduce the full increment exactly
        let s = ParticleState::new(vec![0.0], 2.0).unwrap();
        let r = reg(1e-2);
        let ns = NoiseSource::new(9, 1e-2);
        let (h1, _) = step(&s, 5e-3, &ns, &r).unwrap();
        let (h2, _) = step(&h1, 5e-3, &ns, &r).unwrap();
        let (full, _) = step(&s, 1e-2, &ns, &r).unwrap();
        // drift −λ/(2N^{1/3}) differs between the paths only at O(dt·λ)
        assert!((h2.lambdas[0] - full.lambdas[0]).abs() < 1e-3);
        assert!((h2.t - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn pure_drift_gap_grows() {
        let s = ParticleState::new(vec![-0.05, 0.05], 2.0).unwrap();
        let field = field_for(&s, &reg(1e-4));
        let mut pos = s.lambdas.clone();
        let mut gap = pos[1] - pos[0];
        let mut d = vec![0.0; 2];
        for _ in 0..1000 {
            d.iter_mut().for_each(|v| *v = 0.0);
            field.drift(&pos, &mut d).unwrap();
            pos[0] += d[0] * 1e-4;
            pos[1] += d[1] * 1e-4;
            let g = pos[1] - pos[0];
            assert!(g > gap);
            gap = g;
        }
    }

    #[test]
    fn rejection_keeps_ordering() {
        // gaps comparable to one-step noise; tiny gaps would be pushed apart by the drift
        let lambdas: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        let s = ParticleState::new(lambdas, 1.0).unwrap();
        let r = RegularizationConfig {
            epsilon: 1e-10,
            dt_base: 1e-2,
            dt_min: 1e-2 / 1024.0,
        };
        let traj = simulate(&s, 1.0, &NoiseSource::new(2, 1e-2), &r, 1).unwrap();
        assert!(traj.rejections > 0);
        for p in &traj.positions {
            assert!(p.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn regularization_validation() {
        let mut r = reg(1e-3);
        assert!(r.validate().is_ok());
        assert_eq!(r.max_level().unwrap(), 10);
        r.dt_min = 3e-4;
        assert!(r.validate().is_err());
        assert!(ParticleState::new(vec![1.0, 1.0], 2.0).is_err());
        assert!(ParticleState::new(vec![1.0], 0.5).is_err());
    }
}
