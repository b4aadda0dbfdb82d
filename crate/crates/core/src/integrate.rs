//! Euler–Maruyama stepping with ordering-preserving rejection.
//!
//! A proposal that breaks the strict ordering is discarded and the interval is
//! retried as two halves whose noise comes from the Brownian bridge of the
//! rejected increment, down to `max_level` halvings. Crossings that survive at
//! the floor are resolved by sorting and counted. Fields may declare further
//! inadmissible states, which are refined the same way.

use crate::coupling::noise::NoiseSource;
use crate::error::{Error, Result};

pub(crate) trait DriftField {
    fn len(&self) -> usize;
    fn drift(&self, pos: &[f64], out: &mut [f64]) -> Result<()>;
    /// Rejects states the field cannot be evaluated at.
    fn validate(&self, _pos: &[f64]) -> Result<()> {
        Ok(())
    }
    /// Proposals failing this are refined like ordering violations.
    fn admissible(&self, _pos: &[f64]) -> bool {
        true
    }
    /// Makes a sorted floor-level proposal admissible if the field knows how.
    /// Returns the number of particles moved.
    fn repair(&self, _pos: &mut [f64]) -> usize {
        0
    }
}

/// Pairwise repulsion Σ_{j≠i} 1/(p_i − p_j + ε_ij), ε_ij = +ε for i > j and −ε for i < j.
///
/// Added into `out`. Each pair is computed once so the forces are exactly antisymmetric.
pub(crate) fn add_interaction(pos: &[f64], eps: f64, out: &mut [f64]) {
    let n = pos.len();
    for i in 0..n {
        let pi = pos[i] - eps;
        let rest = &pos[i + 1..];
        let out_rest = &mut out[i + 1..];
        let mut lanes = [0.0f64; 4];
        let mut chunks = rest.chunks_exact(4);
        let mut out_chunks = out_rest.chunks_exact_mut(4);
        for (p, o) in (&mut chunks).zip(&mut out_chunks) {
            for l in 0..4 {
                let f = 1.0 / (pi - p[l]);
                lanes[l] += f;
                o[l] -= f;
            }
        }
        let mut acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
        for (p, o) in chunks.remainder().iter().zip(out_chunks.into_remainder()) {
            let f = 1.0 / (pi - p);
            acc += f;
            *o -= f;
        }
        out[i] += acc;
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepStats {
    pub rejections: u64,
    pub floor_crossings: u64,
    pub deepest_level: u32,
}

pub(crate) struct Stepper<'a, F: DriftField> {
    pub field: &'a F,
    pub noise: &'a NoiseSource,
    pub sigma: f64,
    pub max_level: u32,
    pub stats: StepStats,
    drift_buf: Vec<f64>,
}

fn strictly_increasing(p: &[f64]) -> bool {
    p.iter().all(|v| v.is_finite()) && p.windows(2).all(|w| w[0] < w[1])
}

impl<'a, F: DriftField> Stepper<'a, F> {
    pub fn new(field: &'a F, noise: &'a NoiseSource, sigma: f64, max_level: u32) -> Self {
        Self {
            field,
            noise,
            sigma,
            max_level,
            stats: StepStats::default(),
            drift_buf: vec![0.0; field.len()],
        }
    }

    /// Advances `pos` across base interval k.
    pub fn base_step(&mut self, pos: &mut [f64], k: u64) -> Result<()> {
        self.sub_step(pos, k, 0, 0)
    }

    /// Advances `pos` across sub-interval `p` of length dt_base/2^level inside base interval k.
    pub fn sub_step(&mut self, pos: &mut [f64], k: u64, level: u32, p: u64) -> Result<()> {
        let db: Vec<f64> = (0..pos.len())
            .map(|i| self.noise.sub_increment(i + 1, k, level, p))
            .collect();
        self.advance(pos, k, level, p, &db)?;
        self.field.validate(pos)
    }

    fn advance(&mut self, pos: &mut [f64], k: u64, level: u32, p: u64, db: &[f64]) -> Result<()> {
        let h = self.noise.dt_base / (1u64 << level) as f64;
        let mut drift = std::mem::take(&mut self.drift_buf);
        drift.iter_mut().for_each(|d| *d = 0.0);
        let res = self.field.drift(pos, &mut drift);
        if let Err(e) = res {
            self.drift_buf = drift;
            return Err(e);
        }
        let proposal: Vec<f64> = pos
            .iter()
            .zip(&drift)
            .zip(db)
            .map(|((x, d), b)| x + d * h + self.sigma * b)
            .collect();
        self.drift_buf = drift;
        self.stats.deepest_level = self.stats.deepest_level.max(level);
        if strictly_increasing(&proposal) && self.field.admissible(&proposal) {
            pos.copy_from_slice(&proposal);
            return Ok(());
        }
        if level >= self.max_level {
            if proposal.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite state at base interval {k}, level {level}"
                )));
            }
            let crossings = proposal.windows(2).filter(|w| w[0] >= w[1]).count();
            self.stats.floor_crossings += crossings as u64;
            pos.copy_from_slice(&proposal);
            pos.sort_by(f64::total_cmp);
            self.stats.floor_crossings += self.field.repair(pos) as u64;
            return Ok(());
        }
        self.stats.rejections += 1;
        let child = level + 1;
        let (left, right): (Vec<f64>, Vec<f64>) = db
            .iter()
            .enumerate()
            .map(|(i, &d)| self.noise.split(i + 1, k, child, p, d))
            .unzip();
        self.advance(pos, k, child, 2 * p, &left)?;
        self.advance(pos, k, child, 2 * p + 1, &right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interaction_is_antisymmetric() {
        let pos: Vec<f64> = (0..37).map(|i| (i as f64).powf(1.3) - 5.0).collect();
        let mut out = vec![0.0; pos.len()];
        add_interaction(&pos, 0.0, &mut out);
        let s: f64 = out.iter().sum();
        assert!(s.abs() < 1e-12, "{s}");
        // brute force with the explicit ε_ij convention
        let eps = 1e-3;
        let mut fast = vec![0.0; pos.len()];
        add_interaction(&pos, eps, &mut fast);
        for i in 0..pos.len() {
            let mut f = 0.0;
            for j in 0..pos.len() {
                if j != i {
                    let e = if i > j { eps } else { -eps };
                    f += 1.0 / (pos[i] - pos[j] + e);
                }
            }
            assert!((f - fast[i]).abs() < 1e-12);
        }
    }
}
