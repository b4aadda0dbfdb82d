//! Tracy–Widom_β samples from a finite-difference stochastic Airy operator
//!
//! H_β = −d²/dx² + x + (2/√β) b'(x) on [0, L] with Dirichlet ends. On the grid
//! x_i = i h the white noise is averaged per cell, giving a diagonal term of
//! variance 4/(β h). The returned value is −(smallest eigenvalue).

use serde::{Deserialize, Serialize};

use crate::coupling::noise::{domain, NoiseSource};
use crate::error::{invalid, Result};
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaoConfig {
    pub length: f64,
    pub h: f64,
    /// `f64::INFINITY` switches the noise off.
    pub beta: f64,
}

impl Default for SaoConfig {
    fn default() -> Self {
        Self {
            length: 20.0,
            h: 0.005,
            beta: 2.0,
        }
    }
}

impl SaoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length >= 10.0) {
            return Err(invalid("SAO domain length must be at least 10"));
        }
        if !(self.h > 0.0 && self.h <= 0.01 * self.length) {
            return Err(invalid("SAO grid spacing must satisfy 0 < h <= L/100"));
        }
        if !(self.beta > 0.0) {
            return Err(invalid("beta must be positive"));
        }
        Ok(())
    }

    fn interior_points(&self) -> usize {
        (self.length / self.h).round() as usize - 1
    }
}

pub fn sample_tw(config: &SaoConfig, seed: u64) -> Result<f64> {
    config.validate()?;
    let m = config.interior_points();
    let h = config.h;
    let noise = NoiseSource::with_domain(seed, 1.0, domain::SAO);
    let amp = if config.beta.is_finite() {
        2.0 / (config.beta.sqrt() * h.sqrt())
    } else {
        0.0
    };
    let diag: Vec<f64> = (1..=m)
        .map(|i| {
            let z = if amp == 0.0 { 0.0 } else { noise.gaussian(i, 0, 0, 0) };
            2.0 / (h * h) + i as f64 * h + amp * z
        })
        .collect();
    let off = vec![-1.0 / (h * h); m - 1];
    let lowest = tridiag::smallest_eigenvalues(&diag, &off, 1);
    Ok(-lowest[0])
}
