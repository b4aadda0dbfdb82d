//! Top-K window dynamics at the lower edge.
//!
//! The lowest K particles interact explicitly. Particles beyond the cutoff
//! γ_c are replaced by the deterministic integral of ν^{(x)} over [γ_c, ∞),
//! and the constant N^{1/3} restores the confinement balance:
//!
//! dx_j = √(2/β) dB_j + [Σ_{k≠j, k≤K} 1/(x_j − x_k + ε_jk) + ∫_{γ_c} ν^{(x)}(x)/(x_j − x) dx + N^{1/3}] dt.
//!
//! Interactions use the window's own particles, so the system is closed and
//! can run without a full simulation alongside it.
//!
//! Closed this way, particles K+1..⌊K + K^{δ_c}⌋ are simply missing and the top
//! of the window drifts into the cutoff. [`Closure::Ghosts`] fills that gap with
//! fixed charges at the classical locations γ_{K+1}, …, γ_c, which also act as a
//! barrier for particle K.
//!
//! The drift above leaves out the confinement −x_j/(2N^{1/3}). That is harmless
//! while x_j = O(K^{2/3}) ≪ N^{1/3}, but for K ~ N^{1/2} it shifts the whole window
//! upward by O(1); [`EdgeWindow::with_confinement_term`] puts it back.

use serde::{Deserialize, Serialize};

use crate::coupling::noise::NoiseSource;
use crate::dbm::{run, RegularizationConfig, SnapshotPlan, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::integrate::{add_interaction, DriftField};
use crate::semicircle::SemicircleModel;

const CHEB_DEGREE: usize = 24;
const TAIL_TOL: f64 = 1e-6;
const TAIL_QUAD_TOL: f64 = 1e-12;

/// Piecewise Chebyshev interpolant of a smooth function on [lo, hi].
#[derive(Debug, Clone)]
struct Chebyshev {
    breaks: Vec<f64>,
    coeffs: Vec<[f64; CHEB_DEGREE + 1]>,
}

fn cheb_fit(a: f64, b: f64, f: &impl Fn(f64) -> f64) -> [f64; CHEB_DEGREE + 1] {
    let m = CHEB_DEGREE + 1;
    let values: Vec<f64> = (0..m)
        .map(|k| {
            let t = (std::f64::consts::PI * (k as f64 + 0.5) / m as f64).cos();
            f(0.5 * (a + b) + 0.5 * (b - a) * t)
        })
        .collect();
    let mut c = [0.0; CHEB_DEGREE + 1];
    for (j, cj) in c.iter_mut().enumerate() {
        let s: f64 = values
            .iter()
            .enumerate()
            .map(|(k, v)| v * (std::f64::consts::PI * j as f64 * (k as f64 + 0.5) / m as f64).cos())
            .sum();
        *cj = 2.0 * s / m as f64;
    }
    c[0] *= 0.5;
    c
}

fn cheb_eval(c: &[f64; CHEB_DEGREE + 1], a: f64, b: f64, x: f64) -> f64 {
    let t = (2.0 * x - a - b) / (b - a);
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c[0]
}

impl Chebyshev {
    /// Panels graded geometrically toward `hi`, where f has a log singularity just beyond.
    fn build(lo: f64, hi: f64, singular_at: f64, f: &impl Fn(f64) -> f64) -> Self {
        let mut seeds = vec![hi];
        let mut d = singular_at - hi;
        while singular_at - 2.0 * d > lo {
            d *= 2.0;
            seeds.push(singular_at - d);
        }
        seeds.push(lo);
        seeds.reverse();
        let mut breaks = vec![lo];
        let mut coeffs = Vec::new();
        for w in seeds.windows(2) {
            Self::refine(w[0], w[1], f, &mut breaks, &mut coeffs, 0);
        }
        Self { breaks, coeffs }
    }

    fn refine(
        a: f64,
        b: f64,
        f: &impl Fn(f64) -> f64,
        breaks: &mut Vec<f64>,
        coeffs: &mut Vec<[f64; CHEB_DEGREE + 1]>,
        depth: u32,
    ) {
        let c = cheb_fit(a, b, f);
        let ok = (1..8).all(|k| {
            let x = a + (b - a) * (k as f64 - 0.37) / 7.0;
            (cheb_eval(&c, a, b, x) - f(x)).abs() <= 0.25 * TAIL_TOL
        });
        if ok || depth >= 20 {
            breaks.push(b);
            coeffs.push(c);
        } else {
            let m = 0.5 * (a + b);
            Self::refine(a, m, f, breaks, coeffs, depth + 1);
            Self::refine(m, b, f, breaks, coeffs, depth + 1);
        }
    }

    fn lo(&self) -> f64 {
        self.breaks[0]
    }

    fn hi(&self) -> f64 {
        *self.breaks.last().expect("non-empty")
    }

    fn eval(&self, x: f64) -> f64 {
        let idx = self.breaks.partition_point(|&b| b <= x).clamp(1, self.coeffs.len());
        let (a, b) = (self.breaks[idx - 1], self.breaks[idx]);
        cheb_eval(&self.coeffs[idx - 1], a, b, x)
    }
}

/// Replacement for the particles above the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailKind {
    /// ∫_{γ_c} ν^{(x)}(x)/(a − x) dx.
    MeanField,
    /// −a/(2N^{1/3}): the window is the whole system and the dynamics is exactly DBM.
    Confinement,
}

/// How the window is closed between particle K and γ_c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Nothing between particle K and γ_c.
    Bare,
    /// Fixed charges at γ_{K+1}, …, γ_c.
    Ghosts,
}

#[derive(Debug, Clone)]
enum Tail {
    MeanField {
        interp: Chebyshev,
        model: SemicircleModel,
    },
    Confinement,
}

#[derive(Debug, Clone)]
pub struct EdgeWindow {
    pub k: usize,
    pub delta_c: f64,
    pub gamma_c: f64,
    pub n_effective: usize,
    pub beta: f64,
    pub reg: RegularizationConfig,
    /// Set when K exceeds N^{1/10}.
    pub outside_proven_regime: bool,
    pub closure: Closure,
    /// Adds −x_j/(2N^{1/3}) to the mean-field drift.
    pub confinement_term: bool,
    ghosts: Vec<f64>,
    tail: Tail,
}

impl EdgeWindow {
    /// Window of the lowest K particles with cutoff γ_c = γ^{(x)}_{max(K+2, ⌊K + K^{δ_c}⌋)}.
    pub fn mean_field(
        k: usize,
        n_effective: usize,
        beta: f64,
        delta_c: f64,
        reg: RegularizationConfig,
    ) -> Result<Self> {
        Self::check(k, n_effective, beta, &reg)?;
        if !(delta_c > 0.0 && delta_c < 1.0) {
            return Err(invalid("delta_c must lie in (0, 1)"));
        }
        let buffer = ((k as f64 + (k as f64).powf(delta_c)).floor() as usize).max(k + 2);
        if buffer > n_effective {
            return Err(invalid(format!(
                "cutoff index {buffer} exceeds N = {n_effective}; use the confinement tail"
            )));
        }
        let model = SemicircleModel::default();
        let gamma_c = model.edge_quantile(buffer, n_effective)?;
        let ghosts = (k + 1..=buffer)
            .map(|j| model.edge_quantile(j, n_effective))
            .collect::<Result<Vec<_>>>()?;
        let lo = model.edge_quantile(1, n_effective)? - 10.0;
        let gap = gamma_c - model.edge_quantile(k, n_effective)?;
        let hi = gamma_c - 1e-3 * gap.min(1.0);
        let f = |a: f64| model.mean_field_tail_tol(a, gamma_c, n_effective, TAIL_QUAD_TOL);
        let interp = Chebyshev::build(lo, hi, gamma_c, &f);
        Ok(Self {
            k,
            delta_c,
            gamma_c,
            n_effective,
            beta,
            reg,
            outside_proven_regime: (k as f64) > (n_effective as f64).powf(0.1),
            closure: Closure::Bare,
            confinement_term: false,
            ghosts,
            tail: Tail::MeanField { interp, model },
        })
    }

    /// Same window with a different closure. The confinement window has nothing to close.
    pub fn with_closure(mut self, closure: Closure) -> Self {
        if self.tail_kind() == TailKind::MeanField {
            self.closure = closure;
        }
        self
    }

    /// Same window with or without −x_j/(2N^{1/3}) in the mean-field drift.
    pub fn with_confinement_term(mut self, on: bool) -> Self {
        if self.tail_kind() == TailKind::MeanField {
            self.confinement_term = on;
        }
        self
    }

    /// Upper limit for the window particles: γ_c, or the lowest ghost.
    pub fn barrier(&self) -> f64 {
        match self.closure {
            Closure::Bare => self.gamma_c,
            Closure::Ghosts => self.ghosts.first().copied().unwrap_or(self.gamma_c),
        }
    }

    /// Moves particles at or above the barrier to evenly spaced points between the
    /// highest admissible particle and the barrier. Returns the number moved.
    pub fn admit(&self, initial: &mut [f64]) -> usize {
        let barrier = self.barrier();
        let ok = initial.partition_point(|&x| x < barrier);
        let moved = initial.len() - ok;
        if moved > 0 {
            let lo = if ok > 0 { initial[ok - 1] } else { barrier - 1.0 };
            for (j, x) in initial[ok..].iter_mut().enumerate() {
                *x = lo + (barrier - lo) * (j + 1) as f64 / (moved + 1) as f64;
            }
        }
        moved
    }

    /// Classical locations γ_{K+1}, …, γ_c (empty for the confinement window).
    pub fn ghost_positions(&self) -> &[f64] {
        &self.ghosts
    }

    /// Window covering all N particles with the exact confinement force; γ_c = +∞.
    pub fn confinement(n: usize, beta: f64, reg: RegularizationConfig) -> Result<Self> {
        Self::check(n, n, beta, &reg)?;
        Ok(Self {
            k: n,
            delta_c: 0.0,
            gamma_c: f64::INFINITY,
            n_effective: n,
            beta,
            reg,
            outside_proven_regime: true,
            closure: Closure::Bare,
            confinement_term: false,
            ghosts: Vec::new(),
            tail: Tail::Confinement,
        })
    }

    fn check(k: usize, n: usize, beta: f64, reg: &RegularizationConfig) -> Result<()> {
        reg.validate()?;
        if k < 1 || k > n {
            return Err(invalid(format!("need 1 <= K <= N, got K={k}, N={n}")));
        }
        if !(beta >= 1.0) {
            return Err(invalid("beta must be >= 1"));
        }
        Ok(())
    }

    pub fn tail_kind(&self) -> TailKind {
        match self.tail {
            Tail::MeanField { .. } => TailKind::MeanField,
            Tail::Confinement => TailKind::Confinement,
        }
    }

    /// The tail contribution at edge coordinate a (below γ_c).
    pub fn tail(&self, a: f64) -> f64 {
        match &self.tail {
            Tail::MeanField { interp, model } => {
                if a >= interp.lo() && a <= interp.hi() {
                    interp.eval(a)
                } else {
                    model.mean_field_tail_tol(a, self.gamma_c, self.n_effective, TAIL_QUAD_TOL)
                }
            }
            Tail::Confinement => -a / (2.0 * (self.n_effective as f64).cbrt()),
        }
    }

    fn field(&self) -> WindowField<'_> {
        WindowField { window: self }
    }
}

struct WindowField<'a> {
    window: &'a EdgeWindow,
}

impl DriftField for WindowField<'_> {
    fn len(&self) -> usize {
        self.window.k
    }

    fn drift(&self, pos: &[f64], out: &mut [f64]) -> Result<()> {
        self.validate(pos)?;
        add_interaction(pos, self.window.reg.epsilon, out);
        let shift = (self.window.n_effective as f64).cbrt();
        let ghosts: &[f64] = match self.window.closure {
            Closure::Bare => &[],
            Closure::Ghosts => &self.window.ghosts,
        };
        let confine = if self.window.confinement_term { 0.5 / shift } else { 0.0 };
        for (o, &x) in out.iter_mut().zip(pos) {
            *o += self.window.tail(x) + shift - confine * x;
            *o += ghosts.iter().map(|g| 1.0 / (x - g)).sum::<f64>();
        }
        Ok(())
    }

    fn validate(&self, pos: &[f64]) -> Result<()> {
        let barrier = self.window.barrier();
        match pos.iter().position(|&x| !(x < barrier)) {
            None => Ok(()),
            Some(j) => Err(Error::WindowViolation {
                index: j + 1,
                position: pos[j],
                gamma_c: self.window.gamma_c,
            }),
        }
    }

    fn admissible(&self, pos: &[f64]) -> bool {
        pos.last().is_none_or(|&x| x < self.window.barrier())
    }

    fn repair(&self, pos: &mut [f64]) -> usize {
        match self.window.closure {
            Closure::Bare => 0,
            Closure::Ghosts => self.window.admit(pos),
        }
    }
}

/// Drift of the window dynamics at `state` (edge coordinates, ascending).
pub fn cutoff_drift(state: &[f64], window: &EdgeWindow) -> Result<Vec<f64>> {
    if state.len() != window.k {
        return Err(invalid(format!("expected {} particles, got {}", window.k, state.len())));
    }
    let mut out = vec![0.0; window.k];
    window.field().drift(state, &mut out)?;
    Ok(out)
}

/// Integrates the window from time 0 over [0, T], particle j driven by B_j.
pub fn simulate_window(
    initial: &[f64],
    duration: f64,
    noise: &NoiseSource,
    window: &EdgeWindow,
    decimation: u64,
) -> Result<Trajectory> {
    simulate_window_with(initial, 0.0, duration, noise, window, &SnapshotPlan::every(decimation))
}

pub fn simulate_window_with(
    initial: &[f64],
    t0: f64,
    duration: f64,
    noise: &NoiseSource,
    window: &EdgeWindow,
    plan: &SnapshotPlan,
) -> Result<Trajectory> {
    if initial.len() != window.k {
        return Err(invalid(format!("expected {} particles, got {}", window.k, initial.len())));
    }
    if !initial.windows(2).all(|w| w[0] < w[1]) {
        return Err(invalid("initial window must be strictly increasing"));
    }
    let field = window.field();
    field.validate(initial)?;
    let (mut traj, _) = run(&field, initial, t0, duration, noise, &window.reg, window.beta, plan)?;
    traj.n = window.n_effective;
    traj.edge_offset = 0.0;
    Ok(traj)
}
