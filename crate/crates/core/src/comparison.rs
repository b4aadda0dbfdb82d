//! Parabolic comparison operator of two coupled edge windows.
//!
//! For ordered windows x, y below γ_c,
//!
//!   B_ij = 1/((x_i − x_j + ε_ij)(y_i − y_j + ε_ij)),   W_i = ∫_{γ_c} ν^{(x)}(x) dx/((x_i − x)(y_i − x)),
//!
//! and (𝒜w)_i = Σ_j B_ij (w_j − w_i) − W_i w_i. The short-range part 𝒮 keeps
//! B_ij for |i − j| ≤ ℓ = K^{2/3+ε_ℓ} together with W; the rest is ℛ.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::semicircle::SemicircleModel;
use crate::stats::regression::{ols, t95};

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonOperator {
    pub k: usize,
    /// Row-major K×K, zero diagonal.
    pub b: Vec<f64>,
    pub w: Vec<f64>,
    pub ell: f64,
    pub eps_ell: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Full,
    Short,
    Long,
}

impl ComparisonOperator {
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.b[i * self.k + j]
    }

    fn keeps(&self, part: Part, i: usize, j: usize) -> bool {
        let short = (i.abs_diff(j) as f64) <= self.ell;
        match part {
            Part::Full => true,
            Part::Short => short,
            Part::Long => !short,
        }
    }

    /// (𝒜w), (𝒮w) or (ℛw).
    pub fn apply(&self, part: Part, w: &[f64]) -> Vec<f64> {
        let k = self.k;
        (0..k)
            .map(|i| {
                let row = &self.b[i * k..(i + 1) * k];
                let mut s = 0.0;
                for (j, &bij) in row.iter().enumerate() {
                    if j != i && self.keeps(part, i, j) {
                        s += bij * (w[j] - w[i]);
                    }
                }
                if part != Part::Long {
                    s -= self.w[i] * w[i];
                }
                s
            })
            .collect()
    }

    /// Dense matrix of the chosen part.
    pub fn matrix(&self, part: Part) -> Vec<f64> {
        let k = self.k;
        let mut m = vec![0.0; k * k];
        for i in 0..k {
            let mut diag = if part == Part::Long { 0.0 } else { -self.w[i] };
            for j in 0..k {
                if j != i && self.keeps(part, i, j) {
                    m[i * k + j] = self.b(i, j);
                    diag -= self.b(i, j);
                }
            }
            m[i * k + i] = diag;
        }
        m
    }

    /// max_j Σ_{|k−j|>ℓ} |B_jk|.
    pub fn long_range_row_sum(&self) -> f64 {
        (0..self.k)
            .map(|i| {
                (0..self.k)
                    .filter(|&j| j != i && self.keeps(Part::Long, i, j))
                    .map(|j| self.b(i, j).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest Σ_j B_ij + W_i over rows of the chosen part.
    fn max_rate(&self, part: Part) -> f64 {
        (0..self.k)
            .map(|i| {
                let off: f64 = (0..self.k)
                    .filter(|&j| j != i && self.keeps(part, i, j))
                    .map(|j| self.b(i, j))
                    .sum();
                off + if part == Part::Long { 0.0 } else { self.w[i] }
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled_killing(&self, factor: f64) -> Self {
        let mut o = self.clone();
        o.w.iter_mut().for_each(|w| *w *= factor);
        o
    }

    pub fn with_ell(&self, ell: f64) -> Self {
        let mut o = self.clone();
        o.ell = ell;
        o
    }
}

fn eps_sign(i: usize, j: usize, eps: f64) -> f64 {
    if i > j {
        eps
    } else {
        -eps
    }
}

pub fn build_coefficients(
    x: &[f64],
    y: &[f64],
    gamma_c: f64,
    n: usize,
    epsilon: f64,
    eps_ell: f64,
) -> Result<ComparisonOperator> {
    let k = x.len();
    if k == 0 || y.len() != k {
        return Err(invalid("windows must be non-empty and of equal size"));
    }
    if !(eps_ell > 0.0 && eps_ell < 1.0 / 6.0) {
        return Err(invalid("eps_ell must lie in (0, 1/6)"));
    }
    for state in [x, y] {
        if !state.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("windows must be strictly increasing"));
        }
        if let Some(j) = state.iter().position(|&v| !(v < gamma_c)) {
            return Err(Error::WindowViolation {
                index: j + 1,
                position: state[j],
                gamma_c,
            });
        }
    }
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let e = eps_sign(i, j, epsilon);
                b[i * k + j] = 1.0 / ((x[i] - x[j] + e) * (y[i] - y[j] + e));
            }
        }
    }
    let model = SemicircleModel::default();
    let w = (0..k)
        .map(|i| model.edge_measure_integral(gamma_c, n, |s| 1.0 / ((x[i] - s) * (y[i] - s))))
        .collect();
    Ok(ComparisonOperator {
        k,
        b,
        w,
        ell: (k as f64).powf(2.0 / 3.0 + eps_ell),
        eps_ell,
    })
}

/// Fit of W_i against b·K^{1/3}/((K+1)^{2/3} − i^{2/3}).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KillingShape {
    /// Log-minimax fit of b: the constant that balances the extreme ratios.
    pub b: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Every W_i within a factor 2 of the fitted shape.
    pub within_factor_two: bool,
}

pub fn killing_shape(op: &ComparisonOperator) -> KillingShape {
    let k = op.k as f64;
    let shape = |i: usize| k.cbrt() / ((k + 1.0).powf(2.0 / 3.0) - (i as f64).powf(2.0 / 3.0));
    let raw: Vec<f64> = (1..=op.k).map(|i| op.w[i - 1] / shape(i)).collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(0.0, f64::max);
    let b = (lo * hi).sqrt();
    let ratios: Vec<f64> = (1..=op.k).map(|i| op.w[i - 1] / (b * shape(i))).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    KillingShape {
        b,
        min_ratio,
        max_ratio,
        within_factor_two: min_ratio >= 0.5 && max_ratio <= 2.0,
    }
}

/// Coefficients along time: frozen, or piecewise constant between sample times.
#[derive(Debug, Clone)]
pub enum OperatorPath {
    Frozen(ComparisonOperator),
    Sampled {
        times: Vec<f64>,
        ops: Vec<ComparisonOperator>,
    },
}

impl OperatorPath {
    fn k(&self) -> usize {
        match self {
            OperatorPath::Frozen(op) => op.k,
            OperatorPath::Sampled { ops, .. } => ops[0].k,
        }
    }

    /// Operator in force at time u and the end of its constancy interval.
    fn at(&self, u: f64) -> (&ComparisonOperator, f64) {
        match self {
            OperatorPath::Frozen(op) => (op, f64::INFINITY),
            OperatorPath::Sampled { times, ops } => {
                let idx = times.partition_point(|&t| t <= u).saturating_sub(1);
                let end = times.get(idx + 1).copied().unwrap_or(f64::INFINITY);
                (&ops[idx], end)
            }
        }
    }

    pub fn map_ops(&self, f: impl Fn(&ComparisonOperator) -> ComparisonOperator) -> Self {
        match self {
            OperatorPath::Frozen(op) => OperatorPath::Frozen(f(op)),
            OperatorPath::Sampled { times, ops } => OperatorPath::Sampled {
                times: times.clone(),
                ops: ops.iter().map(f).collect(),
            },
        }
    }
}

const STABILITY: f64 = 0.9;

/// Explicit Euler for dw/du = 𝒜(u)w (or 𝒮) with dt ≤ 0.9/max_i(Σ_j B_ij + W_i).
///
/// At that step size each update is a nonnegative matrix with row and column
/// sums at most one, so positivity and ℓ^p contraction hold step by step.
pub fn evolve(path: &OperatorPath, part: Part, w0: &[f64], s: f64, t: f64) -> Result<Vec<f64>> {
    evolve_recorded(path, part, w0, s, t, &[]).map(|(w, _)| w)
}

/// As `evolve`, also returning ‖w‖_∞ at each time in `record` (ascending, within [s, t]).
pub fn evolve_recorded(
    path: &OperatorPath,
    part: Part,
    w0: &[f64],
    s: f64,
    t: f64,
    record: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if w0.len() != path.k() {
        return Err(invalid("initial vector has the wrong size"));
    }
    if !(s <= t) {
        return Err(invalid("need s <= t"));
    }
    let mut w = w0.to_vec();
    let mut u = s;
    let mut rec = Vec::with_capacity(record.len());
    let mut next_rec = 0;
    let sup = |w: &[f64]| w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    while next_rec < record.len() && record[next_rec] <= u {
        rec.push(sup(&w));
        next_rec += 1;
    }
    while u < t {
        let (op, piece_end) = path.at(u);
        let rate = op.max_rate(part);
        let dt_max = if rate > 0.0 { STABILITY / rate } else { f64::INFINITY };
        let mut target = t.min(piece_end);
        if next_rec < record.len() {
            target = target.min(record[next_rec]);
        }
        let dt = (target - u).min(dt_max);
        let a = op.apply(part, &w);
        for (wi, ai) in w.iter_mut().zip(&a) {
            *wi += dt * ai;
        }
        u = if dt == target - u { target } else { u + dt };
        while next_rec < record.len() && record[next_rec] <= u {
            rec.push(sup(&w));
            next_rec += 1;
        }
    }
    Ok((w, rec))
}

/// U^{(𝒮)}(s, t)δ_b, all components.
pub fn finite_speed_profile(path: &OperatorPath, b: usize, s: f64, t: f64) -> Result<Vec<f64>> {
    let k = path.k();
    if b >= k {
        return Err(Error::IndexOutOfRange { index: b + 1, n: k });
    }
    let mut delta = vec![0.0; k];
    delta[b] = 1.0;
    evolve(path, Part::Short, &delta, s, t)
}

/// U^{(𝒮)}_{ab}(s, t) (0-based indices).
pub fn finite_speed_check(path: &OperatorPath, a: usize, b: usize, s: f64, t: f64) -> Result<f64> {
    Ok(finite_speed_profile(path, b, s, t)?[a])
}

/// Profile values nonincreasing in |a − b| on both sides of b.
pub fn monotone_from(profile: &[f64], b: usize) -> bool {
    profile[b..].windows(2).all(|w| w[1] <= w[0]) && profile[..=b].windows(2).all(|w| w[0] <= w[1])
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyDecay {
    pub times: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub slope: f64,
    pub slope_ci: (f64, f64),
}

/// ‖v(t)‖_∞ on log-spaced times in [t_lo, t_hi] and its log-log slope.
pub fn energy_decay_check(
    path: &OperatorPath,
    v0: &[f64],
    t_lo: f64,
    t_hi: f64,
    points: usize,
) -> Result<EnergyDecay> {
    if !(t_lo > 0.0 && t_hi > t_lo) || points < 3 {
        return Err(invalid("need 0 < t_lo < t_hi and at least 3 points"));
    }
    let times: Vec<f64> = (0..points)
        .map(|j| t_lo * (t_hi / t_lo).powf(j as f64 / (points - 1) as f64))
        .collect();
    let (_, sup_norm) = evolve_recorded(path, Part::Full, v0, 0.0, t_hi, &times)?;
    let (lx, ly): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&sup_norm)
        .filter(|(_, &v)| v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .unzip();
    // a vector that dies out leaves nothing to fit
    let (slope, slope_ci) = if lx.len() < 3 {
        (f64::NAN, (f64::NAN, f64::NAN))
    } else {
        let fit = ols(&lx, &ly)?;
        let half = t95(fit.points - 2) * fit.slope_se;
        (fit.slope, (fit.slope - half, fit.slope + half))
    };
    Ok(EnergyDecay {
        times,
        sup_norm,
        slope,
        slope_ci,
    })
}

/// Edge quantiles γ^{(x)}_1..γ^{(x)}_K for N and the cutoff index ⌊K + K^{δ_c}⌋ (at least K+2).
pub fn equilibrium_window(k: usize, n: usize, delta_c: f64) -> Result<(Vec<f64>, f64)> {
    let model = SemicircleModel::default();
    let x = (1..=k)
        .map(|i| model.edge_quantile(i, n))
        .collect::<Result<Vec<_>>>()?;
    let buffer = ((k as f64 + (k as f64).powf(delta_c)).floor() as usize).max(k + 2);
    Ok((x, model.edge_quantile(buffer, n)?))
}

/// Outcome of evolving one random instance under 𝒜.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionTrial {
    pub seed: u64,
    pub k: usize,
    /// ‖w(t)‖_p − ‖w₀‖_p for p = 1, 2, ∞ (signed start).
    pub excess: [f64; 3],
    /// Smallest component of the evolved nonnegative start.
    pub min_positive: f64,
}

/// Random ordered windows near the equilibrium quantiles at size `n`, K ∈ [4, 48),
/// a signed start in [−1, 1]^K and its absolute value, evolved over [0, t].
pub fn contraction_trial(seed: u64, n: usize, t: f64) -> Result<ContractionTrial> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(4..48);
    let (q, gc) = equilibrium_window(k, n, 0.1)?;
    let mut perturbed = || {
        let mut v: Vec<f64> = q.iter().map(|a| a + rng.random_range(-0.2..0.2)).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let (x, y) = (perturbed(), perturbed());
    let op = build_coefficients(&x, &y, gc, n, 0.0, 0.1)?;
    let path = OperatorPath::Frozen(op);
    let w0: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = evolve(&path, Part::Full, &w0, 0.0, t)?;
    let norm = |v: &[f64], p: f64| -> f64 {
        if p.is_infinite() {
            v.iter().fold(0.0f64, |m, a| m.max(a.abs()))
        } else {
            v.iter().map(|a| a.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        }
    };
    let excess = [1.0, 2.0, f64::INFINITY].map(|p| norm(&w, p) - norm(&w0, p));
    let abs: Vec<f64> = w0.iter().map(|a| a.abs()).collect();
    let min_positive = evolve(&path, Part::Full, &abs, 0.0, t)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(ContractionTrial {
        seed,
        k,
        excess,
        min_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilibrium_op(k: usize) -> ComparisonOperator {
        let n = 1_000_000_000;
        let (x, gc) = equilibrium_window(k, n, 0.1).unwrap();
        build_coefficients(&x, &x, gc, n, 0.0, 0.1).unwrap()
    }

    #[test]
    fn symmetric_positive_coefficients() {
        let op = equilibrium_op(32);
        for i in 0..32 {
            assert_eq!(op.b(i, i), 0.0);
            assert!(op.w[i] > 0.0);
            for j in 0..32 {
                assert_eq!(op.b(i, j), op.b(j, i));
                if i != j {
                    assert!(op.b(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn split_is_exact() {
        let op = equilibrium_op(64);
        let (a, s, r) = (op.matrix(Part::Full), op.matrix(Part::Short), op.matrix(Part::Long));
        for idx in 0..a.len() {
            assert!((a[idx] - (s[idx] + r[idx])).abs() <= 1e-14 * a[idx].abs().max(1.0));
        }
        let no_kill = op.scaled_killing(0.0);
        let m = no_kill.matrix(Part::Full);
        for i in 0..64 {
            let row: f64 = m[i * 64..(i + 1) * 64].iter().sum();
            assert!(row.abs() < 1e-12 * m[i * 64 + i].abs());
        }
    }

    #[test]
    fn conservation_without_killing() {
        let op = equilibrium_op(16).scaled_killing(0.0);
        let w = evolve(&OperatorPath::Frozen(op), Part::Full, &[3.0; 16], 0.0, 2.0).unwrap();
        assert!(w.iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn zero_time_is_identity() {
        let path = OperatorPath::Frozen(equilibrium_op(16));
        assert_eq!(finite_speed_check(&path, 4, 4, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(finite_speed_check(&path, 3, 4, 1.0, 1.0).unwrap(), 0.0);
        let v = energy_decay_check(&path, &[0.0; 16], 0.1, 1.0, 5).unwrap();
        assert!(v.sup_norm.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn killing_has_the_edge_shape() {
        let n = 1_000_000;
        let (x, gc) = equilibrium_window(64, n, 0.1).unwrap();
        let shape = killing_shape(&build_coefficients(&x, &x, gc, n, 0.0, 0.1).unwrap());
        assert!(shape.within_factor_two, "{shape:?}");
        assert!(shape.b > 0.0);
    }

    #[test]
    fn short_range_restriction_thins_the_tail() {
        let op = equilibrium_op(128);
        let short = finite_speed_profile(&OperatorPath::Frozen(op.clone()), 64, 0.0, 0.01).unwrap();
        let full = finite_speed_profile(&OperatorPath::Frozen(op.with_ell(128.0)), 64, 0.0, 0.01).unwrap();
        assert!(monotone_from(&short, 64));
        assert!(full[0] > short[0] + 1e-9);
    }

    #[test]
    fn doubled_killing_decays_faster() {
        let op = equilibrium_op(64);
        let v0 = vec![1.0; 64];
        let a = energy_decay_check(&OperatorPath::Frozen(op.clone()), &v0, 0.1, 10.0, 8).unwrap();
        let b = energy_decay_check(&OperatorPath::Frozen(op.scaled_killing(2.0)), &v0, 0.1, 10.0, 8).unwrap();
        assert!(b.slope < a.slope, "{} vs {}", b.slope, a.slope);
    }

    #[test]
    fn random_trials_contract() {
        for seed in 0..5 {
            let trial = contraction_trial(seed, 1_000_000, 0.5).unwrap();
            assert!(trial.excess.iter().all(|&e| e <= 1e-10), "{trial:?}");
            assert!(trial.min_positive >= 0.0);
        }
    }

    #[test]
    fn crossed_windows_are_rejected() {
        let x = [0.0, 1.0, 2.0];
        assert!(matches!(
            build_coefficients(&x, &x, 1.5, 1000, 0.0, 0.1),
            Err(Error::WindowViolation { index: 3, .. })
        ));
        assert!(build_coefficients(&x, &x, 5.0, 1000, 0.0, 0.2).is_err());
    }
}
