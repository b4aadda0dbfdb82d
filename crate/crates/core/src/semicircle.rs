//! Semicircle law and the edge-scaled measure ν^{(x)}.
//!
//! Quantiles are obtained by inverting a numerically integrated CDF. The CDF
//! is integrated in the variable u with E = -2 + u², so that edge quantiles
//! keep full relative precision even when E + 2 is far below machine epsilon
//! relative to 2.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{adaptive, GaussLegendre};

/// The drift constant printed alongside the oracle value in every report.
pub fn quoted_drift_constant() -> f64 {
    (16.0 / (3.0 * PI * PI)).cbrt()
}

/// Limit of the quadrature oracle as N/K → ∞.
pub fn standard_drift_constant() -> f64 {
    (12.0 / (PI * PI)).cbrt()
}

/// Semicircle density (1/2π)√(4−E²).
pub fn density(e: f64) -> f64 {
    if e.abs() >= 2.0 {
        return 0.0;
    }
    (4.0 - e * e).sqrt() / (2.0 * PI)
}

/// m_sc(z) = ∫ ρ_sc(x)/(x−z) dx, the root of m² + zm + 1 = 0 with Im m > 0.
pub fn stieltjes(z: Complex64) -> Result<Complex64> {
    if !(z.im > 0.0) {
        return Err(Error::NonPositiveImaginary(z.im));
    }
    // (z-2)^{1/2}(z+2)^{1/2} with principal branches behaves like z at infinity
    let s = (z - 2.0).sqrt() * (z + 2.0).sqrt();
    // -2/(z+s) equals (-z+s)/2 without the cancellation for large |z|
    let mut m = -2.0 / (z + s);
    if m.im <= 0.0 {
        m = -z - m;
    }
    Ok(m)
}

/// min(i, N+1−i).
pub fn hat_index(i: usize, n: usize) -> usize {
    i.min(n + 1 - i)
}

/// Density of ν^{(x)}(x) = N^{1/3} ρ_sc(N^{-2/3}x − 2), supported on [0, 4N^{2/3}].
pub fn edge_density(x: f64, n: usize) -> f64 {
    let nf = n as f64;
    let upper = 4.0 * nf.powf(2.0 / 3.0);
    if x <= 0.0 || x >= upper {
        return 0.0;
    }
    x.sqrt() * (upper - x).sqrt() / (2.0 * PI * nf.cbrt())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftConstants {
    pub k: usize,
    pub n: usize,
    pub oracle: f64,
    pub quoted: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantileRow {
    pub i: usize,
    pub gamma: f64,
    pub edge_quantile: f64,
}

/// Numerical tolerances for all semicircle computations.
#[derive(Debug, Clone)]
pub struct SemicircleModel {
    pub quad_rel_tol: f64,
    pub root_tol: f64,
    gl: GaussLegendre,
}

impl Default for SemicircleModel {
    fn default() -> Self {
        Self::new(1e-8, 1e-10)
    }
}

impl SemicircleModel {
    pub fn new(quad_rel_tol: f64, root_tol: f64) -> Self {
        Self {
            quad_rel_tol,
            root_tol,
            gl: GaussLegendre::new(24),
        }
    }

    /// Mass of ρ_sc on [-2, -2+u²] for 0 ≤ u ≤ √2.
    fn lower_mass(&self, u: f64) -> f64 {
        // integrand (1/π) v²√(4−v²) is analytic on [0, √2]
        self.gl
            .integrate_panels(0.0, u, 2, |v| v * v * (4.0 - v * v).sqrt())
            / PI
    }

    pub fn cdf(&self, e: f64) -> f64 {
        if e <= -2.0 {
            return 0.0;
        }
        if e >= 2.0 {
            return 1.0;
        }
        if e <= 0.0 {
            self.lower_mass((e + 2.0).sqrt())
        } else {
            1.0 - self.lower_mass((2.0 - e).sqrt())
        }
    }

    /// Solves lower_mass(u) = p for u ∈ [0, √2] by bisection.
    fn invert_lower(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0, SQRT_2);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.lower_mass(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            // u resolves E + 2 = u² far below root_tol once hi − lo ≲ 1e-15
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Returns (E + 2, 2 − E) for the i-th N-quantile, each to full relative precision.
    fn quantile_offsets(&self, i: usize, n: usize) -> Result<(f64, f64)> {
        if i < 1 || i > n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        let p = i as f64 / n as f64;
        if 2 * i <= n {
            let u = self.invert_lower(p);
            let d = u * u;
            Ok((d, 4.0 - d))
        } else {
            let u = self.invert_lower(1.0 - p);
            let d = u * u;
            Ok((4.0 - d, d))
        }
    }

    /// γ_i^{(N)}: the point where the semicircle CDF equals i/N.
    pub fn quantile(&self, i: usize, n: usize) -> Result<f64> {
        let (from_left, from_right) = self.quantile_offsets(i, n)?;
        if 2 * i <= n {
            Ok(-2.0 + from_left)
        } else {
            Ok(2.0 - from_right)
        }
    }

    /// γ^{(x)}_i = N^{2/3}(γ_i^{(N)} + 2).
    pub fn edge_quantile(&self, i: usize, n: usize) -> Result<f64> {
        let (from_left, _) = self.quantile_offsets(i, n)?;
        Ok((n as f64).powf(2.0 / 3.0) * from_left)
    }

    pub fn quantile_table(&self, n: usize) -> Vec<QuantileRow> {
        (1..=n)
            .map(|i| {
                let (l, r) = self.quantile_offsets(i, n).expect("index in range");
                let gamma = if 2 * i <= n { -2.0 + l } else { 2.0 - r };
                QuantileRow {
                    i,
                    gamma,
                    edge_quantile: (n as f64).powf(2.0 / 3.0) * l,
                }
            })
            .collect()
    }

    /// ∫_{lower}^{4N^{2/3}} ν^{(x)}(x) w(x) dx for a weight w smooth on the range.
    ///
    /// The range is split at the midpoint of the support; on the upper piece the
    /// substitution x = X − s² removes the square-root endpoint.
    pub fn edge_measure_integral(&self, lower: f64, n: usize, w: impl Fn(f64) -> f64) -> f64 {
        self.edge_measure_integral_tol(lower, n, self.quad_rel_tol, w)
    }

    pub(crate) fn edge_measure_integral_tol(
        &self,
        lower: f64,
        n: usize,
        rel_tol: f64,
        w: impl Fn(f64) -> f64,
    ) -> f64 {
        let nf = n as f64;
        let big_x = 4.0 * nf.powf(2.0 / 3.0);
        let c = 1.0 / (2.0 * PI * nf.cbrt());
        let lower = lower.max(0.0);
        if lower >= big_x {
            return 0.0;
        }
        let mid = 0.5 * big_x;
        let mut total = 0.0;
        let s_top = if lower < mid {
            // √x is smooth away from 0; near 0 use x = r² as well
            if lower == 0.0 {
                let r_mid = mid.sqrt();
                total += adaptive(
                    |r| {
                        let x = r * r;
                        2.0 * r * r * c * (big_x - x).sqrt() * w(x)
                    },
                    0.0,
                    r_mid,
                    rel_tol,
                    0.0,
                )
                .value;
            } else {
                total += adaptive(
                    |x| c * x.sqrt() * (big_x - x).sqrt() * w(x),
                    lower,
                    mid,
                    rel_tol,
                    0.0,
                )
                .value;
            }
            (big_x - mid).sqrt()
        } else {
            (big_x - lower).sqrt()
        };
        total += adaptive(
            |s| {
                let x = big_x - s * s;
                2.0 * s * s * c * x.max(0.0).sqrt() * w(x)
            },
            0.0,
            s_top,
            rel_tol,
            0.0,
        )
        .value;
        total
    }

    /// ∫_{γ_c}^{∞} ν^{(x)}(x)/(a − x) dx for a < γ_c.
    pub fn mean_field_tail(&self, a: f64, gamma_c: f64, n: usize) -> Result<f64> {
        if !(a < gamma_c) {
            return Err(Error::WindowViolation {
                index: 0,
                position: a,
                gamma_c,
            });
        }
        Ok(self.edge_measure_integral(gamma_c, n, |x| 1.0 / (a - x)))
    }

    pub(crate) fn mean_field_tail_tol(&self, a: f64, gamma_c: f64, n: usize, rel_tol: f64) -> f64 {
        self.edge_measure_integral_tol(gamma_c, n, rel_tol, |x| 1.0 / (a - x))
    }

    /// The constant a with ∫_0^{γ^{(x)}_K} ν^{(x)}(x)/x dx = a K^{1/3}, evaluated at finite N.
    pub fn drift_constant(&self, k: usize, n: usize) -> Result<DriftConstants> {
        if k < 1 {
            return Err(invalid("drift_constant needs K >= 1"));
        }
        if k > n {
            return Err(Error::IndexOutOfRange { index: k, n });
        }
        let nf = n as f64;
        let gamma_k = self.edge_quantile(k, n)?;
        let big_x = 4.0 * nf.powf(2.0 / 3.0);
        // x = s² turns ν(x)/x dx into √(X − s²)/(π N^{1/3}) ds
        let integral = adaptive(
            |s| (big_x - s * s).max(0.0).sqrt(),
            0.0,
            gamma_k.sqrt(),
            self.quad_rel_tol,
            0.0,
        )
        .value
            / (PI * nf.cbrt());
        Ok(DriftConstants {
            k,
            n,
            oracle: integral / (k as f64).cbrt(),
            quoted: quoted_drift_constant(),
        })
    }
}
