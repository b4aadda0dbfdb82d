//! Stieltjes-transform rigidity certificate.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::semicircle::stieltjes;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StieltjesReport {
    /// max over the grid of |m_N(z) − m_sc(z)|·N·η.
    pub max_normalized: f64,
    pub worst_e: f64,
    pub worst_eta: f64,
}

/// E ∈ [−10, 10] in steps of 0.1 and η log-spaced over [10⁻², 1].
pub fn default_grids() -> (Vec<f64>, Vec<f64>) {
    let e = (0..=200).map(|k| -10.0 + 0.1 * k as f64).collect();
    let eta = (0..=8).map(|k| 10f64.powf(-2.0 + 0.25 * k as f64)).collect();
    (e, eta)
}

/// m_N(z) = N^{-1} Σ (λ_i/N^{2/3} − z)^{-1} compared with m_sc on E_grid × eta_grid.
pub fn stieltjes_diagnostic(lambdas: &[f64], e_grid: &[f64], eta_grid: &[f64]) -> Result<StieltjesReport> {
    let n = lambdas.len() as f64;
    let scale = n.powf(-2.0 / 3.0);
    let bulk: Vec<f64> = lambdas.iter().map(|l| l * scale).collect();
    let mut report = StieltjesReport {
        max_normalized: 0.0,
        worst_e: f64::NAN,
        worst_eta: f64::NAN,
    };
    for &eta in eta_grid {
        for &e in e_grid {
            let z = Complex64::new(e, eta);
            let m: Complex64 = bulk.iter().map(|&x| 1.0 / (x - z)).sum::<Complex64>() / n;
            let dev = (m - stieltjes(z)?).norm() * n * eta;
            if dev > report.max_normalized {
                report = StieltjesReport {
                    max_normalized: dev,
                    worst_e: e,
                    worst_eta: eta,
                };
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semicircle::SemicircleModel;
    use crate::stats::rigidity::classical_locations;

    #[test]
    fn quantile_configuration_is_small() {
        let model = SemicircleModel::default();
        let n = 512;
        let g = classical_locations(&model, n);
        let (e, eta) = default_grids();
        let r = stieltjes_diagnostic(&g, &e, &eta).unwrap();
        assert!(r.max_normalized < 5.0, "{r:?}");
    }

    #[test]
    fn collapsed_configuration_is_flagged() {
        let n = 512;
        // strictly ordered but all within 1e-9 of zero in bulk units
        let lambdas: Vec<f64> = (0..n).map(|i| i as f64 * 1e-12).collect();
        let (e, eta) = default_grids();
        let r = stieltjes_diagnostic(&lambdas, &e, &eta).unwrap();
        assert!(r.max_normalized > 50.0);
    }
}
