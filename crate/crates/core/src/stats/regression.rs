use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub points: usize,
}

/// Ordinary least squares y = intercept + slope·x.
pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    wls(x, y, &vec![1.0; x.len()])
}

/// Weighted least squares with weights proportional to inverse variances.
///
/// The slope standard error uses the weighted residual scatter, so only the
/// relative size of the weights matters.
pub fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n != w.len() || n < 2 {
        return Err(Error::InsufficientData(format!("{n} points for a line fit")));
    }
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(v, c)| c * (v - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, b), c)| c * (a - mx) * (b - my))
        .sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("constant regressor".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .zip(w)
            .map(|((a, b), c)| c * (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        points: n,
    })
}

/// Least squares y = c + b₁·x + b₂·z; returns (b₁, b₂).
pub fn ols2(x: &[f64], z: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n != z.len() || n < 3 {
        return Err(Error::InsufficientData(format!("{n} points for a plane fit")));
    }
    let (mx, mz, my) = (mean(x), mean(z), mean(y));
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum()
    };
    let (sxx, szz, sxz) = (cov(x, mx, x, mx), cov(z, mz, z, mz), cov(x, mx, z, mz));
    let (sxy, szy) = (cov(x, mx, y, my), cov(z, mz, y, my));
    let det = sxx * szz - sxz * sxz;
    if !(det.abs() > 1e-12 * sxx * szz) {
        return Err(Error::InsufficientData("collinear regressors".into()));
    }
    Ok(((sxy * szz - szy * sxz) / det, (szy * sxx - sxy * sxz) / det))
}

/// Two-sided 95% Student-t quantile for `df` degrees of freedom.
pub fn t95(df: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
        2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
        2.052, 2.048, 2.045, 2.042,
    ];
    match df {
        0 => f64::INFINITY,
        1..=30 => TABLE[df - 1],
        _ => 1.96 + 2.4 / df as f64,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_fit_recovers_coefficients() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let z: Vec<f64> = x.iter().map(|v| (v * 0.7).sin()).collect();
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 1.0 + 2.0 * a - 3.0 * b).collect();
        let (b1, b2) = ols2(&x, &z, &y).unwrap();
        assert!((b1 - 2.0).abs() < 1e-12 && (b2 + 3.0).abs() < 1e-12);
        assert!(ols2(&x, &x, &y).is_err());
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = ols(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_se < 1e-12);
        assert!(ols(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn summaries() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }
}
