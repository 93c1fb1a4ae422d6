use serde::Serialize;

use crate::error::{Error, Result};

/// Ordinary least-squares line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
    pub points: usize,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least two paired samples, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateFit("abscissae have no spread".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (rss / nf).sqrt(),
        points: n,
    })
}

/// Fit of `ln y` against `ln x`; the slope is the power-law exponent.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::DegenerateFit(
            "log-log fit needs strictly positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!(f.rms_residual < 1e-14);
    }

    #[test]
    fn power_law_exponent() {
        let xs: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
        let f = fit_power_law(&xs, &ys).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_line(&[1.0], &[1.0]).is_err());
        assert!(fit_line(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }
}
