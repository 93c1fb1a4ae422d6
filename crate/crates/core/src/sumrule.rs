//! The momentum sum rule `⟨[p_α,[h,p_α]] u_m, u_m⟩ = 2 Σ_n |π̂_mn|² (λ_n - λ_m)`
//! and the oscillating series it is the `t`-derivative of at zero.
//!
//! For `A = p_α` the double commutator is multiplication by `∂_α² V`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::fiber::FiberSpectrum;
use crate::fit::{fit_line, fit_power_law, LineFit};
use crate::model::FourierPotential;
use crate::momentum::MomentumMatrix;
use crate::output::Csv;

pub const REALITY_TOL: f64 = 1e-10;

/// `⟨(∂_α² V) u_m, u_m⟩` from plane-wave coefficients, with
/// `Ŵ(q) = -(2π q_α)² V̂(q)`.
pub fn sumrule_lhs(
    v: &FourierPotential,
    spec: &FiberSpectrum,
    band: usize,
    alpha: usize,
) -> Result<f64> {
    let basis = spec.basis();
    if v.dim() != basis.dim() || alpha >= basis.dim() {
        return Err(invalid("direction or dimension mismatch"));
    }
    if band == 0 || band > spec.n_bands() {
        return Err(invalid(format!("band {band} out of range")));
    }
    let c = spec.coefficients()?;
    let row = c.row(band - 1);
    let mut acc = Complex64::new(0.0, 0.0);
    for (q, vq) in v.support() {
        if q[alpha] == 0 {
            continue;
        }
        let w = vq * (-(2.0 * PI * q[alpha] as f64).powi(2));
        for (a, fa) in basis.freqs().iter().enumerate() {
            let mut fb = *fa;
            for i in 0..basis.dim() {
                fb[i] += q[i];
            }
            if let Some(b) = basis.index_of(&fb) {
                acc += w * row[a] * row[b].conj();
            }
        }
    }
    if acc.im.abs() > REALITY_TOL * acc.re.abs().max(1.0) {
        return Err(Error::NonReal {
            what: "sum-rule left-hand side".into(),
            imag: acc.im,
            tol: REALITY_TOL,
        });
    }
    Ok(acc.re)
}

#[derive(Debug, Clone, Serialize)]
pub struct SumRulePartial {
    pub band: usize,
    pub cutoffs: Vec<usize>,
    /// `R_J = 2 Σ_{n<=J} |π̂_mn|² (λ_n - λ_m)`.
    pub partial_sums: Vec<f64>,
    pub lhs: Option<f64>,
    /// Linear fit of `R_J` against `J` over the upper half of the cutoffs.
    pub slope: Option<LineFit>,
    /// Same tail fit against the free level index `√(λ_J - λ_m) / 2π`.
    pub level_slope: Option<LineFit>,
}

impl SumRulePartial {
    pub fn with_lhs(mut self, lhs: f64) -> Self {
        self.lhs = Some(lhs);
        self
    }

    /// `|R_J - LHS| / |LHS|` at the largest cutoff.
    pub fn relative_gap(&self) -> Option<f64> {
        let lhs = self.lhs?;
        let last = *self.partial_sums.last()?;
        Some((last - lhs).abs() / lhs.abs())
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::with_header(&["J", "R_J"]);
        for (&j, &r) in self.cutoffs.iter().zip(&self.partial_sums) {
            csv.row(&[j.into(), r.into()]);
        }
        csv.finish()
    }
}

fn sumrule_term(pi: &MomentumMatrix, spec: &FiberSpectrum, m: usize, n: usize) -> f64 {
    2.0 * pi.entry(m, n).norm_sqr() * (spec.eigenvalue(n) - spec.eigenvalue(m))
}

pub fn sumrule_rhs_partial(
    pi: &MomentumMatrix,
    spec: &FiberSpectrum,
    band: usize,
    cutoffs: &[usize],
) -> Result<SumRulePartial> {
    let n_max = pi.n_bands().min(spec.n_bands());
    if band == 0 || band > n_max {
        return Err(invalid(format!("band {band} out of range")));
    }
    if cutoffs.is_empty() || cutoffs.iter().any(|&j| j == 0 || j > n_max) {
        return Err(invalid(format!("cutoffs must lie in 1..={n_max}")));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("cutoffs must be strictly increasing"));
    }
    let mut partial_sums = Vec::with_capacity(cutoffs.len());
    let mut acc = 0.0;
    let mut n = 0;
    for &j in cutoffs {
        while n < j {
            n += 1;
            acc += sumrule_term(pi, spec, band, n);
        }
        partial_sums.push(acc);
    }

    let half = cutoffs.len() / 2;
    let tail_j: Vec<f64> = cutoffs[half..].iter().map(|&j| j as f64).collect();
    let tail_r = &partial_sums[half..];
    let slope = fit_line(&tail_j, tail_r).ok();
    let lm = spec.eigenvalue(band);
    let tail_l: Vec<f64> = cutoffs[half..]
        .iter()
        .map(|&j| (spec.eigenvalue(j) - lm).max(0.0).sqrt() / (2.0 * PI))
        .collect();
    let level_slope = fit_line(&tail_l, tail_r).ok();
    Ok(SumRulePartial {
        band,
        cutoffs: cutoffs.to_vec(),
        partial_sums,
        lhs: None,
        slope,
        level_slope,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OscillationSeries {
    pub band: usize,
    pub cutoff: usize,
    pub t: Vec<f64>,
    /// `S_J(t) = 2 Σ_{n<=J} |π̂_mn|² sin(t (λ_m - λ_n))`.
    pub values: Vec<f64>,
    /// `|S_J(t) - S_J(0)|`.
    pub increments: Vec<f64>,
}

impl OscillationSeries {
    /// Exponent `h` of `|S_J(t) - S_J(0)| ~ |t|^h` over the nonzero samples.
    pub fn holder_exponent(&self) -> Result<LineFit> {
        let (ts, ys): (Vec<f64>, Vec<f64>) = self
            .t
            .iter()
            .zip(&self.increments)
            .filter(|(t, y)| **t != 0.0 && **y > 0.0)
            .map(|(t, y)| (t.abs(), *y))
            .unzip();
        fit_power_law(&ts, &ys)
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::with_header(&["t", "S_J"]);
        for (&t, &s) in self.t.iter().zip(&self.values) {
            csv.row(&[t.into(), s.into()]);
        }
        csv.finish()
    }
}

pub fn oscillation_series(
    pi: &MomentumMatrix,
    spec: &FiberSpectrum,
    band: usize,
    t_grid: &[f64],
    cutoff: usize,
) -> Result<OscillationSeries> {
    let n_max = pi.n_bands().min(spec.n_bands());
    if band == 0 || band > n_max || cutoff == 0 || cutoff > n_max {
        return Err(invalid("band or cutoff out of range"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(invalid("t grid must be finite"));
    }
    let lm = spec.eigenvalue(band);
    let weights: Vec<(f64, f64)> = (1..=cutoff)
        .map(|n| (2.0 * pi.entry(band, n).norm_sqr(), lm - spec.eigenvalue(n)))
        .collect();
    let values: Vec<f64> = t_grid
        .par_iter()
        .map(|&t| weights.iter().map(|&(w, d)| w * (t * d).sin()).sum())
        .collect();
    // S_J(0) = 0 exactly
    let increments = values.iter().map(|v| v.abs()).collect();
    Ok(OscillationSeries {
        band,
        cutoff,
        t: t_grid.to_vec(),
        values,
        increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::{assemble_fiber, fiber_spectrum, kinetic_momenta};
    use crate::model::{build_basis, build_potential, PotentialSpec};
    use crate::momentum::momentum_matrix;
    use nalgebra::DMatrix;

    fn cos_setup(m_cut: i64, k: f64) -> (FourierPotential, FiberSpectrum, MomentumMatrix) {
        let v = build_potential(&PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0)).unwrap();
        let s = fiber_spectrum(&v, &build_basis(1, m_cut).unwrap(), &[k], None).unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        (v, s, pi)
    }

    #[test]
    fn free_case_vanishes() {
        let v = build_potential(&PotentialSpec::zero(1, 2.0)).unwrap();
        let s = fiber_spectrum(&v, &build_basis(1, 16).unwrap(), &[0.2], None).unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        assert_eq!(sumrule_lhs(&v, &s, 1, 0).unwrap(), 0.0);
        let r = sumrule_rhs_partial(&pi, &s, 1, &[2, 4, 8, 16]).unwrap();
        assert!(r.partial_sums.iter().all(|&x| x == 0.0));
        let o = oscillation_series(&pi, &s, 1, &[0.0, 0.1, 1.0], 16).unwrap();
        assert!(o.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lhs_matches_matrix_commutator() {
        let (v, s, _) = cos_setup(32, 0.3);
        let op = assemble_fiber(&v, s.basis(), &[0.3]).unwrap();
        let h = op.matrix();
        let p = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            kinetic_momenta(s.basis(), &[0.3], 0)
                .into_iter()
                .map(|x| Complex64::new(x, 0.0))
                .collect(),
        ));
        let hp = h * &p - &p * h;
        let dd = &p * &hp - &hp * &p;
        let c = s.coefficients().unwrap();
        for band in 1..=4 {
            let u = c.row(band - 1).transpose();
            let oracle = (u.adjoint() * &dd * &u)[(0, 0)];
            let lhs = sumrule_lhs(&v, &s, band, 0).unwrap();
            assert!((lhs - oracle.re).abs() < 1e-8, "{lhs} vs {oracle}");
        }
    }

    #[test]
    fn lhs_matches_real_space_quadrature() {
        let (v, s, _) = cos_setup(32, 0.0);
        let c = s.coefficients().unwrap();
        let n = 2048;
        let mut acc = 0.0;
        for i in 0..n {
            let x = i as f64 / n as f64;
            let u: Complex64 = s
                .basis()
                .freqs()
                .iter()
                .enumerate()
                .map(|(a, f)| c[(0, a)] * Complex64::from_polar(1.0, 2.0 * PI * f[0] as f64 * x))
                .sum();
            let d2v = -4.0 * PI * PI * 2.0 * (2.0 * PI * x).cos();
            acc += d2v * u.norm_sqr();
        }
        acc /= n as f64;
        let lhs = sumrule_lhs(&v, &s, 1, 0).unwrap();
        assert!((lhs - acc).abs() < 1e-10 * acc.abs(), "{lhs} vs {acc}");
        assert!(lhs > 0.0);
    }

    #[test]
    fn smooth_sum_rule_converges() {
        let (v, s, pi) = cos_setup(256, 0.0);
        let cutoffs: Vec<usize> = (1..=20).map(|i| 10 * i).collect();
        let r = sumrule_rhs_partial(&pi, &s, 1, &cutoffs)
            .unwrap()
            .with_lhs(sumrule_lhs(&v, &s, 1, 0).unwrap());
        assert!(r.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.relative_gap().unwrap() <= 1e-3, "{:?}", r.relative_gap());
    }

    #[test]
    fn oscillation_series_is_odd() {
        let (_, s, pi) = cos_setup(32, 0.1);
        let ts = [0.0, 0.01, -0.01, 0.37, -0.37];
        let o = oscillation_series(&pi, &s, 1, &ts, 20).unwrap();
        assert_eq!(o.values[0], 0.0);
        assert_eq!(o.values[1], -o.values[2]);
        assert_eq!(o.values[3], -o.values[4]);
    }

    #[test]
    fn rejects_bad_cutoffs() {
        let (_, s, pi) = cos_setup(8, 0.0);
        assert!(sumrule_rhs_partial(&pi, &s, 1, &[]).is_err());
        assert!(sumrule_rhs_partial(&pi, &s, 1, &[4, 2]).is_err());
        assert!(sumrule_rhs_partial(&pi, &s, 1, &[100]).is_err());
    }
}
