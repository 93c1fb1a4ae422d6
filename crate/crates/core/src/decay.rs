//! Empirical decay of momentum matrix elements with band energy.
//!
//! For a potential with `2M - 1` continuous derivatives the elements obey
//! `|π̂_st| <= C_N λ_s^{N+1/2} / λ_t^N` for `N <= M`. Everything here works
//! with finite eigenbasis sections, so the estimates are lower bounds on the
//! true constants and only meaningful inside the trusted band range.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fiber::FiberSpectrum;
use crate::fit::{fit_power_law, LineFit};
use crate::momentum::MomentumMatrix;
use crate::output::Csv;

/// `λ^N` overflows for large windows beyond this order.
pub const MAX_ORDER: u32 = 4;
pub const MIN_FIT_BANDS: usize = 20;
/// Entries below this are treated as identically zero.
pub const ZERO_ELEMENT: f64 = 1e-14;
/// Relative change between the last two cutoffs that counts as stabilized.
pub const STABILIZATION_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Ratio {
    pub order: u32,
    /// `sup |π̂_st| λ_t^N / λ_s^{N+1/2}` over the range.
    pub value: f64,
    pub s: usize,
    pub t: usize,
    pub s_max: usize,
    pub t_max: usize,
}

fn check_pair(pi: &MomentumMatrix, spec: &FiberSpectrum) -> Result<()> {
    if pi.n_bands() > spec.n_bands() {
        return Err(invalid("momentum matrix has more bands than the spectrum"));
    }
    if spec.eigenvalues().iter().take(pi.n_bands()).any(|&e| e <= 0.0) {
        return Err(invalid(
            "decay estimates need positive eigenvalues; raise the potential shift",
        ));
    }
    Ok(())
}

/// Supremum of `|π̂_st| λ_t^N / λ_s^{N+1/2}` over `s <= s_max`, `t <= t_max`
/// (1-based labels), evaluated in log space.
pub fn theorem1_ratio(
    pi: &MomentumMatrix,
    spec: &FiberSpectrum,
    order: u32,
    s_max: usize,
    t_max: usize,
) -> Result<Theorem1Ratio> {
    check_pair(pi, spec)?;
    if order > MAX_ORDER {
        return Err(invalid(format!("order {order} exceeds {MAX_ORDER}")));
    }
    if s_max == 0 || t_max == 0 {
        return Err(invalid("empty band range"));
    }
    if s_max > pi.n_bands() || t_max > pi.n_bands() {
        return Err(invalid(format!(
            "range ({s_max}, {t_max}) exceeds the {} available bands",
            pi.n_bands()
        )));
    }
    let n = order as f64;
    let ln_l: Vec<f64> = spec.eigenvalues().iter().map(|e| e.ln()).collect();
    let mut best = (f64::NEG_INFINITY, 1, 1);
    for s in 1..=s_max {
        for t in 1..=t_max {
            let mag = pi.entry(s, t).norm();
            if mag == 0.0 {
                continue;
            }
            let lv = mag.ln() + n * ln_l[t - 1] - (n + 0.5) * ln_l[s - 1];
            if lv > best.0 {
                best = (lv, s, t);
            }
        }
    }
    Ok(Theorem1Ratio {
        order,
        value: best.0.exp(),
        s: best.1,
        t: best.2,
        s_max,
        t_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioSweep {
    pub order: u32,
    pub s_max: usize,
    pub t_max: Vec<usize>,
    pub ratios: Vec<Theorem1Ratio>,
    /// Last two estimates agree to within [`STABILIZATION_TOL`].
    pub stabilized: bool,
}

/// `theorem1_ratio` over an increasing sequence of `t_max`.
pub fn theorem1_sweep(
    pi: &MomentumMatrix,
    spec: &FiberSpectrum,
    order: u32,
    s_max: usize,
    t_max: &[usize],
) -> Result<RatioSweep> {
    if t_max.is_empty() {
        return Err(invalid("empty t_max sequence"));
    }
    let ratios = t_max
        .iter()
        .map(|&t| theorem1_ratio(pi, spec, order, s_max, t))
        .collect::<Result<Vec<_>>>()?;
    let stabilized = match ratios.as_slice() {
        [.., a, b] => (b.value - a.value).abs() <= STABILIZATION_TOL * b.value,
        _ => false,
    };
    Ok(RatioSweep {
        order,
        s_max,
        t_max: t_max.to_vec(),
        ratios,
        stabilized,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub band: usize,
    /// `(λ_t, |π̂_st|)` for every `t != s` in the window.
    pub pairs: Vec<(f64, f64)>,
    /// `(bin energy, envelope)`, non-increasing in energy.
    pub envelope: Vec<(f64, f64)>,
    /// Exponent `p` of `envelope ~ amplitude · λ^p`.
    pub exponent: f64,
    pub amplitude: f64,
    pub fit: LineFit,
    pub window: (f64, f64),
    pub theorem1: Option<Theorem1Ratio>,
}

impl DecayFit {
    pub fn with_theorem1(mut self, r: Theorem1Ratio) -> Self {
        self.theorem1 = Some(r);
        self
    }

    pub fn pairs_csv(&self) -> String {
        let mut csv = Csv::with_header(&["lambda_t", "abs_pi"]);
        for &(l, p) in &self.pairs {
            csv.row(&[l.into(), p.into()]);
        }
        csv.finish()
    }
}

/// Power-law fit of the upper envelope of `|π̂_st|` against `λ_t` over the
/// energy window. The envelope is the running maximum over log-spaced energy
/// bins taken from the top down.
pub fn decay_exponent_fit(
    pi: &MomentumMatrix,
    spec: &FiberSpectrum,
    band: usize,
    window: (f64, f64),
) -> Result<DecayFit> {
    check_pair(pi, spec)?;
    if band == 0 || band > pi.n_bands() {
        return Err(invalid(format!("band {band} out of range")));
    }
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("invalid energy window ({lo}, {hi})")));
    }
    let pairs: Vec<(f64, f64)> = (1..=pi.n_bands())
        .filter(|&t| t != band)
        .map(|t| (spec.eigenvalue(t), pi.entry(band, t).norm()))
        .filter(|&(l, _)| l >= lo && l <= hi)
        .collect();
    if pairs.len() < MIN_FIT_BANDS {
        return Err(invalid(format!(
            "window holds {} bands, need at least {MIN_FIT_BANDS}",
            pairs.len()
        )));
    }
    if pairs.iter().all(|&(_, p)| p < ZERO_ELEMENT) {
        return Err(Error::DegenerateFit(
            "all matrix elements in the window vanish".into(),
        ));
    }

    let n_bins = (pairs.len() / 3).clamp(6, 40);
    let (llo, lhi) = (lo.ln(), hi.ln());
    let width = (lhi - llo) / n_bins as f64;
    let mut bin_max = vec![0.0f64; n_bins];
    let mut bin_seen = vec![false; n_bins];
    for &(l, p) in &pairs {
        let b = (((l.ln() - llo) / width) as usize).min(n_bins - 1);
        bin_max[b] = bin_max[b].max(p);
        bin_seen[b] = true;
    }
    let mut envelope = Vec::with_capacity(n_bins);
    let mut running = 0.0f64;
    for b in (0..n_bins).rev() {
        running = running.max(bin_max[b]);
        if bin_seen[b] && running >= ZERO_ELEMENT {
            let center = (llo + (b as f64 + 0.5) * width).exp();
            envelope.push((center, running));
        }
    }
    envelope.reverse();
    if envelope.len() < 2 {
        return Err(Error::DegenerateFit(
            "envelope has fewer than two nonzero bins".into(),
        ));
    }
    let xs: Vec<f64> = envelope.iter().map(|e| e.0).collect();
    let ys: Vec<f64> = envelope.iter().map(|e| e.1).collect();
    let fit = fit_power_law(&xs, &ys)?;
    Ok(DecayFit {
        band,
        pairs,
        envelope,
        exponent: fit.slope,
        amplitude: fit.intercept.exp(),
        fit,
        window,
        theorem1: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorNormReport {
    pub order: u32,
    pub cutoffs: Vec<usize>,
    /// Largest singular value of the truncated section for each cutoff.
    pub norms: Vec<f64>,
    pub stabilized: bool,
}

/// Operator norm of `h^N [p_α, h^{-N}]` on the span of the first `J` bands,
/// for each `J` in `cutoffs`. In the eigenbasis the `(s,t)` entry is
/// `((λ_s/λ_t)^N - 1) π̂_ts`.
pub fn commutator_norm(
    spec: &FiberSpectrum,
    pi: &MomentumMatrix,
    order: u32,
    cutoffs: &[usize],
) -> Result<CommutatorNormReport> {
    check_pair(pi, spec)?;
    if order > MAX_ORDER {
        return Err(invalid(format!("order {order} exceeds {MAX_ORDER}")));
    }
    if cutoffs.is_empty() || cutoffs.iter().any(|&j| j == 0 || j > pi.n_bands()) {
        return Err(invalid("cutoffs must lie in 1..=n_bands"));
    }
    let n = order as f64;
    let ln_l: Vec<f64> = spec.eigenvalues().iter().map(|e| e.ln()).collect();
    let norms = cutoffs
        .iter()
        .map(|&j| {
            let m = DMatrix::<Complex64>::from_fn(j, j, |s, t| {
                let f = (n * (ln_l[s] - ln_l[t])).exp_m1();
                pi.matrix()[(t, s)] * f
            });
            m.singular_values().max()
        })
        .collect::<Vec<_>>();
    let stabilized = match norms.as_slice() {
        [.., a, b] => (b - a).abs() <= STABILIZATION_TOL * b.abs().max(f64::MIN_POSITIVE),
        _ => false,
    };
    Ok(CommutatorNormReport {
        order,
        cutoffs: cutoffs.to_vec(),
        norms,
        stabilized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::fiber_spectrum;
    use crate::model::{build_basis, build_potential, PotentialSpec};
    use crate::momentum::momentum_matrix;
    use std::f64::consts::PI;

    fn setup(spec: &PotentialSpec, m_cut: i64, k: f64) -> (FiberSpectrum, MomentumMatrix) {
        let v = build_potential(spec).unwrap();
        let s = fiber_spectrum(&v, &build_basis(1, m_cut).unwrap(), &[k], None).unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        (s, pi)
    }

    #[test]
    fn free_ratio_on_diagonal() {
        let (s, pi) = setup(&PotentialSpec::zero(1, 1.0), 32, 0.3);
        for order in 0..=3 {
            let r = theorem1_ratio(&pi, &s, order, 10, 30).unwrap();
            assert_eq!(r.s, r.t);
            assert!(r.value <= 1.0);
            let expect = pi.entry(r.s, r.s).norm() / s.eigenvalue(r.s).sqrt();
            assert!((r.value - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn ratio_symmetry_under_swap() {
        let (s, pi) = setup(&PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0), 32, 0.2);
        // swapping the roles of s and t in the bound uses |π̂_st| = |π̂_ts|
        let direct = theorem1_ratio(&pi, &s, 1, 5, 5).unwrap();
        let mut best: f64 = 0.0;
        for s_ in 1..=5 {
            for t in 1..=5 {
                let v = pi.entry(t, s_).norm() * s.eigenvalue(t) / s.eigenvalue(s_).powf(1.5);
                best = best.max(v);
            }
        }
        assert!((best - direct.value).abs() < 1e-12 * best);
    }

    #[test]
    fn ratio_rejects_bad_ranges() {
        let (s, pi) = setup(&PotentialSpec::zero(1, 1.0), 4, 0.0);
        assert!(theorem1_ratio(&pi, &s, 1, 0, 2).is_err());
        assert!(theorem1_ratio(&pi, &s, 1, 2, 100).is_err());
        assert!(theorem1_ratio(&pi, &s, 5, 2, 2).is_err());
    }

    #[test]
    fn free_fit_is_degenerate() {
        let (s, pi) = setup(&PotentialSpec::zero(1, 1.0), 32, 0.3);
        let err = decay_exponent_fit(&pi, &s, 1, (s.eigenvalue(2), s.eigenvalue(32))).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
    }

    #[test]
    fn envelope_is_monotone() {
        let spec = PotentialSpec::gaussian(1, 0.1, 20.0, 150, 8.0);
        let (s, pi) = setup(&spec, 256, 0.0);
        let fit = decay_exponent_fit(&pi, &s, 1, (s.eigenvalue(50), s.eigenvalue(200))).unwrap();
        assert!(fit.envelope.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(fit.exponent <= -3.0, "exponent {}", fit.exponent);
    }

    #[test]
    fn commutator_free_is_zero() {
        let (s, pi) = setup(&PotentialSpec::zero(1, 1.0), 16, 0.3);
        let rep = commutator_norm(&s, &pi, 2, &[4, 8, 16]).unwrap();
        assert!(rep.norms.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn commutator_cosine_bounded_by_derivative() {
        let (s, pi) = setup(&PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0), 64, 0.0);
        let rep = commutator_norm(&s, &pi, 1, &[16, 32, 48, 64]).unwrap();
        let bound = 4.0 * PI;
        assert!(rep.norms.iter().all(|&n| n <= bound + 1e-9), "{:?}", rep.norms);
        assert!(rep.stabilized);
    }
}
