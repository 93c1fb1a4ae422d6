//! Momentum matrix elements `π̂_st(α,k) = ⟨u_s, (-i∂_α + k_α) u_t⟩` and their
//! direct consequences.
//!
//! The inner product is linear in the first slot and antilinear in the second,
//! which in plane-wave coefficients reads
//! `π̂_st = Σ_m (2π m_α + k_α) c_{s,m} conj(c_{t,m})`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fiber::{fiber_spectrum, kinetic_momenta, FiberSpectrum};
use crate::fit::{fit_power_law, LineFit};
use crate::model::{FourierPotential, PlaneWaveBasis};
use crate::output::Csv;

/// Gap required before a diagonal element is compared with a band derivative.
pub const FH_GAP_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct MomentumMatrix {
    alpha: usize,
    k: Vec<f64>,
    entries: DMatrix<Complex64>,
}

impl MomentumMatrix {
    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn n_bands(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry for 1-based band labels `(s, t)`.
    pub fn entry(&self, s: usize, t: usize) -> Complex64 {
        self.entries[(s - 1, t - 1)]
    }

    /// Zero-based storage.
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.n_bands();
        let mut worst = 0.0f64;
        for s in 0..n {
            for t in s..n {
                worst = worst.max((self.entries[(s, t)] - self.entries[(t, s)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.n_bands();
        let mut worst = 0.0f64;
        for s in 0..n {
            for t in 0..n {
                if s != t {
                    worst = worst.max(self.entries[(s, t)].norm());
                }
            }
        }
        worst
    }

    pub fn summary(&self) -> MomentumSummary {
        MomentumSummary {
            alpha: self.alpha,
            k: self.k.clone(),
            n_bands: self.n_bands(),
            frobenius_norm: self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
            max_entry: self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max),
            max_off_diagonal: self.max_off_diagonal(),
            hermiticity_defect: self.hermiticity_defect(),
        }
    }

    /// `s,t,re,im` rows with 1-based band labels.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::with_header(&["s", "t", "re", "im"]);
        let n = self.n_bands();
        for s in 0..n {
            for t in 0..n {
                let z = self.entries[(s, t)];
                csv.row(&[(s + 1).into(), (t + 1).into(), z.re.into(), z.im.into()]);
            }
        }
        csv.finish()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentumSummary {
    pub alpha: usize,
    pub k: Vec<f64>,
    pub n_bands: usize,
    pub frobenius_norm: f64,
    pub max_entry: f64,
    pub max_off_diagonal: f64,
    pub hermiticity_defect: f64,
}

pub fn momentum_matrix(spec: &FiberSpectrum, alpha: usize) -> Result<MomentumMatrix> {
    if alpha >= spec.basis().dim() {
        return Err(invalid(format!(
            "direction {alpha} out of range for dimension {}",
            spec.basis().dim()
        )));
    }
    let c = spec.coefficients()?;
    let p = kinetic_momenta(spec.basis(), spec.k(), alpha);
    let mut weighted = c.clone();
    for (j, mut col) in weighted.column_iter_mut().enumerate() {
        col *= Complex64::new(p[j], 0.0);
    }
    let entries = weighted * c.adjoint();
    Ok(MomentumMatrix {
        alpha,
        k: spec.k().to_vec(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum FeynmanHellmann {
    Checked {
        residual: f64,
        diagonal: f64,
        derivative: f64,
    },
    /// The band is degenerate at `k`; no comparison is meaningful.
    Skipped { gap: f64 },
}

impl FeynmanHellmann {
    pub fn residual(&self) -> Option<f64> {
        match self {
            Self::Checked { residual, .. } => Some(*residual),
            Self::Skipped { .. } => None,
        }
    }
}

/// Compares `2 π̂_jj(α,k)` with the central difference of `λ_j` along `k_α`.
pub fn feynman_hellmann_check(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    k: &[f64],
    band: usize,
    alpha: usize,
    step: f64,
) -> Result<FeynmanHellmann> {
    if band == 0 {
        return Err(invalid("band labels start at 1"));
    }
    if !(step > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let n = band + 1;
    let spec = fiber_spectrum(v, basis, k, Some(n))?;
    let gap = spec.gap(band);
    if gap <= FH_GAP_THRESHOLD {
        return Ok(FeynmanHellmann::Skipped { gap });
    }
    let diagonal = momentum_matrix(&spec, alpha)?.entry(band, band).re;

    let shifted = |sign: f64| -> Result<f64> {
        let mut kk = k.to_vec();
        kk[alpha] += sign * step;
        Ok(fiber_spectrum(v, basis, &kk, Some(n))?.eigenvalue(band))
    };
    let derivative = (shifted(1.0)? - shifted(-1.0)?) / (2.0 * step);
    Ok(FeynmanHellmann::Checked {
        residual: (2.0 * diagonal - derivative).abs(),
        diagonal,
        derivative,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupNormReport {
    pub eigenvalues: Vec<f64>,
    /// `Σ_m |c_{j,m}|`, an upper bound for `sup_x |u_j(x)|`.
    pub bounds: Vec<f64>,
    /// Exponent of `bound ~ λ^p` over the supplied bands.
    pub growth: LineFit,
}

pub const SUPNORM_MIN_BANDS: usize = 16;

pub fn supnorm_growth(spec: &FiberSpectrum) -> Result<SupNormReport> {
    let c = spec.coefficients()?;
    let n = spec.n_bands();
    if n < SUPNORM_MIN_BANDS {
        return Err(invalid(format!(
            "sup-norm growth needs at least {SUPNORM_MIN_BANDS} bands, got {n}"
        )));
    }
    let bounds: Vec<f64> = c
        .row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum())
        .collect();
    let eigenvalues = spec.eigenvalues().to_vec();
    let growth = fit_power_law(&eigenvalues, &bounds)?;
    Ok(SupNormReport {
        eigenvalues,
        bounds,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::fiber_spectrum;
    use crate::model::{build_basis, build_potential, PotentialSpec};
    use std::f64::consts::PI;

    fn cos_potential() -> FourierPotential {
        build_potential(&PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0)).unwrap()
    }

    #[test]
    fn free_case_is_diagonal() {
        let v = build_potential(&PotentialSpec::zero(1, 1.0)).unwrap();
        let s = fiber_spectrum(&v, &build_basis(1, 8).unwrap(), &[0.3], None).unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        assert_eq!(pi.max_off_diagonal(), 0.0);
        // the ordering at k=0.3 is m = 0, -1, 1, -2, 2, ...
        assert!((pi.entry(1, 1).re - 0.3).abs() < 1e-14);
        assert!((pi.entry(2, 2).re - (-2.0 * PI + 0.3)).abs() < 1e-12);
        assert!((pi.entry(3, 3).re - (2.0 * PI + 0.3)).abs() < 1e-12);
    }

    #[test]
    fn hermitian_for_cosine() {
        let s = fiber_spectrum(&cos_potential(), &build_basis(1, 64).unwrap(), &[0.4], None)
            .unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        assert!(pi.hermiticity_defect() < 1e-12);
        for j in 1..=pi.n_bands() {
            assert!(pi.entry(j, j).im.abs() < 1e-12);
        }
        assert!((pi.entry(1, 2).norm() - pi.entry(2, 1).norm()).abs() < 1e-12);
    }

    #[test]
    fn direction_out_of_range() {
        let s = fiber_spectrum(&cos_potential(), &build_basis(1, 4).unwrap(), &[0.0], None)
            .unwrap();
        assert!(momentum_matrix(&s, 1).is_err());
        assert!(momentum_matrix(&s.without_coefficients(), 0).is_err());
    }

    #[test]
    fn feynman_hellmann_free_exact() {
        let v = build_potential(&PotentialSpec::zero(1, 1.0)).unwrap();
        let b = build_basis(1, 8).unwrap();
        let r = feynman_hellmann_check(&v, &b, &[0.3], 1, 0, DEFAULT_FD_STEP).unwrap();
        assert!(r.residual().unwrap() <= 1e-10, "{r:?}");
    }

    #[test]
    fn feynman_hellmann_cosine() {
        let b = build_basis(1, 64).unwrap();
        let r = feynman_hellmann_check(&cos_potential(), &b, &[0.5], 1, 0, 1e-4).unwrap();
        assert!(r.residual().unwrap() <= 1e-6, "{r:?}");
    }

    #[test]
    fn feynman_hellmann_skips_degenerate() {
        let v = build_potential(&PotentialSpec::zero(1, 1.0)).unwrap();
        let b = build_basis(1, 8).unwrap();
        let r = feynman_hellmann_check(&v, &b, &[PI], 1, 0, DEFAULT_FD_STEP).unwrap();
        assert!(matches!(r, FeynmanHellmann::Skipped { .. }));
    }

    #[test]
    fn supnorm_free_and_cosine() {
        let v = build_potential(&PotentialSpec::zero(1, 1.0)).unwrap();
        let s = fiber_spectrum(&v, &build_basis(1, 16).unwrap(), &[0.2], None).unwrap();
        let rep = supnorm_growth(&s).unwrap();
        assert!(rep.bounds.iter().all(|b| (b - 1.0).abs() < 1e-12));

        let s = fiber_spectrum(&cos_potential(), &build_basis(1, 128).unwrap(), &[0.2], Some(100))
            .unwrap();
        let rep = supnorm_growth(&s).unwrap();
        assert!(rep.bounds.iter().all(|&b| b >= 1.0 - 1e-9));
        assert!(rep.growth.slope < 1.0, "{:?}", rep.growth);

        let few = fiber_spectrum(&v, &build_basis(1, 16).unwrap(), &[0.2], Some(8)).unwrap();
        assert!(supnorm_growth(&few).is_err());
    }

    #[test]
    fn supnorm_truncated_delta() {
        let v = build_potential(&PotentialSpec::truncated_delta(1.0, 64, 1.0)).unwrap();
        let s = fiber_spectrum(&v, &build_basis(1, 128).unwrap(), &[0.0], Some(64)).unwrap();
        let rep = supnorm_growth(&s).unwrap();
        assert!(rep.growth.slope.is_finite());
    }
}
