//! Lattice, potential, basis, Brillouin-zone and contour data types.
//!
//! The lattice is fixed to `Z^d` with the unit cube as cell, so reciprocal
//! vectors are `2π m` for integer `m` and the Brillouin zone is `[-π, π)^d`.
//! Frequency vectors are stored as `[i64; 3]`; components beyond the
//! dimension are always zero.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Freq = [i64; 3];

/// Default guard on the plane-wave basis size.
pub const DEFAULT_MAX_BASIS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub freq: Freq,
    /// Coefficient of `cos(2π m·x)`.
    pub cos: f64,
    /// Coefficient of `sin(2π m·x)`.
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum PotentialFamily {
    Zero,
    TrigPolynomial {
        terms: Vec<TrigTerm>,
    },
    /// `|V̂(m)| = A (1 + |m|)^{-s}` for `0 < |m|_∞ <= K`.
    PowerLawDecay {
        amplitude: f64,
        exponent: f64,
        cutoff: i64,
        seed: Option<u64>,
    },
    /// `|V̂(m)| = A exp(-|m|² / 2w²)` for `0 < |m|_∞ <= K`.
    GaussianDecay {
        amplitude: f64,
        width: f64,
        cutoff: i64,
        seed: Option<u64>,
    },
    /// Fourier truncation of the periodic delta comb: `V̂(m) = g` for `|m|_∞ <= K`.
    TruncatedDelta {
        strength: f64,
        cutoff: i64,
    },
    /// Complex Gaussian random coefficients under a Gaussian envelope.
    RandomSmooth {
        amplitude: f64,
        width: f64,
        cutoff: i64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub family: PotentialFamily,
    pub shift: f64,
}

impl PotentialSpec {
    pub fn new(dim: usize, family: PotentialFamily, shift: f64) -> Self {
        Self { dim, family, shift }
    }

    pub fn zero(dim: usize, shift: f64) -> Self {
        Self::new(dim, PotentialFamily::Zero, shift)
    }

    /// `Σ a_i cos(2π m_i x)` in one dimension.
    pub fn cosines_1d(terms: &[(i64, f64)], shift: f64) -> Self {
        let terms = terms
            .iter()
            .map(|&(m, a)| TrigTerm {
                freq: [m, 0, 0],
                cos: a,
                sin: 0.0,
            })
            .collect();
        Self::new(1, PotentialFamily::TrigPolynomial { terms }, shift)
    }

    pub fn truncated_delta(strength: f64, cutoff: i64, shift: f64) -> Self {
        Self::new(
            1,
            PotentialFamily::TruncatedDelta { strength, cutoff },
            shift,
        )
    }

    pub fn gaussian(dim: usize, amplitude: f64, width: f64, cutoff: i64, shift: f64) -> Self {
        Self::new(
            dim,
            PotentialFamily::GaussianDecay {
                amplitude,
                width,
                cutoff,
                seed: None,
            },
            shift,
        )
    }

    /// Replaces the random seed of seeded families; other families are returned unchanged.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self.family {
            PotentialFamily::PowerLawDecay { seed, .. }
            | PotentialFamily::GaussianDecay { seed, .. } => *seed = Some(new_seed),
            PotentialFamily::RandomSmooth { seed, .. } => *seed = new_seed,
            _ => {}
        }
        self
    }
}

/// A real periodic potential given by finitely many Fourier coefficients,
/// `V(x) = Σ_m V̂(m) e^{2πi m·x}`. The constant shift is included in `V̂(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierPotential {
    dim: usize,
    coeffs: BTreeMap<Freq, Complex64>,
    shift: f64,
}

impl FourierPotential {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn coeff(&self, m: &Freq) -> Complex64 {
        self.coeffs.get(m).copied().unwrap_or_default()
    }

    /// Nonzero coefficients in lexicographic frequency order.
    pub fn support(&self) -> impl Iterator<Item = (&Freq, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest sup-norm of a frequency carrying a coefficient.
    pub fn max_freq(&self) -> i64 {
        self.coeffs.keys().map(sup_norm).max().unwrap_or(0)
    }

    /// Same potential with the constant shift replaced by `c`.
    pub fn with_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        let zero = [0; 3];
        let v0 = out.coeff(&zero) + Complex64::new(c - self.shift, 0.0);
        out.set(zero, v0);
        out.shift = c;
        out
    }

    /// Point evaluation `V(x)`; the imaginary part is rounding noise for a valid potential.
    pub fn evaluate(&self, x: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(m, v)| {
                let phase: f64 = (0..self.dim).map(|a| 2.0 * PI * m[a] as f64 * x[a]).sum();
                v * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Largest violation of `V̂(-m) = conj(V̂(m))`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(m, v)| (self.coeff(&negate(m)) - v.conj()).norm())
            .fold(0.0, f64::max)
    }

    fn set(&mut self, m: Freq, v: Complex64) {
        if v == Complex64::default() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, v);
        }
    }

    fn add(&mut self, m: Freq, v: Complex64) {
        let cur = self.coeff(&m);
        self.set(m, cur + v);
    }
}

pub fn sup_norm(m: &Freq) -> i64 {
    m.iter().map(|c| c.abs()).max().unwrap_or(0)
}

fn euclid(m: &Freq) -> f64 {
    m.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt()
}

fn negate(m: &Freq) -> Freq {
    [-m[0], -m[1], -m[2]]
}

/// True for the half of `Z^d \ {0}` whose first nonzero component is positive.
fn is_positive_half(m: &Freq) -> bool {
    m.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// All frequencies of the box `[-k, k]^d` in lexicographic order.
fn box_freqs(dim: usize, k: i64) -> Vec<Freq> {
    let side = (2 * k + 1) as usize;
    let total = side.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut m = [0i64; 3];
            for a in (0..dim).rev() {
                m[a] = (idx % side) as i64 - k;
                idx /= side;
            }
            m
        })
        .collect()
}

fn check_dim(dim: usize) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(invalid(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    Ok(())
}

fn check_cutoff(cutoff: i64) -> Result<()> {
    if cutoff < 1 {
        return Err(invalid(format!("Fourier cutoff must be >= 1, got {cutoff}")));
    }
    Ok(())
}

/// Realizes a potential specification as a finite Fourier series.
pub fn build_potential(spec: &PotentialSpec) -> Result<FourierPotential> {
    check_dim(spec.dim)?;
    if !spec.shift.is_finite() {
        return Err(invalid("shift must be finite"));
    }
    let dim = spec.dim;
    let mut pot = FourierPotential {
        dim,
        coeffs: BTreeMap::new(),
        shift: spec.shift,
    };

    match &spec.family {
        PotentialFamily::Zero => {}
        PotentialFamily::TrigPolynomial { terms } => {
            for t in terms {
                if t.freq[dim..].iter().any(|&c| c != 0) {
                    return Err(invalid(format!(
                        "trig term frequency {:?} has components beyond dimension {dim}",
                        t.freq
                    )));
                }
                if !(t.cos.is_finite() && t.sin.is_finite()) {
                    return Err(invalid("trig amplitudes must be finite"));
                }
                if t.freq == [0; 3] {
                    pot.add(t.freq, Complex64::new(t.cos, 0.0));
                    continue;
                }
                // a cos θ + b sin θ = (a/2 - ib/2) e^{iθ} + (a/2 + ib/2) e^{-iθ}
                let half = Complex64::new(0.5 * t.cos, -0.5 * t.sin);
                pot.add(t.freq, half);
                pot.add(negate(&t.freq), half.conj());
            }
        }
        PotentialFamily::PowerLawDecay {
            amplitude,
            exponent,
            cutoff,
            seed,
        } => {
            if *exponent <= 1.0 {
                return Err(invalid(format!(
                    "power-law decay exponent must exceed 1, got {exponent}"
                )));
            }
            check_cutoff(*cutoff)?;
            let s = *exponent;
            fill_envelope(&mut pot, *cutoff, *seed, |m| {
                amplitude * (1.0 + euclid(m)).powf(-s)
            });
        }
        PotentialFamily::GaussianDecay {
            amplitude,
            width,
            cutoff,
            seed,
        } => {
            if *width <= 0.0 {
                return Err(invalid(format!("gaussian width must be positive, got {width}")));
            }
            check_cutoff(*cutoff)?;
            let w2 = 2.0 * width * width;
            fill_envelope(&mut pot, *cutoff, *seed, |m| {
                let r = euclid(m);
                amplitude * (-r * r / w2).exp()
            });
        }
        PotentialFamily::TruncatedDelta { strength, cutoff } => {
            if *strength <= 0.0 {
                return Err(invalid(format!(
                    "delta strength must be positive, got {strength}"
                )));
            }
            check_cutoff(*cutoff)?;
            for m in box_freqs(dim, *cutoff) {
                pot.set(m, Complex64::new(*strength, 0.0));
            }
        }
        PotentialFamily::RandomSmooth {
            amplitude,
            width,
            cutoff,
            seed,
        } => {
            if *width <= 0.0 {
                return Err(invalid(format!("random-smooth width must be positive, got {width}")));
            }
            check_cutoff(*cutoff)?;
            let w2 = 2.0 * width * width;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            for m in box_freqs(dim, *cutoff).into_iter().filter(is_positive_half) {
                let r = euclid(&m);
                let env = amplitude * (-r * r / w2).exp() * std::f64::consts::FRAC_1_SQRT_2;
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                let v = Complex64::new(re, im) * env;
                pot.set(m, v);
                pot.set(negate(&m), v.conj());
            }
        }
    }

    pot.add([0; 3], Complex64::new(spec.shift, 0.0));
    Ok(pot)
}

/// Fills `V̂(±m)` for `0 < |m|_∞ <= cutoff` with the given real envelope, optionally
/// multiplied by seeded random phases (conjugate pairs).
fn fill_envelope(
    pot: &mut FourierPotential,
    cutoff: i64,
    seed: Option<u64>,
    envelope: impl Fn(&Freq) -> f64,
) {
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    for m in box_freqs(pot.dim, cutoff)
        .into_iter()
        .filter(is_positive_half)
    {
        let mag = envelope(&m);
        let v = match rng.as_mut() {
            Some(r) => Complex64::from_polar(mag, 2.0 * PI * r.random::<f64>()),
            None => Complex64::new(mag, 0.0),
        };
        pot.set(m, v);
        pot.set(negate(&m), v.conj());
    }
}

/// Plane waves `e^{2πi m·x}` with `|m|_∞ <= m_cut`, lexicographically ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveBasis {
    dim: usize,
    m_cut: i64,
    freqs: Vec<Freq>,
}

impl PlaneWaveBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m_cut(&self) -> i64 {
        self.m_cut
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn freqs(&self) -> &[Freq] {
        &self.freqs
    }

    pub fn freq(&self, i: usize) -> &Freq {
        &self.freqs[i]
    }

    pub fn index_of(&self, m: &Freq) -> Option<usize> {
        let side = 2 * self.m_cut + 1;
        let mut idx = 0i64;
        for &ma in &m[..self.dim] {
            let c = ma + self.m_cut;
            if !(0..side).contains(&c) {
                return None;
            }
            idx = idx * side + c;
        }
        if m[self.dim..].iter().any(|&c| c != 0) {
            return None;
        }
        Some(idx as usize)
    }
}

pub fn build_basis(dim: usize, m_cut: i64) -> Result<PlaneWaveBasis> {
    build_basis_with_limit(dim, m_cut, DEFAULT_MAX_BASIS)
}

pub fn build_basis_with_limit(dim: usize, m_cut: i64, limit: usize) -> Result<PlaneWaveBasis> {
    check_dim(dim)?;
    if m_cut < 1 {
        return Err(invalid(format!("basis cutoff must be >= 1, got {m_cut}")));
    }
    let side = (2 * m_cut + 1) as usize;
    let size = side
        .checked_pow(dim as u32)
        .ok_or(Error::BasisTooLarge { size: usize::MAX, limit })?;
    if size > limit {
        return Err(Error::BasisTooLarge { size, limit });
    }
    Ok(PlaneWaveBasis {
        dim,
        m_cut,
        freqs: box_freqs(dim, m_cut),
    })
}

/// Uniform quadrature grid over the Brillouin zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KGrid {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl KGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// A grid consisting of explicitly listed points with equal weights summing to `(2π)^d`.
    pub fn from_points(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(dim)?;
        if points.is_empty() || points.iter().any(|p| p.len() != dim) {
            return Err(invalid("k-points must be non-empty and match the dimension"));
        }
        let w = (2.0 * PI).powi(dim as i32) / points.len() as f64;
        let weights = vec![w; points.len()];
        Ok(Self {
            dim,
            points,
            weights,
        })
    }
}

/// Monkhorst–Pack grid: `k_i = 2π (i + 1/2)/n - π`, symmetric about the origin,
/// with equal weights `(2π/n)^d`.
pub fn sample_brillouin(dim: usize, n: usize) -> Result<KGrid> {
    sample_brillouin_shifted(dim, n, 0.0)
}

/// Monkhorst–Pack grid displaced by `offset` grid spacings along every axis.
pub fn sample_brillouin_shifted(dim: usize, n: usize, offset: f64) -> Result<KGrid> {
    check_dim(dim)?;
    if n == 0 {
        return Err(invalid("points per axis must be >= 1"));
    }
    let step = 2.0 * PI / n as f64;
    let axis: Vec<f64> = (0..n)
        .map(|i| -PI + step * (i as f64 + 0.5 + offset))
        .collect();
    let total = n.pow(dim as u32);
    let points = (0..total)
        .map(|mut idx| {
            let mut k = vec![0.0; dim];
            for a in (0..dim).rev() {
                k[a] = axis[idx % n];
                idx /= n;
            }
            k
        })
        .collect();
    Ok(KGrid {
        dim,
        points,
        weights: vec![step.powi(dim as i32); total],
    })
}

/// Truncated contour `Γ` around `[-1, ∞)`: two horizontal lines at `±iδ`
/// joined by the vertical segment at `Re z = -1`, traversed counterclockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub beta: f64,
    pub mu: f64,
    pub delta: f64,
    pub x_max: f64,
    /// Gauss–Legendre nodes on each horizontal line.
    pub n_quad: usize,
}

/// Gauss–Legendre order per quadrature panel on the contour.
pub const CONTOUR_PANEL_ORDER: usize = 16;

impl ContourSpec {
    pub fn new(beta: f64, mu: f64, delta: f64, x_max: f64, n_quad: usize) -> Result<Self> {
        let spec = Self {
            beta,
            mu,
            delta,
            x_max,
            n_quad,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `δ = π/(2β)`, `x_max = max(μ, top) + 20/β`, and panels no wider than `δ`.
    pub fn with_defaults(beta: f64, mu: f64, top: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid(format!("beta must be positive, got {beta}")));
        }
        let delta = PI / (2.0 * beta);
        let x_max = mu.max(top) + 20.0 / beta;
        let panels = ((x_max + 1.0) / delta).ceil().max(1.0) as usize;
        Self::new(beta, mu, delta, x_max, panels * CONTOUR_PANEL_ORDER)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !self.mu.is_finite() {
            return Err(invalid("mu must be finite"));
        }
        let limit = PI / (2.0 * self.beta);
        if !(self.delta > 0.0 && self.delta <= limit * (1.0 + 1e-12)) {
            return Err(invalid(format!(
                "delta must lie in (0, π/(2β)] = (0, {limit}], got {}",
                self.delta
            )));
        }
        if !(self.x_max > -1.0) {
            return Err(invalid("x_max must exceed -1"));
        }
        if self.n_quad == 0 {
            return Err(invalid("n_quad must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_family_has_only_shift() {
        let v = build_potential(&PotentialSpec::zero(1, 1.0)).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.coeff(&[0, 0, 0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn cosine_coefficients() {
        let v = build_potential(&PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0)).unwrap();
        assert_eq!(v.coeff(&[1, 0, 0]), Complex64::new(1.0, 0.0));
        assert_eq!(v.coeff(&[-1, 0, 0]), Complex64::new(1.0, 0.0));
        assert_eq!(v.coeff(&[0, 0, 0]), Complex64::new(3.0, 0.0));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn sine_term_is_conjugate_symmetric() {
        let spec = PotentialSpec::new(
            1,
            PotentialFamily::TrigPolynomial {
                terms: vec![TrigTerm {
                    freq: [2, 0, 0],
                    cos: 0.0,
                    sin: 4.0,
                }],
            },
            0.0,
        );
        let v = build_potential(&spec).unwrap();
        assert_eq!(v.coeff(&[2, 0, 0]), Complex64::new(0.0, -2.0));
        assert_eq!(v.coeff(&[-2, 0, 0]), Complex64::new(0.0, 2.0));
        let x = 0.1;
        let expect = 4.0 * (2.0 * PI * 2.0 * x).sin();
        assert!((v.evaluate(&[x]).re - expect).abs() < 1e-12);
    }

    #[test]
    fn truncated_delta_coefficients() {
        let v = build_potential(&PotentialSpec::truncated_delta(1.0, 64, 2.5)).unwrap();
        assert_eq!(v.len(), 129);
        for m in -64..=64i64 {
            let expect = if m == 0 { 3.5 } else { 1.0 };
            assert_eq!(v.coeff(&[m, 0, 0]).re, expect);
        }
        assert_eq!(v.max_freq(), 64);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_potential(&PotentialSpec::truncated_delta(0.0, 4, 0.0)).is_err());
        assert!(build_potential(&PotentialSpec::truncated_delta(-1.0, 4, 0.0)).is_err());
        let pl = PotentialSpec::new(
            1,
            PotentialFamily::PowerLawDecay {
                amplitude: 1.0,
                exponent: 1.0,
                cutoff: 8,
                seed: None,
            },
            0.0,
        );
        assert!(matches!(build_potential(&pl), Err(Error::InvalidParameter(_))));
        assert!(build_potential(&PotentialSpec::zero(4, 0.0)).is_err());
    }

    #[test]
    fn random_families_are_reproducible_and_real() {
        let spec = PotentialSpec::new(
            2,
            PotentialFamily::RandomSmooth {
                amplitude: 1.0,
                width: 2.0,
                cutoff: 4,
                seed: 7,
            },
            1.0,
        );
        let a = build_potential(&spec).unwrap();
        let b = build_potential(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.conjugate_symmetry_defect() < 1e-15);
        let c = build_potential(&spec.clone().with_seed(8)).unwrap();
        assert_ne!(a, c);
        for x in [[0.1, 0.7], [0.33, -0.2], [0.5, 0.5]] {
            assert!(a.evaluate(&x).im.abs() < 1e-12);
        }
    }

    #[test]
    fn shift_covariance() {
        let spec = PotentialSpec::gaussian(1, 1.0, 2.0, 10, 1.0);
        let a = build_potential(&spec).unwrap();
        let b = build_potential(&PotentialSpec { shift: 4.0, ..spec }).unwrap();
        for (m, v) in a.support() {
            let d = b.coeff(m) - v;
            let expect = if *m == [0; 3] { 3.0 } else { 0.0 };
            assert!((d.re - expect).abs() < 1e-15 && d.im == 0.0);
        }
        assert_eq!(a.with_shift(4.0), b);
    }

    #[test]
    fn basis_ordering() {
        let b = build_basis(1, 1).unwrap();
        assert_eq!(b.freqs(), &[[-1, 0, 0], [0, 0, 0], [1, 0, 0]]);
        let b = build_basis(2, 1).unwrap();
        assert_eq!(b.len(), 9);
        assert_eq!(b.freq(0), &[-1, -1, 0]);
        assert_eq!(b.freq(1), &[-1, 0, 0]);
        assert_eq!(b.freq(8), &[1, 1, 0]);
        assert_eq!(build_basis(1, 128).unwrap().len(), 257);
        for (i, m) in b.freqs().iter().enumerate() {
            assert_eq!(b.index_of(m), Some(i));
        }
        assert_eq!(b.index_of(&[2, 0, 0]), None);
    }

    #[test]
    fn basis_size_guard() {
        assert!(matches!(
            build_basis(3, 20),
            Err(Error::BasisTooLarge { size: 68921, .. })
        ));
        assert!(build_basis(1, 0).is_err());
    }

    #[test]
    fn brillouin_grids() {
        let g = sample_brillouin(1, 1).unwrap();
        assert_eq!(g.points, vec![vec![0.0]]);
        assert!((g.weights[0] - 2.0 * PI).abs() < 1e-15);

        let g = sample_brillouin(1, 4).unwrap();
        assert_eq!(g.len(), 4);
        assert!((g.total_weight() - 2.0 * PI).abs() < 1e-12);
        assert!(g.points.iter().all(|k| (-PI..PI).contains(&k[0])));

        let g = sample_brillouin(2, 3).unwrap();
        assert_eq!(g.len(), 9);
        assert!((g.total_weight() - 4.0 * PI * PI).abs() < 1e-12);
        assert!(sample_brillouin(1, 0).is_err());
    }

    #[test]
    fn contour_validation() {
        let beta = 2.0;
        assert!(ContourSpec::new(beta, 0.0, PI / (2.0 * beta), 10.0, 64).is_ok());
        assert!(ContourSpec::new(beta, 0.0, PI / beta, 10.0, 64).is_err());
        assert!(ContourSpec::new(beta, 0.0, 0.0, 10.0, 64).is_err());
        assert!(ContourSpec::new(-1.0, 0.0, 0.1, 10.0, 64).is_err());
        let c = ContourSpec::with_defaults(1.0, 0.0, 5.0).unwrap();
        assert!((c.x_max - 25.0).abs() < 1e-12);
    }
}
