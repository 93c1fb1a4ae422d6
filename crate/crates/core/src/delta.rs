//! Semi-analytic delta interaction on the unit circle `[-1/2, 1/2]` at `k = 0`.
//!
//! Even states are `C (cos βx + (g/β) sin βx)` on `[0, 1/2]`, reflected to
//! the left half, with `β tan(β/2) = g`. The derivative jumps by `2Cg` at the
//! origin, so this `g` is half the coefficient of a `δ(x)` potential: the
//! plane-wave family with `V̂ = γ` on a large box approaches the model with
//! `g = γ/2`.
//!
//! Odd states `√2 sin(2πjx)` do not see the interaction.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::fit::{fit_line, fit_power_law, LineFit};
use crate::output::Csv;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvenLevel {
    pub j: usize,
    pub beta: f64,
    /// `β - 2π(j-1)`, kept separately so trigonometric values stay exact for large `j`.
    pub offset: f64,
    pub lambda: f64,
    pub norm: f64,
    /// `|β tan(β/2) - g|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaModel {
    pub g: f64,
    pub even: Vec<EvenLevel>,
    /// `4π² j²` for `j = 1..=j_max`.
    pub odd: Vec<f64>,
}

impl DeltaModel {
    pub fn j_max(&self) -> usize {
        self.even.len()
    }

    pub fn ground(&self) -> &EvenLevel {
        &self.even[0]
    }

    pub fn levels_csv(&self) -> String {
        let mut csv = Csv::with_header(&["j", "parity", "lambda"]);
        for (lvl, &odd) in self.even.iter().zip(&self.odd) {
            csv.row(&[lvl.j.into(), "even".into(), lvl.lambda.into()]);
            csv.row(&[lvl.j.into(), "odd".into(), odd.into()]);
        }
        csv.finish()
    }
}

/// `∫_0^{1/2} (cos βx + (g/β) sin βx)² dx` written with `sin β = sin ε`,
/// `cos β = cos ε`.
fn half_cell_square_integral(g: f64, beta: f64, eps: f64) -> f64 {
    let (s, c) = eps.sin_cos();
    let r = g / beta;
    (0.25 + s / (4.0 * beta)) + r * r * (0.25 - s / (4.0 * beta)) + r * (1.0 - c) / (2.0 * beta)
}

fn even_level(g: f64, j: usize) -> Result<EvenLevel> {
    let base = 2.0 * PI * (j - 1) as f64;
    // β sin(β/2) - g cos(β/2) on the sub-bracket where tan(β/2) > 0; no poles.
    let f = |e: f64| (base + e) * (e / 2.0).sin() - g * (e / 2.0).cos();
    let (mut lo, mut hi) = (0.0, PI);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::NotBracketed {
            lo: base,
            hi: base + PI,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let beta = base + eps;
    let norm = 1.0 / (2.0 * half_cell_square_integral(g, beta, eps)).sqrt();
    Ok(EvenLevel {
        j,
        beta,
        offset: eps,
        lambda: beta * beta,
        norm,
        residual: (beta * (eps / 2.0).tan() - g).abs(),
    })
}

pub fn delta_levels(g: f64, j_max: usize) -> Result<DeltaModel> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(invalid(format!("delta strength must be positive, got {g}")));
    }
    if j_max == 0 {
        return Err(invalid("need at least one level"));
    }
    let even = (1..=j_max)
        .into_par_iter()
        .map(|j| even_level(g, j))
        .collect::<Result<Vec<_>>>()?;
    let odd = (1..=j_max)
        .map(|j| 4.0 * PI * PI * (j * j) as f64)
        .collect();
    Ok(DeltaModel { g, even, odd })
}

/// `π̂_j = i⟨ũ_1, u_j'⟩` split into its `1/j` term and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiAsymptote {
    pub j: usize,
    pub exact: Complex64,
    pub leading: Complex64,
    pub remainder: Complex64,
}

/// Closed form `π̂_j = -i 2√2 C_1 g q / (q² - β_1²)` with `q = 2πj`.
pub fn delta_pi(model: &DeltaModel, j: usize) -> Result<PiAsymptote> {
    if j == 0 {
        return Err(invalid("odd levels start at j = 1"));
    }
    let EvenLevel { beta, norm, .. } = *model.ground();
    let g = model.g;
    let q = 2.0 * PI * j as f64;
    let d = q * q - beta * beta;
    let exact = -2.0 * SQRT_2 * norm * g * q / d;
    let leading = -SQRT_2 * norm * g / (PI * j as f64);
    let remainder = -2.0 * SQRT_2 * norm * g * beta * beta / (q * d);
    Ok(PiAsymptote {
        j,
        exact: Complex64::new(0.0, exact),
        leading: Complex64::new(0.0, leading),
        remainder: Complex64::new(0.0, remainder),
    })
}

pub fn pi_table_csv(rows: &[PiAsymptote]) -> String {
    let mut csv = Csv::with_header(&["j", "im_pi", "leading", "remainder"]);
    for r in rows {
        csv.row(&[r.j.into(), r.exact.im.into(), r.leading.im.into(), r.remainder.im.into()]);
    }
    csv.finish()
}

/// `S_J(t) = Σ_{j<=J} sin(4π² j² t) / j²`.
pub fn riemann_partial_sum(t: f64, cutoff: usize) -> f64 {
    let tau = 4.0 * PI * PI * t;
    (1..=cutoff)
        .map(|j| {
            let jj = (j as f64) * (j as f64);
            (tau * jj).sin() / jj
        })
        .sum()
}

pub const HOLDER_MIN_CUTOFF: usize = 100;
pub const HOLDER_SAMPLES: usize = 25;
/// Truncation error allowed relative to the smallest sampled `|S_J(t)|`.
pub const HOLDER_TAIL_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Serialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub fit: LineFit,
    pub cutoff: usize,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    /// `max_t |S_{2J}(t) - S_J(t)|`.
    pub tail: f64,
}

/// Log-log fit of `|S_J(t)|` on a log-spaced grid in `[t_min, t_max]`.
///
/// The tail is estimated by doubling the cutoff; the plain bound
/// `Σ_{j>J} 1/j²` ignores the cancellation that makes the series converge
/// fast once `J² t` is large.
pub fn holder_fit(t_min: f64, t_max: f64, cutoff: usize) -> Result<HolderFit> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(invalid(format!("invalid t range [{t_min}, {t_max}]")));
    }
    if cutoff < HOLDER_MIN_CUTOFF {
        return Err(invalid(format!(
            "cutoff {cutoff} below the minimum {HOLDER_MIN_CUTOFF}"
        )));
    }
    let ratio = (t_max / t_min).ln() / (HOLDER_SAMPLES - 1) as f64;
    let t: Vec<f64> = (0..HOLDER_SAMPLES)
        .map(|i| t_min * (ratio * i as f64).exp())
        .collect();
    let pairs: Vec<(f64, f64)> = t
        .par_iter()
        .map(|&ti| (riemann_partial_sum(ti, cutoff), riemann_partial_sum(ti, 2 * cutoff)))
        .collect();
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let tail = pairs.iter().map(|p| (p.1 - p.0).abs()).fold(0.0, f64::max);
    let smallest = values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let tol = HOLDER_TAIL_FRACTION * smallest;
    if tail >= tol {
        return Err(Error::TailTooLarge { tail, tol });
    }
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let fit = fit_power_law(&t, &abs)?;
    Ok(HolderFit {
        exponent: fit.slope,
        fit,
        cutoff,
        t,
        values,
        tail,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaDivergence {
    pub g: f64,
    pub cutoffs: Vec<usize>,
    /// `2 Σ_{j<=J} |π̂_j|² (λ_j - λ̃_1)`.
    pub partial_sums: Vec<f64>,
    /// Linear fit over the upper half of the cutoffs.
    pub fit: LineFit,
    pub slope: f64,
    /// `16 C_1² g²`.
    pub predicted: f64,
}

impl DeltaDivergence {
    pub fn relative_error(&self) -> f64 {
        (self.slope - self.predicted).abs() / self.predicted
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::with_header(&["J", "R_J"]);
        for (&j, &r) in self.cutoffs.iter().zip(&self.partial_sums) {
            csv.row(&[j.into(), r.into()]);
        }
        csv.finish()
    }
}

pub fn delta_sumrule_divergence(model: &DeltaModel, cutoffs: &[usize]) -> Result<DeltaDivergence> {
    if cutoffs.len() < 4 {
        return Err(invalid("need at least four cutoffs for a tail fit"));
    }
    if cutoffs[0] == 0 || cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("cutoffs must be positive and strictly increasing"));
    }
    let EvenLevel { beta, norm, .. } = *model.ground();
    let g = model.g;
    let pre = 16.0 * norm * norm * g * g;
    let mut partial_sums = Vec::with_capacity(cutoffs.len());
    let mut acc = 0.0;
    let mut j = 0;
    for &cut in cutoffs {
        while j < cut {
            j += 1;
            let q = 2.0 * PI * j as f64;
            acc += pre * q * q / (q * q - beta * beta);
        }
        partial_sums.push(acc);
    }
    let half = cutoffs.len() / 2;
    let xs: Vec<f64> = cutoffs[half..].iter().map(|&c| c as f64).collect();
    let fit = fit_line(&xs, &partial_sums[half..])?;
    Ok(DeltaDivergence {
        g,
        cutoffs: cutoffs.to_vec(),
        partial_sums,
        slope: fit.slope,
        fit,
        predicted: pre,
    })
}
