//! Perturbation theory in `k` around a non-degenerate band.
//!
//! With `Π₀ = |u⟩⟨u|` the ground state projector at `k₀`, `Q = 1 - Π₀` and
//! `W = h(k) - h(k₀) = 2(k-k₀)·(p+k₀) + |k-k₀|²`, the Feshbach reduction reads
//! `λ = λ₁(k₀) + ⟨u, W u⟩ - ⟨Q W u, [Q(h(k) - λ)Q]^{-1} Q W u⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fiber::{assemble_fiber, fiber_spectrum, FiberSpectrum};
use crate::model::{FourierPotential, PlaneWaveBasis};
use crate::momentum::{MomentumMatrix, FH_GAP_THRESHOLD};

pub const MAX_ITERATIONS: usize = 200;
pub const DAMPING: f64 = 0.5;
/// Successive residual increases that count as divergence.
pub const DIVERGENCE_STREAK: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeshbachStep {
    pub lambda: f64,
    pub rhs: f64,
    pub residual: f64,
    pub damped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeshbachResult {
    pub lambda: f64,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<FeshbachStep>,
}

fn ground_gap_check(spec: &FiberSpectrum, band: usize) -> Result<()> {
    let gap = spec.gap(band);
    if gap <= FH_GAP_THRESHOLD {
        return Err(Error::Degenerate {
            band,
            k: spec.k().to_vec(),
            gap,
            threshold: FH_GAP_THRESHOLD,
        });
    }
    Ok(())
}

/// Fixed point of the Feshbach map for the lowest band, iterated from the
/// first-order estimate. Damping by [`DAMPING`] switches on once the
/// residual fails to decrease.
pub fn feshbach_eigenvalue(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    k0: &[f64],
    k: &[f64],
    tol: f64,
) -> Result<FeshbachResult> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if k.len() != k0.len() {
        return Err(invalid("k and k0 differ in dimension"));
    }
    let spec0 = fiber_spectrum(v, basis, k0, Some(2.min(basis.len())))?;
    ground_gap_check(&spec0, 1)?;
    let lambda0 = spec0.eigenvalue(1);
    let u: DVector<Complex64> = spec0.coefficients()?.row(0).transpose();
    let h = assemble_fiber(v, basis, k)?.matrix().clone();
    let n = basis.len();

    let dk: Vec<f64> = k.iter().zip(k0).map(|(a, b)| a - b).collect();
    let dk2: f64 = dk.iter().map(|x| x * x).sum();
    let w_diag: Vec<f64> = basis
        .freqs()
        .iter()
        .map(|m| {
            let lin: f64 = (0..dk.len())
                .map(|i| 2.0 * dk[i] * (2.0 * std::f64::consts::PI * m[i] as f64 + k0[i]))
                .sum();
            lin + dk2
        })
        .collect();
    let wu = DVector::from_iterator(
        n,
        u.iter().zip(&w_diag).map(|(c, &w)| c * w),
    );
    let first_order = u.dotc(&wu).re;
    let qwu = &wu - &u * u.dotc(&wu);
    let qwu_norm = qwu.norm();

    let projector = &u * u.adjoint();
    let q = DMatrix::<Complex64>::identity(n, n) - &projector;
    let rhs = |lambda: f64| -> Result<f64> {
        if qwu_norm == 0.0 {
            return Ok(lambda0 + first_order);
        }
        let mut shifted = h.clone();
        for i in 0..n {
            shifted[(i, i)] -= lambda;
        }
        let system = &q * shifted * &q + &projector;
        let x = system
            .lu()
            .solve(&qwu)
            .ok_or_else(|| invalid(format!("projected resolvent is singular at λ = {lambda}")))?;
        Ok(lambda0 + first_order - qwu.dotc(&x).re)
    };

    let mut lambda = lambda0 + first_order;
    let mut history = Vec::new();
    let mut prev_residual = f64::INFINITY;
    let mut rising = 0;
    let mut damping = false;
    for it in 1..=MAX_ITERATIONS {
        let r = rhs(lambda)?;
        let residual = (r - lambda).abs();
        if residual > prev_residual {
            rising += 1;
            damping = true;
        } else {
            rising = 0;
        }
        history.push(FeshbachStep {
            lambda,
            rhs: r,
            residual,
            damped: damping,
        });
        if residual <= tol {
            return Ok(FeshbachResult {
                lambda: r,
                iterations: it,
                residual,
                history,
            });
        }
        if rising >= DIVERGENCE_STREAK {
            return Err(Error::Divergence {
                iterations: it,
                last: lambda,
            });
        }
        prev_residual = residual;
        lambda = if damping {
            lambda + DAMPING * (r - lambda)
        } else {
            r
        };
    }
    Err(Error::Divergence {
        iterations: MAX_ITERATIONS,
        last: lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpCurvature {
    pub band: usize,
    pub alpha: usize,
    /// `2 + 8 Σ_{j≠n} |π̂_nj|² / (λ_n - λ_j)`.
    pub series: f64,
    pub bands_used: usize,
    pub finite_difference: Option<f64>,
}

/// Second-order `k·p` estimate of `∂²λ_n / ∂k_α²`.
pub fn kp_second_derivative(
    spec: &FiberSpectrum,
    pi: &MomentumMatrix,
    band: usize,
) -> Result<KpCurvature> {
    let n = pi.n_bands().min(spec.n_bands());
    if band == 0 || band > n {
        return Err(invalid(format!("band {band} out of range")));
    }
    ground_gap_check(spec, band)?;
    let ln = spec.eigenvalue(band);
    let sum: f64 = (1..=n)
        .filter(|&j| j != band)
        .map(|j| pi.entry(band, j).norm_sqr() / (ln - spec.eigenvalue(j)))
        .sum();
    Ok(KpCurvature {
        band,
        alpha: pi.alpha(),
        series: 2.0 + 8.0 * sum,
        bands_used: n,
        finite_difference: None,
    })
}

/// Central second difference of `λ_n` along `k_α`.
pub fn band_curvature_fd(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    k: &[f64],
    band: usize,
    alpha: usize,
    step: f64,
) -> Result<f64> {
    if alpha >= k.len() || !(step > 0.0) {
        return Err(invalid("bad direction or step"));
    }
    let eval = |s: f64| -> Result<f64> {
        let mut kk = k.to_vec();
        kk[alpha] += s;
        Ok(fiber_spectrum(v, basis, &kk, Some(band + 1))?.eigenvalue(band))
    };
    Ok((eval(step)? - 2.0 * eval(0.0)? + eval(-step)?) / (step * step))
}

impl KpCurvature {
    pub fn with_finite_difference(mut self, fd: f64) -> Self {
        self.finite_difference = Some(fd);
        self
    }

    pub fn relative_error(&self) -> Option<f64> {
        self.finite_difference
            .map(|fd| (self.series - fd).abs() / fd.abs().max(f64::MIN_POSITIVE))
    }
}

/// Relative tolerance for the Cauchy tests on the nested sum.
pub const NESTED_CAUCHY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct NestedSumReport {
    pub cutoffs: Vec<usize>,
    /// Innermost index summed first.
    pub values: Vec<Complex64>,
    /// Outermost index summed first.
    pub values_reversed: Vec<Complex64>,
    /// `A_J`: the same triple sum over absolute values of the terms.
    pub abs_sums: Vec<f64>,
    pub order_difference: f64,
    /// `|value_J - value_{J'}|` and `A_J - A_{J'}` for the last two cutoffs.
    pub value_step: f64,
    pub abs_step: f64,
    /// Relative growth of `A_J` over the last cutoff step.
    pub abs_growth: f64,
    pub converged: bool,
}

impl NestedSumReport {
    pub fn imaginary_part(&self) -> f64 {
        self.values.last().map_or(0.0, |v| v.im.abs())
    }
}

/// `Σ_{j1} π̂_{1j1} Σ_{j2} π̂_{j1j2}/(λ_{j2}-λ₁) Σ_{j3} π̂_{j2j3}/(λ_{j3}-λ₁) π̂_{j31}`
/// with every index running over `2..=J`.
pub fn nested_sum(
    pi: &MomentumMatrix,
    spec: &FiberSpectrum,
    cutoffs: &[usize],
) -> Result<NestedSumReport> {
    let n = pi.n_bands().min(spec.n_bands());
    if cutoffs.is_empty() || cutoffs.iter().any(|&j| j < 2 || j > n) {
        return Err(invalid(format!("cutoffs must lie in 2..={n}")));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("cutoffs must be strictly increasing"));
    }
    ground_gap_check(spec, 1)?;
    let l1 = spec.eigenvalue(1);
    let p = pi.matrix();
    let zero = Complex64::new(0.0, 0.0);

    let mut values = Vec::new();
    let mut values_reversed = Vec::new();
    let mut abs_sums = Vec::new();
    for &cut in cutoffs {
        let idx = 1..cut;
        let d: Vec<f64> = (0..cut)
            .map(|j| if j == 0 { 0.0 } else { 1.0 / (spec.eigenvalue(j + 1) - l1) })
            .collect();

        let mut inner3 = vec![zero; cut];
        for j2 in idx.clone() {
            inner3[j2] = idx
                .clone()
                .fold(zero, |acc, j3| acc + p[(j2, j3)] * d[j3] * p[(j3, 0)]);
        }
        let value = idx.clone().fold(zero, |acc, j1| {
            let inner2 = idx
                .clone()
                .fold(zero, |a, j2| a + p[(j1, j2)] * d[j2] * inner3[j2]);
            acc + p[(0, j1)] * inner2
        });

        let mut left1 = vec![zero; cut];
        for j2 in idx.clone() {
            left1[j2] = idx
                .clone()
                .fold(zero, |acc, j1| acc + p[(0, j1)] * p[(j1, j2)])
                * d[j2];
        }
        let reversed = idx.clone().fold(zero, |acc, j3| {
            let left2 = idx
                .clone()
                .fold(zero, |a, j2| a + left1[j2] * p[(j2, j3)])
                * d[j3];
            acc + left2 * p[(j3, 0)]
        });

        let a: Vec<f64> = (0..cut).map(|j| if j == 0 { 0.0 } else { p[(j, 0)].norm() }).collect();
        let mut bda = vec![0.0; cut];
        for j2 in idx.clone() {
            bda[j2] = idx.clone().map(|j3| p[(j2, j3)].norm() * d[j3] * a[j3]).sum();
        }
        let abs: f64 = idx
            .clone()
            .map(|j1| {
                a[j1] * idx.clone().map(|j2| p[(j1, j2)].norm() * d[j2] * bda[j2]).sum::<f64>()
            })
            .sum();

        values.push(value);
        values_reversed.push(reversed);
        abs_sums.push(abs);
    }

    let last = values.len() - 1;
    let order_difference = (values[last] - values_reversed[last]).norm();
    let (value_step, abs_step, abs_growth) = if last > 0 {
        let da = abs_sums[last] - abs_sums[last - 1];
        (
            (values[last] - values[last - 1]).norm(),
            da,
            da / abs_sums[last - 1].max(f64::MIN_POSITIVE),
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    let scale = abs_sums[last].max(1.0);
    let converged = last > 0
        && value_step <= NESTED_CAUCHY_TOL * scale
        && abs_step <= NESTED_CAUCHY_TOL * scale;
    Ok(NestedSumReport {
        cutoffs: cutoffs.to_vec(),
        values,
        values_reversed,
        abs_sums,
        order_difference,
        value_step,
        abs_step,
        abs_growth,
        converged,
    })
}
