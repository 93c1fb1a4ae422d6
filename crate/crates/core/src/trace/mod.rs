//! Traces per unit volume of Fermi–Dirac weighted resolvent products,
//!
//! `I = (2π)^{-d} ∫ dk ∫_Γ f_FD(z) tr(P_{α1} R(z) ··· P_{αn} R(z)) dz`,
//!
//! with `R(z) = (h(k) - z)^{-1}` and `P_α = -i∂_α + k_α`. The band-sum path
//! evaluates the `z` integral exactly by residues (divided differences); the
//! direct path integrates the truncated matrices numerically along `Γ`.

mod contour;
mod divided;
mod fermi;

pub use contour::{
    contour_integral_quadrature, contour_integral_with, contour_nodes, gauss_legendre,
    truncation_tail, ContourIntegral, ContourNodes, CONTOUR_TAIL_TOL,
};
pub use divided::{default_confluence_tol, divided_difference, CONFLUENCE_RADIUS};
pub use fermi::{FermiDirac, SmoothFunction, MAX_DERIVATIVE_ORDER};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fiber::{assemble_fiber, fiber_spectrum, kinetic_momenta};
use crate::model::{ContourSpec, FourierPotential, KGrid, PlaneWaveBasis};
use crate::momentum::momentum_matrix;
use crate::output::{Csv, Field};

/// Size limits for the direct path.
pub const DIRECT_MAX_BASIS: usize = 513;
pub const DIRECT_MAX_NODES: usize = 4000;
/// Resolvent entries above this are treated as a hit on the spectrum.
pub const RESOLVENT_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMethod {
    BandSum,
    DirectQuadrature,
}

#[derive(Debug, Clone, Serialize)]
pub struct KPartial {
    pub k: Vec<f64>,
    pub weight: f64,
    /// Contour integral at this `k`, including the `2πi` of the residues.
    pub value: Complex64,
    /// `Σ |term|` over band tuples; band-sum path only.
    pub abs_sum: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceResult {
    pub directions: Vec<usize>,
    pub method: TraceMethod,
    pub value: Complex64,
    /// `value / 2πi`; real for real potentials and self-paired directions.
    pub reduced: Complex64,
    pub band_cutoff: Option<usize>,
    pub contour: ContourSpec,
    pub tail: f64,
    pub per_k: Vec<KPartial>,
}

impl TraceResult {
    fn assemble(
        directions: &[usize],
        method: TraceMethod,
        band_cutoff: Option<usize>,
        contour: &ContourSpec,
        tail: f64,
        dim: usize,
        per_k: Vec<KPartial>,
    ) -> Self {
        let norm = (2.0 * PI).powi(dim as i32);
        let value = per_k
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.value * p.weight)
            / norm;
        Self {
            directions: directions.to_vec(),
            method,
            value,
            reduced: value / Complex64::new(0.0, 2.0 * PI),
            band_cutoff,
            contour: *contour,
            tail,
            per_k,
        }
    }

    /// `|Im(value / 2πi)|`.
    pub fn imaginary_part(&self) -> f64 {
        self.reduced.im.abs()
    }

    /// `|a - b| / max(|a|, |b|)`, with `0` when both vanish.
    pub fn relative_difference(&self, other: &TraceResult) -> f64 {
        relative(self.value, other.value)
    }

    /// k-point whose contributions disagree most, as `(index, |Δ| · weight / (2π)^d)`.
    pub fn worst_k_against(&self, other: &TraceResult) -> Option<(usize, f64)> {
        let norm = (2.0 * PI).powi(self.contour_dim() as i32);
        self.per_k
            .iter()
            .zip(&other.per_k)
            .map(|(a, b)| (a.value - b.value).norm() * a.weight / norm)
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    fn contour_dim(&self) -> usize {
        self.per_k.first().map_or(1, |p| p.k.len())
    }

    pub fn per_k_csv(&self) -> String {
        let dim = self.contour_dim();
        let mut cols: Vec<String> = (1..=dim).map(|i| format!("k{i}")).collect();
        cols.extend(["weight", "re", "im", "abs_sum"].map(String::from));
        let mut csv = Csv::with_header(&cols);
        for p in &self.per_k {
            let mut row: Vec<Field> = p.k.iter().map(|&x| x.into()).collect();
            row.push(p.weight.into());
            row.push(p.value.re.into());
            row.push(p.value.im.into());
            row.push(p.abs_sum.map_or(Field::Text("".into()), Field::Float));
            csv.row(&row);
        }
        csv.finish()
    }
}

pub fn relative(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn check_directions(directions: &[usize], dim: usize) -> Result<()> {
    if directions.is_empty() {
        return Err(invalid("need at least one direction index"));
    }
    if let Some(a) = directions.iter().find(|&&a| a >= dim) {
        return Err(invalid(format!("direction {a} out of range for dimension {dim}")));
    }
    Ok(())
}

fn residue_sign(n: usize) -> Complex64 {
    let s = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    Complex64::new(0.0, 2.0 * PI * s)
}

/// Sum over band tuples at one `k`: returns `(Σ term, Σ |term|)` without the residue factor.
fn band_sum_at_k(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    fd: &FermiDirac,
    k: &[f64],
    directions: &[usize],
    cutoff: usize,
    tol: f64,
) -> Result<(Complex64, f64)> {
    let spec = fiber_spectrum(v, basis, k, Some(cutoff))?;
    let lambda = spec.eigenvalues();
    // M_α[a, b] = ⟨u_a, P_α u_b⟩ (antilinear in the first slot) = π̂_ba
    let mut mats: Vec<Option<DMatrix<Complex64>>> = vec![None; basis.dim()];
    for &a in directions {
        if mats[a].is_none() {
            mats[a] = Some(momentum_matrix(&spec, a)?.matrix().transpose());
        }
    }
    let m: Vec<&DMatrix<Complex64>> = directions.iter().map(|&a| mats[a].as_ref().unwrap()).collect();
    let n = directions.len();
    let mut idx = vec![0usize; n];
    let mut nodes = vec![0.0; n];
    let mut total = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    loop {
        // term = M_{α1}[j_n, j_1] M_{α2}[j_1, j_2] ··· M_{αn}[j_{n-1}, j_n]
        let mut prod = m[0][(idx[n - 1], idx[0])];
        for i in 1..n {
            if prod == Complex64::new(0.0, 0.0) {
                break;
            }
            prod *= m[i][(idx[i - 1], idx[i])];
        }
        if prod != Complex64::new(0.0, 0.0) {
            for (x, &j) in nodes.iter_mut().zip(&idx) {
                *x = lambda[j];
            }
            let dd = divided_difference(fd, &nodes, tol).map_err(|e| Error::AtTuple {
                tuple: idx.iter().map(|j| j + 1).collect(),
                source: Box::new(e),
            })?;
            let term = prod * dd;
            total += term;
            abs_sum += term.norm();
        }
        // advance the odometer
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok((total, abs_sum));
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < cutoff {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Band-sum evaluation with the `z` integral done as
/// `(-1)^n 2πi f_FD[λ_{j1}, ..., λ_{jn}]` and band indices up to `cutoff`.
pub fn trace_per_unit_volume(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    contour: &ContourSpec,
    directions: &[usize],
    cutoff: usize,
    grid: &KGrid,
) -> Result<TraceResult> {
    contour.validate()?;
    check_directions(directions, basis.dim())?;
    if cutoff == 0 || cutoff > basis.len() {
        return Err(invalid(format!(
            "band cutoff {cutoff} outside 1..={}",
            basis.len()
        )));
    }
    let fd = FermiDirac::new(contour.beta, contour.mu)?;
    let tol = default_confluence_tol(&fd);
    let sign = residue_sign(directions.len());
    let per_k = grid
        .points
        .par_iter()
        .zip(&grid.weights)
        .enumerate()
        .map(|(i, (k, &w))| {
            band_sum_at_k(v, basis, &fd, k, directions, cutoff, tol)
                .map(|(s, a)| KPartial {
                    k: k.clone(),
                    weight: w,
                    value: s * sign,
                    abs_sum: Some(a * 2.0 * PI),
                })
                .map_err(|e| Error::AtKPoint {
                    index: i,
                    k: k.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceResult::assemble(
        directions,
        TraceMethod::BandSum,
        Some(cutoff),
        contour,
        0.0,
        basis.dim(),
        per_k,
    ))
}

fn direct_at_k(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    fd: &FermiDirac,
    quad: &ContourNodes,
    k: &[f64],
    directions: &[usize],
) -> Result<Complex64> {
    let h = assemble_fiber(v, basis, k)?;
    let n = basis.len();
    let p: Vec<Vec<f64>> = (0..basis.dim())
        .map(|a| kinetic_momenta(basis, k, a))
        .collect();
    let mut acc = Complex64::new(0.0, 0.0);
    for (&z, &dz) in quad.z.iter().zip(&quad.dz) {
        let mut a = h.matrix().clone();
        for i in 0..n {
            a[(i, i)] -= z;
        }
        let r = a.lu().try_inverse().ok_or(Error::SingularResolvent { re: z.re, im: z.im })?;
        if r.iter().any(|x| !(x.norm() <= RESOLVENT_LIMIT)) {
            return Err(Error::SingularResolvent { re: z.re, im: z.im });
        }
        // P_{α1} R P_{α2} R ··· P_{αn} R, with P diagonal acting on rows
        let scaled = |alpha: usize| {
            let mut m = r.clone();
            for (i, mut row) in m.row_iter_mut().enumerate() {
                row *= Complex64::new(p[alpha][i], 0.0);
            }
            m
        };
        let tr = if directions.len() == 1 {
            scaled(directions[0]).trace()
        } else {
            let mut prod = scaled(directions[0]);
            for &alpha in &directions[1..directions.len() - 1] {
                prod *= scaled(alpha);
            }
            let last = scaled(directions[directions.len() - 1]);
            // tr(A B) without forming the product
            let mut t = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    t += prod[(i, j)] * last[(j, i)];
                }
            }
            t
        };
        acc += fd.eval_complex(z) * tr * dz;
    }
    Ok(acc)
}

/// Direct evaluation from resolvents of the truncated plane-wave matrices.
pub fn trace_oracle_direct(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    contour: &ContourSpec,
    directions: &[usize],
    grid: &KGrid,
) -> Result<TraceResult> {
    check_directions(directions, basis.dim())?;
    if basis.len() > DIRECT_MAX_BASIS {
        return Err(invalid(format!(
            "direct trace limited to {DIRECT_MAX_BASIS} plane waves, got {}",
            basis.len()
        )));
    }
    let quad = contour_nodes(contour)?;
    if quad.len() > DIRECT_MAX_NODES {
        return Err(invalid(format!(
            "direct trace limited to {DIRECT_MAX_NODES} contour nodes, got {}",
            quad.len()
        )));
    }
    let fd = FermiDirac::new(contour.beta, contour.mu)?;
    let per_k = grid
        .points
        .par_iter()
        .zip(&grid.weights)
        .enumerate()
        .map(|(i, (k, &w))| {
            direct_at_k(v, basis, &fd, &quad, k, directions)
                .map(|value| KPartial {
                    k: k.clone(),
                    weight: w,
                    value,
                    abs_sum: None,
                })
                .map_err(|e| Error::AtKPoint {
                    index: i,
                    k: k.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceResult::assemble(
        directions,
        TraceMethod::DirectQuadrature,
        None,
        contour,
        truncation_tail(contour, &[]),
        basis.dim(),
        per_k,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_basis, build_potential, sample_brillouin, PotentialSpec};

    fn cos_v() -> FourierPotential {
        build_potential(&PotentialSpec::cosines_1d(&[(1, 2.0)], 3.0)).unwrap()
    }

    #[test]
    fn band_sum_matches_direct() {
        let v = cos_v();
        let basis = build_basis(1, 16).unwrap();
        let contour = ContourSpec::with_defaults(2.0, 10.0, 10.0).unwrap();
        let grid = sample_brillouin(1, 4).unwrap();
        let bs = trace_per_unit_volume(&v, &basis, &contour, &[0, 0], 12, &grid).unwrap();
        let dq = trace_oracle_direct(&v, &basis, &contour, &[0, 0], &grid).unwrap();
        assert!(bs.relative_difference(&dq) < 1e-6, "{:?} vs {:?}", bs.value, dq.value);
        assert!(bs.imaginary_part() < 1e-8 * bs.reduced.norm());
    }

    #[test]
    fn single_direction_vanishes_on_symmetric_grid() {
        let v = cos_v();
        let basis = build_basis(1, 16).unwrap();
        let contour = ContourSpec::with_defaults(2.0, 10.0, 10.0).unwrap();
        let grid = sample_brillouin(1, 8).unwrap();
        let bs = trace_per_unit_volume(&v, &basis, &contour, &[0], 12, &grid).unwrap();
        assert!(bs.value.norm() < 1e-10, "{:?}", bs.value);
        let dq = trace_oracle_direct(&v, &basis, &contour, &[0], &grid).unwrap();
        assert!(dq.value.norm() < 1e-8, "{:?}", dq.value);
    }

    #[test]
    fn empty_band_free_case() {
        let v = build_potential(&PotentialSpec::zero(1, 0.0)).unwrap();
        let basis = build_basis(1, 8).unwrap();
        // f_FD ~ e^{-β(λ-μ)} on the spectrum; 40/β below the bottom puts it under 1e-17
        let mu = -40.0 / 2.0;
        let contour = ContourSpec::with_defaults(2.0, mu, 0.0).unwrap();
        let grid = sample_brillouin(1, 4).unwrap();
        let bs = trace_per_unit_volume(&v, &basis, &contour, &[0, 0], 8, &grid).unwrap();
        assert!(bs.value.norm() <= 1e-12, "{:?}", bs.value);
    }

    #[test]
    fn cyclic_invariance_2d() {
        let spec = PotentialSpec::gaussian(2, 1.0, 1.0, 2, 2.0).with_seed(5);
        let v = build_potential(&spec).unwrap();
        let basis = build_basis(2, 3).unwrap();
        let contour = ContourSpec::with_defaults(1.0, 20.0, 20.0).unwrap();
        let grid = sample_brillouin(2, 2).unwrap();
        let a = trace_per_unit_volume(&v, &basis, &contour, &[0, 1, 1], 10, &grid).unwrap();
        let b = trace_per_unit_volume(&v, &basis, &contour, &[1, 1, 0], 10, &grid).unwrap();
        assert!((a.value - b.value).norm() <= 1e-10 * a.value.norm().max(1.0));
    }

    #[test]
    fn invalid_inputs() {
        let v = cos_v();
        let basis = build_basis(1, 4).unwrap();
        let contour = ContourSpec::with_defaults(1.0, 0.0, 0.0).unwrap();
        let grid = sample_brillouin(1, 2).unwrap();
        assert!(trace_per_unit_volume(&v, &basis, &contour, &[], 4, &grid).is_err());
        assert!(trace_per_unit_volume(&v, &basis, &contour, &[1], 4, &grid).is_err());
        assert!(trace_per_unit_volume(&v, &basis, &contour, &[0], 0, &grid).is_err());
    }
}
