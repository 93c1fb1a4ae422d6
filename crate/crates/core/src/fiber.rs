//! Fiber Hamiltonian `h(k) = (-i∇ + k)² + V` in the plane-wave basis and its
//! dense Hermitian eigendecomposition.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{sup_norm, FourierPotential, KGrid, PlaneWaveBasis};
use crate::output::{Csv, Field};

/// Gap below which two eigenvalues are treated as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

/// Matrix of `h(k)`: `H(m, m') = |2πm + k|² δ_{mm'} + V̂(m - m')`.
#[derive(Debug, Clone)]
pub struct FiberOperator {
    k: Vec<f64>,
    basis: PlaneWaveBasis,
    matrix: DMatrix<Complex64>,
}

impl FiberOperator {
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                worst = worst.max((self.matrix[(a, b)] - self.matrix[(b, a)].conj()).norm());
            }
        }
        worst
    }
}

/// `2π m_α + k_α` for every basis function.
pub fn kinetic_momenta(basis: &PlaneWaveBasis, k: &[f64], alpha: usize) -> Vec<f64> {
    basis
        .freqs()
        .iter()
        .map(|m| 2.0 * PI * m[alpha] as f64 + k[alpha])
        .collect()
}

pub fn assemble_fiber(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    k: &[f64],
) -> Result<FiberOperator> {
    let dim = basis.dim();
    if v.dim() != dim {
        return Err(invalid(format!(
            "potential dimension {} does not match basis dimension {dim}",
            v.dim()
        )));
    }
    if k.len() != dim || k.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("k must be a finite {dim}-vector, got {k:?}")));
    }
    let max = 2 * basis.m_cut();
    if let Some((m, _)) = v.support().find(|(m, _)| sup_norm(m) > max) {
        return Err(Error::Aliasing {
            freq: m[..dim].to_vec(),
            max,
        });
    }

    let n = basis.len();
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    for (a, m) in basis.freqs().iter().enumerate() {
        let kin: f64 = (0..dim)
            .map(|i| (2.0 * PI * m[i] as f64 + k[i]).powi(2))
            .sum();
        matrix[(a, a)] += Complex64::new(kin, 0.0);
        for (q, vq) in v.support() {
            let target = [m[0] - q[0], m[1] - q[1], m[2] - q[2]];
            if let Some(b) = basis.index_of(&target) {
                matrix[(a, b)] += vq;
            }
        }
    }
    Ok(FiberOperator {
        k: k.to_vec(),
        basis: basis.clone(),
        matrix,
    })
}

/// Ascending eigenvalues of `h(k)` with plane-wave coefficient rows.
///
/// Row `j` of `coefficients` holds `c_{j,m}` with `u_j = Σ_m c_{j,m} e^{2πi m·x}`.
/// Each row is rephased so that its largest-magnitude entry is real and positive.
#[derive(Debug, Clone)]
pub struct FiberSpectrum {
    k: Vec<f64>,
    eigenvalues: Vec<f64>,
    coefficients: Option<DMatrix<Complex64>>,
    basis: PlaneWaveBasis,
}

impl FiberSpectrum {
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `λ_j` for a 1-based band label.
    pub fn eigenvalue(&self, band: usize) -> f64 {
        self.eigenvalues[band - 1]
    }

    pub fn n_bands(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Bands considered free of truncation artifacts: half the basis size.
    pub fn trusted_bands(&self) -> usize {
        self.n_bands().min(self.basis.len() / 2)
    }

    pub fn basis(&self) -> &PlaneWaveBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> Result<&DMatrix<Complex64>> {
        self.coefficients.as_ref().ok_or(Error::MissingCoefficients)
    }

    pub fn has_coefficients(&self) -> bool {
        self.coefficients.is_some()
    }

    pub fn without_coefficients(mut self) -> Self {
        self.coefficients = None;
        self
    }

    /// Smallest distance from `λ_band` to a neighbouring computed eigenvalue.
    pub fn gap(&self, band: usize) -> f64 {
        let i = band - 1;
        let e = &self.eigenvalues;
        let below = if i > 0 { e[i] - e[i - 1] } else { f64::INFINITY };
        let above = if i + 1 < e.len() {
            e[i + 1] - e[i]
        } else {
            f64::INFINITY
        };
        below.min(above)
    }

    pub fn orthonormality_defect(&self) -> Result<f64> {
        let c = self.coefficients()?;
        let gram = c * c.adjoint();
        let n = gram.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        Ok(worst)
    }

    /// Replaces coefficient rows; used to test phase invariance of derived quantities.
    pub fn with_coefficients(mut self, c: DMatrix<Complex64>) -> Result<Self> {
        if c.nrows() != self.n_bands() || c.ncols() != self.basis.len() {
            return Err(invalid("coefficient matrix has the wrong shape"));
        }
        self.coefficients = Some(c);
        Ok(self)
    }
}

/// Dense solve; `n_bands = None` returns the trusted half of the spectrum.
pub fn solve_fiber(op: &FiberOperator, n_bands: Option<usize>) -> Result<FiberSpectrum> {
    let n = op.matrix.nrows();
    let n_bands = n_bands.unwrap_or(n / 2).max(1);
    if n_bands > n {
        return Err(invalid(format!(
            "requested {n_bands} bands from a {n}-dimensional basis"
        )));
    }

    let is_real = op.matrix.iter().all(|z| z.im == 0.0);
    let (values, vectors) = if is_real {
        let re = op.matrix.map(|z| z.re);
        let eig = SymmetricEigen::try_new(re, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("real symmetric QR did not converge".into()))?;
        let vecs = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
        (eig.eigenvalues, vecs)
    } else {
        let eig = SymmetricEigen::try_new(op.matrix.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("Hermitian QR did not converge".into()))?;
        (eig.eigenvalues, eig.eigenvectors)
    };
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut coefficients = DMatrix::<Complex64>::zeros(n_bands, n);
    let mut eigenvalues = Vec::with_capacity(n_bands);
    for (row, &col) in order.iter().take(n_bands).enumerate() {
        eigenvalues.push(values[col]);
        let v = vectors.column(col);
        let (pivot, _) = v
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, bm), (i, z)| {
                let m = z.norm();
                if m > bm {
                    (i, m)
                } else {
                    (bi, bm)
                }
            });
        let phase = v[pivot].conj() / v[pivot].norm();
        for (i, z) in v.iter().enumerate() {
            coefficients[(row, i)] = z * phase;
        }
        coefficients[(row, pivot)].im = 0.0;
    }

    Ok(FiberSpectrum {
        k: op.k.clone(),
        eigenvalues,
        coefficients: Some(coefficients),
        basis: op.basis.clone(),
    })
}

/// Assembles and solves in one step.
pub fn fiber_spectrum(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    k: &[f64],
    n_bands: Option<usize>,
) -> Result<FiberSpectrum> {
    solve_fiber(&assemble_fiber(v, basis, k)?, n_bands)
}

#[derive(Debug, Clone)]
pub struct BandStructure {
    pub grid: KGrid,
    pub spectra: Vec<FiberSpectrum>,
}

impl BandStructure {
    /// `k1..kd,band,eigenvalue` with 1-based band labels, in grid order.
    pub fn to_csv(&self) -> String {
        let mut header: Vec<String> = (1..=self.grid.dim).map(|a| format!("k{a}")).collect();
        header.push("band".into());
        header.push("eigenvalue".into());
        let mut csv = Csv::with_header(&header);
        for s in &self.spectra {
            for (j, &e) in s.eigenvalues().iter().enumerate() {
                let mut row: Vec<Field> = s.k().iter().map(|&x| x.into()).collect();
                row.push((j + 1).into());
                row.push(e.into());
                csv.row(&row);
            }
        }
        csv.finish()
    }

    /// Largest jump of any band between consecutive grid points.
    pub fn max_jump(&self) -> f64 {
        self.spectra
            .windows(2)
            .flat_map(|w| {
                w[0].eigenvalues()
                    .iter()
                    .zip(w[1].eigenvalues())
                    .map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Spectra over a k-grid, in grid order. Runs on the ambient rayon pool.
pub fn band_structure(
    v: &FourierPotential,
    basis: &PlaneWaveBasis,
    grid: &KGrid,
    n_bands: Option<usize>,
    keep_coefficients: bool,
) -> Result<BandStructure> {
    let spectra = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(i, k)| {
            fiber_spectrum(v, basis, k, n_bands)
                .map(|s| {
                    if keep_coefficients {
                        s
                    } else {
                        s.without_coefficients()
                    }
                })
                .map_err(|e| Error::AtKPoint {
                    index: i,
                    k: k.clone(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BandStructure {
        grid: grid.clone(),
        spectra,
    })
}
