use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ContourSpec, CONTOUR_PANEL_ORDER};

use super::fermi::FermiDirac;

/// Truncation tails above this attach a warning.
pub const CONTOUR_TAIL_TOL: f64 = 1e-8;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(CONTOUR_PANEL_ORDER))
}

/// Quadrature points `z` on `Γ` with complex weights `dz` (orientation included).
#[derive(Debug, Clone)]
pub struct ContourNodes {
    pub z: Vec<Complex64>,
    pub dz: Vec<Complex64>,
}

impl ContourNodes {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

fn push_segment(out: &mut ContourNodes, a: Complex64, b: Complex64, panels: usize) {
    let (x, w) = panel_rule();
    let step = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + step * p as f64;
        for (xi, wi) in x.iter().zip(w) {
            out.z.push(lo + step * (0.5 * (xi + 1.0)));
            out.dz.push(step * (0.5 * wi));
        }
    }
}

/// Counterclockwise: lower line left to right, upper line right to left,
/// then down the vertical side at `Re z = -1`.
pub fn contour_nodes(spec: &ContourSpec) -> Result<ContourNodes> {
    spec.validate()?;
    let panels = spec.n_quad.div_ceil(CONTOUR_PANEL_ORDER).max(1);
    let width = (spec.x_max + 1.0) / panels as f64;
    let vertical = ((2.0 * spec.delta / width).ceil() as usize).max(2);
    let d = spec.delta;
    let mut out = ContourNodes {
        z: Vec::new(),
        dz: Vec::new(),
    };
    let c = Complex64::new;
    push_segment(&mut out, c(-1.0, -d), c(spec.x_max, -d), panels);
    push_segment(&mut out, c(spec.x_max, d), c(-1.0, d), panels);
    push_segment(&mut out, c(-1.0, d), c(-1.0, -d), vertical);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct ContourIntegral {
    pub value: Complex64,
    /// Bound on the part of the integral cut off beyond `x_max`.
    pub tail: f64,
    pub warning: Option<String>,
}

/// Bound on `∫ f_FD(z) / Π(λ_j - z)` over the discarded part of `Γ` right of `x_max`.
pub fn truncation_tail(spec: &ContourSpec, nodes: &[f64]) -> f64 {
    let decay = (-spec.beta * (spec.x_max - spec.mu)).exp();
    let denom: f64 = nodes
        .iter()
        .map(|l| (spec.x_max - l).abs().max(spec.delta))
        .product();
    decay * (2.0 * spec.delta + 2.0 / spec.beta) / denom
}

/// `∫_Γ f_FD(z) Π_j (λ_j - z)^{-1} dz`; equals `(-1)^n 2πi f_FD[λ_1..λ_n]`.
pub fn contour_integral_quadrature(spec: &ContourSpec, nodes: &[f64]) -> Result<ContourIntegral> {
    let quad = contour_nodes(spec)?;
    contour_integral_with(spec, &quad, nodes)
}

/// As [`contour_integral_quadrature`] with precomputed quadrature points.
pub fn contour_integral_with(
    spec: &ContourSpec,
    quad: &ContourNodes,
    nodes: &[f64],
) -> Result<ContourIntegral> {
    if let Some(&node) = nodes
        .iter()
        .find(|&&l| !(l > -1.0 && l < spec.x_max))
    {
        return Err(Error::NodeOutsideContour {
            node,
            x_max: spec.x_max,
        });
    }
    let f = FermiDirac::new(spec.beta, spec.mu)?;
    let mut value = Complex64::new(0.0, 0.0);
    for (z, dz) in quad.z.iter().zip(&quad.dz) {
        let mut den = Complex64::new(1.0, 0.0);
        for &l in nodes {
            den *= l - z;
        }
        value += f.eval_complex(*z) / den * dz;
    }
    let tail = truncation_tail(spec, nodes);
    let warning = (tail > CONTOUR_TAIL_TOL).then(|| {
        format!("contour truncation tail {tail:.3e} exceeds {CONTOUR_TAIL_TOL:.0e}; raise x_max")
    });
    Ok(ContourIntegral {
        value,
        tail,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::divided::{default_confluence_tol, divided_difference};

    #[test]
    fn legendre_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for p in [2, 10, 30] {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            assert!((q - 2.0 / (p + 1) as f64).abs() < 1e-14, "p={p}");
        }
        let (x5, _) = gauss_legendre(5);
        assert!(x5[2].abs() < 1e-15);
    }

    #[test]
    fn closed_contour_has_zero_integral_of_one() {
        let spec = ContourSpec::with_defaults(1.0, 0.0, 5.0).unwrap();
        let q = contour_nodes(&spec).unwrap();
        let total: Complex64 = q.dz.iter().sum();
        // lower and upper lines cancel, vertical contributes -2iδ; the open right side closes it
        assert!((total - Complex64::new(0.0, -2.0 * spec.delta)).norm() < 1e-12);
    }

    #[test]
    fn single_node_residue() {
        let spec = ContourSpec::with_defaults(1.0, 0.0, 1.0).unwrap();
        let r = contour_integral_quadrature(&spec, &[1.0]).unwrap();
        let expect = Complex64::new(0.0, -2.0 * PI * 0.2689414213699951);
        assert!((r.value - expect).norm() < 1e-10, "{:?}", r.value);
        assert!((r.value.im + 1.6898).abs() < 1e-4);
        assert!(r.warning.is_none());
    }

    #[test]
    fn two_node_residue() {
        let spec = ContourSpec::with_defaults(1.0, 0.0, 2.0).unwrap();
        let f = FermiDirac::new(1.0, 0.0).unwrap();
        let dd = divided_difference(&f, &[1.0, 2.0], default_confluence_tol(&f)).unwrap();
        let r = contour_integral_quadrature(&spec, &[1.0, 2.0]).unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0 * PI * dd)).norm() < 1e-10);
    }

    #[test]
    fn empty_band_limit() {
        let spec = ContourSpec::with_defaults(1.0, -40.0, 1.0).unwrap();
        let r = contour_integral_quadrature(&spec, &[1.0]).unwrap();
        assert!(r.value.norm() < 1e-12);
    }

    #[test]
    fn rejects_nodes_outside() {
        let spec = ContourSpec::with_defaults(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            contour_integral_quadrature(&spec, &[-1.5]),
            Err(Error::NodeOutsideContour { .. })
        ));
        assert!(contour_integral_quadrature(&spec, &[1e3]).is_err());
    }

    #[test]
    fn short_contour_warns() {
        let spec = ContourSpec::new(1.0, 0.0, 0.5, 3.0, 64).unwrap();
        let r = contour_integral_quadrature(&spec, &[1.0]).unwrap();
        assert!(r.warning.is_some());
    }
}
