use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Highest derivative order available in closed form.
pub const MAX_DERIVATIVE_ORDER: usize = 8;

/// Real-analytic scalar function with derivatives up to a fixed order.
pub trait SmoothFunction: Sync {
    fn value(&self, x: f64) -> f64;

    /// `[f(x), f'(x), ..., f^{(order)}(x)]`.
    fn derivatives(&self, x: f64, order: usize) -> Result<Vec<f64>>;

    fn max_order(&self) -> usize;

    /// Distance over which `f` changes appreciably; sets the default confluence radius.
    fn length_scale(&self) -> f64;
}

/// `f(x) = 1 / (1 + e^{β(x - μ)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermiDirac {
    pub beta: f64,
    pub mu: f64,
}

/// With `σ = f` and `dσ/dx = -β σ(1-σ)`, `f^{(n)} = (-β)^n Q_n(σ)` where
/// `Q_0 = σ` and `Q_{n+1} = Q_n'(σ) σ(1-σ)`. Coefficients in powers of `σ`.
fn logistic_polynomials() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out = vec![vec![0.0, 1.0]];
        for n in 0..MAX_DERIVATIVE_ORDER {
            let q = &out[n];
            let dq: Vec<f64> = (1..q.len()).map(|i| i as f64 * q[i]).collect();
            // multiply by σ - σ²
            let mut next = vec![0.0; dq.len() + 2];
            for (i, &c) in dq.iter().enumerate() {
                next[i + 1] += c;
                next[i + 2] -= c;
            }
            out.push(next);
        }
        out
    })
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl FermiDirac {
    pub fn new(beta: f64, mu: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !mu.is_finite() {
            return Err(invalid(format!(
                "Fermi-Dirac needs beta > 0 and finite mu, got ({beta}, {mu})"
            )));
        }
        Ok(Self { beta, mu })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = self.beta * (x - self.mu);
        if t > 0.0 {
            let e = (-t).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + t.exp())
        }
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let w = (z - self.mu) * self.beta;
        if w.re > 0.0 {
            let e = (-w).exp();
            e / (e + 1.0)
        } else {
            Complex64::new(1.0, 0.0) / (w.exp() + 1.0)
        }
    }
}

impl SmoothFunction for FermiDirac {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn derivatives(&self, x: f64, order: usize) -> Result<Vec<f64>> {
        if order > MAX_DERIVATIVE_ORDER {
            return Err(Error::ConfluenceTooDeep {
                order,
                cap: MAX_DERIVATIVE_ORDER,
            });
        }
        // Evaluate where σ <= 1/2 and reflect: σ(2μ - x) = 1 - σ(x), so
        // f^{(n)}(x) = (-1)^{n+1} f^{(n)}(2μ - x) for n >= 1.
        let reflect = x < self.mu;
        let xs = if reflect { 2.0 * self.mu - x } else { x };
        let sigma = self.eval(xs);
        let polys = logistic_polynomials();
        let mut out = Vec::with_capacity(order + 1);
        out.push(self.eval(x));
        let mut scale = 1.0;
        for (n, q) in polys.iter().enumerate().take(order + 1).skip(1) {
            scale *= -self.beta;
            let d = scale * horner(q, sigma);
            out.push(if reflect && n % 2 == 0 { -d } else { d });
        }
        Ok(out)
    }

    fn max_order(&self) -> usize {
        MAX_DERIVATIVE_ORDER
    }

    fn length_scale(&self) -> f64 {
        1.0 / self.beta
    }
}
