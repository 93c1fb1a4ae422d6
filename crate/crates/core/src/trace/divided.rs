use crate::error::{invalid, Error, Result};

use super::fermi::SmoothFunction;

/// Confluence radius in units of [`SmoothFunction::length_scale`].
///
/// Sub-tables whose nodes span less than this are evaluated from a Taylor
/// expansion about their mean. Differencing below it loses `eps / spread^m`
/// while the order-8 Taylor remainder grows like `spread^{9-m}`; the two
/// cross over near this value.
pub const CONFLUENCE_RADIUS: f64 = 0.05;

pub fn default_confluence_tol<F: SmoothFunction + ?Sized>(f: &F) -> f64 {
    CONFLUENCE_RADIUS * f.length_scale()
}

/// Complete homogeneous symmetric polynomials `h_0..=h_r` of `ys`.
fn complete_homogeneous(ys: &[f64], r: usize) -> Vec<f64> {
    let mut h = vec![0.0; r + 1];
    h[0] = 1.0;
    for &y in ys {
        for i in 1..=r {
            h[i] += y * h[i - 1];
        }
    }
    h
}

/// `f[x_0..x_m] = Σ_{j>=m} f^{(j)}(c)/j! · h_{j-m}(x - c)`, truncated at the
/// highest available derivative.
fn taylor_entry<F: SmoothFunction + ?Sized>(f: &F, xs: &[f64]) -> Result<f64> {
    let m = xs.len() - 1;
    let cap = f.max_order();
    if m > cap {
        return Err(Error::ConfluenceTooDeep { order: m, cap });
    }
    let c = xs.iter().sum::<f64>() / xs.len() as f64;
    let d = f.derivatives(c, cap)?;
    let ys: Vec<f64> = xs.iter().map(|x| x - c).collect();
    let h = complete_homogeneous(&ys, cap - m);
    let mut fact = (1..=m).map(|i| i as f64).product::<f64>();
    let mut acc = 0.0;
    for j in m..=cap {
        if j > m {
            fact *= j as f64;
        }
        acc += d[j] / fact * h[j - m];
    }
    Ok(acc)
}

/// Divided difference `f[x_1, ..., x_n]`, symmetric in its nodes.
///
/// Groups of nodes spanning at most `confluence_tol` are treated as one
/// confluent cluster and evaluated from derivatives at the cluster mean;
/// exactly coincident nodes reduce to `f^{(m)}/m!`.
pub fn divided_difference<F: SmoothFunction + ?Sized>(
    f: &F,
    nodes: &[f64],
    confluence_tol: f64,
) -> Result<f64> {
    if nodes.is_empty() {
        return Err(invalid("divided difference needs at least one node"));
    }
    if nodes.iter().any(|x| !x.is_finite()) {
        return Err(invalid("nodes must be finite"));
    }
    if !(confluence_tol >= 0.0) {
        return Err(invalid("confluence tolerance must be non-negative"));
    }
    let mut xs = nodes.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    // table[i] holds f[x_i..x_{i+k}] after pass k
    let mut table: Vec<f64> = xs.iter().map(|&x| f.value(x)).collect();
    for k in 1..n {
        for i in 0..n - k {
            let spread = xs[i + k] - xs[i];
            table[i] = if spread <= confluence_tol {
                taylor_entry(f, &xs[i..=i + k])?
            } else {
                (table[i + 1] - table[i]) / spread
            };
        }
    }
    Ok(table[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::fermi::FermiDirac;

    /// `e^{a x}`, whose divided differences at equispaced nodes are known in closed form.
    struct Exp(f64);

    impl SmoothFunction for Exp {
        fn value(&self, x: f64) -> f64 {
            (self.0 * x).exp()
        }
        fn derivatives(&self, x: f64, order: usize) -> Result<Vec<f64>> {
            Ok((0..=order).map(|n| self.0.powi(n as i32) * (self.0 * x).exp()).collect())
        }
        fn max_order(&self) -> usize {
            8
        }
        fn length_scale(&self) -> f64 {
            1.0 / self.0.abs()
        }
    }

    #[test]
    fn single_and_confluent_pair() {
        let f = FermiDirac::new(1.0, 0.0).unwrap();
        let tol = default_confluence_tol(&f);
        let v = divided_difference(&f, &[1.0], tol).unwrap();
        assert!((v - 0.2689414213699951).abs() < 1e-15);
        let d = divided_difference(&f, &[1.0, 1.0], tol).unwrap();
        assert!((d + 0.19661193324148185).abs() < 1e-15);
    }

    #[test]
    fn permutation_symmetry() {
        let f = FermiDirac::new(1.0, 2.0).unwrap();
        let tol = default_confluence_tol(&f);
        let a = divided_difference(&f, &[1.0, 2.0, 5.0], tol).unwrap();
        let b = divided_difference(&f, &[5.0, 1.0, 2.0], tol).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn exponential_closed_form() {
        // e^{x}[0, h, ..., m h] = (e^h - 1)^m / (m! h^m)
        let f = Exp(1.0);
        for h in [1.0, 0.3, 0.04, 1e-3, 1e-7] {
            for m in 1..=4usize {
                let nodes: Vec<f64> = (0..=m).map(|i| i as f64 * h).collect();
                let fact: f64 = (1..=m).map(|i| i as f64).product();
                let exact = (h.exp_m1()).powi(m as i32) / (fact * h.powi(m as i32));
                let got = divided_difference(&f, &nodes, default_confluence_tol(&f)).unwrap();
                assert!((got - exact).abs() < 1e-10 * exact, "h={h} m={m}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn near_confluence_is_continuous() {
        let f = FermiDirac::new(2.0, 3.0).unwrap();
        let tol = default_confluence_tol(&f);
        let exact = divided_difference(&f, &[2.9, 2.9, 3.4, 3.4], tol).unwrap();
        for r in [1e-3, 1e-6, 1e-9, 1e-12] {
            let v = divided_difference(&f, &[2.9, 2.9 + r, 3.4 - r, 3.4], tol).unwrap();
            assert!((v - exact).abs() < 1e-9 + 10.0 * r, "r={r}");
        }
    }

    #[test]
    fn too_deep_confluence() {
        let f = FermiDirac::new(1.0, 0.0).unwrap();
        let nodes = [0.5; 10];
        assert!(matches!(
            divided_difference(&f, &nodes, 1e-5),
            Err(Error::ConfluenceTooDeep { .. })
        ));
        assert!(divided_difference(&f, &nodes[..9], 1e-5).is_ok());
        assert!(divided_difference(&f, &[], 1e-5).is_err());
    }
}
