use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use blochsum::delta::riemann_partial_sum;
use blochsum::sumrule::oscillation_series;
use blochsum::trace::{
    contour_integral_quadrature, default_confluence_tol, divided_difference, FermiDirac,
};
use blochsum::{
    build_basis, build_potential, fiber_spectrum, momentum_matrix, ContourSpec, PotentialSpec,
};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

fn random_potential(seed: u64) -> blochsum::FourierPotential {
    build_potential(
        &PotentialSpec::new(
            1,
            blochsum::PotentialFamily::RandomSmooth {
                amplitude: 2.0,
                width: 2.0,
                cutoff: 4,
                seed,
            },
            5.0,
        ),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn eigenvalues_shift_with_the_potential(seed in 0u64..1000, c in -3.0f64..3.0, k in -PI..PI) {
        let basis = build_basis(1, 12).unwrap();
        let v = random_potential(seed);
        let a = fiber_spectrum(&v, &basis, &[k], Some(10)).unwrap();
        let b = fiber_spectrum(&v.with_shift(v.shift() + c), &basis, &[k], Some(10)).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert!((y - x - c).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn spectrum_is_even_in_k(seed in 0u64..1000, k in -PI..PI) {
        let basis = build_basis(1, 12).unwrap();
        let v = random_potential(seed);
        let a = fiber_spectrum(&v, &basis, &[k], Some(10)).unwrap();
        let b = fiber_spectrum(&v, &basis, &[-k], Some(10)).unwrap();
        for (x, y) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn momentum_matrix_is_hermitian_and_phase_covariant(
        seed in 0u64..1000,
        k in -3.0f64..3.0,
        phases in prop::collection::vec(0.0f64..(2.0 * PI), 8),
    ) {
        let basis = build_basis(1, 10).unwrap();
        let s = fiber_spectrum(&random_potential(seed), &basis, &[k], Some(8)).unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        prop_assert!(pi.hermiticity_defect() <= 1e-12);

        let mut c: DMatrix<Complex64> = s.coefficients().unwrap().clone();
        for (i, &t) in phases.iter().enumerate() {
            let z = Complex64::from_polar(1.0, t);
            c.row_mut(i).iter_mut().for_each(|x| *x *= z);
        }
        let rotated = momentum_matrix(&s.clone().with_coefficients(c).unwrap(), 0).unwrap();
        for a in 1..=8 {
            for b in 1..=8 {
                prop_assert!((pi.entry(a, b).norm() - rotated.entry(a, b).norm()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn divided_difference_is_symmetric(
        nodes in prop::collection::vec(0.0f64..20.0, 1..6),
        beta in 0.3f64..3.0,
        mu in 0.0f64..20.0,
    ) {
        let f = FermiDirac::new(beta, mu).unwrap();
        let tol = default_confluence_tol(&f);
        let a = divided_difference(&f, &nodes, tol).unwrap();
        let mut rev = nodes.clone();
        rev.reverse();
        rev.rotate_left(nodes.len() / 2);
        let b = divided_difference(&f, &rev, tol).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-3));
    }

    #[test]
    fn contour_quadrature_matches_residues(
        nodes in prop::collection::vec(0.0f64..30.0, 1..4),
        beta in prop::sample::select(vec![0.5, 1.0, 2.0]),
        mu in 0.0f64..30.0,
    ) {
        let f = FermiDirac::new(beta, mu).unwrap();
        let top = nodes.iter().copied().fold(f64::MIN, f64::max);
        let spec = ContourSpec::with_defaults(beta, mu, top).unwrap();
        let dd = divided_difference(&f, &nodes, default_confluence_tol(&f)).unwrap();
        let sign = if nodes.len() % 2 == 0 { 1.0 } else { -1.0 };
        let got = contour_integral_quadrature(&spec, &nodes).unwrap().value;
        prop_assert!((got - Complex64::new(0.0, sign * 2.0 * PI * dd)).norm() <= 1e-8);
    }

    #[test]
    fn oscillation_series_is_odd(seed in 0u64..1000, t in 1e-4f64..0.1) {
        let basis = build_basis(1, 10).unwrap();
        let s = fiber_spectrum(&random_potential(seed), &basis, &[0.2], None).unwrap();
        let pi = momentum_matrix(&s, 0).unwrap();
        let o = oscillation_series(&pi, &s, 1, &[t, -t], s.n_bands()).unwrap();
        prop_assert_eq!(o.values[0], -o.values[1]);
    }

    #[test]
    fn riemann_sum_is_odd_and_bounded(t in -1.0f64..1.0, cutoff in 1usize..500) {
        let a = riemann_partial_sum(t, cutoff);
        prop_assert_eq!(a, -riemann_partial_sum(-t, cutoff));
        prop_assert!(a.abs() <= PI * PI / 6.0);
    }
}
