//! Numerical toolkit for periodic Schrödinger operators: Bloch fiber
//! Hamiltonians in a plane-wave basis, momentum matrix elements, their decay
//! with band energy, sum rules, perturbation series, and Fermi–Dirac contour
//! traces per unit volume, plus a semi-analytic periodic delta model.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decay;
pub mod delta;
pub mod error;
pub mod fiber;
pub mod fit;
pub mod model;
pub mod momentum;
pub mod output;
pub mod perturb;
pub mod runner;
pub mod sumrule;
pub mod trace;

pub use error::{Error, Result};
pub use fiber::{
    assemble_fiber, band_structure, fiber_spectrum, solve_fiber, BandStructure, FiberOperator,
    FiberSpectrum,
};
pub use model::{
    build_basis, build_potential, sample_brillouin, ContourSpec, FourierPotential, KGrid,
    PlaneWaveBasis, PotentialFamily, PotentialSpec,
};
pub use momentum::{feynman_hellmann_check, momentum_matrix, supnorm_growth, MomentumMatrix};
