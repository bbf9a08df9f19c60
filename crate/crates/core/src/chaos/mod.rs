//! Gaussian multiplicative chaos on atomic reference measures.

mod gmc;
mod invariance;
mod measure;
mod moments;

pub use gmc::{
    expected_mass, expected_mass_in, gmc_converged, gmc_converged_many, gmc_measure, gmc_total_masses, probe_at, probes_for, recover_reference,
    ConvergenceReport, GmcSpec, GMC_CONVERGENCE_TOL,
};
pub use invariance::{boundary_exponent, curve_exponent, invariance_check, martingale_slope, InvarianceReport};
pub use measure::{Atom, AtomicMeasure, Support};
pub use moments::{moment_estimate, MomentEstimate, MIN_REPLICATES};
