//! Log-correlated Gaussian fields observed through probe averages.

mod cov;
mod khat;
mod markov;
mod model;
mod probe;
mod sample;
mod wedge;

pub use cov::{probe_admissible, probe_covariance, probe_means, probe_moments};
pub use khat::{khat, khat_estimates, probe_variance, KhatEstimate, KHAT_SCHEDULE, KHAT_TOL};
pub use markov::markov_split_covariance;
pub use model::{
    green_neumann, logmax_circle_avg, q_of, CovarianceModel, DiskRho, FieldLaw, Mollifier, Quadrature, Regime,
    SEMICIRCLE_ENERGY,
};
pub use probe::{Probe, ProbeSet};
pub use sample::{sample_field, sample_probes, FieldSample, GaussianSampler, PSD_TOL};
pub use wedge::{wedge_radial_path, RadialPath, ENTRANCE};
