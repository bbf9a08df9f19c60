//! Minkowski content, pushforwards and the quantum natural time.

mod compare;
mod minkowski;
mod pushforward;
pub(crate) mod quantum;

pub use compare::{compare_measures, compare_segment_masses, mask_times, segment_masses, Comparison, PROPORTIONAL_CV};
pub use minkowski::{
    dimension_fit, equal_segments, minkowski_content, segment_of, ContentEstimate, Window, MAX_GAP, PIXELS_PER_EPS,
    STABLE_TOL,
};
pub use pushforward::pushforward_measure;
pub use quantum::{
    bulk_khat, expected_quantum_time, expected_quantum_time_with, BoundaryPullback, Layout, QuantumTimeConfig, QuantumTimeMeasure,
    ReplicateStats,
};
