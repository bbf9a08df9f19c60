//! Quantum zipper experiments: boundary length against quantum time,
//! stationarity of their ratio, and the Markov covariance of `μ⁰`.

mod markov;
mod run;
mod stationarity;

pub use markov::{markov_covariance_check, markov_covariance_check_on, MarkovConfig, MarkovReport};
pub use run::{
    run_zipper, slope_report, write_clocks, zipper_replicate, ClockAtom, Injection, SlopeReport, ZipperConfig, ZipperRun,
    NEAR_HULL_LIMIT,
};
pub use stationarity::{
    stationarity_diagnostic, stationarity_diagnostic_with, window_rate, KsPair, StationarityReport, CHECKPOINTS, DELTA, KS_LEVEL, MIN_RUNS,
};
