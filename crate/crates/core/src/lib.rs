//! Quantum-noise floors of balanced optical homodyne and heterodyne detection.
//!
//! * [`optics`]: fields, beat configuration, splitter output intensities.
//! * [`analytic`]: closed-form shot noise, intensity correlations, and the
//!   competing noise models.
//! * [`sim`] / [`poisson`]: Poisson photodetection Monte Carlo.
//! * [`spectral`]: spectrum-analyzer emulation and floor extraction.
//! * [`fringe`]: fringe-visibility fitting.
//! * [`montecarlo`]: parallel, reproducible multi-trial runs.
//! * [`io`]: headered columnar text files.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod detector;
pub mod error;
pub mod fringe;
pub mod io;
pub mod montecarlo;
pub mod optics;
pub mod poisson;
pub mod sim;
pub mod spectral;

pub use analytic::{
    autocorr_decomposition, cross_correlation, floor_difference_db, floor_psd, lambda_autocorr,
    shot_psd, shot_variance, AutocorrDecomposition, NoiseModel,
};
pub use detector::{DetectorModel, PulseKind, PulseShape, ELECTRON_CHARGE};
pub use error::{Error, Result};
pub use fringe::{fringe_visibility, FringeScan};
pub use montecarlo::{run_monte_carlo, MonteCarloRun, TrialStatistics};
pub use optics::{
    beat_signal, output_intensities, photon_rate_from_power, BeatConfig, FieldSpec, OpticalPath,
};
pub use sim::{
    simulate_balanced, simulate_balanced_trial, simulate_detector, BalancedSetup, EventMode,
    PhotocurrentTrace, SimConfig,
};
pub use spectral::{
    check_3db_shift, estimate_psd, noise_floor, subtract_electronics, ClampPolicy, NoiseSpectrum,
    ShiftCheck, SpectrumConfig, THREE_DB,
};
