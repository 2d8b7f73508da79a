//! Iterative refined instrumental-variable estimation of additive models.

pub mod align;
pub mod dataset;
pub mod estimator;
pub mod options;
pub mod regression;

pub use align::align_submodels;
pub use dataset::SampledDataset;
pub use estimator::{
    asymptotic_covariance, asymptotic_covariance_with_sigma, instrument_noise_correlation,
    riv_solve, riv_step, RivResult,
};
pub use options::{EstimatorOptions, LoopMode, TransientWindow, UnstablePolicy};
pub use regression::{
    build_instrument, build_regressor, noise_covariance, regression_matrices, residual,
    subsystem_residual_output, RegressionMatrices, SampleMatrices,
};
