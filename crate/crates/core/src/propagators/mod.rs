//! Gaussian beams, beam parametrices and the reference propagators they are
//! measured against.

pub mod beam;
pub mod experiments;
pub mod oracle;
pub mod parametrix;
pub mod split_step;

pub use beam::{beam_evaluate, propagate_gaussian_params, GaussianBeam};
pub use oracle::metaplectic_oracle;
pub use parametrix::{residual, Parametrix, ResidualReport};
pub use split_step::{exact_split_step, SplitStepPropagator};
pub use experiments::{error_scaling, residual_scaling, uniform_bound_experiment, ParametrixSetup};
