//! Hawkes impact model of metaorders.
//!
//! * [`kernels`]: causal kernels on a grid, convolution, the `κ` and `Ψ` series.
//! * [`hawkes_sim`]: thinning simulation of multivariate Hawkes processes,
//!   expected counts and Monte Carlo impact curves.
//! * [`him_model`]: analytic impact curves of the impulsive Hawkes impact model.
//! * [`estimation`]: empirical impact estimators on metaorder data.
//! * [`model_fit`]: joint calibration of the model to a family of impact curves.
//! * [`daily`]: CAPM decomposition and post-execution profiles at the daily scale.

pub mod daily;
pub mod error;
pub mod estimation;
pub mod hawkes_sim;
pub mod him_model;
pub mod kernels;
pub mod model_fit;
pub mod optimize;
pub mod stats;

pub use error::{Error, Result};
