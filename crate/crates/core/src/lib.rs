//! Physics-informed LSTM toolkit for lithium-ion abuse-test temperature
//! forecasting: synthetic data generation from phenomenological failure
//! laws, preprocessing, a from-scratch LSTM/MLP engine trained with a
//! combined data + heat-diffusion objective, evaluation, and a severity
//! driven three-level thermal-runaway warning ladder.
//!
//! Numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the pipeline and shipped defaults run in `f64` via the aliases below.

pub mod benchmark;
pub mod data;
pub mod mat;
pub mod neural;
pub mod physics;
pub mod safety;
pub mod scalar;
pub mod sim;
pub mod train;

/// Concrete `f64` instantiations used by the pipeline.
pub type LawParams64 = sim::LawParams<f64>;
pub type PhysicsConfig64 = physics::PhysicsConfig<f64>;
pub type LstmParams64 = neural::LstmParams<f64>;
pub type MlpParams64 = neural::MlpParams<f64>;
pub type AdamState64 = neural::AdamState<f64>;
