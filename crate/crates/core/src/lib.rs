//! Momentum-smoothed, damped, block-partitioned limited-memory BFGS.
//!
//! The crate is generic over the scalar type through [`Scalar`] (implemented for `f32`
//! and `f64`); the aliases below fix it to `f64`, which the verification tolerances need.

pub mod dist;
pub mod error;
pub mod layout;
pub mod matrix;
pub mod objectives;
pub mod optim;
pub mod qn;
pub mod rng;
pub mod scalar;
pub mod vector;

pub use error::{Error, Result};
pub use layout::{build_balanced_layout, build_block_layout, equal_block_sizes, BlockLayout};
pub use rng::{gaussian_noise, RngStream};
pub use matrix::DenseMatrix;
pub use scalar::Scalar;
pub use vector::FlatVector;

pub type Vector = vector::FlatVector<f64>;
pub type Matrix = matrix::DenseMatrix<f64>;
pub type EmaState = qn::EmaState<f64>;
pub type HistoryBuffer = qn::HistoryBuffer<f64>;
pub type CurvaturePair = qn::CurvaturePair<f64>;
pub type Quadratic = objectives::QuadraticObjective<f64>;
pub type Dataset = objectives::Dataset<f64>;
pub type Mlbfgs = optim::Mlbfgs<f64>;
pub type Cluster = dist::Cluster<f64>;
pub type WorkerSim = dist::WorkerSim<f64>;
