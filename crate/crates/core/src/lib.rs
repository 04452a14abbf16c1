//! Learnable subspace clustering.
//!
//! A small fully-connected encoder is trained on a sampled set of
//! representatives so that it reproduces their self-expressive codes
//! (least squares, sparse, low-rank or elastic-net, each with a separated
//! noise term). The encoder then codes any number of points in linear time,
//! and the codes are clustered with landmark-style spectral clustering.
//!
//! Data matrices hold one point per column.

pub mod analysis;
pub mod config;
pub mod encoder;
pub mod error;
pub mod io;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod prox;
pub mod rpcm;
pub mod sampling;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};

/// Dense column-major matrix of doubles.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Data matrix with one point per column (`d` rows, `m` columns).
pub type DataMatrix = Matrix;
