//! Untrained graph neural network generators for denoising graph signals,
//! together with the spectral tools used to analyze them and the classical
//! graph denoisers they are compared against.

pub mod baselines;
pub mod coarsening;
pub mod error;
pub mod experiments;
pub mod generators;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod models;
pub mod signals;
pub mod spectral;

pub use error::{Error, Result};
