//! Simulation and estimation of Brownian asymptotics on model Riemannian
//! covers: linear drift, stochastic entropy, volume entropy, bottom of the
//! spectrum, and the horofunction functionals that relate them.
//!
//! The catalog is deliberately small: Euclidean spaces, the hyperbolic
//! half-plane, and products of two of those. Every estimator is driven by an
//! explicit [`RngSeed`](brownian::RngSeed) so results are reproducible
//! regardless of how many worker threads run.

pub mod brownian;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod group_walks;
pub mod harness;
pub mod horofield;
pub mod quadrature;

pub use error::{Error, Result};
pub use geometry::{ModelSpace, Point};
