//! Lookaround optimizer laboratory.
//!
//! Implements the Lookaround optimizer (iterated around/average training over
//! data-augmented replicas) alongside SGD, classical momentum and Lookahead,
//! plus the analysis machinery used to verify its behavior: noisy-quadratic
//! moment recursions and fixed points, deterministic-quadratic convergence
//! rates via linear dynamical systems, and a desk-scale MLP experiment
//! harness with loss-landscape plane projections.

pub mod augment;
pub mod batch;
pub mod convergence;
pub mod error;
pub mod nn;
pub mod objective;
pub mod optim;
pub mod param;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
pub use param::ParamVector;
