//! Desk-scale neural-network harness: synthetic datasets, a from-scratch MLP
//! with exact gradients, training loops for all four optimizers, ensembles and
//! post-hoc averaging, and loss-landscape plane projections.

pub mod dataset;
pub mod experiments;
pub mod landscape;
pub mod mlp;
pub mod train;
