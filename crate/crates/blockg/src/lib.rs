//! Bayesian variable selection for Gaussian linear models under Dirichlet
//! process mixtures of block g priors.
//!
//! The crate is organised bottom-up: [`numerics`] holds the kernels,
//! [`model`] the shared state types, [`priors`] and [`likelihood`] the
//! densities, [`sampler`] the MCMC, and [`inference`] the posterior
//! summaries and scoring rules.

pub mod inference;
pub mod likelihood;
pub mod model;
pub mod numerics;
pub mod priors;
pub mod sampler;
