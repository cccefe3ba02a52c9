//! Simulation of objective wave-function collapse driven by a noisy
//! collective order parameter.
//!
//! The crate integrates the stochastic Schrödinger laws in [`models`] with
//! the steppers in [`sde`], solves the averaged density-matrix dynamics in
//! [`master`], and checks ensembles against Born statistics in [`stats`].

pub mod error;
pub mod hilbert;
pub mod master;
pub mod models;
pub mod noise;
pub mod sde;
pub mod stats;

pub use error::{Error, Result};
