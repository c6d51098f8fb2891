//! Desk-scale laboratory for measuring how missing and noisy data degrade
//! learning performance.

pub mod agent;
pub mod analysis;
pub mod corruption;
pub mod error;
pub mod imputation;
pub mod nn;
pub mod pattern;
pub mod render;
pub mod rng;
pub mod runner;
pub mod sim;

pub use error::{Error, Result};
