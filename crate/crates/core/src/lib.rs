pub mod cli;
pub mod config;
pub mod error;
pub mod fbm;
pub mod ledger;
pub mod market;
pub mod montecarlo;
pub mod rng;
pub mod strategy;

pub use error::{Error, Result};
