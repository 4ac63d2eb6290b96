pub mod afl;
pub mod agent;
pub mod dataset;
pub mod env;
pub mod experiment;
pub mod error;
pub mod gan;
pub mod nn;
pub mod oracle;
pub mod seed;

pub use error::{Error, Result};
