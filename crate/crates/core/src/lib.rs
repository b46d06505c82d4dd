pub mod domain;
pub mod error;
pub mod eval;
pub mod indicators;
pub mod regression;
pub mod sim;
pub mod sketch;
pub mod workload;

pub use error::{Error, Result};
