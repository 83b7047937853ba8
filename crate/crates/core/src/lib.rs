pub mod asympt;
pub mod cli;
pub mod control;
pub mod costs;
pub mod dists;
pub mod error;
pub mod exact;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
