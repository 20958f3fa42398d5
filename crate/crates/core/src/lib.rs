pub mod cli;
pub mod curriculum;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod image;
pub mod nn;
mod persist;
pub mod pgm;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, PersistError, Result};
