pub mod cli;
pub mod critical;
pub mod decay;
pub mod error;
pub mod kernel;
pub mod numerics;
pub mod oscquad;
pub mod phase;
pub mod report;
pub mod restriction;

pub use error::{Error, Result};
