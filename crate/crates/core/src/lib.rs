pub mod algebra;
pub mod condexp;
pub mod error;
pub mod inequality;
pub mod lab;
pub mod martingale;
pub mod quad;
pub mod rng;
pub mod selftest;

pub use error::{Error, Result};
