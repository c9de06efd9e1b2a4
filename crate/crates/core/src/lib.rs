#![no_std]
extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod advantage;
pub mod controller;
pub mod env;
pub mod error;
pub mod math;
pub mod metrics;
pub mod nn;
pub mod pcgrad;
pub mod policy;
pub mod scalarize;
pub mod toybench;
pub mod trainer;

pub use error::{Error, Result};
