//! Configuration, artifacts and orchestration for training runs.

pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod error;
pub mod manifest;
pub mod run;
pub mod sweep;
pub mod table;
pub mod toy;
pub mod trajectory;

pub use error::{Error, Result};
