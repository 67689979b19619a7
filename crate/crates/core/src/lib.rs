pub mod error;
pub mod field;
pub mod forecast;
pub mod generators;
pub mod metrics;
pub mod car;
pub mod data;
pub mod nn;
pub mod report;
pub mod study;
pub mod util;
pub mod vae;

pub use error::{Error, Result};
