pub mod analytics;
pub mod engine;
pub mod error;
pub mod geo;
pub mod mobility;
pub mod places;
pub mod policy;
pub mod risk;
pub mod rng;
pub mod service;
pub mod time;

pub use error::{Error, Result};
