pub mod cli;
pub mod error;
pub mod holo;
pub mod imageio;
pub mod manifest;
pub mod nn;
pub mod physics;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod simgen;

pub use error::{Error, Result};
