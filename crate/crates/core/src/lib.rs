//! Design and analysis of planar (surface-electrode) RF ion traps.

pub mod analysis;
pub mod cli;
pub mod circuits;
pub mod config;
pub mod constants;
pub mod error;
pub mod field;
pub mod geometry;
pub mod optimize;
pub mod reproduce;
pub mod solver;
pub mod thermometry;
pub mod voltages;

pub use error::{Error, Result};
