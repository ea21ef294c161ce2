//! Command-line entry points and the live session service.

pub mod cli;
pub mod commands;
pub mod data;
pub mod error;
pub mod serve;
pub mod wire;

pub use error::{GatewayError, Result};
