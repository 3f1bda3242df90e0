pub mod autograd;
pub mod classify;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod field;
mod io;
pub mod network;
pub mod propagation;
pub mod train;
pub mod viz;

pub use error::{Error, Result};
