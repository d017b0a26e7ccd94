//! Robust experiment-design selection under interference ambiguity.

pub mod app;
pub mod config;
pub mod designs;
pub mod diagnostics;
pub mod evaluate;
pub mod error;
pub mod exposure;
pub mod mechanisms;
pub mod panel;
pub mod plot;
pub mod risk;
pub mod rng;
pub mod selector;

pub use error::{Error, Result};
