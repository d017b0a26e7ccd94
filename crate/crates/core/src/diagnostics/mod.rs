//! Executable checks of the selector's theoretical guarantees and the
//! planning experiments built on top of it.

pub mod catalog;
pub mod certificate;
pub mod mde_grid;
pub mod oracle;
pub mod sweep;
pub mod transport;
