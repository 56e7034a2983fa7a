//! Configuration, report output and plotting behind the `hodgeqi` binary.

pub mod commands;
pub mod config;
pub mod plot;

pub use commands::Status;
