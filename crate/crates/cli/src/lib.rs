//! Operator CLI and `/v1` HTTP service for the fashionrec pipeline.

pub mod cli;
pub mod config;
pub mod remote;
pub mod server;
pub mod store;

pub use cli::run;
