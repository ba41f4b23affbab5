//! Library surface of the experiment runner so integration tests can drive
//! the sweep, the emitters and the config loader directly.

pub mod config;
pub mod experiment;
pub mod output;
