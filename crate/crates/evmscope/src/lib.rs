//! File formats, networking and the command-line front end around
//! [`evmscope_core`].

pub mod abi;
pub mod cli;
pub mod dataset;
pub mod files;
pub mod input;
pub mod report;

pub use evmscope_core as core;
