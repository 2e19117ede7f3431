//! Batch front end for the `nvmask` toolkit.

pub mod commands;
pub mod config;
pub mod output;
