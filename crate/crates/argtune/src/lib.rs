//! File formats, model backends and the command line around
//! [`argtune_core`].

pub mod backend;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod io;

pub use argtune_core as core;
