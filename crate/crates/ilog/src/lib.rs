//! Std companion of `ilog-core`: time zones, file formats, the file-backed
//! experiment store, the HTTP service and the command line.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod format;
pub mod service;
pub mod store;
pub mod zones;
