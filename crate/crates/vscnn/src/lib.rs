//! Host-side companion to `vscnn-core`: dataset manifests and skeleton
//! files, the Kinect text adapter, TOML configuration, checkpoints, encoded
//! caches, metrics and rendered reports.

pub mod cache;
pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod native;
pub mod render;

pub use error::{Error, Result};
