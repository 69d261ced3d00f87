//! Synthetic person re-identification datasets from a controllable virtual world.
//!
//! The pipeline generates parametric pedestrians ([`human`]), walks them through
//! scenes watched by a camera network ([`world`]), rasterizes every camera frame
//! together with a pixel-exact instance buffer ([`render`]), turns the instance
//! buffer into filtered, jittered person crops ([`annotate`]) and writes a
//! dataset with a manifest ([`dataset`]). [`eval`] measures cross-camera
//! retrieval on the result.

pub mod ablation;
pub mod annotate;
pub mod color;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geom;
pub mod human;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod world;

pub use error::{Error, Result};
