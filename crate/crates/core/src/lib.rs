//! Marker-free hand-eye calibration for OCT-guided needle robots.

pub mod cloud;
pub mod distortion;
pub mod error;
pub mod harness;
pub mod kdtree;
pub mod pipeline;
pub mod registration;
pub mod segmentation;
pub mod stats;
pub mod synth;
pub mod text;
pub mod volume;

pub use error::{Error, Result};
