//! Pixel-relevance explanations for 3D-CNN video classifiers and their
//! motion-selective component.
//!
//! The pipeline runs a clip through a [`net::Model`], explains a class with
//! one of the backends in [`explain`], filters the explanation down to the
//! voxels whose relevance changes sharply over time ([`selective`]), and
//! scores the result against optical flow ([`flow`], [`metrics`]).

mod binio;
pub mod error;
pub mod volume;

pub mod explain;
pub mod fixtures;
pub mod flow;
pub mod kv;
pub mod meta;
pub mod metrics;
pub mod net;
pub mod render;
pub mod selective;

pub use error::{Error, Result};
pub use volume::{Axis, Dims3, Volume3, VolumeStats};
