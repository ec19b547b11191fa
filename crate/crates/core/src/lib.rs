//! Allocation-only core of the forge depth pipeline.
//!
//! Everything in this crate is pure: pinhole geometry, focal-unifying
//! augmentation, marker rasterization, prompt templates and answer parsing,
//! multi-task ground truth, depth metrics and GRPO rewards, mixture sampling,
//! a mock answer oracle, synthetic scenes, and point-cloud assembly.
//! File formats, networking and the CLI live in the `forge` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod augment;
pub mod error;
pub mod geometry;
pub mod image;
pub mod markers;
pub mod metrics;
pub mod mixture;
pub mod oracle;
pub mod pointcloud;
pub mod prompts;
pub mod rng;
pub mod synth;
pub mod tasks;

pub use error::{Error, Result};
pub use geometry::{Intrinsics, Pixel, Point3, Pose};
