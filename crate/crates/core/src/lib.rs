//! Region-level image parsing from noisy image-level tags.
//!
//! The pipeline oversegments images into regions, infers noisy per-region
//! category labels from whatever tags the images carry, and then cleans those
//! labels by alternating L1 minimization over a truncated spectral basis of
//! the region graph's normalized Laplacian. The crate is organized along the
//! pipeline stages:
//!
//! - [`segment`]: pixel features, Gaussian-mixture oversegmentation and the
//!   137-d region descriptors.
//! - [`graph`]: k-NN similarity graph, normalized Laplacian and its truncated
//!   eigenbasis.
//! - [`labels`]: initial label inference from tags plus size and semantic
//!   context smoothing.
//! - [`solver`]: the alternating sparse minimizer and a label-propagation
//!   baseline.
//! - [`dataset`] / [`eval`]: synthetic scenes, tag-noise injection, label
//!   assignment and pixel-accuracy scoring.
//!
//! Everything here works on in-memory buffers and is deterministic for a
//! fixed seed; file formats and orchestration live in the companion CLI
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod dataset;
pub mod error;
pub mod eval;
mod fmath;
pub mod graph;
pub mod labels;
pub mod pipeline;
pub mod raster;
pub mod regions;
pub mod segment;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use regions::RegionSet;

/// Dense matrix used for label matrices, spectral bases and coefficients.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense column vector.
pub type Vec64 = nalgebra::DVector<f64>;
