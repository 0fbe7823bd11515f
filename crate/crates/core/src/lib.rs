//! Square jigsaw puzzle solving with orientation recovery through the graph
//! connection Laplacian.
//!
//! The pipeline: [`metrics`] scores every pair of patch edges, [`congraph`]
//! turns the scores into a weighted graph whose edges carry Z4 rotations,
//! [`spectral`] synchronizes those rotations through the top eigenvectors of
//! the normalized connection matrix, [`placement`] places the upright
//! patches, and [`solver`] iterates graph repair and re-solving. [`eval`]
//! scores reconstructions against ground truth.

pub mod bench;
pub mod congraph;
pub mod error;
pub mod eval;
pub mod image_io;
pub mod metrics;
pub mod placement;
pub mod puzzle;
pub mod rng;
pub mod rotation;
pub mod sidecar;
pub mod solver;
pub mod spectral;
pub mod synth;
pub mod vdd;

pub use error::{Error, Result};
pub use image::RgbImage;
pub use puzzle::{Cell, Direction, GridSpec, GroundTruth, Patch, PuzzleType, Solution};
pub use rotation::{Mat2, Rotation};
