//! Date-fruit grading from images: specular-reflection removal, threshold
//! segmentation, shape and texture feature extraction, feature fusion, and
//! supervised grading into six classes, plus the batch evaluation harness
//! and synthetic dataset generator behind the `gradepipe` CLI.
//!
//! Pipeline stages map onto modules:
//!
//! - [`raster`]: image containers and bit-exact PPM/PGM I/O
//! - [`preprocess`]: highlight removal, Otsu segmentation, hole filling,
//!   Sobel contour
//! - [`shape`]: area, perimeter, moment-ellipse axes, eccentricity,
//!   equivalent diameter
//! - [`texture`]: LBP maps, 2-D FFT, wrapping curvelet transform, coarse
//!   subband statistics
//! - [`classify`]: fusion, z-scoring, k-NN / nearest-centroid / LDA
//! - [`harness`]: manifests, balanced splits, evaluation reports,
//!   synthetic data

pub mod classify;
pub mod harness;
pub mod preprocess;
pub mod raster;
pub mod shape;
pub mod texture;
