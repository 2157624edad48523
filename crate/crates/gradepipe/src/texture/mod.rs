//! Texture features: LBP map, curvelet decomposition of the map, and
//! mean/standard deviation of the coarse subband.

mod curvelet;
mod fft;
mod lbp;

pub use curvelet::{
    coarse_subband, default_scales, fdct_wrapping, reconstruct, CurveletCoeffs, CurveletTile,
};
pub use fft::{fft2, ifft2, ComplexGrid};
pub use lbp::{lbp_code, lbp_histogram, lbp_map, riu2_code, u2_code, uniformity, LbpMap, LbpMode};

use crate::raster::{BinaryMask, RasterImage};

#[derive(Debug, thiserror::Error)]
pub enum TextureError {
    #[error("expected {expected} neighbors, got {got}")]
    WrongNeighborCount { expected: usize, got: usize },
    #[error("neighbor count {0} out of supported range")]
    NeighborCountOutOfRange(usize),
    #[error("pattern {pattern:#b} out of range for {p} neighbors")]
    PatternOutOfRange { pattern: u32, p: usize },
    #[error("sampling radius must be positive")]
    BadRadius,
    #[error("image {width}x{height} too small (need at least {min} per side)")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("empty grid")]
    EmptyGrid,
    #[error("angle count {0} must be a multiple of 4 and at least 8")]
    BadAngleCount(usize),
    #[error("scale count {0} must be at least 2")]
    BadScaleCount(usize),
    #[error("dimension mismatch between image and mask")]
    DimensionMismatch,
    #[error("expected a 1-channel image")]
    NotGray,
}

/// Row-major real-valued grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Mean and population standard deviation of the coarse subband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureVector {
    pub mean: f64,
    pub std: f64,
}

impl TextureVector {
    pub fn to_array(&self) -> [f64; 2] {
        [self.mean, self.std]
    }
}

/// Settings for the curvelet stage of the texture pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureConfig {
    /// Scale count; `None` derives it from the transform input size.
    pub n_scales: Option<usize>,
    pub n_angles_coarse: usize,
}

impl Default for TextureConfig {
    fn default() -> Self {
        Self {
            n_scales: None,
            n_angles_coarse: 16,
        }
    }
}

/// Population mean and standard deviation of a grid.
pub fn texture_stats(subband: &RealGrid) -> Result<TextureVector, TextureError> {
    let n = subband.rows * subband.cols;
    if n == 0 || subband.data.len() != n {
        return Err(TextureError::EmptyGrid);
    }
    let n = n as f64;
    let mean = subband.data.iter().sum::<f64>() / n;
    let var = subband
        .data
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    Ok(TextureVector {
        mean,
        std: var.sqrt(),
    })
}

/// Full texture feature: zero out non-mask pixels, take the plain LBP(8, 1)
/// map, decompose it with the wrapping curvelet transform, and summarize
/// the coarse subband.
pub fn texture_vector(
    image: &RasterImage,
    mask: &BinaryMask,
    config: &TextureConfig,
) -> Result<TextureVector, TextureError> {
    if image.channels() != 1 {
        return Err(TextureError::NotGray);
    }
    if image.width() != mask.width() || image.height() != mask.height() {
        return Err(TextureError::DimensionMismatch);
    }
    let masked_data: Vec<f64> = image
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &b)| if b != 0 { v } else { 0.0 })
        .collect();
    let masked = RasterImage::new(image.width(), image.height(), 1, masked_data)
        .expect("masked image keeps dimensions");

    let map = lbp_map(&masked, 8, 1.0, LbpMode::Plain)?;
    let map_image = RasterImage::new(
        map.width,
        map.height,
        1,
        map.codes.iter().map(|&c| f64::from(c)).collect(),
    )
    .map_err(|_| TextureError::ImageTooSmall {
        width: map.width,
        height: map.height,
        min: 32,
    })?;

    let n_scales = config
        .n_scales
        .unwrap_or_else(|| default_scales(map.height, map.width));
    let coeffs = fdct_wrapping(&map_image, n_scales, config.n_angles_coarse)?;
    texture_stats(&coarse_subband(&coeffs))
}
