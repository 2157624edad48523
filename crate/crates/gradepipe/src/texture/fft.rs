//! 2-D FFT on row-major complex grids.
//!
//! Forward is the plain unnormalized DFT; the inverse applies 1/(M*N) so
//! `ifft2(fft2(x)) = x`.

use num_complex::Complex;
use rustfft::FftPlanner;

use super::TextureError;

/// Row-major complex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex<f64>>,
}

impl ComplexGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<f64>>) -> Result<Self, TextureError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(TextureError::EmptyGrid);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self, TextureError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(TextureError::EmptyGrid);
        }
        Ok(Self {
            rows,
            cols,
            data: data.iter().map(|&v| Complex::new(v, 0.0)).collect(),
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex<f64> {
        self.data[row * self.cols + col]
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn transform(grid: &ComplexGrid, forward: bool) -> ComplexGrid {
    let mut planner = FftPlanner::new();
    let row_fft = if forward {
        planner.plan_fft_forward(grid.cols)
    } else {
        planner.plan_fft_inverse(grid.cols)
    };
    let col_fft = if forward {
        planner.plan_fft_forward(grid.rows)
    } else {
        planner.plan_fft_inverse(grid.rows)
    };

    let mut data = grid.data.clone();
    for row in data.chunks_exact_mut(grid.cols) {
        row_fft.process(row);
    }
    let mut column = vec![Complex::new(0.0, 0.0); grid.rows];
    for c in 0..grid.cols {
        for r in 0..grid.rows {
            column[r] = data[r * grid.cols + c];
        }
        col_fft.process(&mut column);
        for r in 0..grid.rows {
            data[r * grid.cols + c] = column[r];
        }
    }
    ComplexGrid {
        rows: grid.rows,
        cols: grid.cols,
        data,
    }
}

/// Forward unnormalized 2-D DFT.
pub fn fft2(grid: &ComplexGrid) -> Result<ComplexGrid, TextureError> {
    if grid.rows == 0 || grid.cols == 0 {
        return Err(TextureError::EmptyGrid);
    }
    Ok(transform(grid, true))
}

/// Inverse 2-D DFT with 1/(M*N) normalization.
pub fn ifft2(grid: &ComplexGrid) -> Result<ComplexGrid, TextureError> {
    if grid.rows == 0 || grid.cols == 0 {
        return Err(TextureError::EmptyGrid);
    }
    let mut out = transform(grid, false);
    let scale = 1.0 / (grid.rows * grid.cols) as f64;
    for v in &mut out.data {
        *v *= scale;
    }
    Ok(out)
}

/// Unnormalized inverse; callers handle scaling.
pub(crate) fn ifft2_raw(grid: &ComplexGrid) -> ComplexGrid {
    transform(grid, false)
}

pub(crate) fn fft2_raw(grid: &ComplexGrid) -> ComplexGrid {
    transform(grid, true)
}
