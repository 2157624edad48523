//! Fast discrete curvelet transform via frequency wrapping.
//!
//! The frequency plane is tiled by smooth window functions: one isotropic
//! lowpass covering the coarsest scale, and dyadic rings split into angular
//! wedges whose count starts at `n_angles_coarse` on the second-coarsest
//! scale and doubles every other scale outward. Radial and angular profiles
//! are Meyer-style sin/cos steps on a smooth polynomial, so the squared
//! windows sum to exactly one at every frequency sample: the transform is a
//! tight frame (coefficient energy equals image energy and the adjoint
//! reconstructs the input).
//!
//! Each windowed spectrum is wrapped modulo its support rectangle onto a
//! tile anchored at the origin, then taken back to the spatial side with a
//! unitary inverse FFT.

use num_complex::Complex;

use super::fft::{fft2_raw, ifft2_raw, ComplexGrid};
use super::{RealGrid, TextureError};
use crate::raster::RasterImage;

/// One wrapped coefficient tile. `row0`/`col0` anchor the support rectangle
/// in centered frequency coordinates; `rows`/`cols` are its extents.
#[derive(Debug, Clone)]
pub struct CurveletTile {
    pub scale: usize,
    pub angle: usize,
    pub rows: usize,
    pub cols: usize,
    pub row0: i64,
    pub col0: i64,
    pub data: Vec<Complex<f64>>,
}

impl CurveletTile {
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Full decomposition of one image.
#[derive(Debug, Clone)]
pub struct CurveletCoeffs {
    pub image_rows: usize,
    pub image_cols: usize,
    pub n_scales: usize,
    pub n_angles_coarse: usize,
    /// Isotropic lowpass tile (scale 0).
    pub coarse: CurveletTile,
    /// Wedge tiles for scales 1.., in (scale, angle) order.
    pub wedges: Vec<CurveletTile>,
}

impl CurveletCoeffs {
    /// Wedge count at a given scale (scale 0 has the single coarse tile).
    pub fn angles_at_scale(&self, scale: usize) -> usize {
        angles_at_scale(self.n_angles_coarse, scale)
    }

    pub fn tile(&self, scale: usize, angle: usize) -> Option<&CurveletTile> {
        if scale == 0 {
            return (angle == 0).then_some(&self.coarse);
        }
        self.wedges
            .iter()
            .find(|t| t.scale == scale && t.angle == angle)
    }

    /// Total coefficient energy across every tile.
    pub fn total_energy(&self) -> f64 {
        self.coarse.energy() + self.wedges.iter().map(CurveletTile::energy).sum::<f64>()
    }
}

fn angles_at_scale(n_angles_coarse: usize, scale: usize) -> usize {
    if scale == 0 {
        1
    } else {
        n_angles_coarse * (1 << ((scale - 1).div_ceil(2)))
    }
}

/// Smooth step: 0 below 0, 1 above 1, C1 polynomial ramp between.
fn meyer_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * t * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t)
    }
}

#[inline]
fn rising(t: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 * meyer_step(t)).sin()
}

#[inline]
fn falling(t: f64) -> f64 {
    (std::f64::consts::FRAC_PI_2 * meyer_step(t)).cos()
}

/// Sparse frequency support of one tile's window.
struct Support {
    scale: usize,
    angle: usize,
    /// (centered row, centered col, window value)
    points: Vec<(i32, i32, f64)>,
}

/// Evaluate the window partition on the centered frequency grid and gather
/// per-tile supports. Deterministic in (rows, cols, n_scales, n_angles).
fn build_supports(
    rows: usize,
    cols: usize,
    n_scales: usize,
    n_angles_coarse: usize,
) -> Vec<Support> {
    let mut supports = Vec::new();
    supports.push(Support {
        scale: 0,
        angle: 0,
        points: Vec::new(),
    });
    let mut tile_index = vec![vec![0usize; 0]; n_scales]; // (scale -> angle -> support idx)
    tile_index[0] = vec![0];
    for s in 1..n_scales {
        let a = angles_at_scale(n_angles_coarse, s);
        let mut row = Vec::with_capacity(a);
        for angle in 0..a {
            row.push(supports.len());
            supports.push(Support {
                scale: s,
                angle,
                points: Vec::new(),
            });
        }
        tile_index[s] = row;
    }

    // dyadic ring boundaries b_s = 2^(s - (n_scales - 1)), s = 1..n_scales-1
    let band = |s: usize| (2.0f64).powi(s as i32 - (n_scales as i32 - 1));
    let two_pi = 2.0 * std::f64::consts::PI;

    for i in 0..rows {
        let fr = if i <= (rows - 1) / 2 {
            i as i64
        } else {
            i as i64 - rows as i64
        };
        let xi_r = fr as f64 / rows as f64;
        for j in 0..cols {
            let fc = if j <= (cols - 1) / 2 {
                j as i64
            } else {
                j as i64 - cols as i64
            };
            let xi_c = fc as f64 / cols as f64;
            let rho = 2.0 * xi_r.abs().max(xi_c.abs());

            // radial zone: at most two scales are active
            let mut radial: [(usize, f64); 2] = [(0, 0.0); 2];
            let mut n_radial = 0;
            if rho <= band(1) / 2.0 {
                radial[0] = (0, 1.0);
                n_radial = 1;
            } else {
                for s in 1..n_scales {
                    let hi = band(s);
                    if rho <= hi {
                        let t = (rho - hi / 2.0) / (hi / 2.0);
                        radial[0] = (s - 1, falling(t));
                        radial[1] = (s, rising(t));
                        n_radial = 2;
                        break;
                    }
                }
            }
            debug_assert!(n_radial > 0, "radial zones tile [0, 1]");

            let theta = f64::atan2(xi_r, xi_c);
            for &(scale, w_radial) in &radial[..n_radial] {
                if w_radial == 0.0 {
                    continue;
                }
                if scale == 0 {
                    supports[0].points.push((fr as i32, fc as i32, w_radial));
                    continue;
                }
                let a = angles_at_scale(n_angles_coarse, scale);
                let delta = two_pi / a as f64;
                // wedge whose rising ramp contains theta, and its neighbor
                // whose falling ramp overlaps it
                let u = (theta + std::f64::consts::PI + delta / 2.0).rem_euclid(two_pi);
                let l_rise = ((u / delta) as usize).min(a - 1);
                let t = (u - l_rise as f64 * delta) / delta;
                let l_fall = (l_rise + a - 1) % a;
                let w_rise = w_radial * rising(t);
                let w_fall = w_radial * falling(t);
                if w_rise != 0.0 {
                    supports[tile_index[scale][l_rise]]
                        .points
                        .push((fr as i32, fc as i32, w_rise));
                }
                if w_fall != 0.0 {
                    supports[tile_index[scale][l_fall]]
                        .points
                        .push((fr as i32, fc as i32, w_fall));
                }
            }
        }
    }
    supports
}

fn validate(
    image_rows: usize,
    image_cols: usize,
    n_scales: usize,
    n_angles_coarse: usize,
) -> Result<(), TextureError> {
    if image_rows < 32 || image_cols < 32 {
        return Err(TextureError::ImageTooSmall {
            width: image_cols,
            height: image_rows,
            min: 32,
        });
    }
    if n_scales < 2 {
        return Err(TextureError::BadScaleCount(n_scales));
    }
    if n_angles_coarse < 8 || n_angles_coarse % 4 != 0 {
        return Err(TextureError::BadAngleCount(n_angles_coarse));
    }
    Ok(())
}

/// Default scale count for an image size: ceil(log2(min dimension)) - 3,
/// floored at 2.
pub fn default_scales(rows: usize, cols: usize) -> usize {
    let min_dim = rows.min(cols) as f64;
    ((min_dim.log2().ceil() as isize) - 3).max(2) as usize
}

#[inline]
fn wrap_index(v: i32, len: usize) -> usize {
    (v.rem_euclid(len as i32)) as usize
}

/// Decompose a gray image into curvelet coefficient tiles.
pub fn fdct_wrapping(
    image: &RasterImage,
    n_scales: usize,
    n_angles_coarse: usize,
) -> Result<CurveletCoeffs, TextureError> {
    if image.channels() != 1 {
        return Err(TextureError::NotGray);
    }
    let (rows, cols) = (image.height(), image.width());
    validate(rows, cols, n_scales, n_angles_coarse)?;

    let grid = ComplexGrid::from_real(rows, cols, image.data())?;
    let mut spectrum = fft2_raw(&grid);
    let unit = 1.0 / ((rows * cols) as f64).sqrt();
    for v in &mut spectrum.data {
        *v *= unit;
    }

    let supports = build_supports(rows, cols, n_scales, n_angles_coarse);
    let mut tiles = Vec::with_capacity(supports.len());
    for support in &supports {
        tiles.push(wrap_tile(support, &spectrum, rows, cols));
    }
    let coarse = tiles.remove(0);
    Ok(CurveletCoeffs {
        image_rows: rows,
        image_cols: cols,
        n_scales,
        n_angles_coarse,
        coarse,
        wedges: tiles,
    })
}

fn wrap_tile(support: &Support, spectrum: &ComplexGrid, rows: usize, cols: usize) -> CurveletTile {
    debug_assert!(!support.points.is_empty(), "window support cannot be empty");
    let mut r_min = i32::MAX;
    let mut r_max = i32::MIN;
    let mut c_min = i32::MAX;
    let mut c_max = i32::MIN;
    for &(r, c, _) in &support.points {
        r_min = r_min.min(r);
        r_max = r_max.max(r);
        c_min = c_min.min(c);
        c_max = c_max.max(c);
    }
    let t_rows = (r_max - r_min + 1) as usize;
    let t_cols = (c_max - c_min + 1) as usize;
    let mut wrapped = ComplexGrid::zeros(t_rows, t_cols);
    for &(r, c, w) in &support.points {
        let src = wrap_index(r, rows) * cols + wrap_index(c, cols);
        let dst = wrap_index(r, t_rows) * t_cols + wrap_index(c, t_cols);
        wrapped.data[dst] += spectrum.data[src] * w;
    }
    let mut coeffs = ifft2_raw(&wrapped);
    let unit = 1.0 / ((t_rows * t_cols) as f64).sqrt();
    for v in &mut coeffs.data {
        *v *= unit;
    }
    CurveletTile {
        scale: support.scale,
        angle: support.angle,
        rows: t_rows,
        cols: t_cols,
        row0: r_min as i64,
        col0: c_min as i64,
        data: coeffs.data,
    }
}

/// Adjoint reconstruction: unwrap every tile through its conjugate window,
/// sum in the frequency plane, and invert. Exact up to rounding because the
/// squared windows partition unity.
pub fn reconstruct(coeffs: &CurveletCoeffs) -> Result<RasterImage, TextureError> {
    let (rows, cols) = (coeffs.image_rows, coeffs.image_cols);
    let supports = build_supports(rows, cols, coeffs.n_scales, coeffs.n_angles_coarse);
    let mut spectrum = ComplexGrid::zeros(rows, cols);
    let all_tiles = std::iter::once(&coeffs.coarse).chain(coeffs.wedges.iter());
    for (tile, support) in all_tiles.zip(&supports) {
        debug_assert!((tile.scale, tile.angle) == (support.scale, support.angle));
        let grid = ComplexGrid::new(tile.rows, tile.cols, tile.data.clone())?;
        let mut wrapped = fft2_raw(&grid);
        let unit = 1.0 / ((tile.rows * tile.cols) as f64).sqrt();
        for v in &mut wrapped.data {
            *v *= unit;
        }
        for &(r, c, w) in &support.points {
            let src = wrap_index(r, tile.rows) * tile.cols + wrap_index(c, tile.cols);
            let dst = wrap_index(r, rows) * cols + wrap_index(c, cols);
            spectrum.data[dst] += wrapped.data[src] * w;
        }
    }
    let mut out = ifft2_raw(&spectrum);
    let unit = 1.0 / ((rows * cols) as f64).sqrt();
    for v in &mut out.data {
        *v *= unit;
    }
    let data: Vec<f64> = out.data.iter().map(|c| c.re).collect();
    RasterImage::new(cols, rows, 1, data).map_err(|_| TextureError::EmptyGrid)
}

/// Real part of the coarsest (isotropic lowpass) tile.
pub fn coarse_subband(coeffs: &CurveletCoeffs) -> RealGrid {
    RealGrid {
        rows: coeffs.coarse.rows,
        cols: coeffs.coarse.cols,
        data: coeffs.coarse.data.iter().map(|c| c.re).collect(),
    }
}
