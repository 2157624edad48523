//! Shape metrics of the segmented fruit region: area, boundary pixel
//! count, moment-ellipse axes, eccentricity, and equivalent-circle
//! diameter.

use crate::raster::BinaryMask;

#[derive(Debug, thiserror::Error)]
pub enum ShapeError {
    #[error("empty mask")]
    EmptyMask,
    #[error("degenerate shape: single pixel or collinear foreground")]
    DegenerateShape,
    #[error("axis lengths must be positive with majl >= minl")]
    NonPositiveAxis,
    #[error("area must be positive")]
    NonPositiveArea,
}

/// The six shape metrics, in the fixed feature order
/// (area, perimeter, majl, minl, eccentricity, equidiameter).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeVector {
    pub area: f64,
    pub perimeter: f64,
    pub majl: f64,
    pub minl: f64,
    pub eccentricity: f64,
    pub equidiameter: f64,
}

impl ShapeVector {
    pub fn to_array(&self) -> [f64; 6] {
        [
            self.area,
            self.perimeter,
            self.majl,
            self.minl,
            self.eccentricity,
            self.equidiameter,
        ]
    }
}

/// Foreground pixel count.
pub fn area(mask: &BinaryMask) -> Result<f64, ShapeError> {
    let n = mask.foreground_count();
    if n == 0 {
        return Err(ShapeError::EmptyMask);
    }
    Ok(n as f64)
}

/// Count of foreground pixels with at least one background 4-neighbor;
/// the image edge counts as background.
pub fn perimeter(mask: &BinaryMask) -> Result<f64, ShapeError> {
    if mask.foreground_count() == 0 {
        return Err(ShapeError::EmptyMask);
    }
    let mut count = 0u64;
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.is_boundary(r, c) {
                count += 1;
            }
        }
    }
    Ok(count as f64)
}

/// Major/minor axis lengths of the ellipse with the same normalized second
/// central moments as the foreground.
///
/// Central moments are per-pixel averages; mu20 and mu02 each gain 1/12 to
/// account for unit-square pixel extent before the eigen-lengths
/// 4 * sqrt(eigenvalue / 2) are taken.
pub fn fit_axes(mask: &BinaryMask) -> Result<(f64, f64), ShapeError> {
    let mut n = 0.0f64;
    let mut sum_r = 0.0f64;
    let mut sum_c = 0.0f64;
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                n += 1.0;
                sum_r += r as f64;
                sum_c += c as f64;
            }
        }
    }
    if n < 2.0 {
        return Err(ShapeError::DegenerateShape);
    }
    let (cr, cc) = (sum_r / n, sum_c / n);
    let mut m_rr = 0.0f64;
    let mut m_cc = 0.0f64;
    let mut m_rc = 0.0f64;
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                let dr = r as f64 - cr;
                let dc = c as f64 - cc;
                m_rr += dr * dr;
                m_cc += dc * dc;
                m_rc += dr * dc;
            }
        }
    }
    m_rr /= n;
    m_cc /= n;
    m_rc /= n;
    // collinear foreground has a rank-1 scatter matrix
    let det = m_rr * m_cc - m_rc * m_rc;
    let scale = (m_rr + m_cc).max(f64::MIN_POSITIVE);
    if det / (scale * scale) < 1e-12 {
        return Err(ShapeError::DegenerateShape);
    }
    let mu20 = m_cc + 1.0 / 12.0;
    let mu02 = m_rr + 1.0 / 12.0;
    let mu11 = m_rc;
    let delta = ((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11).sqrt();
    let majl = 4.0 * ((mu20 + mu02 + delta) / 2.0).sqrt();
    let minl = 4.0 * ((mu20 + mu02 - delta) / 2.0).sqrt();
    Ok((majl, minl))
}

/// sqrt(a^2 - b^2) / a for semi-axes a = majl/2, b = minl/2.
pub fn eccentricity(majl: f64, minl: f64) -> Result<f64, ShapeError> {
    if minl <= 0.0 || majl < minl {
        return Err(ShapeError::NonPositiveAxis);
    }
    let a = majl / 2.0;
    let b = minl / 2.0;
    Ok((a * a - b * b).sqrt() / a)
}

/// Diameter of the circle with the same area: sqrt(4 * area / pi).
pub fn equidiameter(area: f64) -> Result<f64, ShapeError> {
    if area <= 0.0 {
        return Err(ShapeError::NonPositiveArea);
    }
    Ok((4.0 * area / std::f64::consts::PI).sqrt())
}

/// Assemble all six metrics from a mask.
pub fn shape_vector(mask: &BinaryMask) -> Result<ShapeVector, ShapeError> {
    let area = area(mask)?;
    let perimeter = perimeter(mask)?;
    let (majl, minl) = fit_axes(mask)?;
    let eccentricity = eccentricity(majl, minl)?;
    let equidiameter = equidiameter(area)?;
    Ok(ShapeVector {
        area,
        perimeter,
        majl,
        minl,
        eccentricity,
        equidiameter,
    })
}
