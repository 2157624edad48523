//! Local binary patterns: plain codes, uniformity, rotation-invariant
//! uniform (riu2) and uniform (u2) relabelings, and map/histogram
//! computation.
//!
//! Circle samples are generated with exact quadrant symmetry when the
//! neighbor count is a multiple of 4, and bilinear interpolation sums its
//! corner terms in a canonical weight-sorted order. Together these make the
//! sampled values bitwise covariant under right-angle image rotations, so
//! riu2 histograms are integer-exact invariants.

use crate::raster::RasterImage;

use super::TextureError;

const MAX_NEIGHBORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbpMode {
    Plain,
    U2,
    Riu2,
}

/// Per-pixel LBP codes over the interior of an image.
#[derive(Debug, Clone, PartialEq)]
pub struct LbpMap {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u32>,
    pub mode: LbpMode,
    pub p: usize,
    pub r: f64,
}

impl LbpMap {
    /// Number of distinct code values for this map's mode.
    pub fn bin_count(&self) -> usize {
        match self.mode {
            LbpMode::Plain => 1 << self.p,
            LbpMode::U2 => self.p * (self.p - 1) + 3,
            LbpMode::Riu2 => self.p + 2,
        }
    }
}

/// Threshold `p` neighbor samples against the center: bit k is set when
/// neighbor k is greater than or equal to the center.
pub fn lbp_code(center: f64, neighbors: &[f64], p: usize) -> Result<u32, TextureError> {
    if neighbors.len() != p {
        return Err(TextureError::WrongNeighborCount {
            expected: p,
            got: neighbors.len(),
        });
    }
    if p == 0 || p > MAX_NEIGHBORS {
        return Err(TextureError::NeighborCountOutOfRange(p));
    }
    let mut code = 0u32;
    for (k, &g) in neighbors.iter().enumerate() {
        if g - center >= 0.0 {
            code |= 1 << k;
        }
    }
    Ok(code)
}

/// Number of circular 0/1 transitions in the pattern, wraparound included.
pub fn uniformity(pattern: u32, p: usize) -> Result<u32, TextureError> {
    check_pattern(pattern, p)?;
    let mut u = 0;
    for i in 0..p {
        let a = (pattern >> i) & 1;
        let b = (pattern >> ((i + 1) % p)) & 1;
        u += a ^ b;
    }
    Ok(u)
}

/// Rotation-invariant uniform code: popcount for patterns with at most two
/// transitions, p + 1 otherwise.
pub fn riu2_code(pattern: u32, p: usize) -> Result<u32, TextureError> {
    let u = uniformity(pattern, p)?;
    Ok(if u <= 2 {
        pattern.count_ones()
    } else {
        p as u32 + 1
    })
}

/// Uniform-pattern relabeling with p*(p-1)+3 distinct outputs: each uniform
/// pattern keeps its own label (ordered by run length, then start
/// position); all non-uniform patterns share the final label.
pub fn u2_code(pattern: u32, p: usize) -> Result<u32, TextureError> {
    let u = uniformity(pattern, p)?;
    let last = (p * (p - 1) + 2) as u32;
    if u > 2 {
        return Ok(last);
    }
    let ones = pattern.count_ones();
    if ones == 0 {
        return Ok(0);
    }
    if ones == p as u32 {
        return Ok(last - 1);
    }
    // unique 0 -> 1 transition marks the run start
    let start = (0..p)
        .find(|&i| {
            let prev = (pattern >> ((i + p - 1) % p)) & 1;
            let cur = (pattern >> i) & 1;
            prev == 0 && cur == 1
        })
        .expect("uniform pattern has a run start") as u32;
    Ok(1 + (ones - 1) * p as u32 + start)
}

fn check_pattern(pattern: u32, p: usize) -> Result<(), TextureError> {
    if p == 0 || p > MAX_NEIGHBORS || u64::from(pattern) >= 1u64 << p {
        return Err(TextureError::PatternOutOfRange { pattern, p });
    }
    Ok(())
}

/// One circle sample position, split into integer cell and in-cell
/// fraction so sampling never re-derives fractions from absolute
/// coordinates (which would round differently per pixel).
#[derive(Debug, Clone, Copy)]
struct SampleOffset {
    dr: isize,
    dc: isize,
    fr: f64,
    fc: f64,
}

fn split_offset(row_off: f64, col_off: f64) -> SampleOffset {
    let snap = |v: f64| {
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            r
        } else {
            v
        }
    };
    let (row_off, col_off) = (snap(row_off), snap(col_off));
    let (ir, ic) = (row_off.floor(), col_off.floor());
    SampleOffset {
        dr: ir as isize,
        dc: ic as isize,
        fr: row_off - ir,
        fc: col_off - ic,
    }
}

/// Sample offsets at angles 2*pi*k/p on a radius-r circle. When p is a
/// multiple of 4 the four quadrants are exact 90-degree images of each
/// other by construction.
fn circle_offsets(p: usize, r: f64) -> Vec<SampleOffset> {
    let mut offsets = Vec::with_capacity(p);
    if p % 4 == 0 {
        let quarter = p / 4;
        let base: Vec<(f64, f64)> = (0..quarter)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
                (r * theta.cos(), r * theta.sin()) // (col, row)
            })
            .collect();
        for quadrant in 0..4 {
            for &(x, y) in &base {
                let (x, y) = match quadrant {
                    0 => (x, y),
                    1 => (-y, x),
                    2 => (-x, -y),
                    _ => (y, -x),
                };
                offsets.push(split_offset(y, x));
            }
        }
    } else {
        for k in 0..p {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
            offsets.push(split_offset(r * theta.sin(), r * theta.cos()));
        }
    }
    offsets
}

/// Bilinear sample expressed as a difference from the center value, with
/// corner terms accumulated in descending (weight, difference) order.
///
/// Interpolating differences keeps exact ties exact (a constant patch
/// yields 0.0, not 1-ulp noise from weights that almost sum to one), and
/// the canonical term order makes the result bitwise identical under any
/// permutation of corners, e.g. from a right-angle image rotation.
#[inline]
fn sample_diff(image: &RasterImage, row: usize, col: usize, center: f64, off: &SampleOffset) -> f64 {
    let r0 = (row as isize + off.dr) as usize;
    let c0 = (col as isize + off.dc) as usize;
    let (fr, fc) = (off.fr, off.fc);
    if fr == 0.0 && fc == 0.0 {
        return image.get(r0, c0, 0) - center;
    }
    let mut terms = [(0.0f64, 0.0f64); 4];
    let mut n = 0;
    let mut push = |w: f64, v: f64| {
        if w != 0.0 {
            terms[n] = (w, v - center);
            n += 1;
        }
    };
    push((1.0 - fr) * (1.0 - fc), image.get(r0, c0, 0));
    if fc != 0.0 {
        push((1.0 - fr) * fc, image.get(r0, c0 + 1, 0));
    }
    if fr != 0.0 {
        push(fr * (1.0 - fc), image.get(r0 + 1, c0, 0));
        if fc != 0.0 {
            push(fr * fc, image.get(r0 + 1, c0 + 1, 0));
        }
    }
    let terms = &mut terms[..n];
    terms.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite samples"));
    terms.iter().map(|(w, d)| w * d).sum()
}

/// Compute the LBP map of a gray image. The map shrinks by ceil(r) on each
/// side; neighbor samples use bilinear interpolation off the lattice.
pub fn lbp_map(
    image: &RasterImage,
    p: usize,
    r: f64,
    mode: LbpMode,
) -> Result<LbpMap, TextureError> {
    if image.channels() != 1 {
        return Err(TextureError::NotGray);
    }
    if p == 0 || p > MAX_NEIGHBORS {
        return Err(TextureError::NeighborCountOutOfRange(p));
    }
    if !(r > 0.0) {
        return Err(TextureError::BadRadius);
    }
    let margin = r.ceil() as usize;
    if image.width() <= 2 * margin || image.height() <= 2 * margin {
        return Err(TextureError::ImageTooSmall {
            width: image.width(),
            height: image.height(),
            min: 2 * margin + 1,
        });
    }
    let offsets = circle_offsets(p, r);
    let out_w = image.width() - 2 * margin;
    let out_h = image.height() - 2 * margin;
    let mut codes = Vec::with_capacity(out_w * out_h);
    for row in margin..image.height() - margin {
        for col in margin..image.width() - margin {
            let center = image.get(row, col, 0);
            let mut code = 0u32;
            for (k, off) in offsets.iter().enumerate() {
                if sample_diff(image, row, col, center, off) >= 0.0 {
                    code |= 1 << k;
                }
            }
            let mapped = match mode {
                LbpMode::Plain => code,
                LbpMode::U2 => u2_code(code, p)?,
                LbpMode::Riu2 => riu2_code(code, p)?,
            };
            codes.push(mapped);
        }
    }
    Ok(LbpMap {
        width: out_w,
        height: out_h,
        codes,
        mode,
        p,
        r,
    })
}

/// Histogram over the mode's full code range; bins sum to the map size.
pub fn lbp_histogram(map: &LbpMap) -> Vec<u64> {
    let mut bins = vec![0u64; map.bin_count()];
    for &code in &map.codes {
        bins[code as usize] += 1;
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::RasterImage;

    #[test]
    fn code_examples() {
        assert_eq!(lbp_code(100.0, &[100.0; 8], 8).unwrap(), 255);
        assert_eq!(
            lbp_code(100.0, &[120.0, 90.0, 90.0, 90.0, 90.0, 90.0, 90.0, 90.0], 8).unwrap(),
            1
        );
        assert_eq!(lbp_code(255.0, &[0.0; 8], 8).unwrap(), 0);
        assert!(matches!(
            lbp_code(1.0, &[0.0; 7], 8),
            Err(TextureError::WrongNeighborCount { expected: 8, got: 7 })
        ));
    }

    #[test]
    fn uniformity_examples() {
        assert_eq!(uniformity(0b1111_1111, 8).unwrap(), 0);
        assert_eq!(uniformity(0b0000_1111, 8).unwrap(), 2);
        assert_eq!(uniformity(0b0101_0101, 8).unwrap(), 8);
        assert!(matches!(
            uniformity(256, 8),
            Err(TextureError::PatternOutOfRange { .. })
        ));
    }

    #[test]
    fn riu2_examples() {
        assert_eq!(riu2_code(0b1111_0000, 8).unwrap(), 4);
        assert_eq!(riu2_code(0b0101_0101, 8).unwrap(), 9);
        assert_eq!(riu2_code(0, 8).unwrap(), 0);
    }

    #[test]
    fn u2_label_range_and_count() {
        let mut seen = std::collections::HashSet::new();
        let mut nonuniform_hits = 0;
        for pattern in 0u32..256 {
            let label = u2_code(pattern, 8).unwrap();
            assert!(label <= 58);
            if label == 58 {
                nonuniform_hits += 1;
            } else {
                assert!(seen.insert(label), "duplicate uniform label {label}");
            }
        }
        assert_eq!(seen.len(), 58); // p*(p-1)+2 uniform labels
        assert_eq!(nonuniform_hits, 256 - 58);
    }

    #[test]
    fn rotation_of_pattern_preserves_u_and_riu2() {
        for pattern in 0u32..256 {
            let u = uniformity(pattern, 8).unwrap();
            let riu = riu2_code(pattern, 8).unwrap();
            for shift in 1..8 {
                let rotated = ((pattern << shift) | (pattern >> (8 - shift))) & 0xff;
                assert_eq!(uniformity(rotated, 8).unwrap(), u);
                assert_eq!(riu2_code(rotated, 8).unwrap(), riu);
            }
        }
    }

    #[test]
    fn constant_image_maps() {
        let img = RasterImage::new(6, 6, 1, vec![42.0; 36]).unwrap();
        let plain = lbp_map(&img, 8, 1.0, LbpMode::Plain).unwrap();
        assert_eq!((plain.width, plain.height), (4, 4));
        assert!(plain.codes.iter().all(|&c| c == 255));
        let riu = lbp_map(&img, 8, 1.0, LbpMode::Riu2).unwrap();
        assert!(riu.codes.iter().all(|&c| c == 8));
    }

    #[test]
    fn map_dimensions_follow_margin() {
        let img = RasterImage::new(20, 15, 1, vec![1.0; 300]).unwrap();
        for (p, r) in [(8usize, 1.0f64), (8, 2.0), (12, 1.5), (16, 2.0)] {
            let m = lbp_map(&img, p, r, LbpMode::Plain).unwrap();
            let margin = r.ceil() as usize;
            assert_eq!(m.width, 20 - 2 * margin);
            assert_eq!(m.height, 15 - 2 * margin);
        }
        let tiny = RasterImage::new(3, 3, 1, vec![0.0; 9]).unwrap();
        assert!(matches!(
            lbp_map(&tiny, 8, 1.5, LbpMode::Plain),
            Err(TextureError::ImageTooSmall { .. })
        ));
    }

    fn lcg_image(w: usize, h: usize, seed: u64) -> RasterImage {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let data = (0..w * h)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((state >> 33) % 256) as f64
            })
            .collect();
        RasterImage::new(w, h, 1, data).unwrap()
    }

    fn rotate90(img: &RasterImage) -> RasterImage {
        let (w, h) = (img.width(), img.height());
        let mut data = vec![0.0; w * h];
        for r in 0..h {
            for c in 0..w {
                // (r, c) -> (c, h - 1 - r) in the rotated (w x h swapped) frame
                data[c * h + (h - 1 - r)] = img.get(r, c, 0);
            }
        }
        RasterImage::new(h, w, 1, data).unwrap()
    }

    #[test]
    fn riu2_histogram_rotation_invariant() {
        for seed in 0..4 {
            let img = lcg_image(17, 13, seed);
            let base = lbp_histogram(&lbp_map(&img, 8, 1.0, LbpMode::Riu2).unwrap());
            let mut rotated = img.clone();
            for _ in 0..3 {
                rotated = rotate90(&rotated);
                let hist = lbp_histogram(&lbp_map(&rotated, 8, 1.0, LbpMode::Riu2).unwrap());
                assert_eq!(base, hist);
            }
        }
    }

    #[test]
    fn histogram_conservation() {
        let img = lcg_image(16, 16, 9);
        let map = lbp_map(&img, 8, 1.0, LbpMode::Plain).unwrap();
        let hist = lbp_histogram(&map);
        assert_eq!(hist.len(), 256);
        assert_eq!(hist.iter().sum::<u64>(), 14 * 14);

        let empty = LbpMap {
            width: 0,
            height: 0,
            codes: vec![],
            mode: LbpMode::Plain,
            p: 8,
            r: 1.0,
        };
        assert!(lbp_histogram(&empty).iter().all(|&c| c == 0));
    }

    #[test]
    fn interpolated_radius_two() {
        // r=2, p=16 exercises genuinely fractional samples
        let img = lcg_image(24, 24, 5);
        let map = lbp_map(&img, 16, 2.0, LbpMode::Riu2).unwrap();
        assert_eq!((map.width, map.height), (20, 20));
        assert!(map.codes.iter().all(|&c| c <= 17));
        let hist0 = lbp_histogram(&map);
        let rot = rotate90(&img);
        let hist1 = lbp_histogram(&lbp_map(&rot, 16, 2.0, LbpMode::Riu2).unwrap());
        assert_eq!(hist0, hist1);
    }
}
