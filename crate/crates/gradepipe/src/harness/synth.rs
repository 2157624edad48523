//! Seeded synthetic date images: filled ellipses on a near-white
//! background, with per-grade size and surface-speckle settings and
//! optional specular highlight blobs.
//!
//! Every random draw comes from one ChaCha8 stream in a fixed order, so a
//! seed reproduces the dataset byte for byte. Highlighted images also emit
//! a ground-truth highlight mask next to the image
//! (`<name>.highlight.pgm`).

use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{HarnessError, Manifest};
use crate::classify::GradeLabel;
use crate::raster::{save_image, BinaryMask, RasterImage};

/// Marker file name written next to the manifest; evaluation reports label
/// the dataset `synthetic` when it is present.
pub const SYNTHETIC_MARKER: &str = ".synthetic";

const IMG_SIZE: usize = 256;
const BROWN: [f64; 3] = [105.0, 63.0, 32.0];
/// Lambertian-style falloff from ellipse center to rim.
const SHADING: f64 = 0.30;
const HIGHLIGHT_PEAK: f64 = 70.0;
const HIGHLIGHT_SIGMA: f64 = 5.0;
/// Added intensity above this level counts as highlight ground truth.
const HIGHLIGHT_MASK_LEVEL: f64 = 30.0;

fn semi_axes(grade: GradeLabel) -> (f64, f64) {
    match grade {
        GradeLabel::SoftLarge | GradeLabel::SemiHardLarge | GradeLabel::HardLarge => (95.0, 55.0),
        _ => (70.0, 40.0),
    }
}

fn speckle_amplitude(grade: GradeLabel) -> f64 {
    match grade {
        GradeLabel::SoftSmall | GradeLabel::SoftLarge => 0.02,
        GradeLabel::SemiHardSmall | GradeLabel::SemiHardLarge => 0.08,
        GradeLabel::HardSmall | GradeLabel::HardLarge => 0.16,
    }
}

/// Ground-truth highlight mask path for a generated image.
pub fn highlight_mask_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("highlight.pgm")
}

fn box_blur3(field: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; width * height];
    for r in 0..height as isize {
        for c in 0..width as isize {
            let mut sum = 0.0;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let rr = (r + dr).clamp(0, height as isize - 1) as usize;
                    let cc = (c + dc).clamp(0, width as isize - 1) as usize;
                    sum += field[rr * width + cc];
                }
            }
            out[r as usize * width + c as usize] = sum / 9.0;
        }
    }
    out
}

struct SynthImage {
    image: RasterImage,
    highlight: Option<BinaryMask>,
}

fn generate_one(rng: &mut ChaCha8Rng, grade: GradeLabel, highlighted: bool) -> SynthImage {
    let n = IMG_SIZE * IMG_SIZE;
    let center_c = 128.0 + rng.gen_range(-6.0..6.0);
    let center_r = 128.0 + rng.gen_range(-6.0..6.0);
    let (a0, b0) = semi_axes(grade);
    let a = a0 * (1.0 + rng.gen_range(-0.05..0.05));
    let b = b0 * (1.0 + rng.gen_range(-0.05..0.05));
    // blob center stays well inside the rim (mask radius ~6.5 px)
    let blob_c = center_c + rng.gen_range(-0.6..0.6) * a;
    let blob_r = center_r + rng.gen_range(-0.6..0.6) * b;
    let background: Vec<f64> = (0..n).map(|_| 245.0 + rng.gen_range(-5.0..5.0)).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let speckle = box_blur3(&noise, IMG_SIZE, IMG_SIZE);
    let amp = speckle_amplitude(grade);

    let mut data = Vec::with_capacity(n * 3);
    let mut mask = highlighted.then(|| BinaryMask::zeros(IMG_SIZE, IMG_SIZE));
    for r in 0..IMG_SIZE {
        for c in 0..IMG_SIZE {
            let idx = r * IMG_SIZE + c;
            let dx = (c as f64 - center_c) / a;
            let dy = (r as f64 - center_r) / b;
            let rho2 = dx * dx + dy * dy;
            if rho2 <= 1.0 {
                let shade = 1.0 - SHADING * rho2;
                let gain = shade * (1.0 + amp * speckle[idx]);
                let mut px = [BROWN[0] * gain, BROWN[1] * gain, BROWN[2] * gain];
                if highlighted {
                    let d2 = (c as f64 - blob_c).powi(2) + (r as f64 - blob_r).powi(2);
                    let s = HIGHLIGHT_PEAK * (-d2 / (2.0 * HIGHLIGHT_SIGMA * HIGHLIGHT_SIGMA)).exp();
                    for channel in &mut px {
                        *channel += s;
                    }
                    if s >= HIGHLIGHT_MASK_LEVEL {
                        mask.as_mut().expect("highlighted").set(r, c, true);
                    }
                }
                for channel in px {
                    data.push(channel.clamp(0.0, 255.0));
                }
            } else {
                let g = background[idx].clamp(0.0, 255.0);
                data.extend_from_slice(&[g, g, g]);
            }
        }
    }
    SynthImage {
        image: RasterImage::new(IMG_SIZE, IMG_SIZE, 3, data).expect("generator output is finite"),
        highlight: mask,
    }
}

/// Generate `n_per_grade` images per grade under `out_dir`, plus
/// `manifest.csv` and the synthetic marker file. Returns the manifest with
/// resolved paths. Even-indexed images carry a specular highlight, so half
/// of each grade does.
pub fn synth_dataset(
    n_per_grade: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest, HarnessError> {
    if n_per_grade < 2 {
        return Err(HarnessError::BadArgument(
            "n_per_grade must be at least 2".into(),
        ));
    }
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source: std::io::Error| HarnessError::Io {
            path: path.clone(),
            source,
        }
    };
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let mut manifest_body = String::new();
    for grade in GradeLabel::ALL {
        for index in 0..n_per_grade {
            let highlighted = index % 2 == 0;
            let synth = generate_one(&mut rng, grade, highlighted);
            let name = format!("{}_{index:03}.ppm", grade.as_str());
            let path = out_dir.join(&name);
            save_image(&synth.image, &path)
                .map_err(|e| HarnessError::Pipeline {
                    path: path.display().to_string(),
                    source: e.into(),
                })?;
            if let Some(mask) = &synth.highlight {
                let mask_path = highlight_mask_path(&path);
                save_image(&mask.to_image(), &mask_path).map_err(|e| HarnessError::Pipeline {
                    path: mask_path.display().to_string(),
                    source: e.into(),
                })?;
            }
            manifest_body.push_str(&name);
            manifest_body.push(',');
            manifest_body.push_str(grade.as_str());
            manifest_body.push('\n');
            entries.push((path, grade));
        }
    }
    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, manifest_body).map_err(io_err(&manifest_path))?;
    let marker = out_dir.join(SYNTHETIC_MARKER);
    std::fs::write(&marker, "synthetic dataset generated by gradepipe\n")
        .map_err(io_err(&marker))?;
    Ok(Manifest { entries })
}
