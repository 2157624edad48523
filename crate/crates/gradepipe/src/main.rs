//! Batch CLI for the grading pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or pipeline error.
//! `GRADEPIPE_THREADS` caps worker threads (0 or unset = automatic).

use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use gradepipe::classify::{grade, load_model, save_model, train, ModelKind};
use gradepipe::harness::{
    evaluate, extract_features, load_manifest, synth_dataset, EvaluateOptions, FeatureMode,
    Manifest, PipelineConfig, SYNTHETIC_MARKER,
};
use gradepipe::preprocess::{
    fill_holes, largest_component, remove_specular, sobel_contour, threshold_segment,
    BilateralParams,
};
use gradepipe::raster::{load_image, save_image, to_gray, BinaryMask, RasterImage};
use gradepipe::shape::shape_vector;
use gradepipe::texture::{lbp_histogram, lbp_map, texture_vector, LbpMode, TextureConfig};

#[derive(Parser)]
#[command(name = "gradepipe", version, about = "Date grading pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove highlights, segment the fruit, and export mask/contour.
    Preprocess(PreprocessArgs),
    /// Print shape/texture feature rows for one image.
    Features(FeaturesArgs),
    /// Train a grader from a manifest and write the model file.
    Train(TrainArgs),
    /// Grade one image with a trained model.
    Grade(GradeArgs),
    /// Run the split/train/test protocol and write a JSON report.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic labeled dataset.
    Synth(SynthArgs),
}

/// Knobs shared by every command that runs the image pipeline.
#[derive(Args, Debug, Clone)]
struct PipelineFlags {
    /// Bilateral spatial sigma, pixels
    #[arg(long, default_value_t = 4.0)]
    spatial_sigma: f64,
    /// Bilateral range sigma, chromaticity units
    #[arg(long, default_value_t = 0.1)]
    range_sigma: f64,
    /// Bilateral window radius, pixels
    #[arg(long, default_value_t = 8)]
    window_radius: usize,
    /// Highlight-removal iteration cap
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
    /// Highlight-removal convergence threshold
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Curvelet scale count (derived from image size when omitted)
    #[arg(long)]
    scales: Option<usize>,
    /// Curvelet angle count at the second-coarsest scale
    #[arg(long, default_value_t = 16)]
    angles: usize,
    /// Skip feature z-scoring
    #[arg(long)]
    no_normalize: bool,
}

impl PipelineFlags {
    fn bilateral(&self) -> Result<BilateralParams, AppError> {
        BilateralParams::new(
            self.spatial_sigma,
            self.range_sigma,
            self.window_radius,
            self.max_iter,
            self.epsilon,
        )
        .map_err(|e| AppError::Usage(e.to_string()))
    }

    fn texture(&self) -> TextureConfig {
        TextureConfig {
            n_scales: self.scales,
            n_angles_coarse: self.angles,
        }
    }

    fn config(&self) -> Result<PipelineConfig, AppError> {
        Ok(PipelineConfig {
            bilateral: self.bilateral()?,
            texture: self.texture(),
            normalize: !self.no_normalize,
        })
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<bool, String> {
        match key {
            "spatial-sigma" => self.spatial_sigma = parse(key, value)?,
            "range-sigma" => self.range_sigma = parse(key, value)?,
            "window-radius" => self.window_radius = parse(key, value)?,
            "max-iter" => self.max_iter = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "scales" => self.scales = Some(parse(key, value)?),
            "angles" => self.angles = parse(key, value)?,
            "no-normalize" => self.no_normalize = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("config key `{key}`: cannot parse `{value}`"))
}

#[derive(Args)]
struct PreprocessArgs {
    /// Input PPM/PGM image
    #[arg(long = "in")]
    input: PathBuf,
    /// Write the fruit mask as PGM
    #[arg(long)]
    out_mask: Option<PathBuf>,
    /// Write the contour trace as row,col CSV
    #[arg(long)]
    out_contour: Option<PathBuf>,
    /// Write the highlight-removed image as PPM
    #[arg(long)]
    out_image: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// key = value file overriding any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Input PPM/PGM image
    #[arg(long = "in")]
    input: PathBuf,
    /// Precomputed fruit mask (PGM); segmented internally when omitted
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Emit the shape feature row
    #[arg(long)]
    shape: bool,
    /// Emit the texture feature row
    #[arg(long)]
    texture: bool,
    /// Write the plain LBP(8,1) map of the masked gray image as PGM
    #[arg(long)]
    dump_lbp: Option<PathBuf>,
    /// Write the riu2 histogram as code,count CSV
    #[arg(long)]
    dump_hist: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// key = value file overriding any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Manifest CSV (path,grade per line)
    #[arg(long)]
    manifest: PathBuf,
    /// knn, centroid, or lda
    #[arg(long, default_value = "knn")]
    classifier: String,
    /// Neighbor count for knn
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Feature mode: fused, shape, or texture
    #[arg(long, default_value = "fused")]
    features: String,
    /// Output model path
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// key = value file overriding any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GradeArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Input PPM/PGM image
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// key = value file overriding any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Manifest CSV (path,grade per line)
    #[arg(long)]
    manifest: PathBuf,
    /// knn, centroid, or lda
    #[arg(long, default_value = "knn")]
    classifier: String,
    /// Neighbor count for knn
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Split seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature mode for the main report block
    #[arg(long, default_value = "fused")]
    features: String,
    /// Dataset label; auto-detects the synthetic marker when omitted
    #[arg(long)]
    dataset: Option<String>,
    /// Report JSON output path (stdout when omitted)
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// key = value file overriding any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Images per grade
    #[arg(long, default_value_t = 10)]
    n_per_grade: usize,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long)]
    out_dir: PathBuf,
    /// key = value file overriding any flag
    #[arg(long)]
    config: Option<PathBuf>,
}

enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn data<E: Error>(e: E) -> Self {
        let mut text = e.to_string();
        let mut source = e.source();
        while let Some(s) = source {
            text.push_str("\n  caused by: ");
            text.push_str(&s.to_string());
            source = s.source();
        }
        AppError::Data(text)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    init_thread_pool();
    let result = match cli.command {
        Command::Preprocess(args) => run_preprocess(args),
        Command::Features(args) => run_features(args),
        Command::Train(args) => run_train(args),
        Command::Grade(args) => run_grade(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Synth(args) => run_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn init_thread_pool() {
    if let Ok(raw) = std::env::var("GRADEPIPE_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

/// Parse a `key = value` config file; `#` starts a comment line.
fn read_config(path: &Path) -> Result<Vec<(String, String)>, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("config {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            AppError::Usage(format!(
                "config {} line {}: expected key = value",
                path.display(),
                index + 1
            ))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn apply_config<F>(
    config: &Option<PathBuf>,
    pipeline: Option<&mut PipelineFlags>,
    mut extra: F,
) -> Result<(), AppError>
where
    F: FnMut(&str, &str) -> Result<bool, String>,
{
    let Some(path) = config else {
        return Ok(());
    };
    let pairs = read_config(path)?;
    let mut pipeline = pipeline;
    for (key, value) in pairs {
        let mut handled = false;
        if let Some(flags) = pipeline.as_deref_mut() {
            handled = flags.apply(&key, &value).map_err(AppError::Usage)?;
        }
        if !handled {
            handled = extra(&key, &value).map_err(AppError::Usage)?;
        }
        if !handled {
            return Err(AppError::Usage(format!("config key `{key}` is not a flag")));
        }
    }
    Ok(())
}

/// Gray view plus fruit mask via the standard chain (highlight removal on
/// RGB inputs, Otsu, largest component, hole filling).
fn segment(
    image: &RasterImage,
    params: &BilateralParams,
) -> Result<(Option<RasterImage>, RasterImage, BinaryMask), AppError> {
    let (despeculared, gray) = if image.channels() == 3 {
        let d = remove_specular(image, params).map_err(AppError::data)?;
        let g = to_gray(&d).map_err(AppError::data)?;
        (Some(d), g)
    } else {
        (None, image.clone())
    };
    let mask = threshold_segment(&gray).map_err(AppError::data)?;
    let mask = largest_component(&mask).map_err(AppError::data)?;
    let mask = fill_holes(&mask);
    Ok((despeculared, gray, mask))
}

fn run_preprocess(mut args: PreprocessArgs) -> Result<(), AppError> {
    let config = args.config.clone();
    apply_config(&config, Some(&mut args.pipeline), |_, _| Ok(false))?;
    let params = args.pipeline.bilateral()?;
    let image = load_image(&args.input).map_err(AppError::data)?;
    let (despeculared, _, mask) = segment(&image, &params)?;
    if let Some(path) = &args.out_mask {
        save_image(&mask.to_image(), path).map_err(AppError::data)?;
    }
    if let Some(path) = &args.out_contour {
        let (contour, _) = sobel_contour(&mask).map_err(AppError::data)?;
        std::fs::write(path, contour.to_string())
            .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
    }
    if let Some(path) = &args.out_image {
        let Some(despeculared) = &despeculared else {
            return Err(AppError::Usage(
                "--out-image requires an RGB input".into(),
            ));
        };
        save_image(despeculared, path).map_err(AppError::data)?;
    }
    Ok(())
}

/// Format with six significant digits, plain decimal notation.
fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.5}");
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn run_features(mut args: FeaturesArgs) -> Result<(), AppError> {
    let config = args.config.clone();
    apply_config(&config, Some(&mut args.pipeline), |_, _| Ok(false))?;
    let image = load_image(&args.input).map_err(AppError::data)?;
    let params = args.pipeline.bilateral()?;

    let (gray, mask) = match &args.mask {
        Some(mask_path) => {
            let gray = if image.channels() == 3 {
                let d = remove_specular(&image, &params).map_err(AppError::data)?;
                to_gray(&d).map_err(AppError::data)?
            } else {
                image.clone()
            };
            let mask_img = load_image(mask_path).map_err(AppError::data)?;
            let mask = BinaryMask::from_image(&mask_img).map_err(AppError::data)?;
            (gray, mask)
        }
        None => {
            let (_, gray, mask) = segment(&image, &params)?;
            (gray, mask)
        }
    };

    let both = !args.shape && !args.texture;
    if args.shape || both {
        let s = shape_vector(&mask).map_err(AppError::data)?;
        let row: Vec<String> = s.to_array().iter().map(|&v| sig6(v)).collect();
        println!("{}", row.join(","));
    }
    if args.texture || both {
        let t =
            texture_vector(&gray, &mask, &args.pipeline.texture()).map_err(AppError::data)?;
        println!("{},{}", sig6(t.mean), sig6(t.std));
    }

    if args.dump_lbp.is_some() || args.dump_hist.is_some() {
        let masked = RasterImage::new(
            gray.width(),
            gray.height(),
            1,
            gray.data()
                .iter()
                .zip(mask.bits())
                .map(|(&v, &b)| if b != 0 { v } else { 0.0 })
                .collect(),
        )
        .map_err(AppError::data)?;
        if let Some(path) = &args.dump_lbp {
            let map = lbp_map(&masked, 8, 1.0, LbpMode::Plain).map_err(AppError::data)?;
            let img = RasterImage::new(
                map.width,
                map.height,
                1,
                map.codes.iter().map(|&c| f64::from(c)).collect(),
            )
            .map_err(AppError::data)?;
            save_image(&img, path).map_err(AppError::data)?;
        }
        if let Some(path) = &args.dump_hist {
            let map = lbp_map(&masked, 8, 1.0, LbpMode::Riu2).map_err(AppError::data)?;
            let hist = lbp_histogram(&map);
            let mut body = String::new();
            for (code, count) in hist.iter().enumerate() {
                body.push_str(&format!("{code},{count}\n"));
            }
            std::fs::write(path, body)
                .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn parse_kind(raw: &str) -> Result<ModelKind, AppError> {
    ModelKind::from_str(raw).map_err(AppError::Usage)
}

fn parse_mode(raw: &str) -> Result<FeatureMode, AppError> {
    FeatureMode::from_str(raw).map_err(AppError::Usage)
}

fn labeled_vectors(
    manifest: &Manifest,
    config: &PipelineConfig,
    mode: FeatureMode,
) -> Result<Vec<(gradepipe::classify::GradeLabel, gradepipe::classify::FeatureVector)>, AppError> {
    use rayon::prelude::*;
    manifest
        .entries
        .par_iter()
        .map(|(path, grade)| {
            let image = load_image(path)
                .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
            let features = extract_features(&image, config)
                .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?;
            let vector = features.vector(mode).map_err(AppError::data)?;
            Ok((*grade, vector))
        })
        .collect()
}

fn run_train(mut args: TrainArgs) -> Result<(), AppError> {
    let config_path = args.config.clone();
    let mut classifier = args.classifier.clone();
    let mut features = args.features.clone();
    let mut k = args.k;
    let mut out = args.out.clone();
    apply_config(&config_path, Some(&mut args.pipeline), |key, value| {
        match key {
            "classifier" => classifier = value.to_string(),
            "features" => features = value.to_string(),
            "k" => k = parse(key, value)?,
            "out" => out = PathBuf::from(value),
            _ => return Ok(false),
        }
        Ok(true)
    })?;
    let kind = parse_kind(&classifier)?;
    let mode = parse_mode(&features)?;
    let config = args.pipeline.config()?;
    let manifest = load_manifest(&args.manifest).map_err(AppError::data)?;
    let samples = labeled_vectors(&manifest, &config, mode)?;
    let model = train(kind, &samples, k, config.normalize).map_err(AppError::data)?;
    save_model(&model, &out).map_err(AppError::data)?;
    eprintln!(
        "trained {} model on {} samples ({} features)",
        kind.as_str(),
        samples.len(),
        mode.as_str()
    );
    Ok(())
}

fn run_grade(mut args: GradeArgs) -> Result<(), AppError> {
    let config_path = args.config.clone();
    apply_config(&config_path, Some(&mut args.pipeline), |_, _| Ok(false))?;
    let model = load_model(&args.model).map_err(AppError::data)?;
    let mode = match model.dim() {
        8 => FeatureMode::Fused,
        6 => FeatureMode::Shape,
        2 => FeatureMode::Texture,
        d => {
            return Err(AppError::Data(format!(
                "model dimension {d} matches no feature mode"
            )))
        }
    };
    let config = args.pipeline.config()?;
    let image = load_image(&args.input).map_err(AppError::data)?;
    let features = extract_features(&image, &config).map_err(AppError::data)?;
    let vector = features.vector(mode).map_err(AppError::data)?;
    let (label, score) = grade(&model, &vector).map_err(AppError::data)?;
    println!("{label},{score:.6}");
    Ok(())
}

fn run_evaluate(mut args: EvaluateArgs) -> Result<(), AppError> {
    let config_path = args.config.clone();
    let mut classifier = args.classifier.clone();
    let mut features = args.features.clone();
    let mut k = args.k;
    let mut seed = args.seed;
    let mut report_path = args.report.clone();
    let mut dataset = args.dataset.clone();
    apply_config(&config_path, Some(&mut args.pipeline), |key, value| {
        match key {
            "classifier" => classifier = value.to_string(),
            "features" => features = value.to_string(),
            "k" => k = parse(key, value)?,
            "seed" => seed = parse(key, value)?,
            "report" => report_path = Some(PathBuf::from(value)),
            "dataset" => dataset = Some(value.to_string()),
            _ => return Ok(false),
        }
        Ok(true)
    })?;
    let manifest = load_manifest(&args.manifest).map_err(AppError::data)?;
    let dataset_label = dataset.unwrap_or_else(|| {
        let marker = args
            .manifest
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(SYNTHETIC_MARKER);
        if marker.exists() {
            "synthetic".to_string()
        } else {
            "user".to_string()
        }
    });
    let opts = EvaluateOptions {
        classifier: parse_kind(&classifier)?,
        k,
        seed,
        feature_mode: parse_mode(&features)?,
        dataset_label,
        config: args.pipeline.config()?,
    };
    let report = evaluate(&manifest, &opts).map_err(AppError::data)?;
    let json = report.to_json();
    match &report_path {
        Some(path) => std::fs::write(path, json)
            .map_err(|e| AppError::Data(format!("{}: {e}", path.display())))?,
        None => print!("{json}"),
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), AppError> {
    let mut n_per_grade = args.n_per_grade;
    let mut seed = args.seed;
    let mut out_dir = args.out_dir.clone();
    apply_config(&args.config, None, |key, value| {
        match key {
            "n-per-grade" => n_per_grade = parse(key, value)?,
            "seed" => seed = parse(key, value)?,
            "out-dir" => out_dir = PathBuf::from(value),
            _ => return Ok(false),
        }
        Ok(true)
    })?;
    let manifest = synth_dataset(n_per_grade, seed, &out_dir).map_err(AppError::data)?;
    eprintln!(
        "wrote {} images and manifest to {}",
        manifest.len(),
        out_dir.display()
    );
    Ok(())
}
