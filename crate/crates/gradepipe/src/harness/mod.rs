//! Dataset manifests, the balanced 50/50 evaluation protocol, report
//! assembly, synthetic data generation, and the per-image feature
//! pipeline that binds the stages together.

mod synth;

pub use synth::{synth_dataset, SYNTHETIC_MARKER};

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classify::{
    fuse, grade, train, ClassifyError, FeatureVector, GradeLabel, ModelKind, TrainedModel,
};
use crate::preprocess::{
    fill_holes, largest_component, remove_specular, threshold_segment, BilateralParams,
    PreprocessError,
};
use crate::raster::{load_image, to_gray, RasterImage, RasterError};
use crate::shape::{shape_vector, ShapeError, ShapeVector};
use crate::texture::{texture_vector, TextureConfig, TextureError, TextureVector};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Texture(#[from] TextureError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("line {line}: unknown grade `{grade}`")]
    UnknownGrade { line: usize, grade: String },
    #[error("line {line}: duplicate path `{path}`")]
    DuplicatePath { line: usize, path: String },
    #[error("line {line}: malformed manifest line")]
    MalformedLine { line: usize },
    #[error("grade {0} has fewer than 2 samples")]
    GradeTooSmall(GradeLabel),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("pipeline failed on {path}: {source}")]
    Pipeline {
        path: String,
        #[source]
        source: PipelineError,
    },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("{0}")]
    BadArgument(String),
}

/// Ordered list of (image path, grade) pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(PathBuf, GradeLabel)>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count_for(&self, grade: GradeLabel) -> usize {
        self.entries.iter().filter(|(_, g)| *g == grade).count()
    }
}

/// Parse a `path,grade` CSV manifest. Relative paths resolve against the
/// manifest's own directory.
pub fn load_manifest<P: AsRef<Path>>(path: P) -> Result<Manifest, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let (img, grade_str) = raw
            .rsplit_once(',')
            .ok_or(HarnessError::MalformedLine { line })?;
        let img = img.trim();
        let grade_str = grade_str.trim();
        if img.is_empty() || grade_str.is_empty() {
            return Err(HarnessError::MalformedLine { line });
        }
        let grade: GradeLabel = grade_str.parse().map_err(|_| HarnessError::UnknownGrade {
            line,
            grade: grade_str.to_string(),
        })?;
        if !seen.insert(img.to_string()) {
            return Err(HarnessError::DuplicatePath {
                line,
                path: img.to_string(),
            });
        }
        let resolved = if Path::new(img).is_absolute() {
            PathBuf::from(img)
        } else {
            base.join(img)
        };
        entries.push((resolved, grade));
    }
    Ok(Manifest { entries })
}

/// Split each grade half into training, half into testing, with a seeded
/// deterministic shuffle. Odd counts send the extra sample to testing;
/// train and test are disjoint by construction.
pub fn split(manifest: &Manifest, seed: u64) -> Result<(Manifest, Manifest), HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for grade in GradeLabel::ALL {
        let mut indices: Vec<usize> = manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, (_, g))| *g == grade)
            .map(|(i, _)| i)
            .collect();
        if indices.len() < 2 {
            return Err(HarnessError::GradeTooSmall(grade));
        }
        indices.shuffle(&mut rng);
        let half = indices.len() / 2;
        for &i in &indices[..half] {
            train.push(manifest.entries[i].clone());
        }
        for &i in &indices[half..] {
            test.push(manifest.entries[i].clone());
        }
    }
    Ok((Manifest { entries: train }, Manifest { entries: test }))
}

/// Settings for the full per-image pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub bilateral: BilateralParams,
    pub texture: TextureConfig,
    /// Z-score features with training-set statistics before grading.
    pub normalize: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bilateral: BilateralParams::default(),
            texture: TextureConfig::default(),
            normalize: true,
        }
    }
}

/// Shape and texture features of one image.
#[derive(Debug, Clone, Copy)]
pub struct ImageFeatures {
    pub shape: ShapeVector,
    pub texture: TextureVector,
}

/// Which feature slice feeds the grader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    Texture,
    Shape,
    Fused,
}

impl FeatureMode {
    pub const ALL: [FeatureMode; 3] = [FeatureMode::Texture, FeatureMode::Shape, FeatureMode::Fused];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Texture => "texture",
            FeatureMode::Shape => "shape",
            FeatureMode::Fused => "fused",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "texture" => Ok(FeatureMode::Texture),
            "shape" => Ok(FeatureMode::Shape),
            "fused" => Ok(FeatureMode::Fused),
            other => Err(format!("unknown feature mode `{other}`")),
        }
    }
}

impl ImageFeatures {
    /// Feature vector for a mode; fused order is (A, P, MAJL, MINL, E, ED,
    /// mu, sigma).
    pub fn vector(&self, mode: FeatureMode) -> Result<FeatureVector, ClassifyError> {
        let fused = fuse(&self.shape, &self.texture)?;
        Ok(match mode {
            FeatureMode::Fused => fused,
            FeatureMode::Shape => fused.project(0..6),
            FeatureMode::Texture => fused.project(6..8),
        })
    }
}

/// Run preprocessing and feature extraction on one image: specular removal
/// (RGB inputs), gray conversion, Otsu segmentation, largest component,
/// hole filling, then shape and texture features.
pub fn extract_features(
    image: &RasterImage,
    config: &PipelineConfig,
) -> Result<ImageFeatures, PipelineError> {
    let gray = if image.channels() == 3 {
        let despeculared = remove_specular(image, &config.bilateral)?;
        to_gray(&despeculared)?
    } else {
        image.clone()
    };
    let mask = threshold_segment(&gray)?;
    let mask = largest_component(&mask)?;
    let mask = fill_holes(&mask);
    let shape = shape_vector(&mask)?;
    let texture = texture_vector(&gray, &mask, &config.texture)?;
    Ok(ImageFeatures { shape, texture })
}

fn extract_labeled(
    manifest: &Manifest,
    config: &PipelineConfig,
) -> Result<Vec<(GradeLabel, ImageFeatures)>, HarnessError> {
    manifest
        .entries
        .par_iter()
        .map(|(path, grade)| {
            let annotate = |source: PipelineError| HarnessError::Pipeline {
                path: path.display().to_string(),
                source,
            };
            let image = load_image(path).map_err(|e| annotate(e.into()))?;
            let features = extract_features(&image, config).map_err(annotate)?;
            Ok((*grade, features))
        })
        .collect()
}

/// Per-grade counts and percentages plus the averages, assembled from a
/// confusion matrix with rows = true grade and columns = predicted.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub classifier: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub dataset: String,
    pub feature_mode: FeatureMode,
    pub confusion: [[u64; 6]; 6],
    pub per_grade_accuracy: [f64; 6],
    pub tpr_count: [u64; 6],
    pub tpr_percent: [f64; 6],
    pub fpr_count: [u64; 6],
    pub fpr_percent: [f64; 6],
    pub average_accuracy: f64,
    pub average_fpr: f64,
    pub comparison: Option<Comparison>,
}

/// Accuracy grid over classifier x feature mode, mirroring the three-way
/// comparison table. SVM is intentionally absent; `svm` explains why.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Rows follow [knn, centroid, lda]; columns follow
    /// [texture, shape, fused].
    pub accuracy: [[f64; 3]; 3],
    pub svm: String,
}

impl EvaluationReport {
    pub fn from_confusion(
        classifier: ModelKind,
        k: usize,
        seed: u64,
        dataset: String,
        feature_mode: FeatureMode,
        confusion: [[u64; 6]; 6],
    ) -> Self {
        let mut tpr_count = [0u64; 6];
        let mut tpr_percent = [0f64; 6];
        let mut fpr_count = [0u64; 6];
        let mut fpr_percent = [0f64; 6];
        for g in 0..6 {
            let row_sum: u64 = confusion[g].iter().sum();
            tpr_count[g] = confusion[g][g];
            fpr_count[g] = row_sum - confusion[g][g];
            if row_sum > 0 {
                tpr_percent[g] = confusion[g][g] as f64 / row_sum as f64 * 100.0;
                fpr_percent[g] = fpr_count[g] as f64 / row_sum as f64 * 100.0;
            }
        }
        let average_accuracy = tpr_percent.iter().sum::<f64>() / 6.0;
        let average_fpr = fpr_percent.iter().sum::<f64>() / 6.0;
        Self {
            classifier,
            k,
            seed,
            dataset,
            feature_mode,
            confusion,
            per_grade_accuracy: tpr_percent,
            tpr_count,
            tpr_percent,
            fpr_count,
            fpr_percent,
            average_accuracy,
            average_fpr,
            comparison: None,
        }
    }

    /// Serialize with fixed key order and 4-decimal percentages, so equal
    /// reports are byte-identical.
    pub fn to_json(&self) -> String {
        let mut out = String::new();
        let pct = |v: f64| format!("{v:.4}");
        out.push_str("{\n");
        let _ = writeln!(out, "  \"classifier\": \"{}\",", self.classifier.as_str());
        let _ = writeln!(out, "  \"k\": {},", self.k);
        let _ = writeln!(out, "  \"seed\": {},", self.seed);
        let _ = writeln!(out, "  \"dataset\": \"{}\",", self.dataset);
        let _ = writeln!(out, "  \"feature_mode\": \"{}\",", self.feature_mode.as_str());
        out.push_str("  \"confusion\": [\n");
        for (i, row) in self.confusion.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let comma = if i < 5 { "," } else { "" };
            let _ = writeln!(out, "    [{}]{}", cells.join(", "), comma);
        }
        out.push_str("  ],\n");
        let join_pct = |vals: &[f64]| {
            vals.iter().map(|&v| pct(v)).collect::<Vec<_>>().join(", ")
        };
        let join_u64 = |vals: &[u64]| {
            vals.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
        };
        let _ = writeln!(out, "  \"per_grade\": [{}],", join_pct(&self.per_grade_accuracy));
        let _ = writeln!(
            out,
            "  \"tpr\": {{\"count\": [{}], \"percent\": [{}]}},",
            join_u64(&self.tpr_count),
            join_pct(&self.tpr_percent)
        );
        let _ = writeln!(
            out,
            "  \"fpr\": {{\"count\": [{}], \"percent\": [{}]}},",
            join_u64(&self.fpr_count),
            join_pct(&self.fpr_percent)
        );
        let _ = writeln!(out, "  \"average_accuracy\": {},", pct(self.average_accuracy));
        let _ = writeln!(out, "  \"average_fpr\": {},", pct(self.average_fpr));
        match &self.comparison {
            None => out.push_str("  \"comparison\": null\n"),
            Some(c) => {
                out.push_str("  \"comparison\": {\n");
                out.push_str("    \"classifiers\": [\"knn\", \"centroid\", \"lda\"],\n");
                out.push_str("    \"feature_modes\": [\"texture\", \"shape\", \"fused\"],\n");
                out.push_str("    \"accuracy\": [\n");
                for (i, row) in c.accuracy.iter().enumerate() {
                    let comma = if i < 2 { "," } else { "" };
                    let _ = writeln!(out, "      [{}]{}", join_pct(row), comma);
                }
                out.push_str("    ],\n");
                let _ = writeln!(out, "    \"svm\": \"{}\"", c.svm);
                out.push_str("  }\n");
            }
        }
        out.push('}');
        out.push('\n');
        out
    }
}

/// Options for [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub classifier: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub feature_mode: FeatureMode,
    pub dataset_label: String,
    pub config: PipelineConfig,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            classifier: ModelKind::Knn,
            k: 4,
            seed: 0,
            feature_mode: FeatureMode::Fused,
            dataset_label: "user".into(),
            config: PipelineConfig::default(),
        }
    }
}

/// Run the full protocol: split, extract features once, then train and
/// grade every classifier over every feature mode. The main report block
/// covers the requested classifier and mode; the comparison grid holds the
/// other eight cells.
pub fn evaluate(manifest: &Manifest, opts: &EvaluateOptions) -> Result<EvaluationReport, HarnessError> {
    let (train_manifest, test_manifest) = split(manifest, opts.seed)?;
    let train_features = extract_labeled(&train_manifest, &opts.config)?;
    let test_features = extract_labeled(&test_manifest, &opts.config)?;
    evaluate_features(&train_features, &test_features, opts)
}

/// Evaluation core over already-extracted features.
pub fn evaluate_features(
    train_features: &[(GradeLabel, ImageFeatures)],
    test_features: &[(GradeLabel, ImageFeatures)],
    opts: &EvaluateOptions,
) -> Result<EvaluationReport, HarnessError> {
    let kinds = [ModelKind::Knn, ModelKind::Centroid, ModelKind::Lda];
    let mut accuracy = [[0.0f64; 3]; 3];
    let mut main_confusion = None;
    for (mode_idx, mode) in FeatureMode::ALL.into_iter().enumerate() {
        let train_set: Vec<(GradeLabel, FeatureVector)> = train_features
            .iter()
            .map(|(g, f)| Ok((*g, f.vector(mode)?)))
            .collect::<Result<_, ClassifyError>>()?;
        let test_set: Vec<(GradeLabel, FeatureVector)> = test_features
            .iter()
            .map(|(g, f)| Ok((*g, f.vector(mode)?)))
            .collect::<Result<_, ClassifyError>>()?;
        for (kind_idx, kind) in kinds.into_iter().enumerate() {
            let k = if kind == ModelKind::Knn { opts.k } else { 0 };
            let model = train(kind, &train_set, k, opts.config.normalize)?;
            let confusion = confusion_matrix(&model, &test_set)?;
            let report = EvaluationReport::from_confusion(
                kind,
                k,
                opts.seed,
                opts.dataset_label.clone(),
                mode,
                confusion,
            );
            accuracy[kind_idx][mode_idx] = report.average_accuracy;
            if kind == opts.classifier && mode == opts.feature_mode {
                main_confusion = Some(confusion);
            }
        }
    }
    let confusion = main_confusion.expect("requested cell was evaluated");
    let mut report = EvaluationReport::from_confusion(
        opts.classifier,
        if opts.classifier == ModelKind::Knn {
            opts.k
        } else {
            0
        },
        opts.seed,
        opts.dataset_label.clone(),
        opts.feature_mode,
        confusion,
    );
    report.comparison = Some(Comparison {
        accuracy,
        svm: "omitted: kernel hyperparameters unspecified".into(),
    });
    Ok(report)
}

fn confusion_matrix(
    model: &TrainedModel,
    test_set: &[(GradeLabel, FeatureVector)],
) -> Result<[[u64; 6]; 6], ClassifyError> {
    let mut confusion = [[0u64; 6]; 6];
    for (truth, vector) in test_set {
        let (predicted, _) = grade(model, vector)?;
        confusion[truth.index()][predicted.index()] += 1;
    }
    Ok(confusion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_manifest(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("manifest.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn manifest_parses_and_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(dir.path(), "imgs/a.ppm,Hard_Small\n/abs/b.ppm,Soft_Large\n");
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries[0].0, dir.path().join("imgs/a.ppm"));
        assert_eq!(m.entries[0].1, GradeLabel::HardSmall);
        assert_eq!(m.entries[1].0, PathBuf::from("/abs/b.ppm"));
    }

    #[test]
    fn manifest_rejects_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_manifest(dir.path(), "x.ppm,Mushy\n");
        assert!(matches!(
            load_manifest(&path),
            Err(HarnessError::UnknownGrade { line: 1, .. })
        ));

        let path = write_manifest(dir.path(), "a.ppm,Hard_Small\na.ppm,Soft_Small\n");
        assert!(matches!(
            load_manifest(&path),
            Err(HarnessError::DuplicatePath { line: 2, .. })
        ));

        let path = write_manifest(dir.path(), "no-comma-here\n");
        assert!(matches!(
            load_manifest(&path),
            Err(HarnessError::MalformedLine { line: 1 })
        ));
    }

    fn synthetic_manifest(per_grade: usize) -> Manifest {
        let mut entries = Vec::new();
        for grade in GradeLabel::ALL {
            for i in 0..per_grade {
                entries.push((PathBuf::from(format!("{}_{i}.ppm", grade.as_str())), grade));
            }
        }
        Manifest { entries }
    }

    #[test]
    fn split_is_balanced_disjoint_and_deterministic() {
        let manifest = synthetic_manifest(10);
        let (train, test) = split(&manifest, 7).unwrap();
        for grade in GradeLabel::ALL {
            assert_eq!(train.count_for(grade), 5);
            assert_eq!(test.count_for(grade), 5);
        }
        let train_set: HashSet<_> = train.entries.iter().map(|(p, _)| p.clone()).collect();
        assert!(test.entries.iter().all(|(p, _)| !train_set.contains(p)));

        let again = split(&manifest, 7).unwrap();
        assert_eq!(again.0, train);
        assert_eq!(again.1, test);
        let different = split(&manifest, 8).unwrap();
        assert!(different.0 != train || different.1 != test);
    }

    #[test]
    fn split_odd_count_favors_test() {
        let manifest = synthetic_manifest(5);
        let (train, test) = split(&manifest, 1).unwrap();
        for grade in GradeLabel::ALL {
            assert_eq!(train.count_for(grade), 2);
            assert_eq!(test.count_for(grade), 3);
        }
    }

    #[test]
    fn split_rejects_tiny_grades() {
        let mut manifest = synthetic_manifest(2);
        manifest.entries.retain(|(_, g)| *g != GradeLabel::HardLarge);
        manifest
            .entries
            .push((PathBuf::from("only.ppm"), GradeLabel::HardLarge));
        assert!(matches!(
            split(&manifest, 0),
            Err(HarnessError::GradeTooSmall(GradeLabel::HardLarge))
        ));
    }

    #[test]
    fn report_arithmetic_from_table_shaped_confusion() {
        let confusion = [
            [78, 1, 1, 0, 0, 0],
            [1, 76, 0, 3, 0, 0],
            [1, 0, 75, 2, 2, 0],
            [0, 1, 1, 77, 0, 1],
            [0, 0, 1, 0, 79, 0],
            [0, 0, 0, 1, 1, 78],
        ];
        let r = EvaluationReport::from_confusion(
            ModelKind::Knn,
            4,
            7,
            "user".into(),
            FeatureMode::Fused,
            confusion,
        );
        assert_eq!(r.tpr_count, [78, 76, 75, 77, 79, 78]);
        assert_eq!(r.fpr_count, [2, 4, 5, 3, 1, 2]);
        assert!((r.tpr_percent[0] - 97.50).abs() < 1e-9);
        assert!((r.fpr_percent[0] - 2.50).abs() < 1e-9);
        for g in 0..6 {
            assert!((r.tpr_percent[g] + r.fpr_percent[g] - 100.0).abs() < 1e-9);
        }
        assert!((r.average_accuracy - 96.45).abs() < 0.01);
        assert!((r.average_fpr - 3.55).abs() < 0.01);
    }

    #[test]
    fn report_json_shape() {
        let confusion = [[10, 0, 0, 0, 0, 0]; 6];
        let mut r = EvaluationReport::from_confusion(
            ModelKind::Centroid,
            0,
            3,
            "synthetic".into(),
            FeatureMode::Shape,
            confusion,
        );
        r.comparison = Some(Comparison {
            accuracy: [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]],
            svm: "omitted: kernel hyperparameters unspecified".into(),
        });
        let json = r.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["classifier"], "centroid");
        assert_eq!(value["seed"], 3);
        assert_eq!(value["confusion"][0][0], 10);
        assert_eq!(value["tpr"]["count"][0], 10);
        assert_eq!(value["comparison"]["accuracy"][1][2], 6.0);
        // key order is fixed
        let keys: Vec<&str> = [
            "\"classifier\"",
            "\"k\"",
            "\"seed\"",
            "\"dataset\"",
            "\"feature_mode\"",
            "\"confusion\"",
            "\"per_grade\"",
            "\"tpr\"",
            "\"fpr\"",
            "\"average_accuracy\"",
            "\"average_fpr\"",
            "\"comparison\"",
        ]
        .to_vec();
        let mut last = 0;
        for key in keys {
            let pos = json.find(key).unwrap_or_else(|| panic!("missing {key}"));
            assert!(pos > last || last == 0, "{key} out of order");
            last = pos;
        }
    }

    #[test]
    fn evaluate_features_separable_classes() {
        // perfectly separated synthetic features grade diagonally
        let mut train_features = Vec::new();
        let mut test_features = Vec::new();
        for (i, grade) in GradeLabel::ALL.into_iter().enumerate() {
            for j in 0..4 {
                // independent small jitter per feature keeps the pooled
                // covariance nonsingular for the LDA comparison cell
                let jit = |f: usize| 0.05 * (((i * 31 + j * 17 + f * 7) % 13) as f64 - 6.0) / 6.0;
                let f = ImageFeatures {
                    shape: ShapeVector {
                        area: 1000.0 * (i + 1) as f64 + jit(0),
                        perimeter: 100.0 * (i + 1) as f64 + jit(1),
                        majl: 50.0 * (i + 1) as f64 + jit(2),
                        minl: 25.0 * (i + 1) as f64 + jit(3),
                        eccentricity: 0.1 * (i + 1) as f64 + 0.001 * jit(4),
                        equidiameter: 30.0 * (i + 1) as f64 + jit(5),
                    },
                    texture: TextureVector {
                        mean: 10.0 * (i + 1) as f64 + jit(6),
                        std: 2.0 * (i + 1) as f64 + jit(7),
                    },
                };
                if j % 2 == 0 {
                    train_features.push((grade, f));
                } else {
                    test_features.push((grade, f));
                }
            }
        }
        let opts = EvaluateOptions {
            k: 1,
            ..Default::default()
        };
        let report = evaluate_features(&train_features, &test_features, &opts).unwrap();
        assert_eq!(report.average_accuracy, 100.0);
        for g in 0..6 {
            assert_eq!(report.confusion[g][g], 2);
            assert_eq!(report.fpr_count[g], 0);
        }
        let comparison = report.comparison.unwrap();
        for row in comparison.accuracy {
            for cell in row {
                assert!(cell >= 0.0 && cell <= 100.0);
            }
        }
    }
}
