//! Feature fusion, Euclidean similarity, and the three graders: k-NN,
//! nearest-centroid reference models, and multiclass LDA with pooled
//! covariance and equal priors.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::shape::ShapeVector;
use crate::texture::TextureVector;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("non-finite feature value")]
    NonFiniteInput,
    #[error("feature {0} has zero variance across the training set")]
    ZeroVarianceFeature(usize),
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("normalization state mismatch")]
    NormalizationMismatch,
    #[error("grade {0} missing from the training set")]
    MissingClass(GradeLabel),
    #[error("pooled covariance is singular")]
    SingularCovariance,
    #[error("k={k} exceeds the {n} training vectors")]
    KTooLarge { k: usize, n: usize },
    #[error("model file {path}: {reason}")]
    ModelFormat { path: String, reason: String },
    #[error("i/o failure on {path}: {source}")]
    ModelIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The six grades, ordered surface (soft, semi-hard, hard) major and size
/// minor; the integer encoding 0-5 follows this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GradeLabel {
    SoftSmall,
    SoftLarge,
    SemiHardSmall,
    SemiHardLarge,
    HardSmall,
    HardLarge,
}

impl GradeLabel {
    pub const ALL: [GradeLabel; 6] = [
        GradeLabel::SoftSmall,
        GradeLabel::SoftLarge,
        GradeLabel::SemiHardSmall,
        GradeLabel::SemiHardLarge,
        GradeLabel::HardSmall,
        GradeLabel::HardLarge,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<GradeLabel> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GradeLabel::SoftSmall => "Soft_Small",
            GradeLabel::SoftLarge => "Soft_Large",
            GradeLabel::SemiHardSmall => "Semi_Hard_Small",
            GradeLabel::SemiHardLarge => "Semi_Hard_Large",
            GradeLabel::HardSmall => "Hard_Small",
            GradeLabel::HardLarge => "Hard_Large",
        }
    }
}

impl fmt::Display for GradeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GradeLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GradeLabel::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| format!("unknown grade `{s}`"))
    }
}

/// Feature vector carrier. Fused vectors hold the 8 features in the fixed
/// order (A, P, MAJL, MINL, E, ED, mu, sigma); ablation runs use the shape
/// or texture slice alone.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub normalized: bool,
}

impl FeatureVector {
    pub fn raw(values: Vec<f64>) -> Result<Self, ClassifyError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::NonFiniteInput);
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sub-vector over a feature index range, same normalization state.
    pub fn project(&self, range: std::ops::Range<usize>) -> FeatureVector {
        FeatureVector {
            values: self.values[range].to_vec(),
            normalized: self.normalized,
        }
    }
}

/// Concatenate shape and texture features into the fused 8-vector.
pub fn fuse(shape: &ShapeVector, texture: &TextureVector) -> Result<FeatureVector, ClassifyError> {
    let mut values = Vec::with_capacity(8);
    values.extend_from_slice(&shape.to_array());
    values.extend_from_slice(&texture.to_array());
    FeatureVector::raw(values)
}

/// Per-feature z-score parameters from a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn apply(&self, vector: &FeatureVector) -> Result<FeatureVector, ClassifyError> {
        if vector.normalized {
            return Err(ClassifyError::NormalizationMismatch);
        }
        if vector.len() != self.mean.len() {
            return Err(ClassifyError::LengthMismatch(vector.len(), self.mean.len()));
        }
        let values = vector
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect();
        Ok(FeatureVector {
            values,
            normalized: true,
        })
    }
}

/// Z-score a set of vectors with population statistics, returning the
/// normalized set and the stats for later application to queries.
pub fn normalize(
    vectors: &[FeatureVector],
) -> Result<(Vec<FeatureVector>, NormStats), ClassifyError> {
    let stats = fit_stats(vectors)?;
    let normalized = vectors
        .iter()
        .map(|v| stats.apply(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((normalized, stats))
}

fn fit_stats(vectors: &[FeatureVector]) -> Result<NormStats, ClassifyError> {
    let n = vectors.len();
    if n < 2 {
        return Err(ClassifyError::ZeroVarianceFeature(0));
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.normalized {
            return Err(ClassifyError::NormalizationMismatch);
        }
        if v.len() != dim {
            return Err(ClassifyError::LengthMismatch(v.len(), dim));
        }
    }
    let mut mean = vec![0.0f64; dim];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0f64; dim];
    for v in vectors {
        for ((s, &m), &x) in var.iter_mut().zip(&mean).zip(&v.values) {
            *s += (x - m) * (x - m);
        }
    }
    let mut std = vec![0.0f64; dim];
    for (i, (&v, s)) in var.iter().zip(std.iter_mut()).enumerate() {
        let sd = (v / n as f64).sqrt();
        if sd <= f64::EPSILON * (mean[i].abs() + 1.0) * 8.0 {
            return Err(ClassifyError::ZeroVarianceFeature(i));
        }
        *s = sd;
    }
    Ok(NormStats { mean, std })
}

/// Euclidean distance; both vectors must share length and normalization
/// state.
pub fn euclidean(t: &FeatureVector, r: &FeatureVector) -> Result<f64, ClassifyError> {
    if t.len() != r.len() {
        return Err(ClassifyError::LengthMismatch(t.len(), r.len()));
    }
    if t.normalized != r.normalized {
        return Err(ClassifyError::NormalizationMismatch);
    }
    Ok(distance(&t.values, &r.values))
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Knn,
    Centroid,
    Lda,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Centroid => "centroid",
            ModelKind::Lda => "lda",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "knn" => Ok(ModelKind::Knn),
            "centroid" => Ok(ModelKind::Centroid),
            "lda" => Ok(ModelKind::Lda),
            other => Err(format!("unknown classifier `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
enum ModelParams {
    Knn {
        k: usize,
        labels: Vec<GradeLabel>,
        vectors: Vec<Vec<f64>>,
    },
    Centroid {
        centroids: Vec<Vec<f64>>, // one per grade, in label order
    },
    Lda {
        means: Vec<Vec<f64>>,   // one per grade, in label order
        cov_inv: Vec<f64>,      // dim x dim, row-major
    },
}

/// An immutable trained grader plus the training-set normalization stats.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    dim: usize,
    stats: NormStats,
    apply_norm: bool,
    params: ModelParams,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::Knn { .. } => ModelKind::Knn,
            ModelParams::Centroid { .. } => ModelKind::Centroid,
            ModelParams::Lda { .. } => ModelKind::Lda,
        }
    }

    pub fn k(&self) -> usize {
        match &self.params {
            ModelParams::Knn { k, .. } => *k,
            _ => 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stats(&self) -> &NormStats {
        &self.stats
    }

    pub fn normalizes(&self) -> bool {
        self.apply_norm
    }
}

/// Train a grader. Inputs are raw (unnormalized) vectors; z-score stats are
/// always computed from them and stored, and applied when `apply_norm`.
pub fn train(
    kind: ModelKind,
    samples: &[(GradeLabel, FeatureVector)],
    k: usize,
    apply_norm: bool,
) -> Result<TrainedModel, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::MissingClass(GradeLabel::SoftSmall));
    }
    let dim = samples[0].1.len();
    for (_, v) in samples {
        if v.len() != dim {
            return Err(ClassifyError::LengthMismatch(v.len(), dim));
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(ClassifyError::NonFiniteInput);
        }
        if v.normalized {
            return Err(ClassifyError::NormalizationMismatch);
        }
    }
    if kind == ModelKind::Knn && (k == 0 || k > samples.len()) {
        return Err(ClassifyError::KTooLarge {
            k,
            n: samples.len(),
        });
    }
    for grade in GradeLabel::ALL {
        if !samples.iter().any(|(g, _)| *g == grade) {
            return Err(ClassifyError::MissingClass(grade));
        }
    }

    let raw: Vec<FeatureVector> = samples.iter().map(|(_, v)| v.clone()).collect();
    let stats = fit_stats(&raw)?;
    let prepared: Vec<Vec<f64>> = if apply_norm {
        raw.iter()
            .map(|v| stats.apply(v).map(|n| n.values))
            .collect::<Result<_, _>>()?
    } else {
        raw.into_iter().map(|v| v.values).collect()
    };
    let labels: Vec<GradeLabel> = samples.iter().map(|(g, _)| *g).collect();

    let params = match kind {
        ModelKind::Knn => ModelParams::Knn {
            k,
            labels,
            vectors: prepared,
        },
        ModelKind::Centroid => ModelParams::Centroid {
            centroids: class_means(&labels, &prepared, dim),
        },
        ModelKind::Lda => {
            for grade in GradeLabel::ALL {
                if labels.iter().filter(|&&g| g == grade).count() < 2 {
                    return Err(ClassifyError::SingularCovariance);
                }
            }
            let means = class_means(&labels, &prepared, dim);
            let mut scatter = vec![0.0f64; dim * dim];
            for (label, vector) in labels.iter().zip(&prepared) {
                let mu = &means[label.index()];
                for i in 0..dim {
                    let di = vector[i] - mu[i];
                    for j in 0..dim {
                        scatter[i * dim + j] += di * (vector[j] - mu[j]);
                    }
                }
            }
            let denom = (prepared.len() - GradeLabel::ALL.len()) as f64;
            if denom <= 0.0 {
                return Err(ClassifyError::SingularCovariance);
            }
            for v in &mut scatter {
                *v /= denom;
            }
            let cov_inv = spd_inverse(&scatter, dim).ok_or(ClassifyError::SingularCovariance)?;
            ModelParams::Lda { means, cov_inv }
        }
    };
    Ok(TrainedModel {
        dim,
        stats,
        apply_norm,
        params,
    })
}

fn class_means(labels: &[GradeLabel], vectors: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0f64; dim]; GradeLabel::ALL.len()];
    let mut counts = [0usize; 6];
    for (label, vector) in labels.iter().zip(vectors) {
        counts[label.index()] += 1;
        for (s, &x) in sums[label.index()].iter_mut().zip(vector) {
            *s += x;
        }
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for s in sum.iter_mut() {
                *s /= count as f64;
            }
        }
    }
    sums
}

/// Cholesky factorization (lower triangular); None when not positive
/// definite.
fn cholesky(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0f64; dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = a[i * dim + j];
            for k in 0..j {
                sum -= l[i * dim + k] * l[j * dim + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i * dim + i] = sum.sqrt();
            } else {
                l[i * dim + j] = sum / l[j * dim + j];
            }
        }
    }
    Some(l)
}

fn spd_inverse(a: &[f64], dim: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, dim)?;
    let mut inv = vec![0.0f64; dim * dim];
    let mut y = vec![0.0f64; dim];
    let mut x = vec![0.0f64; dim];
    for col in 0..dim {
        // L y = e_col (forward), L^T x = y (backward)
        for i in 0..dim {
            let mut sum = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                sum -= l[i * dim + k] * y[k];
            }
            y[i] = sum / l[i * dim + i];
        }
        for i in (0..dim).rev() {
            let mut sum = y[i];
            for k in i + 1..dim {
                sum -= l[k * dim + i] * x[k];
            }
            x[i] = sum / l[i * dim + i];
        }
        for i in 0..dim {
            inv[i * dim + col] = x[i];
        }
    }
    Some(inv)
}

/// Grade a raw query vector: the model applies its stored normalization.
///
/// k-NN takes the majority label among the k nearest; vote ties go to the
/// tied class with the single nearest neighbor, then to the lowest class
/// index. Scores are the vote fraction (knn), negative distance
/// (centroid), or discriminant value (lda).
pub fn grade(
    model: &TrainedModel,
    query: &FeatureVector,
) -> Result<(GradeLabel, f64), ClassifyError> {
    if query.len() != model.dim {
        return Err(ClassifyError::LengthMismatch(query.len(), model.dim));
    }
    if query.values.iter().any(|v| !v.is_finite()) {
        return Err(ClassifyError::NonFiniteInput);
    }
    if query.normalized {
        return Err(ClassifyError::NormalizationMismatch);
    }
    let query = if model.apply_norm {
        model.stats.apply(query)?.values
    } else {
        query.values.clone()
    };

    match &model.params {
        ModelParams::Knn { k, labels, vectors } => {
            let mut order: Vec<(f64, usize)> = vectors
                .iter()
                .zip(labels)
                .map(|(v, g)| (distance(&query, v), g.index()))
                .collect();
            order.sort_unstable_by(|a, b| {
                a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
            });
            let neighbors = &order[..*k];
            let mut votes = [0usize; 6];
            for &(_, label) in neighbors {
                votes[label] += 1;
            }
            let top = *votes.iter().max().expect("six classes");
            // nearest neighbor whose class is among the tied top voters
            let winner = neighbors
                .iter()
                .find(|(_, label)| votes[*label] == top)
                .expect("some neighbor holds the top vote")
                .1;
            let label = GradeLabel::from_index(winner).expect("index in range");
            Ok((label, top as f64 / *k as f64))
        }
        ModelParams::Centroid { centroids } => {
            let mut best = (f64::INFINITY, 0usize);
            for (index, centroid) in centroids.iter().enumerate() {
                let d = distance(&query, centroid);
                if d < best.0 {
                    best = (d, index);
                }
            }
            Ok((
                GradeLabel::from_index(best.1).expect("index in range"),
                -best.0,
            ))
        }
        ModelParams::Lda { means, cov_inv } => {
            let dim = model.dim;
            let mut best = (f64::NEG_INFINITY, 0usize);
            for (index, mu) in means.iter().enumerate() {
                // mu^T C^-1 x - 0.5 mu^T C^-1 mu, equal priors
                let mut lin = 0.0;
                let mut quad = 0.0;
                for i in 0..dim {
                    let mut ci = 0.0;
                    for j in 0..dim {
                        ci += cov_inv[i * dim + j] * mu[j];
                    }
                    lin += ci * query[i];
                    quad += ci * mu[i];
                }
                let score = lin - 0.5 * quad;
                if score > best.0 {
                    best = (score, index);
                }
            }
            Ok((
                GradeLabel::from_index(best.1).expect("index in range"),
                best.0,
            ))
        }
    }
}

fn fmt_number(v: f64) -> String {
    format!("{v:.11e}")
}

/// Write the model in the versioned plain-text format.
pub fn save_model<P: AsRef<Path>>(model: &TrainedModel, path: P) -> Result<(), ClassifyError> {
    let path = path.as_ref();
    let io_err = |source| ClassifyError::ModelIo {
        path: path.display().to_string(),
        source,
    };
    let mut out = Vec::new();
    writeln!(
        out,
        "gradepipe-model v1 {} k={}",
        model.kind().as_str(),
        model.k()
    )
    .unwrap();
    let norm_state = if model.apply_norm { "on" } else { "off" };
    let mut line = format!("norm {} {}", norm_state, model.dim);
    for v in model.stats.mean.iter().chain(&model.stats.std) {
        line.push(' ');
        line.push_str(&fmt_number(*v));
    }
    writeln!(out, "{line}").unwrap();

    let write_vec = |out: &mut Vec<u8>, tag: &str, label: &str, values: &[f64]| {
        let mut line = format!("{tag} {label}");
        for v in values {
            line.push(' ');
            line.push_str(&fmt_number(*v));
        }
        writeln!(out, "{line}").unwrap();
    };
    match &model.params {
        ModelParams::Knn { labels, vectors, .. } => {
            for (label, vector) in labels.iter().zip(vectors) {
                write_vec(&mut out, "vec", label.as_str(), vector);
            }
        }
        ModelParams::Centroid { centroids } => {
            for (grade, centroid) in GradeLabel::ALL.iter().zip(centroids) {
                write_vec(&mut out, "centroid", grade.as_str(), centroid);
            }
        }
        ModelParams::Lda { means, cov_inv } => {
            for (grade, mean) in GradeLabel::ALL.iter().zip(means) {
                write_vec(&mut out, "mean", grade.as_str(), mean);
            }
            for row in 0..model.dim {
                write_vec(
                    &mut out,
                    "covinv",
                    &row.to_string(),
                    &cov_inv[row * model.dim..(row + 1) * model.dim],
                );
            }
        }
    }
    std::fs::write(path, out).map_err(io_err)
}

/// Load a model written by [`save_model`].
pub fn load_model<P: AsRef<Path>>(path: P) -> Result<TrainedModel, ClassifyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ClassifyError::ModelIo {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |reason: &str| ClassifyError::ModelFormat {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };

    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "gradepipe-model" || fields[1] != "v1" {
        return Err(bad("bad header"));
    }
    let kind = ModelKind::from_str(fields[2]).map_err(|e| bad(&e))?;
    let k: usize = fields[3]
        .strip_prefix("k=")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("bad k field"))?;

    let norm_line = lines.next().ok_or_else(|| bad("missing norm line"))?;
    let tokens: Vec<&str> = norm_line.split_whitespace().collect();
    if tokens.len() < 3 || tokens[0] != "norm" {
        return Err(bad("bad norm line"));
    }
    let apply_norm = match tokens[1] {
        "on" => true,
        "off" => false,
        _ => return Err(bad("norm state must be on/off")),
    };
    let dim: usize = tokens[2].parse().map_err(|_| bad("bad dimension"))?;
    if dim == 0 || tokens.len() != 3 + 2 * dim {
        return Err(bad("norm line length mismatch"));
    }
    let parse_f64 = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
    let mut mean = Vec::with_capacity(dim);
    let mut std = Vec::with_capacity(dim);
    for token in &tokens[3..3 + dim] {
        mean.push(parse_f64(token)?);
    }
    for token in &tokens[3 + dim..] {
        std.push(parse_f64(token)?);
    }

    let mut knn_labels = Vec::new();
    let mut knn_vectors = Vec::new();
    let mut centroids: Vec<Option<Vec<f64>>> = vec![None; 6];
    let mut means: Vec<Option<Vec<f64>>> = vec![None; 6];
    let mut cov_rows: Vec<Option<Vec<f64>>> = vec![None; dim];
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 + dim {
            return Err(bad("record length mismatch"));
        }
        let mut values = Vec::with_capacity(dim);
        for token in &tokens[2..] {
            values.push(parse_f64(token)?);
        }
        match tokens[0] {
            "vec" => {
                let label = GradeLabel::from_str(tokens[1]).map_err(|e| bad(&e))?;
                knn_labels.push(label);
                knn_vectors.push(values);
            }
            "centroid" => {
                let label = GradeLabel::from_str(tokens[1]).map_err(|e| bad(&e))?;
                centroids[label.index()] = Some(values);
            }
            "mean" => {
                let label = GradeLabel::from_str(tokens[1]).map_err(|e| bad(&e))?;
                means[label.index()] = Some(values);
            }
            "covinv" => {
                let row: usize = tokens[1].parse().map_err(|_| bad("bad row index"))?;
                if row >= dim {
                    return Err(bad("covariance row out of range"));
                }
                cov_rows[row] = Some(values);
            }
            other => return Err(bad(&format!("unknown record `{other}`"))),
        }
    }

    let params = match kind {
        ModelKind::Knn => {
            if knn_vectors.is_empty() || k == 0 || k > knn_vectors.len() {
                return Err(bad("knn model needs at least k stored vectors"));
            }
            ModelParams::Knn {
                k,
                labels: knn_labels,
                vectors: knn_vectors,
            }
        }
        ModelKind::Centroid => {
            let centroids = centroids
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("centroid model needs all six centroids"))?;
            ModelParams::Centroid { centroids }
        }
        ModelKind::Lda => {
            let means = means
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("lda model needs all six class means"))?;
            let cov_inv = cov_rows
                .into_iter()
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("lda model needs a full covariance inverse"))?
                .concat();
            ModelParams::Lda { means, cov_inv }
        }
    };
    Ok(TrainedModel {
        dim,
        stats: NormStats { mean, std },
        apply_norm,
        params,
    })
}
