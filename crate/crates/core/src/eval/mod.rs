//! Cross-validated recognition experiments.
//!
//! A protocol run fits one model per fold at the largest requested
//! dimension and scores every smaller dimension by truncating `W`, since the
//! leading eigenvectors of a fit do not depend on how many are requested.
//!
//! Fold accuracy is reported at the single grid dimension that classifies the
//! most test samples over all folds (the smallest such dimension on ties),
//! and the accuracy curves keep every dimension.

mod classify;

pub use classify::{lrc_classify, lrc_classify_2d, lrc_subspaces_2d, nn_classify, ClassSubspace, LRC_RCOND};

use std::borrow::Cow;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{pca_preprocess, vectorize, Fold, ImageDataset, LabeledDataset, SplitPlan};
use crate::error::{Error, Result};
use crate::graph::WeightScheme;
use crate::projections::{embed, fit_dlpp, fit_glpp, fit_lda, fit_lpp, fit_pca, ProjectionModel};
use crate::twod::{embed_2d, fit_2d_glpp, Projection2DModel, Terms};

/// `β` values scanned by [`sweep_beta`] when no grid is given.
pub const DEFAULT_BETA_GRID: [f64; 8] = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10_000.0, 100_000.0];

/// A projection method with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum MethodSpec {
    Pca,
    Lda,
    Lpp { scheme: WeightScheme, supervised: bool },
    Dlpp { scheme: WeightScheme },
    Glpp { scheme: WeightScheme, beta: f64 },
    Glpp2d { scheme: WeightScheme, beta: f64, terms: Terms },
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MethodSpec::Pca => "pca",
            MethodSpec::Lda => "lda",
            MethodSpec::Lpp { .. } => "lpp",
            MethodSpec::Dlpp { .. } => "dlpp",
            MethodSpec::Glpp { .. } => "glpp",
            MethodSpec::Glpp2d { terms: Terms::LocalOnly, .. } => "lpp2d",
            MethodSpec::Glpp2d { .. } => "glpp2d",
        }
    }

    pub fn scheme(&self) -> Option<WeightScheme> {
        match *self {
            MethodSpec::Pca | MethodSpec::Lda => None,
            MethodSpec::Lpp { scheme, .. }
            | MethodSpec::Dlpp { scheme }
            | MethodSpec::Glpp { scheme, .. }
            | MethodSpec::Glpp2d { scheme, .. } => Some(scheme),
        }
    }

    pub fn beta(&self) -> Option<f64> {
        match *self {
            MethodSpec::Glpp { beta, .. } | MethodSpec::Glpp2d { beta, .. } => Some(beta),
            _ => None,
        }
    }

    pub fn is_2d(&self) -> bool {
        matches!(self, MethodSpec::Glpp2d { .. })
    }

    /// The same method with `β` replaced; only GLPP and 2D-GLPP have one.
    pub fn with_beta(&self, b: f64) -> Result<Self> {
        match *self {
            MethodSpec::Glpp { scheme, .. } => Ok(MethodSpec::Glpp { scheme, beta: b }),
            MethodSpec::Glpp2d { scheme, terms, .. } => Ok(MethodSpec::Glpp2d { scheme, beta: b, terms }),
            other => Err(Error::Config(format!(
                "method {} has no beta; beta sweeps need glpp or glpp2d",
                other.name()
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Classifier {
    /// Euclidean 1-NN.
    #[default]
    Nn,
    /// Linear regression classifier.
    Lrc,
}

/// Method plus the pipeline settings around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    #[serde(flatten)]
    pub method: MethodSpec,
    /// Variance fraction kept by the PCA step before 1D methods.
    pub pca_ratio: f64,
    pub classifier: Classifier,
}

impl MethodConfig {
    /// PCA ratio 1; LRC for 2D methods, 1-NN otherwise.
    pub fn new(method: MethodSpec) -> Self {
        Self {
            method,
            pca_ratio: 1.0,
            classifier: if method.is_2d() { Classifier::Lrc } else { Classifier::Nn },
        }
    }
}

/// Samples as vectors or as image matrices.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalData {
    Vectors(LabeledDataset),
    Images(ImageDataset),
}

impl EvalData {
    pub fn labels(&self) -> &[usize] {
        match self {
            EvalData::Vectors(d) => d.labels(),
            EvalData::Images(d) => d.labels(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels().len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels().is_empty()
    }

    /// Vector view; images are flattened column-major.
    pub fn vectors(&self) -> Result<Cow<'_, LabeledDataset>> {
        match self {
            EvalData::Vectors(d) => Ok(Cow::Borrowed(d)),
            EvalData::Images(d) => Ok(Cow::Owned(vectorize(d)?)),
        }
    }

    fn images(&self) -> Result<&ImageDataset> {
        match self {
            EvalData::Images(d) => Ok(d),
            EvalData::Vectors(_) => Err(Error::Config("2D methods need an image dataset".into())),
        }
    }
}

/// A fitted 1D or 2D model.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    OneD(ProjectionModel),
    TwoD(Projection2DModel),
}

impl FittedModel {
    pub fn components(&self) -> usize {
        match self {
            FittedModel::OneD(m) => m.components(),
            FittedModel::TwoD(m) => m.components(),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            FittedModel::OneD(m) => m.to_json(),
            FittedModel::TwoD(m) => m.to_json(),
        }
    }
}

fn fit_1d(data: &LabeledDataset, cfg: &MethodConfig, d: usize) -> Result<ProjectionModel> {
    let (pca, reduced) = pca_preprocess(data, cfg.pca_ratio)?;
    let model = match cfg.method {
        MethodSpec::Pca => fit_pca(&reduced, d)?,
        MethodSpec::Lda => fit_lda(&reduced, d)?,
        MethodSpec::Lpp { scheme, supervised } => fit_lpp(&reduced, d, &scheme, supervised)?,
        MethodSpec::Dlpp { scheme } => fit_dlpp(&reduced, d, &scheme)?,
        MethodSpec::Glpp { scheme, beta } => fit_glpp(&reduced, d, &scheme, beta)?,
        MethodSpec::Glpp2d { .. } => unreachable!("2D methods are dispatched separately"),
    };
    model.with_pre_chain(pca)
}

/// Fits `cfg` with `d` components on the samples `idx` only.
pub fn fit_on(data: &EvalData, cfg: &MethodConfig, idx: &[usize], d: usize) -> Result<FittedModel> {
    match cfg.method {
        MethodSpec::Glpp2d { scheme, beta, terms } => {
            let (train, _) = data.images()?.subset(idx)?;
            Ok(FittedModel::TwoD(fit_2d_glpp(&train, d, &scheme, beta, terms)?))
        }
        _ => {
            let (train, _) = data.vectors()?.subset(idx)?;
            Ok(FittedModel::OneD(fit_1d(&train, cfg, d)?))
        }
    }
}

/// Per-phase wall-clock seconds, summed over folds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub fit_s: f64,
    pub classify_s: f64,
}

/// Correct counts for one fold, one entry per grid dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldScores {
    pub correct: Vec<usize>,
    pub total: usize,
}

/// Accuracy summary at one grid dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DimSummary {
    pub dim: usize,
    pub ara: f64,
    pub std: f64,
    pub top_rate: f64,
}

/// Raw protocol outcome; [`ProtocolScores::report`] condenses it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolScores {
    pub method: MethodSpec,
    pub dims: Vec<usize>,
    pub folds: Vec<FoldScores>,
    pub timings: Timings,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() < 2 {
        0.0
    } else {
        (xs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

impl ProtocolScores {
    fn fold_accuracies(&self, k: usize) -> Vec<f64> {
        self.folds.iter().map(|f| f.correct[k] as f64 / f.total as f64).collect()
    }

    fn pooled_correct(&self, k: usize) -> usize {
        self.folds.iter().map(|f| f.correct[k]).sum()
    }

    fn pooled_total(&self) -> usize {
        self.folds.iter().map(|f| f.total).sum()
    }

    /// Grid index with the most correct test samples, the smallest dimension on ties.
    fn best_index(&self) -> usize {
        (0..self.dims.len()).fold(0, |best, k| {
            if self.pooled_correct(k) > self.pooled_correct(best) {
                k
            } else {
                best
            }
        })
    }

    /// ARA, STD and pooled accuracy when every fold uses grid dimension `dims[k]`.
    pub fn at(&self, k: usize) -> DimSummary {
        let (ara, std) = mean_std(&self.fold_accuracies(k));
        DimSummary {
            dim: self.dims[k],
            ara,
            std,
            top_rate: self.pooled_correct(k) as f64 / self.pooled_total() as f64,
        }
    }

    pub fn report(&self) -> EvalReport {
        let best = self.best_index();
        let per_fold_accuracy = self.fold_accuracies(best);
        let (ara, std) = mean_std(&per_fold_accuracy);
        let curves = (0..self.dims.len())
            .map(|k| (self.dims[k], mean_std(&self.fold_accuracies(k)).0))
            .collect();
        EvalReport {
            method: self.method.name().to_string(),
            scheme: self.method.scheme(),
            beta: self.method.beta(),
            per_fold_accuracy,
            ara,
            std,
            top_rate: self.pooled_correct(best) as f64 / self.pooled_total() as f64,
            best_dim: self.dims[best],
            curves,
            wall_time_s: self.timings,
        }
    }
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub scheme: Option<WeightScheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Accuracy of each fold at `best_dim`.
    #[serde(rename = "folds")]
    pub per_fold_accuracy: Vec<f64>,
    pub ara: f64,
    /// Sample standard deviation of the fold accuracies; 0 for one fold.
    pub std: f64,
    /// Correct over total test samples at `best_dim`, the maximum over the grid.
    pub top_rate: f64,
    pub best_dim: usize,
    /// `(dimension, mean fold accuracy)` for every grid dimension.
    pub curves: Vec<(usize, f64)>,
    /// Kept out of the JSON so reruns serialize identically.
    #[serde(skip)]
    pub wall_time_s: Timings,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

/// Features stacked so that the first `unit · k` rows are the `k`-dimensional embedding.
struct Embedded {
    train: DMatrix<f64>,
    test: DMatrix<f64>,
    unit: usize,
}

fn embed_images(model: &Projection2DModel, images: &ImageDataset, idx: &[usize]) -> Result<DMatrix<f64>> {
    let (h, _) = images.shape();
    let mut out = DMatrix::zeros(h * model.components(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        // column-major: the first k columns of the h × d feature are its first h·k entries
        out.column_mut(j).copy_from_slice(embed_2d(model, &images.images()[i])?.as_slice());
    }
    Ok(out)
}

fn embed_fold(data: &EvalData, vectors: Option<&LabeledDataset>, model: &FittedModel, fold: &Fold) -> Result<Embedded> {
    match model {
        FittedModel::OneD(m) => {
            let x = vectors.expect("1D methods carry vectors").features();
            Ok(Embedded {
                train: embed(m, &x.select_columns(&fold.train))?,
                test: embed(m, &x.select_columns(&fold.test))?,
                unit: 1,
            })
        }
        FittedModel::TwoD(m) => {
            let images = data.images()?;
            Ok(Embedded {
                train: embed_images(m, images, &fold.train)?,
                test: embed_images(m, images, &fold.test)?,
                unit: images.shape().0,
            })
        }
    }
}

fn classify_at(
    emb: &Embedded,
    rows: usize,
    train_labels: &[usize],
    classifier: Classifier,
) -> Result<Vec<usize>> {
    let train = emb.train.rows(0, rows).into_owned();
    let test = emb.test.rows(0, rows).into_owned();
    match classifier {
        Classifier::Nn => nn_classify(&train, train_labels, &test),
        Classifier::Lrc => {
            let mut classes: Vec<usize> = train_labels.to_vec();
            classes.sort_unstable();
            classes.dedup();
            let spaces: Vec<ClassSubspace> = classes
                .iter()
                .map(|c| {
                    let idx: Vec<usize> = (0..train_labels.len()).filter(|&j| train_labels[j] == *c).collect();
                    ClassSubspace::new(&train.select_columns(&idx))
                })
                .collect();
            Ok(test
                .column_iter()
                .map(|q| classes[lrc_classify(&spaces, &q.into_owned()) - 1])
                .collect())
        }
    }
}

fn run_fold(
    data: &EvalData,
    vectors: Option<&LabeledDataset>,
    cfg: &MethodConfig,
    fold: &Fold,
    dims: &[usize],
) -> Result<(FoldScores, Timings)> {
    if fold.test.is_empty() {
        return Err(Error::Protocol("fold has no test samples".into()));
    }
    let labels = data.labels();
    let train_labels: Vec<usize> = fold.train.iter().map(|&i| labels[i]).collect();
    if let Some(&i) = fold.test.iter().find(|&&i| !train_labels.contains(&labels[i])) {
        return Err(Error::Protocol(format!(
            "test sample {i} has class {} which is absent from the training set",
            labels[i]
        )));
    }
    let d_max = *dims.last().expect("grid checked nonempty");

    let start = Instant::now();
    let model = match (cfg.method, vectors) {
        (MethodSpec::Glpp2d { .. }, _) => fit_on(data, cfg, &fold.train, d_max)?,
        (_, Some(v)) => FittedModel::OneD(fit_1d(&v.subset(&fold.train)?.0, cfg, d_max)?),
        (_, None) => unreachable!("vectors are prepared for 1D methods"),
    };
    let fit_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let emb = embed_fold(data, vectors, &model, fold)?;
    let truth: Vec<usize> = fold.test.iter().map(|&i| labels[i]).collect();
    let correct = dims
        .iter()
        .map(|&k| {
            let pred = classify_at(&emb, emb.unit * k, &train_labels, cfg.classifier)?;
            Ok(pred.iter().zip(&truth).filter(|(p, t)| p == t).count())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        FoldScores {
            correct,
            total: truth.len(),
        },
        Timings {
            fit_s,
            classify_s: start.elapsed().as_secs_f64(),
        },
    ))
}

fn check_dims(dims: &[usize]) -> Result<Vec<usize>> {
    if dims.is_empty() {
        return Err(Error::Config("dimension grid is empty".into()));
    }
    if dims.contains(&0) {
        return Err(Error::Config("dimension grid must hold positive values".into()));
    }
    let mut out = dims.to_vec();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Runs every fold of `plan` and keeps the per-dimension counts.
pub fn run_scores(data: &EvalData, cfg: &MethodConfig, plan: &SplitPlan, dims: &[usize]) -> Result<ProtocolScores> {
    let dims = check_dims(dims)?;
    if plan.folds.is_empty() {
        return Err(Error::Protocol("split plan has no folds".into()));
    }
    if let Some(i) = plan.folds.iter().flat_map(|f| f.train.iter().chain(&f.test)).find(|&&i| i >= data.len()) {
        return Err(Error::Protocol(format!("split refers to sample {i} of {}", data.len())));
    }
    let vectors = if cfg.method.is_2d() {
        None
    } else {
        Some(data.vectors()?)
    };
    let results: Vec<Result<(FoldScores, Timings)>> = plan
        .folds
        .par_iter()
        .map(|fold| run_fold(data, vectors.as_deref(), cfg, fold, &dims))
        .collect();

    let mut folds = Vec::with_capacity(results.len());
    let mut timings = Timings::default();
    for (i, r) in results.into_iter().enumerate() {
        let (scores, t) = r.map_err(|e| Error::Fold {
            fold: i,
            source: Box::new(e),
        })?;
        timings.fit_s += t.fit_s;
        timings.classify_s += t.classify_s;
        folds.push(scores);
    }
    Ok(ProtocolScores {
        method: cfg.method,
        dims,
        folds,
        timings,
    })
}

/// Full protocol: fit per fold on training samples only, classify the test
/// samples at each grid dimension, and summarize.
pub fn run_protocol(data: &EvalData, cfg: &MethodConfig, plan: &SplitPlan, dims: &[usize]) -> Result<EvalReport> {
    Ok(run_scores(data, cfg, plan, dims)?.report())
}

/// One protocol run per `β`, in grid order.
pub fn sweep_beta(
    data: &EvalData,
    cfg: &MethodConfig,
    plan: &SplitPlan,
    betas: &[f64],
    dims: &[usize],
) -> Result<Vec<(f64, EvalReport)>> {
    betas
        .iter()
        .map(|&b| {
            let method = cfg.method.with_beta(b)?;
            let report = run_protocol(data, &MethodConfig { method, ..*cfg }, plan, dims)?;
            Ok((b, report))
        })
        .collect()
}

/// One row of a 2D scatter export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    pub label: usize,
}

/// First two embedding coordinates of each column of `points`.
pub fn export_scatter(model: &ProjectionModel, points: &DMatrix<f64>, labels: &[usize]) -> Result<Vec<ScatterPoint>> {
    if model.components() < 2 {
        return Err(Error::shape(format!(
            "scatter export needs 2 projection columns, model has {}",
            model.components()
        )));
    }
    if points.ncols() != labels.len() {
        return Err(Error::shape(format!("{} points but {} labels", points.ncols(), labels.len())));
    }
    let y = embed(&model.truncate(2)?, points)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(j, &label)| ScatterPoint {
            x: y[(0, j)],
            y: y[(1, j)],
            label,
        })
        .collect())
}

/// Serializes rows as CSV, header taken from the field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| Error::Config(format!("CSV export failed: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("CSV export failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// `dim,accuracy` rows of a report's curves.
pub fn curves_csv(report: &EvalReport) -> Result<String> {
    #[derive(Serialize)]
    struct Row {
        dim: usize,
        accuracy: f64,
    }
    let rows: Vec<Row> = report.curves.iter().map(|&(dim, accuracy)| Row { dim, accuracy }).collect();
    to_csv(&rows)
}

/// Class means of `data` in its own feature space, labelled `1..=p`.
pub fn class_mean_points(data: &LabeledDataset) -> (DMatrix<f64>, Vec<usize>) {
    let means = crate::dataset::class_means(data).means;
    let labels = (1..=means.ncols()).collect();
    (means, labels)
}
