//! Run configuration: a TOML file with `dataset`, `features`, `method`,
//! `protocol` and `output` sections.
//!
//! ```toml
//! dataset.kind = "synthetic"
//! dataset.classes = 8
//! method.name = "glpp"
//! method.scheme = "dot-product"
//! method.beta = 10000
//! protocol.scheme = "leave-one-out"
//! protocol.dims = "1..=8"
//! output.dir = "out"
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv_dataset, load_image_tree, SplitScheme};
use crate::error::{Error, Result};
use crate::eval::{Classifier, EvalData, MethodConfig, MethodSpec};
use crate::features::{lbp_features, LbpParams};
use crate::graph::WeightScheme;
use crate::projections::DEFAULT_BETA;
use crate::synthetic::BlobSpec;
use crate::twod::Terms;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetConfig {
    Csv {
        path: PathBuf,
    },
    ImageTree {
        path: PathBuf,
        /// `(h, w)` every image is resized to.
        resize: Option<(usize, usize)>,
    },
    Synthetic(BlobSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureConfig {
    Raw,
    Lbp(LbpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub scheme: SplitScheme,
    pub seed: u64,
    pub dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write the adjacency matrices as dense CSV.
    pub dump_graph: bool,
}

/// A fully resolved configuration; serializes to the `config.echo.json` form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub features: FeatureConfig,
    pub method: MethodConfig,
    pub protocol: ProtocolConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    dataset: RawDataset,
    #[serde(default)]
    features: RawFeatures,
    #[serde(default)]
    method: RawMethod,
    #[serde(default)]
    protocol: RawProtocol,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    kind: Option<String>,
    path: Option<PathBuf>,
    resize: Option<(usize, usize)>,
    classes: Option<usize>,
    per_class: Option<usize>,
    dim: Option<usize>,
    separation: Option<f64>,
    spread: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeatures {
    kind: Option<String>,
    block: Option<usize>,
    overlap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    name: Option<String>,
    scheme: Option<String>,
    t: Option<f64>,
    k: Option<usize>,
    beta: Option<f64>,
    supervised: Option<bool>,
    pca_ratio: Option<f64>,
    classifier: Option<String>,
    terms: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    scheme: Option<String>,
    k: Option<usize>,
    n: Option<usize>,
    seed: Option<u64>,
    dims: Option<RawDims>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDims {
    List(Vec<usize>),
    Range(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    #[serde(default)]
    dump_graph: bool,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses `"a..=b"`, `"a..b"` or a comma-separated list.
pub fn parse_dims(s: &str) -> Result<Vec<usize>> {
    let num = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| bad(format!("bad dimension {t:?} in {s:?}")))
    };
    let dims = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    if dims.is_empty() || dims.contains(&0) {
        return Err(bad(format!("dimension grid {s:?} must be nonempty and positive")));
    }
    Ok(dims)
}

fn parse_scheme(m: &RawMethod) -> Result<WeightScheme> {
    let scheme = match m.scheme.as_deref().unwrap_or("dot-product") {
        "dot-product" => WeightScheme::DotProduct,
        "heat-kernel" => WeightScheme::HeatKernel { t: m.t },
        "binary" => WeightScheme::Binary {
            k: m.k.unwrap_or(WeightScheme::DEFAULT_BINARY_K),
        },
        other => return Err(bad(format!("unknown weight scheme {other:?}"))),
    };
    scheme.validate().map_err(|e| bad(e.to_string()))?;
    Ok(scheme)
}

fn parse_method(m: &RawMethod) -> Result<MethodConfig> {
    let scheme = parse_scheme(m)?;
    let beta = m.beta.unwrap_or(DEFAULT_BETA);
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(bad(format!("method.beta must be positive, got {beta}")));
    }
    let method = match m.name.as_deref().unwrap_or("glpp") {
        "pca" => MethodSpec::Pca,
        "lda" => MethodSpec::Lda,
        "lpp" => MethodSpec::Lpp {
            scheme,
            supervised: m.supervised.unwrap_or(true),
        },
        "dlpp" => MethodSpec::Dlpp { scheme },
        "glpp" => MethodSpec::Glpp { scheme, beta },
        "glpp2d" => MethodSpec::Glpp2d {
            scheme,
            beta,
            terms: match m.terms.as_deref().unwrap_or("global-and-local") {
                "global-and-local" => Terms::GlobalAndLocal,
                "local-only" => Terms::LocalOnly,
                other => return Err(bad(format!("unknown method.terms {other:?}"))),
            },
        },
        other => return Err(bad(format!("unknown method {other:?}"))),
    };
    let mut cfg = MethodConfig::new(method);
    if let Some(r) = m.pca_ratio {
        if !(r > 0.0 && r <= 1.0) {
            return Err(bad(format!("method.pca_ratio must lie in (0, 1], got {r}")));
        }
        cfg.pca_ratio = r;
    }
    if let Some(c) = &m.classifier {
        cfg.classifier = match c.as_str() {
            "nn" => Classifier::Nn,
            "lrc" => Classifier::Lrc,
            other => return Err(bad(format!("unknown classifier {other:?}"))),
        };
    }
    Ok(cfg)
}

fn parse_protocol(p: &RawProtocol) -> Result<ProtocolConfig> {
    let name = p.scheme.as_deref().unwrap_or("leave-one-out");
    let scheme = match name {
        "k-fold" => SplitScheme::KFold(p.k.unwrap_or(5)),
        "first-n-train" => SplitScheme::FirstNTrain(p.n.ok_or_else(|| bad("protocol.n is required for first-n-train"))?),
        other => SplitScheme::from_str(other).map_err(|e| bad(e.to_string()))?,
    };
    let dims = match &p.dims {
        None => return Err(bad("protocol.dims is required, e.g. \"1..=10\" or [1, 5, 10]")),
        Some(RawDims::Range(s)) => parse_dims(s)?,
        Some(RawDims::List(v)) => {
            if v.is_empty() || v.contains(&0) {
                return Err(bad("protocol.dims must be nonempty and positive"));
            }
            v.clone()
        }
    };
    Ok(ProtocolConfig {
        scheme,
        seed: p.seed.unwrap_or(0),
        dims,
    })
}

fn existing(base: &Path, p: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    let p = p.as_ref().ok_or_else(|| bad(format!("{key} is required")))?;
    let full = base.join(p);
    if !full.exists() {
        return Err(bad(format!("{key} {} does not exist", full.display())));
    }
    Ok(full)
}

impl RunConfig {
    /// Parses TOML text; relative paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;

        let d = &raw.dataset;
        let dataset = match d.kind.as_deref().unwrap_or("synthetic") {
            "csv" => DatasetConfig::Csv {
                path: existing(base, &d.path, "dataset.path")?,
            },
            "image-tree" => DatasetConfig::ImageTree {
                path: existing(base, &d.path, "dataset.path")?,
                resize: d.resize,
            },
            "synthetic" => {
                let def = BlobSpec::default();
                DatasetConfig::Synthetic(BlobSpec {
                    classes: d.classes.unwrap_or(def.classes),
                    per_class: d.per_class.unwrap_or(def.per_class),
                    dim: d.dim.unwrap_or(def.dim),
                    separation: d.separation.unwrap_or(def.separation),
                    spread: d.spread.unwrap_or(def.spread),
                    seed: d.seed.unwrap_or(def.seed),
                })
            }
            other => return Err(bad(format!("unknown dataset.kind {other:?}"))),
        };

        let f = &raw.features;
        let features = match f.kind.as_deref().unwrap_or("raw") {
            "raw" => FeatureConfig::Raw,
            "lbp" => {
                let def = LbpParams::default();
                let params = LbpParams {
                    block: f.block.unwrap_or(def.block),
                    overlap: f.overlap.unwrap_or(def.overlap),
                };
                params.stride().map_err(|e| bad(e.to_string()))?;
                FeatureConfig::Lbp(params)
            }
            other => return Err(bad(format!("unknown features.kind {other:?}"))),
        };
        if matches!(features, FeatureConfig::Lbp(_)) && !matches!(dataset, DatasetConfig::ImageTree { .. }) {
            return Err(bad("LBP features need an image-tree dataset"));
        }

        let method = parse_method(&raw.method)?;
        if method.method.is_2d()
            && (!matches!(dataset, DatasetConfig::ImageTree { .. }) || features != FeatureConfig::Raw)
        {
            return Err(bad("glpp2d needs an image-tree dataset with raw features"));
        }

        Ok(RunConfig {
            dataset,
            features,
            method,
            protocol: parse_protocol(&raw.protocol)?,
            output: OutputConfig {
                dir: base.join(raw.output.dir.unwrap_or_else(|| PathBuf::from("out"))),
                dump_graph: raw.output.dump_graph,
            },
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    /// Loads the dataset and applies the feature step.
    pub fn load_data(&self) -> Result<EvalData> {
        let data = match &self.dataset {
            DatasetConfig::Csv { path } => EvalData::Vectors(load_csv_dataset(path)?),
            DatasetConfig::ImageTree { path, resize } => EvalData::Images(load_image_tree(path, *resize)?),
            DatasetConfig::Synthetic(spec) => EvalData::Vectors(spec.generate()?),
        };
        match (self.features, data) {
            (FeatureConfig::Lbp(params), EvalData::Images(images)) => {
                Ok(EvalData::Vectors(lbp_features(&images, &params)?))
            }
            (FeatureConfig::Lbp(_), _) => Err(bad("LBP features need an image-tree dataset")),
            (FeatureConfig::Raw, data) => Ok(data),
        }
    }
}
