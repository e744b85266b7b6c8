//! Adjacency weight graphs, degree matrices and Laplacians.
//!
//! Three weighting schemes are supported:
//!
//! * **dot-product**: samples are scaled to unit length and the weight is
//!   their cosine similarity, clamped at zero;
//! * **heat-kernel**: `exp(-‖a - b‖² / t)`, with `t` defaulting to the mean
//!   squared pairwise distance of the point set the graph is built on;
//! * **binary**: weight 1 between connected nodes. Within a class, nodes are
//!   connected when either one is among the other's `k` nearest neighbours.
//!
//! Every graph has a zero diagonal and is symmetric by construction: each
//! weight is computed once for `i < j` and written to both halves.

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::dataset::{LabeledDataset, MeanSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightScheme {
    #[default]
    DotProduct,
    /// `t = None` picks the mean squared pairwise distance of the point set.
    HeatKernel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t: Option<f64>,
    },
    Binary { k: usize },
}

impl WeightScheme {
    pub const DEFAULT_BINARY_K: usize = 5;

    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightScheme::HeatKernel { t: Some(t) } if !(t > 0.0 && t.is_finite()) => {
                Err(Error::Domain(format!("heat-kernel t must be positive, got {t}")))
            }
            WeightScheme::Binary { k: 0 } => Err(Error::Domain("binary k must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::DotProduct => "dot-product",
            WeightScheme::HeatKernel { .. } => "heat-kernel",
            WeightScheme::Binary { .. } => "binary",
        }
    }
}

/// Symmetric nonnegative adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGraph {
    pub weights: DMatrix<f64>,
    pub scheme: WeightScheme,
}

impl WeightGraph {
    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }
}

/// Within-class block `H_c` together with the samples it spans.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlock {
    pub indices: Vec<usize>,
    pub graph: WeightGraph,
}

/// Degree vector `D_ii = Σ_j S_ij` and Laplacian `L = D - S`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianPair {
    pub degree: DVector<f64>,
    pub laplacian: DMatrix<f64>,
}

impl LaplacianPair {
    pub fn degree_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.degree)
    }
}

/// Weight between two samples. Binary connectivity is decided at graph
/// level, so the pairwise value for `Binary` is always 1.
pub fn pair_weight(a: DVectorView<f64>, b: DVectorView<f64>, scheme: &WeightScheme) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    scheme.validate()?;
    match *scheme {
        WeightScheme::DotProduct => Ok(a.dot(&b).max(0.0)),
        WeightScheme::HeatKernel { t: Some(t) } => Ok((-(a - b).norm_squared() / t).exp()),
        WeightScheme::HeatKernel { t: None } => Err(Error::Domain(
            "heat-kernel bandwidth must be resolved before a pairwise call".into(),
        )),
        WeightScheme::Binary { .. } => Ok(1.0),
    }
}

/// Supervised graph: `S_ij` is the pair weight when `i` and `j` share a
/// label, otherwise 0. Also returns the per-class blocks in label order.
pub fn within_class_graph(data: &LabeledDataset, scheme: &WeightScheme) -> Result<(WeightGraph, Vec<ClassBlock>)> {
    scheme.validate()?;
    let x = data.features();
    let groups = data.class_indices();
    let n = data.len();
    let resolved = match *scheme {
        WeightScheme::HeatKernel { t: None } => {
            let pairs = groups.iter().flat_map(|g| pairs_of(g));
            WeightScheme::HeatKernel {
                t: Some(mean_sq_distance(x, pairs)),
            }
        }
        s => s,
    };
    let prepared = prepare(x, &resolved);

    let mut global = DMatrix::zeros(n, n);
    let mut blocks = Vec::with_capacity(groups.len());
    for g in groups {
        let local = block_weights(&prepared, x, &g, &resolved, true)?;
        for (a, &i) in g.iter().enumerate() {
            for (b, &j) in g.iter().enumerate() {
                global[(i, j)] = local[(a, b)];
            }
        }
        blocks.push(ClassBlock {
            indices: g,
            graph: WeightGraph {
                weights: local,
                scheme: resolved,
            },
        });
    }
    Ok((
        WeightGraph {
            weights: global,
            scheme: resolved,
        },
        blocks,
    ))
}

/// Fully connected graph over the class means.
pub fn mean_graph(means: &MeanSpace, scheme: &WeightScheme) -> Result<WeightGraph> {
    all_pairs_graph(&means.means, scheme)
}

/// Fully connected graph over the columns of `points`; binary weights are 1
/// for every pair.
pub fn all_pairs_graph(points: &DMatrix<f64>, scheme: &WeightScheme) -> Result<WeightGraph> {
    build_full(points, scheme, false)
}

/// Graph over all samples regardless of label: fully connected for the
/// dot-product and heat-kernel schemes, symmetric k-NN for binary.
pub fn unsupervised_graph(points: &DMatrix<f64>, scheme: &WeightScheme) -> Result<WeightGraph> {
    build_full(points, scheme, true)
}

fn build_full(points: &DMatrix<f64>, scheme: &WeightScheme, knn: bool) -> Result<WeightGraph> {
    scheme.validate()?;
    let idx: Vec<usize> = (0..points.ncols()).collect();
    let resolved = match *scheme {
        WeightScheme::HeatKernel { t: None } => WeightScheme::HeatKernel {
            t: Some(mean_sq_distance(points, pairs_of(&idx))),
        },
        s => s,
    };
    let prepared = prepare(points, &resolved);
    let weights = block_weights(&prepared, points, &idx, &resolved, knn)?;
    Ok(WeightGraph {
        weights,
        scheme: resolved,
    })
}

pub fn laplacian(g: &WeightGraph) -> LaplacianPair {
    let s = &g.weights;
    let degree = DVector::from_iterator(s.nrows(), s.row_iter().map(|r| r.sum()));
    let mut l = -s.clone();
    for i in 0..s.nrows() {
        l[(i, i)] += degree[i];
    }
    LaplacianPair { degree, laplacian: l }
}

/// `L ⊗ I_m`: block `(i, j)` equals `L_ij · I_m`.
pub fn kronecker_lift(l: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::Domain("identity size must be >= 1".into()));
    }
    if !l.is_square() {
        return Err(Error::shape("Kronecker lift needs a square matrix"));
    }
    Ok(l.kronecker(&DMatrix::<f64>::identity(m, m)))
}

fn pairs_of(idx: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    idx.iter()
        .enumerate()
        .flat_map(move |(a, &i)| idx[a + 1..].iter().map(move |&j| (i, j)))
}

fn mean_sq_distance(x: &DMatrix<f64>, pairs: impl Iterator<Item = (usize, usize)>) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (i, j) in pairs {
        sum += (x.column(i) - x.column(j)).norm_squared();
        count += 1;
    }
    if count == 0 || !(sum > 0.0) {
        1.0
    } else {
        sum / count as f64
    }
}

/// Dot-product weighting works on unit-length copies; zero columns stay zero.
fn prepare(x: &DMatrix<f64>, scheme: &WeightScheme) -> Option<DMatrix<f64>> {
    match scheme {
        WeightScheme::DotProduct => {
            let mut u = x.clone();
            for mut col in u.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= norm;
                }
            }
            Some(u)
        }
        _ => None,
    }
}

fn block_weights(
    prepared: &Option<DMatrix<f64>>,
    raw: &DMatrix<f64>,
    idx: &[usize],
    scheme: &WeightScheme,
    knn: bool,
) -> Result<DMatrix<f64>> {
    let k = idx.len();
    let mut s = DMatrix::zeros(k, k);
    let source = prepared.as_ref().unwrap_or(raw);
    let neighbours = match (*scheme, knn) {
        (WeightScheme::Binary { k: nn }, true) => Some(knn_sets(raw, idx, nn)),
        _ => None,
    };
    for a in 0..k {
        for b in (a + 1)..k {
            if let Some(nb) = &neighbours {
                if !(nb[a].contains(&b) || nb[b].contains(&a)) {
                    continue;
                }
            }
            let w = pair_weight(source.column(idx[a]), source.column(idx[b]), scheme)?;
            s[(a, b)] = w;
            s[(b, a)] = w;
        }
    }
    Ok(s)
}

/// For each local position, the local positions of its `nn` nearest
/// neighbours (Euclidean, ties to the lower index).
fn knn_sets(x: &DMatrix<f64>, idx: &[usize], nn: usize) -> Vec<Vec<usize>> {
    (0..idx.len())
        .map(|a| {
            let mut others: Vec<(f64, usize)> = (0..idx.len())
                .filter(|&b| b != a)
                .map(|b| ((x.column(idx[a]) - x.column(idx[b])).norm_squared(), b))
                .collect();
            others.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            others.into_iter().take(nn).map(|(_, b)| b).collect()
        })
        .collect()
}
