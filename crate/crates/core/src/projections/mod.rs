//! One-dimensional (vector-input) projection methods: PCA, LDA, LPP, DLPP
//! and GLPP.
//!
//! Every fit returns a [`ProjectionModel`] whose columns are ordered by
//! importance, so truncating to the first `k` columns yields the
//! `k`-dimensional model of the same fit.

mod baselines;
mod eigen;
mod glpp;
mod lpp;

pub use baselines::{fit_lda, fit_pca, scatter_matrices};
pub use eigen::{eig_generalized, eig_smallest_sym, Side, NULL_TOL, RIDGE_EPS};
pub use glpp::{assemble_glpp_operator, fit_glpp, GlppOperator, DEFAULT_BETA};
pub(crate) use glpp::check_beta;
pub use lpp::{dlpp_operators, fit_dlpp, fit_lpp, lpp_operators};

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::PcaModel;
use crate::error::{Error, Result};
use crate::graph::WeightScheme;
use crate::serde_mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Lda,
    Lpp,
    Dlpp,
    Glpp,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Pca => "pca",
            Method::Lda => "lda",
            Method::Lpp => "lpp",
            Method::Dlpp => "dlpp",
            Method::Glpp => "glpp",
        };
        f.write_str(s)
    }
}

/// Learned projection `W` (`m × d`), optionally preceded by a PCA step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionModel {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<WeightScheme>,
    /// One eigenvalue per column of `W`: ascending for the minimization
    /// methods (LPP, DLPP, GLPP), descending for PCA and LDA.
    #[serde(with = "serde_mat::vector")]
    pub eigenvalues: DVector<f64>,
    #[serde(rename = "W", with = "serde_mat::matrix")]
    pub projection: DMatrix<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_chain: Option<PcaModel>,
}

impl ProjectionModel {
    pub(crate) fn new(method: Method, eigenvalues: DVector<f64>, projection: DMatrix<f64>) -> Self {
        Self {
            method,
            beta: None,
            scheme: None,
            eigenvalues,
            projection,
            pre_chain: None,
        }
    }

    /// Number of projection columns `d`.
    pub fn components(&self) -> usize {
        self.projection.ncols()
    }

    /// Row count expected by [`embed`].
    pub fn input_dim(&self) -> usize {
        match &self.pre_chain {
            Some(p) => p.input_dim(),
            None => self.projection.nrows(),
        }
    }

    /// Keeps the first `k` columns.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.components() {
            return Err(Error::InsufficientRank {
                requested: k,
                available: self.components(),
            });
        }
        let mut out = self.clone();
        out.projection = self.projection.columns(0, k).into_owned();
        out.eigenvalues = self.eigenvalues.rows(0, k).into_owned();
        Ok(out)
    }

    /// Attaches a PCA step applied before `W`.
    pub fn with_pre_chain(mut self, pca: PcaModel) -> Result<Self> {
        if pca.output_dim() != self.projection.nrows() {
            return Err(Error::shape(format!(
                "PCA emits {} dims but W expects {}",
                pca.output_dim(),
                self.projection.nrows()
            )));
        }
        self.pre_chain = Some(pca);
        Ok(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad model JSON: {e}")))
    }
}

/// `Y = Wᵀ·pca(X)`: `d × n` embedding of the columns of `x`.
pub fn embed(model: &ProjectionModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != model.input_dim() {
        return Err(Error::shape(format!(
            "model expects {} input rows, got {}",
            model.input_dim(),
            x.nrows()
        )));
    }
    match &model.pre_chain {
        Some(pca) => Ok(model.projection.tr_mul(&pca.transform(x)?)),
        None => Ok(model.projection.tr_mul(x)),
    }
}

/// `X · L · Xᵀ`, associated left to right. Shared by every operator
/// assembly so equal inputs give bit-identical outputs.
pub(crate) fn sandwich(x: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    (x * l) * x.transpose()
}
