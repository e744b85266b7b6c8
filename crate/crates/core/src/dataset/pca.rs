use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{eigh_ascending, fix_signs, select_columns};
use crate::serde_mat;

/// Eigenvalues at or below this fraction of the largest count as zero.
pub const PCA_NULL_TOL: f64 = 1e-10;

/// Centering plus an orthonormal principal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    #[serde(with = "serde_mat::vector")]
    pub mean: DVector<f64>,
    #[serde(with = "serde_mat::matrix")]
    pub basis: DMatrix<f64>,
    /// Sample covariance eigenvalues (`1/(n-1)` normalization), nonincreasing.
    #[serde(with = "serde_mat::vector")]
    pub eigenvalues: DVector<f64>,
    pub ratio: f64,
}

impl PcaModel {
    /// Fits on the columns of `x`, keeping the fewest components whose
    /// eigenvalue sum reaches `ratio` of the (nonzero) total.
    pub fn fit(x: &DMatrix<f64>, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Domain(format!("PCA ratio must lie in (0, 1], got {ratio}")));
        }
        let (m, n) = x.shape();
        if n < 2 {
            return Err(Error::DegenerateData("PCA needs at least 2 samples".into()));
        }
        let mean = x.column_mean();
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &mean;
        }

        let (sq, u) = if m > n { gram_axes(&centered) } else { svd_axes(centered) };
        let eig: Vec<f64> = sq.iter().map(|s| s / (n - 1) as f64).collect();

        let largest = eig.first().copied().unwrap_or(0.0);
        if !(largest > 0.0) {
            return Err(Error::DegenerateData("all samples are identical".into()));
        }
        let nonzero: Vec<f64> = eig
            .iter()
            .copied()
            .take_while(|&l| l > PCA_NULL_TOL * largest)
            .collect();
        let total: f64 = nonzero.iter().sum();
        let target = ratio * total * (1.0 - 1e-12);
        let mut acc = 0.0;
        let mut r = nonzero.len();
        for (k, l) in nonzero.iter().enumerate() {
            acc += l;
            if acc >= target {
                r = k + 1;
                break;
            }
        }

        let mut basis = orthonormalize(u.columns(0, r).into_owned());
        fix_signs(&mut basis);
        debug_assert_eq!(basis.nrows(), m);
        Ok(Self {
            mean,
            basis,
            eigenvalues: DVector::from_column_slice(&nonzero[..r]),
            ratio,
        })
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Retained dimension `r`.
    pub fn output_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Centers the columns of `x` and projects them onto the basis.
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(Error::shape(format!(
                "PCA expects {} rows, got {}",
                self.input_dim(),
                x.nrows()
            )));
        }
        let mut centered = x.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        Ok(self.basis.tr_mul(&centered))
    }
}

/// Squared singular values (descending) and matching left singular vectors.
fn svd_axes(centered: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = SVD::new(centered, true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sq = order.iter().map(|&i| svd.singular_values[i].powi(2)).collect();
    (sq, select_columns(&u, &order))
}

/// Same as [`svd_axes`] through the `n × n` Gram matrix, for `m > n`. Only
/// directions above the null threshold are lifted back to `m` dimensions.
fn gram_axes(centered: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (vals, vecs) = eigh_ascending(&centered.tr_mul(centered));
    let n = vals.len();
    let sq: Vec<f64> = (0..n).rev().map(|i| vals[i].max(0.0)).collect();
    let keep = sq.iter().take_while(|&&s| s > PCA_NULL_TOL * sq[0]).count();
    let mut v = DMatrix::zeros(n, keep);
    for (k, s) in sq.iter().take(keep).enumerate() {
        v.set_column(k, &(vecs.column(n - 1 - k) / s.sqrt()));
    }
    (sq, centered * v)
}

/// Löwdin step `U (UᵀU)^{-1/2}`: removes the round-off left by the Gram route.
fn orthonormalize(u: DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = eigh_ascending(&u.tr_mul(&u));
    let inv_sqrt = DMatrix::from_diagonal(&vals.map(|l| 1.0 / l.sqrt()));
    let s = &vecs * inv_sqrt * vecs.transpose();
    u * s
}

/// Fits PCA on `data` and returns the reduced `r × n` dataset with the same labels.
pub fn pca_preprocess(data: &LabeledDataset, ratio: f64) -> Result<(PcaModel, LabeledDataset)> {
    let model = PcaModel::fit(data.features(), ratio)?;
    let reduced = model.transform(data.features())?;
    let out = data.with_features(reduced)?;
    Ok((model, out))
}
