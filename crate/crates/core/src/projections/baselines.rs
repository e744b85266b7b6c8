use nalgebra::DMatrix;

use super::eigen::{eig_generalized, Side, NULL_TOL};
use super::{Method, ProjectionModel};
use crate::dataset::{class_means, LabeledDataset, PcaModel};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, symmetrize};

/// Top-`d` principal directions of the sample covariance.
pub fn fit_pca(data: &LabeledDataset, d: usize) -> Result<ProjectionModel> {
    let pca = PcaModel::fit(data.features(), 1.0)?;
    if d == 0 || d > pca.output_dim() {
        return Err(Error::InsufficientRank {
            requested: d,
            available: pca.output_dim(),
        });
    }
    Ok(ProjectionModel::new(
        Method::Pca,
        pca.eigenvalues.rows(0, d).into_owned(),
        pca.basis.columns(0, d).into_owned(),
    ))
}

/// Between-class and within-class scatter `(S_b, S_w)`.
pub fn scatter_matrices(data: &LabeledDataset) -> (DMatrix<f64>, DMatrix<f64>) {
    let x = data.features();
    let m = data.dim();
    let means = class_means(data).means;
    let total = x.column_mean();
    let mut sb = DMatrix::zeros(m, m);
    let mut sw = DMatrix::zeros(m, m);
    for (c, idx) in data.class_indices().iter().enumerate() {
        let diff = means.column(c) - &total;
        sb += (&diff * diff.transpose()) * idx.len() as f64;
        for &i in idx {
            let e = x.column(i) - means.column(c);
            sw += &e * e.transpose();
        }
    }
    (symmetrize(&sb), symmetrize(&sw))
}

/// Fisher discriminant directions: the `d` largest solutions of
/// `S_b w = λ S_w w`.
///
/// When the within-class scatter is necessarily singular (`m > n - p`) the
/// data is first reduced by PCA to `n - p` dimensions and the PCA basis is
/// folded into `W`.
pub fn fit_lda(data: &LabeledDataset, d: usize) -> Result<ProjectionModel> {
    let p = data.classes();
    if p < 2 {
        return Err(Error::Protocol("LDA needs at least two classes".into()));
    }
    if d == 0 || d > p - 1 {
        return Err(Error::InsufficientRank {
            requested: d,
            available: p - 1,
        });
    }
    let (n, m) = (data.len(), data.dim());
    let (work, basis) = if m > n - p {
        if n - p == 0 {
            return Err(Error::DegenerateData("LDA needs more samples than classes".into()));
        }
        let pca = PcaModel::fit(data.features(), 1.0)?;
        let keep = pca.output_dim().min(n - p);
        let basis = pca.basis.columns(0, keep).into_owned();
        let reduced = data.with_features(basis.tr_mul(data.features()))?;
        (reduced, Some(basis))
    } else {
        (data.clone(), None)
    };

    let (sb, sw) = scatter_matrices(&work);
    if max_abs(&sb) <= 1e-12 * max_abs(&sw).max(f64::MIN_POSITIVE) {
        return Err(Error::InsufficientRank {
            requested: d,
            available: 0,
        });
    }
    let (vals, v) = eig_generalized(&sb, &sw, d, Side::Largest)?;
    let available = vals.iter().filter(|&&l| l > NULL_TOL * vals[0].abs()).count();
    if vals[0] <= 0.0 || available < d {
        return Err(Error::InsufficientRank { requested: d, available });
    }
    let w = match basis {
        Some(b) => b * v,
        None => v,
    };
    Ok(ProjectionModel::new(Method::Lda, vals, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pca_on_a_line() {
        let x = DMatrix::from_fn(2, 5, |r, c| if r == 0 { c as f64 } else { 2.0 * c as f64 });
        let d = LabeledDataset::new(x, vec![1; 5]).unwrap();
        let model = fit_pca(&d, 1).unwrap();
        let w = model.projection.column(0);
        let dir = nalgebra::DVector::from_vec(vec![1.0, 2.0]).normalize();
        assert!((w.dot(&dir).abs() - 1.0).abs() < 1e-12);
        assert!(matches!(fit_pca(&d, 2), Err(Error::InsufficientRank { available: 1, .. })));
    }

    #[test]
    fn pca_columns_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(6, 20, |_, _| rng.random_range(-1.0..1.0));
        let d = LabeledDataset::new(x, vec![1; 20]).unwrap();
        let w = fit_pca(&d, 4).unwrap().projection;
        assert!((w.tr_mul(&w) - DMatrix::identity(4, 4)).amax() < 1e-10);
    }

    fn two_clouds(seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(2, 40, |r, c| {
            let centre = if c < 20 { [0.0, 0.0] } else { [10.0, 3.0] };
            centre[r] + rng.random_range(-1.0..1.0)
        });
        let labels = (0..40).map(|c| if c < 20 { 1 } else { 2 }).collect();
        LabeledDataset::new(x, labels).unwrap()
    }

    #[test]
    fn lda_separates_two_clouds() {
        let data = two_clouds(2);
        let model = fit_lda(&data, 1).unwrap();
        let y = model.projection.tr_mul(data.features());
        let stats = |range: std::ops::Range<usize>| {
            let v: Vec<f64> = range.map(|i| y[(0, i)]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (mean, var.sqrt())
        };
        let (m1, s1) = stats(0..20);
        let (m2, s2) = stats(20..40);
        assert!((m1 - m2).abs() > 5.0 * s1.max(s2));
    }

    #[test]
    fn lda_rejects_identical_means() {
        // both classes are symmetric around the origin
        let x = DMatrix::from_row_slice(2, 8, &[1., -1., 0., 0., 2., -2., 0., 0., 0., 0., 1., -1., 0., 0., 2., -2.]);
        let d = LabeledDataset::new(x, vec![1, 1, 1, 1, 2, 2, 2, 2]).unwrap();
        assert!(matches!(fit_lda(&d, 1), Err(Error::InsufficientRank { .. })));
    }

    #[test]
    fn lda_dimension_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(4, 12, |_, _| rng.random_range(-1.0..1.0));
        let d = LabeledDataset::new(x, (0..12).map(|i| i % 3 + 1).collect()).unwrap();
        assert!(fit_lda(&d, 2).is_ok());
        assert!(matches!(fit_lda(&d, 3), Err(Error::InsufficientRank { available: 2, .. })));
    }

    #[test]
    fn lda_single_class() {
        let x = DMatrix::from_fn(2, 4, |r, c| (r + c) as f64);
        let d = LabeledDataset::new(x, vec![1; 4]).unwrap();
        assert!(matches!(fit_lda(&d, 1), Err(Error::Protocol(_))));
    }

    #[test]
    fn lda_sss_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(30, 9, |_, _| rng.random_range(-1.0..1.0));
        let d = LabeledDataset::new(x, (0..9).map(|i| i % 3 + 1).collect()).unwrap();
        let model = fit_lda(&d, 2).unwrap();
        assert_eq!(model.projection.shape(), (30, 2));
    }
}
