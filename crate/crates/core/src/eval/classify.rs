use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Singular values at or below this fraction of the largest are dropped from
/// each class basis.
pub const LRC_RCOND: f64 = 1e-10;

/// 1-NN in Euclidean distance. Ties go to the lower training index.
pub fn nn_classify(train: &DMatrix<f64>, train_labels: &[usize], test: &DMatrix<f64>) -> Result<Vec<usize>> {
    if train.ncols() == 0 {
        return Err(Error::Protocol("nearest-neighbour classifier has no training samples".into()));
    }
    if train.ncols() != train_labels.len() {
        return Err(Error::shape(format!(
            "{} training columns but {} labels",
            train.ncols(),
            train_labels.len()
        )));
    }
    if train.nrows() != test.nrows() {
        return Err(Error::shape(format!(
            "training features have {} rows, test features {}",
            train.nrows(),
            test.nrows()
        )));
    }
    Ok(test
        .column_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for (j, t) in train.column_iter().enumerate() {
                let d = t.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                if d < best.0 {
                    best = (d, j);
                }
            }
            train_labels[best.1]
        })
        .collect())
}

/// Orthonormal basis of a class's training span, one sample per column.
#[derive(Debug, Clone)]
pub struct ClassSubspace {
    basis: DMatrix<f64>,
}

impl ClassSubspace {
    pub fn new(samples: &DMatrix<f64>) -> Self {
        let svd = SVD::new(samples.clone(), true, false);
        let u = svd.u.expect("left singular vectors requested");
        let top = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| top > 0.0 && svd.singular_values[i] > LRC_RCOND * top)
            .collect();
        Self {
            basis: u.select_columns(&keep),
        }
    }

    /// `‖y − X X⁺ y‖`.
    pub fn residual(&self, y: &DVector<f64>) -> f64 {
        let fit = &self.basis * self.basis.tr_mul(y);
        (y - fit).norm()
    }
}

/// Linear regression classifier over vectors: `per_class[c]` holds class
/// `c + 1`'s samples as columns. Returns the 1-based class with the smallest
/// reconstruction residual, ties to the smallest class.
pub fn lrc_classify(per_class: &[ClassSubspace], y: &DVector<f64>) -> usize {
    let mut best = (f64::INFINITY, 1);
    for (c, space) in per_class.iter().enumerate() {
        let r = space.residual(y);
        if r < best.0 {
            best = (r, c + 1);
        }
    }
    best.1
}

/// Builds one subspace per class from `h × d` feature matrices, vectorized
/// column-major.
pub fn lrc_subspaces_2d(train_features: &[Vec<DMatrix<f64>>]) -> Result<Vec<ClassSubspace>> {
    let shape = train_features
        .iter()
        .flatten()
        .next()
        .ok_or_else(|| Error::Protocol("regression classifier has no training samples".into()))?
        .shape();
    train_features
        .iter()
        .enumerate()
        .map(|(c, feats)| {
            if feats.is_empty() {
                return Err(Error::Protocol(format!("class {} has no training samples", c + 1)));
            }
            if feats.iter().any(|f| f.shape() != shape) {
                return Err(Error::shape("training features have mixed shapes"));
            }
            let cols: Vec<DVector<f64>> = feats.iter().map(|f| DVector::from_column_slice(f.as_slice())).collect();
            Ok(ClassSubspace::new(&DMatrix::from_columns(&cols)))
        })
        .collect()
}

/// Linear regression classifier for matrix features.
pub fn lrc_classify_2d(train_features: &[Vec<DMatrix<f64>>], test: &DMatrix<f64>) -> Result<usize> {
    let spaces = lrc_subspaces_2d(train_features)?;
    let expected = train_features[0][0].shape();
    if test.shape() != expected {
        return Err(Error::shape(format!(
            "test feature is {:?}, training features are {expected:?}",
            test.shape()
        )));
    }
    Ok(lrc_classify(&spaces, &DVector::from_column_slice(test.as_slice())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nn_basic_cases() {
        let train = DMatrix::from_row_slice(1, 3, &[0.0, 2.0, 10.0]);
        let test = DMatrix::from_row_slice(1, 4, &[0.1, 1.0, 2.0, 7.0]);
        // 1.0 is equidistant from 0 and 2: lower index wins
        assert_eq!(nn_classify(&train, &[5, 6, 7], &test).unwrap(), vec![5, 5, 6, 7]);
        let one = DMatrix::from_element(2, 1, 3.0);
        let q = DMatrix::from_fn(2, 5, |r, c| (r + c) as f64);
        assert_eq!(nn_classify(&one, &[4], &q).unwrap(), vec![4; 5]);
    }

    #[test]
    fn nn_errors() {
        assert!(matches!(
            nn_classify(&DMatrix::zeros(2, 0), &[], &DMatrix::zeros(2, 1)),
            Err(Error::Protocol(_))
        ));
        assert!(nn_classify(&DMatrix::zeros(2, 1), &[1], &DMatrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn nn_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(4, 30, |_, _| rng.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..30).map(|i| i % 5 + 1).collect();
        assert_eq!(nn_classify(&x, &labels, &x).unwrap(), labels);
    }

    #[test]
    fn lrc_residual_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = DMatrix::from_fn(9, 3, |_, _| rng.random_range(-1.0..1.0));
            let y = DVector::from_fn(9, |_, _| rng.random_range(-1.0..1.0));
            let gram = x.tr_mul(&x);
            let coef = gram.cholesky().unwrap().solve(&x.tr_mul(&y));
            let oracle = (&y - &x * coef).norm();
            let got = ClassSubspace::new(&x).residual(&y);
            assert!((got - oracle).abs() < 1e-10 * y.norm());
        }
    }

    #[test]
    fn lrc_2d_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut feat = || DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let classes: Vec<Vec<DMatrix<f64>>> = (0..3).map(|_| vec![feat(), feat()]).collect();
        for (c, feats) in classes.iter().enumerate() {
            for f in feats {
                assert_eq!(lrc_classify_2d(&classes, f).unwrap(), c + 1);
            }
        }
        let single = vec![vec![feat()]];
        assert_eq!(lrc_classify_2d(&single, &feat()).unwrap(), 1);
        assert!(lrc_classify_2d(&classes, &DMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn lrc_tie_goes_to_smallest_class() {
        let same = DMatrix::from_element(2, 1, 1.0);
        let classes = vec![vec![same.clone()], vec![same.clone()]];
        assert_eq!(lrc_classify_2d(&classes, &DMatrix::from_element(2, 1, 3.0)).unwrap(), 1);
    }
}
