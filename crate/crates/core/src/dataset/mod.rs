//! Labeled sample containers, loaders, cross-validation splits and the PCA
//! pre-processing step.

mod io;
mod pca;
mod split;

pub use io::{load_csv_dataset, load_image_tree, resize_bilinear, ImageDataset};
pub use pca::{pca_preprocess, PcaModel};
pub use split::{make_splits, Fold, SplitPlan, SplitScheme};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Column-per-sample feature matrix with dense class labels in `1..=p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: DMatrix<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    /// Builds a dataset from a feature matrix (`m × n`) and labels already in `1..=p`.
    pub fn new(features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.ncols() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature columns but {} labels",
                features.ncols(),
                labels.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        let classes = *labels.iter().max().unwrap_or(&0);
        let mut seen = vec![false; classes];
        for &l in &labels {
            if l == 0 {
                return Err(Error::Domain("labels must start at 1".into()));
            }
            seen[l - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Domain(format!("class {} has no samples", missing + 1)));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    /// Builds a dataset from arbitrary integer labels, re-indexing them densely
    /// to `1..=p` in first-occurrence order.
    pub fn from_raw_labels(features: DMatrix<f64>, raw: &[i64]) -> Result<Self> {
        let labels = dense_labels(raw);
        Self::new(features, labels)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of classes `p`.
    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Feature dimension `m`.
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    /// Sample count `n`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample indices per class, in sample order. Entry `c` holds class `c + 1`.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        class_indices(&self.labels, self.classes)
    }

    /// Selects the given samples. Labels of the selection are re-indexed
    /// densely in ascending order of the original label; the returned map
    /// sends new label `k` (at position `k - 1`) back to the original label.
    pub fn subset(&self, idx: &[usize]) -> Result<(LabeledDataset, Vec<usize>)> {
        let features = self.features.select_columns(idx);
        let orig: Vec<usize> = idx.iter().map(|&i| self.labels[i]).collect();
        let (labels, map) = relabel_sorted(&orig);
        Ok((LabeledDataset::new(features, labels)?, map))
    }

    /// Replaces the features, keeping labels.
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        Self::new(features, self.labels.clone())
    }
}

pub(crate) fn class_indices(labels: &[usize], classes: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        out[l - 1].push(i);
    }
    out
}

pub(crate) fn dense_labels(raw: &[i64]) -> Vec<usize> {
    let mut seen: Vec<i64> = Vec::new();
    raw.iter()
        .map(|r| match seen.iter().position(|s| s == r) {
            Some(k) => k + 1,
            None => {
                seen.push(*r);
                seen.len()
            }
        })
        .collect()
}

pub(crate) fn relabel_sorted(orig: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut map: Vec<usize> = orig.to_vec();
    map.sort_unstable();
    map.dedup();
    let labels = orig
        .iter()
        .map(|l| map.binary_search(l).map(|k| k + 1).unwrap_or(0))
        .collect();
    (labels, map)
}

/// Class mean vectors, one column per class in label order.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanSpace {
    pub means: DMatrix<f64>,
}

pub fn class_means(data: &LabeledDataset) -> MeanSpace {
    let m = data.dim();
    let groups = data.class_indices();
    let mut means = DMatrix::zeros(m, data.classes());
    for (c, idx) in groups.iter().enumerate() {
        let mut col = means.column_mut(c);
        for &i in idx {
            col += data.features().column(i);
        }
        col /= idx.len() as f64;
    }
    MeanSpace { means }
}

/// Flattens each image column-major into one feature column.
pub fn vectorize(images: &ImageDataset) -> Result<LabeledDataset> {
    let (h, w) = images.shape();
    if images.images().iter().any(|im| im.shape() != (h, w)) {
        return Err(Error::shape("images have mixed shapes"));
    }
    let n = images.len();
    let mut features = DMatrix::zeros(h * w, n);
    for (j, im) in images.images().iter().enumerate() {
        features.column_mut(j).copy_from_slice(im.as_slice());
    }
    LabeledDataset::new(features, images.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_relabel_first_occurrence() {
        assert_eq!(dense_labels(&[5, 9, 5]), vec![1, 2, 1]);
        assert_eq!(dense_labels(&[3, 1, 2, 1]), vec![1, 2, 3, 2]);
    }

    #[test]
    fn rejects_gap_in_labels() {
        let f = DMatrix::zeros(1, 2);
        assert!(LabeledDataset::new(f, vec![1, 3]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let f = DMatrix::from_row_slice(1, 2, &[0.0, f64::NAN]);
        assert!(LabeledDataset::new(f, vec![1, 1]).is_err());
    }

    #[test]
    fn single_sample_mean_is_the_sample() {
        let f = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 4.0, 0.0, 2.0]);
        let d = LabeledDataset::new(f, vec![1, 2, 2]).unwrap();
        let u = class_means(&d);
        assert_eq!(u.means.column(0).as_slice(), &[1.0, 4.0]);
        assert_eq!(u.means.column(1).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn class_means_match_direct_summation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let labels: Vec<usize> = (0..17).map(|i| i % 3 + 1).collect();
        let f = DMatrix::from_fn(4, 17, |_, _| rng.random_range(-1.0..1.0));
        let d = LabeledDataset::new(f.clone(), labels.clone()).unwrap();
        let u = class_means(&d);
        for c in 1..=3 {
            for r in 0..4 {
                let (mut s, mut k) = (0.0, 0.0);
                for j in 0..17 {
                    if labels[j] == c {
                        s += f[(r, j)];
                        k += 1.0;
                    }
                }
                let want: f64 = s / k;
                assert!((u.means[(r, c - 1)] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn subset_relabels_and_maps_back() {
        let f = DMatrix::from_fn(1, 6, |_, j| j as f64);
        let d = LabeledDataset::new(f, vec![1, 1, 2, 2, 3, 3]).unwrap();
        let (s, map) = d.subset(&[0, 4, 5]).unwrap();
        assert_eq!(s.labels(), &[1, 2, 2]);
        assert_eq!(map, vec![1, 3]);
        assert_eq!(s.features()[(0, 1)], 4.0);
    }

    #[test]
    fn vectorize_is_column_major() {
        let im = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let set = ImageDataset::new(vec![im.clone()], vec![1]).unwrap();
        let v = vectorize(&set).unwrap();
        assert_eq!(v.features().column(0).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        let back = DMatrix::from_column_slice(2, 2, v.features().column(0).as_slice());
        assert_eq!(back, im);
    }
}
