//! Gaussian blobs with one well-separated centre per class.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Class `c` is centred at `separation · spread · e_c` with isotropic noise of
/// standard deviation `spread`, so centres sit `√2 · separation` noise widths apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub spread: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            classes: 8,
            per_class: 20,
            dim: 16,
            separation: 50.0,
            spread: 1.0,
            seed: 7,
        }
    }
}

impl BlobSpec {
    /// Samples are class-contiguous: columns `c·per_class .. (c+1)·per_class` carry label `c + 1`.
    pub fn generate(&self) -> Result<LabeledDataset> {
        if self.classes == 0 || self.per_class == 0 {
            return Err(Error::EmptyInput);
        }
        if self.dim < self.classes {
            return Err(Error::Domain(format!(
                "blob dim {} must be at least the class count {}",
                self.dim, self.classes
            )));
        }
        if !(self.spread > 0.0 && self.spread.is_finite() && self.separation.is_finite() && self.separation >= 0.0) {
            return Err(Error::Domain("blob spread must be positive and separation nonnegative".into()));
        }
        let noise = Normal::new(0.0, self.spread).map_err(|e| Error::Domain(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.classes * self.per_class;
        let mut x = DMatrix::zeros(self.dim, n);
        let mut labels = Vec::with_capacity(n);
        for j in 0..n {
            let c = j / self.per_class;
            for r in 0..self.dim {
                x[(r, j)] = noise.sample(&mut rng);
            }
            x[(c, j)] += self.separation * self.spread;
            labels.push(c + 1);
        }
        LabeledDataset::new(x, labels)
    }
}
