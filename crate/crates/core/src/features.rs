//! Uniform local binary pattern (59-bin) block histograms.
//!
//! Each interior pixel gets an 8-bit code from its 3×3 neighbourhood. The
//! neighbours are visited clockwise from the top-left corner,
//!
//! ```text
//! 0  1  2
//! 7  c  3
//! 6  5  4
//! ```
//!
//! and bit `i` is set when neighbour `i` is `>=` the centre. Codes with at
//! most two circular 0/1 transitions are "uniform"; there are 58 of them and
//! each gets its own bin (ascending code order). Every other code lands in
//! bin 58.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{ImageDataset, LabeledDataset};
use crate::error::{Error, Result};

pub const LBP_BINS: usize = 59;
const NON_UNIFORM_BIN: u8 = 58;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbpParams {
    /// Block side in pixels.
    pub block: usize,
    /// Fraction of a block shared with its neighbour, in `[0, 1)`.
    pub overlap: f64,
}

impl Default for LbpParams {
    fn default() -> Self {
        Self {
            block: 16,
            overlap: 0.5,
        }
    }
}

impl LbpParams {
    /// Step between block origins; must be a positive whole number of pixels.
    pub fn stride(&self) -> Result<usize> {
        if self.block == 0 {
            return Err(Error::Domain("LBP block must be at least 1 pixel".into()));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Domain(format!("LBP overlap must lie in [0, 1), got {}", self.overlap)));
        }
        let stride = self.block as f64 * (1.0 - self.overlap);
        let rounded = stride.round();
        if rounded < 1.0 || (stride - rounded).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "block {} with overlap {} gives a non-integer stride {stride}",
                self.block, self.overlap
            )));
        }
        Ok(rounded as usize)
    }

    /// Blocks along an axis of `side` pixels; trailing partial blocks are dropped.
    pub fn blocks_along(&self, side: usize) -> Result<usize> {
        if self.block > side {
            return Err(Error::shape(format!("block {} exceeds image side {side}", self.block)));
        }
        Ok((side - self.block) / self.stride()? + 1)
    }

    /// Length of the feature vector for an `h × w` image.
    pub fn feature_len(&self, h: usize, w: usize) -> Result<usize> {
        Ok(LBP_BINS * self.blocks_along(h)? * self.blocks_along(w)?)
    }
}

/// Number of circular 0/1 transitions in an 8-bit code.
pub fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

pub fn is_uniform(code: u8) -> bool {
    transitions(code) <= 2
}

/// Lookup from raw code to bin index.
pub fn bin_table() -> &'static [u8; 256] {
    static TABLE: OnceLock<[u8; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [NON_UNIFORM_BIN; 256];
        let mut next = 0u8;
        for code in 0..=255u8 {
            if is_uniform(code) {
                table[code as usize] = next;
                next += 1;
            }
        }
        debug_assert_eq!(next, NON_UNIFORM_BIN);
        table
    })
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

/// Raw 8-bit LBP code of interior pixel `(r, c)`.
pub fn lbp_code(image: &DMatrix<f64>, r: usize, c: usize) -> u8 {
    let centre = image[(r, c)];
    NEIGHBOURS.iter().enumerate().fold(0u8, |code, (bit, &(dr, dc))| {
        let v = image[((r as isize + dr) as usize, (c as isize + dc) as usize)];
        if v >= centre {
            code | (1 << bit)
        } else {
            code
        }
    })
}

/// Bin index (0..=58) for every interior pixel: an `(h−2) × (w−2)` map.
pub fn lbp_code_map(image: &DMatrix<f64>) -> Result<DMatrix<u8>> {
    let (h, w) = image.shape();
    if h < 3 || w < 3 {
        return Err(Error::shape(format!("LBP needs at least 3×3 pixels, got {h}×{w}")));
    }
    let table = bin_table();
    Ok(DMatrix::from_fn(h - 2, w - 2, |r, c| table[lbp_code(image, r + 1, c + 1) as usize]))
}

/// Concatenated, per-block L1-normalized 59-bin histograms in row-major
/// block order. Blocks are laid out on the image grid; each counts the
/// interior pixels it covers.
pub fn lbp_block_histograms(image: &DMatrix<f64>, params: &LbpParams) -> Result<DVector<f64>> {
    let (h, w) = image.shape();
    let stride = params.stride()?;
    let (by, bx) = (params.blocks_along(h)?, params.blocks_along(w)?);
    let codes = lbp_code_map(image)?;
    let mut out = DVector::zeros(LBP_BINS * by * bx);
    for i in 0..by {
        for j in 0..bx {
            let base = (i * bx + j) * LBP_BINS;
            let (r0, c0) = (i * stride, j * stride);
            // image rows [r0, r0 + block) ∩ interior [1, h − 1), shifted into code-map coordinates
            let rows = r0.max(1) - 1..(r0 + params.block).min(h - 1) - 1;
            let cols = c0.max(1) - 1..(c0 + params.block).min(w - 1) - 1;
            let mut total = 0usize;
            for r in rows {
                for c in cols.clone() {
                    out[base + codes[(r, c)] as usize] += 1.0;
                    total += 1;
                }
            }
            if total > 0 {
                out.rows_mut(base, LBP_BINS).scale_mut(1.0 / total as f64);
            }
        }
    }
    Ok(out)
}

/// LBP feature vectors for every image, labels unchanged.
pub fn lbp_features(data: &ImageDataset, params: &LbpParams) -> Result<LabeledDataset> {
    let (h, w) = data.shape();
    let len = params.feature_len(h, w)?;
    let mut features = DMatrix::zeros(len, data.len());
    for (j, im) in data.images().iter().enumerate() {
        features.set_column(j, &lbp_block_histograms(im, params)?);
    }
    LabeledDataset::new(features, data.labels().to_vec())
}
