//! 2D-GLPP: the globality-locality objective on image matrices.
//!
//! An image `g` (`h × w`) is projected on the right, `y = g·v` with `v` of
//! length `w`. Stacking the images of class `c` vertically into `G_c`
//! (`h·l_c × w`) turns the within-class objective into a quadratic form with
//! the Kronecker-lifted Laplacian:
//!
//! ```text
//! Σ_{i,j∈c} ‖g_i v − g_j v‖² S_ij = 2 vᵀ G_cᵀ (L_c ⊗ I_h) G_c v
//! ```
//!
//! and likewise for the stacked class-mean images `M` with `K ⊗ I_h`. The
//! operator is therefore `w × w`:
//!
//! ```text
//! A₂ = 2 (Mᵀ(K ⊗ I_h)M + β Σ_c G_cᵀ(L_c ⊗ I_h)G_c)
//! ```
//!
//! Pair weights between images are those of their column-major vectorized
//! forms, so `1 × w` images give exactly the vector operator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{class_means, vectorize, ImageDataset};
use crate::error::{Error, Result};
use crate::graph::{kronecker_lift, laplacian, mean_graph, within_class_graph, WeightScheme};
use crate::linalg::symmetrize;
use crate::projections::{eig_smallest_sym, NULL_TOL};
use crate::serde_mat;

/// Which terms enter the 2D operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Terms {
    /// Class-mean and within-class terms (2D-GLPP).
    #[default]
    GlobalAndLocal,
    /// Within-class term only (2D-LPP).
    LocalOnly,
}

/// Vertically stacked images per class, plus the stacked class means.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    /// `G_c`, entry `c` for class `c + 1`.
    pub per_class: Vec<DMatrix<f64>>,
    /// `M`, one mean image per class block.
    pub means: DMatrix<f64>,
}

fn stack(images: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let (h, w) = images[0].shape();
    let mut out = DMatrix::zeros(h * images.len(), w);
    for (i, im) in images.iter().enumerate() {
        out.rows_mut(i * h, h).copy_from(*im);
    }
    out
}

fn mean_images(data: &ImageDataset) -> Result<Vec<DMatrix<f64>>> {
    let (h, w) = data.shape();
    let means = class_means(&vectorize(data)?).means;
    Ok(means
        .column_iter()
        .map(|c| DMatrix::from_column_slice(h, w, c.as_slice()))
        .collect())
}

pub fn stack_by_class(data: &ImageDataset) -> Result<ImageStack> {
    let images = data.images();
    let per_class = data
        .class_indices()
        .iter()
        .map(|idx| stack(&idx.iter().map(|&i| &images[i]).collect::<Vec<_>>()))
        .collect();
    let means = mean_images(data)?;
    Ok(ImageStack {
        per_class,
        means: stack(&means.iter().collect::<Vec<_>>()),
    })
}

/// The 2D operator with its two parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator2d {
    pub a: DMatrix<f64>,
    /// `Mᵀ(K ⊗ I_h)M`
    pub global_part: DMatrix<f64>,
    /// `Σ_c G_cᵀ(L_c ⊗ I_h)G_c`
    pub local_part: DMatrix<f64>,
}

pub fn assemble_2d_operator(data: &ImageDataset, scheme: &WeightScheme, beta: f64, terms: Terms) -> Result<Operator2d> {
    crate::projections::check_beta(beta)?;
    let (h, w) = data.shape();
    let stacks = stack_by_class(data)?;
    let vectors = vectorize(data)?;

    let global_part = {
        let k = laplacian(&mean_graph(&class_means(&vectors), scheme)?);
        let z = kronecker_lift(&k.laplacian, h)?;
        crate::projections::sandwich(&stacks.means.transpose(), &z)
    };

    let (_, blocks) = within_class_graph(&vectors, scheme)?;
    let mut local_part = DMatrix::zeros(w, w);
    for (block, g) in blocks.iter().zip(&stacks.per_class) {
        let t = kronecker_lift(&laplacian(&block.graph).laplacian, h)?;
        local_part += crate::projections::sandwich(&g.transpose(), &t);
    }

    let combined = match terms {
        Terms::GlobalAndLocal => &global_part + &local_part * beta,
        Terms::LocalOnly => &local_part * beta,
    };
    Ok(Operator2d {
        a: symmetrize(&(combined * 2.0)),
        global_part,
        local_part,
    })
}

/// `A₂` for 2D-GLPP.
pub fn assemble_2d_glpp_operator(data: &ImageDataset, scheme: &WeightScheme, beta: f64) -> Result<DMatrix<f64>> {
    Ok(assemble_2d_operator(data, scheme, beta, Terms::GlobalAndLocal)?.a)
}

/// Right-acting projection `W` (`w × d`) for image matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection2DModel {
    pub method: String,
    pub two_d: bool,
    pub h: usize,
    pub w: usize,
    pub beta: f64,
    pub scheme: WeightScheme,
    pub terms: Terms,
    #[serde(with = "serde_mat::vector")]
    pub eigenvalues: DVector<f64>,
    #[serde(rename = "W", with = "serde_mat::matrix")]
    pub projection: DMatrix<f64>,
}

impl Projection2DModel {
    pub fn components(&self) -> usize {
        self.projection.ncols()
    }

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

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad model JSON: {e}")))
    }
}

/// `d` smallest nonzero eigenpairs of `A₂`. With [`Terms::LocalOnly`] this is 2D-LPP.
pub fn fit_2d_glpp(
    data: &ImageDataset,
    d: usize,
    scheme: &WeightScheme,
    beta: f64,
    terms: Terms,
) -> Result<Projection2DModel> {
    let (h, w) = data.shape();
    if d > w {
        return Err(Error::InsufficientRank {
            requested: d,
            available: w,
        });
    }
    let op = assemble_2d_operator(data, scheme, beta, terms)?;
    let (eigenvalues, projection) = eig_smallest_sym(&op.a, d, NULL_TOL)?;
    Ok(Projection2DModel {
        method: match terms {
            Terms::GlobalAndLocal => "glpp2d".into(),
            Terms::LocalOnly => "lpp2d".into(),
        },
        two_d: true,
        h,
        w,
        beta,
        scheme: *scheme,
        terms,
        eigenvalues,
        projection,
    })
}

/// `image · W`, an `h × d` feature matrix.
pub fn embed_2d(model: &Projection2DModel, image: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if image.ncols() != model.projection.nrows() {
        return Err(Error::shape(format!(
            "model expects width {}, image is {:?}",
            model.projection.nrows(),
            image.shape()
        )));
    }
    Ok(image * &model.projection)
}
