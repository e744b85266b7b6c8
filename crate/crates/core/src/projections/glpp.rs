use std::collections::BTreeSet;
use std::sync::Mutex;

use nalgebra::DMatrix;

use super::eigen::{eig_smallest_sym, NULL_TOL};
use super::{sandwich, Method, ProjectionModel};
use crate::dataset::{class_means, LabeledDataset};
use crate::error::{Error, Result};
use crate::graph::{laplacian, mean_graph, within_class_graph, WeightScheme};
use crate::linalg::symmetrize;

/// Default balance between the class-mean and within-class terms.
pub const DEFAULT_BETA: f64 = 10_000.0;

/// `A = 2(UKUᵀ + β Σ_c X_c L_c X_cᵀ)` and its two parts.
///
/// For any `w`, `wᵀAw` equals the class-mean objective
/// `Σ_ij (wᵀu_i − wᵀu_j)² B_ij` plus `β` times the within-class objective
/// `Σ_c Σ_{i,j∈c} (wᵀx_i − wᵀx_j)² S_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlppOperator {
    pub a: DMatrix<f64>,
    /// `U K Uᵀ` over the class means.
    pub global_part: DMatrix<f64>,
    /// `Σ_c X_c L_c X_cᵀ` over the per-class blocks.
    pub local_part: DMatrix<f64>,
    pub beta: f64,
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta must be a positive number, got {beta}")));
    }
    // once per distinct value, not once per fold
    static WARNED: Mutex<BTreeSet<u64>> = Mutex::new(BTreeSet::new());
    if beta <= 1000.0 && WARNED.lock().map(|mut w| w.insert(beta.to_bits())).unwrap_or(true) {
        log::warn!("beta = {beta} is at or below 1000; accuracy usually drops for small beta");
    }
    Ok(())
}

pub fn assemble_glpp_operator(data: &LabeledDataset, scheme: &WeightScheme, beta: f64) -> Result<GlppOperator> {
    check_beta(beta)?;
    let x = data.features();
    let means = class_means(data);
    let k = laplacian(&mean_graph(&means, scheme)?);
    let global_part = sandwich(&means.means, &k.laplacian);

    let (_, blocks) = within_class_graph(data, scheme)?;
    let mut local_part = DMatrix::zeros(data.dim(), data.dim());
    for block in &blocks {
        let xc = x.select_columns(&block.indices);
        local_part += sandwich(&xc, &laplacian(&block.graph).laplacian);
    }

    let a = symmetrize(&((&global_part + &local_part * beta) * 2.0));
    Ok(GlppOperator {
        a,
        global_part,
        local_part,
        beta,
    })
}

/// Unit-norm eigenvectors of `A` for its `d` smallest nonzero eigenvalues.
pub fn fit_glpp(data: &LabeledDataset, d: usize, scheme: &WeightScheme, beta: f64) -> Result<ProjectionModel> {
    let op = assemble_glpp_operator(data, scheme, beta)?;
    let (vals, w) = eig_smallest_sym(&op.a, d, NULL_TOL)?;
    let mut model = ProjectionModel::new(Method::Glpp, vals, w);
    model.beta = Some(beta);
    model.scheme = Some(*scheme);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::all_pairs_graph;
    use crate::linalg::eigh_ascending;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(m: usize, per: usize, classes: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = per * classes;
        let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..1.0));
        LabeledDataset::new(x, (0..n).map(|i| i / per + 1).collect()).unwrap()
    }

    #[test]
    fn one_sample_per_class_reduces_to_all_pairs() {
        let data = toy(4, 1, 6, 1);
        let op = assemble_glpp_operator(&data, &WeightScheme::DotProduct, 10.0).unwrap();
        assert_eq!(op.local_part, DMatrix::zeros(4, 4));
        let k_all = laplacian(&all_pairs_graph(data.features(), &WeightScheme::DotProduct).unwrap());
        let want = symmetrize(&(sandwich(data.features(), &k_all.laplacian) * 2.0));
        assert_eq!(op.a, want);
    }

    #[test]
    fn operator_is_symmetric_psd() {
        let data = toy(6, 5, 3, 2);
        let op = assemble_glpp_operator(&data, &WeightScheme::HeatKernel { t: None }, 100.0).unwrap();
        assert_eq!(op.a, op.a.transpose());
        let (vals, _) = eigh_ascending(&op.a);
        assert!(vals[0] >= -1e-8 * vals[vals.len() - 1]);
    }

    #[test]
    fn identical_samples_have_no_spectrum() {
        let x = DMatrix::from_element(3, 6, 0.5);
        let data = LabeledDataset::new(x, vec![1, 1, 1, 2, 2, 2]).unwrap();
        assert!(matches!(
            fit_glpp(&data, 1, &WeightScheme::DotProduct, DEFAULT_BETA),
            Err(Error::InsufficientRank { .. })
        ));
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let data = toy(3, 2, 2, 3);
        assert!(matches!(
            assemble_glpp_operator(&data, &WeightScheme::DotProduct, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn eigenvalues_equal_rayleigh_quotients() {
        let data = toy(5, 4, 3, 4);
        let scheme = WeightScheme::DotProduct;
        let model = fit_glpp(&data, 5, &scheme, DEFAULT_BETA).unwrap();
        let op = assemble_glpp_operator(&data, &scheme, DEFAULT_BETA).unwrap();
        for k in 0..5 {
            let w = model.projection.column(k);
            let q = w.dot(&(&op.a * w));
            assert!((q - model.eigenvalues[k]).abs() <= 1e-10 * model.eigenvalues[k].abs().max(1.0));
        }
        assert!(model.eigenvalues.as_slice().windows(2).all(|p| p[0] <= p[1]));
    }
}
