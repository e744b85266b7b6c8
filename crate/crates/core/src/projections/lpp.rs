use nalgebra::{DMatrix, DVector};

use super::eigen::{eig_generalized, Side, NULL_TOL};
use super::{sandwich, Method, ProjectionModel};
use crate::dataset::{class_means, LabeledDataset};
use crate::error::{Error, Result};
use crate::graph::{laplacian, mean_graph, unsupervised_graph, within_class_graph, WeightScheme};
use crate::linalg::{max_abs, symmetrize};

/// `(XLXᵀ, XDXᵀ)` for the supervised (within-class) or unsupervised graph.
pub fn lpp_operators(
    data: &LabeledDataset,
    scheme: &WeightScheme,
    supervised: bool,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x = data.features();
    let graph = if supervised {
        within_class_graph(data, scheme)?.0
    } else {
        unsupervised_graph(x, scheme)?
    };
    let lap = laplacian(&graph);
    let p = symmetrize(&sandwich(x, &lap.laplacian));
    let q = symmetrize(&sandwich(x, &lap.degree_matrix()));
    Ok((p, q))
}

/// Solves `XLXᵀw = λXDXᵀw` for the `d` smallest eigenpairs; each column
/// satisfies `wᵀXDXᵀw = 1`.
pub fn fit_lpp(data: &LabeledDataset, d: usize, scheme: &WeightScheme, supervised: bool) -> Result<ProjectionModel> {
    let (p, q) = lpp_operators(data, scheme, supervised)?;
    if max_abs(&q) == 0.0 {
        return Err(Error::DegenerateConstraint(
            "graph has no edges, so XDXᵀ is zero".into(),
        ));
    }
    let (vals, w) = eig_generalized(&p, &q, d, Side::Smallest)?;
    let mut model = ProjectionModel::new(Method::Lpp, vals, w);
    model.scheme = Some(*scheme);
    Ok(model)
}

/// `(XLXᵀ, UKUᵀ)`: the within-class locality matrix and the class-mean
/// (globality) matrix.
pub fn dlpp_operators(data: &LabeledDataset, scheme: &WeightScheme) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (num, _) = lpp_operators(data, scheme, true)?;
    let u = class_means(data);
    let k = laplacian(&mean_graph(&u, scheme)?);
    let den = symmetrize(&sandwich(&u.means, &k.laplacian));
    Ok((num, den))
}

/// Minimizes `wᵀXLXᵀw / wᵀUKUᵀw`.
///
/// The ratio is solved in its reciprocal form `UKUᵀw = μ XLXᵀw` (largest `μ`,
/// `λ = 1/μ`). Both matrices are typically singular after the PCA step, and
/// regularizing the within-class side keeps the directions that collapse
/// classes while separating their means. Columns are scaled so
/// `wᵀUKUᵀw = 1`.
pub fn fit_dlpp(data: &LabeledDataset, d: usize, scheme: &WeightScheme) -> Result<ProjectionModel> {
    if data.classes() < 2 {
        return Err(Error::Protocol(
            "DLPP needs at least two classes; the class-mean term is identically zero".into(),
        ));
    }
    let (num, den) = dlpp_operators(data, scheme)?;
    if max_abs(&den) == 0.0 {
        return Err(Error::Protocol("class-mean graph has no edges".into()));
    }
    if max_abs(&num) == 0.0 {
        return Err(Error::DegenerateConstraint("within-class graph has no edges".into()));
    }
    let (mu, mut w) = eig_generalized(&den, &num, d, Side::Largest)?;
    let available = mu.iter().filter(|&&x| x > NULL_TOL * mu[0].abs()).count();
    if !(mu[0] > 0.0) || available < d {
        return Err(Error::InsufficientRank { requested: d, available });
    }
    for (mut col, &m) in w.column_iter_mut().zip(mu.iter()) {
        let norm = col.dot(&(&den * &col));
        col /= if norm > 0.0 { norm.sqrt() } else { m.sqrt() };
    }
    let lambda = DVector::from_iterator(d, mu.iter().map(|m| 1.0 / m));
    let mut model = ProjectionModel::new(Method::Dlpp, lambda, w);
    model.scheme = Some(*scheme);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(m: usize, per: usize, classes: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = per * classes;
        let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..1.0));
        LabeledDataset::new(x, (0..n).map(|i| i / per + 1).collect()).unwrap()
    }

    #[test]
    fn one_sample_per_class_has_no_constraint() {
        let data = toy(3, 1, 4, 1);
        assert!(matches!(
            fit_lpp(&data, 1, &WeightScheme::DotProduct, true),
            Err(Error::DegenerateConstraint(_))
        ));
    }

    #[test]
    fn lpp_constraint_and_objective() {
        let data = toy(4, 6, 3, 2);
        let scheme = WeightScheme::HeatKernel { t: None };
        let model = fit_lpp(&data, 3, &scheme, true).unwrap();
        let (_, q) = lpp_operators(&data, &scheme, true).unwrap();
        let (g, _) = within_class_graph(&data, &scheme).unwrap();
        let x = data.features();
        for k in 0..3 {
            let w = model.projection.column(k);
            assert!((w.dot(&(&q * w)) - 1.0).abs() < 1e-8);
            let y: Vec<f64> = (0..data.len()).map(|i| w.dot(&x.column(i))).collect();
            let mut objective = 0.0;
            for i in 0..data.len() {
                for j in 0..data.len() {
                    objective += (y[i] - y[j]).powi(2) * g.weights[(i, j)];
                }
            }
            let want = 2.0 * model.eigenvalues[k];
            assert!((objective - want).abs() < 1e-8 * want.abs().max(1.0));
        }
    }

    #[test]
    fn dlpp_single_class() {
        let data = toy(3, 5, 1, 3);
        assert!(matches!(fit_dlpp(&data, 1, &WeightScheme::DotProduct), Err(Error::Protocol(_))));
    }

    #[test]
    fn dlpp_numerator_is_lpp_numerator() {
        let data = toy(5, 4, 3, 4);
        let (num, _) = dlpp_operators(&data, &WeightScheme::DotProduct).unwrap();
        let (p, _) = lpp_operators(&data, &WeightScheme::DotProduct, true).unwrap();
        assert_eq!(num, p);
    }

    #[test]
    fn dlpp_residual() {
        // m ≤ p - 1 keeps UKUᵀ nonsingular
        let data = toy(3, 5, 5, 5);
        let model = fit_dlpp(&data, 3, &WeightScheme::DotProduct).unwrap();
        let (num, den) = dlpp_operators(&data, &WeightScheme::DotProduct).unwrap();
        for k in 0..3 {
            let w = model.projection.column(k);
            let r = &num * w - (&den * w) * model.eigenvalues[k];
            assert!(r.norm() < 1e-8 * (num.norm() + den.norm()) * w.norm());
            assert!((w.dot(&(&den * w)) - 1.0).abs() < 1e-8);
        }
        assert!(model.eigenvalues.as_slice().windows(2).all(|p| p[0] <= p[1]));
    }
}
