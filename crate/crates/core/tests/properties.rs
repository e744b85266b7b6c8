use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use subspace_lab::dataset::{class_means, make_splits, ImageDataset, LabeledDataset, PcaModel, SplitScheme};
use subspace_lab::eval::{fit_on, nn_classify, EvalData, FittedModel, MethodConfig, MethodSpec};
use subspace_lab::features::{lbp_block_histograms, lbp_code_map, LbpParams, LBP_BINS};
use subspace_lab::graph::{kronecker_lift, laplacian, within_class_graph, WeightScheme};
use subspace_lab::linalg::eigh_ascending;
use subspace_lab::projections::{assemble_glpp_operator, eig_smallest_sym, NULL_TOL};
use subspace_lab::twod::assemble_2d_glpp_operator;

fn scheme_strategy() -> impl Strategy<Value = WeightScheme> {
    prop_oneof![
        Just(WeightScheme::DotProduct),
        Just(WeightScheme::HeatKernel { t: None }),
        (0.1f64..10.0).prop_map(|t| WeightScheme::HeatKernel { t: Some(t) }),
        (1usize..6).prop_map(|k| WeightScheme::Binary { k }),
    ]
}

fn random_dataset(seed: u64, m: usize, classes: usize, per: usize) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = classes * per;
    let x = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    // labels interleaved so class blocks are not contiguous
    LabeledDataset::new(x, (0..n).map(|i| i % classes + 1).collect()).unwrap()
}

fn random_labels(seed: u64, classes: usize, per: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..classes * per).map(|i| i / per + 1).collect();
    for i in (1..labels.len()).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels
}

fn double_sum(y: &[f64], s: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..y.len() {
        for j in 0..y.len() {
            acc += (y[i] - y[j]).powi(2) * s[(i, j)];
        }
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn within_class_graph_symmetric_and_blocked(seed in any::<u64>(), scheme in scheme_strategy(),
                                                m in 2usize..6, classes in 1usize..4, per in 2usize..6) {
        let data = random_dataset(seed, m, classes, per);
        let (g, _) = within_class_graph(&data, &scheme).unwrap();
        prop_assert_eq!(&g.weights, &g.weights.transpose());
        for i in 0..data.len() {
            for j in 0..data.len() {
                if data.labels()[i] != data.labels()[j] {
                    prop_assert_eq!(g.weights[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn laplacian_zero_rows_and_psd(seed in any::<u64>(), scheme in scheme_strategy(),
                                   m in 2usize..6, classes in 1usize..4, per in 2usize..6) {
        let data = random_dataset(seed, m, classes, per);
        let (g, _) = within_class_graph(&data, &scheme).unwrap();
        let l = laplacian(&g).laplacian;
        let max_s = g.weights.amax();
        for r in 0..l.nrows() {
            prop_assert!(l.row(r).sum().abs() < 1e-10 * (1.0 + max_s));
        }
        let (vals, _) = eigh_ascending(&l);
        prop_assert!(vals[0] >= -1e-8 * vals[vals.len() - 1].abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn quadratic_form_identity(seed in any::<u64>(), scheme in scheme_strategy(),
                               m in 1usize..8, classes in 1usize..4, per in 2usize..6) {
        let data = random_dataset(seed, m, classes, per);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let w = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let (g, _) = within_class_graph(&data, &scheme).unwrap();
        let x = data.features();
        let y: Vec<f64> = (0..data.len()).map(|i| w.dot(&x.column(i))).collect();
        let brute = double_sum(&y, &g.weights);
        let l = laplacian(&g).laplacian;
        let xw = x.tr_mul(&w);
        let form = 2.0 * xw.dot(&(&l * &xw));
        prop_assert!((brute - form).abs() <= 1e-8 * brute.abs().max(1e-12));
    }

    #[test]
    fn kronecker_identity(seed in any::<u64>(), n in 2usize..6, h in 1usize..4, w in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let images: Vec<DMatrix<f64>> =
            (0..n).map(|_| DMatrix::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0))).collect();
        let mut s = DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..1.0));
        s = (&s + s.transpose()) * 0.5;
        let v = DVector::from_fn(w, |_, _| rng.random_range(-1.0..1.0));
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..n {
                brute += (&images[i] * &v - &images[j] * &v).norm_squared() * s[(i, j)];
            }
        }
        let mut g = DMatrix::zeros(n * h, w);
        for (i, im) in images.iter().enumerate() {
            g.rows_mut(i * h, h).copy_from(im);
        }
        let l = DMatrix::from_diagonal(&s.column_sum()) - &s;
        let t = kronecker_lift(&l, h).unwrap();
        let gv = &g * &v;
        let form = 2.0 * gv.dot(&(&t * &gv));
        prop_assert!((brute - form).abs() <= 1e-8 * brute.abs().max(1e-12));
    }

    #[test]
    fn eigenvectors_scale_covariant(seed in any::<u64>(), m in 2usize..7, gamma in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let a = b.tr_mul(&b) + DMatrix::identity(m, m) * 0.1;
        let (v1, w1) = eig_smallest_sym(&a, m, NULL_TOL).unwrap();
        let (v2, w2) = eig_smallest_sym(&(&a * gamma), m, NULL_TOL).unwrap();
        prop_assert!((&w1 - &w2).amax() < 1e-8);
        prop_assert!((v1 * gamma - v2).amax() < 1e-8 * gamma * a.amax());
        for col in w1.column_iter() {
            let k = col.iamax();
            prop_assert!(col[k] > 0.0);
        }
    }

    #[test]
    fn splits_deterministic_and_covering(seed in any::<u64>(), classes in 1usize..5, per in 2usize..7,
                                         k in 2usize..5) {
        let labels = random_labels(seed, classes, per);
        for scheme in [SplitScheme::LeaveOneOut, SplitScheme::KFold(k), SplitScheme::TwoFold] {
            let a = make_splits(&labels, scheme, seed).unwrap();
            let b = make_splits(&labels, scheme, seed).unwrap();
            prop_assert_eq!(a.to_json(), b.to_json());
            let mut seen = vec![0usize; labels.len()];
            for fold in &a.folds {
                for &i in &fold.test {
                    seen[i] += 1;
                }
                let mut all: Vec<usize> = fold.train.iter().chain(&fold.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn lbp_shift_invariance_and_range(seed in any::<u64>(), h in 3usize..20, w in 3usize..20, shift in -50i32..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // integer grey levels so the shift is exact
        let im = DMatrix::from_fn(h, w, |_, _| rng.random_range(0..8) as f64);
        let shifted = im.map(|v| v + shift as f64);
        let a = lbp_code_map(&im).unwrap();
        prop_assert_eq!(&a, &lbp_code_map(&shifted).unwrap());
        prop_assert!(a.iter().all(|&b| (b as usize) < LBP_BINS));
    }

    #[test]
    fn lbp_dimension_formula(seed in any::<u64>(), h in 8usize..40, w in 8usize..40,
                             block in 2usize..8, half in any::<bool>()) {
        let overlap = if half && block % 2 == 0 { 0.5 } else { 0.0 };
        let params = LbpParams { block, overlap };
        let stride = params.stride().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let im = DMatrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0));
        let f = lbp_block_histograms(&im, &params).unwrap();
        let by = (h - block) / stride + 1;
        let bx = (w - block) / stride + 1;
        prop_assert_eq!(f.len(), LBP_BINS * by * bx);
        for b in 0..by * bx {
            let mass: f64 = f.rows(b * LBP_BINS, LBP_BINS).sum();
            prop_assert!((mass - 1.0).abs() < 1e-12 || mass == 0.0);
        }
    }

    #[test]
    fn means_commute_with_pca(seed in any::<u64>(), m in 2usize..8, classes in 1usize..4, per in 2usize..5) {
        let data = random_dataset(seed, m, classes, per);
        let pca = PcaModel::fit(data.features(), 1.0).unwrap();
        let projected_means = pca.transform(&class_means(&data).means).unwrap();
        let reduced = data.with_features(pca.transform(data.features()).unwrap()).unwrap();
        let means_of_projected = class_means(&reduced).means;
        let scale = projected_means.amax().max(1.0);
        prop_assert!((projected_means - means_of_projected).amax() < 1e-10 * scale);
        let centred = pca.transform(&DMatrix::from_column_slice(m, 1, pca.mean.as_slice())).unwrap();
        prop_assert!(centred.amax() < 1e-10 * data.features().amax());
    }
}

#[test]
fn two_d_on_single_row_images_matches_vector_operator() {
    let data = random_dataset(3, 5, 3, 4);
    let images: Vec<DMatrix<f64>> = (0..data.len())
        .map(|j| DMatrix::from_row_slice(1, 5, data.features().column(j).as_slice()))
        .collect();
    let images = ImageDataset::new(images, data.labels().to_vec()).unwrap();
    for scheme in [
        WeightScheme::DotProduct,
        WeightScheme::HeatKernel { t: None },
        WeightScheme::Binary { k: 2 },
    ] {
        let a2 = assemble_2d_glpp_operator(&images, &scheme, 1e4).unwrap();
        let a1 = assemble_glpp_operator(&data, &scheme, 1e4).unwrap().a;
        assert_eq!(a2, a1, "{scheme:?}");
    }
}

#[test]
fn two_d_operator_is_w_by_w() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (n, h, w, p) in [(6, 2, 3, 2), (9, 5, 4, 3), (4, 7, 2, 4)] {
        let images: Vec<DMatrix<f64>> =
            (0..n).map(|_| DMatrix::from_fn(h, w, |_, _| rng.random_range(0.0..1.0))).collect();
        let labels = (0..n).map(|i| i % p + 1).collect();
        let data = ImageDataset::new(images, labels).unwrap();
        let a = assemble_2d_glpp_operator(&data, &WeightScheme::DotProduct, 1e4).unwrap();
        assert_eq!(a.shape(), (w, w));
    }
}

#[test]
fn fitting_ignores_test_samples() {
    let data = random_dataset(5, 6, 3, 6);
    let plan = make_splits(data.labels(), SplitScheme::KFold(3), 2).unwrap();
    let fold = &plan.folds[0];
    let cfg = MethodConfig::new(MethodSpec::Glpp {
        scheme: WeightScheme::DotProduct,
        beta: 1e4,
    });
    let before = fit_on(&EvalData::Vectors(data.clone()), &cfg, &fold.train, 3).unwrap();

    let mut noisy = data.features().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for &i in &fold.test {
        for r in 0..noisy.nrows() {
            noisy[(r, i)] = rng.random_range(-100.0..100.0);
        }
    }
    let noisy = data.with_features(noisy).unwrap();
    let after = fit_on(&EvalData::Vectors(noisy.clone()), &cfg, &fold.train, 3).unwrap();
    assert_eq!(before, after);

    // the predictions on the replaced test samples do change
    let (FittedModel::OneD(model), FittedModel::OneD(_)) = (&before, &after) else {
        unreachable!()
    };
    let embed = |x: &DMatrix<f64>| subspace_lab::projections::embed(model, x).unwrap();
    let train_labels: Vec<usize> = fold.train.iter().map(|&i| data.labels()[i]).collect();
    let train = embed(&data.features().select_columns(&fold.train));
    let clean = nn_classify(&train, &train_labels, &embed(&data.features().select_columns(&fold.test))).unwrap();
    let dirty = nn_classify(&train, &train_labels, &embed(&noisy.features().select_columns(&fold.test))).unwrap();
    assert_ne!(clean, dirty);
}

#[test]
fn nn_self_consistency_on_distinct_samples() {
    let data = random_dataset(7, 4, 5, 5);
    let pred = nn_classify(data.features(), data.labels(), data.features()).unwrap();
    assert_eq!(pred, data.labels());
}
