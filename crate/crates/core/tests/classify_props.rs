//! Classifier, fold and cross-validation properties.

use natid_core::classify::{
    cross_validate, micro_accuracy, predict, stratified_kfold, train, train_with_labels,
    ClassifierKind, Hyperparams, TrainedModel,
};
use natid_core::features::{FeatureFamily, FeatureMatrix, FeatureValues};
use natid_core::{Error, StanceLabel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use StanceLabel::{AI, PI};

fn dense(family: FeatureFamily, rows: &[Vec<f64>], labels: &[StanceLabel]) -> FeatureMatrix {
    let d = rows.first().map_or(0, Vec::len);
    FeatureMatrix::new(
        family,
        (0..rows.len()).map(|i| format!("r{i:04}")).collect(),
        (0..d).map(|c| format!("c{c}")).collect(),
        FeatureValues::Dense(rows.iter().flatten().copied().collect()),
        labels.iter().map(|l| Some(*l)).collect(),
    )
    .unwrap()
}

fn clouds(seed: u64, n: usize, separation: f64) -> (Vec<Vec<f64>>, Vec<StanceLabel>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let (label, centre) = if i % 2 == 0 { (PI, separation) } else { (AI, -separation) };
        rows.push(vec![centre + noise.sample(&mut rng), centre + noise.sample(&mut rng)]);
        labels.push(label);
    }
    (rows, labels)
}

fn accuracy(predicted: &[StanceLabel], truth: &[StanceLabel]) -> f64 {
    predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

#[test]
fn separable_clouds_are_learned_by_every_kind() {
    for seed in 0..5 {
        let (rows, labels) = clouds(seed, 100, 4.0);
        let m = dense(FeatureFamily::Timeline, &rows, &labels);
        for kind in ClassifierKind::ALL {
            let model = train(kind, &m, &Hyperparams::default(), seed).unwrap();
            let acc = accuracy(&predict(&model, &m).unwrap(), &labels);
            assert!(acc >= 0.99, "{kind} seed {seed}: {acc}");
        }
    }
}

#[test]
fn maxent_cannot_fit_xor() {
    let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let labels = [PI, PI, AI, AI];
    let m = dense(FeatureFamily::Timeline, &rows, &labels);
    let model = train(ClassifierKind::MaxEnt, &m, &Hyperparams::default(), 0).unwrap();
    assert!(accuracy(&predict(&model, &m).unwrap(), &labels) <= 0.75);
}

#[test]
fn bernoulli_nb_matches_hand_posterior() {
    let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 1.0]];
    let labels = [PI, PI, AI, AI];
    let m = dense(FeatureFamily::Network, &rows, &labels);
    let model = train(ClassifierKind::NaiveBayes, &m, &Hyperparams::default(), 0).unwrap();

    // Laplace-smoothed P(x_c = 1 | class) = (ones + 1) / (n_class + 2).
    let p_pi = [(2.0 + 1.0) / 4.0, (1.0 + 1.0) / 4.0];
    let p_ai = [(0.0 + 1.0) / 4.0, (1.0 + 1.0) / 4.0];
    let loglik = |p: [f64; 2], x: [f64; 2]| -> f64 {
        (0..2).map(|c| if x[c] == 1.0 { p[c].ln() } else { (1.0 - p[c]).ln() }).sum::<f64>() + 0.5f64.ln()
    };
    for (row, truth) in rows.iter().zip(labels) {
        let x = [row[0], row[1]];
        let oracle = if loglik(p_pi, x) >= loglik(p_ai, x) { PI } else { AI };
        assert_eq!(oracle, truth);
    }
    let probe = dense(FeatureFamily::Network, &[vec![1.0, 0.0]], &[PI]);
    assert_eq!(predict(&model, &probe).unwrap(), vec![PI]);
    assert_eq!(predict(&model, &m).unwrap(), labels.to_vec());
}

#[test]
fn prediction_edge_cases() {
    let (rows, labels) = clouds(1, 40, 3.0);
    let m = dense(FeatureFamily::Timeline, &rows, &labels);
    let model = train(ClassifierKind::RandomForest, &m, &Hyperparams::default(), 9).unwrap();
    let empty = dense(FeatureFamily::Timeline, &[], &[]);
    let empty = FeatureMatrix { columns: m.columns.clone(), ..empty };
    assert!(predict(&model, &empty).unwrap().is_empty());
    assert_eq!(predict(&model, &m).unwrap(), predict(&model, &m).unwrap());

    let wide = dense(FeatureFamily::Timeline, &[vec![0.0; 3]], &[PI]);
    assert!(matches!(predict(&model, &wide), Err(Error::WidthMismatch { .. })));
    let hyper = Hyperparams { expected_width: Some(5), ..Hyperparams::default() };
    assert!(matches!(train(ClassifierKind::MaxEnt, &m, &hyper, 0), Err(Error::WidthMismatch { .. })));
    let one_class = dense(FeatureFamily::Timeline, &rows[..2], &[PI, PI]);
    assert!(matches!(train(ClassifierKind::LinearSvm, &one_class, &Hyperparams::default(), 0), Err(Error::SingleClass)));
}

#[test]
fn saved_models_predict_identically() {
    let (rows, labels) = clouds(2, 60, 1.0);
    let m = dense(FeatureFamily::Timeline, &rows, &labels);
    let dir = tempfile::tempdir().unwrap();
    for kind in ClassifierKind::ALL {
        let model = train(kind, &m, &Hyperparams::default(), 4).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        model.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(predict(&back, &m).unwrap(), predict(&model, &m).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn predictions_follow_row_permutations(seed in any::<u64>()) {
        let (rows, labels) = clouds(seed, 60, 0.7);
        let train_m = dense(FeatureFamily::Timeline, &rows, &labels);
        let (test_rows, test_labels) = clouds(seed ^ 1, 30, 0.7);
        let mut order: Vec<usize> = (0..30).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let test = dense(FeatureFamily::Timeline, &test_rows, &test_labels);
        let permuted = test.select_rows(&order);
        for kind in ClassifierKind::ALL {
            let model = train(kind, &train_m, &Hyperparams { rf_trees: 15, ..Hyperparams::default() }, seed).unwrap();
            let base = predict(&model, &test).unwrap();
            let moved = predict(&model, &permuted).unwrap();
            let expected: Vec<StanceLabel> = order.iter().map(|&i| base[i]).collect();
            prop_assert_eq!(moved, expected);
        }
    }

    #[test]
    fn naive_bayes_ignores_row_duplication(seed in any::<u64>(), binary in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let family = if binary { FeatureFamily::Network } else { FeatureFamily::Timeline };
        let n = 30;
        let labels: Vec<StanceLabel> = (0..n).map(|i| if i % 3 == 0 { AI } else { PI }).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..6)
                    .map(|c| {
                        if binary {
                            rng.gen_bool(if labels[i] == PI && c < 3 { 0.7 } else { 0.3 }) as u8 as f64
                        } else {
                            rng.gen_range(-2.0..2.0) + if labels[i] == PI { 0.5 } else { 0.0 }
                        }
                    })
                    .collect()
            })
            .collect();
        let once = dense(family, &rows, &labels);
        let doubled_rows: Vec<Vec<f64>> = rows.iter().chain(&rows).cloned().collect();
        let doubled_labels: Vec<StanceLabel> = labels.iter().chain(&labels).copied().collect();
        let twice = dense(family, &doubled_rows, &doubled_labels);
        let probe_rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..6).map(|_| if binary { rng.gen_bool(0.5) as u8 as f64 } else { rng.gen_range(-3.0..3.0) }).collect())
            .collect();
        let probe = dense(family, &probe_rows, &vec![PI; 40]);
        let h = Hyperparams::default();
        // Additive smoothing is a pseudo-count, so it doubles with the data.
        let h2 = if binary { Hyperparams { nb_alpha: 2.0 * h.nb_alpha, ..h.clone() } } else { h.clone() };
        let a = predict(&train(ClassifierKind::NaiveBayes, &once, &h, 0).unwrap(), &probe).unwrap();
        let b = predict(&train(ClassifierKind::NaiveBayes, &twice, &h2, 0).unwrap(), &probe).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn single_unbounded_tree_memorises_training_rows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..60);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.gen_range(0..5) as f64).collect()).collect();
        // Identical feature rows must share a label for memorisation to be possible.
        let labels: Vec<StanceLabel> = rows
            .iter()
            .map(|r| if (r.iter().sum::<f64>() as u64 + seed) % 2 == 0 { PI } else { AI })
            .collect();
        prop_assume!(labels.contains(&PI) && labels.contains(&AI));
        let m = dense(FeatureFamily::Timeline, &rows, &labels);
        let h = Hyperparams { rf_trees: 1, rf_max_depth: None, rf_bootstrap: false, ..Hyperparams::default() };
        let model = train(ClassifierKind::RandomForest, &m, &h, seed).unwrap();
        prop_assert_eq!(predict(&model, &m).unwrap(), labels);
    }

    #[test]
    fn folds_partition_and_stay_proportional(seed in any::<u64>(), n_pi in 5usize..80, n_ai in 5usize..80, k in 2usize..=5) {
        let mut labels: Vec<StanceLabel> = vec![PI; n_pi];
        labels.extend(vec![AI; n_ai]);
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let folds = stratified_kfold(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        for fold in &folds {
            for (class, total) in [(PI, n_pi), (AI, n_ai)] {
                let got = fold.iter().filter(|&&i| labels[i] == class).count() as f64;
                prop_assert!((got - total as f64 / k as f64).abs() < 1.0 + 1e-9);
            }
        }
    }
}

#[test]
fn fold_examples() {
    let labels: Vec<StanceLabel> = (0..100).map(|i| if i < 60 { PI } else { AI }).collect();
    for fold in stratified_kfold(&labels, 10, 3).unwrap() {
        let pi = fold.iter().filter(|&&i| labels[i] == PI).count();
        assert_eq!((pi, fold.len() - pi), (6, 4));
    }
    let labels: Vec<StanceLabel> = (0..20).map(|i| if i < 13 { PI } else { AI }).collect();
    for fold in stratified_kfold(&labels, 5, 3).unwrap() {
        let pi = fold.iter().filter(|&&i| labels[i] == PI).count();
        assert!((2..=3).contains(&pi) && (1..=2).contains(&(fold.len() - pi)));
    }
    assert!(stratified_kfold(&labels[..16], 5, 0).is_err());
    assert!(stratified_kfold(&labels, 1, 0).is_err());
}

#[test]
fn micro_accuracy_pools_counts() {
    assert_eq!(micro_accuracy(&[(9, 10); 10]), 0.9);
    assert_eq!(micro_accuracy(&[(1, 1), (0, 3)]), 0.25);
}

#[test]
fn cross_validation_reports_pooled_accuracy() {
    for seed in 0..5 {
        let (rows, labels) = clouds(seed, 200, 5.0);
        let m = dense(FeatureFamily::Timeline, &rows, &labels);
        let r = cross_validate(&m, ClassifierKind::MaxEnt, 10, seed, &Hyperparams::default()).unwrap();
        let (c, t) = r.folds.iter().fold((0, 0), |(c, t), f| (c + f.0, t + f.1));
        assert_eq!(r.micro_accuracy, c as f64 / t as f64);
        assert_eq!(t, 200);
        assert!(r.micro_accuracy >= 0.99);
    }
}

#[test]
fn constant_features_give_majority_rate() {
    let labels: Vec<StanceLabel> = (0..100).map(|i| if i % 10 < 7 { PI } else { AI }).collect();
    let rows = vec![vec![1.0, 1.0]; 100];
    let m = dense(FeatureFamily::Timeline, &rows, &labels);
    for kind in ClassifierKind::ALL {
        let r = cross_validate(&m, kind, 10, 0, &Hyperparams::default()).unwrap();
        assert!((r.micro_accuracy - 0.7).abs() <= 0.05, "{kind}: {}", r.micro_accuracy);
    }
}

#[test]
fn unlabelled_rows_are_skipped_in_training() {
    let (rows, labels) = clouds(6, 40, 3.0);
    let mut m = dense(FeatureFamily::Timeline, &rows, &labels);
    m.labels[0] = None;
    let (sub, kept) = m.labeled_subset();
    let a = train(ClassifierKind::MaxEnt, &m, &Hyperparams::default(), 1).unwrap();
    let b = train_with_labels(ClassifierKind::MaxEnt, &sub, &kept, &Hyperparams::default(), 1).unwrap();
    assert_eq!(a, b);
}
