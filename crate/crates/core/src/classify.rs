//! Naive Bayes, linear SVM, random forest and maximum-entropy classifiers,
//! with stratified k-fold cross-validation and micro-averaged accuracy.
//!
//! PI is the positive class (+1) of the linear models.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{self, FeatureFamily, FeatureMatrix};
use crate::labeler::csv_error;
use crate::model::{Dataset, StanceLabel};
use crate::textfeat::EmbeddingTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    NaiveBayes,
    LinearSvm,
    RandomForest,
    MaxEnt,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::NaiveBayes,
        ClassifierKind::LinearSvm,
        ClassifierKind::RandomForest,
        ClassifierKind::MaxEnt,
    ];

    /// Column heading in the results table.
    pub fn code(self) -> &'static str {
        match self {
            ClassifierKind::NaiveBayes => "NB",
            ClassifierKind::LinearSvm => "SV",
            ClassifierKind::RandomForest => "RF",
            ClassifierKind::MaxEnt => "ME",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "nb" | "naivebayes" => Ok(ClassifierKind::NaiveBayes),
            "sv" | "svm" | "linearsvm" => Ok(ClassifierKind::LinearSvm),
            "rf" | "randomforest" => Ok(ClassifierKind::RandomForest),
            "me" | "maxent" | "logistic" => Ok(ClassifierKind::MaxEnt),
            other => Err(Error::InvalidInput(format!("unknown classifier '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Laplace smoothing of the Bernoulli model.
    pub nb_alpha: f64,
    /// Added to every Gaussian variance, relative to the largest one.
    pub nb_var_smoothing: f64,
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub rf_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub rf_max_depth: Option<usize>,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub rf_max_features: Option<usize>,
    pub rf_bootstrap: bool,
    pub me_l2: f64,
    pub me_tolerance: f64,
    pub me_max_iter: usize,
    /// When set, training fails unless the matrix has this many columns.
    pub expected_width: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            nb_alpha: 1.0,
            nb_var_smoothing: 1e-9,
            svm_lambda: 1e-4,
            svm_epochs: 20,
            rf_trees: 100,
            rf_max_depth: Some(16),
            rf_max_features: None,
            rf_bootstrap: true,
            me_l2: 1.0,
            me_tolerance: 1e-6,
            me_max_iter: 500,
            expected_width: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: StanceLabel,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root first.
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> StanceLabel {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }
}

/// Class-indexed arrays follow [`StanceLabel::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    GaussianNb {
        log_prior: [f64; 2],
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    BernoulliNb {
        log_prior: [f64; 2],
        /// log P(x_j = 1 | class).
        log_p: [Vec<f64>; 2],
        /// log P(x_j = 0 | class).
        log_q: [Vec<f64>; 2],
    },
    /// Decision `w . (x / scale) + bias`, positive for PI.
    Linear {
        scale: Vec<f64>,
        weights: Vec<f64>,
        bias: f64,
    },
    Forest {
        trees: Vec<Tree>,
    },
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ClassifierKind,
    pub column_count: usize,
    pub training_seed: u64,
    pub params: ModelParams,
}

fn class_counts(labels: &[StanceLabel]) -> [usize; 2] {
    let mut c = [0; 2];
    for l in labels {
        c[l.index()] += 1;
    }
    c
}

fn check_training(matrix: &FeatureMatrix, labels: &[StanceLabel], hyper: &Hyperparams) -> Result<()> {
    if labels.len() != matrix.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} rows",
            labels.len(),
            matrix.n_rows()
        )));
    }
    if let Some(w) = hyper.expected_width {
        if w != matrix.n_cols() {
            return Err(Error::WidthMismatch {
                expected: w,
                found: matrix.n_cols(),
            });
        }
    }
    if matrix.n_rows() < 2 {
        return Err(Error::SampleTooSmall(format!("{} training rows", matrix.n_rows())));
    }
    if class_counts(labels).contains(&0) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains on the labelled rows of `matrix`.
pub fn train(kind: ClassifierKind, matrix: &FeatureMatrix, hyper: &Hyperparams, seed: u64) -> Result<TrainedModel> {
    let (sub, labels) = matrix.labeled_subset();
    train_with_labels(kind, &sub, &labels, hyper, seed)
}

/// Trains on every row of `matrix` with explicit labels.
pub fn train_with_labels(
    kind: ClassifierKind,
    matrix: &FeatureMatrix,
    labels: &[StanceLabel],
    hyper: &Hyperparams,
    seed: u64,
) -> Result<TrainedModel> {
    check_training(matrix, labels, hyper)?;
    let params = match kind {
        ClassifierKind::NaiveBayes if matrix.family.is_binary() => bernoulli_nb(matrix, labels, hyper.nb_alpha),
        ClassifierKind::NaiveBayes => gaussian_nb(matrix, labels, hyper.nb_var_smoothing),
        ClassifierKind::LinearSvm => pegasos(matrix, labels, hyper, seed),
        ClassifierKind::MaxEnt => maxent(matrix, labels, hyper),
        ClassifierKind::RandomForest => random_forest(matrix, labels, hyper, seed),
    };
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        column_count: matrix.n_cols(),
        training_seed: seed,
        params,
    })
}

fn log_prior(labels: &[StanceLabel]) -> [f64; 2] {
    let c = class_counts(labels);
    let n = labels.len() as f64;
    [(c[0] as f64 / n).ln(), (c[1] as f64 / n).ln()]
}

fn gaussian_nb(m: &FeatureMatrix, labels: &[StanceLabel], smoothing: f64) -> ModelParams {
    let d = m.n_cols();
    let counts = class_counts(labels);
    let mut sum = [vec![0.0; d], vec![0.0; d]];
    for (r, l) in labels.iter().enumerate() {
        for (c, x) in m.nonzeros(r) {
            sum[l.index()][c] += x;
        }
    }
    let mean: [Vec<f64>; 2] = [0, 1].map(|k| sum[k].iter().map(|s| s / counts[k] as f64).collect());
    // Squared deviations; zero entries contribute mean^2 each.
    let mut sq = [vec![0.0; d], vec![0.0; d]];
    let mut nz = [vec![0usize; d], vec![0usize; d]];
    for (r, l) in labels.iter().enumerate() {
        let k = l.index();
        for (c, x) in m.nonzeros(r) {
            sq[k][c] += (x - mean[k][c]).powi(2);
            nz[k][c] += 1;
        }
    }
    let mut var = [vec![0.0; d], vec![0.0; d]];
    for k in 0..2 {
        for c in 0..d {
            let zeros = (counts[k] - nz[k][c]) as f64;
            var[k][c] = (sq[k][c] + zeros * mean[k][c].powi(2)) / counts[k] as f64;
        }
    }
    let largest = var.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));
    let eps = (smoothing * largest).max(1e-12);
    for v in var.iter_mut().flatten() {
        *v += eps;
    }
    ModelParams::GaussianNb {
        log_prior: log_prior(labels),
        mean,
        var,
    }
}

fn bernoulli_nb(m: &FeatureMatrix, labels: &[StanceLabel], alpha: f64) -> ModelParams {
    let d = m.n_cols();
    let counts = class_counts(labels);
    let mut ones = [vec![0.0; d], vec![0.0; d]];
    for (r, l) in labels.iter().enumerate() {
        for (c, _) in m.nonzeros(r) {
            ones[l.index()][c] += 1.0;
        }
    }
    let p: [Vec<f64>; 2] =
        [0, 1].map(|k| ones[k].iter().map(|o| (o + alpha) / (counts[k] as f64 + 2.0 * alpha)).collect());
    ModelParams::BernoulliNb {
        log_prior: log_prior(labels),
        log_p: [0, 1].map(|k| p[k].iter().map(|x| x.ln()).collect()),
        log_q: [0, 1].map(|k| p[k].iter().map(|x| (1.0 - x).ln()).collect()),
    }
}

fn max_abs_scale(m: &FeatureMatrix) -> Vec<f64> {
    let mut scale = vec![0.0_f64; m.n_cols()];
    for r in 0..m.n_rows() {
        for (c, x) in m.nonzeros(r) {
            scale[c] = scale[c].max(x.abs());
        }
    }
    scale.iter().map(|&s| if s > 0.0 { s } else { 1.0 }).collect()
}

fn scaled_rows(m: &FeatureMatrix, scale: &[f64]) -> Vec<Vec<(usize, f64)>> {
    (0..m.n_rows())
        .map(|r| m.nonzeros(r).into_iter().map(|(c, x)| (c, x / scale[c])).collect())
        .collect()
}

fn sign(l: StanceLabel) -> f64 {
    if l == StanceLabel::PI {
        1.0
    } else {
        -1.0
    }
}

/// Pegasos: primal sub-gradient descent on the hinge loss with step
/// `1 / (lambda t)`. The bias is a constant feature and is regularised.
/// Returns the mean of the iterates of the final epoch, since the last
/// iterate still moves by about `1 / (lambda t)` per step.
fn pegasos(m: &FeatureMatrix, labels: &[StanceLabel], hyper: &Hyperparams, seed: u64) -> ModelParams {
    let scale = max_abs_scale(m);
    let rows = scaled_rows(m, &scale);
    let d = m.n_cols();
    let lambda = hyper.svm_lambda;
    // w = s * v, so the shrink step is O(1).
    let mut v = vec![0.0; d + 1];
    let mut s = 1.0;
    let mut mean = vec![0.0; d + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut t = 0usize;
    for epoch in 0..hyper.svm_epochs {
        let last = epoch + 1 == hyper.svm_epochs;
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = sign(labels[i]);
            let margin = y * s * (v[d] + rows[i].iter().map(|&(c, x)| v[c] * x).sum::<f64>());
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                s = 1.0;
            } else {
                s *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / s;
                v[d] += step;
                for &(c, x) in &rows[i] {
                    v[c] += step * x;
                }
            }
            if s < 1e-9 {
                v.iter_mut().for_each(|x| *x *= s);
                s = 1.0;
            }
            if last {
                for (a, x) in mean.iter_mut().zip(&v) {
                    *a += s * x;
                }
            }
        }
    }
    let n = rows.len().max(1) as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    let bias = mean.pop().unwrap_or(0.0);
    ModelParams::Linear {
        scale,
        weights: mean,
        bias,
    }
}

/// Logistic loss summed over rows plus `l2/2 |w|^2` (bias unpenalised),
/// minimised by gradient descent with Armijo backtracking.
fn maxent(m: &FeatureMatrix, labels: &[StanceLabel], hyper: &Hyperparams) -> ModelParams {
    let scale = max_abs_scale(m);
    let rows = scaled_rows(m, &scale);
    let d = m.n_cols();
    let ys: Vec<f64> = labels.iter().map(|&l| sign(l)).collect();
    let l2 = hyper.me_l2;

    // Parameters: weights then bias.
    let objective = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut loss = 0.5 * l2 * w[..d].iter().map(|x| x * x).sum::<f64>();
        let mut grad: Vec<f64> = w[..d].iter().map(|x| l2 * x).chain([0.0]).collect();
        for (row, &y) in rows.iter().zip(&ys) {
            let z = w[d] + row.iter().map(|&(c, x)| w[c] * x).sum::<f64>();
            let yz = y * z;
            // log(1 + exp(-yz)) without overflow.
            loss += if yz > 0.0 { (-yz).exp().ln_1p() } else { -yz + yz.exp().ln_1p() };
            let g = -y / (1.0 + yz.exp());
            grad[d] += g;
            for &(c, x) in row {
                grad[c] += g * x;
            }
        }
        (loss, grad)
    };

    let mut w = vec![0.0; d + 1];
    let (mut f, mut g) = objective(&w);
    let mut step = 1.0 / rows.len() as f64;
    for _ in 0..hyper.me_max_iter {
        let gnorm2: f64 = g.iter().map(|x| x * x).sum();
        if gnorm2.sqrt() <= hyper.me_tolerance {
            break;
        }
        step *= 2.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(x, gi)| x - step * gi).collect();
            let (fc, gc) = objective(&cand);
            if fc <= f - 1e-4 * step * gnorm2 {
                w = cand;
                f = fc;
                g = gc;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                break;
            }
        }
        if step < 1e-20 {
            break;
        }
    }
    let bias = w[d];
    w.truncate(d);
    ModelParams::Linear {
        scale,
        weights: w,
        bias,
    }
}

struct ForestData<'a> {
    /// Column-major feature values.
    columns: Vec<Vec<f64>>,
    labels: &'a [StanceLabel],
    max_depth: usize,
    mtry: usize,
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = counts[0] as f64 / n;
    2.0 * p * (1.0 - p)
}

fn majority(counts: [usize; 2]) -> StanceLabel {
    if counts[StanceLabel::PI.index()] >= counts[StanceLabel::AI.index()] {
        StanceLabel::PI
    } else {
        StanceLabel::AI
    }
}

impl ForestData<'_> {
    /// Best (weighted Gini, threshold) split on one feature, if the feature
    /// takes more than one value among `idx`.
    fn best_split(&self, idx: &[usize], feature: usize) -> Option<(f64, f64)> {
        let col = &self.columns[feature];
        let mut sorted: Vec<(f64, usize)> = idx.iter().map(|&i| (col[i], self.labels[i].index())).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut total = [0usize; 2];
        for &(_, k) in &sorted {
            total[k] += 1;
        }
        let n = sorted.len() as f64;
        let mut left = [0usize; 2];
        let mut best: Option<(f64, f64)> = None;
        for i in 0..sorted.len() - 1 {
            left[sorted[i].1] += 1;
            let (a, b) = (sorted[i].0, sorted[i + 1].0);
            if a == b {
                continue;
            }
            let right = [total[0] - left[0], total[1] - left[1]];
            let nl = (i + 1) as f64;
            let score = (nl * gini(left) + (n - nl) * gini(right)) / n;
            if best.is_none_or(|(s, _)| score < s) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some((score, threshold));
            }
        }
        best
    }

    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>) -> usize {
        let mut counts = [0usize; 2];
        for &i in idx.iter() {
            counts[self.labels[i].index()] += 1;
        }
        let me = nodes.len();
        nodes.push(TreeNode::Leaf { label: majority(counts) });
        if counts[0] == 0 || counts[1] == 0 || depth >= self.max_depth {
            return me;
        }
        let d = self.columns.len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let mut best: Option<(f64, usize, f64)> = None;
        for (tried, &f) in features.iter().enumerate() {
            // Past the sampled features only until some split is found.
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some((score, threshold)) = self.best_split(idx, f) {
                if best.is_none_or(|(s, _, _)| score < s) {
                    best = Some((score, f, threshold));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return me;
        };
        let col = &self.columns[feature];
        let mut split = 0;
        for j in 0..idx.len() {
            if col[idx[j]] <= threshold {
                idx.swap(j, split);
                split += 1;
            }
        }
        let (l, r) = idx.split_at_mut(split);
        let left = self.grow(l, depth + 1, rng, nodes);
        let right = self.grow(r, depth + 1, rng, nodes);
        nodes[me] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        me
    }
}

fn random_forest(m: &FeatureMatrix, labels: &[StanceLabel], hyper: &Hyperparams, seed: u64) -> ModelParams {
    let n = m.n_rows();
    let d = m.n_cols();
    let columns = (0..d).map(|c| m.column(c)).collect();
    let data = ForestData {
        columns,
        labels,
        max_depth: hyper.rf_max_depth.unwrap_or(usize::MAX),
        mtry: hyper
            .rf_max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1)),
    };
    let trees = (0..hyper.rf_trees.max(1))
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let mut idx: Vec<usize> = if hyper.rf_bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut nodes = Vec::new();
            data.grow(&mut idx, 0, &mut rng, &mut nodes);
            Tree { nodes }
        })
        .collect();
    ModelParams::Forest { trees }
}

fn argmax(scores: [f64; 2]) -> StanceLabel {
    // Ties go to PI.
    if scores[StanceLabel::PI.index()] >= scores[StanceLabel::AI.index()] {
        StanceLabel::PI
    } else {
        StanceLabel::AI
    }
}

impl TrainedModel {
    fn predict_row(&self, m: &FeatureMatrix, r: usize) -> StanceLabel {
        match &self.params {
            ModelParams::GaussianNb { log_prior, mean, var } => {
                let row = m.dense_row(r);
                argmax([0, 1].map(|k| {
                    log_prior[k]
                        + row
                            .iter()
                            .zip(&mean[k])
                            .zip(&var[k])
                            .map(|((x, mu), v)| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - mu).powi(2) / (2.0 * v))
                            .sum::<f64>()
                }))
            }
            ModelParams::BernoulliNb { log_prior, log_p, log_q } => {
                let nz = m.nonzeros(r);
                argmax([0, 1].map(|k| {
                    let base: f64 = log_q[k].iter().sum();
                    log_prior[k] + base + nz.iter().map(|&(c, _)| log_p[k][c] - log_q[k][c]).sum::<f64>()
                }))
            }
            ModelParams::Linear { scale, weights, bias } => {
                let z = bias + m.nonzeros(r).iter().map(|&(c, x)| weights[c] * x / scale[c]).sum::<f64>();
                if z >= 0.0 {
                    StanceLabel::PI
                } else {
                    StanceLabel::AI
                }
            }
            ModelParams::Forest { trees } => {
                let row = m.dense_row(r);
                let mut votes = [0.0; 2];
                for t in trees {
                    votes[t.predict(&row).index()] += 1.0;
                }
                argmax(votes)
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).expect("model serialises");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: TrainedModel = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("unsupported model format version {}", model.format_version),
            });
        }
        Ok(model)
    }
}

/// One label per row of `matrix`.
pub fn predict(model: &TrainedModel, matrix: &FeatureMatrix) -> Result<Vec<StanceLabel>> {
    if matrix.n_cols() != model.column_count {
        return Err(Error::WidthMismatch {
            expected: model.column_count,
            found: matrix.n_cols(),
        });
    }
    Ok((0..matrix.n_rows()).map(|r| model.predict_row(matrix, r)).collect())
}

/// Splits row indices into `k` folds. Each class is shuffled and dealt
/// round-robin, continuing from where the previous class stopped, so every
/// fold holds `floor` or `ceil` of its proportional share of each class.
pub fn stratified_kfold(labels: &[StanceLabel], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k}; at least 2 folds required")));
    }
    let counts = class_counts(labels);
    if counts.contains(&0) {
        return Err(Error::SingleClass);
    }
    if let Some(small) = StanceLabel::ALL.iter().find(|l| counts[l.index()] < k) {
        return Err(Error::SampleTooSmall(format!(
            "{} rows of class {small} for {k} folds",
            counts[small.index()]
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in StanceLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub territory: String,
    pub family: FeatureFamily,
    pub kind: ClassifierKind,
    pub k: usize,
    pub seed: u64,
    /// Per fold `(correct, total)`.
    pub folds: Vec<(usize, usize)>,
    pub micro_accuracy: f64,
    pub hyperparams: Hyperparams,
}

impl CvReport {
    pub fn with_territory(mut self, territory: impl Into<String>) -> Self {
        self.territory = territory.into();
        self
    }
}

/// Pooled accuracy `sum(correct) / sum(total)`.
pub fn micro_accuracy(folds: &[(usize, usize)]) -> f64 {
    let correct: usize = folds.iter().map(|f| f.0).sum();
    let total: usize = folds.iter().map(|f| f.1).sum();
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(fold as u64)
}

/// Stratified k-fold cross-validation over the labelled rows. Folds run in
/// parallel; each fold trains with its own derived seed.
pub fn cross_validate(
    matrix: &FeatureMatrix,
    kind: ClassifierKind,
    k: usize,
    seed: u64,
    hyper: &Hyperparams,
) -> Result<CvReport> {
    let (sub, labels) = matrix.labeled_subset();
    let folds = stratified_kfold(&labels, k, seed)?;
    let results: Vec<(usize, usize)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let held: BTreeSet<usize> = test.iter().copied().collect();
            let train_rows: Vec<usize> = (0..labels.len()).filter(|i| !held.contains(i)).collect();
            let train_labels: Vec<StanceLabel> = train_rows.iter().map(|&i| labels[i]).collect();
            let model = train_with_labels(kind, &sub.select_rows(&train_rows), &train_labels, hyper, fold_seed(seed, f))?;
            let predicted = predict(&model, &sub.select_rows(test))?;
            let correct = predicted.iter().zip(test).filter(|(p, &i)| **p == labels[i]).count();
            Ok((correct, test.len()))
        })
        .collect::<Result<_>>()?;
    Ok(CvReport {
        territory: String::new(),
        family: matrix.family,
        kind,
        k,
        seed,
        micro_accuracy: micro_accuracy(&results),
        folds: results,
        hyperparams: hyper.clone(),
    })
}

/// Cross-validation where the interaction or network vocabulary is rebuilt
/// from the training users of each fold. Embedding families have no
/// vocabulary and behave as in [`cross_validate`].
#[allow(clippy::too_many_arguments)]
pub fn cross_validate_per_fold(
    dataset: &Dataset,
    family: FeatureFamily,
    table: Option<&EmbeddingTable>,
    q: f64,
    kind: ClassifierKind,
    k: usize,
    seed: u64,
    hyper: &Hyperparams,
) -> Result<CvReport> {
    if !matches!(family, FeatureFamily::Interactions | FeatureFamily::Network) {
        let m = features::family_features(dataset, family, table, q)?;
        return cross_validate(&m, kind, k, seed, hyper);
    }
    let labeled: Vec<(&str, StanceLabel)> = dataset
        .labeled_users()
        .map(|(u, l)| (u.user_id.as_str(), l))
        .collect();
    let labels: Vec<StanceLabel> = labeled.iter().map(|(_, l)| *l).collect();
    let folds = stratified_kfold(&labels, k, seed)?;
    let results: Vec<(usize, usize)> = folds
        .par_iter()
        .enumerate()
        .map(|(f, test)| {
            let held: BTreeSet<usize> = test.iter().copied().collect();
            let train_rows: Vec<usize> = (0..labels.len()).filter(|i| !held.contains(i)).collect();
            let scope: BTreeSet<String> = train_rows.iter().map(|&i| labeled[i].0.to_string()).collect();
            let m = match family {
                FeatureFamily::Interactions => features::interaction_features_with_vocabulary(
                    dataset,
                    features::interaction_vocabulary(dataset, q, Some(&scope))?,
                )?,
                _ => features::network_features_with_vocabulary(
                    dataset,
                    features::network_vocabulary(dataset, q, Some(&scope))?,
                )?,
            };
            let (sub, _) = m.labeled_subset();
            let train_labels: Vec<StanceLabel> = train_rows.iter().map(|&i| labels[i]).collect();
            let model = train_with_labels(kind, &sub.select_rows(&train_rows), &train_labels, hyper, fold_seed(seed, f))?;
            let predicted = predict(&model, &sub.select_rows(test))?;
            let correct = predicted.iter().zip(test).filter(|(p, &i)| **p == labels[i]).count();
            Ok((correct, test.len()))
        })
        .collect::<Result<_>>()?;
    Ok(CvReport {
        territory: String::new(),
        family,
        kind,
        k,
        seed,
        micro_accuracy: micro_accuracy(&results),
        folds: results,
        hyperparams: hyper.clone(),
    })
}

pub const RESULTS_HEADER: [&str; 6] = ["territory", "family", "NB", "SV", "RF", "ME"];

/// One row per (territory, family) in first-seen order, one column per
/// classifier; accuracies to three decimals, blank when absent.
pub fn results_table(reports: &[CvReport]) -> Vec<[String; 6]> {
    let mut keys: Vec<(String, FeatureFamily)> = Vec::new();
    for r in reports {
        let key = (r.territory.clone(), r.family);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(territory, family)| {
            let cell = |kind: ClassifierKind| {
                reports
                    .iter()
                    .find(|r| r.territory == territory && r.family == family && r.kind == kind)
                    .map_or(String::new(), |r| format!("{:.3}", r.micro_accuracy))
            };
            [
                territory.clone(),
                family.to_string(),
                cell(ClassifierKind::NaiveBayes),
                cell(ClassifierKind::LinearSvm),
                cell(ClassifierKind::RandomForest),
                cell(ClassifierKind::MaxEnt),
            ]
        })
        .collect()
}

pub fn write_results_csv(reports: &[CvReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(RESULTS_HEADER).map_err(|e| csv_error(path, e))?;
    for row in results_table(reports) {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureValues;
    use rand_distr::{Distribution, Normal};
    use StanceLabel::{AI, PI};

    fn dense(family: FeatureFamily, rows: &[Vec<f64>], labels: &[StanceLabel]) -> FeatureMatrix {
        let d = rows.first().map_or(0, Vec::len);
        FeatureMatrix::new(
            family,
            (0..rows.len()).map(|i| format!("u{i:04}")).collect(),
            (0..d).map(|c| format!("c{c}")).collect(),
            FeatureValues::Dense(rows.concat()),
            labels.iter().map(|&l| Some(l)).collect(),
        )
        .unwrap()
    }

    fn clouds(seed: u64, n: usize, gap: f64) -> (FeatureMatrix, Vec<StanceLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = if i % 2 == 0 { PI } else { AI };
            let c = if l == PI { gap } else { -gap };
            rows.push(vec![c + noise.sample(&mut rng), c + noise.sample(&mut rng)]);
            labels.push(l);
        }
        (dense(FeatureFamily::Timeline, &rows, &labels), labels)
    }

    #[test]
    fn separated_clouds_are_learned_by_every_kind() {
        let hyper = Hyperparams::default();
        for seed in 0..5 {
            let (m, labels) = clouds(seed, 100, 5.0);
            for kind in ClassifierKind::ALL {
                let model = train(kind, &m, &hyper, seed).unwrap();
                let p = predict(&model, &m).unwrap();
                let acc = p.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / 100.0;
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
        let p = predict(&model, &m).unwrap();
        let acc = p.iter().zip(&labels).filter(|(a, b)| a == b).count();
        assert!(acc <= 3);
    }

    #[test]
    fn bernoulli_fixture() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0], vec![0.0, 1.0]];
        let labels = [PI, PI, AI, AI];
        let m = dense(FeatureFamily::Network, &rows, &labels);
        let model = train(ClassifierKind::NaiveBayes, &m, &Hyperparams::default(), 0).unwrap();
        assert!(matches!(model.params, ModelParams::BernoulliNb { .. }));
        // P(x1=1|PI) = 3/4, P(x1=1|AI) = 1/4, x2 uninformative.
        let probe = dense(FeatureFamily::Network, &[vec![1.0, 0.0]], &[PI]);
        assert_eq!(predict(&model, &probe).unwrap(), [PI]);
        assert_eq!(predict(&model, &m).unwrap(), labels);
        let empty = m.select_rows(&[]);
        assert!(predict(&model, &empty).unwrap().is_empty());
    }

    #[test]
    fn training_preconditions() {
        let m = dense(FeatureFamily::Timeline, &[vec![1.0], vec![2.0]], &[PI, PI]);
        assert!(matches!(train(ClassifierKind::MaxEnt, &m, &Hyperparams::default(), 0), Err(Error::SingleClass)));
        let m = dense(FeatureFamily::Timeline, &[vec![1.0], vec![2.0]], &[PI, AI]);
        let hyper = Hyperparams {
            expected_width: Some(3),
            ..Hyperparams::default()
        };
        assert!(matches!(train(ClassifierKind::MaxEnt, &m, &hyper, 0), Err(Error::WidthMismatch { .. })));
        let model = train(ClassifierKind::MaxEnt, &m, &Hyperparams::default(), 0).unwrap();
        let wide = dense(FeatureFamily::Timeline, &[vec![1.0, 2.0]], &[PI]);
        assert!(matches!(predict(&model, &wide), Err(Error::WidthMismatch { .. })));
    }

    #[test]
    fn kfold_examples() {
        let labels: Vec<StanceLabel> = (0..100).map(|i| if i < 60 { PI } else { AI }).collect();
        let folds = stratified_kfold(&labels, 10, 1).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        for f in &folds {
            let pi = f.iter().filter(|&&i| labels[i] == PI).count();
            assert_eq!((pi, f.len() - pi), (6, 4));
        }
        let labels: Vec<StanceLabel> = (0..20).map(|i| if i < 13 { PI } else { AI }).collect();
        for f in stratified_kfold(&labels, 5, 9).unwrap() {
            let pi = f.iter().filter(|&&i| labels[i] == PI).count();
            assert!((2..=3).contains(&pi));
            assert!((1..=2).contains(&(f.len() - pi)));
        }
        let small: Vec<StanceLabel> = vec![PI, PI, PI, AI];
        assert!(stratified_kfold(&small, 2, 0).is_err());
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }

    #[test]
    fn micro_average_pools_counts() {
        assert_eq!(micro_accuracy(&[(9, 10); 10]), 0.9);
        assert_eq!(micro_accuracy(&[(1, 1), (0, 3)]), 0.25);
    }

    #[test]
    fn constant_features_fall_back_to_majority() {
        let labels: Vec<StanceLabel> = (0..100).map(|i| if i < 70 { PI } else { AI }).collect();
        let rows = vec![vec![1.0, 0.0]; 100];
        let m = dense(FeatureFamily::Timeline, &rows, &labels);
        for kind in ClassifierKind::ALL {
            let r = cross_validate(&m, kind, 10, 3, &Hyperparams::default()).unwrap();
            assert!((r.micro_accuracy - 0.7).abs() <= 0.05, "{kind}: {}", r.micro_accuracy);
        }
    }

    #[test]
    fn models_round_trip_through_json() {
        let (m, _) = clouds(4, 60, 2.0);
        let dir = tempfile::tempdir().unwrap();
        for kind in ClassifierKind::ALL {
            let model = train(kind, &m, &Hyperparams::default(), 11).unwrap();
            let p = dir.path().join(format!("{kind}.json"));
            model.save(&p).unwrap();
            let back = TrainedModel::load(&p).unwrap();
            assert_eq!(back, model);
            assert_eq!(predict(&back, &m).unwrap(), predict(&model, &m).unwrap());
        }
    }

    #[test]
    fn results_table_layout() {
        let (m, _) = clouds(0, 40, 3.0);
        let mut reports = Vec::new();
        for kind in [ClassifierKind::MaxEnt, ClassifierKind::NaiveBayes] {
            reports.push(cross_validate(&m, kind, 4, 0, &Hyperparams::default()).unwrap().with_territory("Catalonia"));
        }
        let table = results_table(&reports);
        assert_eq!(table.len(), 1);
        assert_eq!(table[0][0], "Catalonia");
        assert_eq!(table[0][3], "");
        assert!(!table[0][5].is_empty());
    }
}
