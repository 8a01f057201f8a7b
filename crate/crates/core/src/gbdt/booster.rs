use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::binning::{BinnedDataset, FeatureMatrix};
use super::tree::{Node, Tree};
use crate::error::{Error, Result};
use crate::objective::{transform, LossKind, Metric, Objective};

/// Booster hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub min_child_samples: usize,
    /// Minimum hessian sum in each child of a split.
    pub min_sum_hessian: f64,
    /// Splits must improve the objective by more than this.
    pub min_split_gain: f64,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    pub bagging_freq: usize,
    pub early_stopping_rounds: Option<usize>,
    pub max_bins: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_estimators: 2000,
            learning_rate: 0.05,
            num_leaves: 31,
            min_child_samples: 20,
            min_sum_hessian: 1e-3,
            min_split_gain: 0.0,
            lambda_l1: 0.0,
            lambda_l2: 0.0,
            feature_fraction: 1.0,
            bagging_fraction: 1.0,
            bagging_freq: 1,
            early_stopping_rounds: Some(100),
            max_bins: 255,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.num_leaves < 2 {
            return bad("num_leaves must be at least 2");
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return bad("feature_fraction must lie in (0, 1]");
        }
        if !(self.bagging_fraction > 0.0 && self.bagging_fraction <= 1.0) {
            return bad("bagging_fraction must lie in (0, 1]");
        }
        if self.lambda_l1 < 0.0 || self.lambda_l2 < 0.0 || self.min_sum_hessian < 0.0 {
            return bad("regularization terms must be non-negative");
        }
        if self.max_bins < 2 {
            return bad("max_bins must be at least 2");
        }
        if self.early_stopping_rounds == Some(0) {
            return bad("early_stopping_rounds must be at least 1");
        }
        Ok(())
    }

    fn bagging(&self) -> bool {
        self.bagging_fraction < 1.0 && self.bagging_freq > 0
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub train_loss: f64,
    pub valid_metric: Option<f64>,
}

/// A fitted gradient-boosted tree ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    objective: LossKind,
    base_score: f64,
    learning_rate: f64,
    best_iteration: usize,
    feature_names: Vec<String>,
    config: TrainConfig,
    trees: Vec<Tree>,
    #[serde(default)]
    history: Vec<IterationLog>,
}

impl Booster {
    /// A booster without trees that predicts `base_score` everywhere.
    pub fn constant(objective: LossKind, base_score: f64, feature_names: Vec<String>, config: TrainConfig) -> Self {
        Self {
            objective,
            base_score,
            learning_rate: config.learning_rate,
            best_iteration: 0,
            feature_names,
            config,
            trees: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn objective(&self) -> LossKind {
        self.objective
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn best_iteration(&self) -> usize {
        self.best_iteration
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn history(&self) -> &[IterationLog] {
        &self.history
    }

    fn used_trees(&self) -> &[Tree] {
        &self.trees[..self.best_iteration.min(self.trees.len())]
    }

    /// Raw scores (before the link transform).
    pub fn predict_raw(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        if data.names() != self.feature_names.as_slice() {
            return Err(Error::Data(format!(
                "feature schema mismatch: model expects {:?}, got {:?}",
                self.feature_names,
                data.names()
            )));
        }
        let columns = data.columns();
        let trees = self.used_trees();
        Ok((0..data.n_rows())
            .into_par_iter()
            .map(|i| {
                let sum: f64 = trees.iter().map(|t| t.predict_with(|f| columns[f][i])).sum();
                self.base_score + self.learning_rate * sum
            })
            .collect())
    }

    /// Predictions on the target scale.
    pub fn predict(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        let kind = self.objective;
        Ok(self.predict_raw(data)?.into_iter().map(|r| transform(kind, r)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: Booster = serde_json::from_str(s)?;
        if b.best_iteration > b.trees.len() {
            return Err(Error::Data("best_iteration exceeds the number of trees".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Validation data and the metric that drives early stopping.
pub struct Validation<'a> {
    pub data: &'a BinnedDataset,
    pub metric: &'a dyn Metric,
}

/// Fits a booster by Newton boosting with leaf-wise trees.
pub fn fit(
    train: &BinnedDataset,
    valid: Option<Validation<'_>>,
    objective: &mut dyn Objective,
    config: &TrainConfig,
) -> Result<Booster> {
    config.validate()?;
    let n = train.n_samples();
    if n == 0 {
        return Err(Error::Data("training set is empty".into()));
    }
    if let Some(v) = &valid {
        if v.data.feature_names() != train.feature_names() {
            return Err(Error::Data("validation features differ from training features".into()));
        }
    }
    let targets = train.targets();
    let kind = objective.kind();
    let base = objective.base_score(targets);
    let mut booster = Booster::constant(kind, base, train.feature_names().to_vec(), config.clone());
    let mut raw = vec![base; n];
    let mut valid_raw = valid.as_ref().map(|v| vec![base; v.data.n_samples()]);

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n_features = train.n_features();
    let mut bag: Vec<u32> = (0..n as u32).collect();
    let mut best: Option<(usize, f64)> = None;

    for it in 0..config.n_estimators {
        let gh = objective.grad_hess(it, &raw, targets)?;
        if gh.grad.len() != n || gh.hess.len() != n {
            return Err(Error::shape(format!("{n} gradients"), format!("{}", gh.grad.len())));
        }
        let w = train.weights();
        let grad: Vec<f64> = gh.grad.iter().zip(w).map(|(g, w)| g * w).collect();
        let hess: Vec<f64> = gh.hess.iter().zip(w).map(|(h, w)| h * w).collect();

        if config.bagging() && it % config.bagging_freq == 0 {
            let k = ((config.bagging_fraction * n as f64).ceil() as usize).clamp(1, n);
            let mut idx: Vec<u32> = sample(&mut rng, n, k).into_iter().map(|i| i as u32).collect();
            idx.sort_unstable();
            bag = idx;
        }
        let mut active = vec![true; n_features];
        if config.feature_fraction < 1.0 && n_features > 0 {
            let k = ((config.feature_fraction * n_features as f64).ceil() as usize).clamp(1, n_features);
            active = vec![false; n_features];
            for f in sample(&mut rng, n_features, k) {
                active[f] = true;
            }
        }

        let grown = grow_tree(train, &active, bag.clone(), &grad, &hess, config);
        let lr = config.learning_rate;
        if bag.len() == n {
            for (value, rows) in &grown.leaf_rows {
                for &r in rows {
                    raw[r as usize] += lr * value;
                }
            }
        } else {
            let tree = &grown.tree;
            raw.par_iter_mut()
                .enumerate()
                .for_each(|(i, r)| *r += lr * tree.predict_binned(train, i));
        }

        let mut valid_metric = None;
        if let (Some(v), Some(vr)) = (&valid, valid_raw.as_mut()) {
            let tree = &grown.tree;
            vr.par_iter_mut()
                .enumerate()
                .for_each(|(i, r)| *r += lr * tree.predict_binned(v.data, i));
            let preds: Vec<f64> = vr.iter().map(|&r| transform(kind, r)).collect();
            let m = v.metric.evaluate(&preds, v.data.targets())?;
            valid_metric = Some(m);
        }
        let train_loss = objective.loss(&raw, targets)?;
        booster.trees.push(grown.tree);
        booster.history.push(IterationLog {
            iteration: it + 1,
            train_loss,
            valid_metric,
        });
        log::debug!("iteration {}: train {train_loss:.6} valid {valid_metric:?}", it + 1);

        if let Some(m) = valid_metric {
            if best.is_none_or(|(_, b)| m < b) {
                best = Some((it + 1, m));
            }
            if let (Some(rounds), Some((best_it, _))) = (config.early_stopping_rounds, best) {
                if it + 1 - best_it >= rounds {
                    break;
                }
            }
        }
    }
    booster.best_iteration = match best {
        Some((it, _)) => it,
        None => booster.trees.len(),
    };
    Ok(booster)
}

#[derive(Debug, Clone, Copy, Default)]
struct HistBin {
    g: f64,
    h: f64,
    n: u32,
}

/// Per-feature histograms; inactive features have empty vectors.
type Histogram = Vec<Vec<HistBin>>;

fn build_histogram(data: &BinnedDataset, active: &[bool], rows: &[u32], grad: &[f64], hess: &[f64]) -> Histogram {
    (0..data.n_features())
        .into_par_iter()
        .map(|f| {
            if !active[f] {
                return Vec::new();
            }
            let bins = data.bins(f);
            let mut hist = vec![HistBin::default(); data.mappers()[f].n_bins()];
            for &r in rows {
                let r = r as usize;
                let b = &mut hist[bins[r] as usize];
                b.g += grad[r];
                b.h += hess[r];
                b.n += 1;
            }
            hist
        })
        .collect()
}

fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
    parent
        .iter()
        .zip(child)
        .map(|(p, c)| {
            p.iter()
                .zip(c)
                .map(|(p, c)| HistBin {
                    g: p.g - c.g,
                    h: p.h - c.h,
                    n: p.n - c.n,
                })
                .collect()
        })
        .collect()
}

fn soft_threshold(g: f64, l1: f64) -> f64 {
    if g > l1 {
        g - l1
    } else if g < -l1 {
        g + l1
    } else {
        0.0
    }
}

fn leaf_score(g: f64, h: f64, cfg: &TrainConfig) -> f64 {
    let denom = h + cfg.lambda_l2;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = soft_threshold(g, cfg.lambda_l1);
    t * t / denom
}

fn leaf_value(g: f64, h: f64, cfg: &TrainConfig) -> f64 {
    let denom = h + cfg.lambda_l2;
    if denom <= 0.0 {
        return 0.0;
    }
    -soft_threshold(g, cfg.lambda_l1) / denom
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    bin: u8,
    missing_left: bool,
    gain: f64,
    left: HistBin,
    right: HistBin,
}

fn best_split(data: &BinnedDataset, hist: &Histogram, total: HistBin, cfg: &TrainConfig) -> Option<Split> {
    if total.h <= 0.0 || (total.n as usize) < 2 * cfg.min_child_samples.max(1) {
        return None;
    }
    let parent = leaf_score(total.g, total.h, cfg);
    let candidates: Vec<Option<Split>> = hist
        .par_iter()
        .enumerate()
        .map(|(f, bins)| {
            if bins.is_empty() {
                return None;
            }
            let mapper = &data.mappers()[f];
            let missing = bins[mapper.missing_bin() as usize];
            let directions: &[bool] = if missing.n > 0 { &[false, true] } else { &[false] };
            let mut best: Option<Split> = None;
            let mut acc = HistBin::default();
            for t in 0..mapper.n_value_bins().saturating_sub(1) {
                let b = bins[t];
                acc.g += b.g;
                acc.h += b.h;
                acc.n += b.n;
                for &missing_left in directions {
                    let left = if missing_left {
                        HistBin {
                            g: acc.g + missing.g,
                            h: acc.h + missing.h,
                            n: acc.n + missing.n,
                        }
                    } else {
                        acc
                    };
                    let right = HistBin {
                        g: total.g - left.g,
                        h: total.h - left.h,
                        n: total.n - left.n,
                    };
                    if (left.n as usize) < cfg.min_child_samples.max(1)
                        || (right.n as usize) < cfg.min_child_samples.max(1)
                        || left.h < cfg.min_sum_hessian
                        || right.h < cfg.min_sum_hessian
                    {
                        continue;
                    }
                    let gain = leaf_score(left.g, left.h, cfg) + leaf_score(right.g, right.h, cfg) - parent;
                    if gain > cfg.min_split_gain && best.is_none_or(|s| gain > s.gain) {
                        best = Some(Split {
                            feature: f,
                            bin: t as u8,
                            missing_left,
                            gain,
                            left,
                            right,
                        });
                    }
                }
            }
            best
        })
        .collect();
    // fixed-order reduction keeps the choice independent of thread count
    candidates
        .into_iter()
        .flatten()
        .fold(None, |best: Option<Split>, s| match best {
            Some(b) if b.gain >= s.gain => Some(b),
            _ => Some(s),
        })
}

struct OpenLeaf {
    node: usize,
    rows: Vec<u32>,
    hist: Histogram,
    total: HistBin,
    split: Option<Split>,
}

struct GrownTree {
    tree: Tree,
    leaf_rows: Vec<(f64, Vec<u32>)>,
}

fn grow_tree(
    data: &BinnedDataset,
    active: &[bool],
    rows: Vec<u32>,
    grad: &[f64],
    hess: &[f64],
    cfg: &TrainConfig,
) -> GrownTree {
    let total = rows.iter().fold(HistBin::default(), |acc, &r| HistBin {
        g: acc.g + grad[r as usize],
        h: acc.h + hess[r as usize],
        n: acc.n + 1,
    });
    let hist = build_histogram(data, active, &rows, grad, hess);
    let split = best_split(data, &hist, total, cfg);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut open = vec![OpenLeaf {
        node: 0,
        rows,
        hist,
        total,
        split,
    }];

    while open.len() < cfg.num_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.split.map(|s| (i, s.gain)))
            .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
                Some((_, bg)) if bg >= g => best,
                _ => Some((i, g)),
            });
        let Some((idx, _)) = pick else { break };
        let leaf = open.swap_remove(idx);
        let split = leaf.split.expect("picked leaf has a split");
        let bins = data.bins(split.feature);
        let mapper = &data.mappers()[split.feature];
        let missing = mapper.missing_bin();
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
            let b = bins[r as usize];
            if b == missing {
                split.missing_left
            } else {
                b <= split.bin
            }
        });

        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let small = build_histogram(data, active, &left_rows, grad, hess);
            let large = subtract(&leaf.hist, &small);
            (small, large)
        } else {
            let small = build_histogram(data, active, &right_rows, grad, hess);
            let large = subtract(&leaf.hist, &small);
            (large, small)
        };

        let left_node = nodes.len();
        let right_node = left_node + 1;
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            bin: split.bin,
            threshold: mapper.upper_bound(split.bin),
            missing_left: split.missing_left,
            left: left_node,
            right: right_node,
        };
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });

        let left_split = best_split(data, &left_hist, split.left, cfg);
        let right_split = best_split(data, &right_hist, split.right, cfg);
        // keep creation order stable so ties resolve the same way every run
        let left = OpenLeaf {
            node: left_node,
            rows: left_rows,
            hist: left_hist,
            total: split.left,
            split: left_split,
        };
        let right = OpenLeaf {
            node: right_node,
            rows: right_rows,
            hist: right_hist,
            total: split.right,
            split: right_split,
        };
        open.push(left);
        open.push(right);
        open.sort_by_key(|l| l.node);
    }

    let mut leaf_rows = Vec::with_capacity(open.len());
    for leaf in open {
        let value = leaf_value(leaf.total.g, leaf.total.h, cfg);
        nodes[leaf.node] = Node::Leaf { value };
        leaf_rows.push((value, leaf.rows));
    }
    GrownTree {
        tree: Tree::from_nodes(nodes),
        leaf_rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::binning::FeatureMatrix;
    use crate::objective::{SquaredError, SquaredErrorMetric};

    fn one_feature(x: Vec<f64>) -> FeatureMatrix {
        FeatureMatrix::new(vec!["x".into()], vec![x]).unwrap()
    }

    fn exact_config(n_estimators: usize, num_leaves: usize) -> TrainConfig {
        TrainConfig {
            n_estimators,
            learning_rate: 1.0,
            num_leaves,
            min_child_samples: 1,
            min_sum_hessian: 0.0,
            early_stopping_rounds: None,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn constant_target_predicts_constant() {
        let x = one_feature((0..50).map(|i| i as f64).collect());
        let y = vec![5.0; 50];
        let ds = x.bin(&y, 255).unwrap();
        let b = fit(&ds, None, &mut SquaredError, &exact_config(1, 31)).unwrap();
        assert_eq!(b.trees()[0].n_leaves(), 1);
        assert!(b.predict(&x).unwrap().iter().all(|&p| p == 5.0));
    }

    #[test]
    fn perfect_split_is_exact_with_unit_learning_rate() {
        let x = one_feature(vec![0.0, 1.0, 2.0, 3.0]);
        let y = vec![0.0, 0.0, 1.0, 1.0];
        let ds = x.bin(&y, 255).unwrap();
        let b = fit(&ds, None, &mut SquaredError, &exact_config(1, 2)).unwrap();
        assert_eq!(b.predict(&x).unwrap(), y);

        // lr = 0.1: each side moves a tenth of the way from the mean
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..exact_config(1, 2)
        };
        let b = fit(&ds, None, &mut SquaredError, &cfg).unwrap();
        let p = b.predict(&x).unwrap();
        for (p, want) in p.iter().zip([0.45, 0.45, 0.55, 0.55]) {
            assert!((p - want).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_booster_predicts_base_score() {
        let b = Booster::constant(LossKind::Sl, 2.5, vec!["x".into()], TrainConfig::default());
        assert_eq!(b.predict(&one_feature(vec![1.0, 9.0])).unwrap(), vec![2.5, 2.5]);
        let tl = Booster::constant(LossKind::Tl, 0.0, vec!["x".into()], TrainConfig::default());
        assert_eq!(tl.predict(&one_feature(vec![1.0])).unwrap(), vec![1.0]);
    }

    #[test]
    fn stump_routes_by_threshold_and_missing() {
        let x = one_feature(vec![0.0, 1.0, f64::NAN, 10.0, 11.0, f64::NAN]);
        let y = vec![0.0, 0.0, 0.0, 4.0, 4.0, 4.0];
        let ds = x.bin(&y, 255).unwrap();
        let b = fit(&ds, None, &mut SquaredError, &exact_config(1, 2)).unwrap();
        let p = b.predict(&x).unwrap();
        let distinct: std::collections::BTreeSet<u64> = p.iter().map(|v| v.to_bits()).collect();
        assert_eq!(distinct.len(), 2);
        assert_eq!(p[0], p[1]);
        assert_eq!(p[3], p[4]);
        assert!(p[0] < p[3]);
    }

    #[test]
    fn interpolates_distinct_samples() {
        let x: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 0.7).sin() * 3.0).collect();
        let fm = one_feature(x);
        let ds = fm.bin(&y, 255).unwrap();
        let b = fit(&ds, None, &mut SquaredError, &exact_config(1, 40)).unwrap();
        for (p, t) in b.predict(&fm).unwrap().iter().zip(&y) {
            assert!((p - t).abs() < 1e-12);
        }
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let b = Booster::constant(LossKind::Sl, 0.0, vec!["x".into()], TrainConfig::default());
        let other = FeatureMatrix::new(vec!["z".into()], vec![vec![1.0]]).unwrap();
        assert!(matches!(b.predict(&other), Err(Error::Data(_))));
    }

    #[test]
    fn early_stopping_picks_best_iteration() {
        let x: Vec<f64> = (0..200).map(|i| (i % 20) as f64).collect();
        let y: Vec<f64> = (0..200).map(|i| ((i * 7919) % 13) as f64).collect();
        let fm = one_feature(x.clone());
        let ds = fm.bin(&y, 255).unwrap();
        let vy: Vec<f64> = x.iter().map(|v| v * 0.1).collect();
        let vds = fm.bin_with(&vy, ds.mappers().to_vec()).unwrap();
        let cfg = TrainConfig {
            n_estimators: 200,
            learning_rate: 0.3,
            min_child_samples: 2,
            early_stopping_rounds: Some(5),
            ..TrainConfig::default()
        };
        let v = Validation {
            data: &vds,
            metric: &SquaredErrorMetric,
        };
        let b = fit(&ds, Some(v), &mut SquaredError, &cfg).unwrap();
        let metrics: Vec<f64> = b.history().iter().map(|h| h.valid_metric.unwrap()).collect();
        let argmin = metrics
            .iter()
            .enumerate()
            .fold(0, |best, (i, &m)| if m < metrics[best] { i } else { best });
        assert_eq!(b.best_iteration(), argmin + 1);
        assert!(b.trees().len() < 200);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sqrt()).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 1.37 + 0.1).collect();
        let fm = one_feature(x);
        let ds = fm.bin(&y, 255).unwrap();
        let b = fit(&ds, None, &mut SquaredError, &TrainConfig { n_estimators: 5, ..TrainConfig::default() }).unwrap();
        let back = Booster::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(b, back);
        assert_eq!(b.predict(&fm).unwrap(), back.predict(&fm).unwrap());
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let fm = one_feature(vec![]);
        let ds = fm.bin(&[], 255).unwrap();
        assert!(fit(&ds, None, &mut SquaredError, &TrainConfig::default()).is_err());
        let ds = one_feature(vec![1.0]).bin(&[1.0], 255).unwrap();
        let cfg = TrainConfig {
            num_leaves: 1,
            ..TrainConfig::default()
        };
        assert!(matches!(fit(&ds, None, &mut SquaredError, &cfg), Err(Error::InvalidArgument(_))));
    }
}
