//! Uniform random search over booster hyperparameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::RandomHierarchyConfig;
use crate::gbdt::TrainConfig;

/// One evaluated hyperparameter draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Index of the model within the scenario.
    pub model: usize,
    /// 0 is the unmodified configuration.
    pub trial: usize,
    pub train: TrainConfig,
    /// Resampling frequency of the random hierarchy, when one is used.
    pub hier_freq: Option<usize>,
    /// Mean over validation windows of the best validation metric.
    pub score: f64,
    pub best_iterations: Vec<usize>,
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

/// Draws the searchable parameters from their ranges; everything else is
/// copied from `base`.
///
/// | parameter | range |
/// |---|---|
/// | lambda_l1, lambda_l2 | log-uniform 1e-8 .. 10 |
/// | num_leaves | uniform 8 .. 1024 |
/// | feature_fraction, bagging_fraction | uniform 0.4 .. 1.0 |
/// | bagging_freq | uniform 1 .. 7 |
/// | min_child_samples | log-uniform 5 .. 5000 |
/// | hier_freq (random hierarchies) | uniform 1 .. 10 |
pub fn sample_train_config<R: Rng>(
    base: &TrainConfig,
    random: Option<&RandomHierarchyConfig>,
    rng: &mut R,
) -> (TrainConfig, Option<usize>) {
    let train = TrainConfig {
        lambda_l1: log_uniform(rng, 1e-8, 10.0),
        lambda_l2: log_uniform(rng, 1e-8, 10.0),
        num_leaves: rng.random_range(8..=1024),
        feature_fraction: rng.random_range(0.4..=1.0),
        bagging_fraction: rng.random_range(0.4..=1.0),
        bagging_freq: rng.random_range(1..=7),
        min_child_samples: log_uniform(rng, 5.0, 5000.0).round() as usize,
        ..base.clone()
    };
    let hier_freq = random.map(|_| rng.random_range(1..=10));
    (train, hier_freq)
}

/// Index of the lowest finite score; ties go to the earliest trial.
pub fn best_trial(trials: &[Trial]) -> Option<usize> {
    trials
        .iter()
        .enumerate()
        .filter(|(_, t)| t.score.is_finite())
        .min_by(|a, b| a.1.score.total_cmp(&b.1.score))
        .map(|(i, _)| i)
}
