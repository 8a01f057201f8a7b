//! Pluggable training objectives and evaluation metrics for the booster.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{sample_random_hierarchy, Hierarchy};
use crate::hloss::{
    check_lengths, hloss_metric, hloss_objective, make_context, squared_error_objective,
    tweedie_loss, tweedie_objective, GradHess, IndexMap, ObjectiveContext,
};

/// Loss family used either as objective or as early-stopping metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Squared error.
    Sl,
    /// Tweedie.
    Tl,
    /// Sparse hierarchical loss.
    Hl,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Sl => "sl",
            LossKind::Tl => "tl",
            LossKind::Hl => "hl",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sl" => Ok(LossKind::Sl),
            "tl" => Ok(LossKind::Tl),
            "hl" => Ok(LossKind::Hl),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss `{other}` (expected sl, tl or hl)"
            ))),
        }
    }
}

/// A twice-differentiable training loss on raw booster scores.
pub trait Objective: Send {
    fn kind(&self) -> LossKind;

    /// Per-sample gradient and second derivative at `raw`. `iteration` lets
    /// stateful objectives (e.g. resampled hierarchies) change over training.
    fn grad_hess(&mut self, iteration: usize, raw: &[f64], targets: &[f64]) -> Result<GradHess>;

    /// The objective's own loss value at `raw`.
    fn loss(&self, raw: &[f64], targets: &[f64]) -> Result<f64>;

    /// Initial raw score.
    fn base_score(&self, targets: &[f64]) -> f64 {
        mean(targets)
    }
}

/// Maps raw scores to predictions for a loss family.
pub fn transform(kind: LossKind, raw: f64) -> f64 {
    match kind {
        LossKind::Tl => raw.exp(),
        LossKind::Sl | LossKind::Hl => raw,
    }
}

/// Evaluation metric on transformed predictions; lower is better.
pub trait Metric: Send + Sync {
    fn kind(&self) -> LossKind;
    fn evaluate(&self, predictions: &[f64], targets: &[f64]) -> Result<f64>;
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredError;

impl Objective for SquaredError {
    fn kind(&self) -> LossKind {
        LossKind::Sl
    }

    fn grad_hess(&mut self, _iteration: usize, raw: &[f64], targets: &[f64]) -> Result<GradHess> {
        squared_error_objective(raw, targets)
    }

    fn loss(&self, raw: &[f64], targets: &[f64]) -> Result<f64> {
        check_lengths(raw, targets)?;
        Ok(0.5 * raw.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Tweedie {
    pub rho: f64,
}

impl Default for Tweedie {
    fn default() -> Self {
        Self { rho: 1.5 }
    }
}

impl Objective for Tweedie {
    fn kind(&self) -> LossKind {
        LossKind::Tl
    }

    fn grad_hess(&mut self, _iteration: usize, raw: &[f64], targets: &[f64]) -> Result<GradHess> {
        tweedie_objective(raw, targets, self.rho)
    }

    fn loss(&self, raw: &[f64], targets: &[f64]) -> Result<f64> {
        tweedie_loss(raw, targets, self.rho)
    }

    fn base_score(&self, targets: &[f64]) -> f64 {
        mean(targets).max(1e-9).ln()
    }
}

/// The sparse hierarchical loss over a fixed pair of hierarchies.
#[derive(Debug, Clone)]
pub struct Hierarchical {
    ctx: ObjectiveContext,
}

impl Hierarchical {
    pub fn new(ctx: ObjectiveContext) -> Self {
        Self { ctx }
    }

    pub fn context(&self) -> &ObjectiveContext {
        &self.ctx
    }
}

impl Objective for Hierarchical {
    fn kind(&self) -> LossKind {
        LossKind::Hl
    }

    fn grad_hess(&mut self, _iteration: usize, raw: &[f64], targets: &[f64]) -> Result<GradHess> {
        hloss_objective(&self.ctx, raw, targets)
    }

    fn loss(&self, raw: &[f64], targets: &[f64]) -> Result<f64> {
        hloss_metric(&self.ctx, raw, targets)
    }
}

/// Hierarchical loss whose cross-sectional hierarchy is redrawn at random
/// every `every` iterations.
#[derive(Debug, Clone)]
pub struct RandomHierarchical {
    h_te: Hierarchy,
    index_map: IndexMap,
    max_levels: usize,
    max_categories: usize,
    every: usize,
    seed: u64,
    current: Option<(usize, ObjectiveContext)>,
}

impl RandomHierarchical {
    pub fn new(
        h_te: Hierarchy,
        index_map: IndexMap,
        max_levels: usize,
        max_categories: usize,
        every: usize,
        seed: u64,
    ) -> Result<Self> {
        if every == 0 {
            return Err(Error::InvalidArgument("resampling frequency must be at least 1".into()));
        }
        Ok(Self {
            h_te,
            index_map,
            max_levels,
            max_categories,
            every,
            seed,
            current: None,
        })
    }

    fn context_for(&mut self, iteration: usize) -> Result<&ObjectiveContext> {
        let epoch = iteration / self.every;
        if self.current.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let n_b = self.index_map.shape().0;
            let seed = self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64);
            let h_cs = sample_random_hierarchy(n_b, self.max_levels, self.max_categories, seed)?;
            let ctx = make_context(h_cs, self.h_te.clone(), self.index_map.clone())?;
            self.current = Some((epoch, ctx));
        }
        Ok(&self.current.as_ref().expect("just set").1)
    }
}

impl Objective for RandomHierarchical {
    fn kind(&self) -> LossKind {
        LossKind::Hl
    }

    fn grad_hess(&mut self, iteration: usize, raw: &[f64], targets: &[f64]) -> Result<GradHess> {
        let ctx = self.context_for(iteration)?;
        hloss_objective(ctx, raw, targets)
    }

    fn loss(&self, raw: &[f64], targets: &[f64]) -> Result<f64> {
        match &self.current {
            Some((_, ctx)) => hloss_metric(ctx, raw, targets),
            None => SquaredError.loss(raw, targets),
        }
    }
}

/// Mean squared error.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredErrorMetric;

impl Metric for SquaredErrorMetric {
    fn kind(&self) -> LossKind {
        LossKind::Sl
    }

    fn evaluate(&self, predictions: &[f64], targets: &[f64]) -> Result<f64> {
        check_lengths(predictions, targets)?;
        if predictions.is_empty() {
            return Ok(0.0);
        }
        let sse: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
        Ok(sse / predictions.len() as f64)
    }
}

/// Mean Tweedie negative log-likelihood on predicted means.
#[derive(Debug, Clone, Copy)]
pub struct TweedieMetric {
    pub rho: f64,
}

impl Default for TweedieMetric {
    fn default() -> Self {
        Self { rho: 1.5 }
    }
}

impl Metric for TweedieMetric {
    fn kind(&self) -> LossKind {
        LossKind::Tl
    }

    fn evaluate(&self, predictions: &[f64], targets: &[f64]) -> Result<f64> {
        check_lengths(predictions, targets)?;
        if predictions.is_empty() {
            return Ok(0.0);
        }
        let raw: Vec<f64> = predictions.iter().map(|p| p.max(1e-12).ln()).collect();
        Ok(tweedie_loss(&raw, targets, self.rho)? / predictions.len() as f64)
    }
}

/// Hierarchical loss evaluated on its own (e.g. validation) panel.
#[derive(Debug, Clone)]
pub struct HierarchicalMetric {
    ctx: ObjectiveContext,
}

impl HierarchicalMetric {
    pub fn new(ctx: ObjectiveContext) -> Self {
        Self { ctx }
    }
}

impl Metric for HierarchicalMetric {
    fn kind(&self) -> LossKind {
        LossKind::Hl
    }

    fn evaluate(&self, predictions: &[f64], targets: &[f64]) -> Result<f64> {
        hloss_metric(&self.ctx, predictions, targets)
    }
}
