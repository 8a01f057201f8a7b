use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate, EvalReport};
use super::features::build_features;
use super::forecast::recursive_forecast;
use super::panel::PanelDataset;
use super::search::{best_trial, sample_train_config, Trial};
use crate::error::{Error, Result};
use crate::gbdt::{fit, BinnedDataset, Booster, IterationLog, TrainConfig, Validation};
use crate::hierarchy::{build_temporal, Frequency, Hierarchy};
use crate::hloss::{make_context, IndexMap, ObjectiveContext};
use crate::linalg::DenseMatrix;
use crate::objective::{
    Hierarchical, HierarchicalMetric, LossKind, Metric, Objective, RandomHierarchical, SquaredError,
    SquaredErrorMetric, Tweedie, TweedieMetric,
};
use crate::reconcile::{fit_erm, fit_reconciler, Method, Reconciler};

/// Which series the forecasting models are trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// One model on the bottom-level series; aggregates are summed forecasts.
    BottomUp,
    /// One model per hierarchy level, including the bottom level.
    SeparateAggregations,
    /// One model on every series of the hierarchy.
    Global,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::BottomUp => "bottom_up",
            Scenario::SeparateAggregations => "separate_aggregations",
            Scenario::Global => "global",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bottom_up" => Ok(Scenario::BottomUp),
            "separate_aggregations" => Ok(Scenario::SeparateAggregations),
            "global" => Ok(Scenario::Global),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario `{other}` (expected bottom-up, separate-aggregations or global)"
            ))),
        }
    }
}

/// Training-time resampling of a random cross-sectional hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomHierarchyConfig {
    pub max_levels: usize,
    pub max_categories: usize,
    /// Resample every this many boosting iterations.
    pub hier_freq: usize,
}

impl Default for RandomHierarchyConfig {
    fn default() -> Self {
        Self {
            max_levels: 10,
            max_categories: 100,
            hier_freq: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub objective: LossKind,
    pub metric: LossKind,
    pub reconciliation: Option<Method>,
    pub train: TrainConfig,
    /// Forecast horizon and length of each validation window, in days.
    pub horizon: usize,
    /// Rolling validation windows used to pick the number of trees; 0 fits
    /// `train.n_estimators` trees without validation.
    pub n_validation_sets: usize,
    /// Days of history per training window; all available when absent.
    pub train_days: Option<usize>,
    /// Temporal aggregation levels added to the hierarchical loss.
    pub temporal: Vec<Frequency>,
    /// Train the hierarchical loss on random hierarchies instead of the
    /// true one.
    pub random_hierarchy: Option<RandomHierarchyConfig>,
    pub tweedie_rho: f64,
    /// Days of in-sample residuals used to fit reconcilers; all training
    /// days when absent.
    pub residual_days: Option<usize>,
    /// Random hyperparameter draws tried per model in addition to `train`;
    /// the draw with the best mean validation metric is kept.
    pub search_trials: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::BottomUp,
            objective: LossKind::Sl,
            metric: LossKind::Sl,
            reconciliation: None,
            train: TrainConfig::default(),
            horizon: 28,
            n_validation_sets: 3,
            train_days: Some(3 * 364),
            temporal: Vec::new(),
            random_hierarchy: None,
            tweedie_rho: 1.5,
            residual_days: None,
            search_trials: 0,
        }
    }
}

impl ScenarioConfig {
    /// Short run label such as `bottom_up/hl/hl/none`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.scenario,
            self.objective,
            self.metric,
            self.reconciliation.map_or("none", Method::as_str)
        )
    }

    /// Rejects combinations outside the experiment grid: the hierarchical
    /// loss only trains bottom-level models, and reconciliation only applies
    /// to scenarios whose base forecasts cover aggregates.
    pub fn validate(&self) -> Result<()> {
        let grid = "valid grid: bottom-up with sl/tl/hl objective and metric and no reconciliation; \
                    separate-aggregations or global with sl/sl and one of base, ols, wls_struct, wls_var, mint_shrink, erm";
        let bad = |why: String| Err(Error::InvalidCombination(format!("{why}; {grid}")));
        match self.scenario {
            Scenario::BottomUp => {
                if let Some(m) = self.reconciliation {
                    return bad(format!("bottom-up forecasts are coherent and take no reconciliation (got {m})"));
                }
            }
            Scenario::SeparateAggregations | Scenario::Global => {
                if self.objective != LossKind::Sl || self.metric != LossKind::Sl {
                    return bad(format!(
                        "{} runs use the sl objective and metric (got {}/{})",
                        self.scenario, self.objective, self.metric
                    ));
                }
                match self.reconciliation {
                    None => return bad(format!("{} needs a reconciliation method", self.scenario)),
                    Some(Method::BottomUp) => {
                        return bad("bottom_up is a scenario, not a reconciliation of aggregate forecasts".into())
                    }
                    Some(_) => {}
                }
            }
        }
        if (self.random_hierarchy.is_some() || !self.temporal.is_empty()) && self.objective != LossKind::Hl {
            return bad("random and temporal hierarchies need the hl objective".into());
        }
        if self.search_trials > 0 && self.n_validation_sets == 0 {
            return Err(Error::InvalidArgument("hyperparameter search needs validation sets".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        self.train.validate()
    }
}

/// Training and validation day ranges of one rolling window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub train: Range<usize>,
    pub valid: Range<usize>,
}

/// Non-overlapping validation windows of `window` days ending at `origin`,
/// most recent first; each trains on up to `train_days` days before it.
pub fn rolling_windows(origin: usize, window: usize, n_sets: usize, train_days: Option<usize>) -> Result<Vec<Window>> {
    (1..=n_sets)
        .map(|k| {
            let end = origin
                .checked_sub((k - 1) * window)
                .filter(|&e| e >= window + 1)
                .ok_or_else(|| Error::InvalidArgument(format!("not enough history for {n_sets} validation windows")))?;
            let start = end - window;
            let from = train_days.map_or(0, |d| start.saturating_sub(d));
            Ok(Window {
                train: from..start,
                valid: start..end,
            })
        })
        .collect()
}

/// Per-iteration training history of one fit.
#[derive(Debug, Clone)]
pub struct FitLog {
    /// Index of the model within the scenario.
    pub model: usize,
    /// Validation window, or `None` for the final fit.
    pub window: Option<usize>,
    pub history: Vec<IterationLog>,
}

/// Fitted models and reconciler of one scenario, ready to forecast from
/// `origin`.
#[derive(Debug, Clone)]
pub struct TrainedScenario {
    pub config: ScenarioConfig,
    pub origin: usize,
    /// Hierarchy rows covered by each model, in forecast row order.
    pub model_rows: Vec<Vec<usize>>,
    pub boosters: Vec<Booster>,
    pub reconciler: Option<Reconciler>,
    pub best_iterations: Vec<usize>,
    pub logs: Vec<FitLog>,
    /// Hyperparameter search trials of every model (empty without search).
    pub trials: Vec<Trial>,
}

impl TrainedScenario {
    /// Hierarchy rows of the base forecasts, in order.
    pub fn base_rows(&self) -> Vec<usize> {
        self.model_rows.iter().flatten().copied().collect()
    }
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub report: EvalReport,
    /// Final forecasts for every hierarchy row, `n x horizon`.
    pub forecasts: DenseMatrix,
    /// Forecasts before reconciliation, one row per entry of
    /// `trained.base_rows()`.
    pub base_forecasts: DenseMatrix,
    pub trained: TrainedScenario,
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

/// A model's series: a panel and the hierarchy rows its series occupy.
struct ModelPanel {
    panel: PanelDataset,
    rows: Vec<usize>,
}

fn model_panels(panel: &PanelDataset, h: &Hierarchy, scenario: Scenario) -> Result<Vec<ModelPanel>> {
    if h.n_b() != panel.n_series() {
        return Err(Error::shape(format!("{} bottom series", panel.n_series()), format!("{}", h.n_b())));
    }
    let bottom_level = h.levels().len().saturating_sub(1) as u32;
    match scenario {
        Scenario::BottomUp => Ok(vec![ModelPanel {
            panel: panel.clone().with_level(bottom_level),
            rows: (h.n_a()..h.n()).collect(),
        }]),
        Scenario::Global => Ok(vec![ModelPanel {
            panel: panel.aggregate(h)?,
            rows: (0..h.n()).collect(),
        }]),
        Scenario::SeparateAggregations => {
            let all = panel.aggregate(h)?;
            Ok(h.levels()
                .iter()
                .map(|l| {
                    let rows: Vec<usize> = l.rows.clone().collect();
                    ModelPanel {
                        panel: all.select_series(&rows),
                        rows,
                    }
                })
                .collect())
        }
    }
}

/// Default forecast origin: the last `horizon` days are held out.
pub fn test_origin(panel: &PanelDataset, horizon: usize) -> Result<usize> {
    panel
        .n_days()
        .checked_sub(horizon)
        .filter(|&o| o > 0)
        .ok_or_else(|| Error::InvalidArgument("panel is shorter than the forecast horizon".into()))
}

/// Fits the scenario's models on days before `origin` and, when configured,
/// a reconciler on their in-sample errors.
pub fn train_scenario(
    panel: &PanelDataset,
    h: &Hierarchy,
    cfg: &ScenarioConfig,
    origin: usize,
    seed: u64,
) -> Result<TrainedScenario> {
    cfg.validate()?;
    if origin == 0 || origin > panel.n_days() {
        return Err(Error::InvalidArgument(format!(
            "origin {origin} outside the panel's 1..={} days",
            panel.n_days()
        )));
    }
    let mut train_cfg = cfg.train.clone();
    train_cfg.rng_seed = seed;
    let models = model_panels(panel, h, cfg.scenario)?;
    let mut boosters = Vec::with_capacity(models.len());
    let mut best_iterations = Vec::new();
    let mut logs = Vec::new();
    let mut trials = Vec::new();
    for (m, mp) in models.iter().enumerate() {
        let fitted = train_model(&mp.panel, h, cfg, &train_cfg, origin, seed, m)?;
        let (booster, best, histories) = (fitted.booster, fitted.best_iterations, fitted.histories);
        trials.extend(fitted.trials);
        logs.extend(histories.into_iter().enumerate().map(|(w, history)| FitLog {
            model: m,
            window: Some(w),
            history,
        }));
        logs.push(FitLog {
            model: m,
            window: None,
            history: booster.history().to_vec(),
        });
        boosters.push(booster);
        best_iterations.extend(best);
    }
    let reconciler = match cfg.reconciliation {
        None => None,
        Some(method) => Some(fit_from_residuals(method, &models, &boosters, h, cfg, origin)?),
    };
    Ok(TrainedScenario {
        config: cfg.clone(),
        origin,
        model_rows: models.into_iter().map(|m| m.rows).collect(),
        boosters,
        reconciler,
        best_iterations,
        logs,
        trials,
    })
}

/// Recursive base forecasts of every model for days
/// `origin..origin + horizon`, one row per entry of `trained.base_rows()`.
pub fn forecast_base(
    trained: &TrainedScenario,
    panel: &PanelDataset,
    h: &Hierarchy,
    origin: usize,
) -> Result<DenseMatrix> {
    let horizon = trained.config.horizon;
    let models = model_panels(panel, h, trained.config.scenario)?;
    if models.len() != trained.boosters.len() {
        return Err(Error::shape(
            format!("{} models", models.len()),
            format!("{}", trained.boosters.len()),
        ));
    }
    let mut base = DenseMatrix::zeros(trained.base_rows().len(), horizon);
    let mut next = 0;
    for (mp, booster) in models.iter().zip(&trained.boosters) {
        let f = recursive_forecast(booster, &mp.panel, origin, horizon)?;
        for k in 0..mp.rows.len() {
            base.row_mut(next).copy_from_slice(f.row(k));
            next += 1;
        }
    }
    Ok(base)
}

/// Turns base forecasts into forecasts for every hierarchy row: bottom-up
/// aggregation, or the fitted reconciler.
pub fn complete_forecasts(trained: &TrainedScenario, h: &Hierarchy, base: &DenseMatrix) -> Result<DenseMatrix> {
    match &trained.reconciler {
        Some(r) => r.reconcile_panel(base),
        None => h.aggregate_rows(base),
    }
}

/// Trains, forecasts the last `horizon` days of `panel`, reconciles and
/// evaluates one configuration. `h` is the cross-sectional hierarchy over the
/// panel's series, which are its bottom level.
pub fn scenario_run(panel: &PanelDataset, h: &Hierarchy, cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioResult> {
    cfg.validate()?;
    let origin = test_origin(panel, cfg.horizon)?;

    let t0 = Instant::now();
    let trained = train_scenario(panel, h, cfg, origin, seed)?;
    let train_seconds = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let base = forecast_base(&trained, panel, h, origin)?;
    let forecasts = complete_forecasts(&trained, h, &base)?;
    let predict_seconds = t1.elapsed().as_secs_f64();

    let actuals = DenseMatrix::from_fn(panel.n_series(), cfg.horizon, |s, k| panel.target().get(s, origin + k));
    let report = evaluate(&cfg.label(), &forecasts, &actuals, h)?;
    Ok(ScenarioResult {
        report,
        forecasts,
        base_forecasts: base,
        trained,
        train_seconds,
        predict_seconds,
    })
}

/// Runs one configuration for every seed and summarizes the reports.
pub fn scenario_seeds(
    panel: &PanelDataset,
    h: &Hierarchy,
    cfg: &ScenarioConfig,
    seeds: &[u64],
) -> Result<(EvalReport, Vec<ScenarioResult>)> {
    let runs = seeds
        .iter()
        .map(|&s| scenario_run(panel, h, cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<EvalReport> = runs.iter().map(|r| r.report.clone()).collect();
    Ok((EvalReport::combine(&cfg.label(), &reports)?, runs))
}

struct Prepared {
    data: BinnedDataset,
    n_series: usize,
    days: Range<usize>,
}

fn prepare(panel: &PanelDataset, days: Range<usize>, mappers: Option<&BinnedDataset>, max_bins: usize) -> Result<Prepared> {
    let frame = build_features(panel, days.clone())?;
    let data = match mappers {
        None => frame.features.bin(&frame.target, max_bins)?,
        Some(train) => frame.features.bin_with(&frame.target, train.mappers().to_vec())?,
    };
    Ok(Prepared {
        data,
        n_series: panel.n_series(),
        days,
    })
}

fn hl_context(h: &Hierarchy, panel: &PanelDataset, p: &Prepared, temporal: &[Frequency]) -> Result<ObjectiveContext> {
    let t = p.days.len();
    let index_map = IndexMap::full(p.n_series, t);
    if temporal.is_empty() {
        ObjectiveContext::cross_sectional(h.clone(), t, index_map)
    } else {
        let dates: Vec<_> = p.days.clone().map(|d| panel.date(d)).collect();
        make_context(h.clone(), build_temporal(&dates, temporal)?, index_map)
    }
}

fn make_objective(
    cfg: &ScenarioConfig,
    h: &Hierarchy,
    panel: &PanelDataset,
    p: &Prepared,
    seed: u64,
) -> Result<Box<dyn Objective>> {
    Ok(match cfg.objective {
        LossKind::Sl => Box::new(SquaredError),
        LossKind::Tl => Box::new(Tweedie { rho: cfg.tweedie_rho }),
        LossKind::Hl => match &cfg.random_hierarchy {
            None => Box::new(Hierarchical::new(hl_context(h, panel, p, &cfg.temporal)?)),
            Some(r) => {
                let ctx = hl_context(h, panel, p, &cfg.temporal)?;
                Box::new(RandomHierarchical::new(
                    ctx.h_te().clone(),
                    ctx.index_map().clone(),
                    r.max_levels,
                    r.max_categories,
                    r.hier_freq,
                    seed,
                )?)
            }
        },
    })
}

fn make_metric(cfg: &ScenarioConfig, h: &Hierarchy, panel: &PanelDataset, p: &Prepared) -> Result<Box<dyn Metric>> {
    Ok(match cfg.metric {
        LossKind::Sl => Box::new(SquaredErrorMetric),
        LossKind::Tl => Box::new(TweedieMetric { rho: cfg.tweedie_rho }),
        LossKind::Hl => Box::new(HierarchicalMetric::new(hl_context(h, panel, p, &cfg.temporal)?)),
    })
}

struct FittedModel {
    booster: Booster,
    best_iterations: Vec<usize>,
    histories: Vec<Vec<IterationLog>>,
    trials: Vec<Trial>,
}

/// Fits one booster per rolling validation window with early stopping.
fn fit_windows(
    panel: &PanelDataset,
    h: &Hierarchy,
    cfg: &ScenarioConfig,
    train_cfg: &TrainConfig,
    origin: usize,
    seed: u64,
) -> Result<Vec<Booster>> {
    let mut out = Vec::new();
    for w in rolling_windows(origin, cfg.horizon, cfg.n_validation_sets, cfg.train_days)? {
        let train = prepare(panel, w.train.clone(), None, train_cfg.max_bins)?;
        let valid = prepare(panel, w.valid.clone(), Some(&train.data), train_cfg.max_bins)?;
        let mut objective = make_objective(cfg, h, panel, &train, seed)?;
        let metric = make_metric(cfg, h, panel, &valid)?;
        let booster = fit(
            &train.data,
            Some(Validation {
                data: &valid.data,
                metric: metric.as_ref(),
            }),
            objective.as_mut(),
            train_cfg,
        )?;
        log::info!(
            "window train {:?} valid {:?}: best iteration {}",
            w.train,
            w.valid,
            booster.best_iteration()
        );
        out.push(booster);
    }
    Ok(out)
}

fn best_valid_metric(b: &Booster) -> f64 {
    b.history()
        .iter()
        .filter_map(|l| l.valid_metric)
        .fold(f64::INFINITY, f64::min)
}

/// Picks the number of trees (and, with a search, the hyperparameters) on
/// rolling validation windows, then refits on the history right before
/// `origin`.
fn train_model(
    panel: &PanelDataset,
    h: &Hierarchy,
    cfg: &ScenarioConfig,
    train_cfg: &TrainConfig,
    origin: usize,
    seed: u64,
    model: usize,
) -> Result<FittedModel> {
    let mut best = Vec::new();
    let mut histories = Vec::new();
    let mut trials = Vec::new();
    let mut chosen_cfg = cfg.clone();
    let mut final_cfg = train_cfg.clone();
    if cfg.n_validation_sets > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (model as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut fits = Vec::new();
        for trial in 0..=cfg.search_trials {
            let (tc, hier_freq) = if trial == 0 {
                (train_cfg.clone(), cfg.random_hierarchy.as_ref().map(|r| r.hier_freq))
            } else {
                sample_train_config(train_cfg, cfg.random_hierarchy.as_ref(), &mut rng)
            };
            let mut trial_cfg = cfg.clone();
            if let (Some(r), Some(f)) = (trial_cfg.random_hierarchy.as_mut(), hier_freq) {
                r.hier_freq = f;
            }
            let boosters = fit_windows(panel, h, &trial_cfg, &tc, origin, seed)?;
            let score = boosters.iter().map(best_valid_metric).sum::<f64>() / boosters.len() as f64;
            if cfg.search_trials > 0 {
                log::info!("model {model} trial {trial}: score {score:.6}");
            }
            trials.push(Trial {
                model,
                trial,
                train: tc,
                hier_freq,
                score,
                best_iterations: boosters.iter().map(Booster::best_iteration).collect(),
            });
            fits.push((trial_cfg, boosters));
        }
        let pick = best_trial(&trials).unwrap_or(0);
        let (picked_cfg, boosters) = fits.swap_remove(pick);
        chosen_cfg = picked_cfg;
        final_cfg = trials[pick].train.clone();
        best = trials[pick].best_iterations.clone();
        histories = boosters.iter().map(|b| b.history().to_vec()).collect();
        let mean = best.iter().sum::<usize>() as f64 / best.len() as f64;
        final_cfg.n_estimators = (mean.round() as usize).max(1);
        if cfg.search_trials == 0 {
            trials.clear();
        }
    }
    final_cfg.early_stopping_rounds = None;
    let from = cfg.train_days.map_or(0, |d| origin.saturating_sub(d));
    let train = prepare(panel, from..origin, None, train_cfg.max_bins)?;
    let mut objective = make_objective(&chosen_cfg, h, panel, &train, seed)?;
    let booster = fit(&train.data, None, objective.as_mut(), &final_cfg)?;
    Ok(FittedModel {
        booster,
        best_iterations: best,
        histories,
        trials,
    })
}

/// Fits a reconciler from one-step in-sample fitted values on the days
/// before `origin`.
fn fit_from_residuals(
    method: Method,
    models: &[ModelPanel],
    boosters: &[Booster],
    h: &Hierarchy,
    cfg: &ScenarioConfig,
    origin: usize,
) -> Result<Reconciler> {
    if !(method.needs_residuals() || method == Method::Erm) {
        return fit_reconciler(method, h, None);
    }
    let span = cfg
        .residual_days
        .or(cfg.train_days)
        .unwrap_or(origin)
        .min(origin);
    let from = origin - span;
    let mut fitted = DenseMatrix::zeros(h.n(), span);
    let mut actual = DenseMatrix::zeros(h.n(), span);
    for (mp, booster) in models.iter().zip(boosters) {
        let frame = build_features(&mp.panel, from..origin)?;
        let preds = booster.predict(&frame.features)?;
        for (i, p) in preds.iter().enumerate() {
            let row = mp.rows[frame.series[i] as usize];
            let col = frame.day[i] as usize - from;
            fitted.set(row, col, *p);
            actual.set(row, col, frame.target[i]);
        }
    }
    if method == Method::Erm {
        fit_erm(h, &actual, &fitted)
    } else {
        fit_reconciler(method, h, Some(&fitted.sub(&actual)?))
    }
}
