//! Random search over the booster's hyperparameters for the bottom-up
//! hierarchical-loss model, scored on rolling validation windows.

use hiercast::gbdt::TrainConfig;
use hiercast::objective::LossKind;
use hiercast::pipeline::{generate, synth_hierarchy_spec, test_origin, train_scenario, ScenarioConfig, SynthConfig};

fn main() -> hiercast::Result<()> {
    let panel = generate(&SynthConfig {
        n_series: 60,
        n_days: 600,
        ..SynthConfig::default()
    })?;
    let h = panel.hierarchy(&synth_hierarchy_spec())?;
    let cfg = ScenarioConfig {
        objective: LossKind::Hl,
        metric: LossKind::Hl,
        n_validation_sets: 2,
        train_days: Some(364),
        search_trials: 6,
        train: TrainConfig {
            n_estimators: 200,
            early_stopping_rounds: Some(20),
            ..TrainConfig::default()
        },
        ..ScenarioConfig::default()
    };
    let origin = test_origin(&panel, cfg.horizon)?;
    let trained = train_scenario(&panel, &h, &cfg, origin, 0)?;
    println!("trial  score      leaves  min_child  l1        l2        ff    bf    freq  best");
    for t in &trained.trials {
        let c = &t.train;
        println!(
            "{:>5}  {:<9.5}  {:>6}  {:>9}  {:<8.2e}  {:<8.2e}  {:.2}  {:.2}  {:>4}  {:?}",
            t.trial,
            t.score,
            c.num_leaves,
            c.min_child_samples,
            c.lambda_l1,
            c.lambda_l2,
            c.feature_fraction,
            c.bagging_fraction,
            c.bagging_freq,
            t.best_iterations
        );
    }
    let chosen = trained.boosters[0].config();
    println!(
        "kept num_leaves {} min_child_samples {} with {} trees",
        chosen.num_leaves,
        chosen.min_child_samples,
        trained.boosters[0].trees().len()
    );
    Ok(())
}
