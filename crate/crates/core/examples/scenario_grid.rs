//! The three training scenarios side by side on one synthetic panel:
//! bottom-up with each loss, and separate-aggregations and global models
//! with each reconciliation method.
//!
//! cargo run --example scenario_grid -- [n_series]

use hiercast::gbdt::TrainConfig;
use hiercast::objective::LossKind;
use hiercast::pipeline::{
    format_table, generate, scenario_run, synth_hierarchy_spec, Measure, Scenario, ScenarioConfig, SynthConfig,
};
use hiercast::reconcile::Method;

fn main() -> hiercast::Result<()> {
    let n_series = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let panel = generate(&SynthConfig {
        n_series,
        n_days: 730,
        ..SynthConfig::default()
    })?;
    let h = panel.hierarchy(&synth_hierarchy_spec())?;
    let base = ScenarioConfig {
        n_validation_sets: 1,
        train_days: Some(364),
        train: TrainConfig {
            n_estimators: 300,
            early_stopping_rounds: Some(20),
            ..TrainConfig::default()
        },
        ..ScenarioConfig::default()
    };
    let mut grid = Vec::new();
    for (objective, metric) in [(LossKind::Sl, LossKind::Sl), (LossKind::Sl, LossKind::Hl), (LossKind::Hl, LossKind::Hl)] {
        grid.push(ScenarioConfig {
            objective,
            metric,
            ..base.clone()
        });
    }
    for scenario in [Scenario::SeparateAggregations, Scenario::Global] {
        for method in [Method::Base, Method::Ols, Method::WlsStruct, Method::WlsVar, Method::MintShrink, Method::Erm] {
            grid.push(ScenarioConfig {
                scenario,
                reconciliation: Some(method),
                ..base.clone()
            });
        }
    }

    let mut reports = Vec::new();
    for cfg in &grid {
        let r = scenario_run(&panel, &h, cfg, 0)?;
        println!(
            "{:<40} models {:>2}  train {:>6.2}s  predict {:>5.2}s",
            cfg.label(),
            r.trained.boosters.len(),
            r.train_seconds,
            r.predict_seconds
        );
        reports.push(r.report);
    }
    let baseline = reports[0].clone();
    for r in &mut reports {
        r.relative_to(&baseline)?;
    }
    println!("\nRelative RMSE\n{}", format_table(&reports, Measure::Rmse, true));
    println!("Relative MAE\n{}", format_table(&reports, Measure::Mae, true));
    Ok(())
}
