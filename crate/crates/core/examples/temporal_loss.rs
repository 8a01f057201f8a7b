//! Training with the hierarchical loss extended by a temporal hierarchy
//! (weeks and months) and with randomly resampled cross-sectional
//! hierarchies, against the plain cross-sectional loss.

use hiercast::gbdt::TrainConfig;
use hiercast::hierarchy::Frequency;
use hiercast::objective::LossKind;
use hiercast::pipeline::{
    format_table, generate, scenario_run, synth_hierarchy_spec, Measure, RandomHierarchyConfig, ScenarioConfig,
    SynthConfig,
};

fn main() -> hiercast::Result<()> {
    let panel = generate(&SynthConfig {
        n_series: 100,
        n_days: 600,
        ..SynthConfig::default()
    })?;
    let h = panel.hierarchy(&synth_hierarchy_spec())?;
    let base = ScenarioConfig {
        objective: LossKind::Hl,
        metric: LossKind::Hl,
        n_validation_sets: 1,
        train_days: Some(364),
        train: TrainConfig {
            n_estimators: 300,
            early_stopping_rounds: Some(20),
            ..TrainConfig::default()
        },
        ..ScenarioConfig::default()
    };
    let variants = [
        ("cross-sectional", base.clone()),
        (
            "with weeks and months",
            ScenarioConfig {
                temporal: vec![Frequency::Week, Frequency::Month],
                ..base.clone()
            },
        ),
        (
            "random hierarchies",
            ScenarioConfig {
                random_hierarchy: Some(RandomHierarchyConfig::default()),
                ..base.clone()
            },
        ),
    ];
    let mut reports = Vec::new();
    for (name, cfg) in variants {
        let mut r = scenario_run(&panel, &h, &cfg, 0)?;
        println!("{name:<24} best iterations {:?}", r.trained.best_iterations);
        r.report.name = name.to_string();
        reports.push(r.report);
    }
    println!("\nRMSE\n{}", format_table(&reports, Measure::Rmse, false));
    Ok(())
}
