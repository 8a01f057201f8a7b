//! Bottom-up forecasting with the squared-error and hierarchical losses on a
//! synthetic retail panel, reported relative to the squared-error run.
//!
//! cargo run --release --example compare_losses -- [n_series] [n_days] [seeds]

use hiercast::gbdt::TrainConfig;
use hiercast::objective::LossKind;
use hiercast::pipeline::{format_table, generate, scenario_seeds, synth_hierarchy_spec, Measure, ScenarioConfig, SynthConfig};

fn main() -> hiercast::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let n_series = args.first().copied().unwrap_or(200);
    let n_days = args.get(1).copied().unwrap_or(730);
    let n_seeds = args.get(2).copied().unwrap_or(3) as u64;

    let panel = generate(&SynthConfig {
        n_series,
        n_days,
        ..SynthConfig::default()
    })?;
    let h = panel.hierarchy(&synth_hierarchy_spec())?;
    let seeds: Vec<u64> = (0..n_seeds).collect();

    let mut reports = Vec::new();
    for (objective, metric) in [(LossKind::Sl, LossKind::Sl), (LossKind::Hl, LossKind::Hl), (LossKind::Tl, LossKind::Sl)] {
        let cfg = ScenarioConfig {
            objective,
            metric,
            n_validation_sets: 1,
            train_days: Some(364),
            train: TrainConfig {
                n_estimators: 300,
                learning_rate: 0.05,
                feature_fraction: 0.8,
                bagging_fraction: 0.8,
                early_stopping_rounds: Some(20),
                ..TrainConfig::default()
            },
            ..ScenarioConfig::default()
        };
        let t = std::time::Instant::now();
        let (report, runs) = scenario_seeds(&panel, &h, &cfg, &seeds)?;
        let trees: Vec<usize> = runs.iter().flat_map(|r| r.trained.best_iterations.clone()).collect();
        println!("{:<20} {:>6.1}s  best iterations {:?}", cfg.label(), t.elapsed().as_secs_f64(), trees);
        reports.push(report);
    }
    let baseline = reports[0].clone();
    for r in &mut reports {
        r.relative_to(&baseline)?;
    }
    println!("\nRMSE\n{}", format_table(&reports, Measure::Rmse, false));
    println!("Relative RMSE\n{}", format_table(&reports, Measure::Rmse, true));
    Ok(())
}
