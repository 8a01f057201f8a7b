//! Full-M5 comparison of bottom-up HL/HL against SL/SL.
//!
//! Needs the M5 files (sales_train_evaluation.csv or
//! sales_train_validation.csv, calendar.csv, sell_prices.csv) in the
//! directory given as the first argument or in `M5_DIR`. Takes hours and a lot
//! of memory; the relative all-series RMSE should land in [0.82, 0.95].
//!
//! cargo run --example m5_full -- /data/m5 [seeds]

use std::path::PathBuf;

use hiercast::gbdt::TrainConfig;
use hiercast::objective::LossKind;
use hiercast::pipeline::{format_table, load_m5, m5_hierarchy_spec, scenario_seeds, Measure, ScenarioConfig, ALL_SERIES};

fn main() -> hiercast::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .or_else(|| std::env::var("M5_DIR").ok())
        .map(PathBuf::from)
        .ok_or_else(|| hiercast::Error::InvalidArgument("pass the M5 directory or set M5_DIR".into()))?;
    let n_seeds: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(10);
    let sales = ["sales_train_evaluation.csv", "sales_train_validation.csv"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.exists())
        .ok_or_else(|| hiercast::Error::InvalidArgument(format!("no M5 sales file in {}", dir.display())))?;
    let panel = load_m5(&sales, &dir.join("calendar.csv"), &dir.join("sell_prices.csv"))?;
    let h = panel.hierarchy(&m5_hierarchy_spec())?;
    println!("{} series, {} days, {} hierarchy rows", panel.n_series(), panel.n_days(), h.n());

    let sl = ScenarioConfig {
        train: TrainConfig {
            feature_fraction: 0.8,
            bagging_fraction: 0.8,
            ..TrainConfig::default()
        },
        ..ScenarioConfig::default()
    };
    let hl = ScenarioConfig {
        objective: LossKind::Hl,
        metric: LossKind::Hl,
        ..sl.clone()
    };
    let seeds: Vec<u64> = (0..n_seeds).collect();
    let (base, _) = scenario_seeds(&panel, &h, &sl, &seeds)?;
    let (mut ours, _) = scenario_seeds(&panel, &h, &hl, &seeds)?;
    ours.relative_to(&base)?;
    let mut base_rel = base.clone();
    base_rel.relative_to(&base)?;
    println!("{}", format_table(&[base_rel, ours.clone()], Measure::Rmse, true));
    let rel = ours.level(ALL_SERIES).and_then(|l| l.rel_rmse).unwrap_or(f64::NAN);
    let ok = (0.82..=0.95).contains(&rel);
    println!("m5-full {} HL/HL all-series relative RMSE {rel:.3} (target 0.82..0.95)", if ok { "PASS" } else { "FAIL" });
    if !ok {
        std::process::exit(1);
    }
    Ok(())
}
