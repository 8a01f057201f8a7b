//! Data loading, feature engineering, forecasting, evaluation and the
//! scenario runner built on the model and reconciliation modules.

mod evaluate;
mod features;
mod forecast;
mod panel;
mod scenario;
mod search;
mod synth;

pub use evaluate::{
    coherence_violation, evaluate, format_table, read_reports_csv, write_reports_csv, EvalReport, LevelStats,
    Measure, ALL_SERIES, REPORT_CSV_HEADER,
};
pub use features::{build_features, build_features_with_history, feature_names, FeatureFrame, LAGS, MOVING_AVERAGES};
pub use forecast::{naive_forecast, recursive_forecast, NaiveKind, Predictor};
pub use panel::{
    load_m5, load_panel, m5_hierarchy_spec, read_long_csv, read_metadata_csv, weeks_on_sale, Exog, ExogColumn, PanelDataset,
    DATE_FORMAT, SELL_PRICE, WEEKS_ON_SALE,
};
pub use scenario::{
    complete_forecasts, forecast_base, rolling_windows, scenario_run, scenario_seeds, test_origin, train_scenario,
    FitLog, RandomHierarchyConfig, Scenario, ScenarioConfig, ScenarioResult, TrainedScenario, Window,
};
pub use search::{best_trial, sample_train_config, Trial};
pub use synth::{generate, synth_hierarchy_spec, SynthConfig};
