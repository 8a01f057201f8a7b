//! Naive and seasonal-naive forecasts scored per hierarchy level, as simple
//! reference points for the learned models.

use hiercast::linalg::DenseMatrix;
use hiercast::pipeline::{
    evaluate, format_table, generate, naive_forecast, synth_hierarchy_spec, test_origin, Measure, NaiveKind,
    SynthConfig,
};

fn main() -> hiercast::Result<()> {
    let panel = generate(&SynthConfig {
        n_series: 200,
        ..SynthConfig::default()
    })?;
    let h = panel.hierarchy(&synth_hierarchy_spec())?;
    let horizon = 28;
    let origin = test_origin(&panel, horizon)?;
    let actuals = DenseMatrix::from_fn(panel.n_series(), horizon, |s, k| panel.target().get(s, origin + k));
    let mut reports = Vec::new();
    for (name, kind) in [("naive", NaiveKind::Naive), ("seasonal naive (7)", NaiveKind::Seasonal(7))] {
        let bottom = naive_forecast(&panel, origin, horizon, kind)?;
        reports.push(evaluate(name, &bottom, &actuals, &h)?);
    }
    println!("RMSE\n{}", format_table(&reports, Measure::Rmse, false));
    println!("MAE\n{}", format_table(&reports, Measure::Mae, false));
    Ok(())
}
