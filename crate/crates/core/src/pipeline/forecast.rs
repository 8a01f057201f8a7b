use serde::{Deserialize, Serialize};

use super::features::build_features_with_history;
use super::panel::PanelDataset;
use crate::error::{Error, Result};
use crate::gbdt::{Booster, FeatureMatrix};
use crate::linalg::DenseMatrix;

/// Anything that maps a feature matrix to one prediction per row.
pub trait Predictor: Sync {
    fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>>;
}

impl Predictor for Booster {
    fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        Booster::predict(self, features)
    }
}

impl<F> Predictor for F
where
    F: Fn(&FeatureMatrix) -> Result<Vec<f64>> + Sync,
{
    fn predict(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self(features)
    }
}

/// Forecasts days `origin..origin + horizon` for every series one step at a
/// time, feeding each step's predictions back as history for later steps.
/// Targets at or after `origin` are never read. Returns `n_series x horizon`.
pub fn recursive_forecast(
    model: &dyn Predictor,
    panel: &PanelDataset,
    origin: usize,
    horizon: usize,
) -> Result<DenseMatrix> {
    if horizon < 1 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if origin + horizon > panel.n_days() {
        return Err(Error::InvalidArgument(format!(
            "forecast days {origin}..{} exceed the panel's {} days (exogenous values are needed for every step)",
            origin + horizon,
            panel.n_days()
        )));
    }
    let n = panel.n_series();
    let mut history = panel.target().clone();
    for s in 0..n {
        history.row_mut(s)[origin..].iter_mut().for_each(|v| *v = f64::NAN);
    }
    let mut out = DenseMatrix::zeros(n, horizon);
    for k in 0..horizon {
        let t = origin + k;
        let frame = build_features_with_history(panel, &history, t..t + 1)?;
        let preds = model.predict(&frame.features)?;
        if preds.len() != n {
            return Err(Error::shape(format!("{n} predictions"), format!("{}", preds.len())));
        }
        for (s, p) in preds.into_iter().enumerate() {
            history.set(s, t, p);
            out.set(s, k, p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveKind {
    /// Repeat the last observed value.
    Naive,
    /// Repeat the value one period earlier.
    Seasonal(usize),
}

/// Naive forecasts of days `origin..origin + horizon` from targets before
/// `origin`. Returns `n_series x horizon`.
pub fn naive_forecast(panel: &PanelDataset, origin: usize, horizon: usize, kind: NaiveKind) -> Result<DenseMatrix> {
    let period = match kind {
        NaiveKind::Naive => 1,
        NaiveKind::Seasonal(p) => p,
    };
    if period == 0 || origin < period || origin > panel.n_days() {
        return Err(Error::InvalidArgument(format!(
            "cannot forecast from day {origin} with period {period}"
        )));
    }
    let y = panel.target();
    Ok(DenseMatrix::from_fn(panel.n_series(), horizon, |s, k| {
        let back = match kind {
            NaiveKind::Naive => origin - 1,
            NaiveKind::Seasonal(p) => origin - p + (k % p),
        };
        y.get(s, back)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn panel(rows: Vec<Vec<f64>>) -> PanelDataset {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        let target = DenseMatrix::from_rows(&rows).unwrap();
        PanelDataset::new(ids, NaiveDate::from_ymd_opt(2021, 3, 1).unwrap(), target, vec![]).unwrap()
    }

    fn lag1_predictor(f: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(f.column("sales_lag1").unwrap().to_vec())
    }

    #[test]
    fn zero_model_forecasts_zero() {
        let p = panel(vec![vec![3.0; 60]]);
        let zero = |f: &FeatureMatrix| Ok(vec![0.0; f.n_rows()]);
        let out = recursive_forecast(&zero, &p, 30, 28).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lag_model_reaches_fixed_point() {
        let p = panel(vec![vec![5.0; 60], vec![2.0; 60]]);
        let out = recursive_forecast(&lag1_predictor, &p, 30, 28).unwrap();
        assert!(out.row(0).iter().all(|&v| v == 5.0));
        assert!(out.row(1).iter().all(|&v| v == 2.0));
    }

    #[test]
    fn horizon_one_matches_direct_prediction() {
        let p = panel(vec![(0..40).map(f64::from).collect()]);
        let out = recursive_forecast(&lag1_predictor, &p, 20, 1).unwrap();
        assert_eq!(out.get(0, 0), 19.0);
        assert!(recursive_forecast(&lag1_predictor, &p, 20, 0).is_err());
    }

    #[test]
    fn naive_baselines() {
        let p = panel(vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(naive_forecast(&p, 3, 2, NaiveKind::Naive).unwrap().row(0), &[3.0, 3.0]);
        let weekly: Vec<f64> = (0..28).map(|d| (d % 7) as f64).collect();
        let p = panel(vec![weekly.clone()]);
        let out = naive_forecast(&p, 14, 14, NaiveKind::Seasonal(7)).unwrap();
        assert_eq!(out.row(0), &weekly[14..28]);
    }
}
