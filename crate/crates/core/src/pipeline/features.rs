use std::ops::Range;

use chrono::Datelike;
use rayon::prelude::*;

use super::panel::{weeks_on_sale, Exog, PanelDataset, SELL_PRICE, WEEKS_ON_SALE};
use crate::error::{Error, Result};
use crate::gbdt::FeatureMatrix;
use crate::linalg::DenseMatrix;

pub const LAGS: [usize; 10] = [1, 2, 3, 4, 5, 6, 7, 28, 56, 364];
pub const MOVING_AVERAGES: [usize; 3] = [7, 28, 56];

/// One feature row per (series, day), series-major.
#[derive(Debug, Clone)]
pub struct FeatureFrame {
    pub features: FeatureMatrix,
    /// Panel row of each sample.
    pub series: Vec<u32>,
    /// Panel day of each sample.
    pub day: Vec<u32>,
    /// Target of each sample (NaN beyond the known history).
    pub target: Vec<f64>,
}

impl FeatureFrame {
    pub fn n_rows(&self) -> usize {
        self.series.len()
    }
}

/// Feature names produced for `panel`, in column order.
pub fn feature_names(panel: &PanelDataset) -> Vec<String> {
    let mut names: Vec<String> = vec!["aggregation".into(), "value".into()];
    names.extend(LAGS.iter().map(|l| format!("sales_lag{l}")));
    names.extend(MOVING_AVERAGES.iter().map(|w| format!("sales_lag1_mavg{w}")));
    names.extend(["dayofweek", "dayofmonth", "weekofyear", "monthofyear"].map(String::from));
    if panel.exog_column(SELL_PRICE).is_some() {
        names.extend(["sell_price_avg", "sell_price_change", "weeks_on_sale_avg"].map(String::from));
    }
    for c in panel.exog() {
        if c.name != SELL_PRICE && c.name != WEEKS_ON_SALE {
            names.push(c.name.clone());
        }
    }
    names
}

/// Builds features for every series on days `days`, using the panel's own
/// targets as history.
pub fn build_features(panel: &PanelDataset, days: Range<usize>) -> Result<FeatureFrame> {
    build_features_with_history(panel, panel.target(), days)
}

/// Builds features for every series on days `days`; lag and moving-average
/// features at day `t` read `history` at days `< t` only. Unavailable lags
/// are NaN.
pub fn build_features_with_history(
    panel: &PanelDataset,
    history: &DenseMatrix,
    days: Range<usize>,
) -> Result<FeatureFrame> {
    let (n, n_days) = (panel.n_series(), panel.n_days());
    if history.n_rows() != n || history.n_cols() < days.end.min(n_days) {
        return Err(Error::shape(
            format!("history of {n} rows covering the requested days"),
            format!("{:?}", history.shape()),
        ));
    }
    if days.end > n_days || days.start > days.end {
        return Err(Error::InvalidArgument(format!("days {days:?} outside the panel's 0..{n_days}")));
    }
    let names = feature_names(panel);
    let n_feat = names.len();
    let len = days.len();

    let calendar: Vec<[f64; 4]> = days
        .clone()
        .map(|d| {
            let date = panel.date(d);
            [
                date.weekday().num_days_from_monday() as f64,
                date.day() as f64,
                date.iso_week().week() as f64,
                date.month() as f64,
            ]
        })
        .collect();

    let price = match panel.exog_column(SELL_PRICE) {
        Some(Exog::PerSeries(m)) => Some(m.clone()),
        Some(Exog::PerDate(v)) => Some(DenseMatrix::from_fn(n, n_days, |_, d| v[d])),
        None => None,
    };
    let weeks = match (panel.exog_column(WEEKS_ON_SALE), &price) {
        (Some(w), _) => Some(w.clone()),
        (None, Some(p)) => Some(Exog::PerSeries(weeks_on_sale(p))),
        (None, None) => None,
    };
    let other: Vec<&Exog> = panel
        .exog()
        .iter()
        .filter(|c| c.name != SELL_PRICE && c.name != WEEKS_ON_SALE)
        .map(|c| &c.values)
        .collect();

    let blocks: Vec<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let h = history.row(s);
            // prefix[k] = sum of h[..k]
            let mut prefix = Vec::with_capacity(days.end + 1);
            prefix.push(0.0);
            for &v in &h[..days.end] {
                prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
            }
            let mut cols = vec![Vec::with_capacity(len); n_feat];
            for (k, t) in days.clone().enumerate() {
                let mut j = 0;
                let mut push = |v: f64| {
                    cols[j].push(v);
                    j += 1;
                };
                push(panel.aggregation_ids()[s] as f64);
                push(panel.value_ids()[s] as f64);
                for &l in &LAGS {
                    push(if t >= l { h[t - l] } else { f64::NAN });
                }
                for &w in &MOVING_AVERAGES {
                    push(if t >= w {
                        (prefix[t] - prefix[t - w]) / w as f64
                    } else {
                        f64::NAN
                    });
                }
                for v in calendar[k] {
                    push(v);
                }
                if let (Some(p), Some(w)) = (&price, &weeks) {
                    let now = p.get(s, t);
                    push(now);
                    push(if t >= 1 { now - p.get(s, t - 1) } else { f64::NAN });
                    push(w.get(s, t));
                }
                for e in &other {
                    push(e.get(s, t));
                }
            }
            cols
        })
        .collect();

    let mut columns: Vec<Vec<f64>> = (0..n_feat).map(|_| Vec::with_capacity(n * len)).collect();
    for block in blocks {
        for (c, b) in columns.iter_mut().zip(block) {
            c.extend(b);
        }
    }
    let mut series = Vec::with_capacity(n * len);
    let mut day = Vec::with_capacity(n * len);
    let mut target = Vec::with_capacity(n * len);
    for s in 0..n {
        for t in days.clone() {
            series.push(s as u32);
            day.push(t as u32);
            target.push(if t < history.n_cols() { history.get(s, t) } else { f64::NAN });
        }
    }
    Ok(FeatureFrame {
        features: FeatureMatrix::new(names, columns)?,
        series,
        day,
        target,
    })
}
