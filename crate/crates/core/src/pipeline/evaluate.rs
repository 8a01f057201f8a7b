use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::linalg::DenseMatrix;

pub const ALL_SERIES: &str = "All series";

/// Error statistics of one hierarchy level, averaged over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: String,
    pub rmse: f64,
    pub rmse_std: f64,
    pub mae: f64,
    pub mae_std: f64,
    pub rel_rmse: Option<f64>,
    pub rel_mae: Option<f64>,
}

/// Per-level RMSE and MAE of a run (or the mean and standard deviation over
/// several runs); the last row covers all series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub n_runs: usize,
    pub levels: Vec<LevelStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Rmse,
    Mae,
}

/// Scores forecasts against bottom-level actuals (`n_b x H`) at every level
/// of `h`. `forecasts` holds either the `n_b` bottom rows (aggregated here)
/// or all `n` hierarchy rows.
pub fn evaluate(name: &str, forecasts: &DenseMatrix, actuals: &DenseMatrix, h: &Hierarchy) -> Result<EvalReport> {
    if actuals.n_rows() != h.n_b() {
        return Err(Error::shape(format!("{} bottom actual rows", h.n_b()), format!("{}", actuals.n_rows())));
    }
    let full = if forecasts.n_rows() == h.n_b() {
        h.aggregate_rows(forecasts)?
    } else if forecasts.n_rows() == h.n() {
        forecasts.clone()
    } else {
        return Err(Error::Data(format!(
            "forecasts have {} series; expected {} bottom or {} total series",
            forecasts.n_rows(),
            h.n_b(),
            h.n()
        )));
    };
    if full.n_cols() != actuals.n_cols() {
        return Err(Error::shape(format!("{} forecast steps", actuals.n_cols()), format!("{}", full.n_cols())));
    }
    let truth = h.aggregate_rows(actuals)?;
    let score = |rows: std::ops::Range<usize>| {
        let (mut se, mut ae, mut count) = (0.0, 0.0, 0usize);
        for i in rows {
            for (f, a) in full.row(i).iter().zip(truth.row(i)) {
                let e = f - a;
                se += e * e;
                ae += e.abs();
                count += 1;
            }
        }
        let c = count.max(1) as f64;
        ((se / c).sqrt(), ae / c)
    };
    let mut levels: Vec<LevelStats> = h
        .levels()
        .iter()
        .map(|l| {
            let (rmse, mae) = score(l.rows.clone());
            LevelStats::single(&l.name, rmse, mae)
        })
        .collect();
    let (rmse, mae) = score(0..h.n());
    levels.push(LevelStats::single(ALL_SERIES, rmse, mae));
    Ok(EvalReport {
        name: name.to_string(),
        n_runs: 1,
        levels,
    })
}

/// Largest absolute violation of the aggregation constraints by an
/// `n x H` forecast panel.
pub fn coherence_violation(h: &Hierarchy, full: &DenseMatrix) -> Result<f64> {
    let u_t = h.partition().u_t;
    Ok(u_t.spmm_dense(full)?.max_abs())
}

impl LevelStats {
    fn single(level: &str, rmse: f64, mae: f64) -> Self {
        Self {
            level: level.to_string(),
            rmse,
            rmse_std: 0.0,
            mae,
            mae_std: 0.0,
            rel_rmse: None,
            rel_mae: None,
        }
    }

    pub fn value(&self, m: Measure, relative: bool) -> Option<f64> {
        match (m, relative) {
            (Measure::Rmse, false) => Some(self.rmse),
            (Measure::Mae, false) => Some(self.mae),
            (Measure::Rmse, true) => self.rel_rmse,
            (Measure::Mae, true) => self.rel_mae,
        }
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

impl EvalReport {
    /// Mean and sample standard deviation over runs with identical levels.
    pub fn combine(name: &str, runs: &[EvalReport]) -> Result<EvalReport> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidArgument("no runs to combine".into()))?;
        if runs.iter().any(|r| r.levels.len() != first.levels.len()) {
            return Err(Error::Data("runs have different level sets".into()));
        }
        let levels = first
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let rmse: Vec<f64> = runs.iter().map(|r| r.levels[i].rmse).collect();
                let mae: Vec<f64> = runs.iter().map(|r| r.levels[i].mae).collect();
                let (rmse, rmse_std) = mean_std(&rmse);
                let (mae, mae_std) = mean_std(&mae);
                LevelStats {
                    level: l.level.clone(),
                    rmse,
                    rmse_std,
                    mae,
                    mae_std,
                    rel_rmse: None,
                    rel_mae: None,
                }
            })
            .collect();
        Ok(EvalReport {
            name: name.to_string(),
            n_runs: runs.len(),
            levels,
        })
    }

    /// Fills the relative columns against `baseline`, matching levels by name.
    pub fn relative_to(&mut self, baseline: &EvalReport) -> Result<()> {
        for l in &mut self.levels {
            let b = baseline
                .levels
                .iter()
                .find(|b| b.level == l.level)
                .ok_or_else(|| Error::Data(format!("baseline lacks level `{}`", l.level)))?;
            l.rel_rmse = Some(ratio(l.rmse, b.rmse));
            l.rel_mae = Some(ratio(l.mae, b.mae));
        }
        Ok(())
    }

    pub fn level(&self, name: &str) -> Option<&LevelStats> {
        self.levels.iter().find(|l| l.level == name)
    }

    /// Mean RMSE over the aggregate levels (every level except the bottom
    /// level and the all-series row).
    pub fn aggregate_rmse(&self) -> f64 {
        let agg = &self.levels[..self.levels.len().saturating_sub(2)];
        if agg.is_empty() {
            return f64::NAN;
        }
        agg.iter().map(|l| l.rmse).sum::<f64>() / agg.len() as f64
    }
}

pub const REPORT_CSV_HEADER: [&str; 8] = ["run", "level", "rmse", "rmse_std", "mae", "mae_std", "rel_rmse", "rel_mae"];

/// Writes reports in long CSV form, one row per (run, level).
pub fn write_reports_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for r in reports {
        for l in &r.levels {
            w.write_record([
                r.name.clone(),
                l.level.clone(),
                l.rmse.to_string(),
                l.rmse_std.to_string(),
                l.mae.to_string(),
                l.mae_std.to_string(),
                opt(l.rel_rmse),
                opt(l.rel_mae),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads reports written by [`write_reports_csv`].
pub fn read_reports_csv<R: std::io::Read>(input: R) -> Result<Vec<EvalReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != REPORT_CSV_HEADER {
        return Err(Error::Data(format!("report CSV must have columns {REPORT_CSV_HEADER:?}")));
    }
    let mut out: Vec<EvalReport> = Vec::new();
    let num = |s: &str| -> Result<f64> {
        s.parse().map_err(|_| Error::Data(format!("`{s}` is not a number")))
    };
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            num(s).map(Some)
        }
    };
    for rec in rdr.records() {
        let rec = rec?;
        let stats = LevelStats {
            level: rec[1].to_string(),
            rmse: num(&rec[2])?,
            rmse_std: num(&rec[3])?,
            mae: num(&rec[4])?,
            mae_std: num(&rec[5])?,
            rel_rmse: opt(&rec[6])?,
            rel_mae: opt(&rec[7])?,
        };
        match out.last_mut() {
            Some(r) if r.name == rec[0] => r.levels.push(stats),
            _ => out.push(EvalReport {
                name: rec[0].to_string(),
                n_runs: 1,
                levels: vec![stats],
            }),
        }
    }
    Ok(out)
}

/// Text table with one row per run and one column per level.
pub fn format_table(reports: &[EvalReport], measure: Measure, relative: bool) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let name_w = reports.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
    let cells: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            r.levels
                .iter()
                .map(|l| match l.value(measure, relative) {
                    Some(v) if relative => format!("{v:.2}"),
                    Some(v) if r.n_runs > 1 => {
                        let sd = if measure == Measure::Rmse { l.rmse_std } else { l.mae_std };
                        format!("{} ({})", sig(v), sig(sd))
                    }
                    Some(v) => sig(v),
                    None => "-".into(),
                })
                .collect()
        })
        .collect();
    let widths: Vec<usize> = first
        .levels
        .iter()
        .enumerate()
        .map(|(j, l)| cells.iter().map(|c| c.get(j).map_or(0, String::len)).max().unwrap_or(0).max(l.level.len()))
        .collect();
    let mut s = String::new();
    let _ = write!(s, "{:<name_w$}", "run");
    for (l, w) in first.levels.iter().zip(&widths) {
        let _ = write!(s, "  {:>w$}", l.level);
    }
    s.push('\n');
    for (r, row) in reports.iter().zip(&cells) {
        let _ = write!(s, "{:<name_w$}", r.name);
        for (c, w) in row.iter().zip(&widths) {
            let _ = write!(s, "  {c:>w$}");
        }
        s.push('\n');
    }
    s
}

fn sig(v: f64) -> String {
    let a = v.abs();
    if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_cross_sectional, LevelSpec};

    fn toy() -> Hierarchy {
        build_cross_sectional(&["a", "b"], &[LevelSpec::total("total", &["a", "b"])]).unwrap()
    }

    #[test]
    fn perfect_forecasts_score_zero() {
        let y = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let r = evaluate("x", &y, &y, &toy()).unwrap();
        assert!(r.levels.iter().all(|l| l.rmse == 0.0 && l.mae == 0.0));
    }

    #[test]
    fn toy_level_errors() {
        let f = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let a = DenseMatrix::zeros(2, 1);
        let r = evaluate("x", &f, &a, &toy()).unwrap();
        assert!((r.level("bottom").unwrap().rmse - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.level("total").unwrap().mae, 1.0);
        assert_eq!(r.levels.last().unwrap().level, ALL_SERIES);
    }

    #[test]
    fn self_relative_is_one_and_csv_round_trips() {
        let f = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 2.0]]).unwrap();
        let a = DenseMatrix::zeros(2, 2);
        let mut r = evaluate("x", &f, &a, &toy()).unwrap();
        let base = r.clone();
        r.relative_to(&base).unwrap();
        assert!(r.levels.iter().all(|l| l.rel_rmse == Some(1.0) && l.rel_mae == Some(1.0)));
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        assert_eq!(read_reports_csv(buf.as_slice()).unwrap(), vec![r.clone()]);
        assert!(format_table(&[r], Measure::Rmse, true).contains("1.00"));
    }

    #[test]
    fn combine_runs() {
        let a = DenseMatrix::zeros(2, 1);
        let r1 = evaluate("x", &DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(), &a, &toy()).unwrap();
        let r2 = evaluate("x", &DenseMatrix::from_rows(&[vec![3.0], vec![3.0]]).unwrap(), &a, &toy()).unwrap();
        let c = EvalReport::combine("x", &[r1, r2]).unwrap();
        let b = c.level("bottom").unwrap();
        assert_eq!(b.rmse, 2.0);
        assert!((b.rmse_std - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn coherence_of_bottom_up() {
        let h = toy();
        let f = h.aggregate_rows(&DenseMatrix::from_rows(&[vec![1.5], vec![2.0]]).unwrap()).unwrap();
        assert_eq!(coherence_violation(&h, &f).unwrap(), 0.0);
        let bad = DenseMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(coherence_violation(&h, &bad).unwrap(), 1.0);
    }
}
