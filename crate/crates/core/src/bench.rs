//! Timing harness: dense vs sparse hierarchical-loss gradients, scenario
//! train/predict times and reconciliation fit/apply times.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{build_cross_sectional_named, Hierarchy, LevelSpec};
use crate::hloss::{DenseHierarchicalLoss, IndexMap, ObjectiveContext};
use crate::linalg::DenseMatrix;
use crate::pipeline::{scenario_run, PanelDataset, ScenarioConfig};
use crate::reconcile::{fit_erm, fit_reconciler, Method};

/// Monotonic-clock median over `reps` runs after `warmup` discarded runs,
/// in seconds.
pub fn time_median(reps: usize, warmup: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    if reps == 0 {
        return Err(Error::InvalidArgument("at least one repetition is needed".into()));
    }
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let mid = reps / 2;
    Ok(if reps % 2 == 1 {
        times[mid]
    } else {
        0.5 * (times[mid - 1] + times[mid])
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument("slope needs at least two paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("log-log slope needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// A nested hierarchy over `n_b` series with `levels` levels in total
/// (including the bottom). Aggregate level `k` of `levels - 1` splits the
/// series into about `n_b^(k / (levels - 1))` contiguous blocks, so the top
/// level is a single total.
pub fn bench_hierarchy(n_b: usize, levels: usize) -> Result<Hierarchy> {
    if n_b == 0 || levels < 1 {
        return Err(Error::InvalidArgument("bench hierarchy needs n_b >= 1 and levels >= 1".into()));
    }
    let keys: Vec<String> = (0..n_b).map(|b| format!("b{b}")).collect();
    let n_agg = levels - 1;
    let specs: Vec<LevelSpec> = (0..n_agg)
        .map(|k| {
            let groups = ((n_b as f64).powf(k as f64 / n_agg as f64).round() as usize).clamp(1, n_b);
            let group_of = keys
                .iter()
                .enumerate()
                .map(|(b, key)| (key.clone(), format!("l{k}g{}", b * groups / n_b)))
                .collect();
            LevelSpec::new(format!("level{k}"), group_of)
        })
        .collect();
    build_cross_sectional_named(&keys, &specs, "bottom")
}

/// Items per department in the M5 data, keyed `(category, department)`.
pub const M5_DEPARTMENTS: [(&str, &str, usize); 7] = [
    ("FOODS", "FOODS_1", 216),
    ("FOODS", "FOODS_2", 398),
    ("FOODS", "FOODS_3", 823),
    ("HOBBIES", "HOBBIES_1", 416),
    ("HOBBIES", "HOBBIES_2", 149),
    ("HOUSEHOLD", "HOUSEHOLD_1", 532),
    ("HOUSEHOLD", "HOUSEHOLD_2", 515),
];

/// Stores per state in the M5 data.
pub const M5_STORES: [(&str, usize); 3] = [("CA", 4), ("TX", 3), ("WI", 3)];

/// The twelve-level M5 cross-sectional hierarchy over 3049 items in 10
/// stores, built from generated metadata with the M5 layout.
pub fn m5_shaped_hierarchy() -> Result<Hierarchy> {
    let stores: Vec<(String, String)> = M5_STORES
        .iter()
        .flat_map(|&(state, k)| (1..=k).map(move |i| (state.to_string(), format!("{state}_{i}"))))
        .collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for &(cat, dept, n_items) in &M5_DEPARTMENTS {
        for i in 1..=n_items {
            let item = format!("{dept}_{i:03}");
            for (state, store) in &stores {
                ids.push(format!("{item}_{store}"));
                rows.push(vec![item.clone(), dept.to_string(), cat.to_string(), store.clone(), state.clone()]);
            }
        }
    }
    let columns: Vec<String> = ["item_id", "dept_id", "cat_id", "store_id", "state_id"].map(String::from).to_vec();
    crate::pipeline::m5_hierarchy_spec().build(&ids, &columns, &rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientBenchConfig {
    pub sizes: Vec<usize>,
    pub levels: usize,
    pub timesteps: usize,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for GradientBenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100, 300, 1000, 3000],
            levels: 12,
            timesteps: 28,
            reps: 5,
            warmup: 1,
            seed: 0,
        }
    }
}

/// One row of the gradient benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientTiming {
    pub n_b: usize,
    pub n: usize,
    pub levels: usize,
    pub timesteps: usize,
    pub nnz: usize,
    pub sparse_seconds: f64,
    pub dense_seconds: f64,
}

impl GradientTiming {
    pub fn speedup(&self) -> f64 {
        self.dense_seconds / self.sparse_seconds
    }
}

pub const GRADIENT_CSV_HEADER: [&str; 8] =
    ["n_b", "n", "levels", "timesteps", "nnz", "sparse_seconds", "dense_seconds", "speedup"];

/// Times loss-and-gradient evaluation through the sparse path and the dense
/// reference for every configured size.
pub fn gradient_scaling(cfg: &GradientBenchConfig) -> Result<Vec<GradientTiming>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    cfg.sizes
        .iter()
        .map(|&n_b| {
            let h = bench_hierarchy(n_b, cfg.levels)?;
            let t = cfg.timesteps;
            let ctx = ObjectiveContext::cross_sectional(h.clone(), t, IndexMap::full(n_b, t))?;
            let dense = DenseHierarchicalLoss::new(ctx.h_cs(), ctx.h_te());
            let y_hat = DenseMatrix::from_fn(n_b, t, |_, _| normal.sample(&mut rng));
            let y = DenseMatrix::from_fn(n_b, t, |_, _| normal.sample(&mut rng));
            let sparse_seconds = time_median(cfg.reps, cfg.warmup, || {
                std::hint::black_box(ctx.value_and_gradient(&y_hat, &y)?);
                Ok(())
            })?;
            let dense_seconds = time_median(cfg.reps, cfg.warmup, || {
                std::hint::black_box(dense.value_and_gradient(&y_hat, &y)?);
                Ok(())
            })?;
            log::info!("n_b={n_b}: sparse {sparse_seconds:.4}s dense {dense_seconds:.4}s");
            Ok(GradientTiming {
                n_b,
                n: h.n(),
                levels: h.n_levels(),
                timesteps: t,
                nnz: h.s().nnz(),
                sparse_seconds,
                dense_seconds,
            })
        })
        .collect()
}

/// Log-log slopes of the sparse and dense timings against `n_b`.
pub fn gradient_slopes(timings: &[GradientTiming]) -> Result<(f64, f64)> {
    let xs: Vec<f64> = timings.iter().map(|t| t.n_b as f64).collect();
    let sparse: Vec<f64> = timings.iter().map(|t| t.sparse_seconds).collect();
    let dense: Vec<f64> = timings.iter().map(|t| t.dense_seconds).collect();
    Ok((log_log_slope(&xs, &sparse)?, log_log_slope(&xs, &dense)?))
}

pub fn write_gradient_csv<W: Write>(out: W, timings: &[GradientTiming]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GRADIENT_CSV_HEADER)?;
    for t in timings {
        w.write_record([
            t.n_b.to_string(),
            t.n.to_string(),
            t.levels.to_string(),
            t.timesteps.to_string(),
            t.nnz.to_string(),
            format!("{:.6}", t.sparse_seconds),
            format!("{:.6}", t.dense_seconds),
            format!("{:.3}", t.speedup()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Log-log plot of both timing curves as an SVG file.
pub fn plot_gradient_svg(path: &Path, timings: &[GradientTiming]) -> Result<()> {
    use plotters::prelude::*;

    let plot_err = |e: &dyn std::fmt::Display| Error::Io(std::io::Error::other(e.to_string()));
    if timings.is_empty() {
        return Ok(());
    }
    let x_min = timings.iter().map(|t| t.n_b as f64).fold(f64::INFINITY, f64::min);
    let x_max = timings.iter().map(|t| t.n_b as f64).fold(0.0, f64::max);
    let all = timings.iter().flat_map(|t| [t.sparse_seconds, t.dense_seconds]);
    let y_min = all.clone().fold(f64::INFINITY, f64::min);
    let y_max = all.fold(0.0, f64::max);

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .caption("hierarchical loss gradient time", ("sans-serif", 20))
        .build_cartesian_2d(
            (x_min * 0.8..x_max * 1.25).log_scale(),
            (y_min * 0.5..y_max * 2.0).log_scale(),
        )
        .map_err(|e| plot_err(&e))?;
    chart
        .configure_mesh()
        .x_desc("bottom-level series")
        .y_desc("seconds")
        .draw()
        .map_err(|e| plot_err(&e))?;
    let curves: [(&str, RGBColor, fn(&GradientTiming) -> f64); 2] =
        [("sparse", BLUE, |t| t.sparse_seconds), ("dense", RED, |t| t.dense_seconds)];
    for (name, color, get) in curves {
        let points: Vec<(f64, f64)> = timings.iter().map(|t| (t.n_b as f64, get(t))).collect();
        chart
            .draw_series(LineSeries::new(points.clone(), color.stroke_width(2)))
            .map_err(|e| plot_err(&e))?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(points.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(|e| plot_err(&e))?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE)
        .draw()
        .map_err(|e| plot_err(&e))?;
    root.present().map_err(|e| plot_err(&e))?;
    Ok(())
}

/// Wall time of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTiming {
    pub run: String,
    pub n_models: usize,
    pub train_seconds: f64,
    pub predict_seconds: f64,
}

impl ScenarioTiming {
    pub fn total_seconds(&self) -> f64 {
        self.train_seconds + self.predict_seconds
    }
}

pub const SCENARIO_CSV_HEADER: [&str; 5] = ["run", "n_models", "train_seconds", "predict_seconds", "total_seconds"];

pub fn scenario_timings(
    panel: &PanelDataset,
    h: &Hierarchy,
    configs: &[ScenarioConfig],
    seed: u64,
) -> Result<Vec<ScenarioTiming>> {
    configs
        .iter()
        .map(|cfg| {
            let r = scenario_run(panel, h, cfg, seed)?;
            log::info!("{}: train {:.2}s predict {:.2}s", cfg.label(), r.train_seconds, r.predict_seconds);
            Ok(ScenarioTiming {
                run: cfg.label(),
                n_models: r.trained.boosters.len(),
                train_seconds: r.train_seconds,
                predict_seconds: r.predict_seconds,
            })
        })
        .collect()
}

pub fn write_scenario_csv<W: Write>(out: W, timings: &[ScenarioTiming]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCENARIO_CSV_HEADER)?;
    for t in timings {
        w.write_record([
            t.run.clone(),
            t.n_models.to_string(),
            format!("{:.6}", t.train_seconds),
            format!("{:.6}", t.predict_seconds),
            format!("{:.6}", t.total_seconds()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Median fit and apply times of one reconciliation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconcileTiming {
    pub method: Method,
    pub fit_seconds: f64,
    pub apply_seconds: f64,
}

pub const RECONCILE_CSV_HEADER: [&str; 3] = ["method", "fit_seconds", "apply_seconds"];

/// Times every reconciliation method on random residuals (`n x t_res`) and
/// random base forecasts (`n x horizon`) over `h`.
pub fn reconcile_timings(
    h: &Hierarchy,
    t_res: usize,
    horizon: usize,
    reps: usize,
    warmup: usize,
    seed: u64,
) -> Result<Vec<ReconcileTiming>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let bottom = DenseMatrix::from_fn(h.n_b(), t_res, |_, _| 5.0 + normal.sample(&mut rng));
    let actual = h.aggregate_rows(&bottom)?;
    let fitted = DenseMatrix::from_fn(h.n(), t_res, |i, j| actual.get(i, j) + normal.sample(&mut rng));
    let residuals = fitted.sub(&actual)?;
    let base = DenseMatrix::from_fn(h.n(), horizon, |_, _| normal.sample(&mut rng));
    Method::ALL
        .iter()
        .map(|&method| {
            let fit_once = || match method {
                Method::Erm => fit_erm(h, &actual, &fitted),
                m => fit_reconciler(m, h, m.needs_residuals().then_some(&residuals)),
            };
            let fit_seconds = time_median(reps, warmup, || fit_once().map(|_| ()))?;
            let r = fit_once()?;
            let apply_seconds = time_median(reps, warmup, || {
                std::hint::black_box(r.reconcile_panel(&base)?);
                Ok(())
            })?;
            Ok(ReconcileTiming {
                method,
                fit_seconds,
                apply_seconds,
            })
        })
        .collect()
}

pub fn write_reconcile_csv<W: Write>(out: W, timings: &[ReconcileTiming]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECONCILE_CSV_HEADER)?;
    for t in timings {
        w.write_record([
            t.method.as_str().to_string(),
            format!("{:.6}", t.fit_seconds),
            format!("{:.6}", t.apply_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 10.0, 100.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn median_ignores_warmup() {
        let mut calls = 0;
        time_median(5, 1, || {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(calls, 6);
    }

    #[test]
    fn bench_hierarchy_shape() {
        let h = bench_hierarchy(300, 12).unwrap();
        assert_eq!(h.n_levels(), 12);
        assert_eq!(h.n_b(), 300);
        assert_eq!(h.s().nnz(), 300 * 12);
        assert_eq!(h.levels()[0].rows.len(), 1);
    }

    #[test]
    fn m5_shape() {
        let h = m5_shaped_hierarchy().unwrap();
        assert_eq!(h.n(), 42840);
        assert_eq!(h.n_b(), 30490);
        assert_eq!(h.n_levels(), 12);
        assert_eq!(h.s().nnz(), 30490 * 12);
    }

    #[test]
    fn gradient_csv_header_is_fixed() {
        let timings = gradient_scaling(&GradientBenchConfig {
            sizes: vec![10, 20],
            reps: 1,
            warmup: 0,
            ..GradientBenchConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_gradient_csv(&mut buf, &timings).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), GRADIENT_CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 3);
    }
}
