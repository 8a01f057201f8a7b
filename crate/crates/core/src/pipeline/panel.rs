use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{ColumnRef, Hierarchy, HierarchySpec, LevelColumns};
use crate::linalg::DenseMatrix;

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// Values of an exogenous column: shared by every series on a date, or per
/// series and date. NaN marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Exog {
    PerDate(Vec<f64>),
    PerSeries(DenseMatrix),
}

impl Exog {
    #[inline]
    pub fn get(&self, series: usize, day: usize) -> f64 {
        match self {
            Exog::PerDate(v) => v[day],
            Exog::PerSeries(m) => m.get(series, day),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogColumn {
    pub name: String,
    pub values: Exog,
}

/// Daily panel of series with contiguous dates, zero-filled targets and
/// optional exogenous columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    series_ids: Vec<String>,
    metadata_columns: Vec<String>,
    metadata: Vec<Vec<String>>,
    start: NaiveDate,
    /// `n_series x n_days`.
    target: DenseMatrix,
    exog: Vec<ExogColumn>,
    /// Hierarchy level of each series (0 for plain panels).
    aggregation: Vec<u32>,
    /// Identifier of each series within its level.
    value: Vec<u32>,
}

impl PanelDataset {
    pub fn new(
        series_ids: Vec<String>,
        start: NaiveDate,
        target: DenseMatrix,
        exog: Vec<ExogColumn>,
    ) -> Result<Self> {
        let (n, n_days) = target.shape();
        if series_ids.len() != n {
            return Err(Error::shape(format!("{n} series ids"), format!("{}", series_ids.len())));
        }
        let mut seen = HashMap::new();
        for (i, s) in series_ids.iter().enumerate() {
            if seen.insert(s.as_str(), i).is_some() {
                return Err(Error::Data(format!("duplicate series id `{s}`")));
            }
        }
        for c in &exog {
            let ok = match &c.values {
                Exog::PerDate(v) => v.len() == n_days,
                Exog::PerSeries(m) => m.shape() == (n, n_days),
            };
            if !ok {
                return Err(Error::Data(format!("exogenous column `{}` does not match the panel shape", c.name)));
            }
        }
        Ok(Self {
            metadata: vec![Vec::new(); n],
            metadata_columns: Vec::new(),
            aggregation: vec![0; n],
            value: (0..n as u32).collect(),
            series_ids,
            start,
            target,
            exog,
        })
    }

    /// Attaches a metadata table with one row per series, in series order.
    pub fn with_metadata(mut self, columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self> {
        if rows.len() != self.n_series() || rows.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::Data("metadata table does not match the panel".into()));
        }
        self.metadata_columns = columns;
        self.metadata = rows;
        Ok(self)
    }

    pub fn n_series(&self) -> usize {
        self.series_ids.len()
    }

    pub fn n_days(&self) -> usize {
        self.target.n_cols()
    }

    pub fn series_ids(&self) -> &[String] {
        &self.series_ids
    }

    pub fn metadata_columns(&self) -> &[String] {
        &self.metadata_columns
    }

    pub fn metadata(&self) -> &[Vec<String>] {
        &self.metadata
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start + Duration::days(day as i64)
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.n_days()).map(|d| self.date(d)).collect()
    }

    pub fn target(&self) -> &DenseMatrix {
        &self.target
    }

    pub fn exog(&self) -> &[ExogColumn] {
        &self.exog
    }

    pub fn exog_column(&self, name: &str) -> Option<&Exog> {
        self.exog.iter().find(|c| c.name == name).map(|c| &c.values)
    }

    pub fn aggregation_ids(&self) -> &[u32] {
        &self.aggregation
    }

    pub fn value_ids(&self) -> &[u32] {
        &self.value
    }

    /// Builds the hierarchy described by `spec` over this panel's metadata.
    pub fn hierarchy(&self, spec: &HierarchySpec) -> Result<Hierarchy> {
        spec.build(&self.series_ids, &self.metadata_columns, &self.metadata)
    }

    /// Keeps days `[from, to)`.
    pub fn slice_days(&self, from: usize, to: usize) -> Result<Self> {
        if from > to || to > self.n_days() {
            return Err(Error::InvalidArgument(format!(
                "day range {from}..{to} outside 0..{}",
                self.n_days()
            )));
        }
        let slice = |m: &DenseMatrix| DenseMatrix::from_fn(m.n_rows(), to - from, |i, j| m.get(i, from + j));
        let exog = self
            .exog
            .iter()
            .map(|c| ExogColumn {
                name: c.name.clone(),
                values: match &c.values {
                    Exog::PerDate(v) => Exog::PerDate(v[from..to].to_vec()),
                    Exog::PerSeries(m) => Exog::PerSeries(slice(m)),
                },
            })
            .collect();
        Ok(Self {
            start: self.date(from),
            target: slice(&self.target),
            exog,
            ..self.clone()
        })
    }

    /// The panel of every hierarchy node: targets summed over members,
    /// per-series exogenous columns averaged over members (ignoring missing
    /// values), and weeks on sale averaged when a `sell_price` column exists.
    pub fn aggregate(&self, h: &Hierarchy) -> Result<Self> {
        if h.n_b() != self.n_series() {
            return Err(Error::shape(format!("{} bottom series", self.n_series()), format!("{}", h.n_b())));
        }
        let n_days = self.n_days();
        let target = h.aggregate_rows(&self.target)?;
        let mean_over = |m: &DenseMatrix| {
            DenseMatrix::from_fn(h.n(), n_days, |row, day| {
                let (mut sum, mut count) = (0.0, 0usize);
                for &b in h.members(row) {
                    let v = m.get(b, day);
                    if !v.is_nan() {
                        sum += v;
                        count += 1;
                    }
                }
                if count == 0 {
                    f64::NAN
                } else {
                    sum / count as f64
                }
            })
        };
        let mut exog = Vec::with_capacity(self.exog.len() + 1);
        for c in &self.exog {
            let values = match &c.values {
                Exog::PerDate(v) => Exog::PerDate(v.clone()),
                Exog::PerSeries(m) => Exog::PerSeries(mean_over(m)),
            };
            exog.push(ExogColumn {
                name: c.name.clone(),
                values,
            });
        }
        if let Some(Exog::PerSeries(price)) = self.exog_column(SELL_PRICE) {
            if self.exog_column(WEEKS_ON_SALE).is_none() {
                exog.push(ExogColumn {
                    name: WEEKS_ON_SALE.into(),
                    values: Exog::PerSeries(mean_over(&weeks_on_sale(price))),
                });
            }
        }
        let mut aggregation = Vec::with_capacity(h.n());
        let mut value = Vec::with_capacity(h.n());
        for (li, level) in h.levels().iter().enumerate() {
            for (vi, _) in level.rows.clone().enumerate() {
                aggregation.push(li as u32);
                value.push(vi as u32);
            }
        }
        Ok(Self {
            series_ids: h.row_labels().to_vec(),
            metadata_columns: Vec::new(),
            metadata: vec![Vec::new(); h.n()],
            start: self.start,
            target,
            exog,
            aggregation,
            value,
        })
    }

    /// Keeps the given series (rows), in order.
    pub fn select_series(&self, rows: &[usize]) -> Self {
        let pick = |m: &DenseMatrix| DenseMatrix::from_fn(rows.len(), m.n_cols(), |i, j| m.get(rows[i], j));
        Self {
            series_ids: rows.iter().map(|&r| self.series_ids[r].clone()).collect(),
            metadata_columns: self.metadata_columns.clone(),
            metadata: rows.iter().map(|&r| self.metadata[r].clone()).collect(),
            start: self.start,
            target: pick(&self.target),
            exog: self
                .exog
                .iter()
                .map(|c| ExogColumn {
                    name: c.name.clone(),
                    values: match &c.values {
                        Exog::PerDate(v) => Exog::PerDate(v.clone()),
                        Exog::PerSeries(m) => Exog::PerSeries(pick(m)),
                    },
                })
                .collect(),
            aggregation: rows.iter().map(|&r| self.aggregation[r]).collect(),
            value: rows.iter().map(|&r| self.value[r]).collect(),
        }
    }

    /// Marks every series as belonging to hierarchy level `level`.
    pub fn with_level(mut self, level: u32) -> Self {
        self.aggregation = vec![level; self.n_series()];
        self
    }

    /// Writes the long CSV `series_id,date,target,<exog...>`.
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["series_id".to_string(), "date".into(), "target".into()];
        header.extend(self.exog.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for (i, id) in self.series_ids.iter().enumerate() {
            for day in 0..self.n_days() {
                let mut rec = vec![id.clone(), self.date(day).format(DATE_FORMAT).to_string()];
                rec.push(fmt_value(self.target.get(i, day)));
                for c in &self.exog {
                    rec.push(fmt_value(c.values.get(i, day)));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the metadata CSV `series_id,<columns...>`.
    pub fn write_metadata_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["series_id".to_string()];
        header.extend(self.metadata_columns.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.series_ids.iter().zip(&self.metadata) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().cloned());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const SELL_PRICE: &str = "sell_price";
pub const WEEKS_ON_SALE: &str = "weeks_on_sale";

/// Whole weeks since the first day with a positive sell price; missing
/// before that day.
pub fn weeks_on_sale(price: &DenseMatrix) -> DenseMatrix {
    let (n, n_days) = price.shape();
    let mut out = DenseMatrix::filled(n, n_days, f64::NAN);
    for i in 0..n {
        if let Some(first) = (0..n_days).find(|&d| price.get(i, d) > 0.0) {
            for d in first..n_days {
                out.set(i, d, ((d - first) / 7) as f64);
            }
        }
    }
    out
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

fn parse_optional(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        Some(f64::NAN)
    } else {
        s.parse().ok()
    }
}

/// Ordinal codes in first-appearance order; 0 is reserved for empty values.
#[derive(Default)]
struct Encoder {
    codes: HashMap<String, f64>,
}

impl Encoder {
    fn encode(&mut self, s: &str) -> f64 {
        let s = s.trim();
        if s.is_empty() {
            return 0.0;
        }
        let next = self.codes.len() as f64 + 1.0;
        *self.codes.entry(s.to_string()).or_insert(next)
    }
}

/// Loads a long-format panel CSV (`series_id,date,target[,exog...]`) and an
/// optional metadata CSV (`series_id,<columns...>`).
///
/// Missing (series, date) cells are zero-filled over the panel's full date
/// range; their exogenous values are missing. Exogenous columns with
/// non-numeric values are ordinal-encoded and renamed `<column>_enc`.
pub fn load_panel(data: impl AsRef<Path>, metadata: Option<&Path>) -> Result<PanelDataset> {
    let panel = read_long_csv(std::fs::File::open(data.as_ref()).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", data.as_ref().display()))
    })?)?;
    match metadata {
        None => Ok(panel),
        Some(path) => {
            let (columns, rows) = read_metadata_csv(std::fs::File::open(path)?, panel.series_ids())?;
            panel.with_metadata(columns, rows)
        }
    }
}

pub fn read_long_csv<R: Read>(input: R) -> Result<PanelDataset> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let expect = ["series_id", "date", "target"];
    for (i, name) in expect.iter().enumerate() {
        if headers.get(i).map(str::trim) != Some(*name) {
            return Err(Error::Data(format!(
                "panel CSV must start with columns series_id,date,target; found {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
    }
    let exog_names: Vec<String> = headers.iter().skip(3).map(|s| s.trim().to_string()).collect();

    struct Row {
        series: usize,
        date: NaiveDate,
        target: f64,
        exog: Vec<String>,
    }
    let mut series_ids: Vec<String> = Vec::new();
    let mut series_index: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = line + 2;
        let sid = rec.get(0).unwrap_or("").trim().to_string();
        let date = NaiveDate::parse_from_str(rec.get(1).unwrap_or("").trim(), DATE_FORMAT)
            .map_err(|e| Error::Data(format!("row {row_no}: bad date `{}`: {e}", rec.get(1).unwrap_or(""))))?;
        let target = match parse_optional(rec.get(2).unwrap_or("")) {
            Some(v) if v.is_nan() => 0.0,
            Some(v) => v,
            None => {
                return Err(Error::Data(format!(
                    "row {row_no}: target `{}` is not a number",
                    rec.get(2).unwrap_or("")
                )))
            }
        };
        let next = series_ids.len();
        let series = *series_index.entry(sid.clone()).or_insert_with(|| {
            series_ids.push(sid);
            next
        });
        rows.push(Row {
            series,
            date,
            target,
            exog: rec.iter().skip(3).map(str::to_string).collect(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Data("panel CSV has no rows".into()));
    }
    let start = rows.iter().map(|r| r.date).min().expect("non-empty");
    let end = rows.iter().map(|r| r.date).max().expect("non-empty");
    let n_days = (end - start).num_days() as usize + 1;
    let n = series_ids.len();

    let mut target = DenseMatrix::zeros(n, n_days);
    let mut first_row = vec![0usize; n * n_days];
    let numeric: Vec<bool> = (0..exog_names.len())
        .map(|k| rows.iter().all(|r| parse_optional(r.exog.get(k).map_or("", String::as_str)).is_some()))
        .collect();
    let mut exog: Vec<DenseMatrix> = exog_names.iter().map(|_| DenseMatrix::filled(n, n_days, f64::NAN)).collect();
    let mut encoders: Vec<Encoder> = exog_names.iter().map(|_| Encoder::default()).collect();
    for (k, r) in rows.iter().enumerate() {
        let day = (r.date - start).num_days() as usize;
        let cell = r.series * n_days + day;
        if first_row[cell] != 0 {
            return Err(Error::Data(format!(
                "rows {} and {}: duplicate observation for series `{}` on {}",
                first_row[cell],
                k + 2,
                series_ids[r.series],
                r.date
            )));
        }
        first_row[cell] = k + 2;
        target.set(r.series, day, r.target);
        for (c, m) in exog.iter_mut().enumerate() {
            let raw = r.exog.get(c).map_or("", String::as_str);
            let v = if numeric[c] {
                parse_optional(raw).expect("checked numeric")
            } else {
                encoders[c].encode(raw)
            };
            m.set(r.series, day, v);
        }
    }
    let filled = first_row.iter().filter(|&&r| r == 0).count();
    if filled > 0 {
        log::info!("zero-filled {filled} missing (series, date) cells");
    }
    let columns = exog_names
        .into_iter()
        .zip(exog)
        .zip(numeric)
        .map(|((name, m), numeric)| {
            let name = if numeric { name } else { format!("{name}_enc") };
            ExogColumn {
                name,
                values: compress_per_date(m),
            }
        })
        .collect();
    PanelDataset::new(series_ids, start, target, columns)
}

/// Stores a column once per date when every series agrees on each date
/// (ignoring missing cells).
fn compress_per_date(m: DenseMatrix) -> Exog {
    let (n, n_days) = m.shape();
    let mut per_date = vec![f64::NAN; n_days];
    for (day, slot) in per_date.iter_mut().enumerate() {
        for i in 0..n {
            let v = m.get(i, day);
            if v.is_nan() {
                continue;
            }
            if slot.is_nan() {
                *slot = v;
            } else if *slot != v {
                return Exog::PerSeries(m);
            }
        }
    }
    Exog::PerDate(per_date)
}

/// Reads a metadata CSV and orders its rows like `series_ids`.
pub fn read_metadata_csv<R: Read>(input: R, series_ids: &[String]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("series_id") {
        return Err(Error::Data("metadata CSV must start with a series_id column".into()));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut by_id: HashMap<String, Vec<String>> = HashMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        let row: Vec<String> = rec.iter().skip(1).map(|s| s.trim().to_string()).collect();
        if by_id.insert(id.clone(), row).is_some() {
            return Err(Error::Data(format!("metadata row {}: duplicate series `{id}`", line + 2)));
        }
    }
    let rows = series_ids
        .iter()
        .map(|id| {
            by_id
                .remove(id)
                .ok_or_else(|| Error::Data(format!("series `{id}` has no metadata row")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((columns, rows))
}

/// The twelve M5 aggregation levels over `load_m5` metadata, product x
/// store series at the bottom.
pub fn m5_hierarchy_spec() -> HierarchySpec {
    let level = |name: &str, cols: &[&str]| LevelColumns {
        name: name.into(),
        column: match cols {
            [] => ColumnRef::None,
            [c] => ColumnRef::One((*c).into()),
            cs => ColumnRef::Many(cs.iter().map(|c| c.to_string()).collect()),
        },
    };
    HierarchySpec {
        levels: vec![
            level("total", &[]),
            level("state", &["state_id"]),
            level("store", &["store_id"]),
            level("category", &["cat_id"]),
            level("department", &["dept_id"]),
            level("state/category", &["state_id", "cat_id"]),
            level("state/department", &["state_id", "dept_id"]),
            level("store/category", &["store_id", "cat_id"]),
            level("store/department", &["store_id", "dept_id"]),
            level("product", &["item_id"]),
            level("product/state", &["item_id", "state_id"]),
        ],
        bottom_name: Some("product/store".into()),
    }
}

/// Loads the M5 competition layout: a wide `sales_train_*.csv`
/// (`id,item_id,dept_id,cat_id,store_id,state_id,d_1,...`), `calendar.csv`
/// and `sell_prices.csv`.
pub fn load_m5(sales: &Path, calendar: &Path, prices: &Path) -> Result<PanelDataset> {
    // calendar: d -> (date, wm_yr_wk, events, snaps)
    let mut cal = csv::Reader::from_path(calendar)?;
    let ch = cal.headers()?.clone();
    let col = |name: &str| {
        ch.iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("calendar.csv lacks column `{name}`")))
    };
    let (c_date, c_week, c_d) = (col("date")?, col("wm_yr_wk")?, col("d")?);
    let c_ev1 = col("event_type_1")?;
    let c_ev2 = col("event_type_2")?;
    let snap_cols: Vec<(String, usize)> = ch
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("snap_"))
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    struct CalRow {
        date: NaiveDate,
        week: String,
        ev1: String,
        ev2: String,
        snaps: Vec<f64>,
    }
    let mut cal_rows: HashMap<String, CalRow> = HashMap::new();
    for (line, rec) in cal.records().enumerate() {
        let rec = rec?;
        let date = NaiveDate::parse_from_str(&rec[c_date], DATE_FORMAT)
            .map_err(|e| Error::Data(format!("calendar row {}: {e}", line + 2)))?;
        let snaps = snap_cols
            .iter()
            .map(|(_, i)| rec[*i].trim().parse::<f64>().unwrap_or(f64::NAN))
            .collect();
        cal_rows.insert(
            rec[c_d].to_string(),
            CalRow {
                date,
                week: rec[c_week].to_string(),
                ev1: rec[c_ev1].to_string(),
                ev2: rec[c_ev2].to_string(),
                snaps,
            },
        );
    }

    let mut sales_rdr = csv::Reader::from_path(sales)?;
    let sh = sales_rdr.headers()?.clone();
    let meta_names = ["item_id", "dept_id", "cat_id", "store_id", "state_id"];
    let id_col = sh
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::Data("sales file lacks an `id` column".into()))?;
    let meta_idx: Vec<usize> = meta_names
        .iter()
        .map(|m| {
            sh.iter()
                .position(|h| h == *m)
                .ok_or_else(|| Error::Data(format!("sales file lacks column `{m}`")))
        })
        .collect::<Result<_>>()?;
    let day_cols: Vec<(usize, &CalRow)> = sh
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("d_"))
        .map(|(i, h)| {
            cal_rows
                .get(h)
                .map(|c| (i, c))
                .ok_or_else(|| Error::Data(format!("day column `{h}` missing from calendar.csv")))
        })
        .collect::<Result<_>>()?;
    if day_cols.is_empty() {
        return Err(Error::Data("sales file has no d_* columns".into()));
    }
    let start = day_cols[0].1.date;
    for (k, (_, c)) in day_cols.iter().enumerate() {
        if (c.date - start).num_days() != k as i64 {
            return Err(Error::Data(format!("sales day columns are not contiguous at {}", c.date)));
        }
    }
    let n_days = day_cols.len();

    let mut ids = Vec::new();
    let mut meta = Vec::new();
    let mut target_rows = Vec::new();
    for (line, rec) in sales_rdr.records().enumerate() {
        let rec = rec?;
        ids.push(rec[id_col].to_string());
        meta.push(meta_idx.iter().map(|&i| rec[i].to_string()).collect::<Vec<_>>());
        let row = day_cols
            .iter()
            .map(|(i, _)| {
                rec[*i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("sales row {}: {e}", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        target_rows.push(row);
    }
    let n = ids.len();
    let target = DenseMatrix::from_rows(&target_rows)?;

    // sell prices keyed by (store, item, week)
    let store_pos = 3;
    let item_pos = 0;
    let mut price_of: HashMap<(String, String, String), f64> = HashMap::new();
    let mut pr = csv::Reader::from_path(prices)?;
    let ph = pr.headers()?.clone();
    let pcol = |name: &str| {
        ph.iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("sell_prices.csv lacks column `{name}`")))
    };
    let (p_store, p_item, p_week, p_price) = (pcol("store_id")?, pcol("item_id")?, pcol("wm_yr_wk")?, pcol("sell_price")?);
    for rec in pr.records() {
        let rec = rec?;
        let price = rec[p_price].trim().parse::<f64>().unwrap_or(f64::NAN);
        price_of.insert((rec[p_store].to_string(), rec[p_item].to_string(), rec[p_week].to_string()), price);
    }
    let price = DenseMatrix::from_fn(n, n_days, |i, d| {
        let key = (meta[i][store_pos].clone(), meta[i][item_pos].clone(), day_cols[d].1.week.clone());
        price_of.get(&key).copied().unwrap_or(f64::NAN)
    });

    let mut exog = vec![ExogColumn {
        name: SELL_PRICE.into(),
        values: Exog::PerSeries(price),
    }];
    for (k, (name, _)) in snap_cols.iter().enumerate() {
        exog.push(ExogColumn {
            name: name.clone(),
            values: Exog::PerDate(day_cols.iter().map(|(_, c)| c.snaps[k]).collect()),
        });
    }
    for (name, pick) in [
        ("event_type_1_enc", (|c: &CalRow| c.ev1.clone()) as fn(&CalRow) -> String),
        ("event_type_2_enc", |c: &CalRow| c.ev2.clone()),
    ] {
        let mut enc = Encoder::default();
        exog.push(ExogColumn {
            name: name.into(),
            values: Exog::PerDate(day_cols.iter().map(|(_, c)| enc.encode(&pick(c))).collect()),
        });
    }
    PanelDataset::new(ids, start, target, exog)?.with_metadata(meta_names.iter().map(|s| s.to_string()).collect(), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_long_csv() {
        let csv = "series_id,date,target\na,2020-01-01,1\na,2020-01-02,2\na,2020-01-03,3\nb,2020-01-01,4\nb,2020-01-02,5\nb,2020-01-03,6\n";
        let p = read_long_csv(csv.as_bytes()).unwrap();
        assert_eq!(p.n_series() * p.n_days(), 6);
        assert_eq!(p.target().row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn missing_middle_day_is_zero_filled() {
        let csv = "series_id,date,target,price\na,2020-01-01,1,2.0\na,2020-01-03,3,2.5\n";
        let p = read_long_csv(csv.as_bytes()).unwrap();
        assert_eq!(p.n_days(), 3);
        assert_eq!(p.target().row(0), &[1.0, 0.0, 3.0]);
        assert!(p.exog_column("price").unwrap().get(0, 1).is_nan());
    }

    #[test]
    fn duplicate_rows_are_reported_with_row_numbers() {
        let csv = "series_id,date,target\na,2020-01-01,1\na,2020-01-01,2\n";
        let err = read_long_csv(csv.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("rows 2 and 3"), "{err}");
    }

    #[test]
    fn text_columns_are_encoded_and_shared_columns_compressed() {
        let csv = "series_id,date,target,event,price\n\
                   a,2020-01-01,1,,1.0\na,2020-01-02,1,Sport,1.0\n\
                   b,2020-01-01,1,,2.0\nb,2020-01-02,1,Sport,2.0\n";
        let p = read_long_csv(csv.as_bytes()).unwrap();
        assert_eq!(p.exog_column("event_enc"), Some(&Exog::PerDate(vec![0.0, 1.0])));
        assert!(matches!(p.exog_column("price"), Some(Exog::PerSeries(_))));
    }

    #[test]
    fn weeks_on_sale_counts_from_first_price() {
        let price = DenseMatrix::from_rows(&[vec![f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]]).unwrap();
        let w = weeks_on_sale(&price);
        assert!(w.get(0, 0).is_nan());
        assert_eq!(w.get(0, 1), 0.0);
        assert_eq!(w.get(0, 8), 1.0);
    }
}
