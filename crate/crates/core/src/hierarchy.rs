//! Cross-sectional and temporal summing matrices.
//!
//! A [`Hierarchy`] stacks one block of aggregate rows per level (in the order
//! the levels were given) on top of an identity block for the bottom series.
//! There is no implicit total: a total is just a level with a single group.

use std::collections::HashMap;
use std::ops::Range;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};

/// One aggregation level: maps every bottom key to a group identifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub name: String,
    pub group_of: HashMap<String, String>,
}

impl LevelSpec {
    pub fn new(name: impl Into<String>, group_of: HashMap<String, String>) -> Self {
        Self {
            name: name.into(),
            group_of,
        }
    }

    /// A level with a single group containing every key.
    pub fn total<S: AsRef<str>>(name: impl Into<String>, keys: &[S]) -> Self {
        let name = name.into();
        let group_of = keys
            .iter()
            .map(|k| (k.as_ref().to_string(), name.clone()))
            .collect();
        Self { name, group_of }
    }
}

/// Row range of one level inside `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub name: String,
    pub rows: Range<usize>,
}

/// A summing matrix with level metadata and its loss denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    s: SparseMatrix,
    levels: Vec<Level>,
    row_labels: Vec<String>,
    n_a: usize,
    n_b: usize,
    n_levels: usize,
    d: Vec<f64>,
}

/// The `C`, `U^T`, `J` blocks of a summing matrix `S^T = [C^T I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Aggregate rows of `S`, `n_a x n_b`.
    pub c: SparseMatrix,
    /// `[I_{n_a}  -C]`, `n_a x n`.
    pub u_t: SparseMatrix,
    /// `[0  I_{n_b}]`, `n_b x n`.
    pub j: SparseMatrix,
}

struct Grouping {
    name: String,
    labels: Vec<String>,
    member_of: Vec<usize>,
}

impl Hierarchy {
    fn from_groupings(
        bottom_labels: Vec<String>,
        bottom_name: &str,
        groupings: Vec<Grouping>,
    ) -> Self {
        let n_b = bottom_labels.len();
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut levels = Vec::with_capacity(groupings.len() + 1);
        let mut row_labels = Vec::new();
        let mut offset = 0;
        for g in &groupings {
            for (b, &grp) in g.member_of.iter().enumerate() {
                rows.push(offset + grp);
                cols.push(b);
            }
            levels.push(Level {
                name: g.name.clone(),
                rows: offset..offset + g.labels.len(),
            });
            row_labels.extend(g.labels.iter().cloned());
            offset += g.labels.len();
        }
        let n_a = offset;
        for b in 0..n_b {
            rows.push(n_a + b);
            cols.push(b);
        }
        levels.push(Level {
            name: bottom_name.to_string(),
            rows: n_a..n_a + n_b,
        });
        row_labels.extend(bottom_labels);
        let ones = vec![1.0; rows.len()];
        let s = SparseMatrix::from_triplets(&rows, &cols, &ones, (n_a + n_b, n_b))
            .expect("group indices are in range");
        let n_levels = groupings.len() + 1;
        let l = n_levels as f64;
        let d = s.row_sums().into_iter().map(|r| l * r).collect();
        Self {
            s,
            levels,
            row_labels,
            n_a,
            n_b,
            n_levels,
            d,
        }
    }

    /// Summing matrix, `n x n_b`.
    pub fn s(&self) -> &SparseMatrix {
        &self.s
    }

    /// Levels in row order; the bottom level is last.
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn bottom_labels(&self) -> &[String] {
        &self.row_labels[self.n_a..]
    }

    pub fn n(&self) -> usize {
        self.n_a + self.n_b
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    /// Number of levels, counting the bottom level.
    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    /// Loss denominator `l * row_sums(S)`.
    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn is_trivial(&self) -> bool {
        self.n_a == 0
    }

    /// `S b`: every node's value from bottom values.
    pub fn aggregate(&self, bottom: &[f64]) -> Result<Vec<f64>> {
        self.s.spmv(bottom)
    }

    /// `S Y` for a bottom matrix with one row per bottom series.
    pub fn aggregate_rows(&self, bottom: &DenseMatrix) -> Result<DenseMatrix> {
        self.s.spmm_dense(bottom)
    }

    pub fn level_of_row(&self, row: usize) -> Option<&Level> {
        self.levels.iter().find(|l| l.rows.contains(&row))
    }

    /// Bottom members of an aggregate or bottom row.
    pub fn members(&self, row: usize) -> &[usize] {
        self.s.row(row).0
    }

    pub fn partition(&self) -> Partition {
        let (n_a, n_b, n) = (self.n_a, self.n_b, self.n());
        let (mut c_r, mut c_c) = (Vec::new(), Vec::new());
        let (mut u_r, mut u_c, mut u_v) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n_a {
            u_r.push(i);
            u_c.push(i);
            u_v.push(1.0);
            for &j in self.s.row(i).0 {
                c_r.push(i);
                c_c.push(j);
                u_r.push(i);
                u_c.push(n_a + j);
                u_v.push(-1.0);
            }
        }
        let ones = vec![1.0; c_r.len()];
        let c = SparseMatrix::from_triplets(&c_r, &c_c, &ones, (n_a, n_b)).expect("in range");
        let u_t = SparseMatrix::from_triplets(&u_r, &u_c, &u_v, (n_a, n)).expect("in range");
        let j_rows: Vec<usize> = (0..n_b).collect();
        let j_cols: Vec<usize> = (n_a..n).collect();
        let j = SparseMatrix::from_triplets(&j_rows, &j_cols, &vec![1.0; n_b], (n_b, n))
            .expect("in range");
        Partition { c, u_t, j }
    }
}

/// Builds a cross-sectional hierarchy over `bottom_keys`.
///
/// Aggregate rows follow `level_specs` order; inside a level, groups appear in
/// the order their first member appears in `bottom_keys`.
pub fn build_cross_sectional<S: AsRef<str>>(
    bottom_keys: &[S],
    level_specs: &[LevelSpec],
) -> Result<Hierarchy> {
    build_cross_sectional_named(bottom_keys, level_specs, "bottom")
}

pub fn build_cross_sectional_named<S: AsRef<str>>(
    bottom_keys: &[S],
    level_specs: &[LevelSpec],
    bottom_name: &str,
) -> Result<Hierarchy> {
    let mut groupings = Vec::with_capacity(level_specs.len());
    for spec in level_specs {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut member_of = Vec::with_capacity(bottom_keys.len());
        for key in bottom_keys {
            let key = key.as_ref();
            let group = spec.group_of.get(key).ok_or_else(|| Error::MissingKey {
                key: key.to_string(),
                level: spec.name.clone(),
            })?;
            let next = index.len();
            let g = *index.entry(group.as_str()).or_insert_with(|| {
                labels.push(row_label(&spec.name, group));
                next
            });
            member_of.push(g);
        }
        groupings.push(Grouping {
            name: spec.name.clone(),
            labels,
            member_of,
        });
    }
    let bottom: Vec<String> = bottom_keys.iter().map(|k| k.as_ref().to_string()).collect();
    Ok(Hierarchy::from_groupings(bottom, bottom_name, groupings))
}

fn row_label(level: &str, group: &str) -> String {
    if level == group {
        level.to_string()
    } else {
        format!("{level}/{group}")
    }
}

/// Calendar bucket used for temporal aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    /// ISO weeks (Monday start).
    Week,
    Month,
    Year,
    /// One bucket covering every timestep.
    All,
}

impl Frequency {
    pub fn name(self) -> &'static str {
        match self {
            Frequency::Week => "week",
            Frequency::Month => "month",
            Frequency::Year => "year",
            Frequency::All => "all",
        }
    }

    fn bucket(self, date: NaiveDate) -> String {
        match self {
            Frequency::Week => {
                let w = date.iso_week();
                format!("{}-W{:02}", w.year(), w.week())
            }
            Frequency::Month => format!("{}-{:02}", date.year(), date.month()),
            Frequency::Year => format!("{}", date.year()),
            Frequency::All => "all".to_string(),
        }
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "week" | "weekly" | "w" => Ok(Frequency::Week),
            "month" | "monthly" | "m" => Ok(Frequency::Month),
            "year" | "yearly" | "y" => Ok(Frequency::Year),
            "all" => Ok(Frequency::All),
            other => Err(Error::InvalidArgument(format!(
                "unknown frequency `{other}` (expected week, month, year or all)"
            ))),
        }
    }
}

/// Builds a temporal hierarchy over strictly increasing daily dates.
///
/// Partial buckets at either edge are kept, so every column sums to the
/// number of levels.
pub fn build_temporal(dates: &[NaiveDate], frequencies: &[Frequency]) -> Result<Hierarchy> {
    for w in dates.windows(2) {
        if w[1] == w[0] {
            return Err(Error::InvalidArgument(format!("duplicate date {}", w[0])));
        }
        if w[1] < w[0] {
            return Err(Error::InvalidArgument(format!(
                "dates must be increasing: {} follows {}",
                w[1], w[0]
            )));
        }
    }
    let keys: Vec<String> = dates.iter().map(|d| d.to_string()).collect();
    let specs: Vec<LevelSpec> = frequencies
        .iter()
        .map(|f| {
            let group_of = dates
                .iter()
                .zip(&keys)
                .map(|(d, k)| (k.clone(), f.bucket(*d)))
                .collect();
            LevelSpec::new(f.name(), group_of)
        })
        .collect();
    build_cross_sectional_named(&keys, &specs, "day")
}

/// Samples a random cross-sectional hierarchy.
///
/// Draws the level count uniformly from `1..=max_levels` and, per level, a
/// category count from `1..=max_categories`; each bottom series then joins a
/// uniformly drawn category. Empty categories are dropped.
pub fn sample_random_hierarchy(
    n_b: usize,
    max_levels: usize,
    max_categories: usize,
    seed: u64,
) -> Result<Hierarchy> {
    if max_levels == 0 || max_categories == 0 {
        return Err(Error::InvalidArgument(
            "max_levels and max_categories must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_levels = rng.random_range(1..=max_levels);
    let mut groupings = Vec::with_capacity(n_levels);
    for lvl in 0..n_levels {
        let k = rng.random_range(1..=max_categories);
        let draws: Vec<usize> = (0..n_b).map(|_| rng.random_range(0..k)).collect();
        // relabel by first appearance so empty categories vanish
        let mut remap = vec![usize::MAX; k];
        let mut labels = Vec::new();
        let member_of = draws
            .iter()
            .map(|&c| {
                if remap[c] == usize::MAX {
                    remap[c] = labels.len();
                    labels.push(format!("random{lvl}/{c}"));
                }
                remap[c]
            })
            .collect();
        groupings.push(Grouping {
            name: format!("random{lvl}"),
            labels,
            member_of,
        });
    }
    let bottom = (0..n_b).map(|b| b.to_string()).collect();
    Ok(Hierarchy::from_groupings(bottom, "bottom", groupings))
}

/// Which metadata columns define a level; absent means a single total group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    #[default]
    None,
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelColumns {
    pub name: String,
    #[serde(default)]
    pub column: ColumnRef,
}

/// Declarative hierarchy file: `{"levels":[{"name":..., "column":...}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySpec {
    pub levels: Vec<LevelColumns>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom_name: Option<String>,
}

impl HierarchySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn bottom_name(&self) -> &str {
        self.bottom_name.as_deref().unwrap_or("bottom")
    }

    /// Resolves column references against a metadata table with one row of
    /// `columns` values per entry of `series`.
    pub fn resolve(
        &self,
        series: &[String],
        columns: &[String],
        rows: &[Vec<String>],
    ) -> Result<Vec<LevelSpec>> {
        if rows.len() != series.len() {
            return Err(Error::shape(
                format!("{} metadata rows", series.len()),
                format!("{}", rows.len()),
            ));
        }
        let col_index = |name: &str| {
            columns.iter().position(|c| c == name).ok_or_else(|| {
                Error::Data(format!(
                    "hierarchy column `{name}` not found in metadata columns {columns:?}"
                ))
            })
        };
        self.levels
            .iter()
            .map(|lvl| {
                let idx: Vec<usize> = match &lvl.column {
                    ColumnRef::None => Vec::new(),
                    ColumnRef::One(c) => vec![col_index(c)?],
                    ColumnRef::Many(cs) => cs.iter().map(|c| col_index(c)).collect::<Result<_>>()?,
                };
                let group_of = series
                    .iter()
                    .zip(rows)
                    .map(|(s, row)| {
                        let group = if idx.is_empty() {
                            lvl.name.clone()
                        } else {
                            idx.iter()
                                .map(|&i| row[i].as_str())
                                .collect::<Vec<_>>()
                                .join("/")
                        };
                        (s.clone(), group)
                    })
                    .collect();
                Ok(LevelSpec::new(lvl.name.clone(), group_of))
            })
            .collect()
    }

    pub fn build(
        &self,
        series: &[String],
        columns: &[String],
        rows: &[Vec<String>],
    ) -> Result<Hierarchy> {
        let specs = self.resolve(series, columns, rows)?;
        build_cross_sectional_named(series, &specs, self.bottom_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("s{i}")).collect()
    }

    fn dense(h: &Hierarchy) -> Vec<Vec<f64>> {
        let d = h.s().to_dense();
        (0..d.n_rows()).map(|i| d.row(i).to_vec()).collect()
    }

    #[test]
    fn toy_cross_sectional() {
        let k = keys(2);
        let h = build_cross_sectional(&k, &[LevelSpec::total("total", &k)]).unwrap();
        assert_eq!(dense(&h), vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(h.n_levels(), 2);
        assert_eq!(h.d(), &[4.0, 2.0, 2.0]);
        assert_eq!(h.row_labels(), &["total", "s1", "s2"]);
    }

    #[test]
    fn no_levels_is_identity() {
        let h = build_cross_sectional(&keys(2), &[]).unwrap();
        assert_eq!(h.s(), &SparseMatrix::identity(2));
        assert_eq!(h.n_levels(), 1);
        assert_eq!(h.d(), &[1.0, 1.0]);
        assert!(h.is_trivial());
    }

    #[test]
    fn two_level_example() {
        let k = keys(4);
        let pairs: HashMap<String, String> = k
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), if i < 2 { "A" } else { "B" }.to_string()))
            .collect();
        let h = build_cross_sectional(
            &k,
            &[LevelSpec::total("total", &k), LevelSpec::new("pair", pairs)],
        )
        .unwrap();
        assert_eq!(h.s().shape(), (7, 4));
        assert_eq!(h.s().col_sums(), vec![3.0; 4]);
        assert_eq!(h.d(), &[12.0, 6.0, 6.0, 3.0, 3.0, 3.0, 3.0]);
        let p = h.partition();
        assert_eq!(
            p.c.to_dense(),
            DenseMatrix::from_rows(&[
                vec![1.0, 1.0, 1.0, 1.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0]
            ])
            .unwrap()
        );
    }

    #[test]
    fn missing_key_names_key_and_level() {
        let k = keys(2);
        let mut group_of = HashMap::new();
        group_of.insert("s1".to_string(), "g".to_string());
        let err = build_cross_sectional(&k, &[LevelSpec::new("store", group_of)]).unwrap_err();
        match err {
            Error::MissingKey { key, level } => {
                assert_eq!(key, "s2");
                assert_eq!(level, "store");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn toy_partition() {
        let k = keys(2);
        let h = build_cross_sectional(&k, &[LevelSpec::total("total", &k)]).unwrap();
        let p = h.partition();
        assert_eq!(p.c.to_dense().values(), &[1.0, 1.0]);
        assert_eq!(p.u_t.to_dense().values(), &[1.0, -1.0, -1.0]);
        assert_eq!(
            p.j.to_dense(),
            DenseMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap()
        );
        let trivial = build_cross_sectional(&k, &[]).unwrap().partition();
        assert_eq!(trivial.c.shape(), (0, 2));
        assert_eq!(trivial.u_t.shape(), (0, 2));
        assert_eq!(trivial.j, SparseMatrix::identity(2));
    }

    #[test]
    fn temporal_toy_and_weeks() {
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(); // a Monday
        let two: Vec<NaiveDate> = (0..2).map(|i| start + chrono::Days::new(i)).collect();
        let h = build_temporal(&two, &[Frequency::All]).unwrap();
        assert_eq!(dense(&h), vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);

        let fourteen: Vec<NaiveDate> = (0..14).map(|i| start + chrono::Days::new(i)).collect();
        let w = build_temporal(&fourteen, &[Frequency::Week]).unwrap();
        assert_eq!(w.n_a(), 2);
        assert_eq!(w.s().row_sums()[..2], [7.0, 7.0]);
        assert_eq!(w.s().row(0).0, &[0, 1, 2, 3, 4, 5, 6]);

        let none = build_temporal(&fourteen, &[]).unwrap();
        assert_eq!(none.d(), &[1.0; 14]);
    }

    #[test]
    fn temporal_keeps_partial_edge_buckets() {
        // Friday to the following Sunday: 3 + 7 days
        let start = NaiveDate::from_ymd_opt(2024, 1, 5).unwrap();
        let dates: Vec<NaiveDate> = (0..10).map(|i| start + chrono::Days::new(i)).collect();
        let h = build_temporal(&dates, &[Frequency::Week]).unwrap();
        assert_eq!(&h.s().row_sums()[..2], &[3.0, 7.0]);
        assert_eq!(h.s().col_sums(), vec![2.0; 10]);
    }

    #[test]
    fn temporal_rejects_duplicate_dates() {
        let d = NaiveDate::from_ymd_opt(2024, 1, 5).unwrap();
        assert!(build_temporal(&[d, d], &[Frequency::Week]).is_err());
    }

    #[test]
    fn random_hierarchy_forced_and_deterministic() {
        let h = sample_random_hierarchy(2, 1, 1, 7).unwrap();
        assert_eq!(dense(&h), vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        let a = sample_random_hierarchy(50, 10, 100, 42).unwrap();
        let b = sample_random_hierarchy(50, 10, 100, 42).unwrap();
        assert_eq!(a, b);
        assert!(sample_random_hierarchy(5, 0, 3, 1).is_err());
    }

    #[test]
    fn spec_file_resolves_columns() {
        let spec = HierarchySpec::from_json(
            r#"{"levels":[{"name":"total"},{"name":"store","column":"store"},
                {"name":"store_dept","column":["store","dept"]}]}"#,
        )
        .unwrap();
        let series = keys(3);
        let columns = vec!["store".to_string(), "dept".to_string()];
        let rows = vec![
            vec!["CA_1".to_string(), "FOODS".to_string()],
            vec!["CA_1".to_string(), "HOBBIES".to_string()],
            vec!["TX_1".to_string(), "FOODS".to_string()],
        ];
        let h = spec.build(&series, &columns, &rows).unwrap();
        assert_eq!(h.n_a(), 1 + 2 + 3);
        assert_eq!(h.row_labels()[1], "store/CA_1");
        assert_eq!(h.row_labels()[3], "store_dept/CA_1/FOODS");
        assert_eq!(h.n_levels(), 4);

        let bad = HierarchySpec::from_json(r#"{"levels":[{"name":"x","column":"nope"}]}"#).unwrap();
        assert!(matches!(bad.build(&series, &columns, &rows), Err(Error::Data(_))));
    }
}
