use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of value bins per feature; one more bin holds missing values.
pub const MAX_VALUE_BINS: usize = 255;

const BINNING_SAMPLE: usize = 200_000;

/// Maps raw values of one feature to bin indices.
///
/// Value `v` falls in the first bin `b` with `v <= edges[b]`, or in the last
/// value bin when it exceeds every edge. NaN goes to the missing bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    edges: Vec<f64>,
}

impl BinMapper {
    /// Quantile bin edges; lossless when there are at most `max_bins`
    /// distinct values.
    pub fn fit(values: &[f64], max_bins: usize) -> Self {
        let max_bins = max_bins.clamp(1, MAX_VALUE_BINS);
        let stride = values.len().div_ceil(BINNING_SAMPLE).max(1);
        let mut sorted: Vec<f64> = values
            .iter()
            .step_by(stride)
            .copied()
            .filter(|v| !v.is_nan())
            .collect();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();

        let edges = if distinct.len() <= max_bins {
            distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
        } else {
            let n = sorted.len();
            let mut edges: Vec<f64> = Vec::with_capacity(max_bins - 1);
            for k in 1..max_bins {
                let idx = (k * n) / max_bins;
                if idx == 0 || idx >= n {
                    continue;
                }
                let (lo, hi) = (sorted[idx - 1], sorted[idx]);
                if lo == hi {
                    // tie across the cut: put the cut just above the tied value
                    if let Some(&next) = distinct.iter().find(|&&d| d > lo) {
                        push_edge(&mut edges, midpoint(lo, next));
                    }
                } else {
                    push_edge(&mut edges, midpoint(lo, hi));
                }
            }
            edges
        };
        Self { edges }
    }

    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.len() + 2 > MAX_VALUE_BINS + 1 {
            return Err(Error::InvalidArgument(format!("{} edges exceed the bin budget", edges.len())));
        }
        if edges.windows(2).any(|w| w[1] <= w[0]) || edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("bin edges must be finite and strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_value_bins(&self) -> usize {
        self.edges.len() + 1
    }

    /// Value bins plus the missing bin.
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 2
    }

    pub fn missing_bin(&self) -> u8 {
        (self.edges.len() + 1) as u8
    }

    #[inline]
    pub fn bin(&self, v: f64) -> u8 {
        if v.is_nan() {
            return self.missing_bin();
        }
        self.edges.partition_point(|&e| e < v) as u8
    }

    /// Upper bound of value bin `b` (finite for every bin but the last).
    pub fn upper_bound(&self, b: u8) -> f64 {
        self.edges.get(b as usize).copied().unwrap_or(f64::INFINITY)
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

fn push_edge(edges: &mut Vec<f64>, e: f64) {
    if edges.last().is_none_or(|&last| e > last) {
        edges.push(e);
    }
}

/// Named raw feature columns; NaN marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::shape(
                format!("{} columns", names.len()),
                format!("{}", columns.len()),
            ));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::shape(format!("columns of length {n_rows}"), format!("{}", c.len())));
        }
        Ok(Self { names, columns, n_rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Keeps only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
        Self {
            names: self.names.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// Appends the rows of `other`, which must share the schema.
    pub fn extend(&mut self, other: &FeatureMatrix) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Data("cannot append feature rows with a different schema".into()));
        }
        for (c, o) in self.columns.iter_mut().zip(&other.columns) {
            c.extend_from_slice(o);
        }
        self.n_rows += other.n_rows;
        Ok(())
    }

    pub fn bin(&self, targets: &[f64], max_bins: usize) -> Result<BinnedDataset> {
        bin_features(&self.names, &self.columns, targets, max_bins)
    }

    pub fn bin_with(&self, targets: &[f64], mappers: Vec<BinMapper>) -> Result<BinnedDataset> {
        BinnedDataset::with_mappers(&self.names, &self.columns, targets, mappers)
    }
}

/// Column-wise binned features with targets and sample weights.
#[derive(Debug, Clone)]
pub struct BinnedDataset {
    n_samples: usize,
    feature_names: Vec<String>,
    mappers: Vec<BinMapper>,
    bins: Vec<Vec<u8>>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

/// Fits a bin mapper per feature column and bins the columns.
pub fn bin_features(
    names: &[String],
    columns: &[Vec<f64>],
    targets: &[f64],
    max_bins: usize,
) -> Result<BinnedDataset> {
    let mappers: Vec<BinMapper> = columns.par_iter().map(|c| BinMapper::fit(c, max_bins)).collect();
    BinnedDataset::with_mappers(names, columns, targets, mappers)
}

impl BinnedDataset {
    /// Bins columns with existing mappers, e.g. a validation set binned like
    /// its training set.
    pub fn with_mappers(
        names: &[String],
        columns: &[Vec<f64>],
        targets: &[f64],
        mappers: Vec<BinMapper>,
    ) -> Result<Self> {
        if names.len() != columns.len() || mappers.len() != columns.len() {
            return Err(Error::shape(
                format!("{} names and mappers", columns.len()),
                format!("{} names, {} mappers", names.len(), mappers.len()),
            ));
        }
        let n_samples = targets.len();
        if let Some(c) = columns.iter().find(|c| c.len() != n_samples) {
            return Err(Error::shape(
                format!("feature columns of length {n_samples}"),
                format!("{}", c.len()),
            ));
        }
        let bins = columns
            .par_iter()
            .zip(&mappers)
            .map(|(c, m)| c.iter().map(|&v| m.bin(v)).collect())
            .collect();
        Ok(Self {
            n_samples,
            feature_names: names.to_vec(),
            mappers,
            bins,
            targets: targets.to_vec(),
            weights: vec![1.0; n_samples],
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n_samples {
            return Err(Error::shape(
                format!("{} weights", self.n_samples),
                format!("{}", weights.len()),
            ));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.bins.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn mappers(&self) -> &[BinMapper] {
        &self.mappers
    }

    pub fn bins(&self, feature: usize) -> &[u8] {
        &self.bins[feature]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}
