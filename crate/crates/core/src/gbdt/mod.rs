//! Histogram-based gradient-boosted regression trees with pluggable objectives.

mod binning;
mod booster;
mod tree;

pub use binning::{bin_features, BinMapper, BinnedDataset, FeatureMatrix, MAX_VALUE_BINS};
pub use booster::{fit, Booster, IterationLog, TrainConfig, Validation};
pub use tree::{Node, Tree};
