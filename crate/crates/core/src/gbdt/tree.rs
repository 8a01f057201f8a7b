use serde::{Deserialize, Serialize};

use super::binning::BinnedDataset;

/// A tree node; children are indices into the tree's node list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        /// Samples with bin index `<= bin` go left.
        bin: u8,
        /// Raw-value equivalent of `bin`: `x <= threshold` goes left.
        threshold: f64,
        missing_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        debug_assert!(!nodes.is_empty());
        Self { nodes }
    }

    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Output for a row of raw feature values, given as a lookup by feature id.
    #[inline]
    pub fn predict_with(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let x = value_of(*feature);
                    let go_left = if x.is_nan() { *missing_left } else { x <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Output for row `row` of a binned dataset.
    #[inline]
    pub fn predict_binned(&self, data: &BinnedDataset, row: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    bin,
                    missing_left,
                    left,
                    right,
                    ..
                } => {
                    let b = data.bins(*feature)[row];
                    let go_left = if b == data.mappers()[*feature].missing_bin() {
                        *missing_left
                    } else {
                        b <= *bin
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }
}
