//! Dasgupta cost and Moseley–Wang revenue.
//!
//! Both objectives are evaluated per merge: an internal node joining leaf sets
//! `A` and `B` contributes `(|A| + |B|) w(A, B)` to the cost and
//! `(n - |A| - |B|) w(A, B)` to the revenue. Every pair `i < j` is counted at
//! exactly one merge (its LCA), so one pass is `O(n^2)`. The `*_pairwise`
//! variants evaluate the defining pair sums directly and serve as a cross
//! check.

use serde::Serialize;

use crate::error::{HcError, Result};
use crate::numeric::CompensatedSum;
use crate::similarity::SimilarityMatrix;
use crate::tree::{HcTree, NodeId};

/// Both objectives for one tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Score {
    pub n: usize,
    pub total_weight: f64,
    pub cost: f64,
    pub revenue: f64,
    /// `revenue / ((n - 2) * total_weight)`; `None` when undefined.
    pub normalized_revenue: Option<f64>,
}

impl Score {
    /// `|cost + revenue - n * total| / (n * total)`, or the absolute gap when
    /// the total weight is zero.
    pub fn duality_gap(&self) -> f64 {
        let target = self.n as f64 * self.total_weight;
        let gap = (self.cost + self.revenue - target).abs();
        if target > 0.0 {
            gap / target
        } else {
            gap
        }
    }

    pub fn duality_ok(&self, tolerance: f64) -> bool {
        self.duality_gap() <= tolerance
    }
}

pub(crate) fn check_sizes(tree: &HcTree, w: &SimilarityMatrix) -> Result<()> {
    if tree.n() != w.n() {
        return Err(HcError::SizeMismatch {
            tree: tree.n(),
            matrix: w.n(),
        });
    }
    Ok(())
}

/// For every internal node, `(node, |node|, w(left leaves, right leaves))`.
pub fn merge_weights(tree: &HcTree, w: &SimilarityMatrix) -> Result<Vec<(NodeId, usize, f64)>> {
    check_sizes(tree, w)?;
    let order = tree.postorder();
    // Leaves of every subtree form a contiguous run of `leaf_order`.
    let mut leaf_order = Vec::with_capacity(tree.n());
    let mut span = vec![(0usize, 0usize); tree.node_count()];
    for &id in &order {
        span[id.index()] = match tree.children(id) {
            None => {
                leaf_order.push(id.index());
                (leaf_order.len() - 1, leaf_order.len())
            }
            Some([l, r]) => {
                let (ls, le) = span[l.index()];
                let (rs, re) = span[r.index()];
                (ls.min(rs), le.max(re))
            }
        };
    }
    let mut out = Vec::with_capacity(tree.n() - 1);
    for id in order {
        if let Some([l, r]) = tree.children(id) {
            let (ls, le) = span[l.index()];
            let (rs, re) = span[r.index()];
            let mut acc = CompensatedSum::new();
            for &i in &leaf_order[ls..le] {
                let row = w.row(i);
                for &j in &leaf_order[rs..re] {
                    acc.add(row[j]);
                }
            }
            out.push((id, tree.size(id), acc.value()));
        }
    }
    Ok(out)
}

/// Dasgupta cost `sum_{i<j} w(i,j) |T_{i,j}|`.
pub fn cost(tree: &HcTree, w: &SimilarityMatrix) -> Result<f64> {
    Ok(merge_weights(tree, w)?
        .into_iter()
        .map(|(_, size, weight)| size as f64 * weight)
        .collect::<CompensatedSum>()
        .value())
}

/// Moseley–Wang revenue `sum_{i<j} w(i,j) (n - |T_{i,j}|)`.
pub fn revenue(tree: &HcTree, w: &SimilarityMatrix) -> Result<f64> {
    let n = tree.n();
    Ok(merge_weights(tree, w)?
        .into_iter()
        .map(|(_, size, weight)| (n - size) as f64 * weight)
        .collect::<CompensatedSum>()
        .value())
}

/// Revenue divided by its upper bound `(n - 2) sum_{i<j} w(i,j)`.
pub fn normalize(revenue: f64, n: usize, total_weight: f64) -> Result<f64> {
    if n <= 2 || total_weight <= 0.0 {
        return Err(HcError::UndefinedNormalization { n, total_weight });
    }
    Ok(revenue / ((n - 2) as f64 * total_weight))
}

pub fn normalized_revenue(tree: &HcTree, w: &SimilarityMatrix) -> Result<f64> {
    normalize(revenue(tree, w)?, tree.n(), w.total_weight())
}

pub fn score(tree: &HcTree, w: &SimilarityMatrix) -> Result<Score> {
    let n = tree.n();
    let mut cost = CompensatedSum::new();
    let mut revenue = CompensatedSum::new();
    for (_, size, weight) in merge_weights(tree, w)? {
        cost.add(size as f64 * weight);
        revenue.add((n - size) as f64 * weight);
    }
    let revenue = revenue.value();
    Ok(Score {
        n,
        total_weight: w.total_weight(),
        cost: cost.value(),
        revenue,
        normalized_revenue: normalize(revenue, n, w.total_weight()).ok(),
    })
}

/// Cost from the pair definition, one LCA query per pair.
pub fn cost_pairwise(tree: &HcTree, w: &SimilarityMatrix) -> Result<f64> {
    check_sizes(tree, w)?;
    let mut acc = CompensatedSum::new();
    for i in 0..tree.n() {
        for j in i + 1..tree.n() {
            acc.add(w.get(i, j) * tree.lca_subtree_size(i, j)? as f64);
        }
    }
    Ok(acc.value())
}

/// Revenue from the pair definition, one LCA query per pair.
pub fn revenue_pairwise(tree: &HcTree, w: &SimilarityMatrix) -> Result<f64> {
    check_sizes(tree, w)?;
    let n = tree.n();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for j in i + 1..n {
            acc.add(w.get(i, j) * (n - tree.lca_subtree_size(i, j)?) as f64);
        }
    }
    Ok(acc.value())
}
