//! Interchange moves and the subtree-weight table that prices them.
//!
//! For an edge `(x, y)` with `y = parent(x)`, let `A` and `B` be the children
//! of `x` and `C` the sibling of `x`. An interchange swaps `C` with one of `A`
//! or `B`. Every gain is a closed form in `|A|, |B|, |C|` and the pairwise
//! subtree weights, so with the table
//!
//! ```text
//! W[i][j] = sum of w(p, q) over p in leaves(T_i), q in leaves(T_j)
//! ```
//!
//! each candidate costs `O(1)`, a full scan `O(n)`, and applying a move only
//! rewrites row and column `x` (the one subtree whose leaf set changes).

use serde::Serialize;

use crate::error::{HcError, Result};
use crate::similarity::SimilarityMatrix;
use crate::tree::{HcTree, NodeId};
use crate::weight::{PairWeights, Weight};

/// Relative profitability threshold: a move must gain more than this times the
/// total pairwise weight.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

/// Which child of `x` trades places with `x`'s sibling `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Swap {
    /// `x = (A, B), y = (x, C)` becomes `x = (A, C), y = (x, B)`.
    BWithC,
    /// `x = (A, B), y = (x, C)` becomes `x = (C, B), y = (x, A)`.
    AWithC,
}

impl Swap {
    pub fn as_str(self) -> &'static str {
        match self {
            Swap::BWithC => "b_with_c",
            Swap::AWithC => "a_with_c",
        }
    }
}

/// A priced interchange together with the local shape it was priced on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InterchangeMove<T> {
    pub x: NodeId,
    pub y: NodeId,
    pub variant: Swap,
    /// Revenue change if applied.
    pub gain: T,
    a: NodeId,
    b: NodeId,
    c: NodeId,
}

impl<T> InterchangeMove<T> {
    /// `[A, B, C]` as seen when the move was generated.
    pub fn subtrees(&self) -> [NodeId; 3] {
        [self.a, self.b, self.c]
    }

    /// The child of `x` that moves up to `y`.
    pub fn outgoing(&self) -> NodeId {
        match self.variant {
            Swap::BWithC => self.b,
            Swap::AWithC => self.a,
        }
    }

    /// The child of `x` that stays.
    pub fn staying(&self) -> NodeId {
        match self.variant {
            Swap::BWithC => self.a,
            Swap::AWithC => self.b,
        }
    }
}

/// Dense `(2n-1) x (2n-1)` table of inter-subtree weights, indexed by node id.
///
/// Entries for nested subtrees are kept too (`W[i][i]` counts ordered pairs
/// inside `T_i`); the update rule needs them.
#[derive(Clone, Debug)]
pub struct WMatrix<T> {
    m: usize,
    data: Vec<T>,
    total: T,
}

impl<T: Weight> WMatrix<T> {
    /// Fills the table in order of node height so that every entry is one
    /// child-sum of entries already present: first the leaf rows, column by
    /// column, then each internal row as the sum of its children's rows.
    pub fn build<P: PairWeights<T>>(tree: &HcTree, w: &P) -> Result<Self> {
        if tree.n() != w.n() {
            return Err(HcError::SizeMismatch {
                tree: tree.n(),
                matrix: w.n(),
            });
        }
        let n = tree.n();
        let m = tree.node_count();
        let mut data = vec![T::default(); m * m];

        let heights = tree.heights();
        let mut internal: Vec<NodeId> = tree.internal_nodes().collect();
        internal.sort_by_key(|v| heights[v.index()]);
        let kids: Vec<(usize, usize, usize)> = internal
            .iter()
            .map(|&v| {
                let [l, r] = tree.children(v).expect("internal");
                (v.index(), l.index(), r.index())
            })
            .collect();

        for i in 0..n {
            let row = &mut data[i * m..(i + 1) * m];
            for (j, slot) in row.iter_mut().enumerate().take(n) {
                if j != i {
                    *slot = w.weight(i, j);
                }
            }
            for &(v, l, r) in &kids {
                row[v] = row[l] + row[r];
            }
        }
        // Child ids may exceed the parent's after interchanges, so sum into
        // a scratch row.
        let mut scratch = vec![T::default(); m];
        for &(v, l, r) in &kids {
            let (left, right) = (&data[l * m..(l + 1) * m], &data[r * m..(r + 1) * m]);
            for ((t, &a), &b) in scratch.iter_mut().zip(left).zip(right) {
                *t = a + b;
            }
            data[v * m..(v + 1) * m].copy_from_slice(&scratch);
        }
        Ok(WMatrix {
            m,
            data,
            total: w.total(),
        })
    }

    /// Side length `2n - 1`.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// `sum_{i<j} w(i, j)` of the underlying weights.
    pub fn total_weight(&self) -> T {
        self.total
    }

    #[inline]
    pub fn get(&self, i: NodeId, j: NodeId) -> T {
        self.data[i.index() * self.m + j.index()]
    }

    /// Revenue of `tree`, summed over merges from table entries.
    pub fn revenue(&self, tree: &HcTree) -> T {
        let n = tree.n();
        let mut acc = T::default();
        for v in tree.internal_nodes() {
            let [l, r] = tree.children(v).expect("internal");
            acc += T::from_count(n - tree.size(v)) * self.get(l, r);
        }
        acc
    }

    /// Largest entrywise deviation from `other`, relative to the largest
    /// magnitude in `other`.
    pub fn max_rel_deviation(&self, other: &WMatrix<T>) -> f64 {
        assert_eq!(self.m, other.m, "tables of different size");
        let scale = other
            .data
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.to_f64() - b.to_f64()).abs())
            .fold(0.0f64, f64::max)
            / scale
    }
}

#[inline]
fn price<T: Weight>(
    tree: &HcTree,
    table: &WMatrix<T>,
    x: NodeId,
) -> Option<[InterchangeMove<T>; 2]> {
    let y = tree.parent(x)?;
    let [a, b] = tree.children(x)?;
    let c = tree.sibling(x)?;
    let size = |v: NodeId| T::from_count(tree.size(v));
    let lost = size(c) * table.get(a, b);
    let mk = |variant, gain| InterchangeMove {
        x,
        y,
        variant,
        gain,
        a,
        b,
        c,
    };
    Some([
        mk(Swap::BWithC, size(b) * table.get(a, c) - lost),
        mk(Swap::AWithC, size(a) * table.get(b, c) - lost),
    ])
}

/// Every candidate interchange, two per internal non-root node, in increasing
/// `(x, variant)` order.
pub fn enumerate_moves<T: Weight>(tree: &HcTree, table: &WMatrix<T>) -> Vec<InterchangeMove<T>> {
    let mut out = Vec::with_capacity(2 * tree.n().saturating_sub(2));
    for x in tree.internal_nodes() {
        if let Some(pair) = price(tree, table, x) {
            out.extend(pair);
        }
    }
    out
}

/// Moves whose gain exceeds `tolerance * total_weight` (strictly positive for
/// exact weights).
pub fn profitable_moves<T: Weight>(
    tree: &HcTree,
    table: &WMatrix<T>,
    tolerance: f64,
) -> Vec<InterchangeMove<T>> {
    let threshold = T::profit_threshold(table.total, tolerance);
    let mut out = Vec::new();
    for x in tree.internal_nodes() {
        if let Some(pair) = price(tree, table, x) {
            out.extend(pair.into_iter().filter(|mv| mv.gain > threshold));
        }
    }
    out
}

/// The most profitable move, or `None` when the tree is locally optimal. Ties
/// go to the smallest `(x, variant)`.
pub fn best_move<T: Weight>(
    tree: &HcTree,
    table: &WMatrix<T>,
    tolerance: f64,
) -> Option<InterchangeMove<T>> {
    let threshold = T::profit_threshold(table.total, tolerance);
    let mut best: Option<InterchangeMove<T>> = None;
    for x in tree.internal_nodes() {
        if let Some(pair) = price(tree, table, x) {
            for mv in pair {
                if mv.gain > threshold && best.is_none_or(|b| mv.gain > b.gain) {
                    best = Some(mv);
                }
            }
        }
    }
    best
}

/// Applies `mv`, updating the tree links, the cached size of `x`, and row and
/// column `x` of the table. Returns the realized revenue change, recomputed
/// from the updated table.
pub fn apply_move<T: Weight>(
    tree: &mut HcTree,
    table: &mut WMatrix<T>,
    mv: &InterchangeMove<T>,
) -> Result<T> {
    let x = mv.x;
    let current = (tree.parent(x), tree.children(x), tree.sibling(x));
    if current != (Some(mv.y), Some([mv.a, mv.b]), Some(mv.c)) {
        return Err(HcError::StaleMove(x.index()));
    }
    let n = tree.n();
    let y = mv.y;
    let c = mv.c;
    let (stay, out) = (mv.staying(), mv.outgoing());
    let count = |v: usize| T::from_count(v);

    let before =
        count(n - tree.size(x)) * table.get(mv.a, mv.b) + count(n - tree.size(y)) * table.get(x, c);

    tree.interchange(x, out);

    let m = table.m;
    let (xi, ci, oi) = (x.index(), c.index(), out.index());
    // Row x first, contiguously; then mirror it into column x.
    let mut row: Vec<T> = table.data[xi * m..(xi + 1) * m].to_vec();
    let incoming = &table.data[ci * m..(ci + 1) * m];
    let leaving = &table.data[oi * m..(oi + 1) * m];
    for ((r, &add), &sub) in row.iter_mut().zip(incoming).zip(leaving) {
        *r += add - sub;
    }
    table.data[xi * m..(xi + 1) * m].copy_from_slice(&row);
    for (u, &v) in row.iter().enumerate() {
        table.data[u * m + xi] = v;
    }
    let inner = table.get(stay, stay) + table.get(c, c) + count(2) * table.get(stay, c);
    table.data[xi * m + xi] = inner;

    let after =
        count(n - tree.size(x)) * table.get(stay, c) + count(n - tree.size(y)) * table.get(x, out);
    let realized = after - before;
    debug_assert!(
        T::agrees(realized, mv.gain, table.total),
        "realized gain {realized:?} differs from predicted {:?}",
        mv.gain
    );
    Ok(realized)
}

/// Gains of every candidate move, kept current across applied moves.
///
/// An interchange at `x` changes the pricing of at most five nodes: `x`, its
/// parent, and the three subtrees whose sibling changed. Everything else is
/// reused, so a best-move query is one scan of a contiguous array. Queries
/// return exactly what [`best_move`] and [`profitable_moves`] return.
#[derive(Clone, Debug)]
pub struct MoveIndex<T> {
    gains: Vec<Option<[T; 2]>>,
}

impl<T: Weight> MoveIndex<T> {
    pub fn new(tree: &HcTree, table: &WMatrix<T>) -> Self {
        let gains = tree
            .node_ids()
            .map(|x| price(tree, table, x).map(|[p, q]| [p.gain, q.gain]))
            .collect();
        MoveIndex { gains }
    }

    fn refresh(&mut self, tree: &HcTree, table: &WMatrix<T>, x: NodeId) {
        self.gains[x.index()] = price(tree, table, x).map(|[p, q]| [p.gain, q.gain]);
    }

    /// [`apply_move`], then reprices the nodes it affected.
    pub fn apply(
        &mut self,
        tree: &mut HcTree,
        table: &mut WMatrix<T>,
        mv: &InterchangeMove<T>,
    ) -> Result<T> {
        let delta = apply_move(tree, table, mv)?;
        for v in [mv.x, mv.y, mv.staying(), mv.c, mv.outgoing()] {
            self.refresh(tree, table, v);
        }
        Ok(delta)
    }

    fn pick(tree: &HcTree, table: &WMatrix<T>, x: usize, variant: usize) -> InterchangeMove<T> {
        price(tree, table, NodeId::new(x)).expect("indexed node has moves")[variant]
    }

    /// Same result as [`best_move`].
    pub fn best(
        &self,
        tree: &HcTree,
        table: &WMatrix<T>,
        tolerance: f64,
    ) -> Option<InterchangeMove<T>> {
        let threshold = T::profit_threshold(table.total, tolerance);
        let mut best: Option<(T, usize, usize)> = None;
        for (x, pair) in self.gains.iter().enumerate() {
            let Some(pair) = pair else { continue };
            for (v, &g) in pair.iter().enumerate() {
                if g > threshold && best.is_none_or(|(bg, _, _)| g > bg) {
                    best = Some((g, x, v));
                }
            }
        }
        best.map(|(_, x, v)| Self::pick(tree, table, x, v))
    }

    /// Same result, in the same order, as [`profitable_moves`].
    pub fn profitable(
        &self,
        tree: &HcTree,
        table: &WMatrix<T>,
        tolerance: f64,
    ) -> Vec<InterchangeMove<T>> {
        let threshold = T::profit_threshold(table.total, tolerance);
        let mut out = Vec::new();
        for (x, pair) in self.gains.iter().enumerate() {
            let Some(pair) = pair else { continue };
            for (v, &g) in pair.iter().enumerate() {
                if g > threshold {
                    out.push(Self::pick(tree, table, x, v));
                }
            }
        }
        out
    }
}

/// One violated local-optimality inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub x: NodeId,
    pub y: NodeId,
    pub variant: Swap,
    /// Amount by which the interchange would raise the revenue.
    pub slack: f64,
}

/// Result of checking every interchange of a tree.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub locally_optimal: bool,
    pub edges_checked: usize,
    pub violations: Vec<Violation>,
}

/// Checks both inequalities `|C| w(A,B) >= |B| w(A,C)` and
/// `|C| w(A,B) >= |A| w(B,C)` at every edge below the root.
pub fn certify<T: Weight>(tree: &HcTree, table: &WMatrix<T>, tolerance: f64) -> Certificate {
    let violations: Vec<Violation> = profitable_moves(tree, table, tolerance)
        .into_iter()
        .map(|mv| Violation {
            x: mv.x,
            y: mv.y,
            variant: mv.variant,
            slack: mv.gain.to_f64(),
        })
        .collect();
    Certificate {
        locally_optimal: violations.is_empty(),
        edges_checked: tree.n().saturating_sub(2),
        violations,
    }
}

pub fn certify_local_optimality(tree: &HcTree, w: &SimilarityMatrix) -> Result<Certificate> {
    let table = WMatrix::build(tree, w)?;
    Ok(certify(tree, &table, DEFAULT_TOLERANCE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::revenue;

    fn i4() -> SimilarityMatrix {
        SimilarityMatrix::from_fn(4, |i, j| {
            if (i, j) == (0, 1) || (i, j) == (2, 3) {
                3.0
            } else {
                1.0
            }
        })
        .unwrap()
    }

    fn t(s: &str) -> HcTree {
        HcTree::parse(s).unwrap()
    }

    fn node_over(tree: &HcTree, leaves: &[usize]) -> NodeId {
        tree.node_ids()
            .find(|&v| {
                let mut l = tree.leaves_under(v);
                l.sort_unstable();
                l == leaves
            })
            .unwrap()
    }

    /// Direct definition: sum of w over the two leaf sets.
    fn naive_entry(tree: &HcTree, w: &SimilarityMatrix, i: NodeId, j: NodeId) -> f64 {
        let mut s = 0.0;
        for p in tree.leaves_under(i) {
            for q in tree.leaves_under(j) {
                if p != q {
                    s += w.get(p, q);
                }
            }
        }
        s
    }

    #[test]
    fn build_matches_definition() {
        let w = SimilarityMatrix::from_fn(7, |i, j| (i * 3 + j) as f64 * 0.25).unwrap();
        for seed in 0..10 {
            let tree = HcTree::random(7, seed).unwrap();
            let table = WMatrix::build(&tree, &w).unwrap();
            for i in tree.node_ids() {
                for j in tree.node_ids() {
                    let want = naive_entry(&tree, &w, i, j);
                    assert!((table.get(i, j) - want).abs() < 1e-12, "({i},{j})");
                }
            }
        }
    }

    #[test]
    fn i4_entries() {
        let w = i4();
        let tree = t("((1,2),(3,4));");
        let table = WMatrix::build(&tree, &w).unwrap();
        let p = node_over(&tree, &[0, 1]);
        let q = node_over(&tree, &[2, 3]);
        assert_eq!(table.get(p, q), 4.0);
        assert_eq!(table.get(tree.leaf(0), tree.leaf(1)), 3.0);
        // root against a leaf: all its similarities
        assert_eq!(table.get(tree.root(), tree.leaf(2)), 1.0 + 1.0 + 3.0);
        assert_eq!(table.revenue(&tree), 12.0);
    }

    #[test]
    fn move_counts() {
        let w = SimilarityMatrix::constant(2, 1.0).unwrap();
        let tree = t("(1,2);");
        assert!(enumerate_moves(&tree, &WMatrix::build(&tree, &w).unwrap()).is_empty());

        let w = SimilarityMatrix::constant(3, 1.0).unwrap();
        let tree = t("((1,2),3);");
        assert_eq!(
            enumerate_moves(&tree, &WMatrix::build(&tree, &w).unwrap()).len(),
            2
        );
    }

    #[test]
    fn i4_bad_tree_has_four_gain_two_moves() {
        let w = i4();
        let tree = t("((1,3),(2,4));");
        let table = WMatrix::build(&tree, &w).unwrap();
        let moves = enumerate_moves(&tree, &table);
        assert_eq!(moves.len(), 4);
        assert!(moves.iter().all(|m| m.gain == 2.0));

        let best = best_move(&tree, &table, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(best.gain, 2.0);
        let lowest = tree
            .internal_nodes()
            .find(|&v| tree.parent(v).is_some())
            .unwrap();
        assert_eq!((best.x, best.variant), (lowest, Swap::BWithC));

        let cert = certify_local_optimality(&tree, &w).unwrap();
        assert!(!cert.locally_optimal);
        assert_eq!(cert.violations.len(), 4);
    }

    #[test]
    fn i4_optimum_is_certified() {
        let w = i4();
        let tree = t("((1,2),(3,4));");
        let table = WMatrix::build(&tree, &w).unwrap();
        assert!(best_move(&tree, &table, DEFAULT_TOLERANCE).is_none());
        let cert = certify_local_optimality(&tree, &w).unwrap();
        assert!(cert.locally_optimal);
        assert_eq!(cert.edges_checked, 2);
    }

    #[test]
    fn apply_gain_two_then_revert() {
        let w = i4();
        let mut tree = t("((1,3),(2,4));");
        let original = tree.to_canonical();
        let mut table = WMatrix::build(&tree, &w).unwrap();
        let mv = best_move(&tree, &table, DEFAULT_TOLERANCE).unwrap();
        let delta = apply_move(&mut tree, &mut table, &mv).unwrap();
        assert_eq!(delta, 2.0);
        assert_eq!(revenue(&tree, &w).unwrap(), 6.0);
        assert_eq!(
            table.max_rel_deviation(&WMatrix::build(&tree, &w).unwrap()),
            0.0
        );

        // The outgoing subtree is now x's sibling; swapping it back undoes the move.
        let inverse = enumerate_moves(&tree, &table)
            .into_iter()
            .find(|m| m.x == mv.x && m.outgoing() == mv.subtrees()[2])
            .unwrap();
        assert_eq!(inverse.gain, -2.0);
        apply_move(&mut tree, &mut table, &inverse).unwrap();
        assert_eq!(tree.to_canonical(), original);
    }

    #[test]
    fn stale_moves_are_rejected() {
        let w = i4();
        let mut tree = t("((1,3),(2,4));");
        let mut table = WMatrix::build(&tree, &w).unwrap();
        let moves = enumerate_moves(&tree, &table);
        apply_move(&mut tree, &mut table, &moves[0]).unwrap();
        assert!(matches!(
            apply_move(&mut tree, &mut table, &moves[0]),
            Err(HcError::StaleMove(_))
        ));
    }

    #[test]
    fn unit_weights_have_no_profitable_move() {
        let w = SimilarityMatrix::constant(12, 1.0).unwrap();
        for seed in 0..20 {
            let tree = HcTree::random(12, seed).unwrap();
            let table = WMatrix::build(&tree, &w).unwrap();
            assert!(best_move(&tree, &table, DEFAULT_TOLERANCE).is_none());
            assert!(certify(&tree, &table, DEFAULT_TOLERANCE).locally_optimal);
        }
    }

    #[test]
    fn zero_weights_certify() {
        let w = SimilarityMatrix::constant(6, 0.0).unwrap();
        let tree = HcTree::random(6, 3).unwrap();
        assert!(certify_local_optimality(&tree, &w).unwrap().locally_optimal);
    }

    #[test]
    fn size_mismatch() {
        let w = SimilarityMatrix::constant(5, 1.0).unwrap();
        assert!(WMatrix::<f64>::build(&t("((1,2),3);"), &w).is_err());
    }

    #[test]
    fn move_index_tracks_scans() {
        let w =
            SimilarityMatrix::from_fn(23, |i, j| ((i * 13 + j * 7) % 11) as f64 + 0.25).unwrap();
        let mut tree = HcTree::random(23, 8).unwrap();
        let mut table = WMatrix::build(&tree, &w).unwrap();
        let mut index = MoveIndex::new(&tree, &table);
        let mut steps = 0;
        loop {
            let all = profitable_moves(&tree, &table, DEFAULT_TOLERANCE);
            assert_eq!(index.profitable(&tree, &table, DEFAULT_TOLERANCE), all);
            let best = best_move(&tree, &table, DEFAULT_TOLERANCE);
            assert_eq!(index.best(&tree, &table, DEFAULT_TOLERANCE), best);
            // Alternate between the best and the last profitable move.
            let Some(mv) = (if steps % 2 == 0 {
                best
            } else {
                all.last().copied()
            }) else {
                break;
            };
            index.apply(&mut tree, &mut table, &mv).unwrap();
            steps += 1;
        }
        assert!(steps > 5);
        assert_eq!(MoveIndex::new(&tree, &table).gains, index.gains);
    }
}
