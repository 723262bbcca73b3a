//! Arena-backed hierarchical clustering trees.
//!
//! An [`HcTree`] on `n` points is a full binary tree with `2n - 1` nodes. Leaf
//! node ids coincide with the 0-based point index (`NodeId(i)` is the leaf for
//! point `i`), internal nodes occupy ids `n..2n-1`. Children are unordered: the
//! arena keeps them in some slot order, but every comparison and every text
//! rendering goes through the canonical form where the child holding the
//! smaller minimum leaf label comes first.
//!
//! The text format uses 1-based labels, e.g. `((1,2),(3,4));`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{HcError, Result};

/// Stable identifier of a node in an [`HcTree`] arena.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    pub(crate) fn new(index: usize) -> Self {
        NodeId(index as u32)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug)]
struct Node {
    parent: Option<NodeId>,
    children: Option<[NodeId; 2]>,
    size: usize,
}

/// A full binary tree whose leaves are the points `0..n`.
#[derive(Clone, Debug)]
pub struct HcTree {
    nodes: Vec<Node>,
    root: NodeId,
    n: usize,
}

impl HcTree {
    /// Builds a tree from an agglomeration sequence.
    ///
    /// Cluster ids follow the usual linkage-matrix convention: `0..n` are the
    /// singletons and the `k`-th merge creates cluster `n + k`. Every id must be
    /// consumed exactly once, except the final cluster which becomes the root.
    pub fn from_merges(n: usize, merges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(HcError::invalid(format!(
                "a tree needs at least 2 leaves, got {n}"
            )));
        }
        if merges.len() != n - 1 {
            return Err(HcError::MalformedMerges(format!(
                "expected {} merges for {n} leaves, got {}",
                n - 1,
                merges.len()
            )));
        }
        let m = 2 * n - 1;
        let mut nodes: Vec<Node> = (0..m)
            .map(|i| Node {
                parent: None,
                children: None,
                size: usize::from(i < n),
            })
            .collect();
        for (k, &(a, b)) in merges.iter().enumerate() {
            let id = n + k;
            for c in [a, b] {
                if c >= id {
                    return Err(HcError::MalformedMerges(format!(
                        "merge {k} references cluster {c} before it exists"
                    )));
                }
                if nodes[c].parent.is_some() {
                    return Err(HcError::MalformedMerges(format!(
                        "cluster {c} is merged more than once"
                    )));
                }
            }
            if a == b {
                return Err(HcError::MalformedMerges(format!(
                    "merge {k} joins cluster {a} with itself"
                )));
            }
            nodes[a].parent = Some(NodeId::new(id));
            nodes[b].parent = Some(NodeId::new(id));
            nodes[id].children = Some([NodeId::new(a), NodeId::new(b)]);
            nodes[id].size = nodes[a].size + nodes[b].size;
        }
        Ok(HcTree {
            nodes,
            root: NodeId::new(m - 1),
            n,
        })
    }

    /// Random agglomeration: repeatedly merges a uniformly chosen pair of the
    /// current cluster roots. Deterministic in `seed`.
    ///
    /// This is not the uniform distribution over tree shapes.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(n, &mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n < 2 {
            return Err(HcError::invalid(format!(
                "a random tree needs at least 2 leaves, got {n}"
            )));
        }
        let mut roots: Vec<usize> = (0..n).collect();
        let mut merges = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let i = rng.random_range(0..roots.len());
            let mut j = rng.random_range(0..roots.len() - 1);
            if j >= i {
                j += 1;
            }
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            let b = roots.swap_remove(hi);
            let a = roots.swap_remove(lo);
            merges.push((a, b));
            roots.push(n + k);
        }
        Self::from_merges(n, &merges)
    }

    /// Number of leaves.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, always `2n - 1`.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn root(&self) -> NodeId {
        self.root
    }

    #[inline]
    pub fn leaf(&self, label: usize) -> NodeId {
        debug_assert!(label < self.n);
        NodeId::new(label)
    }

    #[inline]
    pub fn is_leaf(&self, id: NodeId) -> bool {
        id.index() < self.n
    }

    /// The 0-based point label of a leaf, `None` for internal nodes.
    #[inline]
    pub fn label(&self, id: NodeId) -> Option<usize> {
        self.is_leaf(id).then_some(id.index())
    }

    #[inline]
    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.index()].parent
    }

    #[inline]
    pub fn children(&self, id: NodeId) -> Option<[NodeId; 2]> {
        self.nodes[id.index()].children
    }

    /// Cached number of leaves below `id`.
    #[inline]
    pub fn size(&self, id: NodeId) -> usize {
        self.nodes[id.index()].size
    }

    /// The other child of `id`'s parent.
    pub fn sibling(&self, id: NodeId) -> Option<NodeId> {
        let p = self.parent(id)?;
        let [l, r] = self.children(p)?;
        Some(if l == id { r } else { l })
    }

    /// All node ids.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId::new)
    }

    /// Internal node ids in increasing order.
    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (self.n..self.nodes.len()).map(NodeId::new)
    }

    /// Nodes in post-order (children before parents), starting from the root.
    pub fn postorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            match self.children(id) {
                Some([l, r]) if !expanded => {
                    stack.push((id, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                _ => out.push(id),
            }
        }
        out
    }

    /// Height of every node (leaves have height 0), indexed by node id.
    pub fn heights(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.nodes.len()];
        for id in self.postorder() {
            if let Some([l, r]) = self.children(id) {
                h[id.index()] = 1 + h[l.index()].max(h[r.index()]);
            }
        }
        h
    }

    /// 0-based labels of the leaves under `id`.
    pub fn leaves_under(&self, id: NodeId) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size(id));
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            match self.children(v) {
                Some([l, r]) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(v.index()),
            }
        }
        out
    }

    fn depth(&self, mut id: NodeId) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent(id) {
            id = p;
            d += 1;
        }
        d
    }

    /// Lowest common ancestor of two nodes.
    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        let (mut da, mut db) = (self.depth(a), self.depth(b));
        while da > db {
            a = self.parent(a).expect("depth > 0 implies a parent");
            da -= 1;
        }
        while db > da {
            b = self.parent(b).expect("depth > 0 implies a parent");
            db -= 1;
        }
        while a != b {
            a = self.parent(a).expect("distinct nodes below the root");
            b = self.parent(b).expect("distinct nodes below the root");
        }
        a
    }

    /// `|T_{i,j}|`: the number of leaves under the LCA of points `i` and `j`
    /// (0-based labels).
    pub fn lca_subtree_size(&self, i: usize, j: usize) -> Result<usize> {
        if i >= self.n || j >= self.n {
            return Err(HcError::invalid(format!(
                "leaf label out of range for a tree on {} leaves",
                self.n
            )));
        }
        if i == j {
            return Err(HcError::invalid(
                "lca_subtree_size needs two distinct leaves",
            ));
        }
        Ok(self.size(self.lca(self.leaf(i), self.leaf(j))))
    }

    /// Checks every structural invariant: full binary shape, `2n - 1` nodes,
    /// consistent parent/child links, a single root, cached sizes.
    pub fn validate(&self) -> Result<()> {
        let m = self.nodes.len();
        if m != 2 * self.n - 1 {
            return Err(HcError::Invariant(format!(
                "{m} nodes for {} leaves",
                self.n
            )));
        }
        if self.parent(self.root).is_some() {
            return Err(HcError::Invariant("root has a parent".into()));
        }
        for id in self.node_ids() {
            let node = &self.nodes[id.index()];
            match (self.is_leaf(id), node.children) {
                (true, Some(_)) => {
                    return Err(HcError::Invariant(format!("leaf {id} has children")))
                }
                (false, None) => {
                    return Err(HcError::Invariant(format!(
                        "internal node {id} has no children"
                    )))
                }
                (false, Some([l, r])) => {
                    if l == r {
                        return Err(HcError::Invariant(format!(
                            "node {id} has a repeated child"
                        )));
                    }
                    for c in [l, r] {
                        if self.parent(c) != Some(id) {
                            return Err(HcError::Invariant(format!(
                                "child {c} does not point back to {id}"
                            )));
                        }
                    }
                }
                (true, None) => {}
            }
            if id != self.root && node.parent.is_none() {
                return Err(HcError::Invariant(format!("node {id} is detached")));
            }
        }
        let order = self.postorder();
        if order.len() != m {
            return Err(HcError::Invariant(format!(
                "{} of {m} nodes reachable from the root",
                order.len()
            )));
        }
        let mut counts = vec![0usize; m];
        for id in order {
            counts[id.index()] = match self.children(id) {
                Some([l, r]) => counts[l.index()] + counts[r.index()],
                None => 1,
            };
            if counts[id.index()] != self.size(id) {
                return Err(HcError::Invariant(format!(
                    "cached size {} at node {id}, recomputed {}",
                    self.size(id),
                    counts[id.index()]
                )));
            }
        }
        Ok(())
    }

    /// Canonical text: children ordered by their minimum leaf label, 1-based
    /// labels, terminated by `;`. Two trees are equal as unordered trees iff
    /// their canonical texts are equal.
    pub fn to_canonical(&self) -> String {
        let mut min_label = vec![usize::MAX; self.nodes.len()];
        for id in self.postorder() {
            min_label[id.index()] = match self.children(id) {
                Some([l, r]) => min_label[l.index()].min(min_label[r.index()]),
                None => id.index(),
            };
        }
        enum Tok {
            Node(NodeId),
            Text(&'static str),
        }
        let mut out = String::with_capacity(self.n * 6);
        let mut stack = vec![Tok::Node(self.root)];
        while let Some(tok) = stack.pop() {
            match tok {
                Tok::Text(s) => out.push_str(s),
                Tok::Node(id) => match self.children(id) {
                    None => out.push_str(&(id.index() + 1).to_string()),
                    Some([l, r]) => {
                        let (first, second) = if min_label[l.index()] < min_label[r.index()] {
                            (l, r)
                        } else {
                            (r, l)
                        };
                        out.push('(');
                        stack.push(Tok::Text(")"));
                        stack.push(Tok::Node(second));
                        stack.push(Tok::Text(","));
                        stack.push(Tok::Node(first));
                    }
                },
            }
        }
        out.push(';');
        out
    }

    /// Same unordered tree.
    pub fn same_topology(&self, other: &HcTree) -> bool {
        self.n == other.n && self.to_canonical() == other.to_canonical()
    }

    /// Parses parenthesized tree text. Whitespace (including newlines) is
    /// ignored; child order is irrelevant; labels must be exactly `1..=n`.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Clone, Copy)]
        enum Ref {
            Leaf(usize),
            Merge(usize),
        }
        let bytes = text.as_bytes();
        let syntax = |offset: usize, message: &str| HcError::Syntax {
            offset,
            message: message.to_string(),
        };

        let mut frames: Vec<Vec<Ref>> = Vec::new();
        let mut merges: Vec<(Ref, Ref)> = Vec::new();
        let mut labels: Vec<usize> = Vec::new();
        let mut finished: Option<Ref> = None;
        let mut expect_node = true;
        let mut pos = 0;
        let mut terminated = false;

        while pos < bytes.len() {
            let ch = bytes[pos];
            if ch.is_ascii_whitespace() {
                pos += 1;
                continue;
            }
            if terminated {
                return Err(syntax(pos, "unexpected text after ';'"));
            }
            if expect_node {
                match ch {
                    b'(' => {
                        frames.push(Vec::with_capacity(2));
                        pos += 1;
                    }
                    b'0'..=b'9' => {
                        let start = pos;
                        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                            pos += 1;
                        }
                        let label: usize = text[start..pos]
                            .parse()
                            .map_err(|_| syntax(start, "leaf label does not fit in an integer"))?;
                        if label == 0 {
                            return Err(syntax(start, "leaf labels start at 1"));
                        }
                        labels.push(label);
                        let leaf = Ref::Leaf(label);
                        match frames.last_mut() {
                            Some(frame) => frame.push(leaf),
                            None => finished = Some(leaf),
                        }
                        expect_node = false;
                    }
                    _ => return Err(syntax(pos, "expected '(' or a leaf label")),
                }
                continue;
            }
            match ch {
                b',' => {
                    match frames.last() {
                        Some(frame) if frame.len() == 1 => {}
                        Some(_) => return Err(syntax(pos, "node has more than two children")),
                        None => return Err(syntax(pos, "',' outside parentheses")),
                    }
                    expect_node = true;
                    pos += 1;
                }
                b')' => {
                    let frame = frames.pop().ok_or_else(|| syntax(pos, "unbalanced ')'"))?;
                    if frame.len() != 2 {
                        return Err(syntax(pos, "internal node must have exactly two children"));
                    }
                    let node = Ref::Merge(merges.len());
                    merges.push((frame[0], frame[1]));
                    match frames.last_mut() {
                        Some(parent) => parent.push(node),
                        None => finished = Some(node),
                    }
                    pos += 1;
                }
                b';' => {
                    if !frames.is_empty() {
                        return Err(syntax(pos, "';' before all parentheses are closed"));
                    }
                    terminated = true;
                    pos += 1;
                }
                _ => return Err(syntax(pos, "expected ',', ')' or ';'")),
            }
        }
        if !terminated {
            return Err(syntax(bytes.len(), "missing terminating ';'"));
        }
        if finished.is_none() {
            return Err(syntax(0, "empty tree"));
        }

        let n = labels.len();
        if n < 2 {
            return Err(HcError::invalid("a tree needs at least 2 leaves"));
        }
        let mut seen = vec![false; n + 1];
        for &label in &labels {
            if label > n {
                return Err(HcError::Labels(format!(
                    "label {label} is out of range for {n} leaves"
                )));
            }
            if seen[label] {
                return Err(HcError::Labels(format!("duplicate leaf label {label}")));
            }
            seen[label] = true;
        }
        let id = |r: Ref| match r {
            Ref::Leaf(label) => label - 1,
            Ref::Merge(k) => n + k,
        };
        let merges: Vec<(usize, usize)> = merges.iter().map(|&(a, b)| (id(a), id(b))).collect();
        Self::from_merges(n, &merges)
    }

    /// Performs the interchange at edge `(x, parent(x))`: `outgoing` (one of
    /// `x`'s children) trades places with `x`'s sibling. Returns the sibling
    /// that moved under `x`. Only links and `x`'s cached size change.
    pub(crate) fn interchange(&mut self, x: NodeId, outgoing: NodeId) -> NodeId {
        let y = self.parent(x).expect("interchange edge needs a parent");
        let incoming = self.sibling(x).expect("interchange edge needs a sibling");
        let xi = x.index();
        let yi = y.index();
        let xc = self.nodes[xi].children.as_mut().expect("x is internal");
        let slot = xc
            .iter()
            .position(|&c| c == outgoing)
            .expect("outgoing is a child of x");
        xc[slot] = incoming;
        let yc = self.nodes[yi].children.as_mut().expect("y is internal");
        let slot = yc
            .iter()
            .position(|&c| c == incoming)
            .expect("incoming is a child of y");
        yc[slot] = outgoing;
        self.nodes[incoming.index()].parent = Some(x);
        self.nodes[outgoing.index()].parent = Some(y);
        self.nodes[xi].size = self.nodes[xi].size - self.nodes[outgoing.index()].size
            + self.nodes[incoming.index()].size;
        incoming
    }
}

impl fmt::Display for HcTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical())
    }
}

impl FromStr for HcTree {
    type Err = HcError;

    fn from_str(s: &str) -> Result<Self> {
        HcTree::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> HcTree {
        HcTree::parse(s).unwrap()
    }

    #[test]
    fn merges_build_expected_shapes() {
        let two = HcTree::from_merges(2, &[(0, 1)]).unwrap();
        assert_eq!(two.to_canonical(), "(1,2);");

        let balanced = HcTree::from_merges(4, &[(0, 1), (2, 3), (4, 5)]).unwrap();
        assert_eq!(balanced.to_canonical(), "((1,2),(3,4));");
        balanced.validate().unwrap();

        let cat = HcTree::from_merges(3, &[(0, 1), (3, 2)]).unwrap();
        assert_eq!(cat.to_canonical(), "((1,2),3);");
    }

    #[test]
    fn malformed_merges_are_rejected() {
        assert!(matches!(
            HcTree::from_merges(3, &[(0, 1), (0, 2)]),
            Err(HcError::MalformedMerges(_))
        ));
        assert!(matches!(
            HcTree::from_merges(3, &[(0, 1)]),
            Err(HcError::MalformedMerges(_))
        ));
        assert!(matches!(
            HcTree::from_merges(3, &[(0, 4), (1, 2)]),
            Err(HcError::MalformedMerges(_))
        ));
        assert!(matches!(
            HcTree::from_merges(2, &[(1, 1)]),
            Err(HcError::MalformedMerges(_))
        ));
        assert!(matches!(
            HcTree::from_merges(1, &[]),
            Err(HcError::InvalidArgument(_))
        ));
    }

    #[test]
    fn canonical_text_ignores_child_order() {
        assert_eq!(t("((4,3),(2,1));").to_canonical(), "((1,2),(3,4));");
        assert_eq!(t("((2,1),(4,3));").to_canonical(), "((1,2),(3,4));");
        assert_eq!(t("(3,((4,2),1));").to_canonical(), "((1,(2,4)),3);");
        assert!(t("((2,1),(4,3));").same_topology(&t("((3,4),(1,2));")));
    }

    #[test]
    fn parse_accepts_whitespace_and_newlines() {
        let tree = t(" ( (1 ,2),\n(3,4) ) ;\n");
        assert_eq!(tree.to_canonical(), "((1,2),(3,4));");
    }

    #[test]
    fn parse_rejects_bad_labels() {
        assert!(matches!(
            HcTree::parse("((1,1),2);"),
            Err(HcError::Labels(_))
        ));
        assert!(matches!(
            HcTree::parse("((1,5),2);"),
            Err(HcError::Labels(_))
        ));
        assert!(matches!(
            HcTree::parse("(0,1);"),
            Err(HcError::Syntax { .. })
        ));
    }

    #[test]
    fn parse_reports_offsets() {
        match HcTree::parse("((1,2),(3,4))") {
            Err(HcError::Syntax { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("unexpected {other:?}"),
        }
        match HcTree::parse("((1,2,3),4);") {
            Err(HcError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        match HcTree::parse("((1,2),x);") {
            Err(HcError::Syntax { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            HcTree::parse("(1,2);(3"),
            Err(HcError::Syntax { .. })
        ));
        assert!(matches!(
            HcTree::parse("((1,2);"),
            Err(HcError::Syntax { .. })
        ));
        assert!(matches!(HcTree::parse("(1);"), Err(HcError::Syntax { .. })));
        assert!(matches!(HcTree::parse(""), Err(HcError::Syntax { .. })));
        assert!(HcTree::parse("1;").is_err());
    }

    #[test]
    fn lca_sizes() {
        let balanced = t("((1,2),(3,4));");
        assert_eq!(balanced.lca_subtree_size(0, 1).unwrap(), 2);
        assert_eq!(balanced.lca_subtree_size(0, 2).unwrap(), 4);
        let cat = t("((1,(2,4)),3);");
        assert_eq!(cat.lca_subtree_size(1, 3).unwrap(), 2);
        assert_eq!(cat.lca_subtree_size(0, 3).unwrap(), 3);
        assert_eq!(cat.lca_subtree_size(3, 2).unwrap(), 4);
        assert!(cat.lca_subtree_size(0, 4).is_err());
        assert!(cat.lca_subtree_size(1, 1).is_err());
    }

    #[test]
    fn random_trees_are_valid_and_reproducible() {
        for n in [2usize, 3, 7, 50, 200] {
            for seed in 0..100 {
                let tree = HcTree::random(n, seed).unwrap();
                tree.validate().unwrap();
                assert_eq!(tree.node_count(), 2 * n - 1);
            }
        }
        assert_eq!(HcTree::random(2, 99).unwrap().to_canonical(), "(1,2);");
        let a = HcTree::random(4, 7).unwrap().to_canonical();
        let b = HcTree::random(4, 7).unwrap().to_canonical();
        assert_eq!(a, b);
        assert!(HcTree::random(1, 0).is_err());
    }

    #[test]
    fn interchange_relinks_and_updates_size() {
        // x = (1,3), sibling (2,4)
        let mut tree = t("((1,3),(2,4));");
        let root = tree.root();
        let [x, _] = tree.children(root).unwrap();
        let x = if tree.leaves_under(x).contains(&0) {
            x
        } else {
            tree.sibling(x).unwrap()
        };
        let three = tree.leaf(2);
        tree.interchange(x, three);
        tree.validate().unwrap();
        assert_eq!(tree.to_canonical(), "((1,(2,4)),3);");
        assert_eq!(tree.size(x), 3);
    }

    #[test]
    fn heights_and_postorder() {
        let tree = t("(((1,2),3),4);");
        let h = tree.heights();
        assert_eq!(h[tree.root().index()], 3);
        let order = tree.postorder();
        assert_eq!(order.len(), 7);
        assert_eq!(*order.last().unwrap(), tree.root());
    }
}
