//! Brute-force ground truth for small trees.
//!
//! Everything here works on [`Shape`], a plain recursive tree that shares no
//! code with the arena representation or the interchange engine: its own
//! canonical text, its own neighbor generation, its own revenue sum. That keeps
//! it usable as an independent check of those modules.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use crate::error::{HcError, Result};
use crate::similarity::SimilarityMatrix;
use crate::tree::HcTree;

/// Largest leaf count [`enumerate_trees`] accepts: 135135 trees.
pub const MAX_ENUMERATION_LEAVES: usize = 8;
/// Largest leaf count for exact interchange distances.
pub const MAX_DISTANCE_LEAVES: usize = 6;

/// A recursive binary tree over 0-based leaf labels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Leaf(usize),
    Join(Box<Shape>, Box<Shape>),
}

fn join(a: Shape, b: Shape) -> Shape {
    Shape::Join(Box::new(a), Box::new(b))
}

impl Shape {
    pub fn from_tree(tree: &HcTree) -> Shape {
        let mut built: Vec<Option<Shape>> = vec![None; tree.node_count()];
        for id in tree.postorder() {
            let shape = match tree.children(id) {
                None => Shape::Leaf(id.index()),
                Some([l, r]) => join(
                    built[l.index()].take().expect("child built first"),
                    built[r.index()].take().expect("child built first"),
                ),
            };
            built[id.index()] = Some(shape);
        }
        built[tree.root().index()].take().expect("root built")
    }

    pub fn to_tree(&self) -> Result<HcTree> {
        HcTree::parse(&self.canonical())
    }

    pub fn leaves(&self) -> Vec<usize> {
        match self {
            Shape::Leaf(l) => vec![*l],
            Shape::Join(a, b) => {
                let mut v = a.leaves();
                v.extend(b.leaves());
                v
            }
        }
    }

    fn min_leaf(&self) -> usize {
        match self {
            Shape::Leaf(l) => *l,
            Shape::Join(a, b) => a.min_leaf().min(b.min_leaf()),
        }
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            Shape::Leaf(l) => out.push_str(&(l + 1).to_string()),
            Shape::Join(a, b) => {
                let (first, second) = if a.min_leaf() < b.min_leaf() {
                    (a, b)
                } else {
                    (b, a)
                };
                out.push('(');
                first.write_canonical(out);
                out.push(',');
                second.write_canonical(out);
                out.push(')');
            }
        }
    }

    /// Canonical text in the same format as [`HcTree::to_canonical`].
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.write_canonical(&mut s);
        s.push(';');
        s
    }

    /// Revenue from the pair definition: every pair split at a join is
    /// charged `n - |join|`.
    pub fn revenue(&self, w: &SimilarityMatrix) -> f64 {
        let n = w.n();
        let mut total = 0.0;
        let mut stack = vec![self];
        while let Some(s) = stack.pop() {
            if let Shape::Join(a, b) = s {
                let (la, lb) = (a.leaves(), b.leaves());
                let size = la.len() + lb.len();
                for &i in &la {
                    for &j in &lb {
                        total += (n - size) as f64 * w.get(i, j);
                    }
                }
                stack.push(a);
                stack.push(b);
            }
        }
        total
    }

    /// Every tree one interchange away (duplicates possible only for
    /// symmetric inputs, which labeled trees never produce).
    pub fn neighbors(&self) -> Vec<Shape> {
        let Shape::Join(l, r) = self else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (x, c) in [(l, r), (r, l)] {
            if let Shape::Join(a, b) = x.as_ref() {
                let (a, b, c) = (a.as_ref().clone(), b.as_ref().clone(), c.as_ref().clone());
                out.push(join(join(a.clone(), c.clone()), b.clone()));
                out.push(join(join(c, b), a));
            }
        }
        for nl in l.neighbors() {
            out.push(join(nl, r.as_ref().clone()));
        }
        for nr in r.neighbors() {
            out.push(join(l.as_ref().clone(), nr));
        }
        out
    }
}

fn insertions(s: &Shape, leaf: usize) -> Vec<Shape> {
    let mut out = vec![join(s.clone(), Shape::Leaf(leaf))];
    if let Shape::Join(l, r) = s {
        for li in insertions(l, leaf) {
            out.push(join(li, r.as_ref().clone()));
        }
        for ri in insertions(r, leaf) {
            out.push(join(l.as_ref().clone(), ri));
        }
    }
    out
}

/// All distinct trees on `n` leaves.
#[derive(Clone, Debug)]
pub struct TreeSpace {
    pub n: usize,
    pub shapes: Vec<Shape>,
    /// Canonical texts, parallel to `shapes`.
    pub trees: Vec<String>,
}

impl TreeSpace {
    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn index_of(&self) -> HashMap<&str, usize> {
        self.trees
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect()
    }
}

/// `(2n - 3)!!`
pub fn tree_count(n: usize) -> u64 {
    (1..n.max(1)).map(|k| (2 * k - 1) as u64).product()
}

/// Enumerates every tree on `n` leaves by inserting leaf `k + 1` on each of
/// the `2k - 1` edges (including above the root) of every tree on `k` leaves.
pub fn enumerate_trees(n: usize) -> Result<TreeSpace> {
    if !(2..=MAX_ENUMERATION_LEAVES).contains(&n) {
        return Err(HcError::invalid(format!(
            "tree enumeration supports 2..={MAX_ENUMERATION_LEAVES} leaves, got {n}"
        )));
    }
    let mut shapes = vec![join(Shape::Leaf(0), Shape::Leaf(1))];
    for leaf in 2..n {
        shapes = shapes.iter().flat_map(|s| insertions(s, leaf)).collect();
    }
    let trees = shapes.iter().map(Shape::canonical).collect();
    Ok(TreeSpace { n, shapes, trees })
}

/// Revenue-maximizing tree by exhaustive search; ties go to the smallest
/// canonical text.
pub fn exact_optimum(w: &SimilarityMatrix) -> Result<(HcTree, f64)> {
    let space = enumerate_trees(w.n())?;
    let mut best: Option<(f64, &str)> = None;
    for (shape, text) in space.shapes.iter().zip(&space.trees) {
        let r = shape.revenue(w);
        best = match best {
            Some((br, bt)) if br > r || (br == r && bt <= text.as_str()) => Some((br, bt)),
            _ => Some((r, text)),
        };
    }
    let (r, text) = best.expect("nonempty space");
    Ok((HcTree::parse(text)?, r))
}

/// Canonical texts of all trees one interchange from `tree`.
pub fn neighbor_set(tree: &HcTree) -> BTreeSet<String> {
    Shape::from_tree(tree)
        .neighbors()
        .iter()
        .map(Shape::canonical)
        .collect()
}

/// No neighbor improves the revenue by more than `tolerance * total_weight`.
pub fn is_local_optimum(tree: &HcTree, w: &SimilarityMatrix, tolerance: f64) -> bool {
    let shape = Shape::from_tree(tree);
    let own = shape.revenue(w);
    let slack = tolerance * w.total_weight();
    shape
        .neighbors()
        .iter()
        .all(|s| s.revenue(w) <= own + slack)
}

/// The interchange graph on a whole tree space.
#[derive(Clone, Debug)]
pub struct InterchangeGraph {
    pub space: TreeSpace,
    pub adjacency: Vec<Vec<usize>>,
}

impl InterchangeGraph {
    pub fn build(n: usize) -> Result<Self> {
        let space = enumerate_trees(n)?;
        let index = space.index_of();
        let adjacency = space
            .shapes
            .iter()
            .map(|s| {
                let set: BTreeSet<usize> = s
                    .neighbors()
                    .iter()
                    .map(|nb| index[nb.canonical().as_str()])
                    .collect();
                set.into_iter().collect()
            })
            .collect();
        Ok(InterchangeGraph { space, adjacency })
    }

    /// Hop counts from `source`; `None` for unreachable trees.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.adjacency.len()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes have a distance");
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Minimum number of interchanges turning `a` into `b`, by breadth-first
/// search.
pub fn idist_exact(a: &HcTree, b: &HcTree) -> Result<usize> {
    if a.n() != b.n() {
        return Err(HcError::invalid(format!(
            "trees have different leaf counts ({} and {})",
            a.n(),
            b.n()
        )));
    }
    if a.n() > MAX_DISTANCE_LEAVES {
        return Err(HcError::invalid(format!(
            "exact interchange distance supports at most {MAX_DISTANCE_LEAVES} leaves, got {}",
            a.n()
        )));
    }
    let target = b.to_canonical();
    let start = Shape::from_tree(a);
    let mut seen: HashSet<String> = HashSet::from([start.canonical()]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((s, d)) = queue.pop_front() {
        if s.canonical() == target {
            return Ok(d);
        }
        for nb in s.neighbors() {
            if seen.insert(nb.canonical()) {
                queue.push_back((nb, d + 1));
            }
        }
    }
    Err(HcError::Invariant(
        "interchange graph is disconnected".into(),
    ))
}
