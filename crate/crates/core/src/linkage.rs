//! Agglomerative baselines.
//!
//! Average, single and complete linkage work on similarities and always merge
//! the most similar pair of clusters. Ward works on raw features and merges
//! the pair with the smallest increase in within-cluster variance. All four use
//! a plain `O(n^3)` scan; ties go to the lexicographically smallest pair of
//! cluster ids (singletons are `0..n`, the `k`-th merge creates `n + k`).

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{HcError, Result};
use crate::similarity::{Dataset, SimilarityMatrix};
use crate::tree::HcTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkageKind {
    Average,
    Single,
    Complete,
    Ward,
}

impl LinkageKind {
    pub const ALL: [LinkageKind; 4] = [
        LinkageKind::Average,
        LinkageKind::Single,
        LinkageKind::Complete,
        LinkageKind::Ward,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LinkageKind::Average => "average",
            LinkageKind::Single => "single",
            LinkageKind::Complete => "complete",
            LinkageKind::Ward => "ward",
        }
    }

    /// Ward needs feature vectors; the others only similarities.
    pub fn needs_features(self) -> bool {
        self == LinkageKind::Ward
    }
}

impl fmt::Display for LinkageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LinkageKind {
    type Err = HcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "average" | "avg" | "al" => Ok(LinkageKind::Average),
            "single" => Ok(LinkageKind::Single),
            "complete" => Ok(LinkageKind::Complete),
            "ward" => Ok(LinkageKind::Ward),
            other => Err(HcError::invalid(format!("unknown linkage {other:?}"))),
        }
    }
}

/// Active clusters with a dense pairwise score table over slots.
struct Agglomeration {
    n: usize,
    ids: Vec<usize>,
    sizes: Vec<usize>,
    score: Vec<f64>,
    merges: Vec<(usize, usize)>,
}

impl Agglomeration {
    fn new(n: usize, mut init: impl FnMut(usize, usize) -> f64) -> Self {
        let mut score = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = init(i, j);
                score[i * n + j] = v;
                score[j * n + i] = v;
            }
        }
        Agglomeration {
            n,
            ids: (0..n).collect(),
            sizes: vec![1; n],
            score,
            merges: Vec::with_capacity(n.saturating_sub(1)),
        }
    }

    /// Slots `(p, q)` of the best pair under `better(candidate, incumbent)`;
    /// equal scores fall back to the smaller `(min id, max id)` pair.
    fn pick(&self, active: &[usize], better: impl Fn(f64, f64) -> bool) -> (usize, usize) {
        let key = |p: usize, q: usize| {
            let (a, b) = (self.ids[p], self.ids[q]);
            (a.min(b), a.max(b))
        };
        let mut best: Option<(usize, usize, f64)> = None;
        for (k, &p) in active.iter().enumerate() {
            for &q in &active[k + 1..] {
                let v = self.score[p * self.n + q];
                best = match best {
                    None => Some((p, q, v)),
                    Some((bp, bq, bv)) => {
                        if better(v, bv) || (v == bv && key(p, q) < key(bp, bq)) {
                            Some((p, q, v))
                        } else {
                            Some((bp, bq, bv))
                        }
                    }
                };
            }
        }
        let (p, q, _) = best.expect("at least two active clusters");
        (p, q)
    }

    /// Merges slot `q` into slot `p`, recomputing scores against every other
    /// active slot with `update(p_score, q_score, other_size, p_size, q_size, pq_score)`.
    fn merge(
        &mut self,
        active: &mut Vec<usize>,
        p: usize,
        q: usize,
        update: impl Fn(f64, f64, usize, usize, usize, f64) -> f64,
    ) {
        let n = self.n;
        let new_id = n + self.merges.len();
        let (a, b) = (self.ids[p], self.ids[q]);
        self.merges.push((a.min(b), a.max(b)));
        let pq = self.score[p * n + q];
        for &k in active.iter() {
            if k == p || k == q {
                continue;
            }
            let v = update(
                self.score[p * n + k],
                self.score[q * n + k],
                self.sizes[k],
                self.sizes[p],
                self.sizes[q],
                pq,
            );
            self.score[p * n + k] = v;
            self.score[k * n + p] = v;
        }
        self.sizes[p] += self.sizes[q];
        self.ids[p] = new_id;
        active.retain(|&k| k != q);
    }
}

/// Agglomerates by similarity: `Average` uses `w(A,B) / (|A||B|)`, `Single`
/// the largest and `Complete` the smallest cross-pair similarity.
pub fn agglomerate(w: &SimilarityMatrix, kind: LinkageKind) -> Result<HcTree> {
    let merges = agglomerate_merges(w, kind)?;
    HcTree::from_merges(w.n(), &merges)
}

/// The merge sequence behind [`agglomerate`].
pub fn agglomerate_merges(w: &SimilarityMatrix, kind: LinkageKind) -> Result<Vec<(usize, usize)>> {
    let n = w.n();
    if n < 2 {
        return Err(HcError::invalid(format!(
            "linkage needs at least 2 points, got {n}"
        )));
    }
    if kind == LinkageKind::Ward {
        return Err(HcError::invalid(
            "ward linkage needs feature vectors, not a similarity matrix",
        ));
    }
    // Average keeps total cross weights and divides when comparing.
    let mut agg = Agglomeration::new(n, |i, j| w.get(i, j));
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let (p, q) = match kind {
            LinkageKind::Average => {
                let sizes = agg.sizes.clone();
                let avg = |p: usize, q: usize| agg.score[p * n + q] / (sizes[p] * sizes[q]) as f64;
                pick_by(&agg, &active, avg)
            }
            _ => agg.pick(&active, |v, best| v > best),
        };
        match kind {
            LinkageKind::Average => agg.merge(&mut active, p, q, |sp, sq, _, _, _, _| sp + sq),
            LinkageKind::Single => agg.merge(&mut active, p, q, |sp, sq, _, _, _, _| sp.max(sq)),
            LinkageKind::Complete => agg.merge(&mut active, p, q, |sp, sq, _, _, _, _| sp.min(sq)),
            LinkageKind::Ward => unreachable!(),
        }
    }
    Ok(agg.merges)
}

fn pick_by(
    agg: &Agglomeration,
    active: &[usize],
    value: impl Fn(usize, usize) -> f64,
) -> (usize, usize) {
    let key = |p: usize, q: usize| {
        let (a, b) = (agg.ids[p], agg.ids[q]);
        (a.min(b), a.max(b))
    };
    let mut best: Option<(usize, usize, f64)> = None;
    for (k, &p) in active.iter().enumerate() {
        for &q in &active[k + 1..] {
            let v = value(p, q);
            let take = match best {
                None => true,
                Some((bp, bq, bv)) => v > bv || (v == bv && key(p, q) < key(bp, bq)),
            };
            if take {
                best = Some((p, q, v));
            }
        }
    }
    let (p, q, _) = best.expect("at least two active clusters");
    (p, q)
}

/// Ward's minimum-variance agglomeration on squared Euclidean distances with
/// the Lance–Williams update.
pub fn ward(data: &Dataset) -> Result<HcTree> {
    let merges = ward_merges(data)?;
    HcTree::from_merges(data.len(), &merges)
}

pub fn ward_merges(data: &Dataset) -> Result<Vec<(usize, usize)>> {
    let n = data.len();
    if n < 2 {
        return Err(HcError::invalid(format!(
            "ward needs at least 2 points, got {n}"
        )));
    }
    let sq = |i: usize, j: usize| -> f64 {
        data.row(i)
            .iter()
            .zip(data.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut agg = Agglomeration::new(n, sq);
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let (p, q) = agg.pick(&active, |v, best| v < best);
        agg.merge(&mut active, p, q, |dp, dq, nk, np, nq, dpq| {
            let (nk, np, nq) = (nk as f64, np as f64, nq as f64);
            ((np + nk) * dp + (nq + nk) * dq - nk * dpq) / (np + nq + nk)
        });
    }
    Ok(agg.merges)
}

/// Any linkage: similarity-based kinds use `w`, Ward uses `data`.
pub fn build_linkage(
    kind: LinkageKind,
    w: &SimilarityMatrix,
    data: Option<&Dataset>,
) -> Result<HcTree> {
    match kind {
        LinkageKind::Ward => {
            let data =
                data.ok_or_else(|| HcError::invalid("ward linkage needs the feature table"))?;
            if data.len() != w.n() {
                return Err(HcError::SizeMismatch {
                    tree: data.len(),
                    matrix: w.n(),
                });
            }
            ward(data)
        }
        other => agglomerate(w, other),
    }
}
