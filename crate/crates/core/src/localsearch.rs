//! Greedy and random interchange local search.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{HcError, Result};
use crate::interchange::{certify, Certificate, MoveIndex, Swap, WMatrix, DEFAULT_TOLERANCE};
use crate::tree::HcTree;
use crate::weight::{PairWeights, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Always apply the most profitable interchange.
    Greedy,
    /// Apply a uniformly chosen profitable interchange.
    Random,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Greedy => "greedy",
            Variant::Random => "random",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = HcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greedy" | "greedyls" => Ok(Variant::Greedy),
            "random" | "randomls" => Ok(Variant::Random),
            other => Err(HcError::invalid(format!(
                "unknown search variant {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchConfig {
    pub variant: Variant,
    /// Drives move selection for [`Variant::Random`].
    pub seed: u64,
    /// Stop after this many interchanges; `None` runs to a local optimum.
    pub max_steps: Option<u64>,
    /// Relative profitability threshold (ignored by exact weights).
    pub tolerance: f64,
    /// Trajectory sampling stride; `None` picks 1 for n <= 500, else 10.
    pub log_every: Option<u64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            variant: Variant::Greedy,
            seed: 0,
            max_steps: None,
            tolerance: DEFAULT_TOLERANCE,
            log_every: None,
        }
    }
}

impl SearchConfig {
    pub fn greedy() -> Self {
        Self::default()
    }

    pub fn random(seed: u64) -> Self {
        SearchConfig {
            variant: Variant::Random,
            seed,
            ..Self::default()
        }
    }

    fn stride(&self, n: usize) -> u64 {
        self.log_every
            .unwrap_or(if n <= 500 { 1 } else { 10 })
            .max(1)
    }
}

/// One applied interchange, as written to step logs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub node_x: usize,
    pub variant: Swap,
    pub gain: f64,
    pub revenue: f64,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str = "step,node_x,variant,gain,revenue";

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{:e},{:e}",
            self.step,
            self.node_x,
            self.variant.as_str(),
            self.gain,
            self.revenue
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub n: usize,
    pub variant: Variant,
    pub seed: u64,
    pub tolerance: f64,
    pub initial_tree: String,
    pub final_tree: String,
    pub initial_revenue: f64,
    pub final_revenue: f64,
    pub initial_normalized: Option<f64>,
    pub final_normalized: Option<f64>,
    pub steps: u64,
    /// `(step, revenue)` samples; strictly increasing in revenue.
    pub trajectory: Vec<(u64, f64)>,
    pub wall_time_secs: f64,
    pub converged: bool,
    pub certificate: Certificate,
}

fn normalized(revenue: f64, n: usize, total: f64) -> Option<f64> {
    (n > 2 && total > 0.0).then(|| revenue / ((n - 2) as f64 * total))
}

/// Runs local search from `start` until no profitable interchange remains or
/// `max_steps` is hit. Deterministic in `(start, w, cfg)`.
pub fn search<T: Weight, P: PairWeights<T>>(
    start: HcTree,
    w: &P,
    cfg: &SearchConfig,
) -> Result<(HcTree, SearchReport)> {
    search_logged(start, w, cfg, |_| {})
}

/// [`search`], calling `on_step` after every applied interchange.
pub fn search_logged<T: Weight, P: PairWeights<T>>(
    start: HcTree,
    w: &P,
    cfg: &SearchConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<(HcTree, SearchReport)> {
    if cfg.tolerance.is_nan() || cfg.tolerance < 0.0 {
        return Err(HcError::invalid("tolerance must be nonnegative"));
    }
    let clock = Instant::now();
    let mut tree = start;
    let n = tree.n();
    let mut table = WMatrix::build(&tree, w)?;
    let mut index = MoveIndex::new(&tree, &table);
    let total = table.total_weight().to_f64();
    let initial_tree = tree.to_canonical();
    let initial = table.revenue(&tree);
    let initial_revenue = initial.to_f64();
    let stride = cfg.stride(n);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut revenue = initial;
    let mut trajectory = vec![(0, initial_revenue)];
    let mut steps = 0u64;
    let converged = loop {
        if cfg.max_steps.is_some_and(|cap| steps >= cap) {
            break false;
        }
        let chosen = match cfg.variant {
            Variant::Greedy => index.best(&tree, &table, cfg.tolerance),
            Variant::Random => {
                let moves = index.profitable(&tree, &table, cfg.tolerance);
                (!moves.is_empty()).then(|| moves[rng.random_range(0..moves.len())])
            }
        };
        let Some(mv) = chosen else { break true };
        let delta = index.apply(&mut tree, &mut table, &mv)?;
        revenue += delta;
        steps += 1;
        let revenue_f = revenue.to_f64();
        on_step(&StepRecord {
            step: steps,
            node_x: mv.x.index(),
            variant: mv.variant,
            gain: delta.to_f64(),
            revenue: revenue_f,
        });
        if steps.is_multiple_of(stride) {
            trajectory.push((steps, revenue_f));
        }
    };

    let final_revenue = table.revenue(&tree).to_f64();
    if trajectory.last().map(|&(s, _)| s) != Some(steps) {
        trajectory.push((steps, revenue.to_f64()));
    }
    let certificate = certify(&tree, &table, cfg.tolerance);
    let report = SearchReport {
        n,
        variant: cfg.variant,
        seed: cfg.seed,
        tolerance: cfg.tolerance,
        initial_tree,
        final_tree: tree.to_canonical(),
        initial_revenue,
        final_revenue,
        initial_normalized: normalized(initial_revenue, n, total),
        final_normalized: normalized(final_revenue, n, total),
        steps,
        trajectory,
        wall_time_secs: clock.elapsed().as_secs_f64(),
        converged,
        certificate,
    };
    Ok((tree, report))
}

/// Starting point for each run of [`multi_run`].
#[derive(Clone, Debug)]
pub enum InitTree {
    /// A fresh random agglomeration per run.
    Random,
    Fixed(HcTree),
}

/// Per-run seed: `base + run`.
pub fn run_seed(base: u64, run: usize) -> u64 {
    base.wrapping_add(run as u64)
}

/// Seed of the random initial tree for a run seed; independent of the stream
/// used for move selection.
pub fn init_tree_seed(run_seed: u64) -> u64 {
    run_seed ^ 0x5DEE_CE66_D1CE_4E5B
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub initial_normalized: Option<f64>,
    pub final_normalized: Option<f64>,
    pub final_revenue: f64,
    pub steps: u64,
    pub wall_time_secs: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiRunReport {
    pub variant: Variant,
    pub runs: Vec<RunSummary>,
    pub mean_normalized: f64,
    pub max_normalized: f64,
    pub mean_steps: f64,
}

/// Independent seeded runs, executed in parallel. Run `k` uses seed
/// `run_seed(cfg.seed, k)`.
pub fn multi_run<T: Weight, P: PairWeights<T>>(
    w: &P,
    cfg: &SearchConfig,
    runs: usize,
    init: &InitTree,
) -> Result<MultiRunReport> {
    if runs == 0 {
        return Err(HcError::invalid("runs must be at least 1"));
    }
    let summaries = (0..runs)
        .into_par_iter()
        .map(|k| {
            let seed = run_seed(cfg.seed, k);
            let start = match init {
                InitTree::Random => HcTree::random(w.n(), init_tree_seed(seed))?,
                InitTree::Fixed(tree) => tree.clone(),
            };
            let run_cfg = SearchConfig {
                seed,
                ..cfg.clone()
            };
            let (_, report) = search(start, w, &run_cfg)?;
            Ok(RunSummary {
                seed,
                initial_normalized: report.initial_normalized,
                final_normalized: report.final_normalized,
                final_revenue: report.final_revenue,
                steps: report.steps,
                wall_time_secs: report.wall_time_secs,
                converged: report.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let norms: Vec<f64> = summaries
        .iter()
        .map(|s| s.final_normalized.unwrap_or(f64::NAN))
        .collect();
    Ok(MultiRunReport {
        variant: cfg.variant,
        mean_normalized: norms.iter().sum::<f64>() / runs as f64,
        max_normalized: norms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_steps: summaries.iter().map(|s| s.steps as f64).sum::<f64>() / runs as f64,
        runs: summaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::SimilarityMatrix;
    use crate::weight::IntegerWeights;

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

    #[test]
    fn optimum_start_takes_no_steps() {
        for cfg in [SearchConfig::greedy(), SearchConfig::random(5)] {
            let (tree, report) = search(t("((1,2),(3,4));"), &i4(), &cfg).unwrap();
            assert_eq!(report.steps, 0);
            assert!(report.converged);
            assert!(report.certificate.locally_optimal);
            assert_eq!(report.final_revenue, 12.0);
            assert_eq!(tree.to_canonical(), "((1,2),(3,4));");
        }
    }

    #[test]
    fn greedy_climbs_to_twelve() {
        let mut log = Vec::new();
        let (_, report) = search_logged(t("((1,3),(2,4));"), &i4(), &SearchConfig::greedy(), |s| {
            log.push(s.clone())
        })
        .unwrap();
        assert!(report.converged);
        assert_eq!(report.final_revenue, 12.0);
        assert_eq!(report.final_normalized, Some(0.6));
        assert_eq!(log.len() as u64, report.steps);
        assert!(report.trajectory.windows(2).all(|p| p[1].1 > p[0].1));
    }

    #[test]
    fn unit_weights_take_no_steps() {
        let w = SimilarityMatrix::constant(20, 1.0).unwrap();
        let (_, report) =
            search(HcTree::random(20, 1).unwrap(), &w, &SearchConfig::random(3)).unwrap();
        assert_eq!(report.steps, 0);
    }

    #[test]
    fn step_cap_reports_not_converged() {
        let w = SimilarityMatrix::from_fn(40, |i, j| if i / 10 == j / 10 { 1.0 } else { 0.01 })
            .unwrap();
        let cfg = SearchConfig {
            max_steps: Some(5),
            ..SearchConfig::greedy()
        };
        let (_, report) = search(HcTree::random(40, 2).unwrap(), &w, &cfg).unwrap();
        assert_eq!(report.steps, 5);
        assert!(!report.converged);
    }

    #[test]
    fn exact_mode_matches_float_mode() {
        let w = SimilarityMatrix::from_fn(12, |i, j| ((i * 5 + j * 11) % 7) as f64 / 4.0).unwrap();
        let exact = IntegerWeights::from_scaled(&w, 4).unwrap();
        let start = HcTree::random(12, 9).unwrap();
        let (tf, rf) = search(start.clone(), &w, &SearchConfig::greedy()).unwrap();
        let (te, re) = search(start, &exact, &SearchConfig::greedy()).unwrap();
        assert!(re.converged && rf.converged);
        assert_eq!(tf.to_canonical(), te.to_canonical());
        assert_eq!(re.final_revenue / 4.0, rf.final_revenue);
    }

    #[test]
    fn multi_run_aggregates() {
        let w = SimilarityMatrix::from_fn(15, |i, j| 1.0 / (1.0 + (i as f64 - j as f64).abs()))
            .unwrap();
        let report = multi_run(&w, &SearchConfig::random(11), 4, &InitTree::Random).unwrap();
        assert_eq!(report.runs.len(), 4);
        assert!(report.max_normalized >= report.mean_normalized);
        let again = multi_run(&w, &SearchConfig::random(11), 4, &InitTree::Random).unwrap();
        let steps = |r: &MultiRunReport| r.runs.iter().map(|s| s.steps).collect::<Vec<_>>();
        assert_eq!(steps(&report), steps(&again));
        assert!(multi_run(&w, &SearchConfig::greedy(), 0, &InitTree::Random).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("GreedyLS".parse::<Variant>().unwrap(), Variant::Greedy);
        assert_eq!("random".parse::<Variant>().unwrap(), Variant::Random);
        assert!("annealing".parse::<Variant>().is_err());
    }
}
