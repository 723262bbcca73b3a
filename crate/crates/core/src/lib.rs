//! Hierarchical clustering under the Moseley–Wang revenue objective, with
//! local search by subtree interchanges.

pub mod error;
pub mod interchange;
pub mod linkage;
pub mod localsearch;
pub mod numeric;
pub mod objective;
pub mod oracle;
pub mod similarity;
pub mod tree;
pub mod weight;

pub use error::{HcError, Result};
pub use interchange::{
    apply_move, best_move, certify, certify_local_optimality, profitable_moves, Certificate,
    InterchangeMove, MoveIndex, Swap, Violation, WMatrix, DEFAULT_TOLERANCE,
};
pub use linkage::{build_linkage, LinkageKind};
pub use localsearch::{
    multi_run, search, search_logged, InitTree, MultiRunReport, RunSummary, SearchConfig,
    SearchReport, StepRecord, Variant,
};
pub use objective::{cost, normalized_revenue, revenue, score, Score};
pub use similarity::{
    gaussian_similarity, load_dataset, Dataset, GaussianKernel, LoadOptions, Sigma,
    SimilarityMatrix,
};
pub use tree::{HcTree, NodeId};
pub use weight::{IntegerWeights, PairWeights, Weight};
