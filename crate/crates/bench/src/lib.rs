//! Synthetic inputs shared by the benchmarks.

use hclocal::{gaussian_similarity, Dataset, HcTree, Sigma, SimilarityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points in `dim` dimensions scattered around eight centres.
pub fn blobs(n: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..8)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let rows = (0..n)
        .map(|i| {
            centres[i % centres.len()]
                .iter()
                .map(|c| c + rng.random_range(-2.0..2.0))
                .collect()
        })
        .collect();
    Dataset::from_rows(rows).expect("blob rows are well formed")
}

/// Gaussian similarities of [`blobs`] with the automatic bandwidth.
pub fn blob_matrix(n: usize, seed: u64) -> SimilarityMatrix {
    gaussian_similarity(&blobs(n, 4, seed), Sigma::Auto)
        .expect("blob kernel")
        .matrix
}

pub fn random_tree(n: usize, seed: u64) -> HcTree {
    HcTree::random(n, seed).expect("n >= 2")
}
