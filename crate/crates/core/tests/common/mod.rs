#![allow(dead_code)]

use hclocal::{HcTree, SimilarityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights drawn uniformly from (0, 1].
pub fn uniform_matrix(n: usize, rng: &mut impl Rng) -> SimilarityMatrix {
    let upper: Vec<f64> = (0..n * (n - 1) / 2)
        .map(|_| 1.0 - rng.random::<f64>())
        .collect();
    SimilarityMatrix::from_upper_triangle(n, &upper).unwrap()
}

/// Upper-triangle weights given in row-major order.
pub fn matrix(n: usize, upper: &[f64]) -> SimilarityMatrix {
    SimilarityMatrix::from_upper_triangle(n, upper).unwrap()
}

/// w(1,2) = w(3,4) = 3, every other pair 1.
pub fn i4() -> SimilarityMatrix {
    matrix(4, &[3.0, 1.0, 1.0, 1.0, 1.0, 3.0])
}

pub fn tree(text: &str) -> HcTree {
    HcTree::parse(text).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
