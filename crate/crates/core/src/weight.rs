//! Numeric backends for the interchange engine.
//!
//! Searches normally run on `f64` similarities. [`IntegerWeights`] gives an
//! exact-arithmetic alternative for instances whose weights share a common
//! denominator: every gain is then an exact integer and "profitable" means
//! strictly positive with no tolerance involved.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};

use crate::error::{HcError, Result};
use crate::similarity::SimilarityMatrix;

/// Arithmetic needed to store and update subtree weights.
pub trait Weight:
    Copy
    + Default
    + PartialOrd
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + SubAssign
{
    fn from_count(count: usize) -> Self;
    fn to_f64(self) -> f64;
    /// Smallest gain that counts as a strict improvement, given the total
    /// pairwise weight and a relative tolerance.
    fn profit_threshold(total: Self, tolerance: f64) -> Self;
    /// Whether two values agree (exactly for integers, to a tight relative
    /// tolerance for floats).
    fn agrees(a: Self, b: Self, scale: Self) -> bool;
}

impl Weight for f64 {
    #[inline]
    fn from_count(count: usize) -> Self {
        count as f64
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn profit_threshold(total: Self, tolerance: f64) -> Self {
        tolerance * total
    }

    fn agrees(a: Self, b: Self, scale: Self) -> bool {
        (a - b).abs() <= 1e-9 * scale.abs().max(a.abs()).max(b.abs()).max(f64::MIN_POSITIVE)
    }
}

impl Weight for i128 {
    #[inline]
    fn from_count(count: usize) -> Self {
        count as i128
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn profit_threshold(_total: Self, _tolerance: f64) -> Self {
        0
    }

    fn agrees(a: Self, b: Self, _scale: Self) -> bool {
        a == b
    }
}

/// Read access to a symmetric pairwise weight function on `0..n`.
pub trait PairWeights<T: Weight>: Sync {
    fn n(&self) -> usize;
    fn weight(&self, i: usize, j: usize) -> T;
    /// `sum_{i<j} w(i, j)`.
    fn total(&self) -> T;
}

impl PairWeights<f64> for SimilarityMatrix {
    #[inline]
    fn n(&self) -> usize {
        SimilarityMatrix::n(self)
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.get(i, j)
        }
    }

    #[inline]
    fn total(&self) -> f64 {
        self.total_weight()
    }
}

/// Integer similarities for exact-arithmetic searches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerWeights {
    n: usize,
    data: Vec<i128>,
    total: i128,
}

impl IntegerWeights {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> i64) -> Result<Self> {
        if n == 0 {
            return Err(HcError::invalid("weights need at least one point"));
        }
        let mut data = vec![0i128; n * n];
        let mut total = 0i128;
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                if v < 0 {
                    return Err(HcError::invalid(format!(
                        "negative weight w({i},{j}) = {v}"
                    )));
                }
                data[i * n + j] = v as i128;
                data[j * n + i] = v as i128;
                total += v as i128;
            }
        }
        Ok(IntegerWeights { n, data, total })
    }

    /// Scales a rational-valued matrix by a common denominator. Every scaled
    /// entry must be an integer to within `1e-9`.
    pub fn from_scaled(matrix: &SimilarityMatrix, denominator: u32) -> Result<Self> {
        let scale = f64::from(denominator);
        let mut bad = None;
        let weights = Self::from_fn(matrix.n(), |i, j| {
            let v = matrix.get(i, j) * scale;
            let r = v.round();
            if (v - r).abs() > 1e-9 {
                bad.get_or_insert((i, j, v));
            }
            r as i64
        })?;
        match bad {
            Some((i, j, v)) => Err(HcError::invalid(format!(
                "w({i},{j}) * {denominator} = {v} is not an integer"
            ))),
            None => Ok(weights),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> i128 {
        self.data[i * self.n + j]
    }
}

impl PairWeights<i128> for IntegerWeights {
    #[inline]
    fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn weight(&self, i: usize, j: usize) -> i128 {
        self.data[i * self.n + j]
    }

    #[inline]
    fn total(&self) -> i128 {
        self.total
    }
}
