//! Deterministic summation and root extraction helpers.

use crate::error::{Error, Result};

const LEAF: usize = 32;

/// Pairwise (tree) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

/// Streaming tree summation: terms are grouped into leaves of 32 and the leaf
/// sums are merged like a binary counter, so the result does not depend on
/// how the caller interleaves pushes with other work.
#[derive(Debug, Default, Clone)]
pub struct PairwiseAccumulator {
    leaf: f64,
    leaf_len: usize,
    stack: Vec<(u32, f64)>,
    count: u64,
}

impl PairwiseAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.leaf += x;
        self.leaf_len += 1;
        self.count += 1;
        if self.leaf_len == LEAF {
            self.flush_leaf();
        }
    }

    fn flush_leaf(&mut self) {
        let mut level = 0u32;
        let mut sum = self.leaf;
        while let Some(&(top_level, top_sum)) = self.stack.last() {
            if top_level != level {
                break;
            }
            self.stack.pop();
            sum += top_sum;
            level += 1;
        }
        self.stack.push((level, sum));
        self.leaf = 0.0;
        self.leaf_len = 0;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> f64 {
        let mut total = self.leaf;
        for &(_, s) in self.stack.iter().rev() {
            total += s;
        }
        total
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum() / self.count as f64
        }
    }
}

/// Below this a negative power average is treated as float residue.
pub const NEGATIVE_RESIDUE: f64 = 1e-12;

/// Takes the `degree`-th root of a power average that is nonnegative in exact
/// arithmetic.
pub fn root_of_power(average: f64, degree: f64) -> Result<f64> {
    if !average.is_finite() {
        return Err(Error::input(format!("non-finite cube average {average}")));
    }
    if average < 0.0 {
        if average >= -NEGATIVE_RESIDUE {
            return Ok(0.0);
        }
        return Err(Error::NegativeCubeAverage(average));
    }
    Ok(average.powf(1.0 / degree))
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::input(format!("value at index {i} is not finite"))),
        None => Ok(()),
    }
}

/// `base^exp` as f64, saturating; used for cost estimates.
pub(crate) fn powf_usize(base: usize, exp: usize) -> f64 {
    (base as f64).powi(exp as i32)
}
