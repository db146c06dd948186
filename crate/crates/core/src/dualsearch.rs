//! Dual functions `D` on a group, obtained from cut-norm families on `Z^s` by
//! averaging over the `y` with `y_1+⋯+y_s = z`.

use serde::{Deserialize, Serialize};

use crate::boxnorms::{dual_kernel, DualFamily};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::groups::{FiniteAbelianGroup, GroupFunction};
use crate::numeric::powf_usize;
use crate::search::{SearchMode, SearchOptions};
use crate::uniformity::additive_cut_norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualFunction {
    pub family: DualFamily,
    pub realized: GroupFunction,
}

impl DualFunction {
    /// `λ·D_1 + (1-λ)·D_2`, again a valid dual for the dense-model engine.
    pub fn convex_combination(&self, other: &DualFunction, lambda: f64) -> Result<GroupFunction> {
        convex_combination(&self.realized, &other.realized, lambda)
    }
}

pub fn convex_combination(a: &GroupFunction, b: &GroupFunction, lambda: f64) -> Result<GroupFunction> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param(format!("λ must lie in [0, 1], got {lambda}")));
    }
    a.zip_with(b, |x, y| lambda * x + (1.0 - lambda) * y)
}

/// `D(z) = E[∏_{ω≠1^s} H_ω(π_ω(y, y')) | y_1+⋯+y_s = z]`.
pub fn realize_dual(family: &DualFamily, group: &FiniteAbelianGroup, s: usize) -> Result<DualFunction> {
    let n = group.order();
    if family.arity() != s || family.vertex_count() != n {
        return Err(Error::input(format!(
            "family on {}^{} does not match Z of order {n} with s = {s}",
            family.vertex_count(),
            family.arity()
        )));
    }
    Budget::default().check_cost("dual realization", powf_usize(n, s))?;
    let kernel = dual_kernel(family)?;
    let add = group.adder();
    let mut sums: Vec<usize> = (0..n).collect();
    for _ in 1..s {
        sums = sums
            .iter()
            .flat_map(|&a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| add.add(a, b))
            .collect();
    }
    // Each z has exactly n^{s-1} preimages.
    let mut buckets = vec![0.0; n];
    for (&z, &k) in sums.iter().zip(kernel.values()) {
        buckets[z] += k;
    }
    let count = powf_usize(n, s - 1);
    let realized = GroupFunction::new(group.clone(), buckets.into_iter().map(|b| b / count).collect())?;
    Ok(DualFunction {
        family: family.clone(),
        realized,
    })
}

/// A dual maximizing `⟨residual, D⟩`, with that correlation.
pub fn best_dual(
    residual: &GroupFunction,
    s: usize,
    mode: SearchMode,
    opts: &SearchOptions,
    budget: &Budget,
) -> Result<(DualFunction, f64)> {
    let est = additive_cut_norm(residual, s, mode, opts, budget)?;
    let dual = realize_dual(&est.witness, residual.group(), s)?;
    let correlation = residual.inner(&dual.realized)?;
    Ok((dual, correlation))
}
