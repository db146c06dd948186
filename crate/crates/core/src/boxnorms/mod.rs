//! Box norms `□_ℓ(V^s)` and the cut norm on `s`-dimensional tensors.
//!
//! Tensors are row-major: coordinate `i` (0-based) has stride `|V|^{s-1-i}`,
//! so the last coordinate is contiguous and is the one folded first.

mod cut;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::groups::GroupFunction;
use crate::numeric::{check_finite, mean, pairwise_sum, powf_usize, root_of_power};
use crate::uniformity::{NormMethod, NormResult};

pub use cut::{cut_norm, cut_objective, dual_kernel, DualFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorRepr", into = "TensorRepr")]
pub struct TensorFunction {
    vertex_count: usize,
    arity: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    vertex_count: usize,
    arity: usize,
    values: Vec<f64>,
}

impl TryFrom<TensorRepr> for TensorFunction {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        TensorFunction::new(r.vertex_count, r.arity, r.values)
    }
}

impl From<TensorFunction> for TensorRepr {
    fn from(t: TensorFunction) -> Self {
        TensorRepr {
            vertex_count: t.vertex_count,
            arity: t.arity,
            values: t.values,
        }
    }
}

impl TensorFunction {
    pub fn new(vertex_count: usize, arity: usize, values: Vec<f64>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::input("vertex set must be nonempty"));
        }
        if arity == 0 {
            return Err(Error::input("tensor arity must be at least 1"));
        }
        let len = vertex_count
            .checked_pow(arity as u32)
            .ok_or_else(|| Error::input("tensor is too large"))?;
        if values.len() != len {
            return Err(Error::input(format!(
                "a tensor on {vertex_count}^{arity} needs {len} values, got {}",
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(TensorFunction {
            vertex_count,
            arity,
            values,
        })
    }

    pub fn constant(vertex_count: usize, arity: usize, c: f64) -> Result<Self> {
        let len = vertex_count.pow(arity as u32);
        TensorFunction::new(vertex_count, arity, vec![c; len])
    }

    pub fn zeros(vertex_count: usize, arity: usize) -> Result<Self> {
        TensorFunction::constant(vertex_count, arity, 0.0)
    }

    /// Builds a tensor from its value at each multi-index.
    pub fn from_fn(
        vertex_count: usize,
        arity: usize,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let len = vertex_count.pow(arity as u32);
        let mut idx = vec![0usize; arity];
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f(&idx));
            crate::uniformity::advance(&mut idx, vertex_count);
        }
        TensorFunction::new(vertex_count, arity, values)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Row-major position of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.arity || idx.iter().any(|&v| v >= self.vertex_count) {
            return Err(Error::input(format!("index {idx:?} is out of range")));
        }
        Ok(idx.iter().fold(0, |acc, &v| acc * self.vertex_count + v))
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.values[self.offset(idx)?])
    }

    pub fn average(&self) -> f64 {
        mean(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &TensorFunction) -> Result<()> {
        if self.vertex_count != other.vertex_count || self.arity != other.arity {
            return Err(Error::input(format!(
                "tensor shape mismatch: {}^{} vs {}^{}",
                self.vertex_count, self.arity, other.vertex_count, other.arity
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        TensorFunction::new(
            self.vertex_count,
            self.arity,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(&self, other: &TensorFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        TensorFunction::new(
            self.vertex_count,
            self.arity,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &TensorFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TensorFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &TensorFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// `E[F·G]`.
    pub fn inner(&self, other: &TensorFunction) -> Result<f64> {
        self.same_shape(other)?;
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(mean(&prods))
    }
}

pub(crate) fn check_ell(ell: usize) -> Result<()> {
    if ell < 2 || ell % 2 == 1 {
        Err(Error::param(format!("ℓ must be an even integer ≥ 2, got {ell}")))
    } else {
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn contraction_cost(n: usize, arity: usize, ell: usize) -> f64 {
    let multisets = binomial(n + ell - 1, ell);
    (1..arity).fold(n as f64, |inner, level| {
        multisets * (powf_usize(n, level) * ell as f64 + inner)
    })
}

pub(crate) fn check_box_budget(n: usize, arity: usize, ell: usize, budget: &Budget) -> Result<()> {
    budget.check_cost("box norm contraction", contraction_cost(n, arity, ell))
}

/// Nondecreasing `ell`-tuples over `0..n` with their multinomial weights.
fn multisets(n: usize, ell: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut t = vec![0usize; ell];
    let factorial = |k: usize| (1..=k).fold(1.0, |a, i| a * i as f64);
    loop {
        let mut weight = factorial(ell);
        let mut run = 1;
        for j in 1..=ell {
            if j < ell && t[j] == t[j - 1] {
                run += 1;
            } else {
                weight /= factorial(run);
                run = 1;
            }
        }
        out.push((t.clone(), weight));
        // Next nondecreasing tuple.
        let Some(j) = (0..ell).rev().find(|&j| t[j] + 1 < n) else {
            break;
        };
        let v = t[j] + 1;
        t[j..].iter_mut().for_each(|x| *x = v);
    }
    out
}

/// `E_{x∈V^{a×ℓ}} ∏_{ω∈[ℓ]^a} G(π_ω(x))` for a tensor of arity `a`.
///
/// Folding the last coordinate: with `t` the `ℓ` values it takes, the
/// product factors through `P_t(y) = ∏_j G(y, t_j)` on `V^{a-1}`, which only
/// depends on the multiset of `t`.
fn box_power(values: &[f64], n: usize, arity: usize, ell: usize, sets: &[(Vec<usize>, f64)]) -> f64 {
    if arity == 1 {
        return mean(values).powi(ell as i32);
    }
    let rows = values.len() / n;
    let term = |(t, w): &(Vec<usize>, f64)| {
        let p: Vec<f64> = (0..rows)
            .map(|y| t.iter().map(|&tj| values[y * n + tj]).product())
            .collect();
        w * box_power(&p, n, arity - 1, ell, sets)
    };
    let terms: Vec<f64> = if values.len() >= 4096 {
        sets.par_iter().map(term).collect()
    } else {
        sets.iter().map(term).collect()
    };
    pairwise_sum(&terms) / powf_usize(n, ell)
}

/// `‖F‖_{□_ℓ(V^s)}^{ℓ^s}` without the root.
pub fn box_power_ell(f: &TensorFunction, ell: usize, budget: &Budget) -> Result<f64> {
    check_ell(ell)?;
    check_box_budget(f.vertex_count, f.arity, ell, budget)?;
    let sets = multisets(f.vertex_count, ell);
    Ok(box_power(&f.values, f.vertex_count, f.arity, ell, &sets))
}

pub fn box_norm_ell(f: &TensorFunction, ell: usize) -> Result<NormResult> {
    box_norm_ell_with(f, ell, &Budget::default())
}

pub fn box_norm_ell_with(f: &TensorFunction, ell: usize, budget: &Budget) -> Result<NormResult> {
    let power = box_power_ell(f, ell, budget)?;
    Ok(NormResult {
        value: root_of_power(power, powf_usize(ell, f.arity))?,
        method: NormMethod::Contraction,
        cost: contraction_cost(f.vertex_count, f.arity, ell) as u64,
    })
}

/// `‖F‖_{□(V^s)} = ‖F‖_{□_2(V^s)}`.
pub fn box_norm(f: &TensorFunction) -> Result<NormResult> {
    box_norm_ell(f, 2)
}

pub fn box_norm_with(f: &TensorFunction, budget: &Budget) -> Result<NormResult> {
    box_norm_ell_with(f, 2, budget)
}

/// `T(x_1,…,x_s) = f(x_1+⋯+x_s)`, vertices being the element codes of `Z`.
pub fn lift_to_tensor(f: &GroupFunction, s: usize, budget: &Budget) -> Result<TensorFunction> {
    if s < 2 {
        return Err(Error::param(format!("lift arity must be ≥ 2, got {s}")));
    }
    let g = f.group();
    let n = g.order();
    budget.check_cost("tensor lift", powf_usize(n, s))?;
    let add = g.adder();
    // Partial sums along the row-major order: extend the previous level by one
    // coordinate at a time.
    let mut sums: Vec<usize> = (0..n).collect();
    for _ in 1..s {
        sums = sums
            .iter()
            .flat_map(|&a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| add.add(a, b))
            .collect();
    }
    let values = sums.iter().map(|&x| f.values()[x]).collect();
    TensorFunction::new(n, s, values)
}

/// `E_{x∈V^{s×ℓ}} ∏_{ω∈[ℓ]^s} F_ω(π_ω(x))`, where `fs` lists `F_ω` with
/// `ω` read as a base-`ℓ` number, last coordinate fastest.
pub fn multi_box_correlation(fs: &[TensorFunction], ell: usize) -> Result<f64> {
    check_ell(ell)?;
    let first = fs.first().ok_or_else(|| Error::input("empty tensor family"))?;
    for f in &fs[1..] {
        first.same_shape(f)?;
    }
    let (n, s) = (first.vertex_count, first.arity);
    if fs.len() as f64 != powf_usize(ell, s) {
        return Err(Error::input(format!(
            "a family over [{ell}]^{s} needs {} tensors, got {}",
            powf_usize(ell, s),
            fs.len()
        )));
    }
    Budget::default().check_cost(
        "multi-box correlation",
        powf_usize(n, ell * (s - 1)) * powf_usize(n, s) * fs.len() as f64,
    )?;
    let vals: Vec<Vec<f64>> = fs.iter().map(|f| f.values.clone()).collect();
    Ok(multi_corr(&vals, n, s, ell))
}

fn multi_corr(fs: &[Vec<f64>], n: usize, arity: usize, ell: usize) -> f64 {
    if arity == 1 {
        return fs.iter().map(|f| mean(f)).product();
    }
    let rows = fs[0].len() / n;
    let groups = fs.len() / ell;
    let mut t = vec![0usize; ell];
    let mut terms = Vec::new();
    loop {
        let folded: Vec<Vec<f64>> = (0..groups)
            .map(|w| {
                (0..rows)
                    .map(|y| (0..ell).map(|j| fs[w * ell + j][y * n + t[j]]).product())
                    .collect()
            })
            .collect();
        terms.push(multi_corr(&folded, n, arity - 1, ell));
        if !crate::uniformity::advance(&mut t, n) {
            break;
        }
    }
    mean(&terms)
}
