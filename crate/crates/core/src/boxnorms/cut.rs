//! The cut norm `sup E_{y,z} F(y) ∏_{ω≠1^s} H_ω(π_ω(y,z))` over families of
//! `[-1,1]`-valued tensors.
//!
//! A vertex `ω ∈ [2]^s` is encoded as a mask with bit `i` set iff `ω_i = 2`,
//! so mask 0 is `1^s` and `π_ω(y,z)` takes `z_i` on the set bits and `y_i`
//! elsewhere.
//!
//! For fixed `z`, each `H_ω(π_ω(y,z))` ignores `y_i` for every set bit `i` of
//! `ω`, so it can be absorbed into an axis function `u_i(y_{-i})`. The search
//! therefore runs over `s` axis functions, which reach the same supremum.

use serde::{Deserialize, Serialize};

use super::TensorFunction;
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::numeric::{mean, pairwise_sum, powf_usize};
use crate::search::{gray_flip_bit, sign, SearchMode, SearchOptions, SearchStats};
use crate::uniformity::{advance, WeakNormEstimate};

/// `⟨H_ω : ω ∈ [2]^s∖{1^s}⟩`; `members[mask-1] = H_mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualFamily {
    arity: usize,
    members: Vec<TensorFunction>,
}

impl DualFamily {
    pub fn new(arity: usize, members: Vec<TensorFunction>) -> Result<Self> {
        if arity < 1 || members.len() + 1 != 1 << arity {
            return Err(Error::input(format!(
                "a dual family of arity {arity} needs {} members, got {}",
                (1usize << arity).saturating_sub(1),
                members.len()
            )));
        }
        if members[0].arity() != arity {
            return Err(Error::input("member arity differs from family arity"));
        }
        for m in &members[1..] {
            members[0].same_shape(m)?;
        }
        if members.iter().any(|m| m.sup_norm() > 1.0) {
            return Err(Error::input("dual family members must take values in [-1, 1]"));
        }
        Ok(DualFamily { arity, members })
    }

    pub fn ones(vertex_count: usize, arity: usize) -> Result<Self> {
        let one = TensorFunction::constant(vertex_count, arity, 1.0)?;
        DualFamily::new(arity, vec![one; (1 << arity) - 1])
    }

    /// The family with `H_{e_i}(v) = u_i(v_{-i})` and every other member 1;
    /// `us[i]` is row-major over the coordinates other than `i`.
    pub fn from_axis(vertex_count: usize, arity: usize, us: &[Vec<f64>]) -> Result<Self> {
        let n = vertex_count;
        if us.len() != arity || us.iter().any(|u| u.len() as f64 != powf_usize(n, arity - 1)) {
            return Err(Error::input("axis functions do not match the tensor shape"));
        }
        let len = n.pow(arity as u32);
        let mut members = Vec::with_capacity((1 << arity) - 1);
        for mask in 1..(1usize << arity) {
            if mask.is_power_of_two() {
                let i = mask.trailing_zeros() as usize;
                let values = (0..len).map(|y| us[i][drop_axis(y, i, n, arity)]).collect();
                members.push(TensorFunction::new(n, arity, values)?);
            } else {
                members.push(TensorFunction::constant(n, arity, 1.0)?);
            }
        }
        DualFamily::new(arity, members)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn vertex_count(&self) -> usize {
        self.members[0].vertex_count()
    }

    pub fn members(&self) -> &[TensorFunction] {
        &self.members
    }

    pub fn member(&self, mask: usize) -> Option<&TensorFunction> {
        mask.checked_sub(1).and_then(|i| self.members.get(i))
    }

    /// True when every member that is not an axis member is identically 1.
    pub fn is_axis(&self) -> bool {
        (1..(1usize << self.arity))
            .filter(|m| !m.is_power_of_two())
            .all(|m| self.members[m - 1].values().iter().all(|&v| v == 1.0))
    }
}

#[inline]
fn stride(i: usize, n: usize, arity: usize) -> usize {
    n.pow((arity - 1 - i) as u32)
}

/// Index of `y_{-i}` in `V^{s-1}` for the row-major index `y`.
#[inline]
pub(crate) fn drop_axis(y: usize, i: usize, n: usize, arity: usize) -> usize {
    let st = stride(i, n, arity);
    (y / (st * n)) * st + y % st
}

/// Index of `y` with `y_{-i} = q` and `y_i = t`.
#[inline]
pub(crate) fn insert_axis(q: usize, i: usize, t: usize, n: usize, arity: usize) -> usize {
    let st = stride(i, n, arity);
    (q / st) * st * n + t * st + q % st
}

/// `K(y) = E_z ∏_{ω≠1^s} H_ω(π_ω(y,z))`, so that the cut objective is `E[F·K]`.
pub fn dual_kernel(family: &DualFamily) -> Result<TensorFunction> {
    let n = family.vertex_count();
    let s = family.arity;
    let len = n.pow(s as u32);
    if family.is_axis() {
        let ms: Vec<Vec<f64>> = (0..s)
            .map(|i| {
                let h = family.members[(1 << i) - 1].values();
                (0..len / n)
                    .map(|q| (0..n).map(|t| h[insert_axis(q, i, t, n, s)]).sum::<f64>() / n as f64)
                    .collect()
            })
            .collect();
        let values = (0..len)
            .map(|y| (0..s).map(|i| ms[i][drop_axis(y, i, n, s)]).product())
            .collect();
        return TensorFunction::new(n, s, values);
    }
    general_kernel(family)
}

fn general_kernel(family: &DualFamily) -> Result<TensorFunction> {
    let n = family.vertex_count();
    let s = family.arity;
    let len = n.pow(s as u32);
    Budget::default().check_cost(
        "general dual kernel",
        powf_usize(n, 2 * s) * (1u64 << s) as f64,
    )?;
    let strides: Vec<usize> = (0..s).map(|i| stride(i, n, s)).collect();
    let values = (0..len)
        .map(|y| {
            let ycoords: Vec<usize> = strides.iter().map(|&st| (y / st) % n).collect();
            let mut z = vec![0usize; s];
            let mut terms = Vec::with_capacity(len);
            loop {
                let mut p = 1.0;
                for mask in 1..(1usize << s) {
                    let idx: usize = (0..s)
                        .map(|i| {
                            let c = if (mask >> i) & 1 == 1 { z[i] } else { ycoords[i] };
                            c * strides[i]
                        })
                        .sum();
                    p *= family.members[mask - 1].values()[idx];
                }
                terms.push(p);
                if !advance(&mut z, n) {
                    break;
                }
            }
            mean(&terms)
        })
        .collect();
    TensorFunction::new(n, s, values)
}

/// `E_{y,z} F(y) ∏_{ω≠1^s} H_ω(π_ω(y,z))`.
pub fn cut_objective(f: &TensorFunction, family: &DualFamily) -> Result<f64> {
    if f.arity() != family.arity {
        return Err(Error::input("tensor and family arities differ"));
    }
    f.same_shape(&family.members[0])?;
    f.inner(&dual_kernel(family)?)
}

/// `M_i(y_{-i}) = E_t F(y) ∏_{k≠i} u_k(y_{-k})` with `y_i = t`.
fn axis_marginal(f: &[f64], us: &[Vec<f64>], i: usize, n: usize, s: usize) -> Vec<f64> {
    (0..us[i].len())
        .map(|q| {
            let mut acc = 0.0;
            for t in 0..n {
                let y = insert_axis(q, i, t, n, s);
                let mut p = f[y];
                for (k, u) in us.iter().enumerate() {
                    if k != i {
                        p *= u[drop_axis(y, k, n, s)];
                    }
                }
                acc += p;
            }
            acc / n as f64
        })
        .collect()
}

fn abs_mean(m: &[f64]) -> f64 {
    m.iter().map(|v| v.abs()).sum::<f64>() / m.len() as f64
}

const RECOMPUTE_EVERY: u64 = 1024;

/// `‖F‖_{cut(V^s)}`: exact by exhaustive ±1 search over the axis functions,
/// or a lower bound by alternating maximization.
pub fn cut_norm(
    f: &TensorFunction,
    mode: SearchMode,
    opts: &SearchOptions,
    budget: &Budget,
) -> Result<WeakNormEstimate<DualFamily>> {
    let s = f.arity();
    if s < 2 {
        return Err(Error::param(format!("cut norm needs arity ≥ 2, got {s}")));
    }
    let (us, exact, stats) = match mode {
        SearchMode::Exhaustive => cut_exhaustive(f, budget)?,
        SearchMode::Alternating => cut_alternating(f, opts, budget)?,
    };
    let witness = DualFamily::from_axis(f.vertex_count(), s, &us)?;
    Ok(WeakNormEstimate {
        lower_bound: cut_objective(f, &witness)?,
        witness,
        exact,
        stats,
    })
}

type AxisSearch = (Vec<Vec<f64>>, bool, SearchStats);

fn cut_exhaustive(f: &TensorFunction, budget: &Budget) -> Result<AxisSearch> {
    let (n, s) = (f.vertex_count(), f.arity());
    let width = n.pow((s - 1) as u32);
    budget.check_bits("exhaustive cut norm", ((s - 1) * width) as f64)?;
    let vals = f.values();
    let last = s - 1;
    let mut us = vec![vec![1.0; width]; s];
    let mut m = axis_marginal(vals, &us, last, n, s);
    let mut best = abs_mean(&m);
    let mut best_code = 0u64;
    // Bit 0 of u_0 stays +1: negating a whole axis function leaves E|M| fixed.
    let free_bits = (s - 1) * width - 1;
    let mut evaluations = 1u64;
    for k in 1..(1u64 << free_bits) {
        let b = gray_flip_bit(k) as usize + 1;
        let (j, q) = (b / width, b % width);
        us[j][q] = -us[j][q];
        if k % RECOMPUTE_EVERY == 0 {
            m = axis_marginal(vals, &us, last, n, s);
        } else {
            let delta = 2.0 * us[j][q] / n as f64;
            for t in 0..n {
                let y = insert_axis(q, j, t, n, s);
                let mut p = delta * vals[y];
                for (i, u) in us.iter().enumerate().take(last) {
                    if i != j {
                        p *= u[drop_axis(y, i, n, s)];
                    }
                }
                m[drop_axis(y, last, n, s)] += p;
            }
        }
        evaluations += 1;
        let value = abs_mean(&m);
        if value > best {
            best = value;
            best_code = k ^ (k >> 1);
        }
    }
    for b in 0..(s - 1) * width {
        let bit = if b == 0 { 0 } else { (best_code >> (b - 1)) & 1 };
        us[b / width][b % width] = if bit == 1 { -1.0 } else { 1.0 };
    }
    let m = axis_marginal(vals, &us, last, n, s);
    us[last] = m.iter().map(|&v| sign(v)).collect();
    Ok((
        us,
        true,
        SearchStats {
            evaluations,
            sweeps: 0,
            sweep_cap_hit: false,
        },
    ))
}

fn cut_alternating(
    f: &TensorFunction,
    opts: &SearchOptions,
    budget: &Budget,
) -> Result<AxisSearch> {
    let (n, s) = (f.vertex_count(), f.arity());
    let width = n.pow((s - 1) as u32);
    budget.check_cost("alternating cut norm sweep", powf_usize(n, s) * (s * s) as f64)?;
    let vals = f.values();
    let mut stats = SearchStats {
        evaluations: 0,
        sweeps: 0,
        sweep_cap_hit: false,
    };
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    // Axis 0 is updated first, so only the other axes make up a start.
    let start_bits = (s - 1) * width;
    for restart in 0..opts.restart_count(start_bits) {
        let start = opts.restart_signs(restart, start_bits);
        let mut us = vec![vec![1.0; width]];
        us.extend(start.chunks(width).map(<[f64]>::to_vec));
        let mut previous = f64::NEG_INFINITY;
        let mut value = 0.0;
        let mut sweeps = 0;
        loop {
            for i in 0..s {
                let m = axis_marginal(vals, &us, i, n, s);
                value = pairwise_sum(&m.iter().map(|v| v.abs()).collect::<Vec<_>>()) / width as f64;
                us[i] = m.iter().map(|&v| sign(v)).collect();
                stats.evaluations += 1;
            }
            sweeps += 1;
            if value - previous < opts.tolerance {
                break;
            }
            if sweeps >= opts.max_sweeps {
                stats.sweep_cap_hit = true;
                break;
            }
            previous = value;
        }
        stats.sweeps += sweeps as u64;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, us));
        }
    }
    let (_, us) = best.expect("at least one restart");
    Ok((us, false, stats))
}
