//! Gowers uniformity norms `U^s(Z)`, the lifted `(s, ℓ)` norms, the weak
//! uniformity norm and the cube correlation / marginal machinery.
//!
//! Throughout, a vertex `ω ∈ {0,1}^s` is encoded as a bitmask with bit `i`
//! equal to `ω_i`, and a family indexed by the cube is a slice in mask order.

mod weak;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxnorms::{self, lift_to_tensor, DualFamily};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::fourier::{dft, dft_cost};
use crate::groups::{Adder, FiniteAbelianGroup, GroupFunction};
use crate::numeric::{mean, pairwise_sum, powf_usize, root_of_power, PairwiseAccumulator};
use crate::search::{SearchMode, SearchOptions};

pub use weak::{weak_norm, weak_objective, CubeFamily, WeakNormEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    DirectEnumeration,
    RecursiveDerivative,
    FourierFastPath,
    LiftedTensor,
    /// Dynamic-programming contraction of a box norm.
    Contraction,
}

/// Which algorithm to use for `‖f‖_{U^s}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Direct,
    Recursive,
    Fourier,
    Lifted,
}

impl std::str::FromStr for MethodChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(MethodChoice::Auto),
            "direct" => Ok(MethodChoice::Direct),
            "recursive" => Ok(MethodChoice::Recursive),
            "fourier" => Ok(MethodChoice::Fourier),
            "lifted" => Ok(MethodChoice::Lifted),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub method: NormMethod,
    /// Elementary multiply-adds performed (estimated for the FFT paths).
    pub cost: u64,
}

fn check_order(s: usize) -> Result<()> {
    if s < 2 {
        Err(Error::param(format!("uniformity order s must be ≥ 2, got {s}")))
    } else if s > 16 {
        Err(Error::param(format!("uniformity order s = {s} is unsupported")))
    } else {
        Ok(())
    }
}

/// `‖f‖_{U^s(Z)}` with automatic method selection and the default budget.
pub fn gowers_norm(f: &GroupFunction, s: usize) -> Result<NormResult> {
    gowers_norm_with(f, s, MethodChoice::Auto, &Budget::default())
}

pub fn gowers_norm_with(
    f: &GroupFunction,
    s: usize,
    choice: MethodChoice,
    budget: &Budget,
) -> Result<NormResult> {
    check_order(s)?;
    match choice {
        MethodChoice::Direct => gowers_norm_direct(f, s, budget),
        MethodChoice::Recursive => gowers_norm_recursive_with(f, s, budget),
        MethodChoice::Fourier => {
            if s != 2 {
                return Err(Error::param("the Fourier path computes U^2 only"));
            }
            gowers_norm_u2_fourier(f)
        }
        MethodChoice::Lifted => {
            let lifted = lift_to_tensor(f, s, budget)?;
            let r = boxnorms::box_norm_with(&lifted, budget)?;
            Ok(NormResult {
                method: NormMethod::LiftedTensor,
                ..r
            })
        }
        MethodChoice::Auto => {
            if s == 2 {
                gowers_norm_u2_fourier(f)
            } else {
                gowers_norm_recursive_with(f, s, budget)
            }
        }
    }
}

/// The cube average `‖f‖_{U^s}^{2^s}` (no root), by the chosen method.
pub fn gowers_power(
    f: &GroupFunction,
    s: usize,
    choice: MethodChoice,
    budget: &Budget,
) -> Result<f64> {
    check_order(s)?;
    let n = f.group().order();
    match choice {
        MethodChoice::Direct => {
            budget.check_cost("direct U^s enumeration", powf_usize(n, s + 1))?;
            Ok(direct_power(f, s))
        }
        MethodChoice::Fourier if s == 2 => Ok(fourier_u2_power(f.group(), f.values())),
        MethodChoice::Auto if s == 2 => Ok(fourier_u2_power(f.group(), f.values())),
        MethodChoice::Lifted => {
            let r = gowers_norm_with(f, s, choice, budget)?;
            Ok(r.value.powi(1 << s))
        }
        _ => {
            budget.check_cost("recursive U^s", recursive_cost(f.group(), s))?;
            Ok(recursive_power(f, s))
        }
    }
}

/// Direct enumeration of the cube average over `(x, h) ∈ Z × Z^s`.
pub fn gowers_norm_direct(f: &GroupFunction, s: usize, budget: &Budget) -> Result<NormResult> {
    check_order(s)?;
    let n = f.group().order();
    budget.check_cost("direct U^s enumeration", powf_usize(n, s + 1))?;
    let power = direct_power(f, s);
    Ok(NormResult {
        value: root_of_power(power, (1u64 << s) as f64)?,
        method: NormMethod::DirectEnumeration,
        cost: (powf_usize(n, s + 1) * (1u64 << s) as f64) as u64,
    })
}

/// `‖f‖_{U^s}^{2^s} = E_h ‖Δ_h f‖_{U^{s-1}}^{2^{s-1}}`, bottoming out at the
/// Fourier formula for `U^2`. At `s = 2` a single derivative level is taken
/// and `‖Δ_h f‖_{U^1}^2 = (E Δ_h f)^2` closes the recursion instead.
pub fn gowers_norm_recursive(f: &GroupFunction, s: usize) -> Result<NormResult> {
    gowers_norm_recursive_with(f, s, &Budget::default())
}

pub fn gowers_norm_recursive_with(
    f: &GroupFunction,
    s: usize,
    budget: &Budget,
) -> Result<NormResult> {
    check_order(s)?;
    let cost = recursive_cost(f.group(), s);
    budget.check_cost("recursive U^s", cost)?;
    let power = recursive_power(f, s);
    Ok(NormResult {
        value: root_of_power(power, (1u64 << s) as f64)?,
        method: NormMethod::RecursiveDerivative,
        cost: cost as u64,
    })
}

/// `(Σ_ξ |f̂(ξ)|^4)^{1/4}`.
pub fn gowers_norm_u2_fourier(f: &GroupFunction) -> Result<NormResult> {
    let power = fourier_u2_power(f.group(), f.values());
    Ok(NormResult {
        value: root_of_power(power, 4.0)?,
        method: NormMethod::FourierFastPath,
        cost: dft_cost(f.group()) as u64,
    })
}

fn recursive_cost(g: &FiniteAbelianGroup, s: usize) -> f64 {
    let n = g.order();
    if s == 2 {
        powf_usize(n, 2)
    } else {
        powf_usize(n, s - 2) * (dft_cost(g) + (s - 2) as f64 * n as f64)
    }
}

pub(crate) fn fourier_u2_power(g: &FiniteAbelianGroup, values: &[f64]) -> f64 {
    let fourth: Vec<f64> = dft(g, values)
        .iter()
        .map(|c| {
            let m2 = c.norm_sqr();
            m2 * m2
        })
        .collect();
    pairwise_sum(&fourth)
}

fn derivative_values(add: &Adder, values: &[f64], h: usize) -> Vec<f64> {
    (0..values.len())
        .map(|x| values[x] * values[add.add(x, h)])
        .collect()
}

fn recursive_power(f: &GroupFunction, s: usize) -> f64 {
    let g = f.group();
    let n = g.order();
    let add = g.adder();
    let values = f.values();
    let per_shift: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|h| {
            let d = derivative_values(&add, values, h);
            if s == 2 {
                let m = mean(&d);
                m * m
            } else {
                inner_recursive_power(g, &add, &d, s - 1)
            }
        })
        .collect();
    mean(&per_shift)
}

fn inner_recursive_power(g: &FiniteAbelianGroup, add: &Adder, values: &[f64], k: usize) -> f64 {
    if k == 2 {
        return fourier_u2_power(g, values);
    }
    let mut acc = PairwiseAccumulator::new();
    for h in 0..values.len() {
        let d = derivative_values(add, values, h);
        acc.push(inner_recursive_power(g, add, &d, k - 1));
    }
    acc.mean()
}

/// Advances a base-`n` odometer; returns false once it wraps to all zeros.
#[inline]
pub(crate) fn advance(digits: &mut [usize], n: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < n {
            return true;
        }
        *d = 0;
    }
    false
}

/// Offsets `ω·h` for every `ω ∈ {0,1}^s` in mask order.
#[inline]
pub(crate) fn cube_offsets(add: &Adder, h: &[usize], out: &mut [usize]) {
    out[0] = 0;
    for (i, &hi) in h.iter().enumerate() {
        let bit = 1 << i;
        for w in 0..bit {
            out[w | bit] = add.add(out[w], hi);
        }
    }
}

fn direct_power(f: &GroupFunction, s: usize) -> f64 {
    let all: Vec<&[f64]> = vec![f.values(); 1 << s];
    let marg = marginal_values(f.group(), s, &all[1..]);
    let prods: Vec<f64> = f.values().iter().zip(&marg).map(|(a, b)| a * b).collect();
    mean(&prods)
}

/// `x ↦ E_h ∏_{ω≠0} f_ω(x + ω·h)`; `fs[ω-1]` holds `f_ω`.
pub(crate) fn marginal_values(g: &FiniteAbelianGroup, s: usize, fs: &[&[f64]]) -> Vec<f64> {
    debug_assert_eq!(fs.len() + 1, 1 << s);
    let n = g.order();
    let add = g.adder();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut h = vec![0usize; s];
            let mut offsets = vec![0usize; 1 << s];
            let mut acc = PairwiseAccumulator::new();
            loop {
                cube_offsets(&add, &h, &mut offsets);
                let mut p = 1.0;
                for (f, &o) in fs.iter().zip(&offsets[1..]) {
                    p *= f[add.add(x, o)];
                }
                acc.push(p);
                if !advance(&mut h, n) {
                    break;
                }
            }
            acc.mean()
        })
        .collect()
}

fn cube_arity(len: usize, missing_origin: bool) -> Result<usize> {
    let total = if missing_origin { len + 1 } else { len };
    if total < 2 || !total.is_power_of_two() {
        return Err(Error::input(format!(
            "a cube family needs 2^s members{}, got {len}",
            if missing_origin { " minus the origin" } else { "" }
        )));
    }
    Ok(total.trailing_zeros() as usize)
}

fn common_group(fs: &[&GroupFunction]) -> Result<FiniteAbelianGroup> {
    let first = fs
        .first()
        .ok_or_else(|| Error::input("empty function family"))?;
    for f in &fs[1..] {
        first.same_group(f)?;
    }
    Ok(first.group().clone())
}

/// `x ↦ E_{h∈Z^s} ∏_{ω≠0^s} f_ω(x + ω·h)`, where `fs[ω-1] = f_ω`.
pub fn cube_marginal(fs: &[GroupFunction]) -> Result<GroupFunction> {
    let s = cube_arity(fs.len(), true)?;
    let refs: Vec<&GroupFunction> = fs.iter().collect();
    let g = common_group(&refs)?;
    Budget::default().check_cost("cube marginal", powf_usize(g.order(), s + 1))?;
    let vals: Vec<&[f64]> = fs.iter().map(|f| f.values()).collect();
    GroupFunction::new(g.clone(), marginal_values(&g, s, &vals))
}

/// `E_{x,h} ∏_{ω∈{0,1}^s} f_ω(x + ω·h)`, where `fs[ω] = f_ω`.
pub fn cube_correlation(fs: &[GroupFunction]) -> Result<f64> {
    cube_arity(fs.len(), false)?;
    let marg = cube_marginal(&fs[1..])?;
    fs[0].inner(&marg)
}

/// The calibration function `𝒩(x) = E_h ∏_{ω≠0} ν(x + ω·h)`.
pub fn majorant_marginal(nu: &GroupFunction, s: usize) -> Result<GroupFunction> {
    check_order(s)?;
    check_majorant(nu)?;
    let fs = vec![nu.clone(); (1 << s) - 1];
    cube_marginal(&fs)
}

fn check_majorant(nu: &GroupFunction) -> Result<()> {
    match nu.values().iter().position(|&v| v < 0.0) {
        Some(i) => Err(Error::InvalidMajorant(format!(
            "ν({i}) = {} is negative",
            nu.values()[i]
        ))),
        None => Ok(()),
    }
}

/// `|E[1_A 𝒩^k] − P(A)|`.
pub fn moment_estimate(nu: &GroupFunction, s: usize, set: &[usize], k: u32) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(Error::param(format!("moment order k must be 1 or 2, got {k}")));
    }
    let calib = majorant_marginal(nu, s)?;
    let g = nu.group();
    let mut in_set = vec![false; g.order()];
    for &a in set {
        if !g.contains(a) {
            return Err(Error::InvalidElement {
                code: a,
                order: g.order(),
            });
        }
        in_set[a] = true;
    }
    let terms: Vec<f64> = calib
        .values()
        .iter()
        .zip(&in_set)
        .map(|(&c, &inside)| if inside { c.powi(k as i32) } else { 0.0 })
        .collect();
    let prob = in_set.iter().filter(|&&b| b).count() as f64 / g.order() as f64;
    Ok((mean(&terms) - prob).abs())
}

/// `‖f‖_{U^s_ℓ(Z)} = ‖f(x_1+⋯+x_s)‖_{□_ℓ(Z^s)}`.
pub fn uniformity_norm_ell(
    f: &GroupFunction,
    s: usize,
    ell: usize,
    budget: &Budget,
) -> Result<NormResult> {
    check_order(s)?;
    boxnorms::check_ell(ell)?;
    boxnorms::check_box_budget(f.group().order(), s, ell, budget)?;
    let lifted = lift_to_tensor(f, s, budget)?;
    let r = boxnorms::box_norm_ell_with(&lifted, ell, budget)?;
    Ok(NormResult {
        method: NormMethod::LiftedTensor,
        ..r
    })
}

/// `‖f‖_{cut^s(Z)}`: the cut norm of the lifted tensor `f(x_1+⋯+x_s)`.
pub fn additive_cut_norm(
    f: &GroupFunction,
    s: usize,
    mode: SearchMode,
    opts: &SearchOptions,
    budget: &Budget,
) -> Result<WeakNormEstimate<DualFamily>> {
    check_order(s)?;
    let lifted = lift_to_tensor(f, s, budget)?;
    boxnorms::cut_norm(&lifted, mode, opts, budget)
}
