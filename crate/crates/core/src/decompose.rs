//! Dense models by iterative reweighting and the Koopman–von Neumann
//! decompositions built on them.
//!
//! Starting from `w = clamp(g)`, each step asks a dual oracle for the test
//! function `D` best correlated with `g − w` and moves `w` by `|c|/2` along
//! `sign(c)·D`, clamping back into `[0,1]`. Since `E[(g−w)^2]` drops by at
//! least `c²/4` per step, `⌈16(1+E[ν])²/ε²⌉` steps are enough.

use serde::{Deserialize, Serialize};

use crate::boxnorms::{self, cut_norm, dual_kernel, DualFamily, TensorFunction};
use crate::budget::Budget;
use crate::dualsearch::best_dual;
use crate::error::{Error, Result};
use crate::groups::GroupFunction;
use crate::numeric::mean;
use crate::search::{SearchMode, SearchOptions};
use crate::uniformity::{gowers_norm_with, MethodChoice};

const RANGE_SLACK: f64 = 1e-12;

/// A function stored as a dense array of values.
pub trait Dense: Clone + Sized {
    fn values(&self) -> &[f64];
    fn with_values(&self, values: Vec<f64>) -> Result<Self>;
}

impl Dense for GroupFunction {
    fn values(&self) -> &[f64] {
        GroupFunction::values(self)
    }

    fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        GroupFunction::new(self.group().clone(), values)
    }
}

impl Dense for TensorFunction {
    fn values(&self) -> &[f64] {
        TensorFunction::values(self)
    }

    fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        TensorFunction::new(self.vertex_count(), self.arity(), values)
    }
}

fn zip<D: Dense>(a: &D, b: &D, f: impl Fn(f64, f64) -> f64) -> Result<D> {
    if a.values().len() != b.values().len() {
        return Err(Error::input("functions live on different domains"));
    }
    a.with_values(a.values().iter().zip(b.values()).map(|(&x, &y)| f(x, y)).collect())
}

/// Output of one oracle call.
#[derive(Debug, Clone)]
pub struct DualStep<D, W> {
    /// The test function, with values in `[-1, 1]`.
    pub dual: D,
    /// `E[residual · dual]`.
    pub correlation: f64,
    pub witness: W,
    /// True when `correlation` is the exact supremum over the class.
    pub exact: bool,
}

/// Finds a test function in the dual class that nearly maximizes the
/// correlation with a residual.
pub trait DualOracle {
    type Domain: Dense;
    type Witness: Clone;

    fn best(&self, residual: &Self::Domain) -> Result<DualStep<Self::Domain, Self::Witness>>;
}

/// Search settings for the dual oracles. `mode = None` runs the exhaustive
/// search when its sign budget allows and falls back to alternating otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DenseModelOptions {
    pub mode: Option<SearchMode>,
    pub search: SearchOptions,
    pub budget: Budget,
    /// Overrides the default iteration cap.
    pub max_iterations: Option<usize>,
}

fn with_fallback<T>(
    mode: Option<SearchMode>,
    run: impl Fn(SearchMode) -> Result<T>,
) -> Result<(T, bool)> {
    match mode {
        Some(m) => Ok((run(m)?, m == SearchMode::Exhaustive)),
        None => match run(SearchMode::Exhaustive) {
            Ok(t) => Ok((t, true)),
            Err(Error::BudgetExceeded { .. }) => Ok((run(SearchMode::Alternating)?, false)),
            Err(e) => Err(e),
        },
    }
}

/// Duals on a group coming from additive cut-norm families on `Z^s`.
#[derive(Debug, Clone, Copy)]
pub struct GroupCutOracle {
    pub s: usize,
    pub mode: Option<SearchMode>,
    pub search: SearchOptions,
    pub budget: Budget,
}

impl DualOracle for GroupCutOracle {
    type Domain = GroupFunction;
    type Witness = DualFamily;

    fn best(&self, residual: &GroupFunction) -> Result<DualStep<GroupFunction, DualFamily>> {
        let ((dual, correlation), exact) = with_fallback(self.mode, |m| {
            best_dual(residual, self.s, m, &self.search, &self.budget)
        })?;
        Ok(DualStep {
            dual: dual.realized,
            correlation,
            witness: dual.family,
            exact,
        })
    }
}

/// Duals on `V^s` given by the cut-norm kernels.
#[derive(Debug, Clone, Copy)]
pub struct TensorCutOracle {
    pub mode: Option<SearchMode>,
    pub search: SearchOptions,
    pub budget: Budget,
}

impl DualOracle for TensorCutOracle {
    type Domain = TensorFunction;
    type Witness = DualFamily;

    fn best(&self, residual: &TensorFunction) -> Result<DualStep<TensorFunction, DualFamily>> {
        let (est, exact) = with_fallback(self.mode, |m| {
            cut_norm(residual, m, &self.search, &self.budget)
        })?;
        let kernel = dual_kernel(&est.witness)?;
        Ok(DualStep {
            correlation: est.lower_bound,
            dual: kernel,
            witness: est.witness,
            exact,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Whole,
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub part: Part,
    pub step: usize,
    pub correlation: f64,
    /// Zero on the terminating evaluation.
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentRun {
    pub part: Part,
    pub gap: f64,
    pub converged: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult<M, W> {
    /// `w ∈ [0,1]` for dense models, `h ∈ [-1,1]` for decompositions.
    pub model: M,
    /// Best dual correlation with `input − model` at termination.
    pub residual_cut: f64,
    /// True when `residual_cut` came from an exhaustive search.
    pub residual_cut_exact: bool,
    /// Sum of the component gaps (decompositions only).
    pub residual_cut_bound: Option<f64>,
    /// `‖input − model‖` in the Gowers (group) or box (tensor) norm, when affordable.
    pub residual_gowers: Option<f64>,
    pub converged: bool,
    pub epsilon: f64,
    pub t_max: usize,
    pub iterations: Vec<IterationRecord>,
    pub components: Vec<ComponentRun>,
    pub witness: W,
    /// Whether `|f − h|/2 ≤ (ν+1)/2` pointwise (group decompositions only).
    pub renormalized_majorant_ok: Option<bool>,
}

/// `⌈16(1+E[ν])²/ε²⌉`.
pub fn default_t_max(mean_nu: f64, epsilon: f64) -> usize {
    (16.0 * (1.0 + mean_nu).powi(2) / (epsilon * epsilon)).ceil() as usize
}

/// `clamp(w + (|c|/2)·sign(c)·D, 0, 1)`; any `D` with `|D| ≤ 1` is accepted.
pub fn reweight_step<D: Dense>(w: &D, dual: &D, correlation: f64) -> Result<D> {
    if dual.values().iter().any(|v| v.abs() > 1.0 + RANGE_SLACK) {
        return Err(Error::input("dual function leaves [-1, 1]"));
    }
    let gamma = correlation / 2.0;
    zip(w, dual, |a, d| (a + gamma * d).clamp(0.0, 1.0))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!("ε must be positive, got {epsilon}")))
    }
}

fn check_nu<D: Dense>(nu: &D) -> Result<()> {
    if nu.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidMajorant("ν takes negative values".into()));
    }
    Ok(())
}

struct EngineRun<D, W> {
    model: D,
    gap: f64,
    exact: bool,
    converged: bool,
    trace: Vec<IterationRecord>,
    witness: W,
}

fn run_engine<O: DualOracle>(
    g: &O::Domain,
    epsilon: f64,
    oracle: &O,
    t_max: usize,
    part: Part,
) -> Result<EngineRun<O::Domain, O::Witness>> {
    let mut w = g.with_values(g.values().iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
    let mut trace = Vec::new();
    let mut best: Option<EngineRun<O::Domain, O::Witness>> = None;
    for step in 0..t_max.max(1) {
        let residual = zip(g, &w, |a, b| a - b)?;
        let dual = oracle.best(&residual)?;
        let c = dual.correlation;
        let done = c.abs() <= epsilon;
        trace.push(IterationRecord {
            part,
            step,
            correlation: c,
            step_size: if done { 0.0 } else { c.abs() / 2.0 },
        });
        if best.as_ref().is_none_or(|b| c.abs() < b.gap) {
            best = Some(EngineRun {
                model: w.clone(),
                gap: c.abs(),
                exact: dual.exact,
                converged: done,
                trace: Vec::new(),
                witness: dual.witness.clone(),
            });
        }
        if done {
            break;
        }
        w = reweight_step(&w, &dual.dual, c)?;
        debug_assert!(w.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let mut run = best.expect("at least one evaluation");
    run.trace = trace;
    Ok(run)
}

fn check_dense_inputs<D: Dense>(g: &D, nu: &D, epsilon: f64) -> Result<()> {
    check_epsilon(epsilon)?;
    check_nu(nu)?;
    if g.values().len() != nu.values().len() {
        return Err(Error::input("g and ν live on different domains"));
    }
    for (i, (&a, &b)) in g.values().iter().zip(nu.values()).enumerate() {
        if a < -RANGE_SLACK || a > b + RANGE_SLACK {
            return Err(Error::PreconditionViolation(format!(
                "0 ≤ g ≤ ν fails at index {i}: g = {a}, ν = {b}"
            )));
        }
    }
    Ok(())
}

fn t_max_for<D: Dense>(nu: &D, epsilon: f64, opts: &DenseModelOptions) -> usize {
    opts.max_iterations
        .unwrap_or_else(|| default_t_max(mean(nu.values()), epsilon))
}

fn optional_norm(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::BudgetExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

type OracleRun<O> = EngineRun<<O as DualOracle>::Domain, <O as DualOracle>::Witness>;

fn dense_generic<O: DualOracle>(
    g: &O::Domain,
    nu: &O::Domain,
    epsilon: f64,
    oracle: &O,
    opts: &DenseModelOptions,
) -> Result<(OracleRun<O>, usize)> {
    check_dense_inputs(g, nu, epsilon)?;
    let t_max = t_max_for(nu, epsilon, opts);
    Ok((run_engine(g, epsilon, oracle, t_max, Part::Whole)?, t_max))
}

/// A `[0,1]`-valued `w` whose additive cut distance to `g` is at most `ε`
/// when the run converges.
pub fn dense_model(
    g: &GroupFunction,
    nu: &GroupFunction,
    s: usize,
    epsilon: f64,
    opts: &DenseModelOptions,
) -> Result<DecompositionResult<GroupFunction, DualFamily>> {
    g.same_group(nu)?;
    let oracle = group_oracle(s, opts);
    let (run, t_max) = dense_generic(g, nu, epsilon, &oracle, opts)?;
    let residual = g.sub(&run.model)?;
    let residual_gowers = optional_norm(
        gowers_norm_with(&residual, s, MethodChoice::Auto, &opts.budget).map(|r| r.value),
    )?;
    Ok(DecompositionResult {
        model: run.model,
        residual_cut: run.gap,
        residual_cut_exact: run.exact,
        residual_cut_bound: None,
        residual_gowers,
        converged: run.converged,
        epsilon,
        t_max,
        iterations: run.trace,
        components: Vec::new(),
        witness: run.witness,
        renormalized_majorant_ok: None,
    })
}

/// Dense model on `V^s` against the cut-norm duals.
pub fn dense_model_tensor(
    g: &TensorFunction,
    nu: &TensorFunction,
    epsilon: f64,
    opts: &DenseModelOptions,
) -> Result<DecompositionResult<TensorFunction, DualFamily>> {
    g.same_shape(nu)?;
    let oracle = tensor_oracle(opts);
    let (run, t_max) = dense_generic(g, nu, epsilon, &oracle, opts)?;
    let residual = g.sub(&run.model)?;
    let residual_gowers =
        optional_norm(boxnorms::box_norm_with(&residual, &opts.budget).map(|r| r.value))?;
    Ok(DecompositionResult {
        model: run.model,
        residual_cut: run.gap,
        residual_cut_exact: run.exact,
        residual_cut_bound: None,
        residual_gowers,
        converged: run.converged,
        epsilon,
        t_max,
        iterations: run.trace,
        components: Vec::new(),
        witness: run.witness,
        renormalized_majorant_ok: None,
    })
}

fn group_oracle(s: usize, opts: &DenseModelOptions) -> GroupCutOracle {
    GroupCutOracle {
        s,
        mode: opts.mode,
        search: opts.search,
        budget: opts.budget,
    }
}

fn tensor_oracle(opts: &DenseModelOptions) -> TensorCutOracle {
    TensorCutOracle {
        mode: opts.mode,
        search: opts.search,
        budget: opts.budget,
    }
}

struct Split<D, W> {
    model: D,
    bound: f64,
    converged: bool,
    t_max: usize,
    trace: Vec<IterationRecord>,
    components: Vec<ComponentRun>,
    final_step: DualStep<D, W>,
}

fn kvn_generic<O: DualOracle>(
    f: &O::Domain,
    nu: &O::Domain,
    epsilon: f64,
    oracle: &O,
    opts: &DenseModelOptions,
) -> Result<Split<O::Domain, O::Witness>> {
    check_epsilon(epsilon)?;
    check_nu(nu)?;
    if f.values().len() != nu.values().len() {
        return Err(Error::input("f and ν live on different domains"));
    }
    for (i, (&a, &b)) in f.values().iter().zip(nu.values()).enumerate() {
        if a.abs() > b + RANGE_SLACK {
            return Err(Error::PreconditionViolation(format!(
                "|f| ≤ ν fails at index {i}: f = {a}, ν = {b}"
            )));
        }
    }
    let t_max = t_max_for(nu, epsilon, opts);
    let plus = f.with_values(f.values().iter().map(|&v| v.max(0.0)).collect())?;
    let minus = f.with_values(f.values().iter().map(|&v| (-v).max(0.0)).collect())?;
    // Parts are capped at ν so rounding in |f| ≤ ν + slack cannot trip the engine.
    let plus = zip(&plus, nu, f64::min)?;
    let minus = zip(&minus, nu, f64::min)?;
    let rp = run_engine(&plus, epsilon, oracle, t_max, Part::Positive)?;
    let rm = run_engine(&minus, epsilon, oracle, t_max, Part::Negative)?;
    let model = zip(&rp.model, &rm.model, |a, b| a - b)?;
    let residual = zip(f, &model, |a, b| a - b)?;
    let final_step = oracle.best(&residual)?;
    let components = vec![
        ComponentRun {
            part: Part::Positive,
            gap: rp.gap,
            converged: rp.converged,
            steps: rp.trace.len(),
        },
        ComponentRun {
            part: Part::Negative,
            gap: rm.gap,
            converged: rm.converged,
            steps: rm.trace.len(),
        },
    ];
    let mut trace = rp.trace;
    trace.extend(rm.trace);
    Ok(Split {
        model,
        bound: rp.gap + rm.gap,
        converged: rp.converged && rm.converged,
        t_max,
        trace,
        components,
        final_step,
    })
}

/// `h: Z → [-1,1]` with `f − h` small in the additive cut norm, via dense
/// models for `f_+` and `f_-`.
pub fn kvn_group(
    f: &GroupFunction,
    nu: &GroupFunction,
    s: usize,
    epsilon: f64,
    opts: &DenseModelOptions,
) -> Result<DecompositionResult<GroupFunction, DualFamily>> {
    f.same_group(nu)?;
    let oracle = group_oracle(s, opts);
    let split = kvn_generic(f, nu, epsilon, &oracle, opts)?;
    let residual = f.sub(&split.model)?;
    let residual_gowers = optional_norm(
        gowers_norm_with(&residual, s, MethodChoice::Auto, &opts.budget).map(|r| r.value),
    )?;
    let renormalized_ok = residual
        .values()
        .iter()
        .zip(nu.values())
        .all(|(&r, &v)| r.abs() / 2.0 <= (v + 1.0) / 2.0 + RANGE_SLACK);
    Ok(DecompositionResult {
        model: split.model,
        residual_cut: split.final_step.correlation,
        residual_cut_exact: split.final_step.exact,
        residual_cut_bound: Some(split.bound),
        residual_gowers,
        converged: split.converged,
        epsilon,
        t_max: split.t_max,
        iterations: split.trace,
        components: split.components,
        witness: split.final_step.witness,
        renormalized_majorant_ok: Some(renormalized_ok),
    })
}

/// `H: V^s → [-1,1]` with `F − H` small in the cut norm.
pub fn kvn_tensor(
    f: &TensorFunction,
    nu: &TensorFunction,
    epsilon: f64,
    opts: &DenseModelOptions,
) -> Result<DecompositionResult<TensorFunction, DualFamily>> {
    f.same_shape(nu)?;
    let oracle = tensor_oracle(opts);
    let split = kvn_generic(f, nu, epsilon, &oracle, opts)?;
    let residual = f.sub(&split.model)?;
    let residual_gowers =
        optional_norm(boxnorms::box_norm_with(&residual, &opts.budget).map(|r| r.value))?;
    Ok(DecompositionResult {
        model: split.model,
        residual_cut: split.final_step.correlation,
        residual_cut_exact: split.final_step.exact,
        residual_cut_bound: Some(split.bound),
        residual_gowers,
        converged: split.converged,
        epsilon,
        t_max: split.t_max,
        iterations: split.trace,
        components: split.components,
        witness: split.final_step.witness,
        renormalized_majorant_ok: None,
    })
}

/// `|E[(ν−1)·F_1⋯F_k]|` for `1 ≤ k ≤ 3` test functions.
pub fn product_deviation(nu: &GroupFunction, duals: &[GroupFunction]) -> Result<f64> {
    if duals.is_empty() || duals.len() > 3 {
        return Err(Error::param(format!(
            "between 1 and 3 duals are supported, got {}",
            duals.len()
        )));
    }
    let mut prod = nu.map(|v| v - 1.0)?;
    for d in duals {
        prod = prod.mul(d)?;
    }
    Ok(prod.average().abs())
}
