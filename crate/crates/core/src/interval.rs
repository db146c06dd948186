//! Uniformity norms on intervals `[N]`, the trapezoidal cut-off `φ` on
//! `Z_{N'}` and the transfer of group decompositions back to `[N]`.
//!
//! `Z_{N'}` with `N' = 2k+1` is identified with `{-k,…,k}`; the integer `x`
//! has element code `x mod N'`, so `[N] = {1,…,N}` occupies codes `1..=N`.

use serde::{Deserialize, Serialize};

use crate::boxnorms::DualFamily;
use crate::budget::Budget;
use crate::decompose::{kvn_group, DecompositionResult, DenseModelOptions};
use crate::error::{Error, Result};
use crate::fourier::dft;
use crate::groups::{FiniteAbelianGroup, GroupFunction};
use crate::numeric::check_finite;
use crate::uniformity::{gowers_norm_with, MethodChoice, NormResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalRepr", into = "IntervalRepr")]
pub struct IntervalFunction {
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct IntervalRepr {
    n: usize,
    values: Vec<f64>,
}

impl TryFrom<IntervalRepr> for IntervalFunction {
    type Error = Error;

    fn try_from(r: IntervalRepr) -> Result<Self> {
        if r.n != r.values.len() {
            return Err(Error::input(format!(
                "interval length {} does not match {} values",
                r.n,
                r.values.len()
            )));
        }
        IntervalFunction::new(r.values)
    }
}

impl From<IntervalFunction> for IntervalRepr {
    fn from(f: IntervalFunction) -> Self {
        IntervalRepr {
            n: f.values.len(),
            values: f.values,
        }
    }
}

impl IntervalFunction {
    /// `values[i]` is the value at the point `i + 1`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("an interval function needs N ≥ 1"));
        }
        check_finite(&values)?;
        Ok(IntervalFunction { values })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        IntervalFunction::new((1..=n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sub(&self, other: &IntervalFunction) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::input("interval lengths differ"));
        }
        IntervalFunction::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }
}

/// `f̃` on `Z_{N'}`: `f` on `[N]`, zero elsewhere.
pub fn extend_by_zero(f: &IntervalFunction, n_prime: usize) -> Result<GroupFunction> {
    if n_prime <= f.len() {
        return Err(Error::param(format!(
            "modulus {n_prime} cannot hold an interval of length {}",
            f.len()
        )));
    }
    let g = FiniteAbelianGroup::cyclic(n_prime)?;
    let mut values = vec![0.0; n_prime];
    values[1..=f.len()].copy_from_slice(&f.values);
    GroupFunction::new(g, values)
}

/// `h = H` restricted to `[N]`.
pub fn restrict(h: &GroupFunction, n: usize) -> Result<IntervalFunction> {
    if !h.group().is_cyclic() || h.group().order() <= n {
        return Err(Error::input("restriction needs a cyclic group larger than N"));
    }
    IntervalFunction::new(h.values()[1..=n].to_vec())
}

/// Smallest prime above `2N`, a modulus at which the interval norm is intrinsic.
pub fn default_modulus(n: usize) -> usize {
    next_prime(2 * n as u64 + 1) as usize
}

/// `‖f̃‖_{U^s(Z_{N'})} / ‖1_{[N]}‖_{U^s(Z_{N'})}`; independent of `N' > 2N`.
pub fn interval_norm(f: &IntervalFunction, s: usize, n_prime: usize) -> Result<NormResult> {
    interval_norm_with(f, s, n_prime, &Budget::default())
}

pub fn interval_norm_with(
    f: &IntervalFunction,
    s: usize,
    n_prime: usize,
    budget: &Budget,
) -> Result<NormResult> {
    let n = f.len();
    if n_prime <= 2 * n {
        return Err(Error::param(format!(
            "modulus N' = {n_prime} must exceed 2N = {}",
            2 * n
        )));
    }
    let num = gowers_norm_with(&extend_by_zero(f, n_prime)?, s, MethodChoice::Auto, budget)?;
    let den = gowers_norm_with(&indicator_of_interval(n, n_prime)?, s, MethodChoice::Auto, budget)?;
    Ok(NormResult {
        value: num.value / den.value,
        method: num.method,
        cost: num.cost + den.cost,
    })
}

fn indicator_of_interval(n: usize, n_prime: usize) -> Result<GroupFunction> {
    extend_by_zero(&IntervalFunction::new(vec![1.0; n])?, n_prime)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller–Rabin; the witness set is exact below `3.4·10^14`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 7] = [2, 3, 5, 7, 11, 13, 17];
    if n < 2 {
        return false;
    }
    for p in WITNESSES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    'witness: for a in WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

pub fn next_prime(from: u64) -> u64 {
    (from..).find(|&p| is_prime(p)).expect("primes are unbounded")
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CutoffOptions {
    /// Replaces `α = (ε/(32C))^{2^s}`.
    pub alpha: Option<f64>,
    /// Accept a prime beyond `2CN` when none lies in `[CN, 2CN]`.
    pub widen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub n: usize,
    pub n_prime: usize,
    pub alpha: f64,
    /// Ramp length `⌊αN⌋`.
    pub l: usize,
    /// `L`, with `2L` the least even integer ≥ `N`.
    pub big_l: usize,
    pub values: GroupFunction,
}

impl CutoffProfile {
    /// `φ` at the integer `x ∈ {-k,…,k}`.
    pub fn at(&self, x: i64) -> f64 {
        self.values.values()[x.rem_euclid(self.n_prime as i64) as usize]
    }

    pub fn half_width(&self) -> i64 {
        (self.n_prime / 2) as i64
    }
}

/// `α = (ε/(32C))^{2^s}`.
pub fn strict_alpha(c: f64, epsilon: f64, s: usize) -> f64 {
    (epsilon / (32.0 * c)).powi(1 << s)
}

fn check_cutoff_params(c: f64, epsilon: f64, s: usize) -> Result<()> {
    if c.is_nan() || c < 20.0 || c.is_infinite() {
        return Err(Error::param(format!("C must be ≥ 20, got {c}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::param(format!("ε must lie in (0, 1], got {epsilon}")));
    }
    if s < 2 {
        return Err(Error::param(format!("s must be ≥ 2, got {s}")));
    }
    Ok(())
}

fn resolve_alpha(c: f64, epsilon: f64, s: usize, opts: &CutoffOptions) -> Result<f64> {
    match opts.alpha {
        Some(a) if a > 0.0 && a <= 1.0 => Ok(a),
        Some(a) => Err(Error::param(format!("α must lie in (0, 1], got {a}"))),
        None => Ok(strict_alpha(c, epsilon, s)),
    }
}

/// Smallest prime `N' ≥ CN`, rejected beyond `2CN` unless widening is allowed.
pub fn find_modulus(n: usize, c: f64, widen: bool) -> Result<usize> {
    let lo = (c * n as f64).ceil() as u64;
    let hi = (2.0 * c * n as f64).floor() as u64;
    let p = next_prime(lo.max(2));
    if p > hi && !widen {
        return Err(Error::SearchFailure(format!("no prime in [{lo}, {hi}]")));
    }
    Ok(p as usize)
}

pub fn build_cutoff(
    n: usize,
    c: f64,
    epsilon: f64,
    s: usize,
    opts: &CutoffOptions,
) -> Result<CutoffProfile> {
    check_cutoff_params(c, epsilon, s)?;
    let alpha = resolve_alpha(c, epsilon, s, opts)?;
    check_size(n, alpha)?;
    let n_prime = find_modulus(n, c, opts.widen)?;
    cutoff_on(n, n_prime, alpha)
}

fn check_size(n: usize, alpha: f64) -> Result<()> {
    let n0 = (2.0 / alpha).ceil();
    if (n as f64) < n0 {
        return Err(Error::TooSmall {
            n: n as u64,
            n0: if n0 > u64::MAX as f64 { u64::MAX } else { n0 as u64 },
        });
    }
    Ok(())
}

fn cutoff_on(n: usize, n_prime: usize, alpha: f64) -> Result<CutoffProfile> {
    let l = (alpha * n as f64).floor() as usize;
    let big_l = n.div_ceil(2);
    if l < 2 || l > big_l {
        return Err(Error::param(format!(
            "ramp length l = {l} must satisfy 2 ≤ l ≤ L = {big_l}"
        )));
    }
    if n_prime % 2 == 0 || n_prime / 2 < 2 * big_l + l {
        return Err(Error::param(format!(
            "modulus {n_prime} is too small for the cut-off support"
        )));
    }
    let (l_i, two_l) = (l as i64, 2 * big_l as i64);
    let k = (n_prime / 2) as i64;
    let group = FiniteAbelianGroup::cyclic(n_prime)?;
    let mut values = vec![0.0; n_prime];
    for x in -k..=k {
        let v = if (-l_i + 1..=1).contains(&x) {
            (x + l_i - 1) as f64 / l as f64
        } else if (1..=two_l).contains(&x) {
            1.0
        } else if (two_l..=two_l + l_i).contains(&x) {
            (two_l + l_i - x) as f64 / l as f64
        } else {
            0.0
        };
        values[x.rem_euclid(n_prime as i64) as usize] = v;
    }
    Ok(CutoffProfile {
        n,
        n_prime,
        alpha,
        l,
        big_l,
        values: GroupFunction::new(group, values)?,
    })
}

/// `(‖φ̂‖_{ℓ1}, 4L/l)`; errors if the first exceeds the second.
pub fn cutoff_fourier_bound(profile: &CutoffProfile) -> Result<(f64, f64)> {
    let hat = dft(profile.values.group(), profile.values.values());
    let l1: f64 = crate::numeric::pairwise_sum(&hat.iter().map(|c| c.norm()).collect::<Vec<_>>());
    let bound = 4.0 * profile.big_l as f64 / profile.l as f64;
    if l1 > bound + 1e-9 {
        return Err(Error::InequalityViolated(format!(
            "‖φ̂‖_ℓ1 = {l1} exceeds 4L/l = {bound}"
        )));
    }
    Ok((l1, bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransferOptions {
    pub cutoff: CutoffOptions,
    pub dense: DenseModelOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub n: usize,
    pub n_prime: usize,
    pub alpha: f64,
    pub l: usize,
    pub big_l: usize,
    pub h: IntervalFunction,
    pub decomposition: DecompositionResult<GroupFunction, DualFamily>,
    /// `(4N/l)·‖f̃ − H‖_{U^s(Z_{N'})}`.
    pub fourier_term: f64,
    /// `(3l/(CN))^{1/2^s}`.
    pub truncation_term: f64,
    /// `‖1_{[N]}‖_{U^s(Z_{N'})}`.
    pub normalizer: f64,
    /// `2C·(fourier_term + truncation_term)`.
    pub assembled_bound: f64,
    /// `(fourier_term + truncation_term) / normalizer`.
    pub measured_bound: f64,
    /// `‖f − h‖_{U^s[N]}`.
    pub measured_residual: f64,
    /// `max |f̃ − h̃ − (f̃−H)φ − H(φ−1_{[N]})|`.
    pub identity_error: f64,
}

/// Decomposes `f̃` on `Z_{N'}` against `ν` and restricts the model to `[N]`.
pub fn transfer_kvn(
    f: &IntervalFunction,
    nu: &GroupFunction,
    s: usize,
    c: f64,
    epsilon: f64,
    opts: &TransferOptions,
) -> Result<TransferResult> {
    check_cutoff_params(c, epsilon, s)?;
    let n = f.len();
    let n_prime = nu.group().order();
    if !nu.group().is_cyclic() || !is_prime(n_prime as u64) {
        return Err(Error::param(format!("ν must live on Z_N' with N' prime, got order {n_prime}")));
    }
    let (lo, hi) = (c * n as f64, 2.0 * c * n as f64);
    if (n_prime as f64) < lo || ((n_prime as f64) > hi && !opts.cutoff.widen) {
        return Err(Error::param(format!("N' = {n_prime} lies outside [CN, 2CN] = [{lo}, {hi}]")));
    }
    let alpha = resolve_alpha(c, epsilon, s, &opts.cutoff)?;
    check_size(n, alpha)?;
    let profile = cutoff_on(n, n_prime, alpha)?;
    cutoff_fourier_bound(&profile)?;

    let f_ext = extend_by_zero(f, n_prime)?;
    let decomposition = kvn_group(&f_ext, nu, s, epsilon, &opts.dense)?;
    let big_h = &decomposition.model;
    let h = restrict(big_h, n)?;
    let h_ext = extend_by_zero(&h, n_prime)?;
    let ind = indicator_of_interval(n, n_prime)?;

    let phi = profile.values.values();
    let identity_error = (0..n_prime)
        .map(|x| {
            let lhs = f_ext.values()[x] - h_ext.values()[x];
            let rhs = (f_ext.values()[x] - big_h.values()[x]) * phi[x]
                + big_h.values()[x] * (phi[x] - ind.values()[x]);
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max);

    let budget = opts.dense.budget;
    let norm = |g: &GroupFunction| -> Result<f64> {
        Ok(gowers_norm_with(g, s, MethodChoice::Auto, &budget)?.value)
    };
    let fourier_term = 4.0 * n as f64 / profile.l as f64 * norm(&f_ext.sub(big_h)?)?;
    let truncation_term = (3.0 * profile.l as f64 / (c * n as f64)).powf(1.0 / (1u64 << s) as f64);
    let normalizer = norm(&ind)?;
    if normalizer < n as f64 / n_prime as f64 - 1e-12 {
        return Err(Error::InequalityViolated(format!(
            "‖1_[N]‖ = {normalizer} is below N/N' = {}",
            n as f64 / n_prime as f64
        )));
    }
    let assembled_bound = 2.0 * c * (fourier_term + truncation_term);
    let measured_bound = (fourier_term + truncation_term) / normalizer;
    let measured_residual = interval_norm_with(&f.sub(&h)?, s, n_prime, &budget)?.value;
    if measured_residual > assembled_bound + 1e-9 {
        return Err(Error::InequalityViolated(format!(
            "‖f − h‖_U^s[N] = {measured_residual} exceeds the assembled bound {assembled_bound}"
        )));
    }
    Ok(TransferResult {
        n,
        n_prime,
        alpha,
        l: profile.l,
        big_l: profile.big_l,
        h,
        decomposition,
        fourier_term,
        truncation_term,
        normalizer,
        assembled_bound,
        measured_bound,
        measured_residual,
        identity_error,
    })
}
