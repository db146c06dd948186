//! Finite abelian groups as products of cyclic groups, and real-valued
//! functions on them.
//!
//! Elements are encoded as mixed-radix integers in `[0, order)` with the last
//! cyclic factor varying fastest. All averages use the uniform probability
//! measure on the group.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{check_finite, mean, pairwise_sum};

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GroupRepr", into = "GroupRepr")]
pub struct FiniteAbelianGroup {
    factors: Vec<usize>,
    strides: Vec<usize>,
    order: usize,
}

#[derive(Serialize, Deserialize)]
struct GroupRepr {
    factors: Vec<usize>,
}

impl TryFrom<GroupRepr> for FiniteAbelianGroup {
    type Error = Error;

    fn try_from(repr: GroupRepr) -> Result<Self> {
        FiniteAbelianGroup::new(repr.factors)
    }
}

impl From<FiniteAbelianGroup> for GroupRepr {
    fn from(g: FiniteAbelianGroup) -> Self {
        GroupRepr { factors: g.factors }
    }
}

impl fmt::Debug for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.factors.iter().map(|n| format!("Z_{n}")).collect();
        write!(f, "{}", parts.join("×"))
    }
}

impl FiniteAbelianGroup {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::param("a group needs at least one cyclic factor"));
        }
        if factors.contains(&0) {
            return Err(Error::param("cyclic factor orders must be at least 1"));
        }
        let mut order: usize = 1;
        for &n in &factors {
            order = order
                .checked_mul(n)
                .ok_or_else(|| Error::param("group order overflows usize"))?;
        }
        let mut strides = vec![1; factors.len()];
        for i in (0..factors.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * factors[i + 1];
        }
        Ok(FiniteAbelianGroup {
            factors,
            strides,
            order,
        })
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn is_cyclic(&self) -> bool {
        self.factors.len() == 1
    }

    pub fn zero(&self) -> usize {
        0
    }

    pub fn contains(&self, code: usize) -> bool {
        code < self.order
    }

    fn check(&self, code: usize) -> Result<()> {
        if self.contains(code) {
            Ok(())
        } else {
            Err(Error::InvalidElement {
                code,
                order: self.order,
            })
        }
    }

    pub fn decode(&self, code: usize) -> Result<Vec<usize>> {
        self.check(code)?;
        Ok(self
            .factors
            .iter()
            .zip(&self.strides)
            .map(|(&n, &stride)| (code / stride) % n)
            .collect())
    }

    /// Encodes a coordinate tuple, reducing each coordinate modulo its factor.
    pub fn encode(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.factors.len() {
            return Err(Error::input(format!(
                "expected {} coordinates, got {}",
                self.factors.len(),
                coords.len()
            )));
        }
        Ok(coords
            .iter()
            .zip(&self.factors)
            .zip(&self.strides)
            .map(|((&c, &n), &stride)| (c % n) * stride)
            .sum())
    }

    pub fn add(&self, a: usize, b: usize) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add_unchecked(a, b))
    }

    pub fn neg(&self, a: usize) -> Result<usize> {
        self.check(a)?;
        Ok(self.neg_unchecked(a))
    }

    pub fn sub(&self, a: usize, b: usize) -> Result<usize> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.add_unchecked(a, self.neg_unchecked(b)))
    }

    #[inline]
    pub(crate) fn add_unchecked(&self, a: usize, b: usize) -> usize {
        if self.factors.len() == 1 {
            let s = a + b;
            return if s >= self.order { s - self.order } else { s };
        }
        let mut out = 0;
        for (&n, &stride) in self.factors.iter().zip(&self.strides) {
            let s = (a / stride) % n + (b / stride) % n;
            out += if s >= n { s - n } else { s } * stride;
        }
        out
    }

    #[inline]
    pub(crate) fn neg_unchecked(&self, a: usize) -> usize {
        let mut out = 0;
        for (&n, &stride) in self.factors.iter().zip(&self.strides) {
            let c = (a / stride) % n;
            out += if c == 0 { 0 } else { n - c } * stride;
        }
        out
    }

    /// Multiplies an element by an integer scalar.
    pub fn scale(&self, k: usize, a: usize) -> Result<usize> {
        let coords = self.decode(a)?;
        let scaled: Vec<usize> = coords
            .iter()
            .zip(&self.factors)
            .map(|(&c, &n)| ((c as u128 * k as u128) % n as u128) as usize)
            .collect();
        self.encode(&scaled)
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    pub(crate) fn adder(&self) -> Adder {
        Adder::new(self)
    }
}

/// Addition kernel chosen once per computation: plain modular addition for
/// cyclic groups, a lookup table for small products, digit arithmetic otherwise.
pub(crate) enum Adder {
    Cyclic(usize),
    Table { n: usize, table: Vec<u32> },
    General(FiniteAbelianGroup),
}

const ADD_TABLE_MAX_ORDER: usize = 2048;

impl Adder {
    fn new(g: &FiniteAbelianGroup) -> Self {
        if g.is_cyclic() {
            Adder::Cyclic(g.order())
        } else if g.order() <= ADD_TABLE_MAX_ORDER {
            let n = g.order();
            let mut table = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    table.push(g.add_unchecked(a, b) as u32);
                }
            }
            Adder::Table { n, table }
        } else {
            Adder::General(g.clone())
        }
    }

    #[inline]
    pub(crate) fn add(&self, a: usize, b: usize) -> usize {
        match self {
            Adder::Cyclic(n) => {
                let s = a + b;
                if s >= *n {
                    s - n
                } else {
                    s
                }
            }
            Adder::Table { n, table } => table[a * n + b] as usize,
            Adder::General(g) => g.add_unchecked(a, b),
        }
    }
}

/// A vertex `ω` of the discrete cube `{0,1}^s` together with a shift vector
/// `h ∈ Z^s`; the cube point attached to a base `x` is `x + ω·h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeIndex {
    omega: Vec<u8>,
    shift: Vec<usize>,
}

impl CubeIndex {
    pub fn new(omega: Vec<u8>, shift: Vec<usize>) -> Result<Self> {
        if omega.len() != shift.len() {
            return Err(Error::input("omega and shift must have the same length"));
        }
        if omega.iter().any(|&b| b > 1) {
            return Err(Error::input("omega coordinates must be 0 or 1"));
        }
        Ok(CubeIndex { omega, shift })
    }

    /// Builds ω from the bits of `mask` (bit i is coordinate i).
    pub fn from_mask(s: usize, mask: usize, shift: Vec<usize>) -> Result<Self> {
        let omega = (0..s).map(|i| ((mask >> i) & 1) as u8).collect();
        Self::new(omega, shift)
    }

    pub fn arity(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[u8] {
        &self.omega
    }

    pub fn shift(&self) -> &[usize] {
        &self.shift
    }

    /// `ω·h = Σ ω_i h_i`.
    pub fn dot(&self, group: &FiniteAbelianGroup) -> Result<usize> {
        let mut acc = group.zero();
        for (&w, &h) in self.omega.iter().zip(&self.shift) {
            if w == 1 {
                acc = group.add(acc, h)?;
            }
        }
        Ok(acc)
    }

    pub fn point(&self, group: &FiniteAbelianGroup, x: usize) -> Result<usize> {
        group.add(x, self.dot(group)?)
    }
}

/// A real-valued function on a finite abelian group, stored densely in element
/// code order.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GroupFunctionRepr", into = "GroupFunctionRepr")]
pub struct GroupFunction {
    group: FiniteAbelianGroup,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GroupFunctionRepr {
    group: FiniteAbelianGroup,
    values: Vec<f64>,
}

impl TryFrom<GroupFunctionRepr> for GroupFunction {
    type Error = Error;

    fn try_from(r: GroupFunctionRepr) -> Result<Self> {
        GroupFunction::new(r.group, r.values)
    }
}

impl From<GroupFunction> for GroupFunctionRepr {
    fn from(f: GroupFunction) -> Self {
        GroupFunctionRepr {
            group: f.group,
            values: f.values,
        }
    }
}

impl fmt::Debug for GroupFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupFunction")
            .field("group", &self.group)
            .field("values", &self.values)
            .finish()
    }
}

impl GroupFunction {
    pub fn new(group: FiniteAbelianGroup, values: Vec<f64>) -> Result<Self> {
        if values.len() != group.order() {
            return Err(Error::input(format!(
                "{} values supplied for a group of order {}",
                values.len(),
                group.order()
            )));
        }
        check_finite(&values)?;
        Ok(GroupFunction { group, values })
    }

    pub fn constant(group: &FiniteAbelianGroup, c: f64) -> Result<Self> {
        Self::new(group.clone(), vec![c; group.order()])
    }

    pub fn zeros(group: &FiniteAbelianGroup) -> Self {
        GroupFunction {
            group: group.clone(),
            values: vec![0.0; group.order()],
        }
    }

    pub fn from_fn(group: &FiniteAbelianGroup, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(group.clone(), group.elements().map(f).collect())
    }

    pub fn indicator(group: &FiniteAbelianGroup, set: &[usize]) -> Result<Self> {
        let mut values = vec![0.0; group.order()];
        for &a in set {
            group.check(a)?;
            values[a] = 1.0;
        }
        Self::new(group.clone(), values)
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, code: usize) -> Result<f64> {
        self.group.check(code)?;
        Ok(self.values[code])
    }

    /// `E_{x∈Z} f(x)`.
    pub fn average(&self) -> f64 {
        mean(&self.values)
    }

    /// `E[|f|^p]^{1/p}`, or `max |f|` for `p = ∞`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(&self.values, p)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_group(&self, other: &GroupFunction) -> Result<()> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(Error::input(format!(
                "group mismatch: {:?} vs {:?}",
                self.group, other.group
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.group.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &GroupFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_group(other)?;
        Self::new(
            self.group.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &GroupFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GroupFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GroupFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// `⟨f, g⟩ = E[f g]`.
    pub fn inner(&self, other: &GroupFunction) -> Result<f64> {
        self.same_group(other)?;
        let prods: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(mean(&prods))
    }

    /// Translate: `x ↦ f(x + t)`.
    pub fn shifted(&self, t: usize) -> Result<Self> {
        self.group.check(t)?;
        let add = self.group.adder();
        Self::new(
            self.group.clone(),
            self.group
                .elements()
                .map(|x| self.values[add.add(x, t)])
                .collect(),
        )
    }

    /// Multiplicative derivative `Δ_h f(x) = f(x) f(x + h)`.
    pub fn derivative(&self, h: usize) -> Result<Self> {
        let shifted = self.shifted(h)?;
        self.mul(&shifted)
    }
}

/// `E[|v|^p]^{1/p}` under the uniform measure; `p = ∞` gives the sup norm.
pub fn lp_norm(values: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::param(format!("L_p norm needs p > 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let powers: Vec<f64> = values.iter().map(|v| v.abs().powf(p)).collect();
    Ok((pairwise_sum(&powers) / values.len() as f64).powf(1.0 / p))
}
