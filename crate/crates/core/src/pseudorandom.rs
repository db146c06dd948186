//! Majorant generators and measured pseudorandomness deviations.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boxnorms::{self, TensorFunction};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::groups::{FiniteAbelianGroup, GroupFunction};
use crate::search::random_signs;
use crate::uniformity::{self, MethodChoice};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MajorantKind {
    ConstantOne,
    /// `1 + ε·r` with `r` i.i.d. uniform ±1, clipped at 0.
    Perturbed { epsilon: f64 },
    /// `(|Z|/|S|)·1_S` with `S` uniform of size `round(δ|Z|)`.
    SparseSet { delta: f64 },
    /// `(1-ε) + ε·ν_S` with `ν_S` a sparse-set majorant of density `δ`.
    Interpolated { delta: f64, epsilon: f64 },
    Custom { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantSpec {
    #[serde(flatten)]
    pub kind: MajorantKind,
    pub seed: u64,
}

impl MajorantSpec {
    pub fn new(kind: MajorantKind, seed: u64) -> Self {
        MajorantSpec { kind, seed }
    }
}

/// A generated majorant with the number of entries clipped at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated<T> {
    pub nu: T,
    pub clip_count: usize,
    pub seed: u64,
}

fn check_density(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("density δ must lie in (0, 1], got {delta}")))
    }
}

fn sparse_values(rng: &mut ChaCha8Rng, len: usize, delta: f64) -> Vec<f64> {
    let m = ((delta * len as f64).round() as usize).clamp(1, len);
    let weight = len as f64 / m as f64;
    let mut values = vec![0.0; len];
    for i in sample(rng, len, m) {
        values[i] = weight;
    }
    values
}

fn generate_values(spec: &MajorantSpec, len: usize) -> Result<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let values = match &spec.kind {
        MajorantKind::ConstantOne => vec![1.0; len],
        MajorantKind::Perturbed { epsilon } => {
            if !epsilon.is_finite() || *epsilon < 0.0 {
                return Err(Error::param(format!("perturbation ε must be ≥ 0, got {epsilon}")));
            }
            random_signs(&mut rng, len)
                .into_iter()
                .map(|r| 1.0 + epsilon * r)
                .collect()
        }
        MajorantKind::SparseSet { delta } => {
            check_density(*delta)?;
            sparse_values(&mut rng, len, *delta)
        }
        MajorantKind::Interpolated { delta, epsilon } => {
            check_density(*delta)?;
            if !(0.0..=1.0).contains(epsilon) {
                return Err(Error::param(format!("blend ε must lie in [0, 1], got {epsilon}")));
            }
            sparse_values(&mut rng, len, *delta)
                .into_iter()
                .map(|v| 1.0 - epsilon + epsilon * v)
                .collect()
        }
        MajorantKind::Custom { values } => {
            if values.len() != len {
                return Err(Error::input(format!(
                    "custom majorant has {} values, domain has {len}",
                    values.len()
                )));
            }
            values.clone()
        }
    };
    let clip_count = values.iter().filter(|&&v| v < 0.0).count();
    Ok((values.into_iter().map(|v| v.max(0.0)).collect(), clip_count))
}

pub fn generate_majorant(
    spec: &MajorantSpec,
    group: &FiniteAbelianGroup,
) -> Result<Generated<GroupFunction>> {
    let (values, clip_count) = generate_values(spec, group.order())?;
    Ok(Generated {
        nu: GroupFunction::new(group.clone(), values)?,
        clip_count,
        seed: spec.seed,
    })
}

pub fn generate_tensor_majorant(
    spec: &MajorantSpec,
    vertex_count: usize,
    arity: usize,
) -> Result<Generated<TensorFunction>> {
    let len = vertex_count
        .checked_pow(arity as u32)
        .ok_or_else(|| Error::input("tensor is too large"))?;
    let (values, clip_count) = generate_values(spec, len)?;
    Ok(Generated {
        nu: TensorFunction::new(vertex_count, arity, values)?,
        clip_count,
        seed: spec.seed,
    })
}

/// Conjugate exponent `q` of `p ∈ (1, ∞]`.
pub fn conjugate_exponent(p: f64) -> Result<f64> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::param(format!("p must lie in (1, ∞], got {p}")));
    }
    Ok(if p.is_infinite() { 1.0 } else { p / (p - 1.0) })
}

const CEIL_SLACK: f64 = 1e-9;

/// `min{2n : 2n ≥ 2q}` for the group setting.
pub fn ell_group(p: f64) -> Result<usize> {
    let q = conjugate_exponent(p)?;
    Ok(2 * ((q - CEIL_SLACK).ceil() as usize).max(1))
}

/// `min{2n : 2n ≥ 2q + 2}` for the tensor setting.
pub fn ell_tensor(p: f64) -> Result<usize> {
    let q = conjugate_exponent(p)?;
    Ok(2 * ((q + 1.0 - CEIL_SLACK).ceil() as usize))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", content = "psi", rename_all = "kebab-case")]
pub enum Majorant {
    Group(GroupFunction),
    Tensor(TensorFunction),
}

/// Reference function `ψ` with `‖ψ‖_{L_p} ≤ 1` and its derived exponent `ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiReference {
    pub psi: Majorant,
    pub p: f64,
    pub q: f64,
    pub ell: usize,
}

impl PsiReference {
    pub fn group(psi: GroupFunction, p: f64) -> Result<Self> {
        let q = conjugate_exponent(p)?;
        let norm = psi.lp_norm(p)?;
        if norm > 1.0 + 1e-12 {
            return Err(Error::input(format!("‖ψ‖_{{L_{p}}} = {norm} exceeds 1")));
        }
        Ok(PsiReference {
            psi: Majorant::Group(psi),
            p,
            q,
            ell: ell_group(p)?,
        })
    }

    pub fn tensor(psi: TensorFunction, p: f64) -> Result<Self> {
        let q = conjugate_exponent(p)?;
        let norm = crate::groups::lp_norm(psi.values(), p)?;
        if norm > 1.0 + 1e-12 {
            return Err(Error::input(format!("‖ψ‖_{{L_{p}}} = {norm} exceeds 1")));
        }
        Ok(PsiReference {
            psi: Majorant::Tensor(psi),
            p,
            q,
            ell: ell_tensor(p)?,
        })
    }

    /// `ψ ≡ 1` with `p = ∞`.
    pub fn constant_one_group(group: &FiniteAbelianGroup) -> Result<Self> {
        PsiReference::group(GroupFunction::constant(group, 1.0)?, f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Deviation {
    Measured { value: f64 },
    Unavailable { reason: String },
}

impl Deviation {
    pub fn value(&self) -> Option<f64> {
        match self {
            Deviation::Measured { value } => Some(*value),
            Deviation::Unavailable { .. } => None,
        }
    }

    fn from_result(r: Result<f64>) -> Result<Self> {
        match r {
            Ok(value) => Ok(Deviation::Measured { value }),
            Err(e @ Error::BudgetExceeded { .. }) => Ok(Deviation::Unavailable {
                reason: e.to_string(),
            }),
            Err(e) => Err(e),
        }
    }
}

/// A majorant with measured deviations; no thresholds are applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantCertificate {
    pub nu: Majorant,
    pub s: usize,
    pub mean: f64,
    pub deviations: BTreeMap<String, Deviation>,
}

impl MajorantCertificate {
    pub fn deviation(&self, name: &str) -> Option<f64> {
        self.deviations.get(name).and_then(Deviation::value)
    }
}

pub const U2S_DEV: &str = "u2s_dev";
pub const US_DEV: &str = "us_dev";
pub const US4_DEV: &str = "us4_dev";
pub const BOX_DEV: &str = "box_dev";
pub const BOX4_DEV: &str = "box4_dev";
pub const PSI_DEV: &str = "psi_dev";

/// Measures `‖ν−1‖_{U^{2s}}`, `‖ν−1‖_{U^s}`, `‖ν−1‖_{U^s_4}` and, with a
/// reference, `‖ν−ψ‖_{U^{ℓs}}`.
pub fn certify(
    nu: &GroupFunction,
    s: usize,
    psi: Option<&PsiReference>,
    budget: &Budget,
) -> Result<MajorantCertificate> {
    if s < 2 {
        return Err(Error::param(format!("s must be ≥ 2, got {s}")));
    }
    let one = GroupFunction::constant(nu.group(), 1.0)?;
    let diff = nu.sub(&one)?;
    let norm = |order: usize| -> Result<f64> {
        uniformity::gowers_norm_with(&diff, order, MethodChoice::Auto, budget).map(|r| r.value)
    };
    let mut deviations = BTreeMap::new();
    deviations.insert(U2S_DEV.to_string(), Deviation::from_result(norm(2 * s))?);
    deviations.insert(US_DEV.to_string(), Deviation::from_result(norm(s))?);
    deviations.insert(
        US4_DEV.to_string(),
        Deviation::from_result(uniformity::uniformity_norm_ell(&diff, s, 4, budget).map(|r| r.value))?,
    );
    if let Some(reference) = psi {
        let Majorant::Group(psi_fn) = &reference.psi else {
            return Err(Error::input("a group majorant needs a group reference ψ"));
        };
        let d = nu.sub(psi_fn)?;
        let r = uniformity::gowers_norm_with(&d, reference.ell * s, MethodChoice::Auto, budget)
            .map(|r| r.value);
        deviations.insert(PSI_DEV.to_string(), Deviation::from_result(r)?);
    }
    Ok(MajorantCertificate {
        nu: Majorant::Group(nu.clone()),
        s,
        mean: nu.average(),
        deviations,
    })
}

/// Measures `‖ν−1‖_{□}`, `‖ν−1‖_{□_4}` and, with a reference, `‖ν−ψ‖_{□_ℓ}`.
pub fn certify_tensor(
    nu: &TensorFunction,
    psi: Option<&PsiReference>,
    budget: &Budget,
) -> Result<MajorantCertificate> {
    let diff = nu.map(|v| v - 1.0)?;
    let mut deviations = BTreeMap::new();
    for (name, ell) in [(BOX_DEV, 2), (BOX4_DEV, 4)] {
        let r = boxnorms::box_norm_ell_with(&diff, ell, budget).map(|r| r.value);
        deviations.insert(name.to_string(), Deviation::from_result(r)?);
    }
    if let Some(reference) = psi {
        let Majorant::Tensor(psi_fn) = &reference.psi else {
            return Err(Error::input("a tensor majorant needs a tensor reference ψ"));
        };
        let d = nu.sub(psi_fn)?;
        let r = boxnorms::box_norm_ell_with(&d, reference.ell, budget).map(|r| r.value);
        deviations.insert(PSI_DEV.to_string(), Deviation::from_result(r)?);
    }
    Ok(MajorantCertificate {
        nu: Majorant::Tensor(nu.clone()),
        s: nu.arity(),
        mean: nu.average(),
        deviations,
    })
}
