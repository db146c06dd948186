//! Parameter sweeps that check the transfer statements numerically, and
//! report emission as JSON or CSV.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxnorms::{self, lift_to_tensor, TensorFunction};
use crate::budget::Budget;
use crate::error::{Error, Result};
use crate::groups::{FiniteAbelianGroup, GroupFunction};
use crate::numeric::powf_usize;
use crate::pseudorandom::{
    self, generate_majorant, generate_tensor_majorant, MajorantKind, MajorantSpec, PsiReference,
};
use crate::search::{random_signs, SearchMode, SearchOptions};
use crate::uniformity::{self, MethodChoice};

pub const SCHEMA_VERSION: u32 = 1;

/// Slack for the per-seed monotone trend and the exact bounded-case bounds.
pub const TREND_SLACK: f64 = 1e-9;
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Prop21,
    Prop23,
    Prop31,
    Appendix,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Prop21 => "prop21",
            ExperimentId::Prop23 => "prop23",
            ExperimentId::Prop31 => "prop31",
            ExperimentId::Appendix => "appendix",
        }
    }

    /// Measurement columns, in CSV order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            ExperimentId::Prop21 => &["nu_mean", "u2s_dev", "weak_raw", "scale", "weak", "gowers", "bound"],
            ExperimentId::Prop23 => &[
                "nu_mean", "ell", "psi_dev", "weak_raw", "scale", "weak", "gowers", "bound",
            ],
            ExperimentId::Prop31 => &[
                "nu_mean", "box4_dev", "us4_dev", "cut_raw", "scale", "cut", "norm", "bound",
            ],
            ExperimentId::Appendix => &["ell", "lhs", "rhs", "box6_dev", "gap", "excess"],
        }
    }

    pub fn run(self, grid: &Grid) -> Result<ExperimentReport> {
        match self {
            ExperimentId::Prop21 => verify_prop21(grid),
            ExperimentId::Prop23 => verify_prop23(grid),
            ExperimentId::Prop31 => verify_prop31_and_cor34(grid),
            ExperimentId::Appendix => verify_appendix(grid),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prop21" => Ok(ExperimentId::Prop21),
            "prop23" => Ok(ExperimentId::Prop23),
            "prop31" | "cor34" => Ok(ExperimentId::Prop31),
            "appendix" => Ok(ExperimentId::Appendix),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Sparse,
    Perturbed,
    Interpolated,
}

impl Family {
    fn kind(self, delta: f64) -> MajorantKind {
        match self {
            Family::Sparse => MajorantKind::SparseSet { delta },
            Family::Perturbed => MajorantKind::Perturbed { epsilon: 0.5 },
            Family::Interpolated => MajorantKind::Interpolated { delta, epsilon: 0.5 },
        }
    }

    fn name(self) -> &'static str {
        match self {
            Family::Sparse => "sparse",
            Family::Perturbed => "perturbed",
            Family::Interpolated => "interpolated",
        }
    }
}

/// Exponent `p` of the reference condition; `"inf"` in JSON for `p = ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PRepr", into = "PRepr")]
pub struct Exponent(pub f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<PRepr> for Exponent {
    type Error = String;

    fn try_from(r: PRepr) -> Result<Self, String> {
        let p = match r {
            PRepr::Number(p) => p,
            PRepr::Text(t) if t == "inf" || t == "infinity" => f64::INFINITY,
            PRepr::Text(t) => t.parse().map_err(|_| format!("bad exponent `{t}`"))?,
        };
        if p.is_nan() || p <= 1.0 {
            return Err(format!("p must lie in (1, ∞], got {p}"));
        }
        Ok(Exponent(p))
    }
}

impl From<Exponent> for PRepr {
    fn from(p: Exponent) -> Self {
        if p.0.is_infinite() {
            PRepr::Text("inf".into())
        } else {
            PRepr::Number(p.0)
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

fn default_delta() -> f64 {
    0.5
}

fn default_p() -> Vec<Exponent> {
    vec![Exponent(f64::INFINITY), Exponent(2.0)]
}

fn default_ell() -> Vec<usize> {
    vec![2, 4]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub s: Vec<usize>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub eta: Vec<f64>,
    pub seeds: u64,
    pub family: Family,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_p")]
    pub p: Vec<Exponent>,
    /// `ℓ` values for the Gowers–Cauchy–Schwarz cells of the appendix sweep.
    #[serde(default = "default_ell")]
    pub ell: Vec<usize>,
    #[serde(default)]
    pub base_seed: u64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            s: vec![2],
            n: vec![8, 16],
            eta: vec![0.5, 0.2, 0.05],
            seeds: 16,
            family: Family::Sparse,
            delta: default_delta(),
            p: default_p(),
            ell: default_ell(),
            base_seed: 0,
        }
    }
}

impl Grid {
    pub fn from_json(text: &str) -> Result<Self> {
        let grid: Grid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&s) = self.s.iter().find(|&&s| !(2..=16).contains(&s)) {
            return Err(Error::param(format!("grid s must lie in 2..=16, got {s}")));
        }
        if let Some(&n) = self.n.iter().find(|&&n| n == 0) {
            return Err(Error::param(format!("grid sizes must be positive, got {n}")));
        }
        if let Some(&e) = self.eta.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::param(format!("η levels must be finite and ≥ 0, got {e}")));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::param(format!("density δ must lie in (0, 1], got {}", self.delta)));
        }
        if let Some(&l) = self.ell.iter().find(|&&l| l < 2 || l % 2 == 1) {
            return Err(Error::param(format!("ℓ must be an even integer ≥ 2, got {l}")));
        }
        Ok(())
    }

    fn seed_list(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.seeds).map(|k| self.base_seed.wrapping_add(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Ok,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub s: usize,
    pub n: usize,
    pub eta: Option<f64>,
    pub seed: u64,
    pub family: String,
    pub variant: String,
    pub status: CellStatus,
    pub reason: Option<String>,
    pub measurements: BTreeMap<String, f64>,
    /// Time spent on the row of cells sharing this cell's function.
    pub wall_clock_ms: f64,
}

impl Cell {
    fn get(&self, key: &str) -> Option<f64> {
        self.measurements.get(key).copied()
    }

    fn is_ok(&self) -> bool {
        self.status == CellStatus::Ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    /// Identifier of the inequality or trend being checked.
    pub anchor: String,
    pub passed: bool,
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    pub grid: Grid,
    pub cells: Vec<Cell>,
    pub assertions: Vec<Assertion>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

const CSV_PREFIX: [&str; 10] = [
    "experiment", "cell", "s", "n", "eta", "seed", "family", "variant", "status", "reason",
];

/// Float formatting shared by every CSV field: shortest round-trip form.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn report_to_csv(report: &ExperimentReport) -> Result<String> {
    let columns = report.experiment.columns();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_PREFIX.iter().chain(columns))?;
    for c in &report.cells {
        let mut row = vec![
            report.experiment.name().to_string(),
            c.id.to_string(),
            c.s.to_string(),
            c.n.to_string(),
            c.eta.map(fmt_f64).unwrap_or_default(),
            c.seed.to_string(),
            c.family.clone(),
            c.variant.clone(),
            match c.status {
                CellStatus::Ok => "ok".into(),
                CellStatus::Skipped => "skipped".into(),
            },
            c.reason.clone().unwrap_or_default(),
        ];
        row.extend(columns.iter().map(|k| c.get(k).map(fmt_f64).unwrap_or_default()));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::input(format!("csv is not UTF-8: {e}")))
}

pub fn report_to_json(report: &ExperimentReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

/// Writes the report to `path`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report_to_json(report)?,
        ReportFormat::Csv => report_to_csv(report)?,
    };
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Cell construction

/// One function shared by all η levels of a row.
#[derive(Debug, Clone)]
struct Row {
    s: usize,
    n: usize,
    seed: u64,
    /// `None` is the `ν ≡ 1` row.
    kind: Option<MajorantKind>,
    family: String,
    variant: String,
}

fn rows(grid: &Grid, variants: &[String]) -> Vec<Row> {
    let mut out = Vec::new();
    for &s in &grid.s {
        for &n in &grid.n {
            for variant in variants {
                for (family, kind) in [
                    ("constant".to_string(), None),
                    (grid.family.name().to_string(), Some(grid.family.kind(grid.delta))),
                ] {
                    for seed in grid.seed_list() {
                        out.push(Row {
                            s,
                            n,
                            seed,
                            kind: kind.clone(),
                            family: family.clone(),
                            variant: variant.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

fn signs(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    random_signs(&mut rng, len)
}

fn cell(row: &Row, eta: Option<f64>) -> Cell {
    Cell {
        id: 0,
        s: row.s,
        n: row.n,
        eta,
        seed: row.seed,
        family: row.family.clone(),
        variant: row.variant.clone(),
        status: CellStatus::Ok,
        reason: None,
        measurements: BTreeMap::new(),
        wall_clock_ms: 0.0,
    }
}

fn skipped_row(row: &Row, etas: &[f64], reason: &str, started: Instant) -> Vec<Cell> {
    let ms = started.elapsed().as_secs_f64() * 1e3;
    etas.iter()
        .map(|&eta| Cell {
            status: CellStatus::Skipped,
            reason: Some(reason.to_string()),
            wall_clock_ms: ms,
            ..cell(row, Some(eta))
        })
        .collect()
}

/// Budget overruns become a skip reason, other errors propagate.
fn budgeted<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ Error::BudgetExceeded { .. }) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// `t = min(1, η/w)`: by homogeneity `w(t·f) = t·w(f)`, so this is the exact
/// end point of rescaling until the certified weak value drops to `η`.
fn scale_for(eta: f64, raw: f64) -> f64 {
    if raw <= eta {
        1.0
    } else {
        eta / raw
    }
}

fn finish_rows(rows: Vec<Vec<Cell>>) -> Vec<Cell> {
    let mut cells: Vec<Cell> = rows.into_iter().flatten().collect();
    for (i, c) in cells.iter_mut().enumerate() {
        c.id = i;
    }
    cells
}

fn sorted_levels(etas: &[f64]) -> Vec<f64> {
    let mut v = etas.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.dedup();
    v
}

// ---------------------------------------------------------------------------
// Weak-norm sweeps on a group

fn group_row_base(row: &Row) -> Result<(GroupFunction, GroupFunction)> {
    let g = FiniteAbelianGroup::cyclic(row.n)?;
    let nu = match &row.kind {
        None => GroupFunction::constant(&g, 1.0)?,
        Some(kind) => generate_majorant(&MajorantSpec::new(kind.clone(), row.seed), &g)?.nu,
    };
    let r = GroupFunction::new(g, signs(row.seed, row.n))?;
    let f = nu.mul(&r)?;
    Ok((nu, f))
}

/// Shared driver of the weak-norm sweeps; `psi_p` switches on the
/// reference-relative certification.
fn weak_row(row: &Row, etas: &[f64], psi_p: Option<f64>, budget: &Budget) -> Result<Vec<Cell>> {
    let started = Instant::now();
    let (nu, f0) = group_row_base(row)?;
    let mut common = BTreeMap::new();
    common.insert("nu_mean".to_string(), nu.average());
    match psi_p {
        None => {
            let cert = pseudorandom::certify(&nu, row.s, None, budget)?;
            if let Some(d) = cert.deviation(pseudorandom::U2S_DEV) {
                common.insert("u2s_dev".into(), d);
            }
        }
        Some(p) => {
            let psi = PsiReference::group(GroupFunction::constant(nu.group(), 1.0)?, p)?;
            common.insert("ell".into(), psi.ell as f64);
            let d = nu.sub(&GroupFunction::constant(nu.group(), 1.0)?)?;
            let dev = uniformity::gowers_norm_with(&d, psi.ell * row.s, MethodChoice::Auto, budget);
            if let Ok(dev) = budgeted(dev)? {
                common.insert("psi_dev".into(), dev.value);
            }
        }
    }
    let est = uniformity::weak_norm(&f0, row.s, SearchMode::Exhaustive, &SearchOptions::default(), budget);
    let est = match budgeted(est)? {
        Ok(e) => e,
        Err(reason) => return Ok(skipped_row(row, etas, &format!("exact weak norm: {reason}"), started)),
    };
    let raw = est.lower_bound;
    let u0 = uniformity::gowers_norm_with(&f0, row.s, MethodChoice::Auto, budget);
    let u0 = match budgeted(u0)? {
        Ok(u) => u.value,
        Err(reason) => return Ok(skipped_row(row, etas, &format!("uniformity norm: {reason}"), started)),
    };
    let ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(etas
        .iter()
        .map(|&eta| {
            let t = scale_for(eta, raw);
            let mut c = cell(row, Some(eta));
            c.measurements = common.clone();
            c.measurements.insert("weak_raw".into(), raw);
            c.measurements.insert("scale".into(), t);
            c.measurements.insert("weak".into(), t * raw);
            c.measurements.insert("gowers".into(), t * u0);
            if row.kind.is_none() {
                c.measurements.insert("bound".into(), eta.powf(1.0 / powf_usize(2, row.s)));
            }
            c.wall_clock_ms = ms;
            c
        })
        .collect())
}

fn run_rows(
    rows: &[Row],
    work: impl Fn(&Row) -> Result<Vec<Cell>> + Sync + Send,
) -> Result<Vec<Cell>> {
    let out: Result<Vec<Vec<Cell>>> = rows.par_iter().map(work).collect();
    Ok(finish_rows(out?))
}

pub fn verify_prop21(grid: &Grid) -> Result<ExperimentReport> {
    verify_prop21_with(grid, &Budget::default())
}

pub fn verify_prop21_with(grid: &Grid, budget: &Budget) -> Result<ExperimentReport> {
    grid.validate()?;
    let rows = rows(grid, &[String::new()]);
    let cells = run_rows(&rows, |r| weak_row(r, &grid.eta, None, budget))?;
    let assertions = vec![
        bounded_assertion(&cells, "gowers", "bounded-reverse-weak"),
        seed_trend_assertion(&cells, "gowers", "weak-controls-gowers"),
        median_trend_assertion(&cells, "gowers", &grid.eta, "weak-controls-gowers"),
    ];
    Ok(report(ExperimentId::Prop21, grid, cells, assertions))
}

pub fn verify_prop23(grid: &Grid) -> Result<ExperimentReport> {
    verify_prop23_with(grid, &Budget::default())
}

pub fn verify_prop23_with(grid: &Grid, budget: &Budget) -> Result<ExperimentReport> {
    grid.validate()?;
    let variants: Vec<String> = grid.p.iter().map(|p| format!("p={p}")).collect();
    let rows = rows(grid, &variants);
    let cells = run_rows(&rows, |r| {
        let p = grid
            .p
            .iter()
            .find(|p| format!("p={p}") == r.variant)
            .map(|p| p.0)
            .unwrap_or(f64::INFINITY);
        weak_row(r, &grid.eta, Some(p), budget)
    })?;
    let assertions = vec![
        bounded_assertion(&cells, "gowers", "bounded-reverse-weak"),
        seed_trend_assertion(&cells, "gowers", "reference-weak-controls-gowers"),
        median_trend_assertion(&cells, "gowers", &grid.eta, "reference-weak-controls-gowers"),
    ];
    Ok(report(ExperimentId::Prop23, grid, cells, assertions))
}

// ---------------------------------------------------------------------------
// Cut-norm sweeps on tensors and on lifted groups

fn cut_row(row: &Row, etas: &[f64], budget: &Budget) -> Result<Vec<Cell>> {
    let started = Instant::now();
    let opts = SearchOptions::default();
    let mut common = BTreeMap::new();
    let (f0, norm0) = if row.variant == "tensor" {
        let nu = match &row.kind {
            None => TensorFunction::constant(row.n, row.s, 1.0)?,
            Some(kind) => {
                generate_tensor_majorant(&MajorantSpec::new(kind.clone(), row.seed), row.n, row.s)?.nu
            }
        };
        common.insert("nu_mean".to_string(), nu.average());
        let cert = pseudorandom::certify_tensor(&nu, None, budget)?;
        if let Some(d) = cert.deviation(pseudorandom::BOX4_DEV) {
            common.insert("box4_dev".into(), d);
        }
        let r = signs(row.seed, nu.values().len());
        let f = TensorFunction::new(row.n, row.s, nu.values().iter().zip(&r).map(|(a, b)| a * b).collect())?;
        let norm = match budgeted(boxnorms::box_norm_with(&f, budget))? {
            Ok(v) => v.value,
            Err(reason) => return Ok(skipped_row(row, etas, &format!("box norm: {reason}"), started)),
        };
        (f, norm)
    } else {
        let (nu, f) = group_row_base(row)?;
        common.insert("nu_mean".to_string(), nu.average());
        let d = nu.sub(&GroupFunction::constant(nu.group(), 1.0)?)?;
        if let Ok(v) = budgeted(uniformity::uniformity_norm_ell(&d, row.s, 4, budget))? {
            common.insert("us4_dev".into(), v.value);
        }
        let norm = match budgeted(uniformity::gowers_norm_with(&f, row.s, MethodChoice::Auto, budget))? {
            Ok(v) => v.value,
            Err(reason) => return Ok(skipped_row(row, etas, &format!("uniformity norm: {reason}"), started)),
        };
        let lifted = match budgeted(lift_to_tensor(&f, row.s, budget))? {
            Ok(t) => t,
            Err(reason) => return Ok(skipped_row(row, etas, &format!("lift: {reason}"), started)),
        };
        (lifted, norm)
    };
    let est = match budgeted(boxnorms::cut_norm(&f0, SearchMode::Exhaustive, &opts, budget))? {
        Ok(e) => e,
        Err(reason) => return Ok(skipped_row(row, etas, &format!("exact cut norm: {reason}"), started)),
    };
    let raw = est.lower_bound;
    let ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(etas
        .iter()
        .map(|&eta| {
            let t = scale_for(eta, raw);
            let mut c = cell(row, Some(eta));
            c.measurements = common.clone();
            c.measurements.insert("cut_raw".into(), raw);
            c.measurements.insert("scale".into(), t);
            c.measurements.insert("cut".into(), t * raw);
            c.measurements.insert("norm".into(), t * norm0);
            if row.kind.is_none() {
                c.measurements.insert("bound".into(), eta.powf(1.0 / powf_usize(2, row.s)));
            }
            c.wall_clock_ms = ms;
            c
        })
        .collect())
}

/// Tensor rows (`variant = "tensor"`) and lifted group rows (`"group"`).
pub fn verify_prop31_and_cor34(grid: &Grid) -> Result<ExperimentReport> {
    verify_prop31_and_cor34_with(grid, &Budget::default())
}

pub fn verify_prop31_and_cor34_with(grid: &Grid, budget: &Budget) -> Result<ExperimentReport> {
    grid.validate()?;
    let rows = rows(grid, &["tensor".to_string(), "group".to_string()]);
    let cells = run_rows(&rows, |r| cut_row(r, &grid.eta, budget))?;
    let assertions = vec![
        bounded_assertion(&cells, "norm", "bounded-reverse-cut"),
        seed_trend_assertion(&cells, "norm", "cut-controls-box"),
        median_trend_assertion(&cells, "norm", &grid.eta, "cut-controls-box"),
    ];
    Ok(report(ExperimentId::Prop31, grid, cells, assertions))
}

// ---------------------------------------------------------------------------
// Appendix inequalities

fn random_tensor(rng: &mut ChaCha8Rng, n: usize, s: usize) -> Result<TensorFunction> {
    TensorFunction::from_fn(n, s, |_| rng.random_range(-1.0..=1.0))
}

fn appendix_row(row: &Row, grid: &Grid, budget: &Budget) -> Result<Vec<Cell>> {
    let started = Instant::now();
    let (n, s) = (row.n, row.s);
    let mut rng = ChaCha8Rng::seed_from_u64(row.seed);
    rng.set_stream(2);
    let mut out = Vec::new();
    let mut push = |family: &str, variant: String, eta: Option<f64>, m: Result<Vec<(&str, f64)>>| -> Result<()> {
        let mut c = cell(row, eta);
        c.family = family.to_string();
        c.variant = variant;
        match budgeted(m)? {
            Ok(m) => c.measurements = m.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            Err(reason) => {
                c.status = CellStatus::Skipped;
                c.reason = Some(reason);
            }
        }
        c.wall_clock_ms = started.elapsed().as_secs_f64() * 1e3;
        out.push(c);
        Ok(())
    };

    for &ell in &grid.ell {
        let len = powf_usize(ell, s) as usize;
        let fs: Vec<TensorFunction> = (0..len)
            .map(|_| random_tensor(&mut rng, n, s))
            .collect::<Result<_>>()?;
        let m = (|| {
            let lhs = boxnorms::multi_box_correlation(&fs, ell)?.abs();
            let mut rhs = 1.0;
            for f in &fs {
                rhs *= boxnorms::box_norm_ell_with(f, ell, budget)?.value;
            }
            Ok(vec![("ell", ell as f64), ("lhs", lhs), ("rhs", rhs)])
        })();
        push("gcs", format!("l={ell}"), None, m)?;
        let ones = vec![TensorFunction::constant(n, s, 1.0)?; len];
        let m = (|| {
            let lhs = boxnorms::multi_box_correlation(&ones, ell)?;
            let rhs = boxnorms::box_norm_ell_with(&ones[0], ell, budget)?.value.powi(len as i32);
            Ok(vec![("ell", ell as f64), ("lhs", lhs), ("rhs", rhs)])
        })();
        push("gcs-ones", format!("l={ell}"), None, m)?;
    }

    // Norm axioms and ℓ-monotonicity for ℓ ∈ {2, 4}.
    let f = random_tensor(&mut rng, n, s)?;
    let g = random_tensor(&mut rng, n, s)?;
    let c: f64 = rng.random_range(-3.0..3.0);
    for ell in [2usize, 4] {
        let norm = |t: &TensorFunction| boxnorms::box_norm_ell_with(t, ell, budget).map(|r| r.value);
        let m = (|| {
            let (nf, ng) = (norm(&f)?, norm(&g)?);
            Ok(vec![("ell", ell as f64), ("lhs", norm(&f.add(&g)?)?), ("rhs", nf + ng)])
        })();
        push("triangle", format!("l={ell}"), None, m)?;
        let m = (|| {
            Ok(vec![("ell", ell as f64), ("lhs", norm(&f.scale(c)?)?), ("rhs", c.abs() * norm(&f)?)])
        })();
        push("homogeneity", format!("l={ell}"), None, m)?;
    }
    let m = (|| {
        let b2 = boxnorms::box_norm_ell_with(&f, 2, budget)?.value;
        let b4 = boxnorms::box_norm_ell_with(&f, 4, budget)?.value;
        Ok(vec![("ell", 4.0), ("lhs", b2), ("rhs", b4)])
    })();
    push("ell-monotone", "l=2..4".into(), None, m)?;

    // Bounded case with ℓ = 4.
    let m = (|| {
        let b = boxnorms::box_norm_ell_with(&f, 2, budget)?.value;
        let b4 = boxnorms::box_norm_ell_with(&f, 4, budget)?.value;
        Ok(vec![("ell", 4.0), ("lhs", b4), ("rhs", b.powf(1.0 / powf_usize(4, s)))])
    })();
    push("bounded", "l=4".into(), None, m)?;

    // Majorized sweep: ν = (1-η) + η·ν_S and F = ν, with ‖ν−1‖_{□_6} measured.
    for &eta in &grid.eta {
        let blend = eta.min(1.0);
        let m = (|| {
            let kind = MajorantKind::Interpolated { delta: grid.delta, epsilon: blend };
            let nu = generate_tensor_majorant(&MajorantSpec::new(kind, row.seed), n, s)?.nu;
            let dev = boxnorms::box_norm_ell_with(&nu.map(|v| v - 1.0)?, 6, budget)?.value;
            let b = boxnorms::box_norm_ell_with(&nu, 2, budget)?.value;
            let b4 = boxnorms::box_norm_ell_with(&nu, 4, budget)?.value;
            let gap = b4 - b.powf(1.0 / powf_usize(4, s));
            Ok(vec![("ell", 4.0), ("lhs", b4), ("rhs", b.powf(1.0 / powf_usize(4, s))), ("box6_dev", dev), ("gap", gap), ("excess", gap.max(0.0))])
        })();
        push("majorized", "l=4".into(), Some(eta), m)?;
    }
    Ok(out)
}

pub fn verify_appendix(grid: &Grid) -> Result<ExperimentReport> {
    verify_appendix_with(grid, &Budget::default())
}

pub fn verify_appendix_with(grid: &Grid, budget: &Budget) -> Result<ExperimentReport> {
    grid.validate()?;
    let rows: Vec<Row> = grid
        .s
        .iter()
        .flat_map(|&s| grid.n.iter().map(move |&n| (s, n)))
        .flat_map(|(s, n)| {
            grid.seed_list().map(move |seed| Row {
                s,
                n,
                seed,
                kind: None,
                family: String::new(),
                variant: String::new(),
            })
        })
        .collect();
    let cells = run_rows(&rows, |r| appendix_row(r, grid, budget))?;
    let le = |family: &str, anchor: &str| pair_assertion(&cells, family, anchor, |l, r| l <= r + BOUND_SLACK);
    let mut assertions = vec![
        le("gcs", "gowers-cauchy-schwarz"),
        pair_assertion(&cells, "gcs-ones", "gowers-cauchy-schwarz-equality", |l, r| {
            (l - 1.0).abs() <= BOUND_SLACK && (r - 1.0).abs() <= BOUND_SLACK
        }),
        le("triangle", "box-norm-triangle"),
        pair_assertion(&cells, "homogeneity", "box-norm-homogeneity", |l, r| {
            (l - r).abs() <= BOUND_SLACK * r.max(1.0)
        }),
        le("ell-monotone", "box-norm-ell-monotone"),
        le("bounded", "box-ell-bounded-reverse"),
    ];
    let majorized: Vec<Cell> = cells.iter().filter(|c| c.family == "majorized").cloned().collect();
    assertions.push(seed_trend_assertion(&majorized, "excess", "box-ell-majorized-reverse"));
    assertions.push(median_trend_assertion(&majorized, "excess", &grid.eta, "box-ell-majorized-reverse"));
    Ok(report(ExperimentId::Appendix, grid, cells, assertions))
}

// ---------------------------------------------------------------------------
// Assertions

fn report(id: ExperimentId, grid: &Grid, cells: Vec<Cell>, assertions: Vec<Assertion>) -> ExperimentReport {
    ExperimentReport {
        schema_version: SCHEMA_VERSION,
        experiment: id,
        grid: grid.clone(),
        cells,
        assertions,
    }
}

fn assertion(name: &str, anchor: &str, checked: usize, failures: Vec<String>) -> Assertion {
    let violations = failures.len();
    let mut detail = format!("{checked} checked, {violations} violations");
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Assertion {
        name: name.to_string(),
        anchor: anchor.to_string(),
        passed: violations == 0,
        checked,
        violations,
        detail,
    }
}

fn pair_assertion(cells: &[Cell], family: &str, anchor: &str, ok: impl Fn(f64, f64) -> bool) -> Assertion {
    let mut checked = 0;
    let mut failures = Vec::new();
    for c in cells.iter().filter(|c| c.family == family && c.is_ok()) {
        let (Some(l), Some(r)) = (c.get("lhs"), c.get("rhs")) else { continue };
        checked += 1;
        if !ok(l, r) {
            failures.push(format!("cell {} ({}, seed {}): lhs {l:e}, rhs {r:e}", c.id, c.variant, c.seed));
        }
    }
    assertion(family, anchor, checked, failures)
}

/// `value ≤ bound` on every evaluated `ν ≡ 1` cell.
fn bounded_assertion(cells: &[Cell], key: &str, anchor: &str) -> Assertion {
    let mut checked = 0;
    let mut failures = Vec::new();
    for c in cells.iter().filter(|c| c.is_ok()) {
        let (Some(v), Some(b)) = (c.get(key), c.get("bound")) else { continue };
        checked += 1;
        if v > b + BOUND_SLACK {
            failures.push(format!("cell {}: {key} {v:e} > {b:e}", c.id));
        }
    }
    assertion("bounded-case", anchor, checked, failures)
}

type SeriesKey = (usize, usize, String, String);

/// Per `(s, n, family, variant)`, per seed: values indexed by η level.
fn series(cells: &[Cell], key: &str) -> BTreeMap<SeriesKey, BTreeMap<u64, Vec<(f64, f64)>>> {
    let mut out: BTreeMap<SeriesKey, BTreeMap<u64, Vec<(f64, f64)>>> = BTreeMap::new();
    for c in cells.iter().filter(|c| c.is_ok()) {
        let (Some(eta), Some(v)) = (c.eta, c.get(key)) else { continue };
        out.entry((c.s, c.n, c.family.clone(), c.variant.clone()))
            .or_default()
            .entry(c.seed)
            .or_default()
            .push((eta, v));
    }
    out
}

fn label(k: &SeriesKey) -> String {
    let mut s = format!("s={} n={} {}", k.0, k.1, k.2);
    if !k.3.is_empty() {
        s.push(' ');
        s.push_str(&k.3);
    }
    s
}

/// Per seed, the measurement is nonincreasing as `η` decreases.
fn seed_trend_assertion(cells: &[Cell], key: &str, anchor: &str) -> Assertion {
    let mut checked = 0;
    let mut failures = Vec::new();
    for (k, seeds) in series(cells, key) {
        for (seed, mut pts) in seeds {
            pts.sort_by(|a, b| b.0.total_cmp(&a.0));
            checked += 1;
            if let Some(w) = pts.windows(2).find(|w| w[1].1 > w[0].1 + TREND_SLACK) {
                failures.push(format!(
                    "{} seed {seed}: {key} rises from {:e} at η={} to {:e} at η={}",
                    label(&k),
                    w[0].1,
                    w[0].0,
                    w[1].1,
                    w[1].0
                ));
            }
        }
    }
    assertion("seed-trend", anchor, checked, failures)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// The median over seeds is strictly decreasing across the `η` levels.
/// Series whose rows were skipped at some level are reported as violations.
fn median_trend_assertion(cells: &[Cell], key: &str, etas: &[f64], anchor: &str) -> Assertion {
    let levels = sorted_levels(etas);
    let mut checked = 0;
    let mut failures = Vec::new();
    for (k, seeds) in series(cells, key) {
        checked += 1;
        let medians: Vec<Option<f64>> = levels
            .iter()
            .map(|&eta| {
                let mut vals: Vec<f64> = seeds
                    .values()
                    .flat_map(|pts| pts.iter().filter(|p| p.0 == eta).map(|p| p.1))
                    .collect();
                median(&mut vals)
            })
            .collect();
        let shown: Vec<String> = medians
            .iter()
            .map(|m| m.map_or("n/a".into(), |v| format!("{v:.6e}")))
            .collect();
        let strict = medians
            .windows(2)
            .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a));
        if !strict {
            failures.push(format!(
                "{} over {} seeds: medians [{}] at η {:?}",
                label(&k),
                seeds.len(),
                shown.join(", "),
                levels
            ));
        }
    }
    assertion("median-trend", anchor, checked, failures)
}
