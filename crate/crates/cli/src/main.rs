use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use uninorm::boxnorms::{box_norm_ell, cut_norm, TensorFunction};
use uninorm::decompose::{dense_model, dense_model_tensor, kvn_group, kvn_tensor, DenseModelOptions};
use uninorm::harness::{emit_report, report_to_csv, report_to_json};
use uninorm::interval::{default_modulus, interval_norm, transfer_kvn, CutoffOptions, TransferOptions};
use uninorm::pseudorandom::{certify, generate_majorant, MajorantKind, MajorantSpec};
use uninorm::uniformity::{gowers_norm_with, weak_norm};
use uninorm::{
    Budget, ExperimentId, FiniteAbelianGroup, GroupFunction, Grid, IntervalFunction, MethodChoice,
    ReportFormat, SearchMode, SearchOptions,
};

#[derive(Parser)]
#[command(name = "uninorm", version, about = "Uniformity, box and cut norms and dense-model decompositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gowers norm ‖f‖_{U^s} of a group function.
    Norm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value = "auto")]
        method: MethodChoice,
    },
    /// Weak uniformity norm, exact or a lower bound.
    Weaknorm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// ℓ-box norm of a tensor.
    Boxnorm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        ell: usize,
    },
    /// Cut norm of a tensor.
    Cutnorm {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Generate a majorant and optionally certify it.
    Majorant(MajorantArgs),
    /// Dense model w ∈ [0,1] for 0 ≤ g ≤ ν.
    DenseModel {
        #[arg(long)]
        g: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Decomposition h ∈ [-1,1] for |f| ≤ ν.
    Kvn {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long, default_value_t = 2)]
        s: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// ‖f‖_{U^s[N]} of an interval function.
    Interval {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, default_value_t = 2)]
        s: usize,
        /// `auto` or an explicit modulus N' > 2N.
        #[arg(long, default_value = "auto")]
        nprime: Modulus,
    },
    /// Decompose on Z_{N'} and restrict to [N] through the cut-off.
    Transfer {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        nu: PathBuf,
        #[arg(long = "C", default_value_t = 20.0)]
        c: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        s: usize,
        /// Ramp fraction replacing the default (ε/(32C))^{2^s}.
        #[arg(long)]
        alpha: Option<f64>,
        /// Accept a prime N' beyond 2CN.
        #[arg(long)]
        widen: bool,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run a verification sweep and write its report.
    Experiment {
        id: ExperimentId,
        /// Grid JSON; the default grid when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Exit with status 2 when an assertion fails.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value = "exhaustive")]
    mode: SearchMode,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

impl SearchArgs {
    fn options(&self) -> SearchOptions {
        SearchOptions { restarts: self.restarts, seed: self.seed, ..Default::default() }
    }
}

#[derive(Args)]
struct EngineArgs {
    /// exhaustive, alternating, or auto (exhaustive when affordable).
    #[arg(long, default_value = "auto")]
    mode: String,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl EngineArgs {
    fn options(&self) -> Result<DenseModelOptions> {
        let mode = match self.mode.as_str() {
            "auto" => None,
            m => Some(SearchMode::from_str(m).map_err(anyhow::Error::msg)?),
        };
        Ok(DenseModelOptions {
            mode,
            search: SearchOptions { restarts: self.restarts, seed: self.seed, ..Default::default() },
            budget: Budget::default(),
            max_iterations: self.max_iterations,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Constant,
    Perturbed,
    Sparse,
    Interpolated,
}

#[derive(Args)]
struct MajorantArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 0.5)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Cyclic factors, e.g. `32` or `4,4`.
    #[arg(long, value_delimiter = ',', required = true)]
    group: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    certify: bool,
    #[arg(long, default_value_t = 2)]
    s: usize,
}

#[derive(Clone, Copy)]
enum Modulus {
    Auto,
    Fixed(usize),
}

impl FromStr for Modulus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Modulus::Auto);
        }
        s.parse().map(Modulus::Fixed).map_err(|_| format!("expected `auto` or an integer, got `{s}`"))
    }
}

/// A function file on a group or on `V^s`, told apart by its fields.
#[derive(Deserialize)]
#[serde(untagged)]
enum Function {
    Group(GroupFunction),
    Tensor(TensorFunction),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print(value: &impl Serialize) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn majorant(args: &MajorantArgs) -> Result<Value> {
    let kind = match args.kind {
        Kind::Constant => MajorantKind::ConstantOne,
        Kind::Perturbed => MajorantKind::Perturbed { epsilon: args.epsilon },
        Kind::Sparse => MajorantKind::SparseSet { delta: args.delta },
        Kind::Interpolated => MajorantKind::Interpolated { delta: args.delta, epsilon: args.epsilon },
    };
    let group = FiniteAbelianGroup::new(args.group.clone())?;
    let generated = generate_majorant(&MajorantSpec::new(kind, args.seed), &group)?;
    let mut out = serde_json::to_value(&generated)?;
    if args.certify {
        let cert = certify(&generated.nu, args.s, None, &Budget::default())?;
        out["certificate"] = serde_json::to_value(cert)?;
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<i32> {
    let budget = Budget::default();
    match cli.command {
        Command::Norm { input, s, method } => {
            let f: GroupFunction = read_json(&input)?;
            print(&gowers_norm_with(&f, s, method, &budget)?)?;
        }
        Command::Weaknorm { input, s, search } => {
            let f: GroupFunction = read_json(&input)?;
            let est = weak_norm(&f, s, search.mode, &search.options(), &budget)?;
            print(&json!({
                "value": est.lower_bound,
                "exact": est.exact,
                "mode": search.mode,
                "stats": est.stats,
                "witness": est.witness,
            }))?;
        }
        Command::Boxnorm { input, ell } => {
            let t: TensorFunction = read_json(&input)?;
            print(&box_norm_ell(&t, ell)?)?;
        }
        Command::Cutnorm { input, search } => {
            let t: TensorFunction = read_json(&input)?;
            let est = cut_norm(&t, search.mode, &search.options(), &budget)?;
            print(&json!({
                "value": est.lower_bound,
                "exact": est.exact,
                "mode": search.mode,
                "stats": est.stats,
                "witness": est.witness,
            }))?;
        }
        Command::Majorant(args) => print(&majorant(&args)?)?,
        Command::DenseModel { g, nu, s, eps, engine } => {
            let opts = engine.options()?;
            match (read_json(&g)?, read_json(&nu)?) {
                (Function::Group(g), Function::Group(nu)) => print(&dense_model(&g, &nu, s, eps, &opts)?)?,
                (Function::Tensor(g), Function::Tensor(nu)) => print(&dense_model_tensor(&g, &nu, eps, &opts)?)?,
                _ => bail!("g and ν must both be group functions or both tensors"),
            }
        }
        Command::Kvn { f, nu, s, eps, engine } => {
            let opts = engine.options()?;
            match (read_json(&f)?, read_json(&nu)?) {
                (Function::Group(f), Function::Group(nu)) => print(&kvn_group(&f, &nu, s, eps, &opts)?)?,
                (Function::Tensor(f), Function::Tensor(nu)) => print(&kvn_tensor(&f, &nu, eps, &opts)?)?,
                _ => bail!("f and ν must both be group functions or both tensors"),
            }
        }
        Command::Interval { f, s, nprime } => {
            let f: IntervalFunction = read_json(&f)?;
            let n_prime = match nprime {
                Modulus::Auto => default_modulus(f.len()),
                Modulus::Fixed(p) => p,
            };
            let r = interval_norm(&f, s, n_prime)?;
            print(&json!({ "value": r.value, "method": r.method, "cost": r.cost, "n_prime": n_prime }))?;
        }
        Command::Transfer { f, nu, c, eps, s, alpha, widen, engine } => {
            let f: IntervalFunction = read_json(&f)?;
            let nu: GroupFunction = read_json(&nu)?;
            let opts = TransferOptions { cutoff: CutoffOptions { alpha, widen }, dense: engine.options()? };
            print(&transfer_kvn(&f, &nu, s, c, eps, &opts)?)?;
        }
        Command::Experiment { id, grid, out, format, strict } => {
            let grid = match grid {
                Some(path) => Grid::from_json(
                    &fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
                )?,
                None => Grid::default(),
            };
            let report = id.run(&grid)?;
            match out {
                Some(path) => emit_report(&report, format, &path)?,
                None => {
                    let text = match format {
                        ReportFormat::Csv => report_to_csv(&report)?,
                        ReportFormat::Json => report_to_json(&report)?,
                    };
                    std::io::stdout().lock().write_all(text.as_bytes())?;
                }
            }
            for a in &report.assertions {
                eprintln!(
                    "{} {}: {} checked, {} violations",
                    if a.passed { "ok  " } else { "FAIL" },
                    a.name,
                    a.checked,
                    a.violations
                );
            }
            if strict && !report.passed() {
                return Ok(2);
            }
        }
    }
    Ok(0)
}

fn main() {
    match run(Cli::parse()) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
