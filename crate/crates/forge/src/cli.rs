//! The `contract-forge` command line.
//!
//! JSON goes to stdout (or `-o`), diagnostics to stderr. Exit status 2 marks
//! bad arguments or input, 3 an action that cannot be implemented, 4 an
//! exhausted iteration or size limit.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use contract_forge_core::blackbox::{blackbox_contract, negative_pair, sampling_checks, BlackBoxParams, QueryOracle};
use contract_forge_core::delta_solver::{
    min_payment_delta, opt_contract_delta_per_action, DeltaConfig, DeltaSolveResult, SolveMethod,
};
use contract_forge_core::exact::{min_payment, opt_contract};
use contract_forge_core::generators::{self as gens, Cnf};
use contract_forge_core::linear::{approx_linear_delta, optimal_linear, optimal_separable};
use contract_forge_core::model::{best_response, first_best, ic_slack, SettingOptions};
use contract_forge_core::oracle::{min_ratio_bruteforce, min_ratio_fptas_with_stats};
use contract_forge_core::transform::{delta_to_ic, delta_to_ir};
use contract_forge_core::{Error, IcNotion, Instance, ProductSetting, Setting, Tolerances};
use serde_json::{json, Value};

use crate::bench::{run_bench, BenchParams};
use crate::formats::{
    contract_from_json, contract_to_json, instance_to_json, parse_contract, parse_dimacs, parse_instance,
    parse_separation, OutcomeStyle,
};
use crate::report::{write_csv, Provenance, TraceCsvRow, TrialCsvRow};

#[derive(Debug, Parser)]
#[command(
    name = "contract-forge",
    version,
    about = "Optimal and approximately incentive-compatible contracts"
)]
pub struct Cli {
    /// Seed for every random choice; recorded in all outputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override the feasibility, duality-gap, tie and IC tolerances.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Accept instances whose action 0 has a positive cost.
    #[arg(long, global = true)]
    pub allow_no_free_action: bool,
    /// Write the main output here instead of stdout.
    #[arg(short = 'o', long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NotionArg {
    Mult,
    Add,
}

impl From<NotionArg> for IcNotion {
    fn from(n: NotionArg) -> Self {
        match n {
            NotionArg::Mult => IcNotion::Multiplicative,
            NotionArg::Add => IcNotion::Additive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cuts,
    Ellipsoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Ic,
    Ir,
}

#[derive(Debug, Args)]
pub struct InstanceArg {
    /// Instance JSON; `-` or absent reads stdin.
    #[arg(long)]
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact optimal contract by enumerating outcomes.
    Solve {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, value_enum, default_value = "mult")]
        notion: NotionArg,
        /// Only the cheapest contract for this action.
        #[arg(long)]
        action: Option<usize>,
    },
    /// Multiplicatively delta-IC contracts for product settings without
    /// enumerating outcomes.
    DeltaSolve {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        action: Option<usize>,
        #[arg(long, value_enum, default_value = "cuts")]
        method: MethodArg,
        /// Write every separation round as CSV here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Bisection width on the payment, in reward units.
        #[arg(long)]
        eps_search: Option<f64>,
    },
    /// Linear contracts: optimal, or the interval scheme with `--gamma`; or
    /// the optimal separable contract with `--separable`.
    Linear {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, conflicts_with = "gamma")]
        separable: bool,
    },
    /// Minimum likelihood ratio over outcomes.
    Oracle {
        /// Separation query JSON; `-` or absent reads stdin.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, required_unless_present = "brute")]
        eps: Option<f64>,
        #[arg(long)]
        brute: bool,
    },
    /// Turn a delta-IC contract into an IC or an IR one.
    Transform {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long)]
        contract: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum)]
        to: TargetArg,
    },
    /// Contracts from sampled outcomes; one CSV row per trial.
    Blackbox {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long, required_unless_present = "negative_pair")]
        eps: Option<f64>,
        #[arg(long, required_unless_present = "negative_pair")]
        gamma: Option<f64>,
        /// Lower bound on positive outcome probabilities; read from the
        /// instance when absent.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Instead of solving, measure how often `2 * samples` draws tell the
        /// two hard settings apart, for this eta.
        #[arg(long, conflicts_with_all = ["eps", "gamma", "eta"])]
        negative_pair: Option<f64>,
        #[arg(long, requires = "negative_pair")]
        samples: Option<u64>,
    },
    /// Generate an instance.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Worst incentive margin of an action under a contract.
    Verify {
        #[command(flatten)]
        input: InstanceArg,
        #[arg(long)]
        contract: PathBuf,
        /// Defaults to the action recorded in a solver result, else the
        /// agent's best response.
        #[arg(long)]
        action: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[arg(long, value_enum, default_value = "mult")]
        notion: NotionArg,
    },
    /// Solve a corpus of random product settings with every method; CSV.
    Bench {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        count: u64,
        /// Worker threads; output order does not depend on it.
        #[arg(long)]
        jobs: Option<usize>,
        /// Also run the delta solver and, with `--gamma`, the interval scheme.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, requires = "delta")]
        gamma: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// One item, c actions, a constant-factor gap between welfare and
    /// what approximately IC contracts can extract.
    Gap {
        #[arg(long)]
        c: usize,
        #[arg(long)]
        gamma: f64,
    },
    /// One zero-cost action per clause of a DIMACS formula.
    Sat {
        #[arg(long)]
        cnf: PathBuf,
    },
    /// SAT rows combined with the two-action gap setting.
    Product2 {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        eps: f64,
    },
    /// SAT rows combined with the c-action gap setting.
    Productc {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        c: usize,
        #[arg(long)]
        eps: f64,
    },
    /// Three actions encoding an equal-product split of integers >= 3.
    Minmax {
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<u64>,
    },
    /// Two actions where a delta-IC contract earns 4/3 of the IC optimum.
    #[command(alias = "a3")]
    DeltaAdvantage {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Two actions where separable contracts lose almost half the optimum.
    #[command(alias = "f")]
    SeparableGap {
        #[arg(long, required_unless_present = "ratio_eps")]
        delta: Option<f64>,
        /// Pick delta so the optimum is `2 - eps` times the separable payoff.
        #[arg(long, conflicts_with = "delta")]
        ratio_eps: Option<f64>,
    },
    /// Uniform random product setting, normalized, seeded by `--seed`.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
    },
    /// One of the two settings that are hard to tell apart by sampling.
    NegativePair {
        #[arg(long)]
        eta: f64,
        /// 1 or 2.
        #[arg(long, default_value_t = 1)]
        which: u8,
    },
}

/// Exit status for an error: 2 for bad arguments or input, 3 for
/// non-implementable actions, 4 for exhausted limits, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::Unsupported(_)) => 2,
        Some(Error::NotImplementable { .. }) => 3,
        Some(Error::IterationLimit { .. } | Error::ResourceLimit(_)) => 4,
        Some(Error::Numerical(_)) => 1,
        None => 2,
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

fn tolerances(cli: &Cli) -> Result<Tolerances> {
    let mut t = Tolerances::default();
    if let Some(v) = cli.tol {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("--tol {v} must be positive")).into());
        }
        t.feas = v;
        t.gap = v;
        t.tie = v;
        t.ic = v;
    }
    Ok(t)
}

fn read_text(path: Option<&Path>) -> Result<String> {
    match path {
        None => read_stdin(),
        Some(p) if p.as_os_str() == "-" => read_stdin(),
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
    }
}

fn read_stdin() -> Result<String> {
    let mut s = String::new();
    io::stdin().read_to_string(&mut s).context("reading stdin")?;
    Ok(s)
}

fn options(cli: &Cli) -> SettingOptions {
    SettingOptions {
        allow_no_free_action: cli.allow_no_free_action,
    }
}

fn load_instance(cli: &Cli, input: &InstanceArg) -> Result<Instance> {
    parse_instance(&read_text(input.instance.as_deref())?, options(cli))
}

fn require_product(instance: Instance, what: &str) -> Result<ProductSetting> {
    match instance {
        Instance::Product(p) => Ok(p),
        Instance::Explicit(_) => Err(Error::Unsupported(format!("{what} needs a product setting")).into()),
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) if p.as_os_str() != "-" => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        _ => Box::new(io::stdout().lock()),
    })
}

fn emit_json(cli: &Cli, provenance: &Provenance, mut body: Value) -> Result<()> {
    if let Value::Object(map) = &mut body {
        map.insert("provenance".into(), provenance.to_json());
    }
    let mut out = open_output(cli.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &body)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn notion_name(n: IcNotion) -> &'static str {
    match n {
        IcNotion::Multiplicative => "mult",
        IcNotion::Additive => "add",
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Solve {
            input,
            delta,
            notion,
            action,
        } => {
            let inst = load_instance(cli, input)?;
            let ex = inst.to_explicit()?;
            let notion = IcNotion::from(*notion);
            let style = OutcomeStyle::for_instance(&inst);
            let prov = Provenance::new(
                "solve",
                cli.seed,
                json!({"delta": delta, "notion": notion_name(notion), "action": action}),
            );
            let body = match action {
                Some(a) => {
                    let r = min_payment(&ex, *a, *delta, notion, &tol)?;
                    json!({
                        "action": r.action,
                        "expected_payment": r.expected_payment,
                        "payoff": inst.expected_reward(r.action) - r.expected_payment,
                        "contract": contract_to_json(&r.contract, style),
                    })
                }
                None => {
                    let r = opt_contract(&ex, *delta, notion, &tol)?;
                    json!({
                        "action": r.action,
                        "payoff": r.payoff,
                        "expected_payment": r.expected_payment,
                        "first_best": first_best(&inst),
                        "contract": contract_to_json(&r.contract, style),
                    })
                }
            };
            emit_json(cli, &prov, body)
        }
        Command::DeltaSolve {
            input,
            delta,
            action,
            method,
            trace,
            eps_search,
        } => {
            let p = require_product(load_instance(cli, input)?, "delta-solve")?;
            let cfg = DeltaConfig {
                tol,
                eps_search: *eps_search,
                method: match method {
                    MethodArg::Cuts => SolveMethod::CuttingPlane,
                    MethodArg::Ellipsoid => SolveMethod::Ellipsoid,
                },
                ..DeltaConfig::default()
            };
            let prov = Provenance::new(
                "delta-solve",
                cli.seed,
                json!({"delta": delta, "action": action, "method": format!("{method:?}").to_lowercase(), "eps_search": eps_search}),
            );
            let (body, solves) = match action {
                Some(a) => {
                    let r = min_payment_delta(&p, *a, *delta, &cfg)?;
                    let body = delta_result_json(&p, &r, *delta)?;
                    (body, vec![r])
                }
                None => {
                    let (best, all) = opt_contract_delta_per_action(&p, *delta, &cfg)?;
                    let per_action: Vec<Value> = all
                        .iter()
                        .map(|r| delta_result_json(&p, r, *delta))
                        .collect::<Result<_>>()?;
                    let body = json!({
                        "action": best.action,
                        "payoff": best.payoff,
                        "expected_payment": best.expected_payment,
                        "contract": contract_to_json(&best.contract, OutcomeStyle::Items),
                        "per_action": per_action,
                    });
                    (body, all)
                }
            };
            if let Some(path) = trace {
                let rows: Vec<TraceCsvRow> = solves
                    .iter()
                    .flat_map(|r| r.trace.iter().map(move |t| TraceCsvRow::new(r.action, t)))
                    .collect();
                write_csv(open_output(Some(path))?, &prov, &rows)?;
            }
            emit_json(cli, &prov, body)
        }
        Command::Linear {
            input,
            delta,
            gamma,
            separable,
        } => {
            let inst = load_instance(cli, input)?;
            let prov = Provenance::new(
                "linear",
                cli.seed,
                json!({"delta": delta, "gamma": gamma, "separable": separable}),
            );
            let body = if *separable {
                let p = require_product(inst, "a separable contract")?;
                let r = optimal_separable(&p, *delta, &tol)?;
                let c = contract_forge_core::Contract::Separable {
                    item_payments: r.item_payments.clone(),
                };
                json!({
                    "action": r.action,
                    "payoff": r.payoff,
                    "contract": contract_to_json(&c, OutcomeStyle::Items),
                })
            } else if let Some(g) = gamma {
                let r = approx_linear_delta(&inst, *delta, *g)?;
                let candidates: Vec<Value> = r
                    .candidates
                    .iter()
                    .map(|c| json!({"interval": c.interval, "alpha": c.alpha, "action": c.action, "payoff": c.payoff}))
                    .collect();
                json!({
                    "action": r.action,
                    "alpha": r.alpha,
                    "payoff": r.payoff,
                    "kappa": r.kappa,
                    "first_best": r.first_best,
                    "guarantee": r.guarantee,
                    "telescoping_sum": r.telescoping_sum,
                    "interval_starts": r.interval_starts,
                    "candidates": candidates,
                    "contract": contract_to_json(&r.contract(), OutcomeStyle::Items),
                })
            } else {
                let r = optimal_linear(&inst, *delta, &tol)?;
                json!({
                    "action": r.action,
                    "alpha": r.alpha,
                    "payoff": r.payoff,
                    "contract": contract_to_json(&r.contract(), OutcomeStyle::Items),
                })
            };
            emit_json(cli, &prov, body)
        }
        Command::Oracle { instance, eps, brute } => {
            let q = parse_separation(&read_text(instance.as_deref())?)?;
            let prov = Provenance::new("oracle", cli.seed, json!({"eps": eps, "brute": brute}));
            let body = if *brute {
                let r = min_ratio_bruteforce(&q)?;
                json!({"method": "bruteforce", "outcome": r.outcome.items().collect::<Vec<_>>(), "ratio": r.ratio})
            } else {
                let eps = eps.ok_or_else(|| anyhow!("--eps is required"))?;
                let (r, stats) = min_ratio_fptas_with_stats(&q, eps)?;
                json!({
                    "method": "fptas",
                    "outcome": r.outcome.items().collect::<Vec<_>>(),
                    "ratio": r.ratio,
                    "stats": {
                        "families": stats.families,
                        "finalists": stats.finalists,
                        "t": stats.t,
                        "family_bound": stats.family_bound,
                    },
                })
            };
            emit_json(cli, &prov, body)
        }
        Command::Transform {
            input,
            contract,
            delta,
            to,
        } => {
            let inst = load_instance(cli, input)?;
            let c = parse_contract(&read_text(Some(contract))?)?;
            let style = OutcomeStyle::for_instance(&inst);
            let prov = Provenance::new(
                "transform",
                cli.seed,
                json!({"delta": delta, "to": format!("{to:?}").to_lowercase()}),
            );
            let body = match to {
                TargetArg::Ic => {
                    let t = delta_to_ic(&inst, &c, *delta, &tol)?;
                    json!({
                        "source_action": t.source_action,
                        "source_payoff": t.source_payoff,
                        "payoff_bound": t.payoff_bound,
                        "action": t.action,
                        "payoff": t.payoff,
                        "contract": contract_to_json(&t.contract, style),
                    })
                }
                TargetArg::Ir => {
                    let t = delta_to_ir(&inst, &c, *delta, &tol)?;
                    json!({
                        "source_action": t.source_action,
                        "source_payoff": t.source_payoff,
                        "action": t.action,
                        "payoff": t.payoff,
                        "agent_utility": t.agent_utility,
                        "contract": contract_to_json(&t.contract, style),
                    })
                }
            };
            emit_json(cli, &prov, body)
        }
        Command::Blackbox {
            input,
            eps,
            gamma,
            eta,
            trials,
            negative_pair: Some(pair_eta),
            samples,
        } => {
            let _ = (input, eps, gamma, eta);
            let samples =
                samples.ok_or_else(|| Error::InvalidArgument("--samples is required with --negative-pair".into()))?;
            let prov = Provenance::new(
                "blackbox",
                cli.seed,
                json!({"negative_pair": pair_eta, "samples": samples, "trials": trials}),
            );
            emit_json(
                cli,
                &prov,
                negative_pair_experiment(*pair_eta, samples, *trials, cli.seed)?,
            )
        }
        Command::Blackbox {
            input,
            eps,
            gamma,
            eta,
            trials,
            ..
        } => {
            let inst = load_instance(cli, input)?;
            let params = BlackBoxParams {
                eps: eps.ok_or_else(|| anyhow!("--eps is required"))?,
                gamma: gamma.ok_or_else(|| anyhow!("--gamma is required"))?,
                eta: *eta,
            };
            let prov = Provenance::new(
                "blackbox",
                cli.seed,
                json!({"eps": params.eps, "gamma": params.gamma, "eta": eta, "trials": trials}),
            );
            let rows = blackbox_trials(&inst, params, *trials, cli.seed, &tol)?;
            let ok = rows
                .iter()
                .filter(|r| r.ic_slack >= -4.0 * params.eps && r.payoff >= r.opt - 5.0 * params.eps)
                .count();
            eprintln!("{ok}/{} trials within the sampling guarantee", rows.len());
            write_csv(open_output(cli.output.as_deref())?, &prov, &rows)
        }
        Command::Gen { kind } => {
            let (name, params, inst, meta) = generate(kind, cli.seed)?;
            let mut prov = Provenance::new(&format!("gen {name}"), cli.seed, params).to_json();
            if !meta.is_null() {
                prov["metadata"] = meta;
            }
            let mut out = open_output(cli.output.as_deref())?;
            serde_json::to_writer_pretty(&mut out, &instance_to_json(&inst, Some(prov)))?;
            out.write_all(b"\n")?;
            out.flush()?;
            Ok(())
        }
        Command::Verify {
            input,
            contract,
            action,
            delta,
            notion,
        } => {
            let inst = load_instance(cli, input)?;
            let value: Value =
                serde_json::from_str(&read_text(Some(contract))?).context("contract is not valid JSON")?;
            // A solver result names the action its contract targets.
            let recorded = value.get("action").and_then(Value::as_u64).map(|a| a as usize);
            let c = contract_from_json(value)?;
            let notion = IcNotion::from(*notion);
            let br = best_response(&inst, &c, &tol)?;
            let a = action.or(recorded).unwrap_or(br.action);
            let slack = ic_slack(&inst, &c, a, *delta, notion)?;
            if notion == IcNotion::Additive && *delta > 0.0 && !inst.is_normalized(tol.tie) {
                log::warn!("additive slack on a setting with expected rewards above 1");
            }
            let prov = Provenance::new(
                "verify",
                cli.seed,
                json!({"action": a, "delta": delta, "notion": notion_name(notion)}),
            );
            let body = json!({
                "action": a,
                "delta": delta,
                "notion": notion_name(notion),
                "slack": slack,
                "holds": slack >= -tol.ic,
                "expected_payment": inst.expected_payment(a, &c)?,
                "payoff": inst.expected_reward(a) - inst.expected_payment(a, &c)?,
                "best_response": {
                    "action": br.action,
                    "agent_utility": br.agent_utility,
                    "principal_payoff": br.principal_payoff,
                },
            });
            emit_json(cli, &prov, body)
        }
        Command::Bench {
            n,
            m,
            count,
            jobs,
            delta,
            gamma,
        } => {
            let params = BenchParams {
                n: *n,
                m: *m,
                count: *count,
                seed: cli.seed,
                delta: *delta,
                gamma: *gamma,
                jobs: *jobs,
            };
            let prov = Provenance::new(
                "bench",
                cli.seed,
                json!({"n": n, "m": m, "count": count, "delta": delta, "gamma": gamma}),
            );
            let rows = run_bench(&params, &tol)?;
            write_csv(open_output(cli.output.as_deref())?, &prov, &rows)
        }
    }
}

fn delta_result_json(p: &ProductSetting, r: &DeltaSolveResult, delta: f64) -> Result<Value> {
    Ok(json!({
        "action": r.action,
        "expected_payment": r.expected_payment,
        "payoff": p.expected_reward(r.action) - r.expected_payment,
        "gamma_star": r.gamma_star,
        "gamma_lower": r.gamma_lower,
        "lambda": r.lambda,
        "cuts": r.cuts.iter().map(|s| s.items().collect::<Vec<_>>()).collect::<Vec<_>>(),
        "slack": ic_slack(p, &r.contract, r.action, delta, IcNotion::Multiplicative)?,
        "contract": contract_to_json(&r.contract, OutcomeStyle::Items),
    }))
}

/// Trial `t` samples with seed `seed + t`.
pub fn blackbox_trials(
    inst: &Instance,
    params: BlackBoxParams,
    trials: u64,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<TrialCsvRow>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("--trials must be at least 1".into()).into());
    }
    let opt = opt_contract(&inst.to_explicit()?, 0.0, IcNotion::Additive, tol)?.payoff;
    (0..trials)
        .map(|t| {
            let s = seed.wrapping_add(t);
            let mut oracle = QueryOracle::from_seed(inst.clone(), s);
            let r = blackbox_contract(&mut oracle, params, tol)?;
            let checks = sampling_checks(inst, &r.model, &r, params.eps, tol)?;
            Ok(TrialCsvRow {
                trial: t,
                seed: s,
                samples: r.samples_per_action,
                action: r.action,
                ic_slack: r.ic_slack_on_true,
                payoff: r.payoff_on_true,
                opt,
                accurate: checks.accurate,
                margin_true_optimum_on_estimate: checks.true_optimum_on_estimate,
                margin_estimate_on_truth: checks.estimate_on_truth,
                margin_payoff_transfer: checks.payoff_transfer,
                margin_optimum_transfer: checks.optimum_transfer,
            })
        })
        .collect()
}

/// Fraction of `trials` runs in which `2 * samples` draws of the second
/// action in the first setting show item 0, against the closed form.
pub fn negative_pair_experiment(eta: f64, samples: u64, trials: u64, seed: u64) -> Result<Value> {
    if trials == 0 || samples == 0 {
        return Err(Error::InvalidArgument("--samples and --trials must be positive".into()).into());
    }
    let (one, _, a) = negative_pair(eta)?;
    let mut oracle = QueryOracle::from_seed(Instance::Product(one), seed);
    let hits = (0..trials)
        .filter(|_| (0..2 * samples).any(|_| oracle.query(1).contains(0)))
        .count();
    let predicted = a.detection_probability(2 * samples);
    let observed = hits as f64 / trials as f64;
    let std_error = (predicted * (1.0 - predicted) / trials as f64).sqrt();
    Ok(json!({
        "eta": eta,
        "tau": a.tau,
        "mu": a.mu,
        "beta": a.beta,
        "expected_rewards": a.expected_rewards,
        "optimal_payoff": a.optimal_payoff,
        "symmetric_payoff_limit": a.symmetric_payoff_limit,
        "samples": samples,
        "trials": trials,
        "observed": observed,
        "predicted": predicted,
        "std_error": std_error,
    }))
}

fn read_cnf(path: &Path) -> Result<Cnf> {
    parse_dimacs(&read_text(Some(path))?)
}

type Generated = (&'static str, Value, Instance, Value);

fn generate(kind: &GenKind, seed: u64) -> Result<Generated> {
    Ok(match kind {
        GenKind::Gap { c, gamma } => (
            "gap",
            json!({"c": c, "gamma": gamma}),
            Instance::Product(gens::gen_gap(*c, *gamma)?),
            Value::Null,
        ),
        GenKind::Sat { cnf } => {
            let f = read_cnf(cnf)?;
            (
                "sat",
                json!({"cnf": cnf}),
                Instance::Product(gens::gen_sat(&f)?),
                Value::Null,
            )
        }
        GenKind::Product2 { cnf, eps } => {
            let f = read_cnf(cnf)?;
            (
                "product2",
                json!({"cnf": cnf, "eps": eps}),
                Instance::Product(gens::gen_product2(&f, *eps)?),
                Value::Null,
            )
        }
        GenKind::Productc { cnf, c, eps } => {
            let f = read_cnf(cnf)?;
            (
                "productc",
                json!({"cnf": cnf, "c": c, "eps": eps}),
                Instance::Product(gens::gen_productc(&f, *c, *eps)?),
                Value::Null,
            )
        }
        GenKind::Minmax { a } => {
            let mm = gens::gen_minmax(a)?;
            let meta = json!({"ell": mm.ell, "root": mm.root, "slack": mm.slack, "cost": mm.cost, "reward": mm.reward});
            ("minmax", json!({"a": a}), Instance::Product(mm.setting), meta)
        }
        GenKind::DeltaAdvantage { eps, delta } => {
            let d = gens::gen_delta_advantage(*eps, *delta)?;
            let meta = json!({
                "ic_payoff": d.ic_payoff,
                "delta_payoff": d.delta_payoff,
                "delta_contract": contract_to_json(&d.delta_contract, OutcomeStyle::Items),
            });
            (
                "delta-advantage",
                json!({"eps": eps, "delta": delta}),
                Instance::Product(d.setting),
                meta,
            )
        }
        GenKind::SeparableGap { delta, ratio_eps } => {
            let d = match (delta, ratio_eps) {
                (Some(d), None) => *d,
                (None, Some(e)) => gens::separable_gap_delta(*e)?,
                _ => bail!("give exactly one of --delta and --ratio-eps"),
            };
            let g = gens::gen_separable_gap(d)?;
            let meta = json!({
                "delta": g.delta,
                "expected_rewards": g.expected_rewards,
                "optimal_payoff": g.optimal_payoff,
                "separable_payoff": g.separable_payoff,
                "optimal_contract": contract_to_json(&g.optimal_contract, OutcomeStyle::Items),
                "separable_contract": contract_to_json(&g.separable_contract, OutcomeStyle::Items),
            });
            (
                "separable-gap",
                json!({"delta": delta, "ratio_eps": ratio_eps}),
                Instance::Product(g.setting),
                meta,
            )
        }
        GenKind::Random { n, m } => (
            "random",
            json!({"n": n, "m": m}),
            Instance::Product(gens::gen_random(*n, *m, seed)?),
            Value::Null,
        ),
        GenKind::NegativePair { eta, which } => {
            let (one, two, a) = negative_pair(*eta)?;
            let s = match which {
                1 => one,
                2 => two,
                w => return Err(Error::InvalidArgument(format!("--which {w}: expected 1 or 2")).into()),
            };
            let meta = json!({
                "tau": a.tau,
                "mu": a.mu,
                "beta": a.beta,
                "optimal_payoff": a.optimal_payoff,
                "symmetric_payoff_limit": a.symmetric_payoff_limit,
            });
            (
                "negative-pair",
                json!({"eta": eta, "which": which}),
                Instance::Product(s),
                meta,
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arguments_parse() {
        Cli::try_parse_from(["contract-forge", "solve", "--delta", "0.1", "--notion", "add"]).unwrap();
        Cli::try_parse_from([
            "contract-forge",
            "--seed",
            "4",
            "gen",
            "a3",
            "--eps",
            "0.3",
            "--delta",
            "0.5",
        ])
        .unwrap();
        Cli::try_parse_from(["contract-forge", "gen", "minmax", "--a", "3,3"]).unwrap();
        Cli::try_parse_from([
            "contract-forge",
            "blackbox",
            "--negative-pair",
            "0.001",
            "--samples",
            "10",
        ])
        .unwrap();
        assert!(Cli::try_parse_from(["contract-forge", "solve", "--bogus"]).is_err());
        assert!(Cli::try_parse_from(["contract-forge", "oracle"]).is_err());
        assert!(Cli::try_parse_from(["contract-forge", "gen", "f"]).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::NotImplementable { action: 1 }.into()), 3);
        assert_eq!(exit_code(&Error::ResourceLimit("x".into()).into()), 4);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into()).into()), 2);
        assert_eq!(exit_code(&anyhow!("bad json")), 2);
    }

    #[test]
    fn negative_pair_measurement_is_seeded() {
        let a = negative_pair_experiment(1e-3, 5, 50, 9).unwrap();
        assert_eq!(a, negative_pair_experiment(1e-3, 5, 50, 9).unwrap());
    }

    #[test]
    fn items_helper() {
        use crate::report::items;
        assert_eq!(items(contract_forge_core::Outcome(0b101)), "0;2");
    }
}
