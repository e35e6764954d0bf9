//! Provenance records and the CSV tables written by experiments.

use std::io::Write;

use anyhow::Result;
use contract_forge_core::delta_solver::{TraceRow, Verdict};
use contract_forge_core::Outcome;
use serde::Serialize;
use serde_json::{json, Value};

/// Identifies the tool, version, command, seed and parameters behind an
/// output. Contains nothing time- or host-dependent, so reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub params: Value,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, params: Value) -> Self {
        Provenance {
            command: command.to_string(),
            seed,
            params,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "tool": "contract-forge",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
            "params": self.params,
        })
    }

    /// One `#`-prefixed line placed above a CSV header.
    pub fn csv_comment(&self) -> String {
        format!(
            "# contract-forge {} command={} seed={} params={}\n",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.seed,
            self.params
        )
    }
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn items(s: Outcome) -> String {
    join(s.items())
}

#[derive(Debug, Serialize)]
pub struct TraceCsvRow {
    pub action: usize,
    pub bisection: usize,
    pub round: usize,
    pub gamma: f64,
    pub verdict: &'static str,
    pub cut: String,
    pub ratio: Option<f64>,
    pub threshold: Option<f64>,
    pub lambda: String,
}

impl TraceCsvRow {
    pub fn new(action: usize, row: &TraceRow) -> Self {
        TraceCsvRow {
            action,
            bisection: row.bisection,
            round: row.round,
            gamma: row.gamma,
            verdict: match row.verdict {
                Verdict::Feasible => "feasible",
                Verdict::Infeasible => "infeasible",
                Verdict::Cut => "cut",
            },
            cut: row.cut.map(items).unwrap_or_default(),
            ratio: row.ratio,
            threshold: row.threshold,
            lambda: join(&row.lambda),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrialCsvRow {
    pub trial: u64,
    pub seed: u64,
    pub samples: u64,
    pub action: usize,
    pub ic_slack: f64,
    pub payoff: f64,
    pub opt: f64,
    pub accurate: bool,
    pub margin_true_optimum_on_estimate: f64,
    pub margin_estimate_on_truth: f64,
    pub margin_payoff_transfer: f64,
    pub margin_optimum_transfer: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchCsvRow {
    pub id: u64,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub first_best: f64,
    pub exact_action: usize,
    pub exact_payoff: f64,
    pub linear_payoff: f64,
    pub separable_payoff: f64,
    pub approx_linear_payoff: Option<f64>,
    pub delta_payoff: Option<f64>,
}

/// Writes `rows` as CSV under a provenance comment.
pub fn write_csv<W: Write, R: Serialize>(mut out: W, provenance: &Provenance, rows: &[R]) -> Result<()> {
    out.write_all(provenance.csv_comment().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
