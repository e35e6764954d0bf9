//! Random-corpus benchmark: every method on the same seeded settings.
//!
//! The exact, linear, separable and interval-scheme columns all use additive
//! `delta`-IC, so they are directly comparable; the delta-solver column is
//! multiplicative.

use anyhow::Result;
use contract_forge_core::delta_solver::{opt_contract_delta, DeltaConfig};
use contract_forge_core::exact::opt_contract_product;
use contract_forge_core::generators::gen_random;
use contract_forge_core::linear::{approx_linear_delta, optimal_linear, optimal_separable};
use contract_forge_core::model::first_best;
use contract_forge_core::{IcNotion, Tolerances};
use rayon::prelude::*;

use crate::report::BenchCsvRow;

#[derive(Debug, Clone)]
pub struct BenchParams {
    pub n: usize,
    pub m: usize,
    pub count: u64,
    pub seed: u64,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub jobs: Option<usize>,
}

fn bench_one(p: &BenchParams, id: u64, tol: &Tolerances) -> Result<BenchCsvRow> {
    let seed = p.seed.wrapping_add(id);
    let s = gen_random(p.n, p.m, seed)?;
    let delta = p.delta.unwrap_or(0.0);
    let exact = opt_contract_product(&s, delta, IcNotion::Additive, tol)?;
    let lin = optimal_linear(&s, delta, tol)?;
    let sep = optimal_separable(&s, delta, tol)?;
    let approx = match (p.delta, p.gamma) {
        (Some(d), Some(g)) => Some(approx_linear_delta(&s, d, g)?.payoff),
        _ => None,
    };
    let dsolve = match p.delta {
        Some(d) => {
            let cfg = DeltaConfig {
                tol: *tol,
                ..DeltaConfig::default()
            };
            Some(opt_contract_delta(&s, d, &cfg)?.payoff)
        }
        None => None,
    };
    Ok(BenchCsvRow {
        id,
        seed,
        n: p.n,
        m: p.m,
        first_best: first_best(&s),
        exact_action: exact.action,
        exact_payoff: exact.payoff,
        linear_payoff: lin.payoff,
        separable_payoff: sep.payoff,
        approx_linear_payoff: approx,
        delta_payoff: dsolve,
    })
}

/// Rows come back in id order whatever the thread count.
pub fn run_bench(p: &BenchParams, tol: &Tolerances) -> Result<Vec<BenchCsvRow>> {
    let work = || {
        (0..p.count)
            .into_par_iter()
            .map(|id| bench_one(p, id, tol))
            .collect::<Result<Vec<_>>>()
    };
    match p.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()?
            .install(work),
        None => work(),
    }
}
