//! Contract design from sampled outcomes, and the pair of product settings
//! that makes sampling expensive.
//!
//! The principal knows costs and rewards but only sees outcome distributions
//! through an oracle that draws one outcome per query. With `s` queries per
//! action the empirical frequencies are within a factor `1 +- eps` of the true
//! probabilities, for every outcome of probability at least `eta`, except with
//! probability `gamma`. An optimal `2 eps`-IC contract for the empirical
//! setting is then `4 eps`-IC and within `5 eps` of optimal for the true one.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::opt_contract;
use crate::math::{ceil, ln, powi, sqrt};
use crate::model::{
    ic_slack, Contract, ExplicitSetting, IcNotion, Instance, Outcome, ProductSetting, Setting, SparseContract,
};
use crate::tol::Tolerances;

/// `ceil(3 ln(2n / (eta gamma)) / (eta eps^2))` queries per action.
pub fn required_samples(n: usize, eta: f64, eps: f64, gamma: f64) -> Result<u64> {
    if n == 0 {
        return Err(Error::arg("at least one action is required"));
    }
    for (name, v) in [("eta", eta), ("eps", eps), ("gamma", gamma)] {
        if !v.is_finite() || v <= 0.0 || v > 1.0 {
            return Err(Error::arg(format!("{name} = {v} must lie in (0, 1]")));
        }
    }
    let s = ceil(3.0 * ln(2.0 * n as f64 / (eta * gamma)) / (eta * eps * eps));
    if !(s < u64::MAX as f64) {
        return Err(Error::ResourceLimit(format!("{s} samples per action")));
    }
    Ok(s as u64)
}

/// Sampling access to a hidden setting.
#[derive(Debug, Clone)]
pub struct QueryOracle<R: RngCore> {
    hidden: Instance,
    rng: R,
    queries: u64,
}

impl QueryOracle<ChaCha8Rng> {
    pub fn from_seed(hidden: Instance, seed: u64) -> Self {
        QueryOracle::new(hidden, ChaCha8Rng::seed_from_u64(seed))
    }
}

impl<R: RngCore> QueryOracle<R> {
    pub fn new(hidden: Instance, rng: R) -> Self {
        QueryOracle {
            hidden,
            rng,
            queries: 0,
        }
    }

    pub fn hidden(&self) -> &Instance {
        &self.hidden
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    /// Smallest positive outcome probability of the hidden setting.
    pub fn eta(&self) -> f64 {
        match &self.hidden {
            Instance::Product(p) => p.min_positive_outcome_probability(),
            Instance::Explicit(e) => e
                .dist()
                .iter()
                .flatten()
                .copied()
                .filter(|&q| q > 0.0)
                .fold(1.0, f64::min),
        }
    }

    /// Draws one outcome of `action`.
    pub fn query(&mut self, action: usize) -> Outcome {
        self.queries += 1;
        match &self.hidden {
            Instance::Product(p) => {
                let mut s = Outcome::EMPTY;
                for (j, &q) in p.probs()[action].iter().enumerate() {
                    let u: f64 = self.rng.random();
                    if u < q {
                        s = s.with(j);
                    }
                }
                s
            }
            Instance::Explicit(e) => {
                let row = &e.dist()[action];
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut last = 0;
                for (k, &q) in row.iter().enumerate() {
                    if q > 0.0 {
                        last = k;
                        acc += q;
                        if u < acc {
                            return Outcome(k as u64);
                        }
                    }
                }
                Outcome(last as u64)
            }
        }
    }
}

/// Outcome counts from `samples` queries per action.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    pub samples: u64,
    pub counts: Vec<BTreeMap<Outcome, u64>>,
}

impl EmpiricalModel {
    pub fn frequency(&self, action: usize, outcome: Outcome) -> f64 {
        self.counts[action].get(&outcome).copied().unwrap_or(0) as f64 / self.samples as f64
    }

    /// Every observed outcome, ascending.
    pub fn observed(&self) -> Vec<Outcome> {
        let mut all: Vec<Outcome> = self.counts.iter().flat_map(|c| c.keys().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Expected payment of `action` under the empirical frequencies.
    pub fn expected_payment(&self, setting: &Instance, action: usize, contract: &Contract) -> f64 {
        self.counts[action]
            .iter()
            .map(|(&s, &n)| n as f64 / self.samples as f64 * payment_on(setting, contract, s))
            .sum()
    }

    /// Explicit setting over the observed outcomes, with the known costs and
    /// rewards. Outcome `k` of the result is `self.observed()[k]`.
    pub fn to_explicit(&self, setting: &Instance) -> Result<ExplicitSetting> {
        let observed = self.observed();
        let rewards = observed.iter().map(|&s| setting.outcome_reward(s)).collect();
        let dist = (0..self.counts.len())
            .map(|i| observed.iter().map(|&s| self.frequency(i, s)).collect())
            .collect();
        ExplicitSetting::with_options(
            setting.costs(),
            rewards,
            dist,
            crate::model::SettingOptions {
                allow_no_free_action: true,
            },
        )
    }

    /// Whether every outcome of positive probability has frequency within a
    /// factor `1 +- eps`, and no other outcome was seen.
    pub fn within_factor(&self, setting: &Instance, eps: f64) -> Result<bool> {
        for s in setting.support()? {
            for i in 0..self.counts.len() {
                let q = setting.outcome_probability(i, s);
                let f = self.frequency(i, s);
                if q > 0.0 && ((f - q).abs() > eps * q) || q == 0.0 && f > 0.0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Payment on one outcome for the kinds of contract the sampler produces.
fn payment_on(setting: &Instance, contract: &Contract, s: Outcome) -> f64 {
    match contract {
        Contract::Sparse(c) => c.pay(s),
        Contract::Linear { alpha } => alpha * setting.outcome_reward(s),
        Contract::Separable { item_payments } => s.items().filter_map(|j| item_payments.get(j)).sum(),
        Contract::Mixed { sparse, alpha } => sparse.pay(s) + alpha * setting.outcome_reward(s),
    }
}

pub fn estimate<R: RngCore>(oracle: &mut QueryOracle<R>, samples: u64) -> Result<EmpiricalModel> {
    if samples == 0 {
        return Err(Error::arg("at least one sample per action is required"));
    }
    let n = oracle.hidden.num_actions();
    let mut counts = vec![BTreeMap::new(); n];
    for (i, c) in counts.iter_mut().enumerate() {
        for _ in 0..samples {
            *c.entry(oracle.query(i)).or_insert(0u64) += 1;
        }
    }
    Ok(EmpiricalModel { samples, counts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackBoxParams {
    pub eps: f64,
    pub gamma: f64,
    /// Lower bound on positive outcome probabilities; read from the hidden
    /// setting when absent.
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackBoxResult {
    pub contract: Contract,
    pub action: usize,
    pub samples_per_action: u64,
    pub empirical_payoff: f64,
    pub payoff_on_true: f64,
    /// Worst exact-IC margin of `action` on the true setting; `>= -4 eps`
    /// when the estimate is accurate.
    pub ic_slack_on_true: f64,
    pub model: EmpiricalModel,
}

/// Samples, then solves the empirical setting for the best `2 eps`-IC
/// contract and evaluates it on the hidden one.
pub fn blackbox_contract<R: RngCore>(
    oracle: &mut QueryOracle<R>,
    params: BlackBoxParams,
    tol: &Tolerances,
) -> Result<BlackBoxResult> {
    let eta = params.eta.unwrap_or_else(|| oracle.eta());
    let n = oracle.hidden.num_actions();
    let samples = required_samples(n, eta, params.eps, params.gamma)?;
    if !oracle.hidden.is_normalized(tol.tie) {
        log::warn!("sampling guarantees assume expected rewards of at most 1");
    }
    let model = estimate(oracle, samples)?;
    let emp = model.to_explicit(&oracle.hidden)?;
    let best = opt_contract(&emp, 2.0 * params.eps, IcNotion::Additive, tol)?;
    let contract = relabel(&best.contract, &model.observed())?;
    let hidden = &oracle.hidden;
    let payoff_on_true = hidden.expected_reward(best.action) - hidden.expected_payment(best.action, &contract)?;
    let ic_slack_on_true = ic_slack(hidden, &contract, best.action, 0.0, IcNotion::Additive)?;
    Ok(BlackBoxResult {
        contract,
        action: best.action,
        samples_per_action: samples,
        empirical_payoff: best.payoff,
        payoff_on_true,
        ic_slack_on_true,
        model,
    })
}

/// Maps a contract on empirical outcome indices back to hidden outcomes.
fn relabel(contract: &Contract, observed: &[Outcome]) -> Result<Contract> {
    match contract {
        Contract::Sparse(s) => Ok(Contract::Sparse(SparseContract::new(
            s.base,
            s.payments.iter().map(|(k, &p)| (observed[k.index()], p)),
        )?)),
        other => Ok(other.clone()),
    }
}

/// Margins of the four inequalities behind the sampling guarantee, for one
/// estimate. Each is nonnegative when the estimate is within `1 +- eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingChecks {
    pub accurate: bool,
    /// IC margin of the true optimum on the empirical setting, plus `2 eps`.
    pub true_optimum_on_estimate: f64,
    /// IC margin of the empirical contract on the true setting, plus `4 eps`.
    pub estimate_on_truth: f64,
    /// True payoff of the empirical contract minus its empirical payoff, plus `2 eps`.
    pub payoff_transfer: f64,
    /// Empirical optimum minus the true optimum, plus `3 eps`.
    pub optimum_transfer: f64,
}

pub fn sampling_checks(
    hidden: &Instance,
    model: &EmpiricalModel,
    result: &BlackBoxResult,
    eps: f64,
    tol: &Tolerances,
) -> Result<SamplingChecks> {
    let truth = opt_contract(&hidden.to_explicit()?, 0.0, IcNotion::Additive, tol)?;
    // Contracts from the enumerated setting are keyed by outcome index, which
    // is the item set for product settings.
    let p = truth.contract;
    let emp_pay: Vec<f64> = (0..hidden.num_actions())
        .map(|i| model.expected_payment(hidden, i, &p))
        .collect();
    let i = truth.action;
    let own = emp_pay[i] - hidden.cost(i);
    let margin = (0..hidden.num_actions())
        .filter(|&k| k != i)
        .map(|k| own - (emp_pay[k] - hidden.cost(k)))
        .fold(f64::INFINITY, f64::min);
    Ok(SamplingChecks {
        accurate: model.within_factor(hidden, eps)?,
        true_optimum_on_estimate: margin + 2.0 * eps,
        estimate_on_truth: result.ic_slack_on_true + 4.0 * eps,
        payoff_transfer: result.payoff_on_true - result.empirical_payoff + 2.0 * eps,
        optimum_transfer: result.empirical_payoff - truth.payoff + 3.0 * eps,
    })
}

/// Closed-form quantities of the two hard settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativePairAnalytics {
    pub eta: f64,
    pub tau: f64,
    pub mu: f64,
    pub beta: f64,
    /// Expected rewards of the two actions, equal in both settings.
    pub expected_rewards: [f64; 2],
    /// Optimal exact-IC payoff in both settings.
    pub optimal_payoff: f64,
    /// Limit, as `eta -> 0`, of the best payoff of a contract that
    /// `delta`-incentivizes the second action in both settings.
    pub symmetric_payoff_limit: f64,
}

impl NegativePairAnalytics {
    /// Queries needed to tell the settings apart with probability `1 - gamma`.
    pub fn query_lower_bound(&self, gamma: f64) -> f64 {
        -ln(gamma) / (9.0 * sqrt(self.eta))
    }

    /// Probability that `queries` draws of the second action in the first
    /// setting show its likelier item at least once.
    pub fn detection_probability(&self, queries: u64) -> f64 {
        1.0 - powi(1.0 - self.tau * self.tau * self.mu, queries as i32)
    }

    /// Upper bound on the payoff of a contract that `delta`-incentivizes the
    /// second action in both settings at once.
    pub fn symmetric_payoff_bound(&self, delta: f64, second_cost: f64) -> f64 {
        let t = self.tau;
        1.0 - (t * t * (1.0 - 2.0 * self.mu) + 1.0) / ((t - 1.0) * (t - 1.0)) * (second_cost - delta)
    }
}

/// Two settings with identical costs and expected rewards that differ only by
/// swapping the item probabilities of the second action. Telling them apart
/// takes on the order of `1 / sqrt(eta)` queries.
pub fn negative_pair(eta: f64) -> Result<(ProductSetting, ProductSetting, NegativePairAnalytics)> {
    if !eta.is_finite() || eta <= 0.0 || eta > 1.0 / 625.0 {
        return Err(Error::arg(format!("eta {eta} must lie in (0, 1/625]")));
    }
    let tau = 1.0 + sqrt(2.0);
    let mu = sqrt(eta) / tau;
    let beta = 1.0 / (1.0 + 1.0 / (tau * tau));
    let r = beta / (tau * tau * mu);
    let c2 = (tau - 1.0) / (tau * tau * tau) * beta / (1.0 - mu);
    let first = vec![tau * mu, tau * mu];
    let build = |second: Vec<f64>| ProductSetting::new(vec![0.0, c2], vec![r, r], vec![first.clone(), second]);
    let one = build(vec![tau * tau * mu, mu])?;
    let two = build(vec![mu, tau * tau * mu])?;
    let analytics = NegativePairAnalytics {
        eta,
        tau,
        mu,
        beta,
        expected_rewards: [2.0 * beta / tau, 1.0],
        optimal_payoff: beta,
        symmetric_payoff_limit: (1.0 + 1.0 / (tau * tau) - (tau * tau + 1.0) / ((tau - 1.0) * tau * tau * tau)) * beta,
    };
    Ok((one, two, analytics))
}
