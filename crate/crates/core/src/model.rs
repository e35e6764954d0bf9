//! Settings, contracts and the agent's response to a contract.
//!
//! A product setting has `m` items that occur independently; an outcome is the
//! set of items that occurred. An explicit setting lists a distribution over
//! `K` outcomes for every action. Action index 0 is the free action in both.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Largest item count for which outcome spaces are enumerated.
pub const MAX_ENUMERATED_ITEMS: usize = 20;

/// Largest item count an [`Outcome`] bitset can hold.
pub const MAX_ITEMS: usize = 63;

/// A set of items, bit `j` set iff item `j` occurred.
///
/// In an explicit setting the value is the outcome index instead, which agrees
/// with the bitset once a product setting is enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Outcome(pub u64);

impl Outcome {
    pub const EMPTY: Outcome = Outcome(0);

    pub fn from_items(items: &[usize]) -> Result<Outcome> {
        let mut bits = 0u64;
        for &j in items {
            if j >= MAX_ITEMS {
                return Err(Error::arg(format!("item index {j} exceeds {MAX_ITEMS}")));
            }
            bits |= 1 << j;
        }
        Ok(Outcome(bits))
    }

    #[inline]
    pub fn contains(self, item: usize) -> bool {
        item < 64 && (self.0 >> item) & 1 == 1
    }

    #[inline]
    pub fn with(self, item: usize) -> Outcome {
        Outcome(self.0 | (1 << item))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Item indices in increasing order.
    pub fn items(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..64).filter(move |j| (bits >> j) & 1 == 1)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Which incentive constraint a contract must satisfy for its target action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcNotion {
    /// `p_i - c_i >= p_k - c_k - delta`.
    Additive,
    /// `(1 + delta) p_i - c_i >= p_k - c_k`.
    Multiplicative,
}

/// A contract pays `base` on every outcome plus the listed amount on the
/// listed outcomes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseContract {
    pub base: f64,
    /// Strictly positive entries only.
    pub payments: BTreeMap<Outcome, f64>,
}

impl SparseContract {
    pub fn zero() -> Self {
        SparseContract::default()
    }

    /// Builds a contract, dropping zero entries. Negative or non-finite
    /// payments are rejected.
    pub fn new(base: f64, payments: impl IntoIterator<Item = (Outcome, f64)>) -> Result<Self> {
        if !base.is_finite() || base < 0.0 {
            return Err(Error::arg(format!("base payment {base} must be finite and >= 0")));
        }
        let mut map = BTreeMap::new();
        for (outcome, pay) in payments {
            if !pay.is_finite() || pay < 0.0 {
                return Err(Error::arg(format!("payment {pay} must be finite and >= 0")));
            }
            if pay > 0.0 {
                *map.entry(outcome).or_insert(0.0) += pay;
            }
        }
        Ok(SparseContract { base, payments: map })
    }

    pub fn pay(&self, outcome: Outcome) -> f64 {
        self.base + self.payments.get(&outcome).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> SparseContract {
        let payments = self
            .payments
            .iter()
            .map(|(&o, &p)| (o, p * factor))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        SparseContract {
            base: self.base * factor,
            payments,
        }
    }
}

/// A payment scheme offered by the principal. All payments are nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub enum Contract {
    Sparse(SparseContract),
    /// Pays `alpha * r_S` on outcome `S`.
    Linear {
        alpha: f64,
    },
    /// Pays `sum_{j in S} item_payments[j]` on outcome `S`.
    Separable {
        item_payments: Vec<f64>,
    },
    /// Pays `sparse(S) + alpha * r_S`.
    Mixed {
        sparse: SparseContract,
        alpha: f64,
    },
}

impl Contract {
    pub fn zero() -> Contract {
        Contract::Sparse(SparseContract::zero())
    }

    /// Rejects negative or non-finite payment parameters.
    pub fn validate(&self) -> Result<()> {
        let check = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::arg(format!("{what} {v} must be finite and >= 0")))
            }
        };
        match self {
            Contract::Sparse(s) => {
                check(s.base, "base payment")?;
                s.payments.values().try_for_each(|&p| check(p, "payment"))
            }
            Contract::Linear { alpha } => check(*alpha, "linear share"),
            Contract::Separable { item_payments } => item_payments.iter().try_for_each(|&p| check(p, "item payment")),
            Contract::Mixed { sparse, alpha } => {
                check(*alpha, "linear share")?;
                check(sparse.base, "base payment")?;
                sparse.payments.values().try_for_each(|&p| check(p, "payment"))
            }
        }
    }
}

/// The agent's chosen action and the resulting utilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentChoice {
    pub action: usize,
    pub expected_payment: f64,
    pub agent_utility: f64,
    pub principal_payoff: f64,
}

/// Common view of product and explicit settings.
pub trait Setting {
    fn num_actions(&self) -> usize;
    fn cost(&self, action: usize) -> f64;
    fn expected_reward(&self, action: usize) -> f64;
    fn expected_payment(&self, action: usize, contract: &Contract) -> Result<f64>;
    /// Per-item rewards when the reward of an outcome is additive over items.
    fn item_rewards(&self) -> Option<&[f64]>;

    fn costs(&self) -> Vec<f64> {
        (0..self.num_actions()).map(|i| self.cost(i)).collect()
    }

    fn expected_rewards(&self) -> Vec<f64> {
        (0..self.num_actions()).map(|i| self.expected_reward(i)).collect()
    }

    fn expected_payments(&self, contract: &Contract) -> Result<Vec<f64>> {
        (0..self.num_actions())
            .map(|i| self.expected_payment(i, contract))
            .collect()
    }

    fn is_normalized(&self, tol: f64) -> bool {
        (0..self.num_actions()).all(|i| self.expected_reward(i) <= 1.0 + tol)
    }
}

fn check_costs_and_welfare(
    costs: &[f64],
    expected_rewards: &[f64],
    allow_no_free_action: bool,
    tol: f64,
) -> Result<()> {
    if costs.is_empty() {
        return Err(Error::arg("a setting needs at least one action"));
    }
    for (i, &c) in costs.iter().enumerate() {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::arg(format!(
                "cost of action {i} is {c}, expected finite and >= 0"
            )));
        }
    }
    if !allow_no_free_action && costs[0] != 0.0 {
        return Err(Error::arg(format!(
            "action 0 must be free (cost 0), found {}",
            costs[0]
        )));
    }
    for (i, (&c, &r)) in costs.iter().zip(expected_rewards).enumerate() {
        if r - c < -tol {
            return Err(Error::arg(format!(
                "action {i} has negative welfare: expected reward {r} < cost {c}"
            )));
        }
    }
    Ok(())
}

fn check_probability(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::arg(format!("{what} {v} is not a probability")))
    }
}

/// Options accepted when building a setting.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SettingOptions {
    /// Accept settings whose action 0 has a positive cost.
    pub allow_no_free_action: bool,
}

/// Independent items: action `i` makes item `j` occur with probability
/// `probs[i][j]`, and outcome `S` carries reward `sum_{j in S} rewards[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductSetting {
    costs: Vec<f64>,
    rewards: Vec<f64>,
    probs: Vec<Vec<f64>>,
    expected_rewards: Vec<f64>,
}

impl ProductSetting {
    pub fn new(costs: Vec<f64>, rewards: Vec<f64>, probs: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_options(costs, rewards, probs, SettingOptions::default())
    }

    pub fn with_options(
        costs: Vec<f64>,
        rewards: Vec<f64>,
        probs: Vec<Vec<f64>>,
        options: SettingOptions,
    ) -> Result<Self> {
        let n = costs.len();
        let m = rewards.len();
        Error::check_len("probability rows", n, probs.len())?;
        if m > MAX_ITEMS {
            return Err(Error::arg(format!("{m} items exceed the limit of {MAX_ITEMS}")));
        }
        for (j, &r) in rewards.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::arg(format!(
                    "reward of item {j} is {r}, expected finite and >= 0"
                )));
            }
        }
        for row in &probs {
            Error::check_len("probability row", m, row.len())?;
            for &q in row {
                check_probability(q, "item probability")?;
            }
        }
        let expected_rewards: Vec<f64> = probs
            .iter()
            .map(|row| row.iter().zip(&rewards).map(|(q, r)| q * r).sum())
            .collect();
        check_costs_and_welfare(
            &costs,
            &expected_rewards,
            options.allow_no_free_action,
            Tolerances::default().tie,
        )?;
        Ok(ProductSetting {
            costs,
            rewards,
            probs,
            expected_rewards,
        })
    }

    pub fn num_items(&self) -> usize {
        self.rewards.len()
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn prob(&self, action: usize, item: usize) -> f64 {
        self.probs[action][item]
    }

    pub fn outcome_reward(&self, outcome: Outcome) -> f64 {
        outcome
            .items()
            .take_while(|&j| j < self.rewards.len())
            .map(|j| self.rewards[j])
            .sum()
    }

    /// `prod_{j in S} q_ij * prod_{j not in S} (1 - q_ij)`.
    pub fn outcome_probability(&self, action: usize, outcome: Outcome) -> f64 {
        self.probs[action]
            .iter()
            .enumerate()
            .map(|(j, &q)| if outcome.contains(j) { q } else { 1.0 - q })
            .product()
    }

    /// Same setting with every cost and reward multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> ProductSetting {
        ProductSetting {
            costs: self.costs.iter().map(|c| c * factor).collect(),
            rewards: self.rewards.iter().map(|r| r * factor).collect(),
            probs: self.probs.clone(),
            expected_rewards: self.expected_rewards.iter().map(|r| r * factor).collect(),
        }
    }

    /// Smallest positive `q_{i,S}` over all actions and outcomes.
    pub fn min_positive_outcome_probability(&self) -> f64 {
        self.probs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&q| if q <= 0.0 || q >= 1.0 { 1.0 } else { q.min(1.0 - q) })
                    .product::<f64>()
            })
            .fold(1.0, f64::min)
    }

    /// Enumerates all `2^m` outcomes. Outcome `S` becomes outcome index `S`.
    pub fn to_explicit(&self) -> Result<ExplicitSetting> {
        product_to_explicit(self)
    }
}

impl Setting for ProductSetting {
    fn num_actions(&self) -> usize {
        self.costs.len()
    }

    fn cost(&self, action: usize) -> f64 {
        self.costs[action]
    }

    fn expected_reward(&self, action: usize) -> f64 {
        self.expected_rewards[action]
    }

    fn expected_payment(&self, action: usize, contract: &Contract) -> Result<f64> {
        let sparse = |s: &SparseContract| -> Result<f64> {
            let mut total = s.base;
            for (&outcome, &pay) in &s.payments {
                if outcome.0 >> self.num_items() != 0 {
                    return Err(Error::arg(format!(
                        "outcome {:#b} names an item beyond the {} items of the setting",
                        outcome.0,
                        self.num_items()
                    )));
                }
                total += pay * self.outcome_probability(action, outcome);
            }
            Ok(total)
        };
        match contract {
            Contract::Sparse(s) => sparse(s),
            Contract::Linear { alpha } => Ok(alpha * self.expected_rewards[action]),
            Contract::Separable { item_payments } => {
                Error::check_len("item payments", self.num_items(), item_payments.len())?;
                Ok(self.probs[action].iter().zip(item_payments).map(|(q, p)| q * p).sum())
            }
            Contract::Mixed { sparse: s, alpha } => Ok(sparse(s)? + alpha * self.expected_rewards[action]),
        }
    }

    fn item_rewards(&self) -> Option<&[f64]> {
        Some(&self.rewards)
    }
}

/// Each action is a distribution over `K` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitSetting {
    costs: Vec<f64>,
    outcome_rewards: Vec<f64>,
    dist: Vec<Vec<f64>>,
    expected_rewards: Vec<f64>,
}

impl ExplicitSetting {
    pub fn new(costs: Vec<f64>, outcome_rewards: Vec<f64>, dist: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_options(costs, outcome_rewards, dist, SettingOptions::default())
    }

    pub fn with_options(
        costs: Vec<f64>,
        outcome_rewards: Vec<f64>,
        dist: Vec<Vec<f64>>,
        options: SettingOptions,
    ) -> Result<Self> {
        let n = costs.len();
        let k = outcome_rewards.len();
        Error::check_len("distribution rows", n, dist.len())?;
        if k == 0 {
            return Err(Error::arg("a setting needs at least one outcome"));
        }
        for (s, &r) in outcome_rewards.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::arg(format!(
                    "reward of outcome {s} is {r}, expected finite and >= 0"
                )));
            }
        }
        for (i, row) in dist.iter().enumerate() {
            Error::check_len("distribution row", k, row.len())?;
            for &q in row {
                check_probability(q, "outcome probability")?;
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::arg(format!("distribution of action {i} sums to {total}, not 1")));
            }
        }
        let expected_rewards: Vec<f64> = dist
            .iter()
            .map(|row| row.iter().zip(&outcome_rewards).map(|(q, r)| q * r).sum())
            .collect();
        check_costs_and_welfare(
            &costs,
            &expected_rewards,
            options.allow_no_free_action,
            Tolerances::default().tie,
        )?;
        Ok(ExplicitSetting {
            costs,
            outcome_rewards,
            dist,
            expected_rewards,
        })
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcome_rewards.len()
    }

    pub fn outcome_rewards(&self) -> &[f64] {
        &self.outcome_rewards
    }

    pub fn dist(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn outcome_probability(&self, action: usize, outcome: Outcome) -> f64 {
        self.dist[action].get(outcome.index()).copied().unwrap_or(0.0)
    }

    fn separable_items(&self, item_count: usize) -> Result<()> {
        if item_count >= 64 || 1usize << item_count != self.num_outcomes() {
            return Err(Error::Unsupported(format!(
                "a separable contract over {item_count} items needs 2^{item_count} outcomes, the setting has {}",
                self.num_outcomes()
            )));
        }
        Ok(())
    }
}

impl Setting for ExplicitSetting {
    fn num_actions(&self) -> usize {
        self.costs.len()
    }

    fn cost(&self, action: usize) -> f64 {
        self.costs[action]
    }

    fn expected_reward(&self, action: usize) -> f64 {
        self.expected_rewards[action]
    }

    fn expected_payment(&self, action: usize, contract: &Contract) -> Result<f64> {
        let row = &self.dist[action];
        let sparse = |s: &SparseContract| -> Result<f64> {
            let mut total = s.base;
            for (&outcome, &pay) in &s.payments {
                let q = row.get(outcome.index()).ok_or_else(|| {
                    Error::arg(format!(
                        "outcome index {} is out of range for {} outcomes",
                        outcome.0,
                        row.len()
                    ))
                })?;
                total += pay * q;
            }
            Ok(total)
        };
        match contract {
            Contract::Sparse(s) => sparse(s),
            Contract::Linear { alpha } => Ok(alpha * self.expected_rewards[action]),
            Contract::Separable { item_payments } => {
                self.separable_items(item_payments.len())?;
                Ok(row
                    .iter()
                    .enumerate()
                    .map(|(k, q)| {
                        let pay: f64 = Outcome(k as u64).items().map(|j| item_payments[j]).sum();
                        q * pay
                    })
                    .sum())
            }
            Contract::Mixed { sparse: s, alpha } => Ok(sparse(s)? + alpha * self.expected_rewards[action]),
        }
    }

    fn item_rewards(&self) -> Option<&[f64]> {
        None
    }
}

/// Either kind of setting, for callers that load instances from files.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Product(ProductSetting),
    Explicit(ExplicitSetting),
}

impl Instance {
    pub fn to_explicit(&self) -> Result<ExplicitSetting> {
        match self {
            Instance::Product(p) => product_to_explicit(p),
            Instance::Explicit(e) => Ok(e.clone()),
        }
    }

    pub fn outcome_probability(&self, action: usize, outcome: Outcome) -> f64 {
        match self {
            Instance::Product(p) => p.outcome_probability(action, outcome),
            Instance::Explicit(e) => e.outcome_probability(action, outcome),
        }
    }

    pub fn outcome_reward(&self, outcome: Outcome) -> f64 {
        match self {
            Instance::Product(p) => p.outcome_reward(outcome),
            Instance::Explicit(e) => e.outcome_rewards.get(outcome.index()).copied().unwrap_or(0.0),
        }
    }

    /// Every outcome with positive probability under some action, ascending.
    pub fn support(&self) -> Result<Vec<Outcome>> {
        match self {
            Instance::Explicit(e) => Ok((0..e.num_outcomes())
                .filter(|&k| e.dist.iter().any(|row| row[k] > 0.0))
                .map(|k| Outcome(k as u64))
                .collect()),
            Instance::Product(p) => {
                let m = p.num_items();
                if m > MAX_ENUMERATED_ITEMS {
                    return Err(Error::ResourceLimit(format!(
                        "{m} items exceed the enumeration limit of {MAX_ENUMERATED_ITEMS}"
                    )));
                }
                Ok((0..1u64 << m)
                    .map(Outcome)
                    .filter(|&s| (0..p.num_actions()).any(|i| p.outcome_probability(i, s) > 0.0))
                    .collect())
            }
        }
    }
}

impl Setting for Instance {
    fn num_actions(&self) -> usize {
        match self {
            Instance::Product(p) => p.num_actions(),
            Instance::Explicit(e) => e.num_actions(),
        }
    }

    fn cost(&self, action: usize) -> f64 {
        match self {
            Instance::Product(p) => p.cost(action),
            Instance::Explicit(e) => e.cost(action),
        }
    }

    fn expected_reward(&self, action: usize) -> f64 {
        match self {
            Instance::Product(p) => p.expected_reward(action),
            Instance::Explicit(e) => e.expected_reward(action),
        }
    }

    fn expected_payment(&self, action: usize, contract: &Contract) -> Result<f64> {
        match self {
            Instance::Product(p) => p.expected_payment(action, contract),
            Instance::Explicit(e) => e.expected_payment(action, contract),
        }
    }

    fn item_rewards(&self) -> Option<&[f64]> {
        match self {
            Instance::Product(p) => p.item_rewards(),
            Instance::Explicit(e) => e.item_rewards(),
        }
    }
}

/// `q_{i,S}` for any setting kind.
pub fn outcome_probability(setting: &Instance, action: usize, outcome: Outcome) -> Result<f64> {
    check_action(setting, action)?;
    Ok(setting.outcome_probability(action, outcome))
}

/// Enumerates all `2^m` outcomes of a product setting.
pub fn product_to_explicit(setting: &ProductSetting) -> Result<ExplicitSetting> {
    let m = setting.num_items();
    if m > MAX_ENUMERATED_ITEMS {
        return Err(Error::ResourceLimit(format!(
            "{m} items exceed the enumeration limit of {MAX_ENUMERATED_ITEMS}"
        )));
    }
    let k = 1usize << m;
    let outcome_rewards: Vec<f64> = (0..k as u64).map(|s| setting.outcome_reward(Outcome(s))).collect();
    let dist: Vec<Vec<f64>> = (0..setting.num_actions())
        .map(|i| enumerate_product_row(&setting.probs[i]))
        .collect();
    Ok(ExplicitSetting {
        costs: setting.costs.clone(),
        expected_rewards: setting.expected_rewards.clone(),
        outcome_rewards,
        dist,
    })
}

/// Probabilities of all `2^m` outcomes, built item by item.
fn enumerate_product_row(q: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 << q.len());
    row.push(1.0);
    for (j, &qj) in q.iter().enumerate() {
        let half = 1usize << j;
        for s in 0..half {
            let p = row[s];
            row.push(p * qj);
            row[s] = p * (1.0 - qj);
        }
    }
    row
}

/// Per-action utilities `p_i - c_i` and principal payoffs `R_i - p_i`.
fn utilities<S: Setting + ?Sized>(setting: &S, contract: &Contract) -> Result<Vec<AgentChoice>> {
    contract.validate()?;
    (0..setting.num_actions())
        .map(|i| {
            let pay = setting.expected_payment(i, contract)?;
            Ok(AgentChoice {
                action: i,
                expected_payment: pay,
                agent_utility: pay - setting.cost(i),
                principal_payoff: setting.expected_reward(i) - pay,
            })
        })
        .collect()
}

/// Picks the candidate with the highest principal payoff, lowest index on ties.
fn principal_favoring(candidates: impl Iterator<Item = AgentChoice>, tie: f64) -> Option<AgentChoice> {
    let mut best: Option<AgentChoice> = None;
    for c in candidates {
        match best {
            Some(b) if c.principal_payoff <= b.principal_payoff + tie => {}
            _ => best = Some(c),
        }
    }
    best
}

/// The agent's utility-maximizing action. Utilities within `tol.tie` of the
/// maximum are tied and resolved in the principal's favor, then by index.
pub fn best_response<S: Setting + ?Sized>(setting: &S, contract: &Contract, tol: &Tolerances) -> Result<AgentChoice> {
    let choices = utilities(setting, contract)?;
    let top = choices
        .iter()
        .map(|c| c.agent_utility)
        .fold(f64::NEG_INFINITY, f64::max);
    principal_favoring(
        choices.into_iter().filter(|c| c.agent_utility >= top - tol.tie),
        tol.tie,
    )
    .ok_or_else(|| Error::arg("setting has no actions"))
}

/// The action a contract `delta`-incentivizes: among the actions satisfying
/// the `delta`-IC constraint, the one best for the principal. With
/// `require_ir` only actions with nonnegative agent utility qualify; the free
/// action keeps that set nonempty whenever its cost is zero.
pub fn delta_response<S: Setting + ?Sized>(
    setting: &S,
    contract: &Contract,
    delta: f64,
    notion: IcNotion,
    require_ir: bool,
    tol: &Tolerances,
) -> Result<AgentChoice> {
    check_delta(delta)?;
    let choices = utilities(setting, contract)?;
    let slacks: Vec<f64> = (0..choices.len())
        .map(|i| slack_from_choices(&choices, i, delta, notion))
        .collect();
    principal_favoring(
        choices
            .iter()
            .copied()
            .filter(|c| slacks[c.action] >= -tol.ic && (!require_ir || c.agent_utility >= -tol.ic)),
        tol.tie,
    )
    .ok_or_else(|| Error::arg("no action is incentivized by the contract"))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("delta {delta} must be finite and >= 0")))
    }
}

fn slack_from_choices(choices: &[AgentChoice], action: usize, delta: f64, notion: IcNotion) -> f64 {
    let own = &choices[action];
    let own_value = match notion {
        IcNotion::Additive => own.agent_utility + delta,
        IcNotion::Multiplicative => (1.0 + delta) * own.expected_payment - (own.expected_payment - own.agent_utility),
    };
    choices
        .iter()
        .filter(|c| c.action != action)
        .map(|c| own_value - c.agent_utility)
        .fold(f64::INFINITY, f64::min)
}

/// Worst-case margin of the `delta`-IC constraints for `action`; nonnegative
/// iff every constraint holds exactly. `+inf` for single-action settings.
pub fn ic_slack<S: Setting + ?Sized>(
    setting: &S,
    contract: &Contract,
    action: usize,
    delta: f64,
    notion: IcNotion,
) -> Result<f64> {
    check_delta(delta)?;
    check_action(setting, action)?;
    let choices = utilities(setting, contract)?;
    Ok(slack_from_choices(&choices, action, delta, notion))
}

/// Whether `contract` makes `action` `delta`-IC, up to `tol.ic`.
pub fn verify_delta_ic<S: Setting + ?Sized>(
    setting: &S,
    contract: &Contract,
    action: usize,
    delta: f64,
    notion: IcNotion,
    tol: &Tolerances,
) -> Result<bool> {
    if notion == IcNotion::Additive && delta > 0.0 && !setting.is_normalized(tol.tie) {
        log::warn!("additive delta-IC checked on a setting whose expected rewards exceed 1");
    }
    Ok(ic_slack(setting, contract, action, delta, notion)? >= -tol.ic)
}

pub(crate) fn check_action<S: Setting + ?Sized>(setting: &S, action: usize) -> Result<()> {
    if action < setting.num_actions() {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "action {action} is out of range for {} actions",
            setting.num_actions()
        )))
    }
}

/// Largest welfare `R_i - c_i` over all actions.
pub fn first_best<S: Setting + ?Sized>(setting: &S) -> f64 {
    (0..setting.num_actions())
        .map(|i| setting.expected_reward(i) - setting.cost(i))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn two_item() -> ProductSetting {
        ProductSetting::new(vec![0.0, 0.3], vec![1.0, 0.5], vec![vec![0.2, 0.4], vec![0.7, 0.6]]).unwrap()
    }

    #[test]
    fn outcome_probabilities_of_two_items() {
        let s = two_item();
        // Action 1, S = {0}: 0.7 * 0.4.
        assert!((s.outcome_probability(1, Outcome(0b01)) - 0.28).abs() < 1e-15);
        assert!((s.outcome_probability(1, Outcome(0b11)) - 0.42).abs() < 1e-15);
        assert!((s.expected_reward(1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_contract_picks_free_action() {
        let s = two_item();
        let choice = best_response(&s, &Contract::zero(), &tol()).unwrap();
        assert_eq!(choice.action, 0);
        assert_eq!(choice.expected_payment, 0.0);
    }

    #[test]
    fn ties_go_to_the_principal() {
        // Both actions give the agent utility 0 under this contract; action 1
        // is better for the principal.
        let s = ExplicitSetting::new(vec![0.0, 0.5], vec![0.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let c = Contract::Sparse(SparseContract::new(0.0, [(Outcome(1), 0.5)]).unwrap());
        let choice = best_response(&s, &c, &tol()).unwrap();
        assert_eq!(choice.action, 1);
        assert!((choice.principal_payoff - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_settings() {
        assert!(ProductSetting::new(vec![0.0], vec![1.0], vec![vec![1.5]]).is_err());
        assert!(ProductSetting::new(vec![0.1], vec![1.0], vec![vec![0.5]]).is_err());
        assert!(ProductSetting::with_options(
            vec![0.1],
            vec![1.0],
            vec![vec![0.5]],
            SettingOptions {
                allow_no_free_action: true
            }
        )
        .is_ok());
        assert!(ExplicitSetting::new(vec![0.0], vec![1.0, 0.0], vec![vec![0.5, 0.4]]).is_err());
        assert!(matches!(
            ProductSetting::new(vec![0.0, 0.0], vec![1.0], vec![vec![0.5]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(ProductSetting::new(vec![0.0], vec![f64::NAN], vec![vec![0.5]]).is_err());
    }

    #[test]
    fn enumeration_limit() {
        let m = MAX_ENUMERATED_ITEMS + 1;
        let s = ProductSetting::new(vec![0.0], vec![0.0; m], vec![vec![0.5; m]]).unwrap();
        assert!(matches!(product_to_explicit(&s), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn delta_response_with_and_without_ir() {
        // Zero contract: the costly action is 0.2-IC but leaves the agent at -0.1.
        let s = ExplicitSetting::new(vec![0.0, 0.1], vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let z = Contract::zero();
        let loose = delta_response(&s, &z, 0.2, IcNotion::Additive, false, &tol()).unwrap();
        assert_eq!(loose.action, 1);
        let ir = delta_response(&s, &z, 0.2, IcNotion::Additive, true, &tol()).unwrap();
        assert_eq!(ir.action, 0);
    }

    fn arb_product() -> impl Strategy<Value = ProductSetting> {
        (1usize..5, 0usize..6).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, m), n),
                proptest::collection::vec(0.0f64..2.0, m),
                proptest::collection::vec(0.0f64..1.0, n),
            )
                .prop_map(|(probs, rewards, cost_frac)| {
                    let rs: Vec<f64> = probs
                        .iter()
                        .map(|row| row.iter().zip(&rewards).map(|(q, r)| q * r).sum())
                        .collect();
                    let mut costs: Vec<f64> = rs.iter().zip(&cost_frac).map(|(r, f)| r * f).collect();
                    costs[0] = 0.0;
                    ProductSetting::new(costs, rewards, probs).unwrap()
                })
        })
    }

    fn arb_contract(m: usize) -> impl Strategy<Value = Contract> {
        prop_oneof![
            (0.0f64..1.0).prop_map(|alpha| Contract::Linear { alpha }),
            proptest::collection::vec(0.0f64..2.0, m).prop_map(|item_payments| Contract::Separable { item_payments }),
            (
                0.0f64..0.5,
                proptest::collection::vec((0u64..(1u64 << m), 0.0f64..3.0), 0..6)
            )
                .prop_map(|(base, entries)| Contract::Sparse(
                    SparseContract::new(base, entries.into_iter().map(|(o, p)| (Outcome(o), p))).unwrap()
                )),
        ]
    }

    proptest! {
        #[test]
        fn outcome_distributions_sum_to_one(s in arb_product()) {
            let e = product_to_explicit(&s).unwrap();
            for row in e.dist() {
                let total: f64 = row.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
            for i in 0..s.num_actions() {
                prop_assert!((e.expected_reward(i) - s.expected_reward(i)).abs() < 1e-9);
            }
        }

        #[test]
        fn payments_agree_across_conversion(
            (s, c) in arb_product().prop_flat_map(|s| {
                let m = s.num_items();
                (Just(s), arb_contract(m))
            })
        ) {
            let e = product_to_explicit(&s).unwrap();
            for i in 0..s.num_actions() {
                let a = s.expected_payment(i, &c).unwrap();
                let b = e.expected_payment(i, &c).unwrap();
                prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
                prop_assert!(a >= 0.0);
            }
            let br = best_response(&s, &c, &tol()).unwrap();
            let utils = s.expected_payments(&c).unwrap();
            for (i, p) in utils.iter().enumerate() {
                prop_assert!(br.agent_utility >= p - s.cost(i) - 1e-9);
            }
        }
    }
}
