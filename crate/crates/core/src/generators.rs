//! Instance families with known answers: hardness gadgets, small fixtures that
//! separate contract classes, and seeded random settings.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{powi, sqrt};
use crate::model::{Contract, Outcome, ProductSetting, Setting, SparseContract, MAX_ITEMS};

/// One item, `c` actions. Action `i` (1-based) makes the item occur with
/// probability `gamma^(c-i)` at cost `1/gamma^(i-1) - i + (i-1) gamma`; the
/// item is worth `1/gamma^(c-1)`. Welfare grows by almost one per action, yet
/// a `gamma^c`-IC contract keeps at most a `1/c + gamma` share of it.
pub fn gen_gap(c: usize, gamma: f64) -> Result<ProductSetting> {
    if c < 2 {
        return Err(Error::arg(format!("a gap setting needs c >= 2 actions, got {c}")));
    }
    if !(gamma > 0.0 && gamma <= 0.25) {
        return Err(Error::arg(format!("gamma {gamma} must lie in (0, 1/4]")));
    }
    if c > 1000 {
        return Err(Error::arg(format!("c = {c} overflows the item reward")));
    }
    let ci = c as i32;
    let probs = (1..=ci).map(|i| vec![powi(gamma, ci - i)]).collect();
    let costs = (1..=ci)
        .map(|i| {
            let i_f = i as f64;
            if i == 1 {
                0.0
            } else {
                1.0 / powi(gamma, i - 1) - i_f + (i_f - 1.0) * gamma
            }
        })
        .collect();
    let reward = 1.0 / powi(gamma, ci - 1);
    if !reward.is_finite() {
        return Err(Error::arg(format!("gamma^{} underflows", ci - 1)));
    }
    ProductSetting::new(costs, vec![reward], probs)
}

/// A CNF formula in DIMACS convention: literal `v` is variable `v`, `-v` its
/// negation, variables numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Vec<i32>>,
}

impl Cnf {
    /// Accepts clauses of one to three literals over distinct variables.
    pub fn new(num_vars: usize, clauses: Vec<Vec<i32>>) -> Result<Cnf> {
        if clauses.is_empty() {
            return Err(Error::arg("formula has no clauses"));
        }
        for (i, clause) in clauses.iter().enumerate() {
            if clause.is_empty() || clause.len() > 3 {
                return Err(Error::arg(format!(
                    "clause {i} has {} literals, expected 1 to 3",
                    clause.len()
                )));
            }
            for (a, &lit) in clause.iter().enumerate() {
                let v = lit.unsigned_abs() as usize;
                if lit == 0 || v > num_vars {
                    return Err(Error::arg(format!(
                        "clause {i}: literal {lit} is out of range 1..={num_vars}"
                    )));
                }
                if clause[..a].iter().any(|&l| l.unsigned_abs() as usize == v) {
                    return Err(Error::arg(format!("clause {i} repeats variable {v}")));
                }
            }
        }
        Ok(Cnf { num_vars, clauses })
    }

    pub fn satisfied_clauses(&self, assignment: &[bool]) -> usize {
        self.clauses
            .iter()
            .filter(|c| {
                c.iter()
                    .any(|&lit| assignment[lit.unsigned_abs() as usize - 1] == (lit > 0))
            })
            .count()
    }

    pub fn satisfies(&self, assignment: &[bool]) -> bool {
        assignment.len() == self.num_vars && self.satisfied_clauses(assignment) == self.clauses.len()
    }

    /// First satisfying assignment in binary counting order, variable 1 as the
    /// lowest bit. Exhaustive, so limited to 24 variables.
    pub fn satisfying_assignment(&self) -> Result<Option<Vec<bool>>> {
        if self.num_vars > 24 {
            return Err(Error::ResourceLimit(format!(
                "exhaustive search over {} variables",
                self.num_vars
            )));
        }
        for bits in 0u32..(1 << self.num_vars) {
            let a: Vec<bool> = (0..self.num_vars).map(|v| (bits >> v) & 1 == 1).collect();
            if self.satisfies(&a) {
                return Ok(Some(a));
            }
        }
        Ok(None)
    }
}

/// One action per clause, one item per variable, everything free and
/// worthless. A positive literal makes its item impossible, a negative one
/// certain, other items are fair coins. The set of true variables of an
/// assignment has probability zero under exactly the clauses it satisfies.
pub fn gen_sat(formula: &Cnf) -> Result<ProductSetting> {
    if formula.num_vars > MAX_ITEMS {
        return Err(Error::arg(format!(
            "{} variables exceed {MAX_ITEMS} items",
            formula.num_vars
        )));
    }
    let n = formula.clauses.len();
    ProductSetting::new(vec![0.0; n], vec![0.0; formula.num_vars], sat_rows(formula))
}

fn sat_rows(formula: &Cnf) -> Vec<Vec<f64>> {
    formula
        .clauses
        .iter()
        .map(|clause| {
            let mut row = vec![0.5; formula.num_vars];
            for &lit in clause {
                row[lit.unsigned_abs() as usize - 1] = if lit > 0 { 0.0 } else { 1.0 };
            }
            row
        })
        .collect()
}

/// Copies of the SAT rows stacked on top of the gap setting's first `blocks`
/// actions, with the gap item as the last column, then one row of fair coins
/// paired with the gap setting's last action.
fn combine(formula: &Cnf, gap: &ProductSetting, blocks: usize) -> Result<ProductSetting> {
    let m = formula.num_vars;
    if m + 1 > MAX_ITEMS {
        return Err(Error::arg(format!("{} variables leave no room for the gap item", m)));
    }
    let sat = sat_rows(formula);
    let last = gap.num_actions() - 1;
    let mut probs = Vec::with_capacity(blocks * sat.len() + 1);
    let mut costs = Vec::with_capacity(probs.capacity());
    for b in 0..blocks {
        for row in &sat {
            let mut r = row.clone();
            r.push(gap.prob(b, 0));
            probs.push(r);
            costs.push(gap.cost(b));
        }
    }
    let mut row = vec![0.5; m];
    row.push(gap.prob(last, 0));
    probs.push(row);
    costs.push(gap.cost(last));
    let mut rewards = vec![0.0; m];
    rewards.push(gap.rewards()[0]);
    ProductSetting::new(costs, rewards, probs)
}

/// SAT setting glued to the two-action gap setting with parameter `eps`:
/// `n + 1` actions over `m + 1` items.
pub fn gen_product2(formula: &Cnf, eps: f64) -> Result<ProductSetting> {
    combine(formula, &gen_gap(2, eps)?, 1)
}

/// `c` copies of the SAT rows, block `i` paired with gap action `i`, plus a
/// final fair-coin row: `c n + 1` actions over `m + 1` items.
pub fn gen_productc(formula: &Cnf, c: usize, eps: f64) -> Result<ProductSetting> {
    if c < 3 {
        return Err(Error::arg(format!("c = {c}; use gen_product2 for c = 2")));
    }
    combine(formula, &gen_gap(c, eps)?, c)
}

/// For a setting from [`gen_product2`] or [`gen_productc`] and a satisfying
/// assignment: pays the last action's cost times `2^m` on the true variables
/// plus the gap item. Every other action never produces that outcome, so the
/// agent is indifferent everywhere and the principal keeps all welfare.
pub fn full_welfare_contract(setting: &ProductSetting, assignment: &[bool]) -> Result<Contract> {
    let m = setting.num_items() - 1;
    Error::check_len("assignment", m, assignment.len())?;
    let mut s = Outcome::EMPTY.with(m);
    for (j, _) in assignment.iter().enumerate().filter(|(_, &t)| t) {
        s = s.with(j);
    }
    let last = setting.num_actions() - 1;
    let pay = setting.cost(last) * powi(2.0, m as i32);
    Ok(Contract::Sparse(SparseContract::new(0.0, [(s, pay)])?))
}

/// Three actions over items with `q_j = 1/(a_j + 1)`, where implementing the
/// third action at a known price is possible only if the `a_j` split into two
/// halves of equal product.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxInstance {
    pub setting: ProductSetting,
    /// `prod_j q_j`.
    pub ell: f64,
    /// `sqrt(prod_j a_j)`.
    pub root: f64,
    /// `1 - ell * root * 2^(m-1)`, always in (0, 1).
    pub slack: f64,
    pub cost: f64,
    pub reward: f64,
}

impl MinMaxInstance {
    /// Minimum expected payment that multiplicatively `delta`-implements the
    /// third action when an equal-product split exists; without one the
    /// minimum is strictly higher. Paying `p` on a split `S` gives the third
    /// action utility `(1 + delta) p / 2^(m-1) - c` against `ell * root * p`
    /// for both others, which is tight at `p / 2^(m-1) = c / (slack + delta)`.
    pub fn split_payment(&self, delta: f64) -> f64 {
        self.cost / (self.slack + delta)
    }

    /// Pays `split_payment(delta) * 2^(m-1)` on the split `s`, or on its
    /// complement, whichever holds item 0.
    pub fn split_contract(&self, s: Outcome, delta: f64) -> Result<Contract> {
        self.pay_on_split(s, self.split_payment(delta))
    }

    /// Sparse contract with expected payment `expected` for the third action,
    /// all of it on the split side holding item 0.
    pub fn pay_on_split(&self, s: Outcome, expected: f64) -> Result<Contract> {
        let m = self.setting.num_items();
        let full = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        let s = if s.contains(0) { s } else { Outcome(!s.0 & full) };
        let pay = expected * powi(2.0, m as i32 - 1);
        Ok(Contract::Sparse(SparseContract::new(0.0, [(s, pay)])?))
    }
}

pub fn gen_minmax(a: &[u64]) -> Result<MinMaxInstance> {
    if a.is_empty() || a.len() > MAX_ITEMS {
        return Err(Error::arg(format!("need 1..={MAX_ITEMS} integers, got {}", a.len())));
    }
    if let Some(&bad) = a.iter().find(|&&x| x < 3) {
        return Err(Error::arg(format!("every a_j must be at least 3, got {bad}")));
    }
    let m = a.len();
    let q: Vec<f64> = a.iter().map(|&x| 1.0 / (x as f64 + 1.0)).collect();
    let ell: f64 = q.iter().product();
    let root = a.iter().map(|&x| sqrt(x as f64)).product::<f64>();
    let slack = 1.0 - ell * root * powi(2.0, m as i32 - 1);
    let a_max = a.iter().copied().max().unwrap_or(3);
    let cost = 1.0 / (a_max as f64 + 1.0);
    let reward = 2.0 / slack;
    let mut third = vec![0.5; m];
    third[0] = 1.0;
    let mut rewards = vec![0.0; m];
    rewards[0] = reward;
    let setting = ProductSetting::new(
        vec![0.0, 0.0, cost],
        rewards,
        vec![q.clone(), q.iter().map(|x| 1.0 - x).collect(), third],
    )?;
    Ok(MinMaxInstance {
        setting,
        ell,
        root,
        slack,
        cost,
        reward,
    })
}

/// A two-action setting where giving up a little incentive compatibility
/// raises the principal's payoff from `eps` to `4 eps / 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaAdvantage {
    pub setting: ProductSetting,
    pub delta: f64,
    /// Best exact-IC payoff.
    pub ic_payoff: f64,
    /// Contract that multiplicatively `delta`-incentivizes action 1.
    pub delta_contract: Contract,
    pub delta_payoff: f64,
}

pub fn gen_delta_advantage(eps: f64, delta: f64) -> Result<DeltaAdvantage> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::arg(format!("eps {eps} must be positive")));
    }
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::arg(format!("delta {delta} must lie in (0, 1/2]")));
    }
    let big = eps / delta;
    let setting = ProductSetting::new(
        vec![0.0, big - big * eps / (2.0 * (big + eps))],
        vec![4.0 * eps / 3.0, big + eps],
        vec![vec![0.25, 2.0 * eps / (3.0 * (big + eps))], vec![0.0, 1.0]],
    )?;
    let delta_contract = Contract::Sparse(SparseContract::new(0.0, [(Outcome::EMPTY.with(1), big - eps / 3.0)])?);
    Ok(DeltaAdvantage {
        setting,
        delta,
        ic_payoff: eps,
        delta_contract,
        delta_payoff: 4.0 * eps / 3.0,
    })
}

/// A two-action, two-item setting where the best separable contract earns
/// 1 while the optimum approaches 2 as `delta -> 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableGap {
    pub setting: ProductSetting,
    pub delta: f64,
    pub expected_rewards: [f64; 2],
    pub optimal_payoff: f64,
    /// Pays `4 c_2 / (1 - delta^2)` when only item 0 occurs.
    pub optimal_contract: Contract,
    pub separable_payoff: f64,
    /// Pays `2 c_2 / (1 - delta)` per occurrence of item 0.
    pub separable_contract: Contract,
}

pub fn gen_separable_gap(delta: f64) -> Result<SeparableGap> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg(format!("delta {delta} must lie in (0, 1)")));
    }
    let r1 = (1.0 - (1.0 - delta / 2.0) * delta) / (delta / 2.0);
    let big_r = 1.0 / delta - 1.0 + delta;
    let c2 = (1.0 - delta) * (1.0 / delta - 2.0 + delta);
    let setting = ProductSetting::new(
        vec![0.0, c2],
        vec![r1, delta],
        vec![vec![delta / 2.0, 1.0 - delta / 2.0], vec![0.5, 0.5]],
    )?;
    let d2 = 1.0 - delta * delta;
    Ok(SeparableGap {
        setting,
        delta,
        expected_rewards: [1.0, big_r],
        optimal_payoff: big_r - c2 / d2,
        optimal_contract: Contract::Sparse(SparseContract::new(0.0, [(Outcome::EMPTY.with(0), 4.0 * c2 / d2)])?),
        separable_payoff: 1.0,
        separable_contract: Contract::Separable {
            item_payments: vec![2.0 * c2 / (1.0 - delta), 0.0],
        },
    })
}

/// The `delta` at which [`gen_separable_gap`] has optimum over separable
/// payoff equal to `2 - eps`, for `eps` in (0, 1).
pub fn separable_gap_delta(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::arg(format!("eps {eps} must lie in (0, 1)")));
    }
    Ok((3.0 - eps - sqrt(eps * eps - 10.0 * eps + 9.0)) / 2.0)
}

/// Uniform item probabilities and rewards, rescaled so the largest expected
/// reward is 1; action 0 is free and every other cost is drawn below its
/// expected reward minus `1e-3`. Same seed, same setting.
pub fn gen_random(n: usize, m: usize, seed: u64) -> Result<ProductSetting> {
    if n == 0 || m == 0 || m > MAX_ITEMS {
        return Err(Error::arg(format!(
            "need n >= 1 and 1 <= m <= {MAX_ITEMS}, got n={n}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
    let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let top = probs
        .iter()
        .map(|row| row.iter().zip(&raw).map(|(q, r)| q * r).sum::<f64>())
        .fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Numerical(format!("seed {seed} produced no positive reward")));
    }
    let rewards: Vec<f64> = raw.iter().map(|r| r / top).collect();
    let costs = probs
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let u: f64 = rng.random();
            if i == 0 {
                0.0
            } else {
                let big_r: f64 = row.iter().zip(&rewards).map(|(q, r)| q * r).sum();
                u * (big_r - 1e-3).max(0.0)
            }
        })
        .collect();
    ProductSetting::new(costs, rewards, probs)
}
