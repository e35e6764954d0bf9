//! Exact minimum-payment and optimal contracts by linear programming over
//! the explicit outcome space.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lpcore::{self, LinearProgram, LpStatus, Relation, Sense, SolverConfig};
use crate::model::{
    check_action, product_to_explicit, Contract, ExplicitSetting, IcNotion, Outcome, ProductSetting, Setting,
    SparseContract,
};
use crate::tol::Tolerances;

/// Cheapest contract that makes one action (`delta`-)IC.
#[derive(Debug, Clone, PartialEq)]
pub struct MinPaymentResult {
    pub action: usize,
    pub contract: Contract,
    pub expected_payment: f64,
}

/// Best contract over all actions and the action it implements.
#[derive(Debug, Clone, PartialEq)]
pub struct OptContractResult {
    pub action: usize,
    pub contract: Contract,
    pub expected_payment: f64,
    pub payoff: f64,
}

/// Minimizes `sum_S q_{i,S} p_S` over `p >= 0` subject to the `delta`-IC
/// constraints of action `i`. With `delta = 0` both notions coincide with
/// exact IC.
///
/// Outcomes that action `i` never produces are left unpaid: paying there only
/// raises the other actions' payments.
pub fn min_payment(
    setting: &ExplicitSetting,
    action: usize,
    delta: f64,
    notion: IcNotion,
    tol: &Tolerances,
) -> Result<MinPaymentResult> {
    check_action(setting, action)?;
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::arg(format!("delta {delta} must be finite and >= 0")));
    }
    let n = setting.num_actions();
    let dist = setting.dist();
    let own = &dist[action];
    let columns: Vec<usize> = (0..setting.num_outcomes()).filter(|&k| own[k] > 0.0).collect();
    let scale = own_factor(delta, notion);

    let mut lp = LinearProgram::new(Sense::Minimize, columns.iter().map(|&k| own[k]).collect());
    for other in (0..n).filter(|&k| k != action) {
        let coeffs = columns.iter().map(|&k| scale * own[k] - dist[other][k]).collect();
        let mut rhs = setting.cost(action) - setting.cost(other);
        if notion == IcNotion::Additive {
            rhs -= delta;
        }
        lp.add_constraint(coeffs, Relation::Ge, rhs);
    }
    let sol = lpcore::solve_with(&lp, &SolverConfig::with_tol(*tol))?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::NotImplementable { action }),
        LpStatus::Unbounded => return Err(Error::Numerical("minimum-payment program reported unbounded".into())),
    }
    let payments = columns
        .iter()
        .zip(&sol.primal)
        .filter(|&(_, &p)| p > 0.0)
        .map(|(&k, &p)| (Outcome(k as u64), p));
    let contract = Contract::Sparse(SparseContract::new(0.0, payments)?);
    let expected_payment = setting.expected_payment(action, &contract)?;
    Ok(MinPaymentResult {
        action,
        contract,
        expected_payment,
    })
}

fn own_factor(delta: f64, notion: IcNotion) -> f64 {
    match notion {
        IcNotion::Multiplicative => 1.0 + delta,
        IcNotion::Additive => 1.0,
    }
}

/// Solves the minimum-payment program for every action and keeps the one with
/// the highest principal payoff `R_i - OPT_i`; payoffs within `tol.tie` go to
/// the lowest index.
pub fn opt_contract(
    setting: &ExplicitSetting,
    delta: f64,
    notion: IcNotion,
    tol: &Tolerances,
) -> Result<OptContractResult> {
    let mut best: Option<OptContractResult> = None;
    for action in 0..setting.num_actions() {
        let res = match min_payment(setting, action, delta, notion, tol) {
            Ok(r) => r,
            Err(Error::NotImplementable { .. }) => continue,
            Err(e) => return Err(e),
        };
        let payoff = setting.expected_reward(action) - res.expected_payment;
        if best.as_ref().is_none_or(|b| payoff > b.payoff + tol.tie) {
            best = Some(OptContractResult {
                action,
                contract: res.contract,
                expected_payment: res.expected_payment,
                payoff,
            });
        }
    }
    best.ok_or_else(|| Error::Numerical("no action could be implemented".into()))
}

/// [`opt_contract`] on the enumerated outcome space of a product setting. The
/// returned sparse contract is keyed by item sets and applies to `setting`
/// directly.
pub fn opt_contract_product(
    setting: &ProductSetting,
    delta: f64,
    notion: IcNotion,
    tol: &Tolerances,
) -> Result<OptContractResult> {
    opt_contract(&product_to_explicit(setting)?, delta, notion, tol)
}

/// Per-action minimum payments; `None` where the action is not implementable.
pub fn all_min_payments(
    setting: &ExplicitSetting,
    delta: f64,
    notion: IcNotion,
    tol: &Tolerances,
) -> Result<Vec<Option<f64>>> {
    (0..setting.num_actions())
        .map(|a| match min_payment(setting, a, delta, notion, tol) {
            Ok(r) => Ok(Some(r.expected_payment)),
            Err(Error::NotImplementable { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}
