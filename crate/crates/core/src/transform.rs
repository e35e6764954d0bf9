//! Turning approximately incentive-compatible contracts into exactly IC or
//! individually rational ones, on normalized settings.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::model::{best_response, delta_response, Contract, IcNotion, Setting, SparseContract};
use crate::tol::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct IcTransform {
    pub contract: Contract,
    /// The action the input contract `delta`-incentivizes.
    pub source_action: usize,
    pub source_payoff: f64,
    /// `(1 - sqrt(delta)) * source_payoff - (sqrt(delta) - delta)`.
    pub payoff_bound: f64,
    /// The agent's best response to the new contract and the principal's
    /// payoff there.
    pub action: usize,
    pub payoff: f64,
}

/// Mixes `contract` with the linear contract `alpha = 1`:
/// `p' = (1 - sqrt(delta)) p + sqrt(delta) r`.
///
/// An action the agent prefers under `p'` either has an expected reward at
/// least `sqrt(delta)` higher than the source action's, or pays almost as
/// well, which keeps the principal's loss within the bound.
pub fn delta_to_ic<S: Setting + ?Sized>(
    setting: &S,
    contract: &Contract,
    delta: f64,
    tol: &Tolerances,
) -> Result<IcTransform> {
    check_unit_delta(delta)?;
    let source = delta_response(setting, contract, delta, IcNotion::Additive, false, tol)?;
    let mixed = if delta == 0.0 {
        contract.clone()
    } else {
        mix_with_linear(setting, contract, sqrt(delta))?
    };
    let sd = sqrt(delta);
    let bound = (1.0 - sd) * source.principal_payoff - (sd - delta);
    let chosen = best_response(setting, &mixed, tol)?;
    Ok(IcTransform {
        contract: mixed,
        source_action: source.action,
        source_payoff: source.principal_payoff,
        payoff_bound: bound,
        action: chosen.action,
        payoff: chosen.principal_payoff,
    })
}

fn check_unit_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::arg(format!("delta {delta} must lie in [0, 1)")))
    }
}

/// `(1 - w) p + w r` in the cheapest representation.
fn mix_with_linear<S: Setting + ?Sized>(setting: &S, contract: &Contract, w: f64) -> Result<Contract> {
    let keep = 1.0 - w;
    Ok(match contract {
        Contract::Sparse(s) => Contract::Mixed {
            sparse: s.scaled(keep),
            alpha: w,
        },
        Contract::Mixed { sparse, alpha } => Contract::Mixed {
            sparse: sparse.scaled(keep),
            alpha: keep * alpha + w,
        },
        Contract::Linear { alpha } => Contract::Linear {
            alpha: keep * alpha + w,
        },
        Contract::Separable { item_payments } => {
            let rewards = setting
                .item_rewards()
                .ok_or_else(|| Error::Unsupported("mixing a separable contract needs per-item rewards".into()))?;
            Error::check_len("item payments", rewards.len(), item_payments.len())?;
            Contract::Separable {
                item_payments: item_payments
                    .iter()
                    .zip(rewards)
                    .map(|(p, r)| keep * p + w * r)
                    .collect::<Vec<_>>(),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrTransform {
    pub contract: Contract,
    pub source_action: usize,
    pub source_payoff: f64,
    /// Action the new contract `delta`-incentivizes among those the agent
    /// would accept, and the principal's payoff there.
    pub action: usize,
    pub payoff: f64,
    pub agent_utility: f64,
}

/// Adds `delta` to every payment when the principal's payoff exceeds
/// `delta`, otherwise falls back to the zero contract.
///
/// The shift leaves every `delta`-IC constraint unchanged and lifts the
/// agent's utility, which was at least `-delta` against the free action, to
/// at least zero.
pub fn delta_to_ir<S: Setting + ?Sized>(
    setting: &S,
    contract: &Contract,
    delta: f64,
    tol: &Tolerances,
) -> Result<IrTransform> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::arg(format!("delta {delta} must be finite and >= 0")));
    }
    let source = delta_response(setting, contract, delta, IcNotion::Additive, false, tol)?;
    let lifted = if source.principal_payoff > delta {
        shift(contract, delta)?
    } else {
        Contract::zero()
    };
    let chosen = delta_response(setting, &lifted, delta, IcNotion::Additive, true, tol)?;
    Ok(IrTransform {
        contract: lifted,
        source_action: source.action,
        source_payoff: source.principal_payoff,
        action: chosen.action,
        payoff: chosen.principal_payoff,
        agent_utility: chosen.agent_utility,
    })
}

fn shift(contract: &Contract, amount: f64) -> Result<Contract> {
    Ok(match contract {
        Contract::Sparse(s) => Contract::Sparse(SparseContract {
            base: s.base + amount,
            payments: s.payments.clone(),
        }),
        Contract::Mixed { sparse, alpha } => Contract::Mixed {
            sparse: SparseContract {
                base: sparse.base + amount,
                payments: sparse.payments.clone(),
            },
            alpha: *alpha,
        },
        Contract::Linear { alpha } => Contract::Mixed {
            sparse: SparseContract {
                base: amount,
                payments: Default::default(),
            },
            alpha: *alpha,
        },
        Contract::Separable { .. } => {
            return Err(Error::Unsupported(
                "a separable contract has no uniform base payment to shift".into(),
            ))
        }
    })
}
