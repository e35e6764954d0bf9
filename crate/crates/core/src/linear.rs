//! Linear and separable contracts.
//!
//! Under the linear contract `alpha` the agent's utility for action `i` is the
//! line `alpha R_i - c_i`. Their upper envelope over `[0, 1]` decides which
//! action each `alpha` implements; ties go to the action with the larger
//! expected reward, which is also the principal's preference.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lpcore::{self, LinearProgram, LpStatus, Relation, Sense, SolverConfig};
use crate::math::{ceil, ln, powi};
use crate::model::{first_best, Contract, ProductSetting, Setting};
use crate::tol::Tolerances;

/// Tolerance under which two breakpoints coincide.
const BREAKPOINT_TIE: f64 = 1e-12;

/// Action `action` is the agent's choice on `[start, end)`; the last segment
/// is closed at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub action: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub segments: Vec<Segment>,
}

impl Envelope {
    /// Envelope actions from left to right; their expected rewards increase.
    pub fn actions(&self) -> impl Iterator<Item = usize> + '_ {
        self.segments.iter().map(|s| s.action)
    }

    /// Left endpoints `alpha_i`, the smallest share implementing each action.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|s| s.start)
    }

    /// The action implemented by `alpha`.
    pub fn action_at(&self, alpha: f64) -> usize {
        self.segments
            .iter()
            .rev()
            .find(|s| s.start <= alpha)
            .unwrap_or(&self.segments[0])
            .action
    }
}

fn rewards_and_costs<S: Setting + ?Sized>(setting: &S) -> (Vec<f64>, Vec<f64>) {
    (setting.expected_rewards(), setting.costs())
}

/// Upper envelope of `alpha R_i - c_i` over `[0, 1]`.
///
/// Settings where two actions share the same expected reward are rejected:
/// one line then dominates the other and the tie-breaking rule is ambiguous.
pub fn upper_envelope<S: Setting + ?Sized>(setting: &S) -> Result<Envelope> {
    let (r, c) = rewards_and_costs(setting);
    let n = r.len();
    for a in 0..n {
        for b in a + 1..n {
            if r[a] == r[b] {
                return Err(Error::arg(format!(
                    "actions {a} and {b} share the expected reward {}; the envelope needs distinct rewards",
                    r[a]
                )));
            }
        }
    }
    // At alpha = 0 the cheapest action wins, larger reward on ties.
    let mut current = 0;
    for a in 1..n {
        if c[a] < c[current] || c[a] == c[current] && r[a] > r[current] {
            current = a;
        }
    }
    let mut start = 0.0;
    let mut segments = Vec::new();
    loop {
        let mut next: Option<(usize, f64)> = None;
        for b in (0..n).filter(|&b| r[b] > r[current]) {
            let x = ((c[b] - c[current]) / (r[b] - r[current])).max(start);
            next = match next {
                None => Some((b, x)),
                Some((nb, nx)) => {
                    if x < nx - BREAKPOINT_TIE || (x - nx).abs() <= BREAKPOINT_TIE && r[b] > r[nb] {
                        Some((b, x))
                    } else {
                        Some((nb, nx))
                    }
                }
            };
        }
        match next {
            Some((b, x)) if x <= 1.0 => {
                segments.push(Segment {
                    action: current,
                    start,
                    end: x,
                });
                current = b;
                start = x;
            }
            _ => {
                segments.push(Segment {
                    action: current,
                    start,
                    end: 1.0,
                });
                return Ok(Envelope { segments });
            }
        }
    }
}

/// A linear contract and the action it targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearResult {
    pub alpha: f64,
    pub action: usize,
    pub payoff: f64,
}

impl LinearResult {
    pub fn contract(&self) -> Contract {
        Contract::Linear { alpha: self.alpha }
    }
}

/// Best linear contract under additive `delta`-IC.
///
/// With `delta = 0` the optimum sits at an envelope breakpoint. Otherwise each
/// action's feasible shares form an interval, and the smallest share in it is
/// the best one for that action.
pub fn optimal_linear<S: Setting + ?Sized>(setting: &S, delta: f64, tol: &Tolerances) -> Result<LinearResult> {
    check_delta(delta)?;
    let (r, c) = rewards_and_costs(setting);
    let mut best: Option<LinearResult> = None;
    let mut consider = |cand: LinearResult| {
        if best.is_none_or(|b| cand.payoff > b.payoff + tol.tie) {
            best = Some(cand);
        }
    };
    if delta == 0.0 {
        for seg in upper_envelope(setting)?.segments {
            consider(LinearResult {
                alpha: seg.start,
                action: seg.action,
                payoff: (1.0 - seg.start) * r[seg.action],
            });
        }
    } else {
        for i in 0..r.len() {
            if let Some(alpha) = smallest_share(&r, &c, i, delta) {
                consider(LinearResult {
                    alpha,
                    action: i,
                    payoff: (1.0 - alpha) * r[i],
                });
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("no linear contract implements any action".into()))
}

/// Smallest `alpha` in `[0, 1]` with
/// `alpha (R_i - R_k) >= c_i - c_k - delta` for all `k`.
fn smallest_share(r: &[f64], c: &[f64], i: usize, delta: f64) -> Option<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in (0..r.len()).filter(|&k| k != i) {
        let dr = r[i] - r[k];
        let rhs = c[i] - c[k] - delta;
        if dr > 0.0 {
            lo = lo.max(rhs / dr);
        } else if dr < 0.0 {
            hi = hi.min(rhs / dr);
        } else if rhs > 0.0 {
            return None;
        }
    }
    (lo <= hi + 1e-12).then_some(lo)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("delta {delta} must be finite and >= 0")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableResult {
    pub item_payments: Vec<f64>,
    pub action: usize,
    pub payoff: f64,
}

/// Best separable contract under additive `delta`-IC: one program per action
/// over the item payments.
pub fn optimal_separable(setting: &ProductSetting, delta: f64, tol: &Tolerances) -> Result<SeparableResult> {
    check_delta(delta)?;
    let n = setting.num_actions();
    let q = setting.probs();
    let mut best: Option<SeparableResult> = None;
    for i in 0..n {
        let mut lp = LinearProgram::new(Sense::Minimize, q[i].clone());
        for k in (0..n).filter(|&k| k != i) {
            let coeffs = q[i].iter().zip(&q[k]).map(|(a, b)| a - b).collect();
            lp.add_constraint(coeffs, Relation::Ge, setting.cost(i) - setting.cost(k) - delta);
        }
        let sol = lpcore::solve_with(&lp, &SolverConfig::with_tol(*tol))?;
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let item_payments: Vec<f64> = sol.primal.iter().map(|p| p.max(0.0)).collect();
        let pay: f64 = q[i].iter().zip(&item_payments).map(|(a, b)| a * b).sum();
        let payoff = setting.expected_reward(i) - pay;
        if best.as_ref().is_none_or(|b| payoff > b.payoff + tol.tie) {
            best = Some(SeparableResult {
                item_payments,
                action: i,
                payoff,
            });
        }
    }
    best.ok_or_else(|| Error::Numerical("no separable contract implements any action".into()))
}

/// One candidate of the interval scheme: the share and the action it is
/// meant to `delta`-incentivize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub interval: usize,
    pub alpha: f64,
    pub action: usize,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearApproxResult {
    pub alpha: f64,
    pub action: usize,
    pub payoff: f64,
    pub kappa: usize,
    /// Left endpoints of the intervals `0, gamma, gamma (1+delta), ...`.
    pub interval_starts: Vec<f64>,
    pub candidates: Vec<Candidate>,
    pub first_best: f64,
    /// `(1 - gamma) / (kappa + 1) * first_best`.
    pub guarantee: f64,
    /// `R_{h(1)} + sum_{k >= 2} (1 - alpha_k) R_{h(k)}` over the candidates,
    /// which is at least the first-best welfare.
    pub telescoping_sum: f64,
}

impl LinearApproxResult {
    pub fn contract(&self) -> Contract {
        Contract::Linear { alpha: self.alpha }
    }
}

/// `ceil(log_{1+delta}(1 / gamma))`.
pub fn kappa(delta: f64, gamma: f64) -> usize {
    ceil(ln(1.0 / gamma) / ln(1.0 + delta)) as usize
}

/// Linear contract within `(1 - gamma) / (kappa + 1)` of the first-best
/// welfare, `delta`-incentivizing its action in the additive sense on
/// normalized settings.
///
/// `[0, 1]` is split into `[0, gamma)`, then intervals growing by a factor
/// `1 + delta`, the last one closed at 1. In each nonempty interval the
/// envelope action `h(k)` with the largest reward is kept. The first
/// candidate is `h(1)` at its own breakpoint; every later one pays the share
/// where the lines of the previous kept action and `h(k)` cross. Empty
/// intervals are skipped and the next kept action is compared with the last
/// kept one.
pub fn approx_linear_delta<S: Setting + ?Sized>(setting: &S, delta: f64, gamma: f64) -> Result<LinearApproxResult> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::arg(format!("delta {delta} must be finite and > 0")));
    }
    if !gamma.is_finite() || gamma <= 0.0 || gamma >= 1.0 {
        return Err(Error::arg(format!("gamma {gamma} must lie in (0, 1)")));
    }
    let (r, c) = rewards_and_costs(setting);
    let env = upper_envelope(setting)?;
    let k = kappa(delta, gamma);
    let mut interval_starts = vec![0.0];
    interval_starts.extend((0..k).map(|e| gamma * powi(1.0 + delta, e as i32)));

    // Highest-reward envelope action in each interval.
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (idx, &lo) in interval_starts.iter().enumerate() {
        let hi = interval_starts.get(idx + 1).copied().unwrap_or(f64::INFINITY);
        let top = env
            .segments
            .iter()
            .filter(|s| s.start >= lo && s.start < hi)
            .map(|s| s.action)
            .max_by(|&a, &b| r[a].total_cmp(&r[b]));
        if let Some(a) = top {
            kept.push((idx, a));
        }
    }

    let mut candidates = Vec::with_capacity(kept.len());
    let first = env.segments[0];
    let (idx0, a0) = kept[0];
    let alpha0 = env
        .segments
        .iter()
        .find(|s| s.action == a0)
        .map_or(first.start, |s| s.start);
    candidates.push(Candidate {
        interval: idx0,
        alpha: alpha0,
        action: a0,
        payoff: (1.0 - alpha0) * r[a0],
    });
    for w in kept.windows(2) {
        let (_, prev) = w[0];
        let (idx, a) = w[1];
        let alpha = ((c[a] - c[prev]) / (r[a] - r[prev])).clamp(0.0, 1.0);
        candidates.push(Candidate {
            interval: idx,
            alpha,
            action: a,
            payoff: (1.0 - alpha) * r[a],
        });
    }
    // The first term uses share 0 rather than the first breakpoint.
    let telescoping_sum = r[a0]
        + candidates[1..]
            .iter()
            .map(|cand| (1.0 - cand.alpha) * r[cand.action])
            .sum::<f64>();
    let best = candidates
        .iter()
        .copied()
        .reduce(|b, cand| if cand.payoff > b.payoff { cand } else { b })
        .expect("the interval containing 0 is never empty");
    let fb = first_best(setting);
    Ok(LinearApproxResult {
        alpha: best.alpha,
        action: best.action,
        payoff: best.payoff,
        kappa: k,
        interval_starts,
        candidates,
        first_best: fb,
        guarantee: (1.0 - gamma) / (k as f64 + 1.0) * fb,
        telescoping_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{verify_delta_ic, ExplicitSetting, IcNotion};
    use proptest::prelude::*;

    /// Rewards and costs as a one-outcome-per-action explicit setting.
    fn lines(r: &[f64], c: &[f64]) -> ExplicitSetting {
        let n = r.len();
        let dist = (0..n)
            .map(|i| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect())
            .collect();
        ExplicitSetting::new(c.to_vec(), r.to_vec(), dist).unwrap()
    }

    #[test]
    fn gap_setting_envelope() {
        let s = lines(&[1.0, 10.0], &[0.0, 8.1]);
        let env = upper_envelope(&s).unwrap();
        assert_eq!(env.actions().collect::<Vec<_>>(), vec![0, 1]);
        assert!((env.segments[1].start - 0.9).abs() < 1e-12);
        let best = optimal_linear(&s, 0.0, &Tolerances::default()).unwrap();
        assert!((best.payoff - 1.0).abs() < 1e-9);
        assert_eq!(best.action, 0);
    }

    #[test]
    fn gap_setting_interval_scheme() {
        let s = lines(&[1.0, 10.0], &[0.0, 8.1]);
        let res = approx_linear_delta(&s, 0.1, 0.5).unwrap();
        assert_eq!(res.kappa, 8);
        assert!(res.payoff >= 0.5 * 1.9 / 9.0);
        assert!(verify_delta_ic(
            &s,
            &res.contract(),
            res.action,
            0.1,
            IcNotion::Additive,
            &Tolerances::default()
        )
        .unwrap());
    }

    #[test]
    fn dominated_lines_are_skipped() {
        // The middle line never reaches the envelope.
        let s = lines(&[0.2, 0.5, 1.0], &[0.0, 0.4, 0.3]);
        let env = upper_envelope(&s).unwrap();
        assert_eq!(env.actions().collect::<Vec<_>>(), vec![0, 2]);
        assert!((env.segments[1].start - 0.375).abs() < 1e-12);
        assert_eq!(env.action_at(0.2), 0);
        assert_eq!(env.action_at(0.375), 2);
    }

    #[test]
    fn duplicate_rewards_are_rejected() {
        let s = lines(&[0.5, 0.5], &[0.0, 0.1]);
        assert!(matches!(upper_envelope(&s), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unit_slack_makes_every_action_free() {
        let s = lines(&[0.3, 0.9, 0.6], &[0.0, 0.8, 0.2]);
        let res = optimal_linear(&s, 1.0, &Tolerances::default()).unwrap();
        assert_eq!(res.alpha, 0.0);
        assert!((res.payoff - 0.9).abs() < 1e-12);
    }

    fn arb_lines() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..=8).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0.0f64..1.0, n),
            )
                .prop_map(|(r, frac)| {
                    let c: Vec<f64> = r
                        .iter()
                        .zip(&frac)
                        .enumerate()
                        .map(|(i, (a, f))| if i == 0 { 0.0 } else { a * f })
                        .collect();
                    (r, c)
                })
        })
    }

    proptest! {
        #[test]
        fn envelope_properties((r, c) in arb_lines()) {
            let s = lines(&r, &c);
            let Ok(env) = upper_envelope(&s) else { return Ok(()) };
            let segs = &env.segments;
            prop_assert_eq!(segs[0].start, 0.0);
            prop_assert_eq!(segs.last().unwrap().end, 1.0);
            for w in segs.windows(2) {
                prop_assert_eq!(w[0].end, w[1].start);
                prop_assert!(r[w[1].action] > r[w[0].action]);
                prop_assert!(w[1].start >= w[0].start);
            }
            // Each segment's action maximizes utility at the segment midpoint.
            for seg in segs {
                let x = 0.5 * (seg.start + seg.end);
                let u = x * r[seg.action] - c[seg.action];
                for k in 0..r.len() {
                    prop_assert!(u >= x * r[k] - c[k] - 1e-9);
                }
            }
            // The last action maximizes welfare.
            let last = segs.last().unwrap().action;
            prop_assert!(r[last] - c[last] >= first_best(&s) - 1e-9);
            // Envelope-scan optimum equals the best left endpoint.
            let best = optimal_linear(&s, 0.0, &Tolerances::default()).unwrap();
            let scan = segs.iter().map(|g| (1.0 - g.start) * r[g.action]).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((best.payoff - scan).abs() < 1e-12);
        }

        #[test]
        fn interval_scheme_guarantees((r, c) in arb_lines(), delta in 0.01f64..0.5, gamma in 0.05f64..0.95) {
            let s = lines(&r, &c);
            let Ok(res) = approx_linear_delta(&s, delta, gamma) else { return Ok(()) };
            let t = Tolerances::default();
            prop_assert!(res.payoff >= res.guarantee - 1e-9);
            prop_assert!(res.telescoping_sum >= res.first_best - 1e-9);
            for cand in &res.candidates {
                let contract = Contract::Linear { alpha: cand.alpha };
                prop_assert!(verify_delta_ic(&s, &contract, cand.action, delta, IcNotion::Additive, &t).unwrap());
            }
            let exact = optimal_linear(&s, delta, &t).unwrap();
            prop_assert!(exact.payoff >= res.payoff - 1e-9);
        }
    }
}
