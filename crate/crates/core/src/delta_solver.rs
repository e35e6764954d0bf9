//! Multiplicatively `delta`-IC contracts for product settings without
//! enumerating outcomes.
//!
//! For target action `i` the dual of the minimum-payment program has one
//! variable `lambda_k` per other action and one constraint per outcome:
//!
//! ```text
//! max  sum_k lambda_k (c_i - c_k)
//! s.t. (1 + delta) (sum_k lambda_k - 1) <= sum_k lambda_k q_{k,S} / q_{i,S}   for all S, q_{i,S} > 0
//!      lambda >= 0
//! ```
//!
//! With `delta = 0` this is the exact dual. A binary search on the objective
//! level `Gamma` asks whether the strengthened program admits a point of
//! value at least `Gamma`. Each query is answered by cutting planes: solve the
//! program restricted to the outcomes collected so far, then ask the
//! likelihood-ratio approximation scheme (with `eps = delta`) for a violated
//! outcome. A point it cannot cut is feasible for the exact dual, so
//! "feasible" answers never exceed the true optimum. "Infeasible" answers are
//! certified by the collected outcomes alone, and the primal program over
//! those outcomes then yields a `delta`-IC contract paying less than the
//! infeasible level divided by `1 + delta`.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exact::OptContractResult;
use crate::lpcore::{self, LinearProgram, LpStatus, Relation, Sense, SolverConfig};
use crate::math::{exp, ln, sqrt};
use crate::model::{check_action, Contract, Outcome, ProductSetting, Setting, SparseContract, MAX_ENUMERATED_ITEMS};
use crate::oracle::{min_ratio_bruteforce, min_ratio_fptas, SeparationInstance};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    CuttingPlane,
    /// Central-cut ellipsoid steps to discover outcomes, confirmed by the
    /// restricted program and completed by cutting planes when inconclusive.
    Ellipsoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaConfig {
    pub tol: Tolerances,
    /// Absolute bisection width; defaults to `1e-6 * R_i`.
    pub eps_search: Option<f64>,
    pub method: SolveMethod,
    pub max_actions: usize,
    /// Separation rounds allowed per level query.
    pub max_rounds: usize,
    pub max_bisections: usize,
    pub ellipsoid_iterations: usize,
    /// Side of the box `[0, B]^d` the ellipsoid starts from.
    pub ellipsoid_box: f64,
    /// Added to every incentive constraint of the extracted contract, in units
    /// of the largest reward or cost.
    pub margin: f64,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig {
            tol: Tolerances::default(),
            eps_search: None,
            method: SolveMethod::CuttingPlane,
            max_actions: 6,
            max_rounds: 10_000,
            max_bisections: 200,
            ellipsoid_iterations: 2_000,
            ellipsoid_box: 1e3,
            margin: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
    /// An outcome was added and the query continues.
    Cut,
}

/// One separation round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub bisection: usize,
    pub round: usize,
    pub gamma: f64,
    pub verdict: Verdict,
    pub cut: Option<Outcome>,
    pub ratio: Option<f64>,
    pub threshold: Option<f64>,
    /// Dual point, one entry per action (zero at the target).
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSolveResult {
    pub action: usize,
    pub contract: Contract,
    pub expected_payment: f64,
    /// Smallest level shown infeasible.
    pub gamma_star: f64,
    /// Largest level shown feasible.
    pub gamma_lower: f64,
    /// Dual point certifying `gamma_lower`, exactly feasible for the exact
    /// dual; `None` if no query returned feasible.
    pub lambda: Option<Vec<f64>>,
    pub cuts: Vec<Outcome>,
    pub trace: Vec<TraceRow>,
}

struct Problem<'a> {
    setting: ProductSetting,
    target: usize,
    others: Vec<usize>,
    delta: f64,
    cost_diff: Vec<f64>,
    cfg: &'a DeltaConfig,
    cuts: Vec<Outcome>,
    rows: Vec<Vec<f64>>,
    seen: BTreeSet<Outcome>,
    trace: Vec<TraceRow>,
    scale: f64,
    bisection: usize,
}

enum Answer {
    Feasible(Vec<f64>),
    Infeasible,
}

impl Problem<'_> {
    /// `(1 + delta) - q_{k,S} / q_{i,S}` for every other action `k`.
    fn cut_row(&self, outcome: Outcome) -> Vec<f64> {
        let log_q = |a: usize| -> f64 {
            self.setting.probs()[a]
                .iter()
                .enumerate()
                .map(|(j, &q)| ln(if outcome.contains(j) { q } else { 1.0 - q }))
                .sum()
        };
        let own = log_q(self.target);
        self.others
            .iter()
            .map(|&k| (1.0 + self.delta) - exp(log_q(k) - own))
            .collect()
    }

    fn add_cut(&mut self, outcome: Outcome) -> bool {
        if !self.seen.insert(outcome) {
            return false;
        }
        let row = self.cut_row(outcome);
        self.cuts.push(outcome);
        self.rows.push(row);
        true
    }

    fn full_lambda(&self, lambda: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.setting.num_actions()];
        for (&k, &v) in self.others.iter().zip(lambda) {
            full[k] = v;
        }
        full
    }

    /// Points of the restricted program with value at least `gamma`; the
    /// one of least total weight is returned.
    fn restricted(&self, gamma: f64) -> Result<Option<Vec<f64>>> {
        let d = self.others.len();
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0; d]);
        for row in &self.rows {
            lp.add_constraint(row.clone(), Relation::Le, 1.0 + self.delta);
        }
        lp.add_constraint(self.cost_diff.clone(), Relation::Ge, gamma);
        let sol = lpcore::solve_with(&lp, &SolverConfig::with_tol(self.cfg.tol))?;
        Ok(match sol.status {
            LpStatus::Optimal => Some(sol.primal.iter().map(|v| v.max(0.0)).collect()),
            _ => None,
        })
    }

    /// Most violated outcome for `lambda`, as `(outcome, ratio, threshold)`;
    /// `None` when `sum lambda <= 1` makes every constraint hold.
    fn separate(&self, lambda: &[f64]) -> Result<Option<(Outcome, f64, f64)>> {
        let total: f64 = lambda.iter().sum();
        if total <= 1.0 {
            return Ok(None);
        }
        let inst = SeparationInstance {
            weights: lambda.iter().map(|v| v / total).collect(),
            mixtures: self.others.iter().map(|&k| self.setting.probs()[k].clone()).collect(),
            reference: self.setting.probs()[self.target].clone(),
        };
        let found = if self.delta > 0.0 {
            min_ratio_fptas(&inst, self.delta)?
        } else {
            min_ratio_bruteforce(&inst)?
        };
        let threshold = (1.0 + self.delta) * (1.0 - 1.0 / total);
        Ok(Some((found.outcome, found.ratio, threshold)))
    }

    fn record(&mut self, round: usize, gamma: f64, verdict: Verdict, sep: Option<(Outcome, f64, f64)>, lambda: &[f64]) {
        let row = TraceRow {
            bisection: self.bisection,
            round,
            gamma: gamma * self.scale,
            verdict,
            cut: sep.filter(|_| verdict == Verdict::Cut).map(|s| s.0),
            ratio: sep.map(|s| s.1),
            threshold: sep.map(|s| s.2),
            lambda: self.full_lambda(lambda),
        };
        self.trace.push(row);
    }

    fn query(&mut self, gamma: f64) -> Result<Answer> {
        if self.cfg.method == SolveMethod::Ellipsoid && self.others.len() >= 2 {
            if let Some(answer) = self.query_ellipsoid(gamma)? {
                return Ok(answer);
            }
        }
        self.query_cutting_plane(gamma)
    }

    fn query_cutting_plane(&mut self, gamma: f64) -> Result<Answer> {
        for round in 0..self.cfg.max_rounds {
            let Some(lambda) = self.restricted(gamma)? else {
                self.record(round, gamma, Verdict::Infeasible, None, &[]);
                return Ok(Answer::Infeasible);
            };
            let sep = self.separate(&lambda)?;
            match sep {
                Some((outcome, ratio, threshold)) if violated(ratio, threshold) && self.add_cut(outcome) => {
                    self.record(round, gamma, Verdict::Cut, sep, &lambda);
                }
                // A violated outcome that is already a cut can only be an LP
                // rounding artifact of size `tol.feas`.
                _ => {
                    self.record(round, gamma, Verdict::Feasible, sep, &lambda);
                    return Ok(Answer::Feasible(lambda));
                }
            }
        }
        Err(Error::IterationLimit {
            limit: self.cfg.max_rounds,
            context: "separation rounds",
        })
    }

    /// `None` when the ellipsoid neither found a feasible point nor collected
    /// enough outcomes to certify infeasibility.
    fn query_ellipsoid(&mut self, gamma: f64) -> Result<Option<Answer>> {
        let d = self.others.len();
        let big = self.cfg.ellipsoid_box;
        let df = d as f64;
        let mut x = vec![big / 2.0; d];
        let mut p = vec![0.0; d * d];
        for k in 0..d {
            p[k * d + k] = big * big * df / 4.0;
        }
        for round in 0..self.cfg.ellipsoid_iterations {
            let a = if let Some(k) = (0..d).find(|&k| x[k] < 0.0) {
                let mut a = vec![0.0; d];
                a[k] = -1.0;
                a
            } else if let Some(k) = (0..d).find(|&k| x[k] > big) {
                let mut a = vec![0.0; d];
                a[k] = 1.0;
                a
            } else if dot(&self.cost_diff, &x) < gamma {
                self.cost_diff.iter().map(|v| -v).collect()
            } else if let Some(row) = self.rows.iter().find(|r| dot(r, &x) > 1.0 + self.delta) {
                row.clone()
            } else {
                let sep = self.separate(&x)?;
                match sep {
                    Some((outcome, ratio, threshold)) if violated(ratio, threshold) => {
                        self.add_cut(outcome);
                        self.record(round, gamma, Verdict::Cut, sep, &x);
                        self.cut_row(outcome)
                    }
                    _ => {
                        self.record(round, gamma, Verdict::Feasible, sep, &x);
                        return Ok(Some(Answer::Feasible(x)));
                    }
                }
            };
            let pa: Vec<f64> = (0..d).map(|r| (0..d).map(|c| p[r * d + c] * a[c]).sum()).collect();
            let apa = dot(&a, &pa);
            if apa <= 1e-300 {
                break;
            }
            let b: Vec<f64> = pa.iter().map(|v| v / sqrt(apa)).collect();
            for k in 0..d {
                x[k] -= b[k] / (df + 1.0);
            }
            let f = df * df / (df * df - 1.0);
            for r in 0..d {
                for c in 0..d {
                    p[r * d + c] = f * (p[r * d + c] - 2.0 / (df + 1.0) * b[r] * b[c]);
                }
            }
        }
        if self.restricted(gamma)?.is_none() {
            self.record(self.cfg.ellipsoid_iterations, gamma, Verdict::Infeasible, None, &[]);
            return Ok(Some(Answer::Infeasible));
        }
        Ok(None)
    }

    /// Cheapest `delta`-IC contract paying only on the collected outcomes, in
    /// normalized units.
    fn extract(&self) -> Result<(SparseContract, f64)> {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0 + self.delta; self.cuts.len()]);
        for (k, &diff) in self.cost_diff.iter().enumerate() {
            let coeffs = self.rows.iter().map(|row| row[k]).collect();
            lp.add_constraint(coeffs, Relation::Ge, diff + self.cfg.margin);
        }
        let sol = lpcore::solve_with(&lp, &SolverConfig::with_tol(self.cfg.tol))?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Numerical(format!(
                "contract extraction over {} outcomes returned {:?}",
                self.cuts.len(),
                sol.status
            )));
        }
        let payments = self
            .cuts
            .iter()
            .zip(&sol.primal)
            .filter(|&(_, &x)| x > 0.0)
            .map(|(&s, &x)| (s, x / self.setting.outcome_probability(self.target, s) * self.scale));
        let contract = SparseContract::new(0.0, payments)?;
        Ok((
            contract,
            sol.primal.iter().map(|x| x.max(0.0)).sum::<f64>() * self.scale,
        ))
    }
}

fn violated(ratio: f64, threshold: f64) -> bool {
    ratio < threshold - 1e-12 * (1.0 + threshold.abs())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(setting: &ProductSetting, delta: f64, cfg: &DeltaConfig) -> Result<()> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::arg(format!("delta {delta} must be finite and >= 0")));
    }
    if delta == 0.0 && setting.num_items() > MAX_ENUMERATED_ITEMS {
        return Err(Error::ResourceLimit(format!(
            "exact separation with delta = 0 enumerates outcomes; {} items exceed {MAX_ENUMERATED_ITEMS}",
            setting.num_items()
        )));
    }
    if setting.num_actions() > cfg.max_actions {
        return Err(Error::arg(format!(
            "{} actions exceed the supported maximum of {}",
            setting.num_actions(),
            cfg.max_actions
        )));
    }
    Ok(())
}

/// Cheapest payment, up to the search tolerance, of a multiplicatively
/// `delta`-IC contract for `action`.
///
/// The expected payment is at most `OPT_i + eps_search`, where `OPT_i` is the
/// exact-IC minimum payment.
pub fn min_payment_delta(
    setting: &ProductSetting,
    action: usize,
    delta: f64,
    cfg: &DeltaConfig,
) -> Result<DeltaSolveResult> {
    check_action(setting, action)?;
    check_inputs(setting, delta, cfg)?;
    let n = setting.num_actions();
    let scale = (0..n)
        .map(|a| setting.expected_reward(a).max(setting.cost(a)))
        .fold(0.0, f64::max);
    if n == 1 || scale == 0.0 {
        return Ok(trivial(action, n));
    }
    let normalized = setting.scaled(1.0 / scale);
    let others: Vec<usize> = (0..n).filter(|&k| k != action).collect();
    let cost_diff = others
        .iter()
        .map(|&k| normalized.cost(action) - normalized.cost(k))
        .collect();
    let c_min = (0..n).map(|a| normalized.cost(a)).fold(f64::INFINITY, f64::min);
    let r_i = normalized.expected_reward(action);
    let eps = match cfg.eps_search {
        Some(e) if e.is_finite() && e > 0.0 => e / scale,
        Some(e) => return Err(Error::arg(format!("search tolerance {e} must be finite and > 0"))),
        None => 1e-6 * r_i,
    }
    .max(1e-12);

    let mut prob = Problem {
        setting: normalized,
        target: action,
        others,
        delta,
        cost_diff,
        cfg,
        cuts: Vec::new(),
        rows: Vec::new(),
        seen: BTreeSet::new(),
        trace: Vec::new(),
        scale,
        bisection: 0,
    };

    // Any contract making `action` IC pays at least c_i - c_min, so that level
    // is never refuted.
    let mut lo = (prob.setting.cost(action) - c_min).max(0.0);
    let mut lo_lambda: Option<Vec<f64>> = None;
    let mut hi = r_i.max(lo + eps);
    let mut expansions = 0;
    loop {
        match prob.query(hi)? {
            Answer::Infeasible => break,
            Answer::Feasible(lambda) => {
                lo = hi;
                lo_lambda = Some(lambda);
                hi += hi.max(1.0);
                expansions += 1;
                if expansions > 64 {
                    return Err(Error::ResourceLimit("dual objective appears unbounded".into()));
                }
            }
        }
        prob.bisection += 1;
    }
    while hi - lo > eps {
        if prob.bisection > cfg.max_bisections {
            return Err(Error::IterationLimit {
                limit: cfg.max_bisections,
                context: "level bisection",
            });
        }
        prob.bisection += 1;
        let mid = 0.5 * (lo + hi);
        match prob.query(mid)? {
            Answer::Feasible(lambda) => {
                lo = mid;
                lo_lambda = Some(lambda);
            }
            Answer::Infeasible => hi = mid,
        }
    }

    let (sparse, _) = prob.extract()?;
    let contract = Contract::Sparse(sparse);
    let expected_payment = setting.expected_payment(action, &contract)?;
    Ok(DeltaSolveResult {
        action,
        contract,
        expected_payment,
        gamma_star: hi * scale,
        gamma_lower: lo * scale,
        lambda: lo_lambda.map(|l| prob.full_lambda(&l)),
        cuts: prob.cuts,
        trace: prob.trace,
    })
}

fn trivial(action: usize, n: usize) -> DeltaSolveResult {
    DeltaSolveResult {
        action,
        contract: Contract::zero(),
        expected_payment: 0.0,
        gamma_star: 0.0,
        gamma_lower: 0.0,
        lambda: Some(vec![0.0; n]),
        cuts: Vec::new(),
        trace: Vec::new(),
    }
}

/// Runs [`min_payment_delta`] for every action and keeps the best payoff,
/// lowest index on ties.
pub fn opt_contract_delta(setting: &ProductSetting, delta: f64, cfg: &DeltaConfig) -> Result<OptContractResult> {
    opt_contract_delta_per_action(setting, delta, cfg).map(|(best, _)| best)
}

/// [`opt_contract_delta`] together with every per-action solve, traces
/// included, in action order.
pub fn opt_contract_delta_per_action(
    setting: &ProductSetting,
    delta: f64,
    cfg: &DeltaConfig,
) -> Result<(OptContractResult, Vec<DeltaSolveResult>)> {
    check_inputs(setting, delta, cfg)?;
    let mut best: Option<OptContractResult> = None;
    let mut all = Vec::with_capacity(setting.num_actions());
    for action in 0..setting.num_actions() {
        let r = min_payment_delta(setting, action, delta, cfg)?;
        let payoff = setting.expected_reward(action) - r.expected_payment;
        if best.as_ref().is_none_or(|b| payoff > b.payoff + cfg.tol.tie) {
            best = Some(OptContractResult {
                action,
                contract: r.contract.clone(),
                expected_payment: r.expected_payment,
                payoff,
            });
        }
        all.push(r);
    }
    let best = best.ok_or_else(|| Error::arg("setting has no actions"))?;
    Ok((best, all))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::min_payment;
    use crate::model::{verify_delta_ic, IcNotion};
    use proptest::prelude::*;

    fn two_actions() -> ProductSetting {
        ProductSetting::new(vec![0.0, 0.4], vec![1.0, 0.5], vec![vec![0.2, 0.3], vec![0.8, 0.6]]).unwrap()
    }

    #[test]
    fn two_actions_match_the_likelihood_ratio_contract() {
        // With two actions the optimum pays only on the outcome maximizing
        // q_{1,S} / q_{0,S}, which is {0, 1} here.
        let s = two_actions();
        let t = Tolerances::default();
        let exact = min_payment(&s.to_explicit().unwrap(), 1, 0.0, IcNotion::Additive, &t).unwrap();
        let r = min_payment_delta(&s, 1, 0.0, &DeltaConfig::default()).unwrap();
        assert!((r.expected_payment - exact.expected_payment).abs() < 1e-5);
        let Contract::Sparse(c) = &r.contract else { panic!() };
        assert_eq!(c.payments.keys().copied().collect::<Vec<_>>(), vec![Outcome(0b11)]);
        // q_1 = 0.48, q_0 = 0.06: payment 0.4 / 0.42 on {0, 1}.
        assert!((exact.expected_payment - 0.48 * 0.4 / 0.42).abs() < 1e-12);
    }

    #[test]
    fn delta_contracts_are_delta_ic_and_cheaper() {
        let s = two_actions();
        let t = Tolerances::default();
        let delta = 0.1;
        let r = min_payment_delta(&s, 1, delta, &DeltaConfig::default()).unwrap();
        assert!(verify_delta_ic(&s, &r.contract, 1, delta, IcNotion::Multiplicative, &t).unwrap());
        let exact = min_payment(&s.to_explicit().unwrap(), 1, 0.0, IcNotion::Additive, &t).unwrap();
        assert!(r.expected_payment <= exact.expected_payment + 1e-6);
    }

    #[test]
    fn ellipsoid_agrees_with_cutting_planes() {
        let s = ProductSetting::new(
            vec![0.0, 0.1, 0.3],
            vec![0.4, 0.3, 0.3],
            vec![vec![0.1, 0.2, 0.3], vec![0.5, 0.4, 0.2], vec![0.9, 0.8, 0.7]],
        )
        .unwrap();
        let cuts = DeltaConfig::default();
        let ell = DeltaConfig {
            method: SolveMethod::Ellipsoid,
            ..DeltaConfig::default()
        };
        for a in 0..3 {
            let x = min_payment_delta(&s, a, 0.1, &cuts).unwrap();
            let y = min_payment_delta(&s, a, 0.1, &ell).unwrap();
            assert!((x.expected_payment - y.expected_payment).abs() < 1e-5, "action {a}");
        }
    }

    #[test]
    fn rejects_too_many_actions() {
        let s = ProductSetting::new(vec![0.0; 7], vec![1.0], vec![vec![0.5]; 7]).unwrap();
        assert!(matches!(
            min_payment_delta(&s, 0, 0.1, &DeltaConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    fn arb_setting() -> impl Strategy<Value = ProductSetting> {
        (2usize..=4, 1usize..=5).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.05f64..0.95, m), n),
                proptest::collection::vec(0.0f64..1.0, m),
                proptest::collection::vec(0.0f64..0.9, n),
            )
                .prop_map(|(probs, rewards, frac)| {
                    let rs: Vec<f64> = probs
                        .iter()
                        .map(|row| row.iter().zip(&rewards).map(|(q, r)| q * r).sum())
                        .collect();
                    let mut costs: Vec<f64> = rs.iter().zip(&frac).map(|(r, f)| r * f).collect();
                    costs[0] = 0.0;
                    ProductSetting::new(costs, rewards, probs).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn certificates_and_payment_bounds(s in arb_setting(), delta in 0.01f64..0.5) {
            let t = Tolerances::default();
            let e = s.to_explicit().unwrap();
            for a in 0..s.num_actions() {
                let r = min_payment_delta(&s, a, delta, &DeltaConfig::default()).unwrap();
                prop_assert!(verify_delta_ic(&s, &r.contract, a, delta, IcNotion::Multiplicative, &t).unwrap());
                let eps = 1e-6 * s.expected_reward(a);
                if let Ok(exact) = min_payment(&e, a, 0.0, IcNotion::Additive, &t) {
                    prop_assert!(r.expected_payment <= exact.expected_payment + eps.max(1e-9) + 1e-9);
                    prop_assert!(r.gamma_lower <= exact.expected_payment + 1e-7);
                }
                // The accepted dual point is feasible for the exact dual.
                if let Some(lambda) = &r.lambda {
                    let total: f64 = lambda.iter().sum();
                    for k in 0..e.num_outcomes() {
                        let q = e.dist()[a][k];
                        if q > 0.0 {
                            let mix: f64 = (0..s.num_actions()).map(|b| lambda[b] * e.dist()[b][k] / q).sum();
                            prop_assert!(total - 1.0 <= mix + 1e-6 * (1.0 + total));
                        }
                    }
                }
            }
        }
    }
}
