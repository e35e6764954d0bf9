//! Minimum likelihood-ratio outcome over product distributions.
//!
//! Given reference item probabilities `q` and mixture components `q'_k` with
//! weights `w_k`, find the outcome `S` with `q_S > 0` minimizing
//! `sum_k w_k q'_{k,S} / q_S`. This is the separation problem for the dual of
//! the minimum-payment program.
//!
//! The approximation scheme builds outcomes item by item. After each item it
//! buckets partial outcomes by the `floor(-log_D q)` of every distribution,
//! with `D = (1 + eps)^(1 / 2m)`, and keeps the first member of each bucket.
//! Every kept outcome stays within `D` per step of the one it replaces in
//! each coordinate, so the final ratio is within `D^(2m) = 1 + eps` of the
//! optimum.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{ceil, exp, floor, ln};
use crate::model::{Outcome, MAX_ENUMERATED_ITEMS, MAX_ITEMS};

/// One separation query.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationInstance {
    /// Mixture weights, nonnegative and summing to 1.
    pub weights: Vec<f64>,
    /// Item probabilities of each mixture component.
    pub mixtures: Vec<Vec<f64>>,
    /// Item probabilities of the reference distribution.
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub outcome: Outcome,
    pub ratio: f64,
}

/// Bucketing statistics of one approximation run.
#[derive(Debug, Clone, PartialEq)]
pub struct FptasStats {
    /// Distinct buckets after each item, excluding the last.
    pub families: Vec<usize>,
    /// Partial outcomes evaluated after the last item.
    pub finalists: usize,
    /// `t = ceil(2 m^2 ln(1/q_min) / eps)`, plus one when some probability is
    /// zero since zero gets a bucket of its own.
    pub t: u64,
    /// `t^n` for `n` distributions, the bound on buckets per step.
    pub family_bound: f64,
}

impl SeparationInstance {
    pub fn num_items(&self) -> usize {
        self.reference.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.num_items();
        if m > MAX_ITEMS {
            return Err(Error::arg(format!("{m} items exceed the limit of {MAX_ITEMS}")));
        }
        Error::check_len("mixture weights", self.mixtures.len(), self.weights.len())?;
        for row in self.mixtures.iter().chain(core::iter::once(&self.reference)) {
            Error::check_len("item probabilities", m, row.len())?;
            if row.iter().any(|q| !q.is_finite() || !(0.0..=1.0).contains(q)) {
                return Err(Error::arg("item probabilities must lie in [0, 1]"));
            }
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::arg("mixture weights must be finite and >= 0"));
        }
        let total: f64 = self.weights.iter().sum();
        if !self.weights.is_empty() && (total - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(())
    }

    /// `sum_k w_k q'_{k,S} / q_S`, or `None` when `q_S = 0`.
    pub fn ratio(&self, outcome: Outcome) -> Option<f64> {
        let logs = self.log_marginals(outcome);
        let reference = *logs.last().unwrap();
        (reference > f64::NEG_INFINITY).then(|| self.ratio_from_logs(&logs))
    }

    fn log_marginals(&self, outcome: Outcome) -> Vec<f64> {
        self.rows()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, &q)| ln(if outcome.contains(j) { q } else { 1.0 - q }))
                    .sum()
            })
            .collect()
    }

    /// Mixture rows followed by the reference row.
    fn rows(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.mixtures.iter().chain(core::iter::once(&self.reference))
    }

    fn ratio_from_logs(&self, logs: &[f64]) -> f64 {
        let reference = logs[logs.len() - 1];
        self.weights
            .iter()
            .zip(logs)
            .map(|(w, l)| if *w == 0.0 { 0.0 } else { w * exp(l - reference) })
            .sum()
    }
}

/// Relative tolerance under which two ratios count as equal.
const RATIO_TIE: f64 = 1e-12;

fn improves(candidate: f64, incumbent: Option<OracleResult>) -> bool {
    incumbent.is_none_or(|b| candidate < b.ratio - RATIO_TIE * b.ratio.abs().max(1e-300))
}

/// Exhaustive search over all `2^m` outcomes; ties go to the smallest bitset.
pub fn min_ratio_bruteforce(inst: &SeparationInstance) -> Result<OracleResult> {
    inst.validate()?;
    let m = inst.num_items();
    if m > MAX_ENUMERATED_ITEMS {
        return Err(Error::ResourceLimit(format!(
            "{m} items exceed the enumeration limit of {MAX_ENUMERATED_ITEMS}"
        )));
    }
    let mut best: Option<OracleResult> = None;
    for bits in 0..1u64 << m {
        let outcome = Outcome(bits);
        if let Some(ratio) = inst.ratio(outcome) {
            if improves(ratio, best) {
                best = Some(OracleResult { outcome, ratio });
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("no outcome has positive reference probability".into()))
}

/// Approximation scheme: the returned ratio is at most `(1 + eps)` times the
/// minimum.
pub fn min_ratio_fptas(inst: &SeparationInstance, eps: f64) -> Result<OracleResult> {
    min_ratio_fptas_with_stats(inst, eps).map(|(r, _)| r)
}

struct Partial {
    outcome: Outcome,
    logs: Vec<f64>,
}

/// Bucket index of a log-probability; zero probability gets its own bucket.
fn bucket(log_q: f64, log_base: f64) -> i64 {
    if log_q == f64::NEG_INFINITY {
        i64::MIN
    } else {
        floor(-log_q / log_base) as i64
    }
}

pub fn min_ratio_fptas_with_stats(inst: &SeparationInstance, eps: f64) -> Result<(OracleResult, FptasStats)> {
    inst.validate()?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::arg(format!("eps {eps} must be finite and > 0")));
    }
    let m = inst.num_items();
    let dists = inst.mixtures.len() + 1;
    let log_base = ln(1.0 + eps) / (2 * m.max(1)) as f64;
    let rows: Vec<&Vec<f64>> = inst.rows().collect();

    let mut stats = FptasStats {
        families: Vec::with_capacity(m.saturating_sub(1)),
        finalists: 0,
        t: 0,
        family_bound: 0.0,
    };
    let (q_min, has_zero) = smallest_factor(inst);
    let t = ceil(2.0 * (m * m) as f64 * ln(1.0 / q_min) / eps).max(1.0) as u64 + u64::from(has_zero);
    stats.t = t;
    stats.family_bound = crate::math::powi(t as f64, dists as i32);

    let mut current = vec![Partial {
        outcome: Outcome::EMPTY,
        logs: vec![0.0; dists],
    }];
    for j in 0..m {
        let mut children = Vec::with_capacity(2 * current.len());
        for p in &current {
            for take in [false, true] {
                let logs: Vec<f64> = p
                    .logs
                    .iter()
                    .zip(&rows)
                    .map(|(l, row)| l + ln(if take { row[j] } else { 1.0 - row[j] }))
                    .collect();
                // The reference stays at zero probability once it gets there.
                if logs[dists - 1] == f64::NEG_INFINITY {
                    continue;
                }
                let outcome = if take { p.outcome.with(j) } else { p.outcome };
                children.push(Partial { outcome, logs });
            }
        }
        if j + 1 == m {
            current = children;
            break;
        }
        let mut seen: BTreeMap<Vec<i64>, ()> = BTreeMap::new();
        current = children
            .into_iter()
            .filter(|c| {
                let key: Vec<i64> = c.logs.iter().map(|&l| bucket(l, log_base)).collect();
                seen.insert(key, ()).is_none()
            })
            .collect();
        stats.families.push(current.len());
    }
    stats.finalists = current.len();

    let mut best: Option<OracleResult> = None;
    current.sort_by_key(|p| p.outcome);
    for p in &current {
        let ratio = inst.ratio_from_logs(&p.logs);
        if improves(ratio, best) {
            best = Some(OracleResult {
                outcome: p.outcome,
                ratio,
            });
        }
    }
    let best = best.ok_or_else(|| Error::Numerical("no outcome has positive reference probability".into()))?;
    Ok((best, stats))
}

/// Smallest positive factor `q` or `1 - q` over all rows, and whether some
/// factor is zero.
fn smallest_factor(inst: &SeparationInstance) -> (f64, bool) {
    let mut q_min: f64 = 1.0;
    let mut has_zero = false;
    for row in inst.rows() {
        for &q in row {
            for v in [q, 1.0 - q] {
                if v <= 0.0 {
                    has_zero = true;
                } else {
                    q_min = q_min.min(v);
                }
            }
        }
    }
    (q_min, has_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_mixture_has_unit_ratio_everywhere() {
        let inst = SeparationInstance {
            weights: vec![1.0],
            mixtures: vec![vec![0.3, 0.6, 0.2]],
            reference: vec![0.3, 0.6, 0.2],
        };
        let r = min_ratio_bruteforce(&inst).unwrap();
        assert_eq!(r.outcome, Outcome::EMPTY);
        assert!((r.ratio - 1.0).abs() < 1e-12);
        let f = min_ratio_fptas(&inst, 0.1).unwrap();
        assert!((f.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_item_minimizer() {
        // Reference [0.5, 0.5] against [0.25, 0.75]. Ratios by outcome:
        // {} 0.75, {0} 0.25, {1} 2.25, {0,1} 0.75.
        let inst = SeparationInstance {
            weights: vec![1.0],
            mixtures: vec![vec![0.25, 0.75]],
            reference: vec![0.5, 0.5],
        };
        let r = min_ratio_bruteforce(&inst).unwrap();
        assert_eq!(r.outcome, Outcome(0b01));
        assert!((r.ratio - 0.25).abs() < 1e-12);
        assert_eq!(min_ratio_fptas(&inst, 0.01).unwrap().outcome, Outcome(0b01));
    }

    #[test]
    fn zero_reference_outcomes_are_skipped() {
        // Item 0 never occurs under the reference.
        let inst = SeparationInstance {
            weights: vec![1.0],
            mixtures: vec![vec![0.9, 0.5]],
            reference: vec![0.0, 0.5],
        };
        let r = min_ratio_bruteforce(&inst).unwrap();
        assert!(!r.outcome.contains(0));
        assert!((r.ratio - 0.1).abs() < 1e-12);
        let f = min_ratio_fptas(&inst, 0.1).unwrap();
        assert!(!f.outcome.contains(0));
    }

    #[test]
    fn rejects_bad_input() {
        let inst = SeparationInstance {
            weights: vec![0.6],
            mixtures: vec![vec![0.5]],
            reference: vec![0.5],
        };
        assert!(min_ratio_bruteforce(&inst).is_err());
        let inst = SeparationInstance {
            weights: vec![1.0],
            mixtures: vec![vec![0.5]],
            reference: vec![0.5],
        };
        assert!(min_ratio_fptas(&inst, 0.0).is_err());
        assert!(min_ratio_fptas(&inst, f64::NAN).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = SeparationInstance> {
        (1usize..=4, 1usize..=9).prop_flat_map(|(k, m)| {
            (
                proptest::collection::vec(0.01f64..1.0, k),
                proptest::collection::vec(proptest::collection::vec(0.0f64..=1.0, m), k),
                proptest::collection::vec(0.02f64..0.98, m),
            )
                .prop_map(|(w, mixtures, reference)| {
                    let t: f64 = w.iter().sum();
                    SeparationInstance {
                        weights: w.into_iter().map(|v| v / t).collect(),
                        mixtures,
                        reference,
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn approximation_guarantee(inst in arb_instance(), eps in 0.01f64..1.0) {
            let exact = min_ratio_bruteforce(&inst).unwrap();
            let (approx, stats) = min_ratio_fptas_with_stats(&inst, eps).unwrap();
            prop_assert!(approx.ratio >= exact.ratio * (1.0 - 1e-12));
            prop_assert!(approx.ratio <= (1.0 + eps) * exact.ratio * (1.0 + 1e-12));
            prop_assert_eq!(inst.ratio(approx.outcome).map(|r| (r - approx.ratio).abs() < 1e-9 * (1.0 + r)), Some(true));
            for &f in &stats.families {
                prop_assert!(f as f64 <= stats.family_bound);
            }
        }
    }
}
