//! Numerical tolerances. Every solver reads them from one record so that a
//! single `--tol` override reaches all comparisons.

/// Tolerances used across the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility of LP solutions.
    pub feas: f64,
    /// Optimality gap accepted between primal and dual LP objectives.
    pub gap: f64,
    /// Smallest pivot magnitude the simplex method will divide by.
    pub pivot: f64,
    /// Reduced costs above `-optimality` count as non-improving.
    pub optimality: f64,
    /// Agent utilities within `tie` of the best are treated as tied.
    pub tie: f64,
    /// Slack allowed when verifying incentive constraints.
    pub ic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-7,
            gap: 1e-7,
            pivot: 1e-11,
            optimality: 1e-10,
            tie: 1e-9,
            ic: 1e-9,
        }
    }
}
