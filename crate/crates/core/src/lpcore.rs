//! Dense two-phase simplex method.
//!
//! The tableau is kept in full. Entering columns follow Dantzig's rule until a
//! run of degenerate pivots is detected, then Bland's rule takes over until
//! the objective moves again, which rules out cycling. Every row gets an
//! identity column (its slack or artificial), so `B^-1` and the duals can be
//! read straight off the final tableau.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `opt c^T x` subject to the constraints and `lower <= x <= upper`.
///
/// Lower bounds default to 0 and may be `-inf`; upper bounds default to
/// `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            sense,
            objective,
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a constraint and returns its row index.
    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        Error::check_len("lower bounds", n, self.lower.len())?;
        Error::check_len("upper bounds", n, self.upper.len())?;
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::arg("objective contains a non-finite coefficient"));
        }
        for (r, con) in self.constraints.iter().enumerate() {
            Error::check_len("constraint row", n, con.coeffs.len())?;
            if con.coeffs.iter().any(|a| !a.is_finite()) || !con.rhs.is_finite() {
                return Err(Error::arg(format!("constraint {r} contains a non-finite value")));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY || l > u {
                return Err(Error::arg(format!("variable {j} has invalid bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }

    fn has_default_bounds(&self) -> bool {
        self.lower.iter().all(|&l| l == 0.0) && self.upper.iter().all(|&u| u == f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output.
///
/// At `Optimal`, `objective = c^T x` and `duals` satisfy
/// `objective = b^T y + d^T x` with `d = c - A^T y` the reduced costs, which
/// vanish on variables strictly between their bounds. For minimization a
/// `Ge` row has `y >= 0` and a `Le` row `y <= 0`; maximization flips both.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// At `Infeasible` for programs with default bounds: multipliers `y` with
    /// `y >= 0` on `Ge` rows, `y <= 0` on `Le` rows, `A^T y <= 0` and
    /// `b^T y > 0`.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: Tolerances,
    pub max_iterations: usize,
    /// Use Bland's rule for every pivot instead of only after degenerate runs.
    pub bland_only: bool,
    /// Degenerate pivots tolerated before switching to Bland's rule.
    pub degenerate_run: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: Tolerances::default(),
            max_iterations: 50_000,
            bland_only: false,
            degenerate_run: 20,
        }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: Tolerances) -> Self {
        SolverConfig {
            tol,
            ..SolverConfig::default()
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with(lp, &SolverConfig::default())
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + x'`.
    Shift { col: usize, lower: f64 },
    /// `x = upper - x'`.
    Flip { col: usize, upper: f64 },
    /// `x = x+ - x-`.
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    z: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[pr * w + pc];
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.z);
        self.basis[pr] = pc;
    }

    /// Resets the reduced-cost row for cost vector `c` (length `width - 1`).
    fn price(&mut self, c: &[f64]) {
        let w = self.width;
        self.z[..w - 1].copy_from_slice(c);
        self.z[w - 1] = 0.0;
        for r in 0..self.rows {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for k in 0..w {
                    self.z[k] -= cb * self.data[r * w + k];
                }
            }
        }
    }

    /// `c_B^T B^-1 e_r` for every row, given the identity column of each row.
    fn duals(&self, c: &[f64], identity: &[usize]) -> Vec<f64> {
        identity
            .iter()
            .map(|&col| (0..self.rows).map(|k| c[self.basis[k]] * self.at(k, col)).sum())
            .collect()
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    cfg: &'a SolverConfig,
    iterations: usize,
}

impl Simplex<'_> {
    /// Pivots until no allowed column improves the objective.
    fn run(&mut self, t: &mut Tableau, allowed: &[bool], obj_scale: f64) -> Result<Phase> {
        let tol_opt = self.cfg.tol.optimality * obj_scale;
        let tol_piv = self.cfg.tol.pivot;
        let mut bland = self.cfg.bland_only;
        let mut degenerate = 0usize;
        let ncols = t.width - 1;
        loop {
            let entering = if bland {
                (0..ncols).find(|&j| allowed[j] && t.z[j] < -tol_opt)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..ncols {
                    if allowed[j] && t.z[j] < -tol_opt && best.is_none_or(|(_, v)| t.z[j] < v) {
                        best = Some((j, t.z[j]));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(pc) = entering else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..t.rows {
                let a = t.at(r, pc);
                if a > tol_piv {
                    let ratio = t.rhs(r).max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lv)) => {
                            let tie = (ratio - lv).abs() <= 1e-12 * (1.0 + lv.abs());
                            if ratio < lv && !tie || tie && t.basis[r] < t.basis[lr] {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, step)) = leave else {
                return Ok(Phase::Unbounded);
            };
            self.iterations += 1;
            if self.iterations > self.cfg.max_iterations {
                return Err(Error::IterationLimit {
                    limit: self.cfg.max_iterations,
                    context: "simplex",
                });
            }
            t.pivot(pr, pc);
            if step <= 1e-13 {
                degenerate += 1;
                if degenerate >= self.cfg.degenerate_run {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = self.cfg.bland_only;
            }
        }
    }
}

pub fn solve_with(lp: &LinearProgram, cfg: &SolverConfig) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    // Columns for the original variables.
    let mut maps = Vec::with_capacity(n);
    let mut ns = 0usize;
    for j in 0..n {
        let (l, u) = (lp.lower[j], lp.upper[j]);
        let map = if l.is_finite() {
            ns += 1;
            VarMap::Shift { col: ns - 1, lower: l }
        } else if u.is_finite() {
            ns += 1;
            VarMap::Flip { col: ns - 1, upper: u }
        } else {
            ns += 2;
            VarMap::Split {
                pos: ns - 2,
                neg: ns - 1,
            }
        };
        maps.push(map);
    }

    // Rows: the constraints, then `x' <= u - l` for doubly bounded variables.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for con in &lp.constraints {
        let mut a = vec![0.0; ns];
        let mut b = con.rhs;
        for (j, &v) in con.coeffs.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, lower } => {
                    a[col] += v;
                    b -= v * lower;
                }
                VarMap::Flip { col, upper } => {
                    a[col] -= v;
                    b -= v * upper;
                }
                VarMap::Split { pos, neg } => {
                    a[pos] += v;
                    a[neg] -= v;
                }
            }
        }
        rows.push((a, con.relation, b));
    }
    for j in 0..n {
        if let VarMap::Shift { col, lower } = maps[j] {
            if lp.upper[j].is_finite() {
                let mut a = vec![0.0; ns];
                a[col] = 1.0;
                rows.push((a, Relation::Le, lp.upper[j] - lower));
            }
        }
    }

    let mut c_int = vec![0.0; ns];
    for j in 0..n {
        let c = sign * lp.objective[j];
        match maps[j] {
            VarMap::Shift { col, .. } => c_int[col] += c,
            VarMap::Flip { col, .. } => c_int[col] -= c,
            VarMap::Split { pos, neg } => {
                c_int[pos] += c;
                c_int[neg] -= c;
            }
        }
    }

    // Make every right-hand side nonnegative.
    let mut negated = vec![false; rows.len()];
    for (r, (a, rel, b)) in rows.iter_mut().enumerate() {
        if *b < 0.0 {
            negated[r] = true;
            a.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let nr = rows.len();
    let extra: usize = rows
        .iter()
        .map(|(_, rel, _)| if *rel == Relation::Ge { 2 } else { 1 })
        .sum();
    let ncols = ns + extra;
    let width = ncols + 1;
    let mut data = vec![0.0; nr * width];
    let mut identity = vec![0usize; nr];
    let mut artificial = vec![false; ncols];
    let mut next = ns;
    for (r, (a, rel, b)) in rows.iter().enumerate() {
        data[r * width..r * width + ns].copy_from_slice(a);
        data[r * width + ncols] = *b;
        match rel {
            Relation::Le => {
                data[r * width + next] = 1.0;
                identity[r] = next;
                next += 1;
            }
            Relation::Ge => {
                data[r * width + next] = -1.0;
                data[r * width + next + 1] = 1.0;
                identity[r] = next + 1;
                artificial[next + 1] = true;
                next += 2;
            }
            Relation::Eq => {
                data[r * width + next] = 1.0;
                identity[r] = next;
                artificial[next] = true;
                next += 1;
            }
        }
    }
    let mut t = Tableau {
        rows: nr,
        width,
        data,
        z: vec![0.0; width],
        basis: identity.clone(),
    };
    let mut simplex = Simplex { cfg, iterations: 0 };
    let b_scale = rows.iter().map(|(_, _, b)| b.abs()).fold(1.0, f64::max);

    if artificial.iter().any(|&a| a) {
        let c1: Vec<f64> = artificial.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
        t.price(&c1);
        let allowed = vec![true; ncols];
        simplex.run(&mut t, &allowed, 1.0)?;
        let infeasibility = -t.z[ncols];
        if infeasibility > cfg.tol.feas * b_scale {
            let farkas = lp.has_default_bounds().then(|| {
                t.duals(&c1, &identity)
                    .iter()
                    .zip(&negated)
                    .map(|(&w, &neg)| if neg { -w } else { w })
                    .collect()
            });
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                duals: Vec::new(),
                reduced_costs: Vec::new(),
                objective: f64::NAN,
                farkas,
                iterations: simplex.iterations,
            });
        }
        // Move artificials out of the basis where possible; rows where that
        // fails are redundant and keep a zero artificial.
        for r in 0..nr {
            if artificial[t.basis[r]] {
                if let Some(j) = (0..ncols).find(|&j| !artificial[j] && t.at(r, j).abs() > 1e-9) {
                    t.pivot(r, j);
                }
            }
        }
    }

    let mut c2 = vec![0.0; ncols];
    c2[..ns].copy_from_slice(&c_int);
    t.price(&c2);
    let allowed: Vec<bool> = artificial.iter().map(|a| !a).collect();
    let obj_scale = c_int.iter().map(|c| c.abs()).fold(1.0, f64::max);
    let phase = simplex.run(&mut t, &allowed, obj_scale)?;

    let mut x_int = vec![0.0; ncols];
    for r in 0..nr {
        x_int[t.basis[r]] = t.rhs(r);
    }
    let primal: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lower } => lower + x_int[col],
            VarMap::Flip { col, upper } => upper - x_int[col],
            VarMap::Split { pos, neg } => x_int[pos] - x_int[neg],
        })
        .collect();
    let objective: f64 = lp.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();

    if let Phase::Unbounded = phase {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal,
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: sign * f64::NEG_INFINITY,
            farkas: None,
            iterations: simplex.iterations,
        });
    }

    let y_int = t.duals(&c2, &identity);
    let duals: Vec<f64> = (0..lp.constraints.len())
        .map(|r| {
            let y = if negated[r] { -y_int[r] } else { y_int[r] };
            sign * y
        })
        .collect();
    let reduced_costs: Vec<f64> = (0..n)
        .map(|j| {
            lp.objective[j]
                - lp.constraints
                    .iter()
                    .zip(&duals)
                    .map(|(con, y)| con.coeffs[j] * y)
                    .sum::<f64>()
        })
        .collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        duals,
        reduced_costs,
        objective,
        farkas: None,
        iterations: simplex.iterations,
    })
}

/// Largest violation of the constraints and bounds at `x`.
pub fn max_violation(lp: &LinearProgram, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for con in &lp.constraints {
        let lhs: f64 = con.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let v = match con.relation {
            Relation::Le => lhs - con.rhs,
            Relation::Ge => con.rhs - lhs,
            Relation::Eq => (lhs - con.rhs).abs(),
        };
        worst = worst.max(v);
    }
    for (j, &v) in x.iter().enumerate() {
        worst = worst.max(lp.lower[j] - v).max(v - lp.upper[j]);
    }
    worst
}

/// `b^T y + d^T x`, which equals the primal objective at an optimum.
pub fn dual_objective(lp: &LinearProgram, sol: &LpSolution) -> f64 {
    let by: f64 = lp.constraints.iter().zip(&sol.duals).map(|(c, y)| c.rhs * y).sum();
    let dx: f64 = sol.reduced_costs.iter().zip(&sol.primal).map(|(d, x)| d * x).sum();
    by + dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lp_min(c: Vec<f64>) -> LinearProgram {
        LinearProgram::new(Sense::Minimize, c)
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let mut lp = LinearProgram::new(Sense::Maximize, vec![3.0, 5.0]);
        lp.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.primal[0] - 2.0).abs() < 1e-9 && (s.primal[1] - 6.0).abs() < 1e-9);
        // Shadow prices 0, 3/2, 1.
        assert!(s.duals[0].abs() < 1e-9);
        assert!((s.duals[1] - 1.5).abs() < 1e-9);
        assert!((s.duals[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_action_min_payment() {
        // min 0.9 p s.t. (0.9 - 0.2) p >= 0.5 -> p = 5/7, objective 9/14.
        let mut lp = lp_min(vec![0.9]);
        lp.add_constraint(vec![0.7], Relation::Ge, 0.5);
        let s = solve(&lp).unwrap();
        assert!((s.objective - 9.0 / 14.0).abs() < 1e-12);
        // The dual "max lambda (c_2 - c_1) s.t. 0.7 lambda <= 0.9" has the same value.
        let mut dual = LinearProgram::new(Sense::Maximize, vec![0.5]);
        dual.add_constraint(vec![0.7], Relation::Le, 0.9);
        let d = solve(&dual).unwrap();
        assert!((d.objective - s.objective).abs() < 1e-12);
        assert!((s.duals[0] - d.primal[0]).abs() < 1e-12);
    }

    #[test]
    fn infeasible_with_certificate() {
        // x + y <= 1 and x + y >= 2.
        let mut lp = lp_min(vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        lp.add_constraint(vec![1.0, 1.0], Relation::Ge, 2.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        check_farkas(&lp, s.farkas.as_ref().unwrap());
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.add_constraint(vec![-1.0, 1.0], Relation::Le, 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_and_free_variables() {
        // min x - y, -2 <= x <= 3, y free, y <= 5 - x, y >= x - 10.
        let mut lp = lp_min(vec![1.0, -1.0]);
        lp.set_bounds(0, -2.0, 3.0);
        lp.set_bounds(1, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_constraint(vec![1.0, 1.0], Relation::Le, 5.0);
        lp.add_constraint(vec![-1.0, 1.0], Relation::Ge, -10.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] + 2.0).abs() < 1e-9 && (s.primal[1] - 7.0).abs() < 1e-9);
        assert!((s.objective + 9.0).abs() < 1e-9);
        assert!((dual_objective(&lp, &s) - s.objective).abs() < 1e-9);
        // Upper-only bound.
        let mut lp = lp_min(vec![-1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, 2.5);
        let s = solve(&lp).unwrap();
        assert!((s.primal[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_nan() {
        let mut lp = lp_min(vec![f64::NAN]);
        assert!(matches!(solve(&lp), Err(Error::InvalidArgument(_))));
        lp.objective[0] = 1.0;
        lp.add_constraint(vec![1.0, 2.0], Relation::Le, 1.0);
        assert!(matches!(solve(&lp), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn iteration_cap_is_a_resource_error() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_constraint(vec![1.0, 2.0], Relation::Le, 4.0);
        lp.add_constraint(vec![3.0, 1.0], Relation::Le, 6.0);
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(solve_with(&lp, &cfg), Err(Error::IterationLimit { .. })));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under Dantzig's rule without an anti-cycling
        // safeguard. Optimum -1/20 at (1/25, 0, 1, 0).
        let mut lp = lp_min(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        for bland_only in [false, true] {
            let cfg = SolverConfig {
                bland_only,
                ..SolverConfig::default()
            };
            let s = solve_with(&lp, &cfg).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            assert!((s.objective + 0.05).abs() < 1e-12);
        }
    }

    fn check_farkas(lp: &LinearProgram, y: &[f64]) {
        let tol = 1e-9;
        let mut yb = 0.0;
        for (con, &v) in lp.constraints.iter().zip(y) {
            match con.relation {
                Relation::Ge => assert!(v >= -tol),
                Relation::Le => assert!(v <= tol),
                Relation::Eq => {}
            }
            yb += v * con.rhs;
        }
        assert!(yb > tol);
        for j in 0..lp.num_vars() {
            let aty: f64 = lp.constraints.iter().zip(y).map(|(c, v)| c.coeffs[j] * v).sum();
            assert!(aty <= tol);
        }
    }

    /// Random LP with a known feasible point `x0 >= 0` and costs `c >= 0`,
    /// hence feasible and bounded below.
    fn arb_feasible_lp() -> impl Strategy<Value = LinearProgram> {
        (1usize..=20, 1usize..=20).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0.0f64..2.0, n),
                proptest::collection::vec((proptest::collection::vec(-1.0f64..1.0, n), 0u8..3, 0.0f64..1.0), m),
            )
                .prop_map(|(c, x0, rows)| {
                    let mut lp = LinearProgram::new(Sense::Minimize, c);
                    for (a, kind, slack) in rows {
                        let ax: f64 = a.iter().zip(&x0).map(|(p, q)| p * q).sum();
                        let (rel, rhs) = match kind {
                            0 => (Relation::Le, ax + slack),
                            1 => (Relation::Ge, ax - slack),
                            _ => (Relation::Eq, ax),
                        };
                        lp.add_constraint(a, rel, rhs);
                    }
                    lp
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn strong_duality_on_feasible_programs(lp in arb_feasible_lp()) {
            let tol = Tolerances::default();
            let s = solve(&lp).unwrap();
            prop_assert_eq!(s.status, LpStatus::Optimal);
            prop_assert!(max_violation(&lp, &s.primal) <= tol.feas);
            let by: f64 = lp.constraints.iter().zip(&s.duals).map(|(c, y)| c.rhs * y).sum();
            prop_assert!((by - s.objective).abs() <= tol.gap * (1.0 + s.objective.abs()));
            for d in &s.reduced_costs {
                prop_assert!(*d >= -tol.feas);
            }
            for (con, y) in lp.constraints.iter().zip(&s.duals) {
                match con.relation {
                    Relation::Ge => prop_assert!(*y >= -tol.feas),
                    Relation::Le => prop_assert!(*y <= tol.feas),
                    Relation::Eq => {}
                }
            }
        }

        #[test]
        fn row_order_does_not_change_the_optimum(lp in arb_feasible_lp(), seed in 0u64..1000) {
            let a = solve(&lp).unwrap();
            let mut permuted = lp.clone();
            let k = permuted.constraints.len();
            permuted.constraints.rotate_left((seed as usize) % k);
            permuted.constraints.reverse();
            let b = solve(&permuted).unwrap();
            prop_assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
        }

        #[test]
        fn infeasible_programs_carry_certificates(
            a in proptest::collection::vec(-1.0f64..1.0, 1..6),
            gap in 0.01f64..1.0,
        ) {
            // a.x <= t and a.x >= t + gap cannot both hold.
            let n = a.len();
            let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0; n]);
            lp.add_constraint(a.clone(), Relation::Le, 0.3);
            lp.add_constraint(a, Relation::Ge, 0.3 + gap);
            let s = solve(&lp).unwrap();
            prop_assert_eq!(s.status, LpStatus::Infeasible);
            check_farkas(&lp, s.farkas.as_ref().unwrap());
        }
    }
}
