//! Dense two-phase revised simplex with Bland's pivoting rule.
//!
//! Problems are stated with general row senses and variable bounds and are
//! brought to standard form internally. Equality rows are kept as equalities so
//! that their dual values keep their meaning (deflator values, state prices).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Constraint>,
}

impl LinearProgram {
    /// `n_vars` variables with zero objective and bounds `[0, +∞)`.
    pub fn new(sense: Sense, n_vars: usize) -> Self {
        LinearProgram {
            sense,
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, j: usize, c: f64) {
        self.objective[j] = c;
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn set_free(&mut self, j: usize) {
        self.set_bounds(j, f64::NEG_INFINITY, f64::INFINITY);
    }

    /// Adds a row from sparse coefficients; repeated indices are summed. Returns the row index.
    pub fn add_row(
        &mut self,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.rows.push(Constraint { coeffs: coeffs.into_iter().collect(), relation, rhs });
        self.rows.len() - 1
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, r) in self.rows.iter().enumerate() {
            let a = self.row_activity(i, x);
            let v = match r.relation {
                Relation::Le => a - r.rhs,
                Relation::Ge => r.rhs - a,
                Relation::Eq => (a - r.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..self.n_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    fn well_formed(&self) -> bool {
        let n = self.n_vars();
        self.lower.len() == n
            && self.upper.len() == n
            && self.objective.iter().all(|c| c.is_finite())
            && (0..n).all(|j| {
                !self.lower[j].is_nan() && !self.upper[j].is_nan() && self.lower[j] <= self.upper[j]
                    && self.lower[j] < f64::INFINITY
                    && self.upper[j] > f64::NEG_INFINITY
            })
            && self.rows.iter().all(|r| {
                r.rhs.is_finite() && r.coeffs.iter().all(|&(j, a)| j < n && a.is_finite())
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Singular basis, iteration limit, or malformed input.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values (meaningful only when optimal).
    pub x: Vec<f64>,
    /// One dual value per row: the sensitivity of the optimal objective to that row's rhs.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, lp: &LinearProgram, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; lp.n_vars()],
            duals: vec![0.0; lp.n_rows()],
            objective: f64::NAN,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const MAX_ITERATIONS: usize = 200_000;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + x'
    Shift { col: usize, offset: f64 },
    /// x = offset - x'
    Mirror { col: usize, offset: f64 },
    /// x = x⁺ - x⁻
    Split { pos: usize, neg: usize },
}

/// Standard-form problem `min c·z, A z = b, z ≥ 0, b ≥ 0` plus the basis state.
struct Revised {
    m: usize,
    ncols: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    iterations: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Numerical;

impl Revised {
    fn col(&self, j: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.a[i * self.ncols + j]).collect()
    }

    fn ftran(&self, v: &[f64]) -> Vec<f64> {
        let m = self.m;
        (0..m).map(|i| (0..m).map(|k| self.binv[i * m + k] * v[k]).sum()).collect()
    }

    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                for k in 0..m {
                    y[k] += c * self.binv[i * m + k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, costs: &[f64], y: &[f64], j: usize) -> f64 {
        let mut d = costs[j];
        for i in 0..self.m {
            let a = self.a[i * self.ncols + j];
            if a != 0.0 {
                d -= y[i] * a;
            }
        }
        d
    }

    fn refactor(&mut self) -> Result<(), Numerical> {
        let m = self.m;
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a[i * self.ncols + self.basis[k]]);
        let inv = bmat.try_inverse().ok_or(Numerical)?;
        for i in 0..m {
            for k in 0..m {
                self.binv[i * m + k] = inv[(i, k)];
            }
        }
        if self.binv.iter().any(|v| !v.is_finite()) {
            return Err(Numerical);
        }
        self.xb = self.ftran(&self.b);
        Ok(())
    }

    fn pivot(&mut self, r: usize, j: usize, u: &[f64]) {
        let m = self.m;
        let ur = u[r];
        let theta = self.xb[r] / ur;
        for k in 0..m {
            self.binv[r * m + k] /= ur;
        }
        for i in 0..m {
            if i != r && u[i] != 0.0 {
                let f = u[i];
                for k in 0..m {
                    self.binv[i * m + k] -= f * self.binv[r * m + k];
                }
                self.xb[i] -= theta * f;
            }
        }
        self.xb[r] = theta;
        self.is_basic[self.basis[r]] = false;
        self.basis[r] = j;
        self.is_basic[j] = true;
        self.iterations += 1;
    }

    /// With `bounded` the objective is known to be bounded below, so a column without
    /// an acceptable pivot is a rounding artifact and is skipped instead.
    fn run_phase(&mut self, costs: &[f64], allowed: &[bool], bounded: bool) -> Result<PhaseEnd, Numerical> {
        let mut since_refactor = 0;
        let mut skipped = vec![false; self.ncols];
        loop {
            if self.iterations > MAX_ITERATIONS {
                return Err(Numerical);
            }
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            let cb: Vec<f64> = self.basis.iter().map(|&j| costs[j]).collect();
            let y = self.btran(&cb);
            // Bland: lowest-index improving column enters
            let entering = (0..self.ncols).find(|&j| {
                allowed[j]
                    && !skipped[j]
                    && !self.is_basic[j]
                    && self.reduced_cost(costs, &y, j) < -COST_TOL
            });
            let Some(j) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let u = self.ftran(&self.col(j));
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                if u[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / u[i];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie
                                || tie && self.basis[i] < self.basis[r]
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            // small pivots amplify drift in the product-form inverse; recompute first
            if let Some((r, _)) = leave {
                let umax = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if since_refactor > 0 && u[r] < 1e-6 * umax {
                    self.refactor()?;
                    since_refactor = 0;
                    continue;
                }
            }
            let Some((r, _)) = leave else {
                if bounded {
                    skipped[j] = true;
                    continue;
                }
                return Ok(PhaseEnd::Unbounded);
            };
            self.pivot(r, j, &u);
            skipped.iter_mut().for_each(|s| *s = false);
            since_refactor += 1;
        }
    }
}

/// Solves `lp`. Never panics on well-formed input; failures are reported in the status.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    if !lp.well_formed() {
        return LpSolution::failed(LpStatus::NumericalFailure, lp, 0);
    }
    let n = lp.n_vars();

    // variable substitution
    let mut maps = Vec::with_capacity(n);
    let mut nstruct = 0;
    let mut ub_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let map = if lo.is_finite() {
            let col = nstruct;
            nstruct += 1;
            if hi.is_finite() {
                ub_rows.push((col, hi - lo));
            }
            VarMap::Shift { col, offset: lo }
        } else if hi.is_finite() {
            let col = nstruct;
            nstruct += 1;
            VarMap::Mirror { col, offset: hi }
        } else {
            nstruct += 2;
            VarMap::Split { pos: nstruct - 2, neg: nstruct - 1 }
        };
        maps.push(map);
    }

    let m0 = lp.n_rows();
    let m = m0 + ub_rows.len();
    let mut dense = vec![0.0; m * nstruct];
    let mut rhs = vec![0.0; m];
    let mut rel = vec![Relation::Le; m];
    for (i, row) in lp.rows.iter().enumerate() {
        let mut b = row.rhs;
        for &(j, a) in &row.coeffs {
            match maps[j] {
                VarMap::Shift { col, offset } => {
                    dense[i * nstruct + col] += a;
                    b -= a * offset;
                }
                VarMap::Mirror { col, offset } => {
                    dense[i * nstruct + col] -= a;
                    b -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    dense[i * nstruct + pos] += a;
                    dense[i * nstruct + neg] -= a;
                }
            }
        }
        rhs[i] = b;
        rel[i] = row.relation;
    }
    for (k, &(col, cap)) in ub_rows.iter().enumerate() {
        let i = m0 + k;
        dense[i * nstruct + col] = 1.0;
        rhs[i] = cap;
        rel[i] = Relation::Le;
    }

    let mut cost = vec![0.0; nstruct];
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    for j in 0..n {
        let c = sign * lp.objective[j];
        match maps[j] {
            VarMap::Shift { col, .. } => cost[col] += c,
            VarMap::Mirror { col, .. } => cost[col] -= c,
            VarMap::Split { pos, neg } => {
                cost[pos] += c;
                cost[neg] -= c;
            }
        }
    }

    // slacks, sign normalization, artificials
    let nslack = rel.iter().filter(|r| **r != Relation::Eq).count();
    let mut flip = vec![1.0; m];
    let mut slack_of_row: Vec<Option<(usize, f64)>> = vec![None; m];
    let mut s = nstruct;
    for i in 0..m {
        match rel[i] {
            Relation::Le => {
                slack_of_row[i] = Some((s, 1.0));
                s += 1;
            }
            Relation::Ge => {
                slack_of_row[i] = Some((s, -1.0));
                s += 1;
            }
            Relation::Eq => {}
        }
        if rhs[i] < 0.0 {
            flip[i] = -1.0;
        }
    }
    let needs_art: Vec<bool> = (0..m)
        .map(|i| !matches!(slack_of_row[i], Some((_, coef)) if coef * flip[i] > 0.0))
        .collect();
    let nart = needs_art.iter().filter(|&&x| x).count();
    let ncols = nstruct + nslack + nart;
    let art_start = nstruct + nslack;

    let mut a = vec![0.0; m * ncols];
    let mut b = vec![0.0; m];
    let mut basis = vec![0; m];
    let mut next_art = art_start;
    for i in 0..m {
        for j in 0..nstruct {
            a[i * ncols + j] = flip[i] * dense[i * nstruct + j];
        }
        if let Some((col, coef)) = slack_of_row[i] {
            a[i * ncols + col] = flip[i] * coef;
        }
        b[i] = flip[i] * rhs[i];
        if needs_art[i] {
            a[i * ncols + next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack_of_row[i].expect("slack").0;
        }
    }
    let mut is_basic = vec![false; ncols];
    for &j in &basis {
        is_basic[j] = true;
    }
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut rs = Revised { m, ncols, a, b: b.clone(), basis, is_basic, binv, xb: b, iterations: 0 };

    let b_scale = rs.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if nart > 0 {
        let mut c1 = vec![0.0; ncols];
        for c in c1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        let allowed = vec![true; ncols];
        match rs.run_phase(&c1, &allowed, true) {
            Err(Numerical) => {
                return LpSolution::failed(LpStatus::NumericalFailure, lp, rs.iterations)
            }
            Ok(PhaseEnd::Unbounded) => {
                return LpSolution::failed(LpStatus::NumericalFailure, lp, rs.iterations)
            }
            Ok(PhaseEnd::Optimal) => {}
        }
        if rs.refactor().is_err() {
            return LpSolution::failed(LpStatus::NumericalFailure, lp, rs.iterations);
        }
        let infeas: f64 = (0..m)
            .filter(|&i| rs.basis[i] >= art_start)
            .map(|i| rs.xb[i].abs())
            .sum();
        if infeas > 1e-8 * b_scale {
            return LpSolution::failed(LpStatus::Infeasible, lp, rs.iterations);
        }
        // drive remaining artificials out of the basis where possible
        for i in 0..m {
            if rs.basis[i] < art_start {
                continue;
            }
            let row: Vec<f64> = rs.binv[i * m..(i + 1) * m].to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..art_start {
                if rs.is_basic[j] {
                    continue;
                }
                let v: f64 = (0..m).map(|k| row[k] * rs.a[k * ncols + j]).sum();
                if v.abs() > 1e-9 && best.is_none_or(|(_, bv)| v.abs() > bv.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                let u = rs.ftran(&rs.col(j));
                rs.xb[i] = 0.0;
                rs.pivot(i, j, &u);
            } else {
                rs.xb[i] = 0.0;
            }
        }
    }

    let mut c2 = vec![0.0; ncols];
    c2[..nstruct].copy_from_slice(&cost);
    let allowed: Vec<bool> = (0..ncols).map(|j| j < art_start).collect();
    match rs.run_phase(&c2, &allowed, false) {
        Err(Numerical) => return LpSolution::failed(LpStatus::NumericalFailure, lp, rs.iterations),
        Ok(PhaseEnd::Unbounded) => {
            return LpSolution::failed(LpStatus::Unbounded, lp, rs.iterations)
        }
        Ok(PhaseEnd::Optimal) => {}
    }
    if rs.refactor().is_err() {
        return LpSolution::failed(LpStatus::NumericalFailure, lp, rs.iterations);
    }

    let mut z = vec![0.0; ncols];
    for (i, &j) in rs.basis.iter().enumerate() {
        z[j] = rs.xb[i].max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            VarMap::Shift { col, offset } => offset + z[col],
            VarMap::Mirror { col, offset } => offset - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let cb: Vec<f64> = rs.basis.iter().map(|&j| c2[j]).collect();
    let y = rs.btran(&cb);
    let duals = (0..m0).map(|i| sign * flip[i] * y[i]).collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective: lp.objective_value(&x),
        x,
        duals,
        iterations: rs.iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_tight_minimum() {
        // min x s.t. x >= 3
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.set_objective(0, 1.0);
        lp.set_free(0);
        lp.add_row([(0, 1.0)], Relation::Ge, 3.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_maximum() {
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.objective = vec![1.0, 1.0];
        lp.add_row([(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_polytope() {
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.add_row([(0, 1.0)], Relation::Le, -1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row([(0, 1.0), (1, -1.0)], Relation::Le, 1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn bounds_of_every_kind() {
        // max x0 + x1 - x2 with x0 in [-2, 5], x1 <= 3, x2 in [1, 4], x0 + x1 <= 6
        let mut lp = LinearProgram::new(Sense::Maximize, 3);
        lp.objective = vec![1.0, 1.0, -1.0];
        lp.set_bounds(0, -2.0, 5.0);
        lp.set_bounds(1, f64::NEG_INFINITY, 3.0);
        lp.set_bounds(2, 1.0, 4.0);
        lp.add_row([(0, 1.0), (1, 1.0)], Relation::Le, 6.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 5.0).abs() < 1e-12);
        assert!(lp.max_violation(&s.x) < 1e-12);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        // x + y = 1 written twice, plus 2x + 2y = 2; min x - y
        let mut lp = LinearProgram::new(Sense::Minimize, 2);
        lp.objective = vec![1.0, -1.0];
        lp.add_row([(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add_row([(0, 1.0), (1, 1.0)], Relation::Eq, 1.0);
        lp.add_row([(0, 2.0), (1, 2.0)], Relation::Eq, 2.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 1.0).abs() < 1e-12);
        // rhs sensitivity of the combined equality system is -1
        let total: f64 = s.duals[0] + s.duals[1] + 2.0 * s.duals[2];
        assert!((total + 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance
        let mut lp = LinearProgram::new(Sense::Minimize, 4);
        lp.objective = vec![-0.75, 150.0, -0.02, 6.0];
        lp.add_row([(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Relation::Le, 0.0);
        lp.add_row([(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Relation::Le, 0.0);
        lp.add_row([(2, 1.0)], Relation::Le, 1.0);
        let s = solve_lp(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-12);
    }

    #[test]
    fn malformed_input_is_reported() {
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.objective[0] = f64::NAN;
        assert_eq!(solve_lp(&lp).status, LpStatus::NumericalFailure);
    }
}
