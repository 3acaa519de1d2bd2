//! Expected-utility maximization over investment-consumption strategies and the
//! marginal-utility deflator of an optimal plan.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arbitrage::{find_ic_arbitrage, HoldingVars};
use crate::error::{Error, Result};
use crate::linalg::pinv_solve;
use crate::market::Market;
use crate::process::{consumption_of, deflated_price_residual, AdaptedScalar, Strategy};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::tree::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UtilityForm {
    /// `κ_t log c`
    Log,
    /// `-κ_t exp(-c)`
    #[serde(alias = "exponential")]
    Exp,
}

/// Time-additive utility `Σ_t κ_t u(c_t)` over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub horizon: usize,
    /// One positive weight per date `0..=horizon`.
    pub weights: Vec<f64>,
    pub form: UtilityForm,
}

impl UtilitySpec {
    pub fn new(horizon: usize, weights: Vec<f64>, form: UtilityForm) -> Result<Self> {
        let spec = UtilitySpec { horizon, weights, form };
        spec.validate()?;
        Ok(spec)
    }

    pub fn log(horizon: usize) -> Self {
        UtilitySpec { horizon, weights: vec![1.0; horizon + 1], form: UtilityForm::Log }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("utility horizon must be at least 1".into()));
        }
        if self.weights.len() != self.horizon + 1 {
            return Err(Error::Dimension(format!(
                "{} weights for horizon {}",
                self.weights.len(),
                self.horizon
            )));
        }
        if let Some(k) = self.weights.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
            return Err(Error::InvalidArgument(format!("weight {k} is not positive")));
        }
        Ok(())
    }

    pub fn u(&self, c: f64) -> f64 {
        match self.form {
            UtilityForm::Log if c > 0.0 => c.ln(),
            UtilityForm::Log => f64::NEG_INFINITY,
            UtilityForm::Exp => -(-c).exp(),
        }
    }

    pub fn du(&self, c: f64) -> f64 {
        match self.form {
            UtilityForm::Log => 1.0 / c,
            UtilityForm::Exp => (-c).exp(),
        }
    }

    fn d2u(&self, c: f64) -> f64 {
        match self.form {
            UtilityForm::Log => -1.0 / (c * c),
            UtilityForm::Exp => -(-c).exp(),
        }
    }

    /// `u(c + x) - u(c)` without cancellation.
    fn increment(&self, c: f64, x: f64) -> f64 {
        match self.form {
            UtilityForm::Log if c + x > 0.0 => (x / c).ln_1p(),
            UtilityForm::Log => f64::NEG_INFINITY,
            UtilityForm::Exp => -(-c).exp() * (-x).exp_m1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPlan {
    pub strategy: Strategy,
    pub consumption: AdaptedScalar,
    pub value: f64,
    /// `κ_t u'(C_t)` normalized by its root value.
    pub deflator: AdaptedScalar,
    pub x0: f64,
    pub iterations: usize,
    /// Martingale defect of `P·Y` for `Y = deflator`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimalityCheck {
    Positivity,
    Martingale,
    Budget,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Certified,
    /// `direction`, when present, increases expected utility to first order.
    Refuted { check: OptimalityCheck, direction: Option<Strategy> },
}

/// `Σ_u prob(u) κ_t u(C(u))`; `-∞` when log utility meets non-positive consumption.
pub fn expected_utility(market: &Market, h: &Strategy, x0: f64, spec: &UtilitySpec) -> Result<f64> {
    spec.validate()?;
    let d = consumption_of(market, h, x0)?;
    Ok(value_of(market, &d.consumption, spec))
}

fn value_of(market: &Market, c: &AdaptedScalar, spec: &UtilitySpec) -> f64 {
    let tree = &market.tree;
    tree.nodes_upto(spec.horizon)
        .into_iter()
        .map(|u| tree.prob(u) * spec.weights[tree.time(u)] * spec.u(c[u]))
        .sum()
}

/// `κ_t u'(C(u)) / (κ_0 u'(C(root)))` on nodes up to the horizon, zero afterwards.
pub fn marginal_deflator(market: &Market, consumption: &AdaptedScalar, spec: &UtilitySpec) -> AdaptedScalar {
    let tree = &market.tree;
    let root = tree.root();
    let base = spec.weights[0] * spec.du(consumption[root]);
    let mut y = AdaptedScalar::zeros(tree.len());
    for u in tree.nodes_upto(spec.horizon) {
        y[u] = spec.weights[tree.time(u)] * spec.du(consumption[u]) / base;
    }
    y
}

/// Consumption as an affine map of the holdings: `C(u) = c0(u) + A(u)·H`.
struct Affine {
    nodes: Vec<NodeId>,
    a: DMatrix<f64>,
    c0: DVector<f64>,
    w: DVector<f64>,
    vars: HoldingVars,
}

impl Affine {
    fn new(market: &Market, x0: f64, spec: &UtilitySpec) -> Self {
        let tree = &market.tree;
        let vars = HoldingVars::new(market, spec.horizon, 0);
        let nodes = tree.nodes_upto(spec.horizon);
        let mut a = DMatrix::zeros(nodes.len(), vars.count);
        for (r, &u) in nodes.iter().enumerate() {
            for (j, v) in vars.consumption_row(market, u) {
                a[(r, j)] += v;
            }
        }
        let c0 = DVector::from_iterator(
            nodes.len(),
            nodes.iter().map(|&u| if u == tree.root() { x0 } else { 0.0 }),
        );
        let w = DVector::from_iterator(
            nodes.len(),
            nodes.iter().map(|&u| tree.prob(u) * spec.weights[tree.time(u)]),
        );
        Affine { nodes, a, c0, w, vars }
    }

    fn consumption(&self, h: &DVector<f64>) -> DVector<f64> {
        &self.c0 + &self.a * h
    }

    fn value(&self, c: &DVector<f64>, spec: &UtilitySpec) -> f64 {
        c.iter().zip(self.w.iter()).map(|(&ci, wi)| wi * spec.u(ci)).sum()
    }

    fn gradient(&self, c: &DVector<f64>, spec: &UtilitySpec) -> DVector<f64> {
        let m = DVector::from_iterator(c.len(), c.iter().zip(self.w.iter()).map(|(&ci, wi)| wi * spec.du(ci)));
        self.a.tr_mul(&m)
    }
}

/// Maximizes expected utility from initial capital `x0` by damped Newton in the
/// holdings; consumption is an affine function of them.
pub fn solve_utility(market: &Market, x0: f64, spec: &UtilitySpec) -> Result<OptimalPlan> {
    spec.validate()?;
    market.check_horizon(spec.horizon)?;
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial capital {x0}")));
    }
    if find_ic_arbitrage(market, spec.horizon)?.is_some() {
        return Err(Error::ArbitragePresent);
    }
    let aff = Affine::new(market, x0, spec);
    let mut h = match spec.form {
        UtilityForm::Log => positive_start(market, &aff, x0)?,
        UtilityForm::Exp => DVector::zeros(aff.vars.count),
    };
    let mut c = aff.consumption(&h);
    let mut iterations = 0;
    for it in 0..300 {
        iterations = it;
        let g = aff.gradient(&c, spec);
        let curv = DVector::from_iterator(
            c.len(),
            c.iter().zip(aff.w.iter()).map(|(&ci, wi)| -wi * spec.d2u(ci)),
        );
        // -Hessian = Aᵀ diag(curv) A
        let scaled = DMatrix::from_fn(aff.a.nrows(), aff.a.ncols(), |r, j| aff.a[(r, j)] * curv[r]);
        let neg_hess = aff.a.tr_mul(&scaled);
        let d = pinv_solve(&neg_hess, &g);
        let decrement = g.dot(&d);
        if !(decrement > 1e-28 * (1.0 + aff.value(&c, spec).abs())) {
            break;
        }
        let dc = &aff.a * &d;
        let gain = |t: f64| -> f64 {
            c.iter()
                .zip(dc.iter())
                .zip(aff.w.iter())
                .map(|((&ci, &x), wi)| wi * spec.increment(ci, t * x))
                .sum()
        };
        let mut t = 1.0;
        while t > 1e-14 && !(gain(t) >= 1e-4 * t * decrement) {
            t *= 0.5;
        }
        if t <= 1e-14 {
            break;
        }
        h += &d * t;
        c = aff.consumption(&h);
    }
    let x: Vec<f64> = h.iter().cloned().collect();
    let strategy = aff.vars.strategy(market, spec.horizon, &x);
    let consumption = consumption_of(market, &strategy, x0)?.consumption;
    let deflator = marginal_deflator(market, &consumption, spec);
    let residual = deflated_price_residual(market, &deflator.values, spec.horizon);
    Ok(OptimalPlan {
        value: value_of(market, &consumption, spec),
        strategy,
        consumption,
        deflator,
        x0,
        iterations,
        residual,
    })
}

/// Holdings maximizing the smallest consumption; fails unless that minimum is positive.
fn positive_start(market: &Market, aff: &Affine, x0: f64) -> Result<DVector<f64>> {
    let k = aff.vars.count;
    let s = k;
    let mut lp = LinearProgram::new(Sense::Maximize, k + 1);
    aff.vars.free_all(&mut lp);
    lp.set_free(s);
    lp.objective[s] = 1.0;
    for r in 0..aff.nodes.len() {
        let mut row: Vec<(usize, f64)> =
            (0..k).filter(|&j| aff.a[(r, j)] != 0.0).map(|j| (j, aff.a[(r, j)])).collect();
        row.push((s, -1.0));
        lp.add_row(row, Relation::Ge, -aff.c0[r]);
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Err(Error::ArbitragePresent),
        LpStatus::Infeasible => return Err(Error::NoPositivePlan),
        other => return Err(Error::Lp(other)),
    }
    if !(sol.x[s] > 1e-12 * market.price_scale().max(x0.abs())) {
        return Err(Error::NoPositivePlan);
    }
    Ok(DVector::from_column_slice(&sol.x[..k]))
}

/// Checks the marginal-utility deflator of a plan: positive, a martingale deflator
/// within `1e-8`, and pricing the consumption stream at `x0` within `1e-8`.
pub fn verify_optimality(market: &Market, plan: &OptimalPlan, spec: &UtilitySpec) -> Verdict {
    let tree = &market.tree;
    let nodes = tree.nodes_upto(spec.horizon);
    let c = &plan.consumption;
    let y = marginal_deflator(market, c, spec);
    if nodes.iter().any(|&u| !(y[u] > 0.0) || !y[u].is_finite()) {
        return Verdict::Refuted { check: OptimalityCheck::Positivity, direction: None };
    }
    let tol = 1e-8;
    if deflated_price_residual(market, &y.values, spec.horizon) > tol {
        return Verdict::Refuted {
            check: OptimalityCheck::Martingale,
            direction: Some(utility_gradient(market, plan, spec)),
        };
    }
    let priced: f64 = nodes.iter().map(|&u| tree.prob(u) * c[u] * y[u]).sum();
    if (priced - plan.x0).abs() > tol * (1.0 + plan.x0.abs()) {
        return Verdict::Refuted { check: OptimalityCheck::Budget, direction: None };
    }
    Verdict::Certified
}

/// Gradient of expected utility with respect to the holdings, as a strategy.
pub fn utility_gradient(market: &Market, plan: &OptimalPlan, spec: &UtilitySpec) -> Strategy {
    let aff = Affine::new(market, plan.x0, spec);
    let c = DVector::from_iterator(aff.nodes.len(), aff.nodes.iter().map(|&u| plan.consumption[u]));
    let g = aff.gradient(&c, spec);
    let x: Vec<f64> = g.iter().cloned().collect();
    aff.vars.strategy(market, spec.horizon, &x)
}
