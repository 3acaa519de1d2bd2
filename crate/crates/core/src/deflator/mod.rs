//! Martingale deflators: positive adapted `Y` with `P·Y` a martingale.

mod emm;
mod one_step;
mod signed;

pub use emm::{deflator_to_emm, discounted_price_residual, emm_to_deflator};
pub use one_step::{
    one_period_delta_augment, one_step_arbitrage, rogers_objective, rogers_one_step,
    rogers_one_step_log, OneStepDeflator, OneStepProblem,
};
pub use signed::{find_signed_deflator, SignedDeflator};

use crate::error::{Error, Result};
use crate::market::{norm, Market};
use crate::par::{self, Execution};
use crate::process::{deflated_price_residual, AdaptedScalar};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::tol::SLACK_TOL;
use crate::tree::NodeId;

/// A strictly positive martingale deflator normalized to `Y_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deflator {
    pub y: AdaptedScalar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflatorQuality {
    pub min_value: f64,
    pub martingale_residual: f64,
}

impl Deflator {
    pub fn values(&self) -> &[f64] {
        &self.y.values
    }

    pub fn quality(&self, market: &Market) -> DeflatorQuality {
        deflator_quality(market, &self.y.values, market.horizon())
    }
}

/// Smallest value and largest martingale defect of `P·Y` over nodes up to `horizon`.
pub fn deflator_quality(market: &Market, y: &[f64], horizon: usize) -> DeflatorQuality {
    let min_value = market
        .tree
        .nodes_upto(horizon)
        .into_iter()
        .map(|u| y[u])
        .fold(f64::INFINITY, f64::min);
    DeflatorQuality {
        min_value,
        martingale_residual: deflated_price_residual(market, y, horizon),
    }
}

fn at_node(u: NodeId, e: Error) -> Error {
    match e {
        Error::OneStepArbitrage { direction } => Error::ArbitrageAtNode { node: u, direction },
        other => other,
    }
}

/// Product of one-step factors along each path, with unit weights at every node.
pub fn build_deflator(market: &Market) -> Result<Deflator> {
    build_deflator_with(market, Execution::Sequential)
}

/// [`build_deflator`] with the per-node minimizations spread according to `exec`.
pub fn build_deflator_with(market: &Market, exec: Execution) -> Result<Deflator> {
    let tree = &market.tree;
    let nodes = tree.decision_nodes(tree.horizon());
    let steps = par::map(exec, &nodes, |&u| {
        let problem = OneStepProblem::at_node(market, u);
        let ones = vec![1.0; problem.outcomes.len()];
        rogers_one_step(&problem, &ones).map_err(|e| at_node(u, e))
    });
    let mut y = AdaptedScalar::zeros(tree.len());
    y[tree.root()] = 1.0;
    for (&u, step) in nodes.iter().zip(steps) {
        let step = step?;
        for (&c, z) in tree.children(u).iter().zip(&step.z) {
            y[c] = y[u] * z;
        }
    }
    if let Some(u) = (0..tree.len()).find(|&u| !(y[u] > 0.0) || !y[u].is_finite()) {
        return Err(Error::NonPositiveDeflator { node: u, value: y[u] });
    }
    Ok(Deflator { y })
}

/// A deflator with `Y ≤ η` at every node.
///
/// `η` is first clamped to `η̂ = min(η, exp(-‖P‖))`. Weights are chosen backward,
/// `ζ_c = (η̂_c / η̂_u) / (1 + R_c)` with `R = 0` at the leaves, then
/// `Y_0 = η̂_0 / (1 + R_0)` and `Y_c = Y_u Z_c`. This gives
/// `Y_c ≤ η̂_c R_u / ((1 + R_c)(1 + R_u)) < η_c`.
///
/// `R` can grow doubly exponentially along chains of nodes, so the values are
/// formed in logarithms. If some `Y` is too small for `f64`, or a one-step
/// minimization fails on such extreme weights, the product deflator scaled by
/// `min η / Y` is returned instead; it also lies below `η`.
pub fn build_bounded_deflator(market: &Market, eta: &AdaptedScalar) -> Result<Deflator> {
    let tree = &market.tree;
    if eta.len() != tree.len() {
        return Err(Error::Dimension(format!("bound has {} values", eta.len())));
    }
    if let Some(u) = (0..tree.len()).find(|&u| !(eta[u] > 0.0)) {
        return Err(Error::InvalidArgument(format!("bound {} at node {u} is not positive", eta[u])));
    }
    let log_eta: Vec<f64> =
        (0..tree.len()).map(|u| eta[u].ln().min(-norm(market.price(u)))).collect();
    // ln(1 + R) per node, R = 0 at leaves
    let mut log1p_r = vec![0.0; tree.len()];
    let mut log_z = vec![0.0; tree.len()];
    for t in (0..tree.horizon()).rev() {
        for &u in tree.level(t) {
            let problem = OneStepProblem::at_node(market, u);
            let lz: Vec<f64> = tree
                .children(u)
                .iter()
                .map(|&c| log_eta[c] - log_eta[u] - log1p_r[c])
                .collect();
            let step = match rogers_one_step_log(&problem, &lz) {
                Ok(step) => step,
                // weights this extreme leave the minimizer outside the search radius
                Err(Error::Numerical(_)) => return scaled_below(market, eta),
                Err(e) => return Err(at_node(u, e)),
            };
            log1p_r[u] = softplus(step.log_r);
            for (&c, l) in tree.children(u).iter().zip(step.log_z) {
                log_z[c] = l;
            }
        }
    }
    let root = tree.root();
    let mut log_y = vec![0.0; tree.len()];
    log_y[root] = log_eta[root] - log1p_r[root];
    for u in tree.time_order().skip(1) {
        log_y[u] = log_y[tree.parent(u).expect("non-root")] + log_z[u];
    }
    let y = AdaptedScalar::from(log_y.iter().map(|l| l.exp()).collect::<Vec<_>>());
    if (0..tree.len()).all(|u| y[u] > f64::MIN_POSITIVE) {
        return Ok(Deflator { y });
    }
    scaled_below(market, eta)
}

/// `c Y` for the product deflator `Y`, with `c` just under `min η / Y`.
fn scaled_below(market: &Market, eta: &AdaptedScalar) -> Result<Deflator> {
    let base = build_deflator(market)?.y;
    let c = (0..base.len()).map(|u| eta[u] / base[u]).fold(f64::INFINITY, f64::min) * (1.0 - 1e-12);
    let mut y = AdaptedScalar::from(base.values.iter().map(|v| v * c).collect::<Vec<_>>());
    for u in 0..y.len() {
        y[u] = y[u].min(eta[u]);
    }
    if let Some(u) = (0..y.len()).find(|&u| !(y[u] > 0.0)) {
        return Err(Error::NonPositiveDeflator { node: u, value: y[u] });
    }
    Ok(Deflator { y })
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Martingale equality rows `E[P_c Y_c | u] - P_u Y_u = 0` for nodes before `horizon`,
/// on variables `Y(u)` at column `col(u)`.
pub(crate) fn add_martingale_rows(
    lp: &mut LinearProgram,
    market: &Market,
    horizon: usize,
    col: impl Fn(NodeId) -> usize,
) {
    let tree = &market.tree;
    for u in tree.decision_nodes(horizon) {
        for i in 0..market.n_assets() {
            let mut row = vec![(col(u), -market.price(u)[i])];
            for &c in tree.children(u) {
                row.push((col(c), tree.cond_prob(c) * market.price(c)[i]));
            }
            lp.add_row(row, Relation::Eq, 0.0);
        }
    }
}

/// Deflator by linear programming: maximize `s` subject to `Y ≥ s`, `Y_0 = 1` and the
/// martingale rows. A deflator exists iff the optimal `s` is positive.
pub fn deflator_lp(market: &Market) -> Result<Option<Deflator>> {
    let tree = &market.tree;
    let n = tree.len();
    let s = n;
    let mut lp = LinearProgram::new(Sense::Maximize, n + 1);
    lp.objective[s] = 1.0;
    lp.set_free(s);
    lp.add_row([(tree.root(), 1.0)], Relation::Eq, 1.0);
    add_martingale_rows(&mut lp, market, tree.horizon(), |u| u);
    for u in 0..n {
        lp.add_row([(u, 1.0), (s, -1.0)], Relation::Ge, 0.0);
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        other => return Err(Error::Lp(other)),
    }
    if sol.objective <= SLACK_TOL {
        return Ok(None);
    }
    Ok(Some(Deflator { y: AdaptedScalar::from(sol.x[..n].to_vec()) }))
}
