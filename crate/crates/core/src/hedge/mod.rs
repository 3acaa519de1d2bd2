//! Super-replication, replication, completeness and numeraires.

mod complete;
mod numeraire;
mod replicate;
mod risk_averse;

pub use complete::{completeness_check, CompletenessReport, NodeRank};
pub use numeraire::{build_riskfree_numeraire, find_numeraire, RiskFreeNumeraire};
pub use replicate::{replicate, Replication};
pub use risk_averse::{risk_averse_hedge, RiskAverseHedge};

use crate::deflator::deflator_lp;
use crate::error::{Error, Result};
use crate::market::{dot, Market};
use crate::par::{self, Execution};
use crate::process::{AdaptedScalar, Strategy};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::tol::NO_TARGET;
use crate::tree::{NodeId, ScenarioTree};

/// Cheapest dominating strategy for a target process, with its dual certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    /// Super-replication cost process `X`.
    pub cost: AdaptedScalar,
    pub strategy: Strategy,
    pub dual_price: f64,
    /// `|X_0 - dual_price|`.
    pub duality_gap: f64,
    /// Deflator values from the dual optimum (`Y_0 = 1`).
    pub binding_deflator: AdaptedScalar,
}

/// Whether `xi[u]` is a real target rather than the "no target" sentinel.
pub fn has_target(xi: &AdaptedScalar, u: NodeId) -> bool {
    xi[u] > NO_TARGET
}

/// Target process for a terminal payoff: `payoff` at the leaves, no target elsewhere.
pub fn terminal_target(tree: &ScenarioTree, payoff: &[f64]) -> AdaptedScalar {
    AdaptedScalar::from_fn(tree, |u| if tree.is_leaf(u) { payoff[u] } else { NO_TARGET })
}

fn check_target(market: &Market, xi: &AdaptedScalar) -> Result<()> {
    let tree = &market.tree;
    if xi.len() != tree.len() {
        return Err(Error::Dimension(format!("target has {} values for {} nodes", xi.len(), tree.len())));
    }
    if let Some(u) = (0..tree.len()).find(|&u| xi[u].is_nan() || xi[u] == f64::INFINITY) {
        return Err(Error::InvalidArgument(format!("target at node {u} is {}", xi[u])));
    }
    if let Some(&u) = tree.level(tree.horizon()).iter().find(|&&u| !has_target(xi, u)) {
        return Err(Error::InvalidArgument(format!("leaf {u} has no target")));
    }
    Ok(())
}

/// Minimum of `h·p` subject to `h·P_c ≥ x_c` for every child.
fn cheapest_dominating(market: &Market, u: NodeId, x: &AdaptedScalar) -> Result<(f64, Vec<f64>)> {
    let n = market.n_assets();
    let tree = &market.tree;
    let mut lp = LinearProgram::new(Sense::Minimize, n);
    lp.objective = market.price(u).to_vec();
    for i in 0..n {
        lp.set_free(i);
    }
    for &c in tree.children(u) {
        lp.add_row((0..n).map(|i| (i, market.price(c)[i])), Relation::Ge, x[c]);
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok((dot(&sol.x, market.price(u)), sol.x)),
        LpStatus::Infeasible => Err(Error::NotSuperReplicable { node: u }),
        LpStatus::Unbounded => Err(Error::ArbitragePresent),
        LpStatus::NumericalFailure => Err(Error::Lp(sol.status)),
    }
}

/// Backward super-replication of the target process `xi` (use [`NO_TARGET`] at
/// nodes without a target; every leaf needs one).
pub fn superreplicate(market: &Market, xi: &AdaptedScalar) -> Result<HedgeReport> {
    superreplicate_with(market, xi, Execution::Sequential)
}

/// [`superreplicate`] with the per-node programs of each date spread according to `exec`.
pub fn superreplicate_with(
    market: &Market,
    xi: &AdaptedScalar,
    exec: Execution,
) -> Result<HedgeReport> {
    check_target(market, xi)?;
    if deflator_lp(market)?.is_none() {
        return Err(Error::ArbitragePresent);
    }
    let tree = &market.tree;
    let horizon = tree.horizon();
    let mut x = AdaptedScalar::zeros(tree.len());
    for &u in tree.level(horizon) {
        x[u] = xi[u];
    }
    let mut holdings: Vec<Vec<f64>> = vec![Vec::new(); tree.len()];
    for t in (0..horizon).rev() {
        let level = tree.level(t);
        let solved = par::map(exec, level, |&u| cheapest_dominating(market, u, &x));
        for (&u, r) in level.iter().zip(solved) {
            let (cost, h) = r?;
            x[u] = if has_target(xi, u) { cost.max(xi[u]) } else { cost };
            holdings[u] = h;
        }
    }
    let strategy =
        Strategy::from_fn(tree, market.n_assets(), horizon, |u| std::mem::take(&mut holdings[u]));
    let (dual_price, binding_deflator) = dual_program(market, xi)?;
    let root = tree.root();
    Ok(HedgeReport {
        duality_gap: (x[root] - dual_price).abs(),
        cost: x,
        strategy,
        dual_price,
        binding_deflator,
    })
}

/// Largest violation of the super-replication inequalities
/// `H_{t+1}·P_t ≤ X_t`, `H_t·P_t ≥ X_t ≥ ξ_t` by a report.
pub fn superreplication_violation(market: &Market, xi: &AdaptedScalar, report: &HedgeReport) -> f64 {
    let tree = &market.tree;
    let mut worst = 0.0f64;
    for u in 0..tree.len() {
        let p = market.price(u);
        if has_target(xi, u) {
            worst = worst.max(xi[u] - report.cost[u]);
        }
        if let Some(h) = report.strategy.at(u) {
            worst = worst.max(dot(h, p) - report.cost[u]);
        }
        if let Some(par) = tree.parent(u) {
            let h = report.strategy.at(par).expect("decision node");
            worst = worst.max(report.cost[u] - dot(h, p));
        }
    }
    worst
}

/// Dual super-replication price `sup E[ξ_τ Y_τ]` over deflators `Y ≥ 0` with `Y_0 = 1`
/// and randomized stopping at nodes carrying a target. For a terminal payoff this
/// is `max E[ξ_T Y_T]` over the deflator polytope.
pub fn superrep_dual_price(market: &Market, xi: &AdaptedScalar) -> Result<f64> {
    check_target(market, xi)?;
    Ok(dual_program(market, xi)?.0)
}

/// Variables per node: `b` (mass arriving), `a` (mass continuing, non-leaves) and
/// `d` (mass stopped, target nodes). Returns the optimum and `Y = b / prob`.
fn dual_program(market: &Market, xi: &AdaptedScalar) -> Result<(f64, AdaptedScalar)> {
    let tree = &market.tree;
    let len = tree.len();
    let root = tree.root();
    let mut next = 0;
    let mut alloc = || {
        next += 1;
        next - 1
    };
    let b: Vec<Option<usize>> = (0..len).map(|u| (u != root).then(&mut alloc)).collect();
    let a: Vec<Option<usize>> = (0..len).map(|u| (!tree.is_leaf(u)).then(&mut alloc)).collect();
    let d: Vec<Option<usize>> = (0..len).map(|u| has_target(xi, u).then(&mut alloc)).collect();
    let mut lp = LinearProgram::new(Sense::Maximize, next);
    for u in 0..len {
        if let Some(j) = d[u] {
            lp.objective[j] = xi[u];
        }
        // arriving mass splits into continuation and stopping
        let mut row: Vec<(usize, f64)> = Vec::new();
        row.extend(a[u].map(|j| (j, 1.0)));
        row.extend(d[u].map(|j| (j, 1.0)));
        match b[u] {
            Some(j) => {
                row.push((j, -1.0));
                lp.add_row(row, Relation::Eq, 0.0);
            }
            None => {
                lp.add_row(row, Relation::Eq, 1.0);
            }
        }
        // continuing mass is a martingale deflator for the prices
        if let Some(au) = a[u] {
            for i in 0..market.n_assets() {
                let mut row = vec![(au, -market.price(u)[i])];
                for &c in tree.children(u) {
                    row.push((b[c].expect("child"), market.price(c)[i]));
                }
                lp.add_row(row, Relation::Eq, 0.0);
            }
        }
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(Error::ArbitragePresent),
        other => return Err(Error::Lp(other)),
    }
    let y = AdaptedScalar::from_fn(tree, |u| match b[u] {
        Some(j) => sol.x[j] / tree.prob(u),
        None => 1.0,
    });
    Ok((sol.objective, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn binomial_call_costs_one_third() {
        let m = fixtures::binomial_stock_cash();
        let xi = terminal_target(&m.tree, &fixtures::binomial_call_payoff());
        let r = superreplicate(&m, &xi).unwrap();
        assert!((r.cost[0] - 1.0 / 3.0).abs() < 1e-12);
        let h = r.strategy.at(0).unwrap();
        assert!((h[0] + 1.0 / 3.0).abs() < 1e-12 && (h[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.duality_gap < 1e-12);
        assert!((r.binding_deflator[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(superreplication_violation(&m, &xi, &r) < 1e-12);
    }

    #[test]
    fn delivering_an_asset_costs_its_price() {
        let m = fixtures::trinomial_stock_cash();
        let payoff: Vec<f64> = (0..m.tree.len()).map(|u| m.price(u)[1]).collect();
        let r = superreplicate(&m, &terminal_target(&m.tree, &payoff)).unwrap();
        assert!((r.cost[0] - 1.0).abs() < 1e-12);
        let h = r.strategy.at(0).unwrap();
        assert!(h[0].abs() < 1e-12 && (h[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_payoff_with_cash_has_dual_price_one() {
        let m = fixtures::trinomial_stock_cash();
        let xi = terminal_target(&m.tree, &vec![1.0; m.tree.len()]);
        assert!((superrep_dual_price(&m, &xi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intermediate_target_raises_the_cost() {
        let m = fixtures::constant_market(2, 1.0);
        let mut xi = terminal_target(&m.tree, &vec![0.0; m.tree.len()]);
        xi[1] = 2.0;
        let r = superreplicate(&m, &xi).unwrap();
        assert!((r.cost[0] - 2.0).abs() < 1e-12);
        assert!((r.dual_price - 2.0).abs() < 1e-12);
        assert!(superreplication_violation(&m, &xi, &r) < 1e-12);
    }

    #[test]
    fn arbitrage_is_reported() {
        let m = fixtures::sure_gain();
        let xi = terminal_target(&m.tree, &[0.0, 1.0]);
        assert!(matches!(superreplicate(&m, &xi), Err(Error::ArbitragePresent)));
    }
}
