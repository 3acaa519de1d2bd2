use crate::error::{Error, Result};
use crate::market::Market;
use crate::process::{numeraire_values, AdaptedScalar, Strategy};
use crate::tree::ScenarioTree;

/// Equivalent martingale measure for the numeraire `eta`, as a reweighted tree:
/// `q(c | u) = p(c | u) (N Y)(c) / (N Y)(u)`, renormalized per node. Edges after
/// `horizon` keep their original probabilities.
pub fn deflator_to_emm(
    market: &Market,
    y: &AdaptedScalar,
    eta: &Strategy,
    horizon: usize,
) -> Result<ScenarioTree> {
    market.check_horizon(horizon)?;
    let tree = &market.tree;
    let n = numeraire_values(market, eta, horizon, market.tol.eq)?;
    if let Some(u) = tree.nodes_upto(horizon).into_iter().find(|&u| !(y[u] > 0.0)) {
        return Err(Error::NonPositiveDeflator { node: u, value: y[u] });
    }
    let mut q: Vec<f64> = tree.nodes().iter().map(|x| x.cond_prob).collect();
    for u in tree.decision_nodes(horizon) {
        let kids = tree.children(u);
        let base = n[u] * y[u];
        let w: Vec<f64> = kids.iter().map(|&c| tree.cond_prob(c) * n[c] * y[c] / base).collect();
        let total: f64 = w.iter().sum();
        for (&c, wc) in kids.iter().zip(w) {
            q[c] = wc / total;
        }
    }
    tree.with_cond_probs(&q)
}

/// Deflator `Y_t = (N_0 / N_t) dQ/dP |_{F_t}` of an equivalent martingale measure
/// given as a reweighted tree. Defined on nodes up to `horizon`, zero afterwards.
pub fn emm_to_deflator(
    market: &Market,
    q_tree: &ScenarioTree,
    eta: &Strategy,
    horizon: usize,
) -> Result<AdaptedScalar> {
    market.check_horizon(horizon)?;
    let tree = &market.tree;
    if q_tree.len() != tree.len()
        || (0..tree.len()).any(|u| q_tree.parent(u) != tree.parent(u))
    {
        return Err(Error::Dimension("reweighted tree differs in shape".into()));
    }
    let n = numeraire_values(market, eta, horizon, market.tol.eq)?;
    let nodes = tree.nodes_upto(horizon);
    if let Some(&u) = nodes.iter().find(|&&u| u != tree.root() && !(q_tree.cond_prob(u) > 0.0)) {
        return Err(Error::NotEquivalent { node: u, weight: q_tree.cond_prob(u) });
    }
    let resid = discounted_price_residual(market, q_tree, &n, horizon);
    let tol = market.tol.eq * market.price_scale().max(1.0);
    if resid > tol {
        return Err(Error::InvalidArgument(format!(
            "discounted prices are not martingales under the new measure (residual {resid:e})"
        )));
    }
    let root = tree.root();
    let mut density = vec![0.0; tree.len()];
    let mut y = AdaptedScalar::zeros(tree.len());
    for u in nodes {
        density[u] = match tree.parent(u) {
            None => 1.0,
            Some(p) => density[p] * q_tree.cond_prob(u) / tree.cond_prob(u),
        };
        y[u] = density[u] * n[root] / n[u];
    }
    Ok(y)
}

/// Largest martingale defect of `P / N` under the probabilities of `q_tree`.
pub fn discounted_price_residual(
    market: &Market,
    q_tree: &ScenarioTree,
    n: &AdaptedScalar,
    horizon: usize,
) -> f64 {
    let mut worst = 0.0f64;
    for u in q_tree.decision_nodes(horizon) {
        for i in 0..market.n_assets() {
            let e = q_tree.cond_expect(u, |c| market.price(c)[i] / n[c]);
            worst = worst.max((e - market.price(u)[i] / n[u]).abs());
        }
    }
    worst
}
