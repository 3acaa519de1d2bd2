use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::deflator::add_martingale_rows;
use crate::error::{Error, Result};
use crate::linalg::rank;
use crate::market::Market;
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::tree::NodeId;

/// Seed of the fixed random objective used in the uniqueness test.
const UNIQUENESS_SEED: u64 = 0x5eed_de71a7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeRank {
    pub node: NodeId,
    pub rank: usize,
    pub branching: usize,
}

/// Extremes of one linear objective over the deflator polytope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveRange {
    pub max: f64,
    pub min: f64,
    pub argmax: Vec<f64>,
    pub argmin: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletenessReport {
    /// Every node's child price matrix has rank equal to its number of children.
    pub complete: bool,
    pub nodes: Vec<NodeRank>,
    /// `None` when the deflator polytope `{Y ≥ 0, Y_0 = 1, P·Y martingale}` is empty.
    pub unique_deflator: Option<bool>,
    /// Ranges of the all-ones leaf objective and of a fixed random objective.
    pub objective_ranges: Vec<ObjectiveRange>,
    pub max_branching: usize,
    /// Every node has at most `n` children.
    pub branching_within_assets: bool,
    /// The number of nodes at each time `t` is at most `n^t`.
    pub node_count_bound: bool,
}

pub fn completeness_check(market: &Market) -> Result<CompletenessReport> {
    let tree = &market.tree;
    let n = market.n_assets();
    let nodes: Vec<NodeRank> = tree
        .decision_nodes(tree.horizon())
        .into_iter()
        .map(|u| {
            let rows: Vec<&[f64]> = tree.children(u).iter().map(|&c| market.price(c)).collect();
            NodeRank { node: u, rank: rank(&rows, n), branching: rows.len() }
        })
        .collect();
    let complete = nodes.iter().all(|r| r.rank == r.branching);
    let max_branching = tree.max_branching();
    let node_count_bound = (0..=tree.horizon())
        .all(|t| (tree.level(t).len() as f64) <= (n as f64).powi(t as i32));

    let leaf_weights: Vec<f64> = (0..tree.len())
        .map(|u| if tree.is_leaf(u) { tree.prob(u) } else { 0.0 })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(UNIQUENESS_SEED);
    let random_weights: Vec<f64> =
        (0..tree.len()).map(|u| tree.prob(u) * rng.gen_range(0.5..1.5)).collect();
    let mut objective_ranges = Vec::new();
    let mut empty = false;
    for w in [&leaf_weights, &random_weights] {
        match objective_range(market, w)? {
            Some(r) => objective_ranges.push(r),
            None => empty = true,
        }
    }
    let unique_deflator = (!empty).then(|| {
        objective_ranges.iter().all(|r| (r.max - r.min).abs() <= 1e-9 * (1.0 + r.max.abs()))
    });
    Ok(CompletenessReport {
        complete,
        nodes,
        unique_deflator,
        objective_ranges,
        max_branching,
        branching_within_assets: max_branching <= n,
        node_count_bound,
    })
}

fn objective_range(market: &Market, weights: &[f64]) -> Result<Option<ObjectiveRange>> {
    let mut out = Vec::new();
    for sense in [Sense::Maximize, Sense::Minimize] {
        let tree = &market.tree;
        let mut lp = LinearProgram::new(sense, tree.len());
        lp.objective = weights.to_vec();
        lp.add_row([(tree.root(), 1.0)], Relation::Eq, 1.0);
        add_martingale_rows(&mut lp, market, tree.horizon(), |u| u);
        let sol = solve_lp(&lp);
        match sol.status {
            LpStatus::Optimal => out.push((sol.objective, sol.x)),
            LpStatus::Infeasible => return Ok(None),
            other => return Err(Error::Lp(other)),
        }
    }
    let (min, argmin) = out.pop().expect("min");
    let (max, argmax) = out.pop().expect("max");
    Ok(Some(ObjectiveRange { max, min, argmax, argmin }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn binomial_is_complete() {
        let r = completeness_check(&fixtures::binomial_stock_cash()).unwrap();
        assert!(r.complete && r.unique_deflator == Some(true));
        assert!(r.branching_within_assets && r.node_count_bound);
        let y = &r.objective_ranges[1].argmax;
        assert!((y[1] - 2.0 / 3.0).abs() < 1e-12 && (y[2] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trinomial_is_incomplete() {
        let r = completeness_check(&fixtures::trinomial_stock_cash()).unwrap();
        assert!(!r.complete && r.unique_deflator == Some(false));
        assert_eq!(r.nodes[0], NodeRank { node: 0, rank: 2, branching: 3 });
        let range = &r.objective_ranges[1];
        let gap = range.argmax.iter().zip(&range.argmin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-6);
    }

    #[test]
    fn arbitrage_leaves_no_polytope() {
        let r = completeness_check(&fixtures::sure_gain()).unwrap();
        assert_eq!(r.unique_deflator, None);
    }
}
