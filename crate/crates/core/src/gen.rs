//! Seeded random markets for fuzzing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Market, PriceSystem};
use crate::tree::{Node, ScenarioTree};

pub const MAX_DEPTH: usize = 6;
pub const MAX_BRANCHING: usize = 4;
pub const MAX_ASSETS: usize = 4;

/// Chance that a node's prices are disturbed in adversarial mode.
const PERTURB_RATE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMode {
    /// Prices are conditional expectations under a planted positive deflator.
    PlantedDeflator,
    /// Planted prices with random per-node disturbances; may contain arbitrage.
    Adversarial,
}

impl GenMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "planted" | "planted-deflator" => Some(GenMode::PlantedDeflator),
            "adversarial" => Some(GenMode::Adversarial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenParams {
    pub seed: u64,
    pub depth: usize,
    /// Upper bound on children per node; each node draws from `1..=branching`.
    pub branching: usize,
    pub n_assets: usize,
    pub mode: GenMode,
}

impl GenParams {
    pub fn new(seed: u64, depth: usize, branching: usize, n_assets: usize, mode: GenMode) -> Self {
        GenParams { seed, depth, branching, n_assets, mode }
    }

    fn check(&self) -> Result<()> {
        let within = |v: usize, cap: usize, what: &str| {
            if v == 0 || v > cap {
                Err(Error::InvalidArgument(format!("{what} {v} outside 1..={cap}")))
            } else {
                Ok(())
            }
        };
        within(self.depth, MAX_DEPTH, "depth")?;
        within(self.branching, MAX_BRANCHING, "branching")?;
        within(self.n_assets, MAX_ASSETS, "asset count")
    }
}

/// Same parameters and seed always give the same market.
pub fn generate_model(params: &GenParams) -> Result<Market> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tree = random_tree(&mut rng, params.depth, params.branching)?;
    let n = params.n_assets;

    // planted deflator: Y_0 = 1, log-increments uniform on [-1/2, 1/2]
    let mut y = vec![1.0; tree.len()];
    for u in tree.time_order().skip(1) {
        y[u] = y[tree.parent(u).unwrap()] * rng.gen_range(-0.5..0.5f64).exp();
    }
    let mut prices = vec![Vec::new(); tree.len()];
    let order: Vec<usize> = tree.time_order().collect();
    for &u in order.iter().rev() {
        prices[u] = if tree.is_leaf(u) {
            draw_prices(&mut rng, n)
        } else {
            (0..n)
                .map(|i| {
                    tree.children(u).iter().map(|&c| tree.cond_prob(c) * y[c] * prices[c][i]).sum::<f64>()
                        / y[u]
                })
                .collect()
        };
    }

    if params.mode == GenMode::Adversarial {
        for &u in &order {
            if !rng.gen_bool(PERTURB_RATE) {
                continue;
            }
            match rng.gen_range(0..4) {
                0 => prices[u] = draw_prices(&mut rng, n),
                1 => {
                    let i = rng.gen_range(0..n);
                    prices[u][i] = 0.0;
                }
                2 => {
                    let k = rng.gen_range(0.5..2.0);
                    prices[u].iter_mut().for_each(|x| *x *= k);
                }
                _ => {
                    if let Some(p) = tree.parent(u) {
                        let kids = tree.children(p);
                        let sibling = kids[rng.gen_range(0..kids.len())];
                        prices[u] = prices[sibling].clone();
                    }
                }
            }
        }
    }
    Market::new(tree, PriceSystem::new(prices)?)
}

fn draw_prices(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i == 0 { rng.gen_range(0.5..1.5) } else { rng.gen_range(-1.0..2.0) })
        .collect()
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize, branching: usize) -> Result<ScenarioTree> {
    let mut nodes = vec![Node::root()];
    let mut frontier = vec![0];
    for t in 1..=depth {
        let mut next = Vec::new();
        for &u in &frontier {
            let k = rng.gen_range(1..=branching);
            let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
            let total: f64 = w.iter().sum();
            let mut used = 0.0;
            for (j, wj) in w.iter().enumerate() {
                let p = if j + 1 == k { 1.0 - used } else { wj / total };
                used += p;
                next.push(nodes.len());
                nodes.push(Node::child(u, t, p));
            }
        }
        frontier = next;
    }
    ScenarioTree::new(nodes)
}
