use crate::error::{Error, Result};
use crate::tol::Tolerances;
use crate::tree::{NodeId, ScenarioTree};

/// Asset prices at every node, in units of the consumption good. Any sign is allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSystem {
    n: usize,
    data: Vec<f64>,
}

impl PriceSystem {
    /// Builds from one price vector per node (indexed by node id).
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::Dimension("price system needs at least one asset".into()));
        }
        let mut data = Vec::with_capacity(rows.len() * n);
        for (u, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::Dimension(format!(
                    "node {u} has {} prices, expected {n}",
                    r.len()
                )));
            }
            if let Some(x) = r.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite price {x} at node {u}")));
            }
            data.extend_from_slice(r);
        }
        Ok(PriceSystem { n, data })
    }

    pub fn n_assets(&self) -> usize {
        self.n
    }

    pub fn n_nodes(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn at(&self, u: NodeId) -> &[f64] {
        &self.data[u * self.n..(u + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A scenario tree together with its price system.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub tree: ScenarioTree,
    pub prices: PriceSystem,
    pub assets: Vec<String>,
    pub tol: Tolerances,
}

impl Market {
    pub fn new(tree: ScenarioTree, prices: PriceSystem) -> Result<Self> {
        if prices.n_nodes() != tree.len() {
            return Err(Error::Dimension(format!(
                "{} price vectors for {} nodes",
                prices.n_nodes(),
                tree.len()
            )));
        }
        let assets = (0..prices.n_assets()).map(|i| format!("asset{i}")).collect();
        Ok(Market { tree, prices, assets, tol: Tolerances::default() })
    }

    pub fn with_assets(mut self, assets: Vec<String>) -> Result<Self> {
        if assets.len() != self.n_assets() {
            return Err(Error::Dimension(format!(
                "{} asset names for {} assets",
                assets.len(),
                self.n_assets()
            )));
        }
        self.assets = assets;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn n_assets(&self) -> usize {
        self.prices.n_assets()
    }

    pub fn price(&self, u: NodeId) -> &[f64] {
        self.prices.at(u)
    }

    pub fn horizon(&self) -> usize {
        self.tree.horizon()
    }

    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if horizon == 0 || horizon > self.horizon() {
            return Err(Error::InvalidArgument(format!(
                "horizon {horizon} outside 1..={}",
                self.horizon()
            )));
        }
        Ok(())
    }

    /// Largest absolute price, used to scale tolerances.
    pub fn price_scale(&self) -> f64 {
        self.prices.rows().flatten().fold(1.0f64, |m, x| m.max(x.abs()))
    }
}
