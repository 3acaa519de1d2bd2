//! JSON model documents: a scenario tree, its prices, and named payoffs, targets
//! and utility specifications.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hedge::terminal_target;
use crate::market::{Market, PriceSystem};
use crate::process::AdaptedScalar;
use crate::tol::NO_TARGET;
use crate::tree::{validate_nodes, Node, NodeId, ScenarioTree};
use crate::utility::UtilitySpec;

pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub time: usize,
    /// Conditional probability given the parent; 1 at the root.
    pub p: f64,
    pub prices: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub version: u32,
    pub assets: Vec<String>,
    pub nodes: Vec<NodeRecord>,
    /// Terminal payoffs by node id; nodes before the horizon are ignored.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub payoffs: BTreeMap<String, BTreeMap<NodeId, f64>>,
    /// Target processes by node id; absent nodes carry no target.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub targets: BTreeMap<String, BTreeMap<NodeId, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub utility: BTreeMap<String, UtilitySpec>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Model(msg.into())
}

impl ModelDocument {
    pub fn from_market(market: &Market) -> Result<Self> {
        let tree = &market.tree;
        if tree.root() != 0 {
            return Err(schema("root must have id 0"));
        }
        let nodes = (0..tree.len())
            .map(|u| NodeRecord {
                id: u,
                parent: tree.parent(u),
                time: tree.time(u),
                p: if u == tree.root() { 1.0 } else { tree.cond_prob(u) },
                prices: market.price(u).to_vec(),
            })
            .collect();
        Ok(ModelDocument {
            version: VERSION,
            assets: market.assets.clone(),
            nodes,
            payoffs: BTreeMap::new(),
            targets: BTreeMap::new(),
            utility: BTreeMap::new(),
        })
    }

    /// Parses and validates; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// Checks everything [`ModelDocument::market`] relies on.
    pub fn validate(&self) -> Result<()> {
        if self.version != VERSION {
            return Err(schema(format!("version: expected {VERSION}, found {}", self.version)));
        }
        if self.nodes.is_empty() {
            return Err(schema("nodes: empty"));
        }
        let n = self.assets.len();
        if n == 0 {
            return Err(schema("assets: empty"));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if node.id != k {
                return Err(schema(format!("nodes[{k}].id: expected {k}, found {}", node.id)));
            }
            if node.prices.len() != n {
                return Err(schema(format!(
                    "nodes[{k}].prices: {} values for {n} assets",
                    node.prices.len()
                )));
            }
            if let Some(x) = node.prices.iter().find(|x| !x.is_finite()) {
                return Err(schema(format!("nodes[{k}].prices: non-finite value {x}")));
            }
        }
        if self.nodes[0].parent.is_some() {
            return Err(schema("nodes[0].parent: the root must have id 0"));
        }
        let violations = validate_nodes(&self.tree_nodes());
        if let Some(v) = violations.first() {
            let field = v.node.map(|u| format!("nodes[{u}]")).unwrap_or_else(|| "nodes".into());
            return Err(schema(format!("{field}: {v}")));
        }
        let len = self.nodes.len();
        for (kind, fields) in [("payoffs", &self.payoffs), ("targets", &self.targets)] {
            for (name, values) in fields {
                if let Some((id, _)) = values.iter().find(|(id, _)| **id >= len) {
                    return Err(schema(format!("{kind}.{name}: unknown node {id}")));
                }
                if let Some((id, x)) = values.iter().find(|(_, x)| !x.is_finite()) {
                    return Err(schema(format!("{kind}.{name}.{id}: non-finite value {x}")));
                }
            }
        }
        let horizon = self.nodes.iter().map(|x| x.time).max().unwrap_or(0);
        for (name, values) in &self.payoffs {
            let missing = (0..len).find(|&u| self.nodes[u].time == horizon && !values.contains_key(&u));
            if let Some(u) = missing {
                return Err(schema(format!("payoffs.{name}: no value at terminal node {u}")));
            }
        }
        for (name, spec) in &self.utility {
            spec.validate().map_err(|e| schema(format!("utility.{name}: {e}")))?;
            if spec.horizon > horizon {
                return Err(schema(format!("utility.{name}: horizon {} beyond {horizon}", spec.horizon)));
            }
        }
        Ok(())
    }

    fn tree_nodes(&self) -> Vec<Node> {
        self.nodes
            .iter()
            .map(|x| Node { time: x.time, parent: x.parent, cond_prob: if x.parent.is_none() { 1.0 } else { x.p } })
            .collect()
    }

    pub fn market(&self) -> Result<Market> {
        self.validate()?;
        let tree = ScenarioTree::new(self.tree_nodes())?;
        let prices = PriceSystem::new(self.nodes.iter().map(|x| x.prices.clone()).collect())?;
        Market::new(tree, prices)?.with_assets(self.assets.clone())
    }

    /// Terminal payoff by node id, zero before the horizon.
    pub fn payoff(&self, name: &str) -> Result<Vec<f64>> {
        let values = self.payoffs.get(name).ok_or_else(|| schema(format!("no payoff named {name:?}")))?;
        let mut out = vec![0.0; self.nodes.len()];
        for (&u, &x) in values {
            out[u] = x;
        }
        let horizon = self.nodes.iter().map(|x| x.time).max().unwrap_or(0);
        for (u, node) in self.nodes.iter().enumerate() {
            if node.time != horizon {
                out[u] = 0.0;
            }
        }
        Ok(out)
    }

    /// A named target process, or a payoff viewed as a target at the horizon only.
    pub fn target(&self, name: &str, tree: &ScenarioTree) -> Result<AdaptedScalar> {
        if let Some(values) = self.targets.get(name) {
            let mut xi = AdaptedScalar::constant(self.nodes.len(), NO_TARGET);
            for (&u, &x) in values {
                xi[u] = x;
            }
            return Ok(xi);
        }
        if self.payoffs.contains_key(name) {
            return Ok(terminal_target(tree, &self.payoff(name)?));
        }
        Err(schema(format!("no target or payoff named {name:?}")))
    }

    pub fn utility_spec(&self, name: &str) -> Result<&UtilitySpec> {
        self.utility.get(name).ok_or_else(|| schema(format!("no utility spec named {name:?}")))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelDocument> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    ModelDocument::from_json(&text).map_err(|e| match e {
        Error::Model(msg) => schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_model(doc: &ModelDocument, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, doc.to_json() + "\n").map_err(|e| schema(format!("{}: {e}", path.display())))
}
