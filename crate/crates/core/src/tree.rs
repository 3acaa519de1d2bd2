//! Finite filtered probability spaces as rooted event trees.
//!
//! Atoms of the time-`t` sigma-field are the tree nodes at depth `t`; every node
//! stores the conditional probability of being reached from its parent.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::PROB_SUM_TOL;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub time: usize,
    pub parent: Option<NodeId>,
    /// Probability of reaching this node from its parent; ignored for the root.
    pub cond_prob: f64,
}

impl Node {
    pub fn root() -> Self {
        Node { time: 0, parent: None, cond_prob: 1.0 }
    }

    pub fn child(parent: NodeId, time: usize, cond_prob: f64) -> Self {
        Node { time, parent: Some(parent), cond_prob }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    EmptyTree,
    NoRoot,
    MultipleRoots,
    RootTime,
    DanglingParent,
    Unreachable,
    TimeInconsistency,
    NonPositiveProbability,
    ProbabilitySum { sum: f64 },
    LeafDepth { horizon: usize },
    ZeroHorizon,
}

/// One broken structural rule, located at a node when that makes sense.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub node: Option<NodeId>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |f: &mut fmt::Formatter<'_>| match self.node {
            Some(n) => write!(f, " at node {n}"),
            None => Ok(()),
        };
        match &self.rule {
            Rule::EmptyTree => write!(f, "tree has no nodes")?,
            Rule::NoRoot => write!(f, "no root node")?,
            Rule::MultipleRoots => write!(f, "more than one root")?,
            Rule::RootTime => write!(f, "root time is not 0")?,
            Rule::DanglingParent => write!(f, "parent id out of range")?,
            Rule::Unreachable => write!(f, "node not reachable from the root")?,
            Rule::TimeInconsistency => write!(f, "time inconsistency")?,
            Rule::NonPositiveProbability => write!(f, "cond_prob not strictly positive")?,
            Rule::ProbabilitySum { sum } => write!(f, "cond_prob sum ≠ 1 ({sum})")?,
            Rule::LeafDepth { horizon } => write!(f, "leaf not at horizon {horizon}")?,
            Rule::ZeroHorizon => write!(f, "horizon must be at least 1")?,
        }
        at(f)
    }
}

/// Checks every scenario-tree invariant on a raw node list.
///
/// Violations are returned as data; an empty list means the nodes form a valid tree.
pub fn validate_nodes(nodes: &[Node]) -> Vec<Violation> {
    let mut out = Vec::new();
    let v = |node: Option<NodeId>, rule: Rule| Violation { node, rule };
    if nodes.is_empty() {
        out.push(v(None, Rule::EmptyTree));
        return out;
    }
    let n = nodes.len();
    let roots: Vec<NodeId> = (0..n).filter(|&i| nodes[i].parent.is_none()).collect();
    match roots.len() {
        0 => out.push(v(None, Rule::NoRoot)),
        1 => {}
        _ => {
            for &r in &roots[1..] {
                out.push(v(Some(r), Rule::MultipleRoots));
            }
        }
    }
    for &r in &roots {
        if nodes[r].time != 0 {
            out.push(v(Some(r), Rule::RootTime));
        }
    }
    let mut children: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (i, node) in nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            if p >= n {
                out.push(v(Some(i), Rule::DanglingParent));
                continue;
            }
            children[p].push(i);
            if node.time != nodes[p].time + 1 {
                out.push(v(Some(i), Rule::TimeInconsistency));
            }
            if !(node.cond_prob > 0.0 && node.cond_prob <= 1.0) {
                out.push(v(Some(i), Rule::NonPositiveProbability));
            }
        }
    }
    // reachability from the first root
    let mut seen = vec![false; n];
    if let Some(&r) = roots.first() {
        let mut stack = vec![r];
        while let Some(u) = stack.pop() {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            stack.extend(children[u].iter().copied());
        }
    }
    for (i, &s) in seen.iter().enumerate() {
        if !s && nodes[i].parent.is_some_and(|p| p < n) {
            out.push(v(Some(i), Rule::Unreachable));
        }
    }
    let horizon = nodes.iter().map(|x| x.time).max().unwrap_or(0);
    if horizon == 0 {
        out.push(v(None, Rule::ZeroHorizon));
    }
    for (i, ch) in children.iter().enumerate() {
        if ch.is_empty() {
            if nodes[i].time != horizon {
                out.push(v(Some(i), Rule::LeafDepth { horizon }));
            }
        } else {
            let sum: f64 = ch.iter().map(|&c| nodes[c].cond_prob).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                out.push(v(Some(i), Rule::ProbabilitySum { sum }));
            }
        }
    }
    out
}

/// A validated, immutable scenario tree of uniform depth.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    nodes: Vec<Node>,
    root: NodeId,
    children: Vec<Vec<NodeId>>,
    levels: Vec<Vec<NodeId>>,
    prob: Vec<f64>,
}

impl ScenarioTree {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        let violations = validate_nodes(&nodes);
        if !violations.is_empty() {
            return Err(Error::InvalidTree(violations));
        }
        let n = nodes.len();
        let root = (0..n).find(|&i| nodes[i].parent.is_none()).expect("validated");
        let horizon = nodes.iter().map(|x| x.time).max().unwrap_or(0);
        let mut children = vec![Vec::new(); n];
        let mut levels = vec![Vec::new(); horizon + 1];
        for (i, node) in nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                children[p].push(i);
            }
            levels[node.time].push(i);
        }
        let mut prob = vec![0.0; n];
        for level in &levels {
            for &u in level {
                prob[u] = match nodes[u].parent {
                    None => 1.0,
                    Some(p) => prob[p] * nodes[u].cond_prob,
                };
            }
        }
        Ok(ScenarioTree { nodes, root, children, levels, prob })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn time(&self, u: NodeId) -> usize {
        self.nodes[u].time
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.nodes[u].parent
    }

    pub fn cond_prob(&self, u: NodeId) -> f64 {
        self.nodes[u].cond_prob
    }

    /// Unconditional probability of the atom `u`.
    pub fn prob(&self, u: NodeId) -> f64 {
        self.prob[u]
    }

    pub fn children(&self, u: NodeId) -> &[NodeId] {
        &self.children[u]
    }

    pub fn is_leaf(&self, u: NodeId) -> bool {
        self.children[u].is_empty()
    }

    /// Nodes at time `t`, in id order.
    pub fn level(&self, t: usize) -> &[NodeId] {
        self.levels.get(t).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// All nodes in time order (root first).
    pub fn time_order(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.levels.iter().flatten().copied()
    }

    /// Nodes with time strictly below `horizon`, in time order. These carry holdings
    /// for strategies over `[0, horizon]`.
    pub fn decision_nodes(&self, horizon: usize) -> Vec<NodeId> {
        self.levels[..horizon.min(self.levels.len())].iter().flatten().copied().collect()
    }

    /// Nodes with time at most `horizon`, in time order.
    pub fn nodes_upto(&self, horizon: usize) -> Vec<NodeId> {
        self.levels[..=horizon.min(self.horizon())].iter().flatten().copied().collect()
    }

    /// Path from the root to `u`, inclusive.
    pub fn path(&self, u: NodeId) -> Vec<NodeId> {
        let mut p = vec![u];
        let mut cur = u;
        while let Some(q) = self.nodes[cur].parent {
            p.push(q);
            cur = q;
        }
        p.reverse();
        p
    }

    /// Same tree shape with new conditional probabilities (indexed by node id).
    pub fn with_cond_probs(&self, cond_probs: &[f64]) -> Result<Self> {
        if cond_probs.len() != self.len() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} nodes",
                cond_probs.len(),
                self.len()
            )));
        }
        let nodes = self
            .nodes
            .iter()
            .zip(cond_probs)
            .map(|(n, &q)| Node { cond_prob: if n.parent.is_none() { 1.0 } else { q }, ..n.clone() })
            .collect();
        ScenarioTree::new(nodes)
    }

    /// Conditional expectation at `u` of a node-indexed quantity over `u`'s children.
    pub fn cond_expect(&self, u: NodeId, f: impl Fn(NodeId) -> f64) -> f64 {
        self.children[u].iter().map(|&c| self.nodes[c].cond_prob * f(c)).sum()
    }

    /// Number of distinct children of the busiest node.
    pub fn max_branching(&self) -> usize {
        self.children.iter().map(|c| c.len()).max().unwrap_or(0)
    }
}

/// Validation report for a tree (empty iff all invariants hold).
pub fn validate_tree(tree: &ScenarioTree) -> Vec<Violation> {
    validate_nodes(tree.nodes())
}

/// Builds a tree where every internal node has `probs.len()` children with the same
/// conditional probabilities. Node ids are assigned level by level.
pub fn uniform_tree(horizon: usize, probs: &[f64]) -> Result<ScenarioTree> {
    let mut nodes = vec![Node::root()];
    let mut frontier = vec![0usize];
    for t in 1..=horizon {
        let mut next = Vec::new();
        for &p in &frontier {
            for &q in probs {
                nodes.push(Node::child(p, t, q));
                next.push(nodes.len() - 1);
            }
        }
        frontier = next;
    }
    ScenarioTree::new(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial() -> Vec<Node> {
        vec![Node::root(), Node::child(0, 1, 0.5), Node::child(0, 1, 0.5)]
    }

    #[test]
    fn binomial_is_valid() {
        assert!(validate_nodes(&binomial()).is_empty());
        let t = ScenarioTree::new(binomial()).unwrap();
        assert_eq!(t.horizon(), 1);
        assert_eq!(t.children(0), &[1, 2]);
        assert!((t.prob(2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn probability_sum_violation_names_parent() {
        let mut nodes = binomial();
        nodes[1].cond_prob = 0.6;
        nodes[2].cond_prob = 0.6;
        let v = validate_nodes(&nodes);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].node, Some(0));
        assert!(matches!(v[0].rule, Rule::ProbabilitySum { .. }));
        assert!(v[0].to_string().contains("cond_prob sum ≠ 1"));
        assert!(v[0].to_string().contains("node 0"));
    }

    #[test]
    fn time_inconsistency_is_reported() {
        let mut nodes = binomial();
        nodes.push(Node::child(1, 3, 1.0));
        nodes.push(Node::child(2, 2, 1.0));
        let v = validate_nodes(&nodes);
        assert!(v.iter().any(|x| x.node == Some(3) && x.rule == Rule::TimeInconsistency));
        assert!(v.iter().any(|x| x.to_string().contains("time inconsistency")));
    }

    #[test]
    fn structural_violations() {
        assert_eq!(validate_nodes(&[])[0].rule, Rule::EmptyTree);
        let v = validate_nodes(&[Node::root()]);
        assert!(v.iter().any(|x| x.rule == Rule::ZeroHorizon));
        let mut nodes = binomial();
        nodes[2].cond_prob = 0.0;
        nodes[1].cond_prob = 1.0;
        assert!(validate_nodes(&nodes)
            .iter()
            .any(|x| x.rule == Rule::NonPositiveProbability && x.node == Some(2)));
        let mut nodes = binomial();
        nodes.push(Node::child(1, 2, 1.0));
        assert!(validate_nodes(&nodes)
            .iter()
            .any(|x| x.node == Some(2) && matches!(x.rule, Rule::LeafDepth { .. })));
        let mut nodes = binomial();
        nodes.push(Node { time: 0, parent: None, cond_prob: 1.0 });
        assert!(validate_nodes(&nodes).iter().any(|x| x.rule == Rule::MultipleRoots));
        let mut nodes = binomial();
        nodes[2].parent = Some(7);
        assert!(validate_nodes(&nodes).iter().any(|x| x.rule == Rule::DanglingParent));
    }

    #[test]
    fn uniform_tree_levels() {
        let t = uniform_tree(3, &[0.25, 0.25, 0.5]).unwrap();
        assert_eq!(t.len(), 1 + 3 + 9 + 27);
        assert_eq!(t.level(2).len(), 9);
        assert_eq!(t.decision_nodes(3).len(), 13);
        let total: f64 = t.level(3).iter().map(|&u| t.prob(u)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(t.path(t.level(3)[5]).len(), 4);
    }
}
