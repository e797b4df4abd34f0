//! Rooted trees with nonnegative edge weights.
//!
//! Every non-root node owns exactly one edge: the edge to its parent. Edge
//! quantities (weights, subtree masses) are therefore indexed by the child
//! node, and the closed-form tree-Wasserstein sum is a single pass over nodes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

/// Serialized form of one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    #[serde(default)]
    pub embedding: Option<Point>,
    pub parent: Option<usize>,
    /// Weight of the edge to `parent`; zero for the root.
    #[serde(default)]
    pub edge_weight: f64,
}

/// Serialized form of a tree: `{"nodes": [...], "root": r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSpec {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
}

/// First invariant violation found by [`validate_tree`].
#[derive(Debug, Clone, PartialEq)]
pub enum TreeDiagnostic {
    Empty,
    RootOutOfRange { root: usize, len: usize },
    RootHasParent { root: usize },
    MissingParent { node: usize },
    ParentOutOfRange { node: usize, parent: usize },
    NegativeWeight { node: usize, weight: f64 },
    NonFiniteWeight { node: usize },
    Cycle { node: usize },
}

impl fmt::Display for TreeDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => write!(f, "tree has no nodes"),
            Self::RootOutOfRange { root, len } => {
                write!(f, "root {root} out of range for {len} nodes")
            }
            Self::RootHasParent { root } => write!(f, "root {root} has a parent"),
            Self::MissingParent { node } => write!(f, "non-root node {node} has no parent"),
            Self::ParentOutOfRange { node, parent } => {
                write!(f, "node {node} has out-of-range parent {parent}")
            }
            Self::NegativeWeight { node, weight } => {
                write!(f, "negative weight at edge {node} ({weight})")
            }
            Self::NonFiniteWeight { node } => write!(f, "non-finite weight at edge {node}"),
            Self::Cycle { node } => write!(f, "cycle detected at node {node}"),
        }
    }
}

/// Checks the tree invariants: a single root, parent pointers leading to the
/// root without cycles, and nonnegative finite edge weights.
pub fn validate_tree(spec: &TreeSpec) -> std::result::Result<(), TreeDiagnostic> {
    let len = spec.nodes.len();
    if len == 0 {
        return Err(TreeDiagnostic::Empty);
    }
    if spec.root >= len {
        return Err(TreeDiagnostic::RootOutOfRange { root: spec.root, len });
    }
    for (v, node) in spec.nodes.iter().enumerate() {
        if v == spec.root {
            if node.parent.is_some() {
                return Err(TreeDiagnostic::RootHasParent { root: v });
            }
            continue;
        }
        match node.parent {
            None => return Err(TreeDiagnostic::MissingParent { node: v }),
            Some(p) if p >= len => {
                return Err(TreeDiagnostic::ParentOutOfRange { node: v, parent: p })
            }
            Some(_) => {}
        }
        if !node.edge_weight.is_finite() {
            return Err(TreeDiagnostic::NonFiniteWeight { node: v });
        }
        if node.edge_weight < 0.0 {
            return Err(TreeDiagnostic::NegativeWeight {
                node: v,
                weight: node.edge_weight,
            });
        }
    }
    // 0 = unvisited, 1 = on current walk, 2 = known to reach the root
    let mut state = vec![0u8; len];
    state[spec.root] = 2;
    let mut walk = Vec::new();
    for start in 0..len {
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            walk.push(v);
            v = spec.nodes[v].parent.expect("checked above");
        }
        if state[v] == 1 {
            return Err(TreeDiagnostic::Cycle { node: v });
        }
        for u in walk.drain(..) {
            state[u] = 2;
        }
    }
    Ok(())
}

/// An immutable rooted tree with precomputed depths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeSpec", into = "TreeSpec")]
pub struct RootedTree {
    nodes: Vec<TreeNode>,
    root: usize,
    depth: Vec<usize>,
    /// Nodes by decreasing depth (ties by index), children before parents.
    bottom_up: Vec<usize>,
}

impl TryFrom<TreeSpec> for RootedTree {
    type Error = Error;

    fn try_from(spec: TreeSpec) -> Result<Self> {
        validate_tree(&spec).map_err(|d| Error::Validation(d.to_string()))?;
        Ok(Self::from_valid(spec.nodes, spec.root))
    }
}

impl From<RootedTree> for TreeSpec {
    fn from(tree: RootedTree) -> Self {
        TreeSpec {
            nodes: tree.nodes,
            root: tree.root,
        }
    }
}

impl RootedTree {
    pub fn from_spec(spec: TreeSpec) -> Result<Self> {
        Self::try_from(spec)
    }

    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec {
            nodes: self.nodes.clone(),
            root: self.root,
        }
    }

    fn from_valid(nodes: Vec<TreeNode>, root: usize) -> Self {
        let len = nodes.len();
        let mut depth = vec![usize::MAX; len];
        depth[root] = 0;
        let mut stack = Vec::new();
        for start in 0..len {
            let mut v = start;
            while depth[v] == usize::MAX {
                stack.push(v);
                v = nodes[v].parent.expect("validated");
            }
            let mut d = depth[v];
            while let Some(u) = stack.pop() {
                d += 1;
                depth[u] = d;
            }
        }
        let mut bottom_up: Vec<usize> = (0..len).collect();
        bottom_up.sort_by(|&a, &b| depth[b].cmp(&depth[a]).then(a.cmp(&b)));
        Self {
            nodes,
            root,
            depth,
            bottom_up,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.nodes[v].parent
    }

    /// Weight of the edge from `v` to its parent (zero at the root).
    pub fn edge_weight(&self, v: usize) -> f64 {
        self.nodes[v].edge_weight
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn embedding(&self, v: usize) -> Option<&Point> {
        self.nodes[v].embedding.as_ref()
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Nodes ordered children-before-parents.
    pub fn bottom_up(&self) -> &[usize] {
        &self.bottom_up
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&u| self.nodes[u].parent == Some(v))
            .collect()
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                index: v,
                len: self.len(),
            })
        }
    }

    /// Lowest common ancestor, by lifting the deeper node and then both.
    pub fn lca(&self, x: usize, z: usize) -> Result<usize> {
        self.check(x)?;
        self.check(z)?;
        let (mut a, mut b) = (x, z);
        while self.depth[a] > self.depth[b] {
            a = self.nodes[a].parent.expect("non-root has parent");
        }
        while self.depth[b] > self.depth[a] {
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        while a != b {
            a = self.nodes[a].parent.expect("non-root has parent");
            b = self.nodes[b].parent.expect("non-root has parent");
        }
        Ok(a)
    }

    /// Tree metric: total edge weight along the unique path from `x` to `z`.
    pub fn path_length(&self, x: usize, z: usize) -> Result<f64> {
        let top = self.lca(x, z)?;
        Ok(self.length_to_ancestor(x, top) + self.length_to_ancestor(z, top))
    }

    fn length_to_ancestor(&self, mut v: usize, ancestor: usize) -> f64 {
        let mut total = 0.0;
        while v != ancestor {
            total += self.nodes[v].edge_weight;
            v = self.nodes[v].parent.expect("ancestor is above v");
        }
        total
    }

    /// Total mass of the subtree rooted at each node, for per-node masses
    /// `mass` (one bottom-up accumulation).
    pub fn subtree_masses(&self, mass: &[f64]) -> Vec<f64> {
        assert_eq!(mass.len(), self.len(), "one mass per node");
        let mut acc = mass.to_vec();
        for &v in &self.bottom_up {
            if let Some(p) = self.nodes[v].parent {
                acc[p] += acc[v];
            }
        }
        acc
    }

    /// Returns a copy with every edge weight multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) || !factor.is_finite() {
            return Err(Error::invalid("scale factor must be finite and nonnegative"));
        }
        let mut tree = self.clone();
        for node in &mut tree.nodes {
            node.edge_weight *= factor;
        }
        Ok(tree)
    }
}

/// Incremental construction with parents created before children, so the
/// result is valid by construction.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    nodes: Vec<TreeNode>,
}

impl TreeBuilder {
    pub fn new(root_embedding: Option<Point>) -> Self {
        Self {
            nodes: vec![TreeNode {
                embedding: root_embedding,
                parent: None,
                edge_weight: 0.0,
            }],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn add_child(&mut self, parent: usize, weight: f64, embedding: Option<Point>) -> usize {
        assert!(parent < self.nodes.len(), "parent {parent} does not exist");
        assert!(weight >= 0.0 && weight.is_finite(), "edge weight {weight} must be nonnegative");
        self.nodes.push(TreeNode {
            embedding,
            parent: Some(parent),
            edge_weight: weight,
        });
        self.nodes.len() - 1
    }

    pub fn embedding(&self, v: usize) -> Option<&Point> {
        self.nodes[v].embedding.as_ref()
    }

    pub fn finish(self) -> RootedTree {
        RootedTree::from_valid(self.nodes, 0)
    }
}

/// A probability measure on the nodes of a specific tree.
#[derive(Debug, Clone)]
pub struct NodeMeasure<'t> {
    tree: &'t RootedTree,
    mass: Vec<f64>,
}

impl<'t> NodeMeasure<'t> {
    /// Per-node masses; must be nonnegative and sum to one within 1e-9.
    pub fn new(tree: &'t RootedTree, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != tree.len() {
            return Err(Error::Cardinality {
                left: mass.len(),
                right: tree.len(),
            });
        }
        if mass.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::invalid("node masses must be finite and nonnegative"));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > crate::measures::SIMPLEX_TOL {
            return Err(Error::invalid(format!("node masses sum to {total}, not 1")));
        }
        Ok(Self { tree, mass })
    }

    pub fn dirac(tree: &'t RootedTree, node: usize) -> Result<Self> {
        tree.check(node)?;
        let mut mass = vec![0.0; tree.len()];
        mass[node] = 1.0;
        Ok(Self { tree, mass })
    }

    /// Sums raw weights placed on nodes (repeats allowed) and normalizes.
    pub fn from_weighted_nodes(tree: &'t RootedTree, nodes: &[usize], weights: &[f64]) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::Cardinality {
                left: nodes.len(),
                right: weights.len(),
            });
        }
        let weights = crate::measures::normalize(weights)?;
        let mut mass = vec![0.0; tree.len()];
        for (&v, w) in nodes.iter().zip(weights) {
            tree.check(v)?;
            mass[v] += w;
        }
        Ok(Self { tree, mass })
    }

    pub fn tree(&self) -> &'t RootedTree {
        self.tree
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn subtree_masses(&self) -> Vec<f64> {
        self.tree.subtree_masses(&self.mass)
    }
}
