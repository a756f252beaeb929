//! Composite networks as rooted DAGs.
//!
//! Nodes live in an arena and refer to their children by index. A leaf is a
//! [`Component`]; a [`GlueNode`] combines its children through an affine
//! layer `z = θ0 + Σ θ_c child_c`, applies an activation, and optionally an
//! output affine map. The output map is stored relative to an anchor so
//! that the scaled construction evaluates without cancellation:
//! `out = scale · (σ(z) − σ(anchor)) + offset`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activation::Activation;
use crate::components::Component;
use crate::data::{Dataset, OutputVector};
use crate::error::{Error, Result};
use crate::scaled::ScaledPlan;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterAffine {
    pub scale: f64,
    pub offset: f64,
    #[serde(default)]
    pub anchor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueNode {
    pub children: Vec<usize>,
    /// Bias first, then one weight per child.
    pub theta: Vec<f64>,
    pub activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<OuterAffine>,
    #[serde(default)]
    pub frozen: bool,
}

impl GlueNode {
    pub fn linear(children: Vec<usize>, theta: Vec<f64>) -> Self {
        Self {
            children,
            theta,
            activation: Activation::Identity,
            outer: None,
            frozen: false,
        }
    }

    /// The glue realising a scaled plan over `children` (plan coefficients
    /// are bias first, then one per child).
    pub fn from_plan(children: Vec<usize>, plan: &ScaledPlan) -> Self {
        Self {
            children,
            theta: plan.l0.clone(),
            activation: plan.activation,
            outer: Some(OuterAffine {
                scale: plan.l1_slope,
                offset: plan.l1_slope * plan.y0 + plan.l1_intercept,
                anchor: plan.z0,
            }),
            frozen: false,
        }
    }

    /// True for a plain linear combination (no activation, no output map).
    pub fn is_linear(&self) -> bool {
        self.activation.is_identity() && self.outer.is_none()
    }

    pub fn param_count(&self) -> usize {
        self.theta.len() + if self.outer.is_some() { 2 } else { 0 }
    }

    pub(crate) fn pre_activation(&self, child_values: &[&[f64]], b: usize) -> f64 {
        let mut z = self.theta[0];
        for (t, c) in self.theta[1..].iter().zip(child_values) {
            z += t * c[b];
        }
        z
    }

    pub(crate) fn output(&self, z: f64) -> f64 {
        match self.outer {
            None => self.activation.eval(z),
            Some(o) => o.scale * self.activation.delta(z, o.anchor) + o.offset,
        }
    }

    /// `d out / d z`.
    pub(crate) fn output_slope(&self, z: f64) -> f64 {
        let d = self.activation.derivative(z);
        match self.outer {
            None => d,
            Some(o) => o.scale * d,
        }
    }

    pub(crate) fn param_mut(&mut self, index: usize) -> &mut f64 {
        let t = self.theta.len();
        if index < t {
            return &mut self.theta[index];
        }
        let outer = self.outer.as_mut().expect("glue parameter index out of range");
        match index - t {
            0 => &mut outer.scale,
            1 => &mut outer.offset,
            _ => panic!("glue parameter index out of range"),
        }
    }

    pub(crate) fn params(&self) -> Vec<f64> {
        let mut p = self.theta.clone();
        if let Some(o) = self.outer {
            p.extend([o.scale, o.offset]);
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Component(Component),
    Glue(GlueNode),
}

impl Node {
    fn is_frozen(&self) -> bool {
        match self {
            Node::Component(c) => c.is_frozen(),
            Node::Glue(g) => g.frozen,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Node::Component(c) => c.param_count(),
            Node::Glue(g) => g.param_count(),
        }
    }

    fn params(&self) -> Vec<f64> {
        match self {
            Node::Component(c) => c.params(),
            Node::Glue(g) => g.params(),
        }
    }
}

/// Address of one scalar parameter: node index and position in that node's layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ParamRef {
    pub node: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct CompositeGraph {
    nodes: Vec<Node>,
    root: usize,
    order: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: Vec<Node>,
    root: usize,
}

impl TryFrom<GraphDoc> for CompositeGraph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        CompositeGraph::from_nodes(doc.nodes, doc.root)
    }
}

impl From<CompositeGraph> for GraphDoc {
    fn from(g: CompositeGraph) -> Self {
        GraphDoc {
            nodes: g.nodes,
            root: g.root,
        }
    }
}

impl CompositeGraph {
    /// Validates references, acyclicity, duplicate children and finiteness,
    /// and fixes a topological order of the nodes reachable from `root`.
    pub fn from_nodes(nodes: Vec<Node>, root: usize) -> Result<Self> {
        if root >= nodes.len() {
            return Err(Error::Graph(format!(
                "root {root} out of range for {} nodes",
                nodes.len()
            )));
        }
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Glue(g) = node {
                if g.theta.len() != g.children.len() + 1 {
                    return Err(Error::Graph(format!(
                        "glue node {i} has {} children but {} weights",
                        g.children.len(),
                        g.theta.len()
                    )));
                }
                let mut seen = BTreeSet::new();
                for &c in &g.children {
                    if c >= nodes.len() {
                        return Err(Error::DanglingReference { node: i, child: c });
                    }
                    if !seen.insert(c) {
                        return Err(Error::Graph(format!("glue node {i} lists child {c} more than once")));
                    }
                }
                if g.params().iter().any(|p| !p.is_finite()) || g.outer.is_some_and(|o| !o.anchor.is_finite()) {
                    return Err(Error::NonFinite("glue weights"));
                }
            }
        }
        let order = topological_order(&nodes, root)?;
        Ok(Self { nodes, root, order })
    }

    pub fn leaf(component: Component) -> Self {
        Self {
            nodes: vec![Node::Component(component)],
            root: 0,
            order: vec![0],
        }
    }

    /// Glues independent subgraphs under a new root.
    pub fn glue(children: Vec<CompositeGraph>, mut glue: GlueNode) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut roots = Vec::with_capacity(children.len());
        for child in children {
            let base = nodes.len();
            roots.push(base + child.root);
            for mut node in child.nodes {
                if let Node::Glue(g) = &mut node {
                    for c in &mut g.children {
                        *c += base;
                    }
                }
                nodes.push(node);
            }
        }
        glue.children = roots;
        nodes.push(Node::Glue(glue));
        let root = nodes.len() - 1;
        Self::from_nodes(nodes, root)
    }

    /// A linear glue over leaf components.
    pub fn linear_stack(components: Vec<Component>, theta: Vec<f64>) -> Result<Self> {
        let leaves = components.into_iter().map(Self::leaf).collect();
        Self::glue(leaves, GlueNode::linear(Vec::new(), theta))
    }

    /// The graph rooted at `node`, with only the nodes it reaches.
    pub fn subgraph(&self, node: usize) -> Result<Self> {
        let order = topological_order(&self.nodes, node)?;
        let mut index = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            index[old] = new;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let mut n = self.nodes[old].clone();
                if let Node::Glue(g) = &mut n {
                    for c in &mut g.children {
                        *c = index[*c];
                    }
                }
                n
            })
            .collect();
        Self::from_nodes(nodes, index[node])
    }

    /// Subgraphs rooted at each child of the root glue; empty for a leaf.
    pub fn root_children(&self) -> Result<Vec<Self>> {
        match self.root_node() {
            Node::Glue(g) => g.children.iter().map(|&c| self.subgraph(c)).collect(),
            Node::Component(_) => Ok(Vec::new()),
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_node(&self) -> &Node {
        &self.nodes[self.root]
    }

    /// Reachable nodes, children before parents.
    pub fn topological(&self) -> &[usize] {
        &self.order
    }

    /// Number of glue nodes on the longest path from the root.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for &i in &self.order {
            if let Node::Glue(g) = &self.nodes[i] {
                depth[i] = 1 + g.children.iter().map(|&c| depth[c]).max().unwrap_or(0);
            }
        }
        depth[self.root]
    }

    pub fn components(&self) -> impl Iterator<Item = (usize, &Component)> {
        self.order.iter().filter_map(|&i| match &self.nodes[i] {
            Node::Component(c) => Some((i, c)),
            Node::Glue(_) => None,
        })
    }

    pub fn component_mut(&mut self, node: usize) -> Option<&mut Component> {
        match self.nodes.get_mut(node) {
            Some(Node::Component(c)) => Some(c),
            _ => None,
        }
    }

    pub fn glue_mut(&mut self, node: usize) -> Option<&mut GlueNode> {
        match self.nodes.get_mut(node) {
            Some(Node::Glue(g)) => Some(g),
            _ => None,
        }
    }

    /// Every parameter not protected by a frozen flag, in node order.
    pub fn trainable_params(&self) -> Vec<ParamRef> {
        let mut refs = Vec::new();
        for &node in &self.order {
            let n = &self.nodes[node];
            if !n.is_frozen() {
                refs.extend((0..n.param_count()).map(|index| ParamRef { node, index }));
            }
        }
        refs
    }

    pub fn trainable_count(&self) -> usize {
        self.order
            .iter()
            .map(|&i| &self.nodes[i])
            .filter(|n| !n.is_frozen())
            .map(Node::param_count)
            .sum()
    }

    pub fn param(&self, p: ParamRef) -> f64 {
        self.nodes[p.node].params()[p.index]
    }

    pub(crate) fn param_mut(&mut self, p: ParamRef) -> &mut f64 {
        match &mut self.nodes[p.node] {
            Node::Component(c) => c.param_mut(p.index),
            Node::Glue(g) => g.param_mut(p.index),
        }
    }

    /// Overwrites a trainable parameter. Frozen nodes are refused.
    pub fn set_param(&mut self, p: ParamRef, value: f64) -> Result<()> {
        if self.nodes[p.node].is_frozen() {
            return Err(Error::Graph(format!("node {} is frozen", p.node)));
        }
        *self.param_mut(p) = value;
        Ok(())
    }

    pub fn trainable_values(&self) -> Vec<f64> {
        self.trainable_params().into_iter().map(|p| self.param(p)).collect()
    }

    /// SHA-256 over the ids and parameter bits of every frozen node.
    pub fn frozen_checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.is_frozen() {
                continue;
            }
            hasher.update((i as u64).to_le_bytes());
            if let Node::Component(c) = node {
                hasher.update(c.id().as_bytes());
            }
            for p in node.params() {
                hasher.update(p.to_bits().to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Marks every node frozen, turning the whole network into a pre-trained component.
    pub fn freeze_all(mut self) -> Self {
        for node in &mut self.nodes {
            match node {
                Node::Component(c) => *c = c.clone().freeze(),
                Node::Glue(g) => g.frozen = true,
            }
        }
        self
    }

    /// Node values on the given records, indexed by node.
    pub(crate) fn forward(&self, data: &Dataset, records: &[usize]) -> Result<Vec<Vec<f64>>> {
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        for &i in &self.order {
            values[i] = match &self.nodes[i] {
                Node::Component(c) => c.evaluate_batch(data, records)?,
                Node::Glue(g) => {
                    let child_values: Vec<&[f64]> = g.children.iter().map(|&c| values[c].as_slice()).collect();
                    (0..records.len())
                        .map(|b| g.output(g.pre_activation(&child_values, b)))
                        .collect()
                }
            };
        }
        Ok(values)
    }

    pub fn evaluate_batch(&self, data: &Dataset, records: &[usize]) -> Result<Vec<f64>> {
        let mut values = self.forward(data, records)?;
        let out = std::mem::take(&mut values[self.root]);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("graph output"));
        }
        Ok(out)
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<OutputVector> {
        let all: Vec<usize> = (0..data.n()).collect();
        OutputVector::new(self.evaluate_batch(data, &all)?)
    }

    /// Squared error of the graph on every record of `data`.
    pub fn sse(&self, data: &Dataset) -> Result<f64> {
        crate::data::total_loss(self.evaluate(data)?, data.targets())
    }
}

fn topological_order(nodes: &[Node], root: usize) -> Result<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    let mut mark = vec![Mark::New; nodes.len()];
    let mut order = Vec::new();
    // Explicit stack of (node, next child position).
    let mut stack = vec![(root, 0usize)];
    mark[root] = Mark::Open;
    while let Some((node, pos)) = stack.pop() {
        let children: &[usize] = match &nodes[node] {
            Node::Glue(g) => &g.children,
            Node::Component(_) => &[],
        };
        if let Some(&child) = children.get(pos) {
            stack.push((node, pos + 1));
            match mark[child] {
                Mark::New => {
                    mark[child] = Mark::Open;
                    stack.push((child, 0));
                }
                Mark::Open => return Err(Error::Cycle(child)),
                Mark::Done => {}
            }
        } else {
            mark[node] = Mark::Done;
            order.push(node);
        }
    }
    Ok(order)
}

/// Evaluates `g` on every record of `data` in topological order.
pub fn evaluate_graph(g: &CompositeGraph, data: &Dataset) -> Result<OutputVector> {
    g.evaluate(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(id: &str, v: &[f64]) -> Component {
        Component::table(id, v.to_vec()).unwrap()
    }

    #[test]
    fn single_table_graph_is_its_vector() {
        let data = Dataset::targets_only(vec![0.0; 3]).unwrap();
        let g = CompositeGraph::leaf(table("t", &[1.0, -2.0, 0.5]));
        assert_eq!(g.evaluate(&data).unwrap().as_slice(), &[1.0, -2.0, 0.5]);
        assert_eq!(g.depth(), 0);
    }

    #[test]
    fn bias_only_glue_is_constant() {
        let data = Dataset::targets_only(vec![0.0; 4]).unwrap();
        let g = CompositeGraph::linear_stack(vec![Component::constant_one()], vec![0.0, 2.5]).unwrap();
        assert!(g.evaluate(&data).unwrap().iter().all(|v| *v == 2.5));
        assert_eq!(g.depth(), 1);
    }

    #[test]
    fn cycles_and_dangling_references_are_rejected() {
        let glue = |children: Vec<usize>| {
            let theta = vec![0.0; children.len() + 1];
            Node::Glue(GlueNode::linear(children, theta))
        };
        let nodes = vec![glue(vec![1]), glue(vec![0])];
        assert!(matches!(CompositeGraph::from_nodes(nodes, 0), Err(Error::Cycle(_))));
        let nodes = vec![glue(vec![5])];
        assert!(matches!(
            CompositeGraph::from_nodes(nodes, 0),
            Err(Error::DanglingReference { node: 0, child: 5 })
        ));
        let nodes = vec![Node::Component(Component::constant_one()), glue(vec![0, 0])];
        assert!(matches!(CompositeGraph::from_nodes(nodes, 1), Err(Error::Graph(_))));
    }

    #[test]
    fn shared_child_is_a_dag_not_a_cycle() {
        let nodes = vec![
            Node::Component(table("t", &[1.0, 2.0])),
            Node::Glue(GlueNode::linear(vec![0], vec![0.0, 2.0])),
            Node::Glue(GlueNode::linear(vec![0, 1], vec![1.0, 1.0, 1.0])),
        ];
        let g = CompositeGraph::from_nodes(nodes, 2).unwrap();
        let data = Dataset::targets_only(vec![0.0; 2]).unwrap();
        // 1 + t + 2t
        assert_eq!(g.evaluate(&data).unwrap().as_slice(), &[4.0, 7.0]);
        assert_eq!(g.depth(), 2);
    }

    #[test]
    fn json_uses_typed_nodes() {
        let g =
            CompositeGraph::linear_stack(vec![table("a", &[1.0]), table("b", &[2.0])], vec![0.5, 1.0, -1.0]).unwrap();
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["nodes"][2]["type"], "glue");
        assert_eq!(v["nodes"][2]["activation"], "identity");
        assert_eq!(v["nodes"][0]["type"], "component");
        assert_eq!(v["nodes"][0]["kind"], "table");
        let back: CompositeGraph = serde_json::from_value(v).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn subgraphs_evaluate_like_their_node() {
        let nodes = vec![
            Node::Component(table("t", &[1.0, 2.0])),
            Node::Component(table("u", &[0.5, -1.0])),
            Node::Glue(GlueNode::linear(vec![0, 1], vec![0.0, 2.0, 1.0])),
            Node::Glue(GlueNode::linear(vec![2, 0], vec![1.0, 1.0, 1.0])),
        ];
        let g = CompositeGraph::from_nodes(nodes, 3).unwrap();
        let data = Dataset::targets_only(vec![0.0; 2]).unwrap();
        let children = g.root_children().unwrap();
        assert_eq!(children.len(), 2);
        assert_eq!(children[0].evaluate(&data).unwrap().as_slice(), &[2.5, 3.0]);
        assert_eq!(children[0].nodes().len(), 3);
        assert_eq!(children[1].evaluate(&data).unwrap().as_slice(), &[1.0, 2.0]);
        let rebuilt = CompositeGraph::glue(children, GlueNode::linear(vec![], vec![1.0, 1.0, 1.0])).unwrap();
        assert_eq!(rebuilt.evaluate(&data).unwrap(), g.evaluate(&data).unwrap());
    }

    #[test]
    fn frozen_nodes_refuse_updates() {
        let mut g = CompositeGraph::linear_stack(vec![table("a", &[1.0])], vec![0.0, 1.0])
            .unwrap()
            .freeze_all();
        assert_eq!(g.trainable_count(), 0);
        assert!(g.set_param(ParamRef { node: 1, index: 0 }, 3.0).is_err());
    }
}
