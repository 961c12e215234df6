//! Network data model: a directed acyclic graph with one source node whose
//! outgoing edges carry the source messages, and terminal nodes that each
//! demand an ordered list of those messages.
//!
//! Edge order is significant. The position of an edge in the edge list fixes
//! its position inside `inc(v)` of its head node, which is the order in which
//! coefficients are applied and the order of floating-point summation.

mod depth;
pub mod fixtures;
pub mod generate;
mod io;
mod validate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use depth::{depth_partition, DepthPartition};
pub use io::{load, save, NetworkFile};
pub use validate::{validate, Violation, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Source,
    Internal,
    Terminal,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Source => "source",
            Role::Internal => "internal",
            Role::Terminal => "terminal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub name: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub name: String,
    pub from: NodeId,
    pub to: NodeId,
}

/// One demanded message at one terminal.
///
/// `position` is the index into the terminal's demand list, `message` the
/// zero-based index of the demanded source message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Demand {
    pub terminal: NodeId,
    pub position: usize,
    pub message: usize,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("parse error at line {line}, column {column} ({path}): {message}")]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("schema error in {field}: {message}")]
    Schema { field: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("network contains a cycle through node {0}")]
    Cyclic(String),
}

impl NetworkError {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        NetworkError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// A single-source network.
///
/// Construct through [`NetworkBuilder`] or [`load`]; both resolve names and
/// check references. Graph-level invariants (acyclicity, unique source, ...)
/// are reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    name: String,
    base: u32,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    source_edges: Vec<EdgeId>,
    demands: BTreeMap<NodeId, Vec<usize>>,
    inc: Vec<Vec<EdgeId>>,
    out: Vec<Vec<EdgeId>>,
    demand_list: Vec<Demand>,
}

impl Network {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Fixed-point base used on the edges of this network.
    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    /// Incoming edges of `v` in canonical order.
    pub fn inc(&self, v: NodeId) -> &[EdgeId] {
        &self.inc[v.0]
    }

    pub fn out(&self, v: NodeId) -> &[EdgeId] {
        &self.out[v.0]
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.inc[v.0].len()
    }

    pub fn max_in_degree(&self) -> usize {
        self.inc.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Source edges in message order: entry `i` carries message `i`.
    pub fn source_edges(&self) -> &[EdgeId] {
        &self.source_edges
    }

    /// Number of source messages, `k = |out(s)|`.
    pub fn message_count(&self) -> usize {
        self.source_edges.len()
    }

    /// Message index carried by `e`, if `e` is a source edge.
    pub fn message_of(&self, e: EdgeId) -> Option<usize> {
        self.source_edges.iter().position(|&s| s == e)
    }

    /// The node with role `source`, if there is exactly one.
    pub fn source(&self) -> Option<NodeId> {
        let mut it = self.node_ids().filter(|&v| self.node(v).role == Role::Source);
        match (it.next(), it.next()) {
            (Some(s), None) => Some(s),
            _ => None,
        }
    }

    /// Demanded messages (zero-based) of every terminal.
    pub fn demand_map(&self) -> &BTreeMap<NodeId, Vec<usize>> {
        &self.demands
    }

    /// All demands in canonical order: by terminal, then position.
    pub fn demands(&self) -> &[Demand] {
        &self.demand_list
    }

    pub fn terminals(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.demands.keys().copied()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name).map(EdgeId)
    }

    /// Deterministic topological order of the nodes (Kahn, smallest index
    /// first).
    pub fn topological_order(&self) -> Result<Vec<NodeId>, NetworkError> {
        let mut indeg: Vec<usize> = self.inc.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..self.nodes.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(v) = ready.pop_first() {
            order.push(NodeId(v));
            for &e in &self.out[v] {
                let w = self.edges[e.0].to.0;
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    ready.insert(w);
                }
            }
        }
        if order.len() == self.nodes.len() {
            Ok(order)
        } else {
            let stuck = (0..self.nodes.len()).find(|&v| indeg[v] > 0).unwrap();
            Err(NetworkError::Cyclic(self.nodes[stuck].name.clone()))
        }
    }

    /// Edges in an order where every edge comes after all edges entering
    /// its tail node. Within a node, outgoing edges keep canonical order.
    pub fn topological_edges(&self) -> Result<Vec<EdgeId>, NetworkError> {
        Ok(self
            .topological_order()?
            .into_iter()
            .flat_map(|v| self.out[v.0].iter().copied())
            .collect())
    }

    /// True when `to` is reachable from `from` along directed edges.
    pub fn edge_reaches_node(&self, from: EdgeId, to: NodeId) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.edges[from.0].to];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v.0], true) {
                continue;
            }
            stack.extend(self.out[v.0].iter().map(|e| self.edges[e.0].to));
        }
        false
    }
}

/// Incremental, name-based network construction.
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    name: String,
    base: u32,
    nodes: Vec<Node>,
    edges: Vec<(String, String, String)>,
    source_order: Option<Vec<String>>,
    demands: Vec<(String, Vec<usize>)>,
}

impl NetworkBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        NetworkBuilder {
            name: name.into(),
            base: 2,
            ..Default::default()
        }
    }

    pub fn base(mut self, b: u32) -> Self {
        self.base = b;
        self
    }

    pub fn node(mut self, name: impl Into<String>, role: Role) -> Self {
        self.nodes.push(Node {
            name: name.into(),
            role,
        });
        self
    }

    pub fn source(self, name: impl Into<String>) -> Self {
        self.node(name, Role::Source)
    }

    pub fn internal(self, name: impl Into<String>) -> Self {
        self.node(name, Role::Internal)
    }

    pub fn terminal(self, name: impl Into<String>) -> Self {
        self.node(name, Role::Terminal)
    }

    pub fn edge(
        mut self,
        name: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
    ) -> Self {
        self.edges.push((name.into(), from.into(), to.into()));
        self
    }

    /// Message order of the source edges. Defaults to the canonical order
    /// of `out(s)` when not given.
    pub fn source_order<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.source_order = Some(names.into_iter().map(Into::into).collect());
        self
    }

    /// Demand with one-based message indices, as in the file format.
    pub fn demand<I>(mut self, terminal: impl Into<String>, messages: I) -> Self
    where
        I: IntoIterator<Item = usize>,
    {
        self.demands
            .push((terminal.into(), messages.into_iter().collect()));
        self
    }

    pub fn build(self) -> Result<Network, NetworkError> {
        let mut node_index = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.name.is_empty() {
                return Err(NetworkError::schema(format!("nodes[{i}].id"), "empty id"));
            }
            if node_index.insert(n.name.clone(), NodeId(i)).is_some() {
                return Err(NetworkError::schema(
                    format!("nodes[{i}].id"),
                    format!("duplicate node id {:?}", n.name),
                ));
            }
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut edge_index = HashMap::new();
        for (i, (name, from, to)) in self.edges.iter().enumerate() {
            if name.is_empty() || name.contains("->") {
                return Err(NetworkError::schema(
                    format!("edges[{i}].id"),
                    format!("invalid edge id {name:?}"),
                ));
            }
            if edge_index.insert(name.clone(), EdgeId(i)).is_some() {
                return Err(NetworkError::schema(
                    format!("edges[{i}].id"),
                    format!("duplicate edge id {name:?}"),
                ));
            }
            let lookup = |field: &str, n: &str| {
                node_index.get(n).copied().ok_or_else(|| {
                    NetworkError::schema(
                        format!("edges[{i}].{field}"),
                        format!("unknown node {n:?}"),
                    )
                })
            };
            edges.push(Edge {
                name: name.clone(),
                from: lookup("from", from)?,
                to: lookup("to", to)?,
            });
        }

        let mut inc = vec![Vec::new(); self.nodes.len()];
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, e) in edges.iter().enumerate() {
            inc[e.to.0].push(EdgeId(i));
            out[e.from.0].push(EdgeId(i));
        }

        let source_edges = match self.source_order {
            Some(names) => names
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    edge_index.get(n).copied().ok_or_else(|| {
                        NetworkError::schema(
                            format!("source_edge_order[{i}]"),
                            format!("unknown edge {n:?}"),
                        )
                    })
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => {
                let src = self
                    .nodes
                    .iter()
                    .position(|n| n.role == Role::Source)
                    .ok_or_else(|| NetworkError::schema("nodes", "no source node"))?;
                out[src].clone()
            }
        };
        let k = source_edges.len();

        let mut demands = BTreeMap::new();
        for (t, msgs) in &self.demands {
            let tid = *node_index.get(t).ok_or_else(|| {
                NetworkError::schema(format!("demands.{t}"), "unknown terminal node")
            })?;
            let mut zero_based = Vec::with_capacity(msgs.len());
            for (j, &m) in msgs.iter().enumerate() {
                if m == 0 || m > k {
                    return Err(NetworkError::schema(
                        format!("demands.{t}[{j}]"),
                        format!("demand out of range: message {m} not in 1..={k}"),
                    ));
                }
                zero_based.push(m - 1);
            }
            if demands.insert(tid, zero_based).is_some() {
                return Err(NetworkError::schema(
                    format!("demands.{t}"),
                    "terminal listed twice",
                ));
            }
        }
        let demand_list = demands
            .iter()
            .flat_map(|(&terminal, msgs)| {
                msgs.iter().enumerate().map(move |(position, &message)| Demand {
                    terminal,
                    position,
                    message,
                })
            })
            .collect();

        Ok(Network {
            name: self.name,
            base: self.base,
            nodes: self.nodes,
            edges,
            source_edges,
            demands,
            inc,
            out,
            demand_list,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parallel() -> Network {
        NetworkBuilder::new("parallel")
            .source("s")
            .terminal("t")
            .edge("a", "s", "t")
            .edge("b", "s", "t")
            .demand("t", [1])
            .build()
            .unwrap()
    }

    #[test]
    fn builder_resolves_names_and_orders() {
        let n = parallel();
        assert_eq!(n.message_count(), 2);
        assert_eq!(n.inc(NodeId(1)), &[EdgeId(0), EdgeId(1)]);
        assert_eq!(n.source(), Some(NodeId(0)));
        assert_eq!(n.message_of(EdgeId(1)), Some(1));
        assert_eq!(
            n.demands(),
            &[Demand {
                terminal: NodeId(1),
                position: 0,
                message: 0
            }]
        );
    }

    #[test]
    fn demand_out_of_range_is_schema_error() {
        let err = NetworkBuilder::new("x")
            .source("s")
            .terminal("t")
            .edge("a", "s", "t")
            .demand("t", [2])
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("demand out of range"), "{err}");
    }

    #[test]
    fn unknown_node_is_schema_error() {
        let err = NetworkBuilder::new("x")
            .source("s")
            .edge("a", "s", "nowhere")
            .build()
            .unwrap_err();
        assert!(matches!(err, NetworkError::Schema { .. }));
    }

    #[test]
    fn edge_names_cannot_contain_arrow() {
        let err = NetworkBuilder::new("x")
            .source("s")
            .terminal("t")
            .edge("a->b", "s", "t")
            .build()
            .unwrap_err();
        assert!(err.to_string().contains("invalid edge id"));
    }

    #[test]
    fn topological_edges_respect_dependencies() {
        let n = fixtures::butterfly();
        let order = n.topological_edges().unwrap();
        let pos: HashMap<EdgeId, usize> = order.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        for e in n.edge_ids() {
            for &i in n.inc(n.edge(e).from) {
                assert!(pos[&i] < pos[&e]);
            }
        }
    }

    #[test]
    fn reachability() {
        let n = fixtures::butterfly();
        let sa = n.source_edges()[0];
        let t2 = n.node_by_name("t2").unwrap();
        assert!(n.edge_reaches_node(sa, t2));
        let at1 = n.edge_by_name("a-t1").unwrap();
        assert!(!n.edge_reaches_node(at1, t2));
    }
}
