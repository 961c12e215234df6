use std::fmt;

use super::{depth_partition, Network, NodeId, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    Base,
    Acyclicity,
    UniqueSource,
    SourceRole,
    SourceEdgeOrder,
    TerminalRole,
    TerminalInDegree,
    Demand,
    DeepestLayer,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Base => "base",
            ViolationKind::Acyclicity => "acyclicity",
            ViolationKind::UniqueSource => "unique source",
            ViolationKind::SourceRole => "source role",
            ViolationKind::SourceEdgeOrder => "source edge order",
            ViolationKind::TerminalRole => "terminal role",
            ViolationKind::TerminalInDegree => "terminal in-degree",
            ViolationKind::Demand => "demand",
            ViolationKind::DeepestLayer => "deepest layer",
        }
    }
}

/// A broken network invariant, naming the offending element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub element: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.kind.as_str(), self.element, self.message)
    }
}

fn violation(kind: ViolationKind, element: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        kind,
        element: element.into(),
        message: message.into(),
    }
}

/// Checks every network invariant. An empty result means the network is
/// usable by the rest of the pipeline.
pub fn validate(net: &Network) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();

    if net.base() < 2 {
        out.push(violation(Base, "base", format!("base {} is below 2", net.base())));
    }

    let acyclic = match net.topological_order() {
        Ok(_) => true,
        Err(e) => {
            out.push(violation(Acyclicity, e.to_string(), "graph is not acyclic"));
            false
        }
    };

    let roots: Vec<NodeId> = net.node_ids().filter(|&v| net.in_degree(v) == 0).collect();
    if roots.len() != 1 {
        let names: Vec<&str> = roots.iter().map(|&v| net.node(v).name.as_str()).collect();
        out.push(violation(
            UniqueSource,
            names.join(","),
            format!("expected exactly one node with in-degree 0, found {}", roots.len()),
        ));
    }
    let sources: Vec<NodeId> = net
        .node_ids()
        .filter(|&v| net.node(v).role == Role::Source)
        .collect();
    if sources.len() != 1 {
        out.push(violation(
            UniqueSource,
            "nodes",
            format!("expected exactly one node with role source, found {}", sources.len()),
        ));
    }
    for &s in &sources {
        if net.in_degree(s) != 0 {
            out.push(violation(
                SourceRole,
                &net.node(s).name,
                "source node has incoming edges",
            ));
        }
    }

    if let Some(s) = net.source() {
        let mut given: Vec<_> = net.source_edges().to_vec();
        let mut actual: Vec<_> = net.out(s).to_vec();
        given.sort();
        actual.sort();
        if given != actual {
            out.push(violation(
                SourceEdgeOrder,
                "source_edge_order",
                "not a permutation of the source's outgoing edges",
            ));
        }
        if actual.is_empty() {
            out.push(violation(SourceEdgeOrder, &net.node(s).name, "source has no outgoing edges"));
        }
    }

    let k = net.message_count();
    for (&t, msgs) in net.demand_map() {
        let name = &net.node(t).name;
        if net.node(t).role != Role::Terminal {
            out.push(violation(
                TerminalRole,
                name,
                format!("node with role {} has demands", net.node(t).role),
            ));
        }
        if msgs.is_empty() {
            out.push(violation(Demand, name, "empty demand list"));
        }
        for &m in msgs {
            if m >= k {
                out.push(violation(Demand, name, format!("demand out of range: message {}", m + 1)));
            }
        }
        if net.in_degree(t) == 0 {
            out.push(violation(TerminalInDegree, name, "terminal has no incoming edges"));
        }
    }
    for v in net.node_ids() {
        if net.node(v).role == Role::Terminal && !net.demand_map().contains_key(&v) {
            out.push(violation(TerminalRole, &net.node(v).name, "terminal has no demands"));
        }
    }

    if acyclic && net.edge_count() > 0 {
        let part = depth_partition(net).expect("acyclic");
        let last = part.depth() - 1;
        let ok = part.layer(last).iter().any(|&e| {
            let head = net.edge(e).to;
            net.node(head).role == Role::Terminal
        });
        if !ok {
            out.push(violation(
                DeepestLayer,
                format!("layer {last}"),
                "no edge of the deepest layer ends in a terminal",
            ));
        }
    } else if net.edge_count() == 0 {
        out.push(violation(DeepestLayer, "edges", "network has no edges"));
    }

    out
}
