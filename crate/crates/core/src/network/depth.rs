use super::{EdgeId, Network, NetworkError, NodeId};

/// Longest-path depths of nodes and edges, and the induced partition of the
/// edge set into layers `E_0, ..., E_{d-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthPartition {
    node_depth: Vec<usize>,
    edge_depth: Vec<usize>,
    depth: usize,
    max_in_degree: usize,
    layers: Vec<Vec<EdgeId>>,
}

impl DepthPartition {
    /// Graph depth `d`: the length of the longest path.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_depth(&self, v: NodeId) -> usize {
        self.node_depth[v.0]
    }

    /// Depth of an edge is the depth of its tail node.
    pub fn edge_depth(&self, e: EdgeId) -> usize {
        self.edge_depth[e.0]
    }

    pub fn max_in_degree(&self) -> usize {
        self.max_in_degree
    }

    pub fn layer(&self, i: usize) -> &[EdgeId] {
        &self.layers[i]
    }

    pub fn layers(&self) -> &[Vec<EdgeId>] {
        &self.layers
    }
}

pub fn depth_partition(net: &Network) -> Result<DepthPartition, NetworkError> {
    let order = net.topological_order()?;
    let mut node_depth = vec![0usize; net.node_count()];
    for v in order {
        for &e in net.out(v) {
            let w = net.edge(e).to;
            node_depth[w.0] = node_depth[w.0].max(node_depth[v.0] + 1);
        }
    }
    let edge_depth: Vec<usize> = net.edges().iter().map(|e| node_depth[e.from.0]).collect();
    let depth = node_depth.iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); depth];
    for (i, &d) in edge_depth.iter().enumerate() {
        layers[d].push(EdgeId(i));
    }
    Ok(DepthPartition {
        node_depth,
        edge_depth,
        depth,
        max_in_degree: net.max_in_degree(),
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures;

    /// Longest path ending at each node by explicit path enumeration.
    fn brute_force_depths(net: &Network) -> Vec<usize> {
        fn walk(net: &Network, v: NodeId, len: usize, best: &mut [usize]) {
            best[v.0] = best[v.0].max(len);
            for &e in net.out(v) {
                walk(net, net.edge(e).to, len + 1, best);
            }
        }
        let mut best = vec![0; net.node_count()];
        walk(net, net.source().unwrap(), 0, &mut best);
        best
    }

    #[test]
    fn identity_depth() {
        let net = fixtures::identity();
        let p = depth_partition(&net).unwrap();
        assert_eq!(p.depth(), 1);
        assert_eq!(p.layer(0), &[EdgeId(0)]);
    }

    #[test]
    fn chain_depth() {
        let net = fixtures::chain();
        let p = depth_partition(&net).unwrap();
        assert_eq!(p.depth(), 3);
        assert!(p.layers().iter().all(|l| l.len() == 1));
    }

    #[test]
    fn butterfly_layers_match_path_enumeration() {
        let net = fixtures::butterfly();
        let p = depth_partition(&net).unwrap();
        let brute = brute_force_depths(&net);
        for v in net.node_ids() {
            assert_eq!(p.node_depth(v), brute[v.0]);
        }
        assert_eq!(p.depth(), 4);
        let sizes: Vec<usize> = p.layers().iter().map(Vec::len).collect();
        // s->a, s->b | a->c, a->t1, b->c, b->t2 | c->d | d->t1, d->t2
        assert_eq!(sizes, vec![2, 4, 1, 2]);
        assert_eq!(p.max_in_degree(), 2);
    }

    #[test]
    fn fixtures_match_path_enumeration() {
        for (name, net) in fixtures::all() {
            let p = depth_partition(&net).unwrap();
            let brute = brute_force_depths(&net);
            for v in net.node_ids() {
                assert_eq!(p.node_depth(v), brute[v.0], "{name}");
            }
            assert_eq!(p.layer(0), {
                let mut s = net.source_edges().to_vec();
                s.sort();
                s
            });
        }
    }
}
