//! Seeded random network generator for property tests and the `gen`
//! command.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{depth_partition, EdgeId, Network, NetworkBuilder, NodeId, Role};
use crate::xfer::CodingSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub nodes: usize,
    pub max_in_degree: usize,
    pub terminals: usize,
    /// Cap on the number of source edges (messages).
    pub max_messages: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            nodes: 8,
            max_in_degree: 2,
            terminals: 2,
            max_messages: 3,
            seed: 0,
        }
    }
}

/// Generates a valid network.
///
/// Nodes are created in topological order; node `v > 0` draws between one
/// and `max_in_degree` distinct predecessors among earlier nodes, taking
/// the source only while fewer than `max_messages` source edges exist.
/// The `terminals` deepest nodes become terminals, so the deepest edge
/// layer always ends in a terminal. Each terminal demands one message.
pub fn random_network(cfg: &GeneratorConfig) -> Network {
    assert!(cfg.nodes >= 2, "need at least a source and a terminal");
    assert!(cfg.max_in_degree >= 1 && cfg.max_messages >= 1);
    let terminals = cfg.terminals.clamp(1, cfg.nodes - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); cfg.nodes];
    let mut source_edges = 0;
    for v in 1..cfg.nodes {
        let source_open = source_edges < cfg.max_messages;
        let candidates: Vec<usize> = (0..v).filter(|&u| u != 0 || source_open).collect();
        let want = rng.random_range(1..=cfg.max_in_degree).min(candidates.len());
        let mut chosen: Vec<usize> = sample(&mut rng, candidates.len(), want)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        chosen.sort_unstable();
        if chosen.contains(&0) {
            source_edges += 1;
        }
        preds[v] = chosen;
    }

    let mut depth = vec![0usize; cfg.nodes];
    for v in 1..cfg.nodes {
        depth[v] = preds[v].iter().map(|&u| depth[u] + 1).max().unwrap();
    }
    let mut by_depth: Vec<usize> = (1..cfg.nodes).collect();
    by_depth.sort_by_key(|&v| (std::cmp::Reverse(depth[v]), std::cmp::Reverse(v)));
    let terminal_set: Vec<usize> = by_depth[..terminals].to_vec();

    let name = |v: usize| if v == 0 { "s".to_string() } else { format!("n{v}") };
    let mut b = NetworkBuilder::new(format!("random-{}", cfg.seed));
    for v in 0..cfg.nodes {
        let role = if v == 0 {
            Role::Source
        } else if terminal_set.contains(&v) {
            Role::Terminal
        } else {
            Role::Internal
        };
        b = b.node(name(v), role);
    }
    for v in 1..cfg.nodes {
        for &u in &preds[v] {
            b = b.edge(format!("{}-{}", name(u), name(v)), name(u), name(v));
        }
    }
    let mut sorted_terminals = terminal_set.clone();
    sorted_terminals.sort_unstable();
    let k = source_edges;
    for t in sorted_terminals {
        b = b.demand(name(t), [rng.random_range(1..=k)]);
    }
    let net = b.build().expect("generated network is well formed");
    debug_assert!(super::validate(&net).is_empty());
    debug_assert!(depth_partition(&net).unwrap().depth() < cfg.nodes);
    net
}

/// Random coefficients: every consecutive pair outside the source and every
/// beta entry uniform in `[-scale, scale]`.
pub fn random_solution(net: &Network, scale: f64, seed: u64) -> CodingSolution<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sol = CodingSolution::new();
    let source = net.source();
    for e in net.edge_ids() {
        let tail = net.edge(e).from;
        if Some(tail) == source {
            continue;
        }
        for &i in net.inc(tail) {
            sol.set_alpha(i, e, rng.random_range(-scale..=scale));
        }
    }
    for d in net.demands() {
        let beta = (0..net.in_degree(d.terminal))
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        sol.set_beta(d.terminal, d.position, beta);
    }
    sol
}

/// All consecutive edge pairs `(e, e')` through non-source nodes, in
/// canonical order of `e'` then `e`.
pub fn coefficient_slots(net: &Network) -> Vec<(EdgeId, EdgeId)> {
    let source: Option<NodeId> = net.source();
    net.edge_ids()
        .filter(|&e| Some(net.edge(e).from) != source)
        .flat_map(|e| net.inc(net.edge(e).from).iter().map(move |&i| (i, e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::validate;

    #[test]
    fn generated_networks_are_valid() {
        for seed in 0..200 {
            let cfg = GeneratorConfig {
                nodes: 3 + (seed as usize % 10),
                max_in_degree: 1 + (seed as usize % 3),
                terminals: 1 + (seed as usize % 3),
                max_messages: 3,
                seed,
            };
            let net = random_network(&cfg);
            assert!(validate(&net).is_empty(), "seed {seed}: {:?}", validate(&net));
            let p = depth_partition(&net).unwrap();
            assert!(p.depth() < cfg.nodes);
            assert!(p.max_in_degree() <= cfg.max_in_degree);
            assert!(net.message_count() <= cfg.max_messages);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GeneratorConfig {
            seed: 42,
            nodes: 10,
            ..Default::default()
        };
        assert_eq!(random_network(&cfg).to_json(), random_network(&cfg).to_json());
        let other = GeneratorConfig { seed: 43, ..cfg };
        assert_ne!(random_network(&cfg).to_json(), random_network(&other).to_json());
    }

    #[test]
    fn random_solution_is_structurally_valid() {
        let net = random_network(&GeneratorConfig {
            nodes: 12,
            max_in_degree: 3,
            seed: 7,
            ..Default::default()
        });
        let sol = random_solution(&net, 2.0, 1);
        sol.check(&net).unwrap();
        assert_eq!(sol.alpha_entries().count(), coefficient_slots(&net).len());
    }
}
