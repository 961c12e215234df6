//! Built-in networks and their known coding solutions.
//!
//! `g1`, `g2` and `g3` are reconstructions: the original drawings are not
//! available, so the topologies are rebuilt from the textual description
//! of the coding schemes (see `fixtures/README.md`).

use crate::network::{Network, NetworkBuilder};
use crate::scalar::Scalar;
use crate::xfer::CodingSolution;

pub const NAMES: [&str; 6] = ["identity", "chain", "butterfly", "g1", "g2", "g3"];

pub fn by_name(name: &str) -> Option<Network> {
    Some(match name {
        "identity" => identity(),
        "chain" => chain(),
        "butterfly" => butterfly(),
        "g1" => g1(),
        "g2" => g2(),
        "g3" => g3(),
        _ => return None,
    })
}

pub fn all() -> Vec<(&'static str, Network)> {
    NAMES.iter().map(|&n| (n, by_name(n).unwrap())).collect()
}

/// Known solution for a fixture: exact for all but `g2`/`g3`, where the
/// published approximate coefficient table is used.
pub fn known_solution(name: &str, net: &Network) -> Option<CodingSolution<f64>> {
    Some(match name {
        "identity" => identity_solution(net),
        "chain" => chain_solution(net),
        "butterfly" => butterfly_solution(net),
        "g1" => g1_solution(net),
        "g2" => g2_published_solution(net),
        "g3" => g3_solution(net),
        _ => return None,
    })
}

fn c<S: Scalar>(x: f64) -> S {
    S::from_f64_lossless(x).expect("fixture coefficient representable")
}

/// `s -> t` over a single edge.
pub fn identity() -> Network {
    NetworkBuilder::new("identity")
        .source("s")
        .terminal("t")
        .edge("e1", "s", "t")
        .source_order(["e1"])
        .demand("t", [1])
        .build()
        .expect("identity fixture")
}

pub fn identity_solution<S: Scalar>(net: &Network) -> CodingSolution<S> {
    let mut sol = CodingSolution::new();
    sol.set_beta_named(net, "t", 0, "e1", c(1.0)).unwrap();
    sol
}

/// `s -> a -> b -> t`.
pub fn chain() -> Network {
    NetworkBuilder::new("chain")
        .source("s")
        .internal("a")
        .internal("b")
        .terminal("t")
        .edge("e1", "s", "a")
        .edge("e2", "a", "b")
        .edge("e3", "b", "t")
        .source_order(["e1"])
        .demand("t", [1])
        .build()
        .expect("chain fixture")
}

pub fn chain_solution<S: Scalar>(net: &Network) -> CodingSolution<S> {
    let mut sol = CodingSolution::new();
    sol.set_alpha_named(net, "e1", "e2", c(1.0)).unwrap();
    sol.set_alpha_named(net, "e2", "e3", c(1.0)).unwrap();
    sol.set_beta_named(net, "t", 0, "e3", c(1.0)).unwrap();
    sol
}

/// The seven-node butterfly; both sinks demand both messages.
pub fn butterfly() -> Network {
    NetworkBuilder::new("butterfly")
        .source("s")
        .internal("a")
        .internal("b")
        .internal("c")
        .internal("d")
        .terminal("t1")
        .terminal("t2")
        .edge("s-a", "s", "a")
        .edge("s-b", "s", "b")
        .edge("a-c", "a", "c")
        .edge("a-t1", "a", "t1")
        .edge("b-c", "b", "c")
        .edge("b-t2", "b", "t2")
        .edge("c-d", "c", "d")
        .edge("d-t1", "d", "t1")
        .edge("d-t2", "d", "t2")
        .source_order(["s-a", "s-b"])
        .demand("t1", [1, 2])
        .demand("t2", [1, 2])
        .build()
        .expect("butterfly fixture")
}

/// Forward both messages, send their sum over the bottleneck, decode by
/// subtraction.
pub fn butterfly_solution<S: Scalar>(net: &Network) -> CodingSolution<S> {
    let mut sol = CodingSolution::new();
    for (a, b) in [
        ("s-a", "a-c"),
        ("s-a", "a-t1"),
        ("s-b", "b-c"),
        ("s-b", "b-t2"),
        ("a-c", "c-d"),
        ("b-c", "c-d"),
        ("c-d", "d-t1"),
        ("c-d", "d-t2"),
    ] {
        sol.set_alpha_named(net, a, b, c(1.0)).unwrap();
    }
    for (t, pos, e, v) in [
        ("t1", 0, "a-t1", 1.0),
        ("t1", 1, "a-t1", -1.0),
        ("t1", 1, "d-t1", 1.0),
        ("t2", 0, "b-t2", -1.0),
        ("t2", 0, "d-t2", 1.0),
        ("t2", 1, "b-t2", 1.0),
    ] {
        sol.set_beta_named(net, t, pos, e, c(v)).unwrap();
    }
    sol
}

const G1_EDGES: [(&str, &str, &str); 31] = [
    ("s-r1", "s", "r1"),
    ("s-r2", "s", "r2"),
    ("s-r3", "s", "r3"),
    ("s-r4", "s", "r4"),
    ("s-r5", "s", "r5"),
    ("r2-v1", "r2", "v1"),
    ("r3-v1", "r3", "v1"),
    ("r1-v2", "r1", "v2"),
    ("r2-v2", "r2", "v2"),
    ("r1-v3", "r1", "v3"),
    ("r3-v3", "r3", "v3"),
    ("r4-x", "r4", "x"),
    ("r5-x", "r5", "x"),
    ("r1-y", "r1", "y"),
    ("r4-y", "r4", "y"),
    ("v2-t1", "v2", "t1"),
    ("r1-t1", "r1", "t1"),
    ("v3-t2", "v3", "t2"),
    ("r3-t2", "r3", "t2"),
    ("v1-t3", "v1", "t3"),
    ("r2-t3", "r2", "t3"),
    ("v1-v4", "v1", "v4"),
    ("v2-v4", "v2", "v4"),
    ("v3-v4", "v3", "v4"),
    ("x-t5", "x", "t5"),
    ("r4-t5", "r4", "t5"),
    ("x-t6", "x", "t6"),
    ("r5-t6", "r5", "t6"),
    ("x-t7", "x", "t7"),
    ("y-t7", "y", "t7"),
    ("r1-t7", "r1", "t7"),
];

fn g1_builder(name: &str) -> NetworkBuilder {
    let mut b = NetworkBuilder::new(name).source("s");
    for n in ["r1", "r2", "r3", "r4", "r5", "v1", "v2", "v3", "x", "y"] {
        b = b.internal(n);
    }
    for t in ["t1", "t2", "t3", "v4", "t5", "t6", "t7"] {
        b = b.terminal(t);
    }
    for (e, from, to) in &G1_EDGES {
        b = b.edge(*e, *from, *to);
    }
    b.source_order(["s-r1", "s-r2", "s-r3", "s-r4", "s-r5"])
        .demand("t1", [2])
        .demand("t2", [1])
        .demand("t3", [3])
        .demand("v4", [1])
        .demand("t5", [5])
        .demand("t6", [4])
        .demand("t7", [5])
}

/// Five messages, seven single-demand terminals. Internal nodes add their
/// inputs; `v4` recovers `m1` as `(-v1 + v2 + v3) / 2` from the pairwise
/// sums `v1 = m2 + m3`, `v2 = m1 + m2`, `v3 = m1 + m3`.
pub fn g1() -> Network {
    g1_builder("g1").build().expect("g1 fixture")
}

fn add_g1_solution<S: Scalar>(net: &Network, sol: &mut CodingSolution<S>) {
    for e in net.edge_ids() {
        let tail = net.edge(e).from;
        if net.source() == Some(tail) {
            continue;
        }
        if G1_EDGES.iter().all(|(n, _, _)| *n != net.edge(e).name) {
            continue;
        }
        for &i in net.inc(tail) {
            sol.set_alpha(i, e, c(1.0));
        }
    }
    for (t, terms) in [
        ("t1", &[("v2-t1", 1.0), ("r1-t1", -1.0)][..]),
        ("t2", &[("v3-t2", 1.0), ("r3-t2", -1.0)]),
        ("t3", &[("v1-t3", 1.0), ("r2-t3", -1.0)]),
        ("v4", &[("v1-v4", -0.5), ("v2-v4", 0.5), ("v3-v4", 0.5)]),
        ("t5", &[("x-t5", 1.0), ("r4-t5", -1.0)]),
        ("t6", &[("x-t6", 1.0), ("r5-t6", -1.0)]),
        ("t7", &[("x-t7", 1.0), ("y-t7", -1.0), ("r1-t7", 1.0)]),
    ] {
        for &(e, v) in terms {
            sol.set_beta_named(net, t, 0, e, c(v)).unwrap();
        }
    }
}

pub fn g1_solution<S: Scalar>(net: &Network) -> CodingSolution<S> {
    let mut sol = CodingSolution::new();
    add_g1_solution(net, &mut sol);
    sol
}

const G2_NODES: [&str; 11] = [
    "r1", "r2", "r3", "n5", "n6", "a5", "a6", "n11", "n12", "a11", "a12",
];

fn g2_edges(prefix: &str) -> Vec<(String, String, String)> {
    let p = |s: &str| format!("{prefix}{s}");
    // Source repeaters are shared with g1 inside g3, so they are never prefixed.
    let r = |s: &str| s.to_string();
    vec![
        (p("e1"), r("r1"), p("n5")),
        (p("e2"), r("r2"), p("n5")),
        (p("e3"), r("r2"), p("n6")),
        (p("e4"), r("r3"), p("n6")),
        (p("e5"), p("n5"), p("a5")),
        (p("e6"), p("n6"), p("a6")),
        (p("e7"), p("a5"), p("n11")),
        (p("e8"), p("a6"), p("n11")),
        (p("e9"), p("a5"), p("n12")),
        (p("e10"), r("r3"), p("n12")),
        (p("e11"), p("n11"), p("a11")),
        (p("e12"), p("n12"), p("a12")),
        (p("r1-t1"), r("r1"), p("t1")),
        (p("a11-t1"), p("a11"), p("t1")),
        (p("a11-t2"), p("a11"), p("t2")),
        (p("a12-t2"), p("a12"), p("t2")),
        (p("a12-t3"), p("a12"), p("t3")),
        (p("a6-t3"), p("a6"), p("t3")),
    ]
}

/// Three messages, three terminals demanding `m3`, `m2`, `m1`.
///
/// Combining nodes: `e5 <- (e1: m1, e2: m2)`, `e6 <- (e3: m2, e4: m3)`,
/// `e11 <- (e7: e5, e8: e6)`, `e12 <- (e9: e5, e10: m3)`. Terminal
/// `t1` sees `(m1, e11)`, `t2` sees `(e11, e12)`, `t3` sees `(e12, e6)`.
/// Over GF(2) with unit coefficients this is the Fano configuration
/// `a+b, b+c, a+c, a+b+c`. All other nodes repeat their single input.
pub fn g2() -> Network {
    let mut b = NetworkBuilder::new("g2").source("s");
    for n in G2_NODES {
        b = b.internal(n);
    }
    for t in ["t1", "t2", "t3"] {
        b = b.terminal(t);
    }
    b = b.edge("s1", "s", "r1").edge("s2", "s", "r2").edge("s3", "s", "r3");
    for (e, from, to) in g2_edges("") {
        b = b.edge(e, from, to);
    }
    b.source_order(["s1", "s2", "s3"])
        .demand("t1", [3])
        .demand("t2", [2])
        .demand("t3", [1])
        .build()
        .expect("g2 fixture")
}

/// Published approximate coefficients for the combining nodes and
/// terminals of `g2`; repeaters use coefficient 1.
pub const G2_ALPHA: [(&str, &str, f64); 8] = [
    ("e1", "e5", 0.0332528),
    ("e2", "e5", -11.8712),
    ("e3", "e6", 16.3384),
    ("e4", "e6", 2.69746),
    ("e7", "e11", 2.79007),
    ("e8", "e11", 2.02721),
    ("e9", "e12", -1.16509),
    ("e10", "e12", 2.28349),
];

pub const G2_BETA: [(&str, &str, f64); 6] = [
    ("t1", "r1-t1", -0.0169705),
    ("t1", "a11-t1", 0.182872),
    ("t2", "a11-t2", -0.030174),
    ("t2", "a12-t2", 0.0722992),
    ("t3", "a12-t3", -25.8106),
    ("t3", "a6-t3", 21.8495),
];

/// Approximation factor reported for the published `g2` coefficients.
pub const G2_PUBLISHED_GAMMA: f64 = 0.00572545;

fn add_g2_solution(net: &Network, sol: &mut CodingSolution<f64>, prefix: &str) {
    let p = |s: &str| format!("{prefix}{s}");
    for (a, b, v) in G2_ALPHA {
        sol.set_alpha_named(net, &p(a), &p(b), v).unwrap();
    }
    // Repeaters: every node of the g2 part with a single incoming edge.
    for (name, _, _) in g2_edges(prefix) {
        let e = net.edge_by_name(&name).unwrap();
        let tail = net.edge(e).from;
        if net.in_degree(tail) == 1 && net.source() != Some(tail) {
            sol.set_alpha(net.inc(tail)[0], e, 1.0);
        }
    }
    for (t, e, v) in G2_BETA {
        sol.set_beta_named(net, &p(t), 0, &p(e), v).unwrap();
    }
}

pub fn g2_published_solution(net: &Network) -> CodingSolution<f64> {
    let mut sol = CodingSolution::new();
    add_g2_solution(net, &mut sol, "");
    // Source repeaters feeding g2 edges.
    for r in ["r1", "r2", "r3"] {
        let v = net.node_by_name(r).unwrap();
        let input = net.inc(v)[0];
        for &e in net.out(v) {
            sol.set_alpha(input, e, 1.0);
        }
    }
    sol
}

/// `g1` and `g2` sharing one source: the `g2` part reads `m1..m3` from the
/// same repeaters as `g1`, its own nodes carry an `f-` prefix.
pub fn g3() -> Network {
    let mut b = g1_builder("g3");
    for n in &G2_NODES[3..] {
        b = b.internal(format!("f-{n}"));
    }
    for t in ["t1", "t2", "t3"] {
        b = b.terminal(format!("f-{t}"));
    }
    for (e, from, to) in g2_edges("f-") {
        b = b.edge(e, from, to);
    }
    b.demand("f-t1", [3])
        .demand("f-t2", [2])
        .demand("f-t3", [1])
        .build()
        .expect("g3 fixture")
}

pub fn g3_solution(net: &Network) -> CodingSolution<f64> {
    let mut sol = CodingSolution::new();
    add_g1_solution(net, &mut sol);
    add_g2_solution(net, &mut sol, "f-");
    sol
}
