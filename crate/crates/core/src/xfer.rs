//! Transfer-matrix algebra.
//!
//! With `T[e][e'] = alpha(e -> e')` the line-graph coefficient matrix, the
//! value on edge `e` is `sum_i m_i * (I + T + ... + T^d)[e_i^s][e]`. A
//! terminal applies its `beta` vector to its incoming edges, giving the
//! per-message coefficients `gamma[t][i]` that the design tries to push
//! to 1 for the demanded message and 0 elsewhere.

use std::collections::BTreeMap;

use num_rational::BigRational;
use thiserror::Error;

use crate::network::{depth_partition, Demand, EdgeId, Network, NetworkError, NodeId};
use crate::scalar::Scalar;

/// Edge count above which [`build_t`] switches to a sparse representation.
pub const DENSE_LIMIT: usize = 512;

#[derive(Debug, Error)]
pub enum XferError {
    #[error("alpha({from} -> {to}) does not join consecutive edges")]
    NotConsecutive { from: String, to: String },
    #[error("edge index {0} is out of range")]
    EdgeOutOfRange(usize),
    #[error("beta for {terminal} demand {position}: {message}")]
    BadBeta {
        terminal: String,
        position: usize,
        message: String,
    },
    #[error("coefficient {0} is not finite")]
    NonFinite(String),
    #[error("unknown edge {0:?}")]
    UnknownEdge(String),
    #[error("unknown terminal {0:?}")]
    UnknownTerminal(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Real (or rational) linear coding coefficients for a network.
///
/// `alpha` is keyed by consecutive edge pairs `(e, e')` with
/// `head(e) = tail(e')`; absent pairs are zero. `beta` holds one vector
/// per (terminal, demand position), aligned with the terminal's canonical
/// incoming edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingSolution<S> {
    alpha: BTreeMap<(EdgeId, EdgeId), S>,
    beta: BTreeMap<(NodeId, usize), Vec<S>>,
}

impl<S> Default for CodingSolution<S> {
    fn default() -> Self {
        CodingSolution {
            alpha: BTreeMap::new(),
            beta: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> CodingSolution<S> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn alpha(&self, from: EdgeId, to: EdgeId) -> S {
        self.alpha.get(&(from, to)).cloned().unwrap_or_else(S::zero)
    }

    pub fn alpha_entries(&self) -> impl Iterator<Item = (EdgeId, EdgeId, &S)> {
        self.alpha.iter().map(|(&(a, b), v)| (a, b, v))
    }

    pub fn set_alpha(&mut self, from: EdgeId, to: EdgeId, value: S) {
        self.alpha.insert((from, to), value);
    }

    /// Beta vector of one demand, aligned with `inc(terminal)`.
    pub fn beta(&self, terminal: NodeId, position: usize) -> Option<&[S]> {
        self.beta.get(&(terminal, position)).map(Vec::as_slice)
    }

    pub fn beta_entries(&self) -> impl Iterator<Item = (NodeId, usize, &[S])> {
        self.beta.iter().map(|(&(t, p), v)| (t, p, v.as_slice()))
    }

    pub fn set_beta(&mut self, terminal: NodeId, position: usize, coeffs: Vec<S>) {
        self.beta.insert((terminal, position), coeffs);
    }

    /// Sets a single beta coefficient, sizing the vector to `inc(terminal)`.
    pub fn set_beta_on_edge(
        &mut self,
        net: &Network,
        terminal: NodeId,
        position: usize,
        edge: EdgeId,
        value: S,
    ) -> Result<(), XferError> {
        let inc = net.inc(terminal);
        let r = inc.iter().position(|&e| e == edge).ok_or_else(|| XferError::BadBeta {
            terminal: net.node(terminal).name.clone(),
            position,
            message: format!("edge {} is not an incoming edge", net.edge(edge).name),
        })?;
        let v = self
            .beta
            .entry((terminal, position))
            .or_insert_with(|| vec![S::zero(); inc.len()]);
        v[r] = value;
        Ok(())
    }

    /// Name-based alpha setter for fixtures and file loading.
    pub fn set_alpha_named(&mut self, net: &Network, from: &str, to: &str, value: S) -> Result<(), XferError> {
        let a = net.edge_by_name(from).ok_or_else(|| XferError::UnknownEdge(from.into()))?;
        let b = net.edge_by_name(to).ok_or_else(|| XferError::UnknownEdge(to.into()))?;
        self.set_alpha(a, b, value);
        Ok(())
    }

    /// Name-based beta setter; `position` is zero-based.
    pub fn set_beta_named(
        &mut self,
        net: &Network,
        terminal: &str,
        position: usize,
        edge: &str,
        value: S,
    ) -> Result<(), XferError> {
        let t = net
            .node_by_name(terminal)
            .ok_or_else(|| XferError::UnknownTerminal(terminal.into()))?;
        let e = net.edge_by_name(edge).ok_or_else(|| XferError::UnknownEdge(edge.into()))?;
        self.set_beta_on_edge(net, t, position, e, value)
    }

    /// Structural validity against `net`.
    pub fn check(&self, net: &Network) -> Result<(), XferError> {
        let m = net.edge_count();
        for (&(a, b), v) in &self.alpha {
            if a.0 >= m {
                return Err(XferError::EdgeOutOfRange(a.0));
            }
            if b.0 >= m {
                return Err(XferError::EdgeOutOfRange(b.0));
            }
            if net.edge(a).to != net.edge(b).from {
                return Err(XferError::NotConsecutive {
                    from: net.edge(a).name.clone(),
                    to: net.edge(b).name.clone(),
                });
            }
            if !v.is_finite_value() {
                return Err(XferError::NonFinite(format!(
                    "alpha({} -> {})",
                    net.edge(a).name,
                    net.edge(b).name
                )));
            }
        }
        for (&(t, pos), v) in &self.beta {
            let bad = |message: String| XferError::BadBeta {
                terminal: if t.0 < net.node_count() {
                    net.node(t).name.clone()
                } else {
                    format!("#{}", t.0)
                },
                position: pos + 1,
                message,
            };
            let demands = net.demand_map().get(&t).ok_or_else(|| bad("not a terminal with demands".into()))?;
            if pos >= demands.len() {
                return Err(bad("no such demand position".into()));
            }
            if v.len() != net.in_degree(t) {
                return Err(bad(format!("expected {} coefficients, got {}", net.in_degree(t), v.len())));
            }
            if v.iter().any(|x| !x.is_finite_value()) {
                return Err(XferError::NonFinite(format!("beta of {}", net.node(t).name)));
            }
        }
        Ok(())
    }

    /// Largest `|alpha(e -> e')|` over the solution.
    pub fn alpha_max(&self) -> S {
        self.alpha
            .values()
            .map(|v| v.abs())
            .fold(S::zero(), |m, v| if v > m { v } else { m })
    }

    pub fn map<T, F>(&self, f: F) -> CodingSolution<T>
    where
        F: Fn(&S) -> T,
    {
        CodingSolution {
            alpha: self.alpha.iter().map(|(k, v)| (*k, f(v))).collect(),
            beta: self
                .beta
                .iter()
                .map(|(k, v)| (*k, v.iter().map(&f).collect()))
                .collect(),
        }
    }

    /// Replaces every beta vector.
    pub fn with_beta(mut self, beta: BTreeMap<(NodeId, usize), Vec<S>>) -> Self {
        self.beta = beta;
        self
    }
}

impl CodingSolution<f64> {
    /// Exact rational image of a binary64 solution.
    pub fn to_exact(&self) -> CodingSolution<BigRational> {
        self.map(|&x| BigRational::from_float(x).expect("finite coefficient"))
    }
}

/// The line-graph coefficient matrix `T`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransferMatrix<S> {
    Dense { n: usize, data: Vec<S> },
    Sparse { n: usize, rows: Vec<Vec<(usize, S)>> },
}

impl<S: Scalar> TransferMatrix<S> {
    pub fn dim(&self) -> usize {
        match self {
            TransferMatrix::Dense { n, .. } | TransferMatrix::Sparse { n, .. } => *n,
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, TransferMatrix::Sparse { .. })
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        match self {
            TransferMatrix::Dense { n, data } => data[i * n + j].clone(),
            TransferMatrix::Sparse { rows, .. } => rows[i]
                .iter()
                .find(|(c, _)| *c == j)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(S::zero),
        }
    }

    /// Row vector times matrix, `v * T`.
    pub fn left_mul(&self, v: &[S]) -> Vec<S> {
        let n = self.dim();
        let mut out = vec![S::zero(); n];
        match self {
            TransferMatrix::Dense { data, .. } => {
                for (i, vi) in v.iter().enumerate() {
                    if vi.is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        let t = &data[i * n + j];
                        if !t.is_zero() {
                            out[j] = out[j].clone() + vi.clone() * t.clone();
                        }
                    }
                }
            }
            TransferMatrix::Sparse { rows, .. } => {
                for (i, vi) in v.iter().enumerate() {
                    if vi.is_zero() {
                        continue;
                    }
                    for (j, t) in &rows[i] {
                        out[*j] = out[*j].clone() + vi.clone() * t.clone();
                    }
                }
            }
        }
        out
    }

    /// Dense copy of the entries.
    pub fn to_dense(&self) -> Vec<S> {
        let n = self.dim();
        match self {
            TransferMatrix::Dense { data, .. } => data.clone(),
            TransferMatrix::Sparse { rows, .. } => {
                let mut data = vec![S::zero(); n * n];
                for (i, row) in rows.iter().enumerate() {
                    for (j, v) in row {
                        data[i * n + j] = v.clone();
                    }
                }
                data
            }
        }
    }

    /// Matrix product, returned dense.
    pub fn matmul(&self, other: &TransferMatrix<S>) -> TransferMatrix<S> {
        let n = self.dim();
        let a = self.to_dense();
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            data.extend(other.left_mul(&a[i * n..(i + 1) * n]));
        }
        TransferMatrix::Dense { n, data }
    }

    pub fn identity(n: usize) -> TransferMatrix<S> {
        let mut data = vec![S::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = S::one();
        }
        TransferMatrix::Dense { n, data }
    }

    pub fn pow(&self, j: u32) -> TransferMatrix<S> {
        let mut acc = TransferMatrix::identity(self.dim());
        for _ in 0..j {
            acc = acc.matmul(self);
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        match self {
            TransferMatrix::Dense { data, .. } => data.iter().all(|v| v.is_zero()),
            TransferMatrix::Sparse { rows, .. } => rows.iter().flatten().all(|(_, v)| v.is_zero()),
        }
    }
}

/// Builds `T` with `T[e][e'] = alpha(e -> e')`, dense up to
/// [`DENSE_LIMIT`] edges and sparse above.
pub fn build_t<S: Scalar>(net: &Network, sol: &CodingSolution<S>) -> Result<TransferMatrix<S>, XferError> {
    build_t_with(net, sol, net.edge_count() > DENSE_LIMIT)
}

/// [`build_t`] with an explicit representation choice.
pub fn build_t_with<S: Scalar>(
    net: &Network,
    sol: &CodingSolution<S>,
    sparse: bool,
) -> Result<TransferMatrix<S>, XferError> {
    sol.check(net)?;
    let n = net.edge_count();
    if sparse {
        let mut rows = vec![Vec::new(); n];
        for (a, b, v) in sol.alpha_entries() {
            if !v.is_zero() {
                rows[a.0].push((b.0, v.clone()));
            }
        }
        Ok(TransferMatrix::Sparse { n, rows })
    } else {
        let mut data = vec![S::zero(); n * n];
        for (a, b, v) in sol.alpha_entries() {
            data[a.0 * n + b.0] = v.clone();
        }
        Ok(TransferMatrix::Dense { n, data })
    }
}

/// Rows of `I + T + ... + T^d` belonging to the source edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GainMatrix<S> {
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> GainMatrix<S> {
    /// Gain from message `i` to edge `e`.
    pub fn get(&self, message: usize, e: EdgeId) -> &S {
        &self.rows[message][e.0]
    }

    pub fn row(&self, message: usize) -> &[S] {
        &self.rows[message]
    }

    pub fn message_count(&self) -> usize {
        self.rows.len()
    }
}

/// Computes the source rows of `sum_{j=0}^{d} T^j` by repeated row-vector
/// products with `T`.
pub fn gain_matrix<S: Scalar>(net: &Network, sol: &CodingSolution<S>) -> Result<GainMatrix<S>, XferError> {
    let t = build_t(net, sol)?;
    let d = depth_partition(net)?.depth();
    let n = net.edge_count();
    let rows = net
        .source_edges()
        .iter()
        .map(|&e| {
            let mut power = vec![S::zero(); n];
            power[e.0] = S::one();
            let mut acc = power.clone();
            for _ in 0..d {
                power = t.left_mul(&power);
                for (a, p) in acc.iter_mut().zip(&power) {
                    *a = a.clone() + p.clone();
                }
            }
            acc
        })
        .collect();
    Ok(GainMatrix { rows })
}

/// Per-demand message coefficients and the derived deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandGamma<S> {
    pub demand: Demand,
    /// `gamma[i]` is the coefficient of message `i` at this demand.
    pub gamma: Vec<S>,
    /// `|gamma[w] - 1| + sum_{i != w} |gamma[i]|`.
    pub deviation: S,
    /// `(gamma[w] - 1)^2 + sum_{i != w} gamma[i]^2`.
    pub squared_error: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaProfile<S> {
    pub demands: Vec<DemandGamma<S>>,
    /// Objective `F`: sum of squared deviations over all demands.
    pub objective: S,
    /// Approximation factor: maximal deviation over all demands.
    pub gamma_max: S,
}

impl<S: Scalar> GammaProfile<S> {
    pub fn gamma(&self, terminal: NodeId, position: usize, message: usize) -> Option<&S> {
        self.demands
            .iter()
            .find(|d| d.demand.terminal == terminal && d.demand.position == position)
            .map(|d| &d.gamma[message])
    }

    pub fn is_exact(&self) -> bool {
        self.gamma_max.is_zero()
    }
}

/// Evaluates gamma coefficients, the objective and the approximation factor.
///
/// `gamma[t][i] = sum_r beta[t][r] * G[i][e'_r]` over the terminal's
/// incoming edges `e'_r`, with `G` from [`gain_matrix`]. A demand with no
/// beta vector contributes all-zero gammas.
pub fn gamma_profile<S: Scalar>(net: &Network, sol: &CodingSolution<S>) -> Result<GammaProfile<S>, XferError> {
    let gain = gain_matrix(net, sol)?;
    let k = net.message_count();
    let mut demands = Vec::with_capacity(net.demands().len());
    for &d in net.demands() {
        let inc = net.inc(d.terminal);
        let mut gamma = vec![S::zero(); k];
        if let Some(beta) = sol.beta(d.terminal, d.position) {
            for (b, &e) in beta.iter().zip(inc) {
                if b.is_zero() {
                    continue;
                }
                for (i, g) in gamma.iter_mut().enumerate() {
                    *g = g.clone() + b.clone() * gain.get(i, e).clone();
                }
            }
        }
        demands.push(demand_gamma(d, gamma));
    }
    let objective = demands
        .iter()
        .fold(S::zero(), |acc, d| acc + d.squared_error.clone());
    let gamma_max = demands
        .iter()
        .map(|d| d.deviation.clone())
        .fold(S::zero(), |m, v| if v > m { v } else { m });
    Ok(GammaProfile {
        demands,
        objective,
        gamma_max,
    })
}

pub(crate) fn demand_gamma<S: Scalar>(demand: Demand, gamma: Vec<S>) -> DemandGamma<S> {
    let mut deviation = S::zero();
    let mut squared_error = S::zero();
    for (i, g) in gamma.iter().enumerate() {
        let r = if i == demand.message { g.clone() - S::one() } else { g.clone() };
        deviation = deviation + r.abs();
        squared_error = squared_error + r.clone() * r;
    }
    DemandGamma {
        demand,
        gamma,
        deviation,
        squared_error,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{fixtures, NetworkBuilder};
    use crate::scalar::rational;

    fn short_chain() -> Network {
        NetworkBuilder::new("chain2")
            .source("s")
            .internal("a")
            .terminal("t")
            .edge("e1", "s", "a")
            .edge("e2", "a", "t")
            .demand("t", [1])
            .build()
            .unwrap()
    }

    fn two_parallel() -> Network {
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
    fn identity_t_is_zero() {
        let net = fixtures::identity();
        let t = build_t(&net, &CodingSolution::<f64>::new()).unwrap();
        assert_eq!(t.dim(), 1);
        assert!(t.is_zero());
        let g = gain_matrix(&net, &CodingSolution::<f64>::new()).unwrap();
        assert_eq!(g.row(0), &[1.0]);
    }

    #[test]
    fn chain_gain() {
        let net = short_chain();
        let mut sol = CodingSolution::new();
        sol.set_alpha_named(&net, "e1", "e2", 2.0).unwrap();
        let t = build_t(&net, &sol).unwrap();
        assert_eq!(t.to_dense(), vec![0.0, 2.0, 0.0, 0.0]);
        assert!(t.pow(2).is_zero());
        let g = gain_matrix(&net, &sol).unwrap();
        assert_eq!(g.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn parallel_edges_gamma_equals_beta() {
        let net = two_parallel();
        let t = net.node_by_name("t").unwrap();
        let mut sol = CodingSolution::<f64>::new();
        sol.set_beta(t, 0, vec![1.0, 0.1]);
        let p = gamma_profile(&net, &sol).unwrap();
        assert_eq!(p.demands[0].gamma, vec![1.0, 0.1]);
        assert!((p.objective - 0.01).abs() < 1e-15);
        assert!((p.gamma_max - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identity_exact_profile() {
        let net = fixtures::identity();
        let sol = fixtures::identity_solution::<f64>(&net);
        let p = gamma_profile(&net, &sol).unwrap();
        assert_eq!(p.demands[0].gamma, vec![1.0]);
        assert_eq!(p.objective, 0.0);
        assert!(p.is_exact());
    }

    #[test]
    fn butterfly_nilpotent_exactly_over_rationals() {
        let net = fixtures::butterfly();
        let sol = fixtures::butterfly_solution::<BigRational>(&net);
        let t = build_t(&net, &sol).unwrap();
        let d = depth_partition(&net).unwrap().depth() as u32;
        assert!(!t.pow(d - 1).is_zero());
        assert!(t.pow(d).is_zero());
        assert!(t.pow(d + 1).is_zero());
        let p = gamma_profile(&net, &sol).unwrap();
        assert!(p.is_exact());
        assert_eq!(p.objective, rational(0, 1));
    }

    #[test]
    fn dense_and_sparse_agree() {
        let net = fixtures::g2();
        let sol = fixtures::g2_published_solution(&net);
        let dense = build_t_with(&net, &sol, false).unwrap();
        let sparse = build_t_with(&net, &sol, true).unwrap();
        assert!(sparse.is_sparse());
        assert_eq!(dense.to_dense(), sparse.to_dense());
        let v: Vec<f64> = (0..net.edge_count()).map(|i| i as f64 - 3.5).collect();
        assert_eq!(dense.left_mul(&v), sparse.left_mul(&v));
    }

    #[test]
    fn rejects_non_consecutive_alpha() {
        let net = short_chain();
        let mut sol = CodingSolution::new();
        sol.set_alpha(EdgeId(1), EdgeId(0), 1.0);
        assert!(matches!(build_t(&net, &sol), Err(XferError::NotConsecutive { .. })));
        let mut sol = CodingSolution::new();
        sol.set_alpha(EdgeId(0), EdgeId(7), 1.0);
        assert!(matches!(build_t(&net, &sol), Err(XferError::EdgeOutOfRange(7))));
    }

    #[test]
    fn rejects_bad_beta() {
        let net = two_parallel();
        let t = net.node_by_name("t").unwrap();
        let mut sol = CodingSolution::new();
        sol.set_beta(t, 0, vec![1.0]);
        assert!(matches!(sol.check(&net), Err(XferError::BadBeta { .. })));
        let mut sol = CodingSolution::new();
        sol.set_beta(t, 1, vec![1.0, 0.0]);
        assert!(sol.check(&net).is_err());
        let mut sol = CodingSolution::new();
        sol.set_beta(t, 0, vec![f64::NAN, 0.0]);
        assert!(matches!(sol.check(&net), Err(XferError::NonFinite(_))));
    }

    #[test]
    fn f_zero_iff_gamma_zero() {
        let net = fixtures::butterfly();
        let exact = fixtures::butterfly_solution::<f64>(&net);
        let p = gamma_profile(&net, &exact).unwrap();
        assert_eq!((p.objective, p.gamma_max), (0.0, 0.0));
        let mut inexact = exact.clone();
        let e = net.edge_by_name("c-d").unwrap();
        let f = net.edge_by_name("d-t1").unwrap();
        inexact.set_alpha(e, f, 1.001);
        let p = gamma_profile(&net, &inexact).unwrap();
        assert!(p.objective > 0.0 && p.gamma_max > 0.0);
    }
}
