//! Coefficient search: minimize `F` over alpha and beta.
//!
//! Beta enters `F` quadratically, so for any alpha the optimal beta is a
//! least-squares solution. The search runs L-BFGS on alpha over the reduced
//! objective `F(alpha, beta*(alpha))`, whose gradient equals the partial
//! gradient at `beta*`, then polishes each restart with Levenberg-Marquardt
//! on the joint residual.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::network::generate::coefficient_slots;
use crate::network::{validate, Demand, EdgeId, Network, NetworkError, NodeId};
use crate::xfer::{gamma_profile, CodingSolution, GammaProfile, XferError};

/// Relative singular-value cutoff for the minimum-norm beta solve.
pub const RANK_TOL: f64 = 1e-10;

const LBFGS_MEMORY: usize = 8;
const ARMIJO: f64 = 1e-4;
const POLISH_ITERS: usize = 200;
/// Decoding coefficients above this are reported: a small gamma bought with
/// them is expensive in fractional digits.
pub const BETA_WARN: f64 = 1e3;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver config: {0}")]
    Config(String),
    #[error("network is invalid: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solution(#[from] XferError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol_f: f64,
    pub tol_step: f64,
    pub seed: u64,
    pub init_scale: f64,
    /// Bound on `|alpha|` during the search; `None` leaves it free.
    pub alpha_cap: Option<f64>,
    /// Fix alpha to 1 at nodes with a single incoming edge.
    pub pin_repeaters: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            restarts: 32,
            max_iters: 2000,
            tol_f: 1e-12,
            tol_step: 1e-10,
            seed: 0,
            init_scale: 2.0,
            alpha_cap: Some(64.0),
            pin_repeaters: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::Config(m.to_string()));
        if self.restarts == 0 {
            return bad("restarts must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.tol_f >= 0.0) || !(self.tol_step >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if !(self.init_scale > 0.0) || !self.init_scale.is_finite() {
            return bad("init_scale must be positive");
        }
        if let Some(c) = self.alpha_cap {
            if !(c > 0.0) {
                return bad("alpha_cap must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub restart: usize,
    pub iteration: usize,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub best: CodingSolution<f64>,
    pub profile: GammaProfile<f64>,
    pub best_restart: usize,
    pub f_trace: Vec<TracePoint>,
    pub wall_time: Duration,
    pub converged: bool,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
enum Coef {
    Free(usize),
    Fixed(f64),
}

#[derive(Debug, Clone)]
struct Step {
    edge: usize,
    inputs: Vec<(usize, Coef)>,
}

#[derive(Debug, Clone)]
struct DemandRows {
    demand: Demand,
    inc: Vec<usize>,
}

/// `F` as a function of the free alpha coefficients (and beta).
///
/// Beta is passed as one vector per demand, in the network's demand order,
/// aligned with the terminal's incoming edges.
#[derive(Debug, Clone)]
pub struct Objective {
    k: usize,
    edge_count: usize,
    sources: Vec<(usize, usize)>,
    steps: Vec<Step>,
    demands: Vec<DemandRows>,
    slots: Vec<(EdgeId, EdgeId)>,
    pinned: Vec<(EdgeId, EdgeId)>,
}

impl Objective {
    pub fn new(net: &Network, pin_repeaters: bool) -> Result<Self, SolverError> {
        let order = net.topological_edges()?;
        let source = net.source();
        let mut slots = Vec::new();
        let mut pinned = Vec::new();
        let mut index = BTreeMap::new();
        for (i, e) in coefficient_slots(net) {
            if pin_repeaters && net.in_degree(net.edge(e).from) == 1 {
                pinned.push((i, e));
            } else {
                index.insert((i, e), slots.len());
                slots.push((i, e));
            }
        }
        let steps = order
            .into_iter()
            .filter(|&e| Some(net.edge(e).from) != source)
            .map(|e| Step {
                edge: e.0,
                inputs: net
                    .inc(net.edge(e).from)
                    .iter()
                    .map(|&i| {
                        let c = match index.get(&(i, e)) {
                            Some(&s) => Coef::Free(s),
                            None => Coef::Fixed(1.0),
                        };
                        (i.0, c)
                    })
                    .collect(),
            })
            .collect();
        Ok(Objective {
            k: net.message_count(),
            edge_count: net.edge_count(),
            sources: net.source_edges().iter().enumerate().map(|(i, e)| (e.0, i)).collect(),
            steps,
            demands: net
                .demands()
                .iter()
                .map(|&d| DemandRows {
                    demand: d,
                    inc: net.inc(d.terminal).iter().map(|e| e.0).collect(),
                })
                .collect(),
            slots,
            pinned,
        })
    }

    /// Free coefficient slots, in the order of the alpha vector.
    pub fn slots(&self) -> &[(EdgeId, EdgeId)] {
        &self.slots
    }

    /// Slots held at 1.
    pub fn pinned(&self) -> &[(EdgeId, EdgeId)] {
        &self.pinned
    }

    pub fn dim(&self) -> usize {
        self.slots.len()
    }

    /// Demands in beta order.
    pub fn demands(&self) -> impl Iterator<Item = &Demand> {
        self.demands.iter().map(|d| &d.demand)
    }

    fn coef(alpha: &[f64], c: Coef) -> f64 {
        match c {
            Coef::Free(s) => alpha[s],
            Coef::Fixed(v) => v,
        }
    }

    /// Gain columns `g(e)` (one k-vector per edge), edge-major.
    fn gains(&self, alpha: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut g = vec![0.0; self.edge_count * k];
        for &(e, i) in &self.sources {
            g[e * k + i] = 1.0;
        }
        for step in &self.steps {
            let mut col = vec![0.0; k];
            for &(i, c) in &step.inputs {
                let a = Self::coef(alpha, c);
                if a != 0.0 {
                    for (x, y) in col.iter_mut().zip(&g[i * k..(i + 1) * k]) {
                        *x += a * y;
                    }
                }
            }
            g[step.edge * k..(step.edge + 1) * k].copy_from_slice(&col);
        }
        g
    }

    fn residuals(&self, g: &[f64], beta: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let k = self.k;
        self.demands
            .iter()
            .zip(beta)
            .map(|(d, b)| {
                let mut r = vec![0.0; k];
                r[d.demand.message] = -1.0;
                for (&e, &x) in d.inc.iter().zip(b) {
                    for (ri, gi) in r.iter_mut().zip(&g[e * k..(e + 1) * k]) {
                        *ri += x * gi;
                    }
                }
                r
            })
            .collect()
    }

    /// `F(alpha, beta)`.
    pub fn value(&self, alpha: &[f64], beta: &[Vec<f64>]) -> f64 {
        let g = self.gains(alpha);
        self.residuals(&g, beta).iter().flatten().map(|r| r * r).sum()
    }

    /// `F` and its gradient in alpha at fixed beta, by a reverse pass
    /// through the edges.
    pub fn gradient(&self, alpha: &[f64], beta: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let k = self.k;
        let g = self.gains(alpha);
        let res = self.residuals(&g, beta);
        let f = res.iter().flatten().map(|r| r * r).sum();
        let mut bar = vec![0.0; self.edge_count * k];
        for ((d, b), r) in self.demands.iter().zip(beta).zip(&res) {
            for (&e, &x) in d.inc.iter().zip(b) {
                for (gb, ri) in bar[e * k..(e + 1) * k].iter_mut().zip(r) {
                    *gb += 2.0 * x * ri;
                }
            }
        }
        let mut grad = vec![0.0; self.dim()];
        for step in self.steps.iter().rev() {
            let out: Vec<f64> = bar[step.edge * k..(step.edge + 1) * k].to_vec();
            if out.iter().all(|&x| x == 0.0) {
                continue;
            }
            for &(i, c) in &step.inputs {
                if let Coef::Free(s) = c {
                    grad[s] += out.iter().zip(&g[i * k..(i + 1) * k]).map(|(a, b)| a * b).sum::<f64>();
                }
                let a = Self::coef(alpha, c);
                for (x, y) in bar[i * k..(i + 1) * k].iter_mut().zip(&out) {
                    *x += a * y;
                }
            }
        }
        (f, grad)
    }

    fn beta_from_gains(&self, g: &[f64]) -> Vec<Vec<f64>> {
        let k = self.k;
        self.demands
            .iter()
            .map(|d| {
                let r = d.inc.len();
                if r == 0 {
                    return Vec::new();
                }
                let a = DMatrix::from_fn(k, r, |i, j| g[d.inc[j] * k + i]);
                let mut target = DVector::zeros(k);
                target[d.demand.message] = 1.0;
                min_norm_solve(a, target)
            })
            .collect()
    }

    /// Minimum-norm least-squares beta for each demand at fixed alpha.
    pub fn optimal_beta(&self, alpha: &[f64]) -> Vec<Vec<f64>> {
        self.beta_from_gains(&self.gains(alpha))
    }

    /// Reduced objective `F(alpha, beta*(alpha))`, its gradient and
    /// `beta*`.
    pub fn reduced(&self, alpha: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let beta = self.optimal_beta(alpha);
        let (f, grad) = self.gradient(alpha, &beta);
        (f, grad, beta)
    }

    /// Free alpha values read from a solution.
    pub fn alpha_of(&self, sol: &CodingSolution<f64>) -> Vec<f64> {
        self.slots.iter().map(|&(a, b)| sol.alpha(a, b)).collect()
    }

    /// Beta vectors read from a solution (zeros where absent).
    pub fn beta_of(&self, sol: &CodingSolution<f64>) -> Vec<Vec<f64>> {
        self.demands
            .iter()
            .map(|d| match sol.beta(d.demand.terminal, d.demand.position) {
                Some(b) => b.to_vec(),
                None => vec![0.0; d.inc.len()],
            })
            .collect()
    }

    pub fn solution(&self, alpha: &[f64], beta: &[Vec<f64>]) -> CodingSolution<f64> {
        let mut sol = CodingSolution::new();
        for (&(a, b), &v) in self.slots.iter().zip(alpha) {
            sol.set_alpha(a, b, v);
        }
        for &(a, b) in &self.pinned {
            sol.set_alpha(a, b, 1.0);
        }
        for (d, b) in self.demands.iter().zip(beta) {
            sol.set_beta(d.demand.terminal, d.demand.position, b.clone());
        }
        sol
    }

    /// Joint Jacobian of the stacked residuals in (alpha, beta).
    fn jacobian(&self, alpha: &[f64], beta: &[Vec<f64>], g: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        let n_alpha = self.dim();
        let n_beta: usize = self.demands.iter().map(|d| d.inc.len()).sum();
        let rows = self.demands.len() * k;
        let mut jac = DMatrix::zeros(rows, n_alpha + n_beta);
        // Position of each free slot's step, for forward sensitivity.
        let mut slot_at = vec![(0usize, 0usize); n_alpha];
        for (si, step) in self.steps.iter().enumerate() {
            for &(i, c) in &step.inputs {
                if let Coef::Free(s) = c {
                    slot_at[s] = (si, i);
                }
            }
        }
        let mut dg = vec![0.0; self.edge_count * k];
        for s in 0..n_alpha {
            dg.iter_mut().for_each(|x| *x = 0.0);
            let (si, input) = slot_at[s];
            let e = self.steps[si].edge;
            dg[e * k..(e + 1) * k].copy_from_slice(&g[input * k..(input + 1) * k]);
            for step in &self.steps[si + 1..] {
                let mut col = vec![0.0; k];
                let mut any = false;
                for &(i, c) in &step.inputs {
                    let src = &dg[i * k..(i + 1) * k];
                    if src.iter().any(|&x| x != 0.0) {
                        any = true;
                        let a = Self::coef(alpha, c);
                        for (x, y) in col.iter_mut().zip(src) {
                            *x += a * y;
                        }
                    }
                }
                if any {
                    dg[step.edge * k..(step.edge + 1) * k].copy_from_slice(&col);
                }
            }
            for (j, (d, b)) in self.demands.iter().zip(beta).enumerate() {
                for (&e, &x) in d.inc.iter().zip(b) {
                    for i in 0..k {
                        jac[(j * k + i, s)] += x * dg[e * k + i];
                    }
                }
            }
        }
        let mut col = n_alpha;
        for (j, d) in self.demands.iter().enumerate() {
            for &e in &d.inc {
                for i in 0..k {
                    jac[(j * k + i, col)] = g[e * k + i];
                }
                col += 1;
            }
        }
        jac
    }
}

fn min_norm_solve(a: DMatrix<f64>, target: DVector<f64>) -> Vec<f64> {
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return vec![0.0; svd.v_t.as_ref().map_or(0, |v| v.ncols())];
    }
    svd.solve(&target, RANK_TOL * smax)
        .expect("SVD with vectors")
        .iter()
        .cloned()
        .collect()
}

/// Optimal beta for the alpha coefficients of `sol`: for each demand the
/// minimum-norm least-squares solution.
pub fn refine_beta(net: &Network, sol: &CodingSolution<f64>) -> Result<BTreeMap<(NodeId, usize), Vec<f64>>, SolverError> {
    sol.check(net)?;
    let obj = Objective::new(net, false)?;
    let alpha = obj.alpha_of(sol);
    let beta = obj.optimal_beta(&alpha);
    Ok(obj
        .demands
        .iter()
        .zip(beta)
        .map(|(d, b)| ((d.demand.terminal, d.demand.position), b))
        .collect())
}

/// Demands whose message never reaches their terminal.
pub fn unreachable_demands(net: &Network) -> Vec<Demand> {
    net.demands()
        .iter()
        .filter(|d| !net.edge_reaches_node(net.source_edges()[d.message], d.terminal))
        .copied()
        .collect()
}

struct RestartResult {
    f: f64,
    alpha: Vec<f64>,
    beta: Vec<Vec<f64>>,
    trace: Vec<TracePoint>,
    stopped_by_tol: bool,
}

fn clamp(alpha: &mut [f64], cap: Option<f64>) {
    if let Some(c) = cap {
        for a in alpha {
            *a = a.clamp(-c, c);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs_direction(grad: &[f64], mem: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut coeffs = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        coeffs.push(a);
    }
    if let Some((s, y, _)) = mem.last() {
        let h = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|x| *x *= h);
    }
    for ((s, y, rho), a) in mem.iter().zip(coeffs.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|x| *x = -*x);
    q
}

fn run_restart(obj: &Objective, cfg: &SolverConfig, restart: usize) -> RestartResult {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(restart as u64);
    let mut alpha: Vec<f64> = (0..obj.dim())
        .map(|_| rng.random_range(-cfg.init_scale..=cfg.init_scale))
        .collect();
    clamp(&mut alpha, cfg.alpha_cap);
    let (mut f, mut grad, mut beta) = obj.reduced(&alpha);
    let mut trace = vec![TracePoint {
        restart,
        iteration: 0,
        f,
    }];
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut stopped_by_tol = false;
    let mut iteration = 0;
    while iteration < cfg.max_iters {
        if f < cfg.tol_f || obj.dim() == 0 {
            stopped_by_tol = true;
            break;
        }
        iteration += 1;
        let mut dir = lbfgs_direction(&grad, &mem);
        if dot(&dir, &grad) >= 0.0 {
            mem.clear();
            dir = grad.iter().map(|g| -g).collect();
        }
        let gnorm = dot(&grad, &grad).sqrt();
        let mut t = if mem.is_empty() { (cfg.init_scale / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = alpha.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            clamp(&mut trial, cfg.alpha_cap);
            let delta: f64 = trial.iter().zip(&alpha).zip(&grad).map(|((x, a), g)| (x - a) * g).sum();
            let (ft, gt, bt) = obj.reduced(&trial);
            if ft.is_finite() && ft < f && ft <= f + ARMIJO * delta {
                accepted = Some((trial, ft, gt, bt));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft, gt, bt)) = accepted else {
            if mem.is_empty() {
                stopped_by_tol = true;
                break;
            }
            mem.clear();
            continue;
        };
        let s: Vec<f64> = trial.iter().zip(&alpha).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if mem.len() == LBFGS_MEMORY {
                mem.remove(0);
            }
            mem.push((s, y, 1.0 / sy));
        }
        let improvement = (f - ft) / f.max(f64::MIN_POSITIVE);
        alpha = trial;
        f = ft;
        grad = gt;
        beta = bt;
        trace.push(TracePoint { restart, iteration, f });
        if improvement < cfg.tol_step {
            stopped_by_tol = true;
            break;
        }
    }
    polish(obj, cfg, restart, &mut alpha, &mut beta, &mut f, &mut trace, iteration);
    RestartResult {
        f,
        alpha,
        beta,
        trace,
        stopped_by_tol: stopped_by_tol || f < cfg.tol_f,
    }
}

/// Levenberg-Marquardt on the joint residual; only improving steps are
/// kept, so `f` never increases.
#[allow(clippy::too_many_arguments)]
fn polish(
    obj: &Objective,
    cfg: &SolverConfig,
    restart: usize,
    alpha: &mut Vec<f64>,
    beta: &mut Vec<Vec<f64>>,
    f: &mut f64,
    trace: &mut Vec<TracePoint>,
    mut iteration: usize,
) {
    let n_alpha = obj.dim();
    let shapes: Vec<usize> = beta.iter().map(Vec::len).collect();
    let mut lambda = 0.0;
    for _ in 0..POLISH_ITERS {
        if *f == 0.0 {
            break;
        }
        let g = obj.gains(alpha);
        let res: Vec<f64> = obj.residuals(&g, beta).into_iter().flatten().collect();
        let jac = obj.jacobian(alpha, beta, &g);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * DVector::from_vec(res);
        if lambda == 0.0 {
            lambda = 1e-3 * jtj.diagonal().max().max(1e-12);
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda;
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 4.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let mut trial_alpha: Vec<f64> = alpha.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            clamp(&mut trial_alpha, cfg.alpha_cap);
            let mut off = n_alpha;
            let trial_beta: Vec<Vec<f64>> = beta
                .iter()
                .zip(&shapes)
                .map(|(b, &n)| {
                    let v = b.iter().zip(step.iter().skip(off)).map(|(x, d)| x + d).collect();
                    off += n;
                    v
                })
                .collect();
            let ft = obj.value(&trial_alpha, &trial_beta);
            if ft.is_finite() && ft < *f {
                *alpha = trial_alpha;
                *beta = trial_beta;
                *f = ft;
                lambda = (lambda / 3.0).max(1e-300);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
        iteration += 1;
        trace.push(TracePoint {
            restart,
            iteration,
            f: *f,
        });
    }
    // Exact beta at the final alpha, kept only if it is no worse.
    let exact = obj.optimal_beta(alpha);
    let fe = obj.value(alpha, &exact);
    if fe <= *f {
        *beta = exact;
        if fe < *f {
            *f = fe;
            iteration += 1;
            trace.push(TracePoint {
                restart,
                iteration,
                f: fe,
            });
        }
    }
}

/// Multi-start search for coefficients minimizing `F`.
///
/// Restart `r` draws its start from a ChaCha stream `r` seeded with
/// `cfg.seed`; the best restart is the lowest `F`, ties to the lowest index.
pub fn solve(net: &Network, cfg: &SolverConfig) -> Result<SolverReport, SolverError> {
    cfg.validate()?;
    let violations = validate(net);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(SolverError::InvalidNetwork(msg.join("; ")));
    }
    let start = Instant::now();
    let obj = Objective::new(net, cfg.pin_repeaters)?;
    let results: Vec<RestartResult> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&obj, cfg, r))
        .collect();
    let (best_restart, best) = results
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.f.total_cmp(&b.f).then(i.cmp(j)))
        .expect("at least one restart");
    let sol = obj.solution(&best.alpha, &best.beta);
    let profile = gamma_profile(net, &sol)?;
    let mut diagnostics = Vec::new();
    for d in unreachable_demands(net) {
        diagnostics.push(format!(
            "demand {} at terminal {} is unreachable: message m{} has no path to it",
            d.position + 1,
            net.node(d.terminal).name,
            d.message + 1
        ));
    }
    let converged = diagnostics.is_empty() && best.stopped_by_tol;
    if let Some((t, pos, b)) = sol
        .beta_entries()
        .map(|(t, pos, b)| (t, pos, b.iter().fold(0.0f64, |m, x| m.max(x.abs()))))
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .filter(|e| e.2 > BETA_WARN)
    {
        diagnostics.push(format!(
            "ill-conditioned decoding: |beta| reaches {b:.3e} at terminal {} demand {}",
            net.node(t).name,
            pos + 1
        ));
    }
    let f_trace = results.iter().flat_map(|r| r.trace.iter().copied()).collect();
    Ok(SolverReport {
        best: sol,
        profile,
        best_restart,
        f_trace,
        wall_time: start.elapsed(),
        converged,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{fixtures, NetworkBuilder};

    fn quick() -> SolverConfig {
        SolverConfig {
            restarts: 4,
            max_iters: 500,
            seed: 11,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn identity_is_exact() {
        let net = fixtures::identity();
        let r = solve(&net, &quick()).unwrap();
        assert!(r.profile.objective < 1e-12);
        assert_eq!(r.best.beta(net.node_by_name("t").unwrap(), 0).unwrap(), &[1.0]);
        assert!(r.converged);
    }

    #[test]
    fn parallel_edges_beta() {
        let net = NetworkBuilder::new("par")
            .source("s")
            .internal("a")
            .terminal("t")
            .edge("e1", "s", "a")
            .edge("x", "a", "t")
            .edge("y", "a", "t")
            .demand("t", [1])
            .build()
            .unwrap();
        let mut sol = CodingSolution::new();
        sol.set_alpha_named(&net, "e1", "x", 1.0).unwrap();
        sol.set_alpha_named(&net, "e1", "y", 1.0).unwrap();
        let beta = refine_beta(&net, &sol).unwrap();
        let b = &beta[&(net.node_by_name("t").unwrap(), 0)];
        // Identical columns: the minimum-norm split is even.
        assert!((b[0] - 0.5).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);

        sol.set_alpha_named(&net, "e1", "y", 0.0).unwrap();
        let beta = refine_beta(&net, &sol).unwrap();
        let b = &beta[&(net.node_by_name("t").unwrap(), 0)];
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        let net = fixtures::butterfly();
        let obj = Objective::new(&net, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let alpha: Vec<f64> = (0..obj.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let beta: Vec<Vec<f64>> = obj
            .beta_of(&CodingSolution::new())
            .into_iter()
            .map(|b| b.iter().map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let (_, grad) = obj.gradient(&alpha, &beta);
        for s in 0..obj.dim() {
            let h = 1e-6;
            let mut up = alpha.clone();
            up[s] += h;
            let mut down = alpha.clone();
            down[s] -= h;
            let fd = (obj.value(&up, &beta) - obj.value(&down, &beta)) / (2.0 * h);
            assert!((fd - grad[s]).abs() <= 1e-4 * grad[s].abs().max(1e-3), "slot {s}: {fd} vs {}", grad[s]);
        }
    }

    #[test]
    fn butterfly_reaches_zero() {
        let net = fixtures::butterfly();
        let r = solve(&net, &quick()).unwrap();
        assert!(r.profile.gamma_max < 1e-9, "{}", r.profile.gamma_max);
        assert!(r.converged);
    }

    #[test]
    fn deterministic() {
        let net = fixtures::butterfly();
        let a = solve(&net, &quick()).unwrap();
        let b = solve(&net, &quick()).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.f_trace, b.f_trace);
    }

    #[test]
    fn trace_monotone_per_restart() {
        let net = fixtures::g2();
        let cfg = SolverConfig {
            restarts: 3,
            max_iters: 200,
            ..SolverConfig::default()
        };
        let r = solve(&net, &cfg).unwrap();
        for w in r.f_trace.windows(2) {
            if w[0].restart == w[1].restart {
                assert!(w[1].f <= w[0].f);
            }
        }
    }

    #[test]
    fn unreachable_demand_reported() {
        let net = NetworkBuilder::new("cut")
            .source("s")
            .internal("a")
            .internal("b")
            .terminal("t1")
            .terminal("t2")
            .edge("e1", "s", "a")
            .edge("e2", "s", "b")
            .edge("x", "a", "t1")
            .edge("y", "b", "t2")
            .source_order(["e1", "e2"])
            .demand("t1", [2])
            .demand("t2", [2])
            .build()
            .unwrap();
        let cut = unreachable_demands(&net);
        assert_eq!(cut.len(), 1);
        assert_eq!(net.node(cut[0].terminal).name, "t1");
        let r = solve(&net, &quick()).unwrap();
        assert_eq!(r.diagnostics.len(), 1);
        assert!(r.diagnostics[0].contains("t1") && r.diagnostics[0].contains("m2"), "{}", r.diagnostics[0]);
        assert!(!r.converged);
        assert!((r.profile.gamma_max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_gamma_on_fano_part_is_flagged() {
        let net = fixtures::g2();
        let r = solve(&net, &quick()).unwrap();
        let beta = r
            .best
            .beta_entries()
            .flat_map(|(_, _, b)| b.iter().map(|x| x.abs()))
            .fold(0.0f64, f64::max);
        assert_eq!(beta > BETA_WARN, r.diagnostics.iter().any(|d| d.contains("ill-conditioned")));
        if r.profile.gamma_max < 1e-4 {
            assert!(beta > BETA_WARN, "gamma {} with |beta| <= {beta}", r.profile.gamma_max);
        }
        let exact = solve(&fixtures::butterfly(), &quick()).unwrap();
        assert!(exact.diagnostics.is_empty());
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        c.restarts = 0;
        assert!(c.validate().is_err());
        let mut c = SolverConfig::default();
        c.alpha_cap = Some(-1.0);
        assert!(c.validate().is_err());
    }
}
