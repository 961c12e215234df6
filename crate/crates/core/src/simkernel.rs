//! Forward execution of a coded network.
//!
//! Real mode propagates exact linear combinations (any [`Scalar`]).
//! Fixed-point mode quantizes every non-source edge to a
//! [`FixedPointFormat`] after combining in binary64, and terminals round
//! their (unquantized) beta combination to the nearest integer.

use std::cmp::Ordering;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::fxp::{self, quantize, FixedPointFormat, FixedPointValue, FxpError};
use crate::network::{Demand, Network, NetworkError};
use crate::scalar::Scalar;
use crate::xfer::{CodingSolution, XferError};

/// Exhaustive sweeps larger than this need an explicit budget.
pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 1 << 22;

/// Number of failing cases kept in a report.
pub const MAX_REPORTED_FAILURES: usize = 100;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("message {index} = {value} exceeds bound {bound}")]
    MessageOutOfBounds { index: usize, value: i64, bound: u64 },
    #[error("expected {expected} messages, got {got}")]
    MessageCount { expected: usize, got: usize },
    #[error("overflow on edge {edge}: {source}")]
    Overflow {
        edge: String,
        #[source]
        source: FxpError,
    },
    #[error("exhaustive sweep needs {needed} cases, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error(transparent)]
    Solution(#[from] XferError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Source messages together with their declared magnitude bound `M`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageVector {
    values: Vec<i64>,
    bound: u64,
}

impl MessageVector {
    pub fn new(values: Vec<i64>, bound: u64) -> Result<Self, SimError> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| v.unsigned_abs() > bound)
        {
            return Err(SimError::MessageOutOfBounds { index, value, bound });
        }
        Ok(MessageVector { values, bound })
    }

    /// Bound taken as the largest magnitude present.
    pub fn unbounded(values: Vec<i64>) -> Self {
        let bound = values.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        MessageVector { values, bound }
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }
}

#[derive(Debug, Clone)]
struct Step<S> {
    edge: usize,
    inputs: Vec<(usize, S)>,
}

/// Evaluation order for one (network, solution) pair.
#[derive(Debug, Clone)]
struct Schedule<S> {
    edge_count: usize,
    sources: Vec<(usize, usize)>,
    steps: Vec<Step<S>>,
    outputs: Vec<Vec<(usize, S)>>,
    demands: Vec<Demand>,
}

impl<S: Scalar> Schedule<S> {
    fn new(net: &Network, sol: &CodingSolution<S>) -> Result<Self, SimError> {
        sol.check(net)?;
        let order = net.topological_edges()?;
        let sources: Vec<(usize, usize)> = net
            .source_edges()
            .iter()
            .enumerate()
            .map(|(i, e)| (e.0, i))
            .collect();
        let source = net.source();
        let steps = order
            .into_iter()
            .filter(|&e| Some(net.edge(e).from) != source)
            .map(|e| Step {
                edge: e.0,
                inputs: net
                    .inc(net.edge(e).from)
                    .iter()
                    .map(|&i| (i.0, sol.alpha(i, e)))
                    .collect(),
            })
            .collect();
        let outputs = net
            .demands()
            .iter()
            .map(|d| {
                let inc = net.inc(d.terminal);
                match sol.beta(d.terminal, d.position) {
                    Some(b) => inc.iter().zip(b).map(|(e, v)| (e.0, v.clone())).collect(),
                    None => Vec::new(),
                }
            })
            .collect();
        Ok(Schedule {
            edge_count: net.edge_count(),
            sources,
            steps,
            outputs,
            demands: net.demands().to_vec(),
        })
    }

    fn message_count(&self) -> usize {
        self.sources.len()
    }
}

/// Edge values and per-demand terminal outputs in real mode.
#[derive(Debug, Clone, PartialEq)]
pub struct RealRun<S> {
    pub edges: Vec<S>,
    pub outputs: Vec<S>,
}

/// Real-mode forward pass: `val(e_i^s) = m_i`, every other edge the alpha
/// combination of its tail's inputs, every demand the beta combination of
/// its terminal's inputs.
pub fn run_real<S: Scalar>(net: &Network, sol: &CodingSolution<S>, messages: &[S]) -> Result<RealRun<S>, SimError> {
    let sched = Schedule::new(net, sol)?;
    run_real_scheduled(&sched, messages)
}

fn run_real_scheduled<S: Scalar>(sched: &Schedule<S>, messages: &[S]) -> Result<RealRun<S>, SimError> {
    if messages.len() != sched.message_count() {
        return Err(SimError::MessageCount {
            expected: sched.message_count(),
            got: messages.len(),
        });
    }
    let mut edges = vec![S::zero(); sched.edge_count];
    for &(e, i) in &sched.sources {
        edges[e] = messages[i].clone();
    }
    for step in &sched.steps {
        let mut acc = S::zero();
        for (i, a) in &step.inputs {
            acc = acc + a.clone() * edges[*i].clone();
        }
        edges[step.edge] = acc;
    }
    let outputs = sched
        .outputs
        .iter()
        .map(|terms| {
            terms
                .iter()
                .fold(S::zero(), |acc, (e, b)| acc + b.clone() * edges[*e].clone())
        })
        .collect();
    Ok(RealRun { edges, outputs })
}

/// Real-mode run on integer messages.
pub fn run_real_messages(
    net: &Network,
    sol: &CodingSolution<f64>,
    m: &MessageVector,
) -> Result<RealRun<f64>, SimError> {
    let msgs: Vec<f64> = m.values().iter().map(|&v| v as f64).collect();
    run_real(net, sol, &msgs)
}

/// Result of a fixed-point run.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRun {
    pub edges: Vec<FixedPointValue>,
    /// Terminal combinations before integer rounding.
    pub outputs: Vec<f64>,
    pub decoded: Vec<i64>,
    /// Largest binary64 rounding error seen in any node combination.
    pub max_internal_residual: f64,
}

/// Fixed-point forward pass.
///
/// Source edges carry the integer messages exactly; every other edge
/// carries `quantize(sum alpha * tval)`. Fails with the offending edge when
/// a value leaves the representable range.
pub fn run_fixed(
    net: &Network,
    sol: &CodingSolution<f64>,
    m: &MessageVector,
    format: FixedPointFormat,
) -> Result<FixedRun, SimError> {
    let sched = Schedule::new(net, sol)?;
    let names: Vec<&str> = net.edges().iter().map(|e| e.name.as_str()).collect();
    run_fixed_scheduled(&sched, m.values(), format).map_err(|(e, source)| SimError::Overflow {
        edge: names[e].to_string(),
        source,
    })
}

fn run_fixed_scheduled(
    sched: &Schedule<f64>,
    m: &[i64],
    format: FixedPointFormat,
) -> Result<FixedRun, (usize, FxpError)> {
    let mut edges = vec![FixedPointValue::zero(format); sched.edge_count];
    let mut values = vec![0.0f64; sched.edge_count];
    for &(e, i) in &sched.sources {
        edges[e] = quantize(m[i] as f64, format).map_err(|err| (e, err))?;
        values[e] = edges[e].to_f64();
    }
    let mut max_internal_residual = 0.0f64;
    let mut coeffs = Vec::new();
    let mut ins = Vec::new();
    for step in &sched.steps {
        coeffs.clear();
        ins.clear();
        for (i, a) in &step.inputs {
            coeffs.push(*a);
            ins.push(edges[*i].clone());
        }
        let v = fxp::linear_combine(&coeffs, &ins, format).map_err(|err| (step.edge, err))?;
        let plain: Vec<f64> = ins.iter().map(FixedPointValue::to_f64).collect();
        max_internal_residual = max_internal_residual.max(fxp::dot_rounding_error(&coeffs, &plain));
        values[step.edge] = v.to_f64();
        edges[step.edge] = v;
    }
    let mut outputs = Vec::with_capacity(sched.outputs.len());
    for terms in &sched.outputs {
        let mut acc = 0.0;
        for (e, b) in terms {
            acc += b * values[*e];
        }
        outputs.push(acc);
    }
    let decoded = outputs.iter().map(|&x| fxp::round_to_int(x)).collect();
    Ok(FixedRun {
        edges,
        outputs,
        decoded,
        max_internal_residual,
    })
}

/// Binary64 evaluator with the same rounding and range semantics as
/// [`run_fixed`], used for sweeps when mantissas fit in `i128`.
struct FastFixed<'a> {
    sched: &'a Schedule<f64>,
    scale: f64,
    max_mantissa: i128,
}

impl<'a> FastFixed<'a> {
    fn new(sched: &'a Schedule<f64>, format: FixedPointFormat) -> Option<Self> {
        let max = format.max_mantissa();
        if max.bits() > 120 {
            return None;
        }
        Some(FastFixed {
            sched,
            scale: format.scale_f64(),
            max_mantissa: max.to_i128()?,
        })
    }

    fn quantize(&self, x: f64) -> Option<f64> {
        if !x.is_finite() {
            return None;
        }
        let r = (x * self.scale).round();
        if !r.is_finite() || r.abs() >= 2f64.powi(126) || (r as i128).abs() > self.max_mantissa {
            return None;
        }
        Some(r / self.scale)
    }

    /// Returns outputs and the internal residual, or the overflowing edge.
    fn eval(&self, m: &[i64], values: &mut [f64], outputs: &mut Vec<f64>) -> Result<f64, usize> {
        for &(e, i) in &self.sched.sources {
            values[e] = self.quantize(m[i] as f64).ok_or(e)?;
        }
        let mut residual = 0.0f64;
        for step in &self.sched.steps {
            let mut acc = 0.0;
            // Compensated sum alongside the plain one.
            let (mut s, mut comp) = (0.0f64, 0.0f64);
            for &(i, a) in &step.inputs {
                let x = values[i];
                acc += a * x;
                let p = a * x;
                let perr = a.mul_add(x, -p);
                let t = s + p;
                let z = t - s;
                comp += perr + ((s - (t - z)) + (p - z));
                s = t;
            }
            residual = residual.max((acc - (s + comp)).abs());
            values[step.edge] = self.quantize(acc).ok_or(step.edge)?;
        }
        outputs.clear();
        for terms in &self.sched.outputs {
            let mut acc = 0.0;
            for (e, b) in terms {
                acc += b * values[*e];
            }
            outputs.push(acc);
        }
        Ok(residual)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Exhaustive,
    Sampled { count: u64, seed: u64 },
}

impl Serialize for VerifyMode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Sampled {
            sampled: SampledInner,
        }
        #[derive(Serialize)]
        struct SampledInner {
            count: u64,
            seed: u64,
        }
        match *self {
            VerifyMode::Exhaustive => s.serialize_str("exhaustive"),
            VerifyMode::Sampled { count, seed } => Sampled {
                sampled: SampledInner { count, seed },
            }
            .serialize(s),
        }
    }
}

/// One demand decoded incorrectly for one message vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub messages: Vec<i64>,
    pub terminal: String,
    /// One-based demand position.
    pub demand: usize,
    pub decoded: i64,
    pub expected: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub mode: VerifyMode,
    pub bound: u64,
    pub format: FixedPointFormat,
    pub total_cases: u64,
    /// Number of (message vector, demand) pairs decoded incorrectly.
    pub failure_count: u64,
    /// Number of message vectors with at least one wrong demand.
    pub failing_cases: u64,
    /// Lexicographically smallest failures, at most
    /// [`MAX_REPORTED_FAILURES`].
    pub failures: Vec<Failure>,
    pub max_terminal_residual: f64,
    pub max_internal_residual: f64,
    pub passed: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub exhaustive_budget: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            exhaustive_budget: DEFAULT_EXHAUSTIVE_BUDGET,
        }
    }
}

#[derive(Default)]
struct Partial {
    failures: Vec<(Vec<i64>, usize, i64, i64)>,
    failure_count: u64,
    failing_cases: u64,
    max_terminal_residual: f64,
    max_internal_residual: f64,
    overflow: Option<(u64, usize, Vec<i64>)>,
}

fn failure_order(a: &(Vec<i64>, usize, i64, i64), b: &(Vec<i64>, usize, i64, i64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.cmp(&b.1))
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.failures.extend(other.failures);
        self.trim();
        self.failure_count += other.failure_count;
        self.failing_cases += other.failing_cases;
        self.max_terminal_residual = self.max_terminal_residual.max(other.max_terminal_residual);
        self.max_internal_residual = self.max_internal_residual.max(other.max_internal_residual);
        self.overflow = match (self.overflow.take(), other.overflow) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }

    fn trim(&mut self) {
        if self.failures.len() > 4 * MAX_REPORTED_FAILURES {
            self.failures.sort_by(failure_order);
            self.failures.truncate(MAX_REPORTED_FAILURES);
        }
    }
}

/// Boundary vectors checked first in sampled mode: all-zero, all `M`,
/// all `-M`, and `+-M` on each single coordinate.
pub fn boundary_vectors(k: usize, bound: u64) -> Vec<Vec<i64>> {
    let m = bound as i64;
    let mut out = vec![vec![0; k], vec![m; k], vec![-m; k]];
    for i in 0..k {
        for s in [m, -m] {
            let mut v = vec![0; k];
            v[i] = s;
            out.push(v);
        }
    }
    out
}

/// Runs the fixed-point network over a message set and checks that every
/// demand decodes to its demanded message.
///
/// Exhaustive mode enumerates `[-M, M]^k` in lexicographic order; sampled
/// mode checks the boundary vectors followed by `count` uniform draws.
pub fn verify(
    net: &Network,
    sol: &CodingSolution<f64>,
    format: FixedPointFormat,
    bound: u64,
    mode: VerifyMode,
    options: VerifyOptions,
) -> Result<VerificationReport, SimError> {
    let sched = Schedule::new(net, sol)?;
    let k = sched.message_count();
    let m = bound as i64;
    let radix = 2 * bound as u128 + 1;

    let sampled: Option<Vec<Vec<i64>>> = match mode {
        VerifyMode::Exhaustive => {
            let needed = radix.checked_pow(k as u32).unwrap_or(u128::MAX);
            if needed > options.exhaustive_budget as u128 {
                return Err(SimError::BudgetExceeded {
                    needed,
                    budget: options.exhaustive_budget,
                });
            }
            None
        }
        VerifyMode::Sampled { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = boundary_vectors(k, bound);
            v.extend((0..count).map(|_| (0..k).map(|_| rng.random_range(-m..=m)).collect()));
            Some(v)
        }
    };
    let total = match &sampled {
        Some(v) => v.len() as u64,
        None => radix.pow(k as u32) as u64,
    };
    let case = |idx: u64| -> Vec<i64> {
        match &sampled {
            Some(v) => v[idx as usize].clone(),
            None => {
                let mut rest = idx as u128;
                let mut out = vec![0i64; k];
                for slot in out.iter_mut().rev() {
                    *slot = (rest % radix) as i64 - m;
                    rest /= radix;
                }
                out
            }
        }
    };

    let fast = FastFixed::new(&sched, format);
    let demands = &sched.demands;
    let check = |acc: &mut Partial, idx: u64, msgs: Vec<i64>, outputs: &[f64], residual: f64| {
        acc.max_internal_residual = acc.max_internal_residual.max(residual);
        let mut failed = false;
        for (j, (&out, d)) in outputs.iter().zip(demands).enumerate() {
            let expected = msgs[d.message];
            acc.max_terminal_residual = acc.max_terminal_residual.max((out - expected as f64).abs());
            let decoded = fxp::round_to_int(out);
            if decoded != expected {
                failed = true;
                acc.failure_count += 1;
                acc.failures.push((msgs.clone(), j, decoded, expected));
            }
        }
        if failed {
            acc.failing_cases += 1;
            acc.trim();
        }
        let _ = idx;
    };

    let partial = (0..total)
        .into_par_iter()
        .fold(
            || (Partial::default(), vec![0.0f64; sched.edge_count], Vec::new()),
            |(mut acc, mut values, mut outputs), idx| {
                if acc.overflow.is_some() {
                    return (acc, values, outputs);
                }
                let msgs = case(idx);
                match &fast {
                    Some(f) => match f.eval(&msgs, &mut values, &mut outputs) {
                        Ok(res) => check(&mut acc, idx, msgs, &outputs, res),
                        Err(e) => acc.overflow = Some((idx, e, msgs)),
                    },
                    None => match run_fixed_scheduled(&sched, &msgs, format) {
                        Ok(run) => check(&mut acc, idx, msgs, &run.outputs, run.max_internal_residual),
                        Err((e, _)) => acc.overflow = Some((idx, e, msgs)),
                    },
                }
                (acc, values, outputs)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(Partial::default, Partial::merge);

    if let Some((_, e, msgs)) = partial.overflow {
        // Reproduce through the reference path for the exact error value.
        let err = run_fixed_scheduled(&sched, &msgs, format)
            .err()
            .map(|(_, source)| source)
            .unwrap_or(FxpError::Overflow {
                value: f64::NAN,
                format,
            });
        return Err(SimError::Overflow {
            edge: net.edge(crate::network::EdgeId(e)).name.clone(),
            source: err,
        });
    }

    let mut failures = partial.failures;
    failures.sort_by(failure_order);
    failures.truncate(MAX_REPORTED_FAILURES);
    let failures = failures
        .into_iter()
        .map(|(messages, j, decoded, expected)| Failure {
            messages,
            terminal: net.node(demands[j].terminal).name.clone(),
            demand: demands[j].position + 1,
            decoded,
            expected,
        })
        .collect();
    Ok(VerificationReport {
        mode,
        bound,
        format,
        total_cases: total,
        failure_count: partial.failure_count,
        failing_cases: partial.failing_cases,
        failures,
        max_terminal_residual: partial.max_terminal_residual,
        max_internal_residual: partial.max_internal_residual,
        passed: partial.failure_count == 0,
    })
}

/// Exact integer image of a fixed-point value's mantissa, for reports.
pub fn mantissa_i128(v: &FixedPointValue) -> Option<i128> {
    v.mantissa().to_i128()
}
