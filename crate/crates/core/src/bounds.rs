//! Precision planning: magnitude and error bounds, the digit counts they
//! imply, and the resulting rate.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::One;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::fxp::FixedPointFormat;
use crate::network::{depth_partition, Network, NetworkError};
use crate::xfer::{gamma_profile, CodingSolution, XferError};

/// Slack required on strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-12;

/// Below this distance from 1, `delta * alpha` uses the limit forms.
pub const UNIT_GROWTH_TOL: f64 = 1e-12;

const MAX_DIGITS: u32 = 4096;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible: gamma {gamma} with M = {bound} (need M < 1/(2 gamma), largest M is {max_bound})")]
    Infeasible { gamma: f64, bound: u64, max_bound: u64 },
    #[error("infeasible: no precision up to {MAX_DIGITS} digits satisfies the bound")]
    NoPrecision,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solution(#[from] XferError),
}

/// Structural quantities the closed-form bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub depth: usize,
    pub d_in_max: usize,
    pub alpha_max: f64,
    pub base: u32,
}

impl NetworkStats {
    pub fn new(net: &Network, sol: &CodingSolution<f64>) -> Result<Self, BoundsError> {
        let part = depth_partition(net)?;
        Ok(NetworkStats {
            depth: part.depth(),
            d_in_max: part.max_in_degree(),
            alpha_max: sol.alpha_max(),
            base: net.base(),
        })
    }

    /// Per-layer growth factor `d_in_max * alpha_max`.
    pub fn growth(&self) -> f64 {
        self.d_in_max as f64 * self.alpha_max
    }

    fn check_growth(&self) -> Result<f64, BoundsError> {
        let g = self.growth();
        if !g.is_finite() || g < 1.0 - UNIT_GROWTH_TOL {
            return Err(BoundsError::Domain(format!(
                "d_in_max * alpha_max = {g} is below 1; scale the coefficients up"
            )));
        }
        Ok(g)
    }

    fn check_layer(&self, i: usize) -> Result<(), BoundsError> {
        if i >= self.depth.max(1) {
            return Err(BoundsError::Domain(format!(
                "layer {i} outside 0..{}",
                self.depth
            )));
        }
        Ok(())
    }
}

fn geometric(g: f64, i: usize) -> f64 {
    if (g - 1.0).abs() < UNIT_GROWTH_TOL {
        i as f64
    } else {
        (g.powi(i as i32) - 1.0) / (g - 1.0)
    }
}

/// Magnitude bound on layer `i`: `(d_in_max * alpha_max)^i * M`.
pub fn lemma1_bound(stats: &NetworkStats, bound: f64, i: usize) -> Result<f64, BoundsError> {
    stats.check_layer(i)?;
    if i == 0 {
        return Ok(bound);
    }
    let g = stats.check_growth()?;
    Ok(g.powi(i as i32) * bound)
}

/// Quantization error bound on layer `i`:
/// `((d_in_max * alpha_max)^i - 1) / (d_in_max * alpha_max - 1) * b^-p`.
pub fn lemma2_bound(stats: &NetworkStats, p: u32, i: usize) -> Result<f64, BoundsError> {
    stats.check_layer(i)?;
    if i == 0 {
        return Ok(0.0);
    }
    let g = stats.check_growth()?;
    Ok(geometric(g, i) * (stats.base as f64).powi(-(p as i32)))
}

/// Largest `M` with `M < 1/(2 gamma)`, with a `1e-9` relative guard.
/// `None` when gamma is zero (no bound).
pub fn max_message_bound(gamma: f64) -> Option<u64> {
    if gamma <= 0.0 {
        return None;
    }
    Some(((1.0 - 1e-9) / (2.0 * gamma)).floor() as u64)
}

/// Message range, given either as a magnitude bound or a bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageSpec {
    Bound(u64),
    Bits(u32),
}

impl MessageSpec {
    /// `(M, n_bits)`. A width of `n` bits covers `[-2^(n-1), 2^(n-1) - 1]`,
    /// so it needs `M = 2^(n-1)`; a bound `M` affords `floor(log2 M) + 1`
    /// bits.
    pub fn resolve(self) -> Result<(u64, u32), BoundsError> {
        match self {
            MessageSpec::Bits(0) => Err(BoundsError::Domain("n_bits must be positive".into())),
            MessageSpec::Bits(n) if n > 64 => Err(BoundsError::Domain(format!("n_bits = {n} exceeds 64"))),
            MessageSpec::Bits(n) => Ok((1u64 << (n - 1), n)),
            MessageSpec::Bound(0) => Ok((0, 1)),
            MessageSpec::Bound(m) => Ok((m, 64 - m.leading_zeros())),
        }
    }
}

fn check_feasible(gamma: f64, bound: u64) -> Result<(), BoundsError> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(BoundsError::Domain(format!("gamma = {gamma}")));
    }
    if gamma > 0.0 && 2.0 * gamma * bound as f64 >= 1.0 {
        return Err(BoundsError::Infeasible {
            gamma,
            bound,
            max_bound: max_message_bound(gamma).unwrap_or(u64::MAX),
        });
    }
    Ok(())
}

/// Smallest `P >= 0` with `b^P >= 2 * v * M + 2`, compared exactly.
fn int_digits_for(base: u32, v: f64, bound: u64) -> Result<u32, BoundsError> {
    let v = BigRational::from_float(v).ok_or_else(|| BoundsError::Domain(format!("magnitude {v}")))?;
    let two = BigRational::from_integer(BigInt::from(2));
    let x = &two * v * BigRational::from_integer(BigInt::from(bound)) + &two;
    let b = BigRational::from_integer(BigInt::from(base));
    let mut power = BigRational::one();
    for p in 0..MAX_DIGITS {
        if power >= x {
            return Ok(p);
        }
        power *= &b;
    }
    Err(BoundsError::NoPrecision)
}

/// Transmission rate `n_bits / ((P + p) log2 b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    /// Exact when `b` is a power of two.
    Exact(Ratio<u64>),
    Real(f64),
}

impl Rate {
    pub fn new(n_bits: u32, format: FixedPointFormat) -> Rate {
        let digits = (format.int_digits + format.frac_digits) as u64;
        let b = format.base;
        if b.is_power_of_two() && digits > 0 {
            let log = b.trailing_zeros() as u64;
            Rate::Exact(Ratio::new(n_bits as u64, digits * log))
        } else {
            Rate::Real(n_bits as f64 / (digits as f64 * (b as f64).log2()))
        }
    }

    pub fn to_f64(&self) -> f64 {
        match *self {
            Rate::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Rate::Real(x) => x,
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Exact(r) => write!(f, "{r}"),
            Rate::Real(x) => write!(f, "{x}"),
        }
    }
}

impl FromStr for Rate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('/') {
            Some((n, d)) => {
                let n: u64 = n.trim().parse().map_err(|e| format!("rate {s:?}: {e}"))?;
                let d: u64 = d.trim().parse().map_err(|e| format!("rate {s:?}: {e}"))?;
                if d == 0 {
                    return Err(format!("rate {s:?}: zero denominator"));
                }
                Ok(Rate::Exact(Ratio::new(n, d)))
            }
            None => match s.parse::<u64>() {
                Ok(n) => Ok(Rate::Exact(Ratio::from_integer(n))),
                Err(_) => s.parse::<f64>().map(Rate::Real).map_err(|e| format!("rate {s:?}: {e}")),
            },
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Theorem,
    Tight,
}

/// How `plan_tight` charges quantization error to a terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// Half a grid step per combining edge, weighted by the terminal's
    /// decoding coefficients and each demand's own deviation. Sound.
    #[default]
    BetaWeighted,
    /// A full grid step per combining edge, the worst incoming edge bound
    /// at the terminal and the global gamma, ignoring decoding
    /// coefficients. Not sound in general when `|beta| > 1`.
    WorstEdge,
}

/// A fixed-point format together with the message range it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionPlan {
    pub b: u32,
    #[serde(rename = "P")]
    pub int_digits: u32,
    pub p: u32,
    #[serde(rename = "M")]
    pub bound: u64,
    pub n_bits: u32,
    pub rate: Rate,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accounting: Option<Accounting>,
    /// Distance of the worst terminal error bound below one half.
    pub margin: f64,
    pub effective_depth: Option<usize>,
}

impl PrecisionPlan {
    pub fn format(&self) -> FixedPointFormat {
        FixedPointFormat::new(self.b, self.int_digits, self.p)
    }

    pub fn rate(&self) -> Rate {
        self.rate
    }

    /// Copy of the plan with `p` replaced; the rate follows.
    pub fn with_frac_digits(&self, p: u32) -> PrecisionPlan {
        let mut out = self.clone();
        out.p = p;
        out.rate = Rate::new(out.n_bits, out.format());
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serialization");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Rate for `n_bits` messages in format `(b, P, p)`.
pub fn rate(n_bits: u32, format: FixedPointFormat) -> Rate {
    Rate::new(n_bits, format)
}

/// Digit counts from the closed-form bounds: the smallest `p` with
/// `p > log_b(((da)^(d-1) - 1)/(da - 1)) - log_b(1/2 - gamma M)` and the
/// smallest `P` with `P >= log_b(2 (da)^(d-1) M + 2)`.
///
/// `effective_depth` replaces the graph depth `d` when given.
pub fn plan_theorem(
    stats: &NetworkStats,
    gamma: f64,
    messages: MessageSpec,
    effective_depth: Option<usize>,
) -> Result<PrecisionPlan, BoundsError> {
    let (bound, n_bits) = messages.resolve()?;
    check_feasible(gamma, bound)?;
    let d = effective_depth.unwrap_or(stats.depth);
    if d == 0 {
        return Err(BoundsError::Domain("depth must be at least 1".into()));
    }
    // A single layer never combines, so the growth factor is irrelevant.
    let g = if d >= 2 { stats.check_growth()? } else { 1.0 };
    let b = stats.base as f64;
    let slack = 0.5 - gamma * bound as f64;
    let f = geometric(g, d - 1);
    let p = if f == 0.0 {
        0
    } else {
        let threshold = f.log(b) - slack.log(b);
        (0..MAX_DIGITS)
            .find(|&p| p as f64 - threshold >= STRICT_MARGIN)
            .ok_or(BoundsError::NoPrecision)?
    };
    let int_digits = int_digits_for(stats.base, g.powi(d as i32 - 1), bound)?;
    let format = FixedPointFormat::new(stats.base, int_digits, p);
    Ok(PrecisionPlan {
        b: stats.base,
        int_digits,
        p,
        bound,
        n_bits,
        rate: Rate::new(n_bits, format),
        method: Method::Theorem,
        accounting: None,
        margin: slack - f * b.powi(-(p as i32)),
        effective_depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TightOptions {
    pub accounting: Accounting,
    /// Replaces the solution's own deviations with this gamma.
    pub gamma: Option<f64>,
}

/// Per-edge bounds in units of `M` and of one grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBounds {
    /// `V(e) / M`.
    pub value: Vec<f64>,
    /// `E(e) / b^-p`.
    pub error: Vec<f64>,
}

/// Forward recursion `V(e') = sum |alpha| V(e)`, `E(e') = fresh + sum
/// |alpha| E(e)` with `V(e_s) = 1`, `E(e_s) = 0`. An edge whose
/// coefficients are all integers adds no fresh error: an integer
/// combination of grid values is already on the grid. Copies are the
/// common case.
pub fn edge_bounds(net: &Network, sol: &CodingSolution<f64>, fresh: f64) -> Result<EdgeBounds, BoundsError> {
    let n = net.edge_count();
    let mut value = vec![0.0; n];
    let mut error = vec![0.0; n];
    let source = net.source();
    for e in net.topological_edges()? {
        let tail = net.edge(e).from;
        if Some(tail) == source {
            value[e.0] = 1.0;
            continue;
        }
        let inc = net.inc(tail);
        let (mut v, mut err) = (0.0, 0.0);
        for &i in inc {
            let a = sol.alpha(i, e).abs();
            v += a * value[i.0];
            err += a * error[i.0];
        }
        let on_grid = inc.iter().all(|&i| sol.alpha(i, e).fract() == 0.0);
        value[e.0] = v;
        error[e.0] = if on_grid { err } else { err + fresh };
    }
    Ok(EdgeBounds { value, error })
}

/// Digit counts from per-edge propagation with the actual coefficients.
pub fn plan_tight(
    net: &Network,
    sol: &CodingSolution<f64>,
    messages: MessageSpec,
    options: TightOptions,
) -> Result<PrecisionPlan, BoundsError> {
    let (bound, n_bits) = messages.resolve()?;
    let profile = gamma_profile(net, sol)?;
    let gamma = options.gamma.unwrap_or(profile.gamma_max);
    check_feasible(gamma, bound)?;
    let m = bound as f64;
    let base = net.base();
    let b = base as f64;

    // Terminal bound is dev * M + c * b^-p for each demand.
    let terms: Vec<(f64, f64)> = match options.accounting {
        Accounting::BetaWeighted => {
            let eb = edge_bounds(net, sol, 0.5)?;
            profile
                .demands
                .iter()
                .map(|dg| {
                    let d = dg.demand;
                    let c = sol
                        .beta(d.terminal, d.position)
                        .map(|beta| {
                            beta.iter()
                                .zip(net.inc(d.terminal))
                                .map(|(x, e)| x.abs() * eb.error[e.0])
                                .sum()
                        })
                        .unwrap_or(0.0);
                    (options.gamma.unwrap_or(dg.deviation), c)
                })
                .collect()
        }
        Accounting::WorstEdge => {
            let eb = edge_bounds(net, sol, 1.0)?;
            profile
                .demands
                .iter()
                .map(|dg| {
                    let c = net
                        .inc(dg.demand.terminal)
                        .iter()
                        .map(|e| eb.error[e.0])
                        .fold(0.0, f64::max);
                    (gamma, c)
                })
                .collect()
        }
    };
    let margin_at = |p: u32| {
        let q = b.powi(-(p as i32));
        terms
            .iter()
            .map(|&(dev, c)| 0.5 - dev * m - c * q)
            .fold(0.5, f64::min)
    };
    let p = (0..MAX_DIGITS)
        .find(|&p| margin_at(p) >= STRICT_MARGIN)
        .ok_or(BoundsError::NoPrecision)?;

    let vmax = edge_bounds(net, sol, 0.0)?.value.into_iter().fold(0.0, f64::max);
    let int_digits = int_digits_for(base, vmax, bound)?;
    let format = FixedPointFormat::new(base, int_digits, p);
    Ok(PrecisionPlan {
        b: base,
        int_digits,
        p,
        bound,
        n_bits,
        rate: Rate::new(n_bits, format),
        method: Method::Tight,
        accounting: Some(options.accounting),
        margin: margin_at(p),
        effective_depth: None,
    })
}
