//! Quasi-linear network coding.
//!
//! A network design assigns real coefficients to every pair of consecutive
//! edges (`alpha`) and a decoding vector to every terminal demand (`beta`).
//! [`solver`] searches for coefficients that make each terminal's linear
//! combination close to its demanded message; [`bounds`] chooses a base-b
//! fixed-point format in which rounding at every hop, plus rounding to the
//! nearest integer at the terminals, still recovers the messages exactly;
//! [`simkernel`] runs and verifies the result.

pub mod bounds;
pub mod fxp;
pub mod network;
pub mod scalar;
pub mod simkernel;
pub mod solution;
pub mod solver;
pub mod xfer;

use num_rational::BigRational;

pub use bounds::{plan_theorem, plan_tight, Accounting, MessageSpec, NetworkStats, PrecisionPlan, Rate, TightOptions};
pub use fxp::{FixedPointFormat, FixedPointValue};
pub use network::{depth_partition, validate, Network, NetworkBuilder};
pub use simkernel::{run_fixed, run_real, verify, MessageVector, VerificationReport, VerifyMode, VerifyOptions};
pub use solver::{solve, SolverConfig, SolverReport};
pub use xfer::{gain_matrix, gamma_profile, CodingSolution, GammaProfile};

pub type RealSolution = CodingSolution<f64>;
pub type SingleSolution = CodingSolution<f32>;
pub type ExactSolution = CodingSolution<BigRational>;
pub type RealProfile = GammaProfile<f64>;
pub type ExactProfile = GammaProfile<BigRational>;
pub type RealGain = xfer::GainMatrix<f64>;
pub type ExactGain = xfer::GainMatrix<BigRational>;
