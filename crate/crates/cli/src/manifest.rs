//! Run manifest: hashes and key numbers of every artifact in a run.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qlnc::bounds::PrecisionPlan;
use qlnc::network::depth_partition;
use qlnc::solver::{SolverConfig, SolverReport};
use qlnc::xfer::gamma_profile;

use crate::{fail, load_plan, load_solution, load_valid, read_file, CliResult, EXIT_IO};

/// Rates other schemes reach on the reference networks.
const REFERENCE_RATES: [(&str, &str); 3] = [
    ("routing only", "1/3"),
    ("quasi-linear, Fano part", "7/20"),
    ("hybrid composition", "2/3"),
];

/// Solver settings and outcome, written by `design --log`. Wall time is
/// left out so the file is reproducible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignLog {
    pub restarts: usize,
    pub max_iters: usize,
    #[serde(rename = "tol_F")]
    pub tol_f: f64,
    pub tol_step: f64,
    pub seed: u64,
    pub init_scale: f64,
    pub alpha_cap: Option<f64>,
    pub pin_repeaters: bool,
    pub best_restart: usize,
    #[serde(rename = "F")]
    pub objective: f64,
    pub gamma_max: f64,
    pub converged: bool,
    pub accepted_steps: usize,
    pub diagnostics: Vec<String>,
}

impl DesignLog {
    pub fn new(cfg: &SolverConfig, report: &SolverReport) -> Self {
        DesignLog {
            restarts: cfg.restarts,
            max_iters: cfg.max_iters,
            tol_f: cfg.tol_f,
            tol_step: cfg.tol_step,
            seed: cfg.seed,
            init_scale: cfg.init_scale,
            alpha_cap: cfg.alpha_cap,
            pin_repeaters: cfg.pin_repeaters,
            best_restart: report.best_restart,
            objective: report.profile.objective,
            gamma_max: report.profile.gamma_max,
            converged: report.converged,
            accepted_steps: report.f_trace.len(),
            diagnostics: report.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkSummary {
    #[serde(flatten)]
    pub file: Artifact,
    pub name: String,
    pub base: u32,
    pub nodes: usize,
    pub edges: usize,
    pub messages: usize,
    pub depth: usize,
    pub d_in_max: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    #[serde(flatten)]
    pub file: Artifact,
    pub gamma_max: f64,
    #[serde(rename = "F")]
    pub objective: f64,
    pub alpha_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationSummary {
    #[serde(flatten)]
    pub file: Artifact,
    pub passed: bool,
    pub total_cases: u64,
    pub failure_count: u64,
    pub max_terminal_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub network: NetworkSummary,
    pub design: Option<DesignLog>,
    pub solution: Option<SolutionSummary>,
    pub plan: Option<PrecisionPlan>,
    pub plan_file: Option<Artifact>,
    pub verification: Option<VerificationSummary>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn artifact(path: &Path) -> CliResult<(Artifact, String)> {
    let text = read_file(path)?;
    Ok((
        Artifact {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        },
        text,
    ))
}

impl RunManifest {
    pub fn collect(
        net_path: &Path,
        sol: Option<&Path>,
        plan: Option<&Path>,
        verification: Option<&Path>,
        design: Option<&Path>,
    ) -> CliResult<Self> {
        let (file, _) = artifact(net_path)?;
        let net = load_valid(net_path)?;
        let part = depth_partition(&net).map_err(crate::network_failure)?;
        let network = NetworkSummary {
            file,
            name: net.name().to_string(),
            base: net.base(),
            nodes: net.node_count(),
            edges: net.edge_count(),
            messages: net.message_count(),
            depth: part.depth(),
            d_in_max: part.max_in_degree(),
        };
        let solution = match sol {
            Some(p) => {
                let (file, _) = artifact(p)?;
                let s = load_solution(&net, p)?;
                let profile = gamma_profile(&net, &s).map_err(fail(crate::EXIT_INVALID))?;
                Some(SolutionSummary {
                    file,
                    gamma_max: profile.gamma_max,
                    objective: profile.objective,
                    alpha_max: s.alpha_max(),
                })
            }
            None => None,
        };
        let (plan_file, plan) = match plan {
            Some(p) => (Some(artifact(p)?.0), Some(load_plan(p)?)),
            None => (None, None),
        };
        let verification = match verification {
            Some(p) => {
                let (file, text) = artifact(p)?;
                let v: serde_json::Value = serde_json::from_str(&text).map_err(fail(EXIT_IO))?;
                let num = |k: &str| v[k].as_u64().unwrap_or(0);
                Some(VerificationSummary {
                    file,
                    passed: v["passed"].as_bool().unwrap_or(false),
                    total_cases: num("total_cases"),
                    failure_count: num("failure_count"),
                    max_terminal_residual: v["max_terminal_residual"].as_f64().unwrap_or(f64::NAN),
                })
            }
            None => None,
        };
        let design = match design {
            Some(p) => {
                let text = read_file(p)?;
                Some(serde_json::from_str(&text).map_err(fail(EXIT_IO))?)
            }
            None => None,
        };
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            network,
            design,
            solution,
            plan,
            plan_file,
            verification,
        })
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let n = &self.network;
        let _ = writeln!(s, "network  {} ({})", n.name, n.file.path);
        let _ = writeln!(
            s,
            "         {} nodes, {} edges, {} messages, depth {}, max in-degree {}, base {}",
            n.nodes, n.edges, n.messages, n.depth, n.d_in_max, n.base
        );
        if let Some(d) = &self.design {
            let _ = writeln!(
                s,
                "design   seed {}, {} restarts x {} iters, best restart {}, converged {}",
                d.seed, d.restarts, d.max_iters, d.best_restart, d.converged
            );
        }
        if let Some(sol) = &self.solution {
            let _ = writeln!(
                s,
                "solution gamma {:e}, F {:e}, max |alpha| {}",
                sol.gamma_max, sol.objective, sol.alpha_max
            );
        }
        if let Some(p) = &self.plan {
            let _ = writeln!(
                s,
                "plan     {:?}: b = {}, P = {}, p = {}, M = {}, n_bits = {}, margin {:e}",
                p.method, p.b, p.int_digits, p.p, p.bound, p.n_bits, p.margin
            );
        }
        if let Some(v) = &self.verification {
            let _ = writeln!(
                s,
                "verify   {} over {} cases ({} failures), max terminal residual {:e}",
                if v.passed { "passed" } else { "FAILED" },
                v.total_cases,
                v.failure_count,
                v.max_terminal_residual
            );
        }
        let _ = writeln!(s, "rates");
        if let Some(p) = &self.plan {
            let verified = match &self.verification {
                Some(v) if v.passed => " (verified)",
                Some(_) => " (verification failed)",
                None => "",
            };
            let _ = writeln!(s, "  {:<26} {:>6} = {:.4}{verified}", "this run", p.rate.to_string(), p.rate.to_f64());
        }
        for (label, r) in REFERENCE_RATES {
            let x: qlnc::bounds::Rate = r.parse().expect("reference rate");
            let _ = writeln!(s, "  {label:<26} {r:>6} = {:.4}", x.to_f64());
        }
        s
    }
}
