//! `qlnc`: validate, design, plan, verify and report quasi-linear network
//! codes.
//!
//! Exit codes: 0 success, 1 invalid network or solution, 2 usage error,
//! 3 infeasible plan, 4 verification failure, 5 I/O or parse error.

mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qlnc::bounds::{self, BoundsError, MessageSpec, NetworkStats, PrecisionPlan, TightOptions};
use qlnc::network::generate::{random_network, GeneratorConfig};
use qlnc::network::{self, fixtures, Network, NetworkError};
use qlnc::simkernel::{self, MessageVector, SimError, VerifyMode, VerifyOptions};
use qlnc::solution::{self, SolutionError};
use qlnc::solver::{self, SolverConfig};
use qlnc::xfer::{gamma_profile, CodingSolution};

use manifest::{DesignLog, RunManifest};

const EXIT_INVALID: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_IO: u8 = 5;

struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult<T = ()> = Result<T, Failure>;

fn fail<E: Into<anyhow::Error>>(code: u8) -> impl FnOnce(E) -> Failure {
    move |e| Failure { code, error: e.into() }
}

fn network_failure(e: NetworkError) -> Failure {
    let code = match e {
        NetworkError::Parse { .. } | NetworkError::Io { .. } => EXIT_IO,
        NetworkError::Schema { .. } | NetworkError::Cyclic(_) => EXIT_INVALID,
    };
    Failure { code, error: e.into() }
}

fn solution_failure(e: SolutionError) -> Failure {
    let code = match e {
        SolutionError::Parse { .. } | SolutionError::Io { .. } => EXIT_IO,
        SolutionError::Key { .. } | SolutionError::Invalid(_) => EXIT_INVALID,
    };
    Failure { code, error: e.into() }
}

fn bounds_failure(e: BoundsError) -> Failure {
    let code = match e {
        BoundsError::Infeasible { .. } | BoundsError::NoPrecision | BoundsError::Domain(_) => EXIT_INFEASIBLE,
        BoundsError::Network(_) | BoundsError::Solution(_) => EXIT_INVALID,
    };
    Failure { code, error: e.into() }
}

#[derive(Parser)]
#[command(name = "qlnc", version, about = "Quasi-linear network code design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network file against the model invariants.
    Validate { net: PathBuf },
    /// Search for real coefficients minimizing F.
    Design(DesignArgs),
    /// Choose a fixed-point format for a solution.
    Plan(PlanArgs),
    /// Run the fixed-point network over a message set.
    Verify(VerifyArgs),
    /// Run one message vector and print every edge value.
    Simulate(SimulateArgs),
    /// Generate a random network.
    Gen(GenArgs),
    /// Summarize a run and write its manifest.
    Report(ReportArgs),
    /// Write a built-in network (and its known solution, if any).
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct DesignArgs {
    net: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long = "tolF", alias = "tol-f", default_value_t = 1e-12)]
    tol_f: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol_step: f64,
    #[arg(long, default_value_t = 2.0)]
    init_scale: f64,
    /// Bound on |alpha|; 0 disables it.
    #[arg(long, default_value_t = 64.0)]
    alpha_cap: f64,
    /// Also optimize nodes with a single incoming edge.
    #[arg(long)]
    no_pin: bool,
    #[arg(short, long)]
    out: PathBuf,
    /// Write solver settings and outcome here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Theorem,
    Tight,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountingArg {
    BetaWeighted,
    WorstEdge,
}

#[derive(Args)]
struct PlanArgs {
    net: PathBuf,
    sol: PathBuf,
    #[arg(long, conflicts_with = "bound", required_unless_present = "bound")]
    bits: Option<u32>,
    #[arg(long = "M", alias = "max-message")]
    bound: Option<u64>,
    #[arg(long, value_enum, default_value = "tight")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "beta-weighted")]
    accounting: AccountingArg,
    /// Use this gamma instead of the solution's own.
    #[arg(long)]
    gamma: Option<f64>,
    /// Depth used by the theorem method instead of the graph depth.
    #[arg(long)]
    effective_depth: Option<usize>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    net: PathBuf,
    sol: PathBuf,
    plan: PathBuf,
    #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
    exhaustive: bool,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = simkernel::DEFAULT_EXHAUSTIVE_BUDGET)]
    budget: u64,
    /// Override the plan's fractional digits.
    #[arg(long)]
    frac_digits: Option<u32>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    net: PathBuf,
    sol: PathBuf,
    /// Comma-separated messages, e.g. `5,-2`.
    #[arg(long, allow_hyphen_values = true)]
    messages: String,
    /// Fixed-point plan; without it only real mode runs.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    nodes: usize,
    #[arg(long = "max-indeg")]
    max_indeg: usize,
    #[arg(long)]
    terminals: usize,
    #[arg(long, default_value_t = 3)]
    max_messages: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    net: PathBuf,
    #[arg(long)]
    sol: Option<PathBuf>,
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Verification report written by `verify`.
    #[arg(long)]
    verification: Option<PathBuf>,
    /// Log written by `design --log`.
    #[arg(long)]
    design: Option<PathBuf>,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    /// One of identity, chain, butterfly, g1, g2, g3; omit to list.
    name: Option<String>,
    #[arg(long, default_value = ".")]
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Validate { net } => cmd_validate(&net),
        Command::Design(a) => cmd_design(a),
        Command::Plan(a) => cmd_plan(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Report(a) => cmd_report(a),
        Command::Fixture(a) => cmd_fixture(a),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(fail(EXIT_IO))
}

fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(fail(EXIT_IO))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Loads a network and rejects it unless it validates cleanly.
fn load_valid(path: &Path) -> CliResult<Network> {
    let net = network::load(path).map_err(network_failure)?;
    let violations = network::validate(&net);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(Failure {
            code: EXIT_INVALID,
            error: anyhow!("{} is invalid:\n  {}", path.display(), list.join("\n  ")),
        });
    }
    Ok(net)
}

fn load_solution(net: &Network, path: &Path) -> CliResult<CodingSolution<f64>> {
    solution::load_solution(net, path).map_err(solution_failure)
}

fn load_plan(path: &Path) -> CliResult<PrecisionPlan> {
    let text = read_file(path)?;
    PrecisionPlan::from_json(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(fail(EXIT_IO))
}

fn cmd_validate(path: &Path) -> CliResult {
    let net = network::load(path).map_err(network_failure)?;
    let violations = network::validate(&net);
    if violations.is_empty() {
        println!("{}: valid", net.name());
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure {
        code: EXIT_INVALID,
        error: anyhow!("{} violation(s)", violations.len()),
    })
}

fn cmd_design(a: DesignArgs) -> CliResult {
    let net = load_valid(&a.net)?;
    let cfg = SolverConfig {
        restarts: a.restarts,
        max_iters: a.iters,
        tol_f: a.tol_f,
        tol_step: a.tol_step,
        seed: a.seed,
        init_scale: a.init_scale,
        alpha_cap: (a.alpha_cap > 0.0).then_some(a.alpha_cap),
        pin_repeaters: !a.no_pin,
    };
    let report = solver::solve(&net, &cfg).map_err(fail(EXIT_INVALID))?;
    let text = solution::solution_to_json(&net, &report.best).map_err(solution_failure)?;
    write_file(&a.out, &text)?;
    for d in &report.diagnostics {
        eprintln!("warning: {d}");
    }
    println!("F = {:e}", report.profile.objective);
    println!("gamma = {:e}", report.profile.gamma_max);
    println!(
        "best restart {} of {}, converged: {}",
        report.best_restart, cfg.restarts, report.converged
    );
    println!("wall time {:.3} s", report.wall_time.as_secs_f64());
    if let Some(log) = a.log {
        let entry = DesignLog::new(&cfg, &report);
        write_file(&log, &to_json(&entry))?;
    }
    Ok(())
}

fn cmd_plan(a: PlanArgs) -> CliResult {
    let net = load_valid(&a.net)?;
    let sol = load_solution(&net, &a.sol)?;
    let messages = match (a.bits, a.bound) {
        (Some(n), _) => MessageSpec::Bits(n),
        (None, Some(m)) => MessageSpec::Bound(m),
        (None, None) => unreachable!("clap requires one of --bits, --M"),
    };
    let profile = gamma_profile(&net, &sol).map_err(fail(EXIT_INVALID))?;
    let gamma = a.gamma.unwrap_or(profile.gamma_max);
    let plan = match a.method {
        MethodArg::Theorem => {
            let stats = NetworkStats::new(&net, &sol).map_err(bounds_failure)?;
            bounds::plan_theorem(&stats, gamma, messages, a.effective_depth)
        }
        MethodArg::Tight => {
            let accounting = match a.accounting {
                AccountingArg::BetaWeighted => bounds::Accounting::BetaWeighted,
                AccountingArg::WorstEdge => bounds::Accounting::WorstEdge,
            };
            bounds::plan_tight(&net, &sol, messages, TightOptions { accounting, gamma: a.gamma })
        }
    }
    .map_err(bounds_failure)?;
    write_file(&a.out, &plan.to_json())?;
    println!("gamma = {gamma:e}");
    if let Some(m) = bounds::max_message_bound(gamma) {
        println!("largest M = {m}");
    }
    println!(
        "b = {}, P = {}, p = {}, M = {}, n_bits = {}",
        plan.b, plan.int_digits, plan.p, plan.bound, plan.n_bits
    );
    println!("rate = {}", plan.rate);
    println!("margin = {:e}", plan.margin);
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let net = load_valid(&a.net)?;
    let sol = load_solution(&net, &a.sol)?;
    let mut plan = load_plan(&a.plan)?;
    if let Some(p) = a.frac_digits {
        plan = plan.with_frac_digits(p);
    }
    let mode = match a.samples {
        Some(count) => VerifyMode::Sampled { count, seed: a.seed },
        None => VerifyMode::Exhaustive,
    };
    let options = VerifyOptions {
        exhaustive_budget: a.budget,
    };
    let report = match simkernel::verify(&net, &sol, plan.format(), plan.bound, mode, options) {
        Ok(r) => r,
        Err(e @ SimError::Overflow { .. }) => return Err(fail(EXIT_VERIFY)(e)),
        Err(e @ SimError::BudgetExceeded { .. }) => return Err(fail(EXIT_INFEASIBLE)(e)),
        Err(e) => return Err(fail(EXIT_INVALID)(e)),
    };
    if let Some(out) = &a.out {
        write_file(out, &report.to_json())?;
    }
    println!(
        "{} cases, {} failing demand(s) in {} case(s)",
        report.total_cases, report.failure_count, report.failing_cases
    );
    println!("max terminal residual {:e}", report.max_terminal_residual);
    println!("max internal residual {:e}", report.max_internal_residual);
    if let Some(f) = report.failures.first() {
        println!(
            "first failure: m = {:?}, {} demand {} decoded {} expected {}",
            f.messages, f.terminal, f.demand, f.decoded, f.expected
        );
    }
    if report.passed {
        println!("passed");
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            error: anyhow!("verification failed"),
        })
    }
}

fn parse_messages(s: &str) -> CliResult<Vec<i64>> {
    s.split(',')
        .map(|x| x.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("messages {s:?}"))
        .map_err(fail(EXIT_IO))
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let net = load_valid(&a.net)?;
    let sol = load_solution(&net, &a.sol)?;
    let msgs = parse_messages(&a.messages)?;
    let part = network::depth_partition(&net).map_err(network_failure)?;
    let real = simkernel::run_real(&net, &sol, &msgs.iter().map(|&m| m as f64).collect::<Vec<_>>())
        .map_err(fail(EXIT_INVALID))?;
    let fixed = match &a.plan {
        Some(p) => {
            let plan = load_plan(p)?;
            let mv = MessageVector::new(msgs.clone(), plan.bound).map_err(fail(EXIT_INVALID))?;
            Some(simkernel::run_fixed(&net, &sol, &mv, plan.format()).map_err(fail(EXIT_VERIFY))?)
        }
        None => None,
    };
    let mut out = String::new();
    let _ = writeln!(out, "{:<16} {:>5} {:>22} {:>22} {:>12}", "edge", "depth", "real", "fixed", "error");
    for e in net.edge_ids() {
        let r = real.edges[e.0];
        let (fx, err) = match &fixed {
            Some(f) => {
                let v = f.edges[e.0].to_f64();
                (format!("{v}"), format!("{:.3e}", (v - r).abs()))
            }
            None => ("-".into(), "-".into()),
        };
        let _ = writeln!(out, "{:<16} {:>5} {:>22} {:>22} {:>12}", net.edge(e).name, part.edge_depth(e), r, fx, err);
    }
    for (j, d) in net.demands().iter().enumerate() {
        let t = &net.node(d.terminal).name;
        let _ = write!(out, "{t} demand {} (m{}): real {}", d.position + 1, d.message + 1, real.outputs[j]);
        if let Some(f) = &fixed {
            let _ = write!(out, ", fixed {} -> {}", f.outputs[j], f.decoded[j]);
        }
        let _ = writeln!(out, ", expected {}", msgs.get(d.message).copied().unwrap_or_default());
    }
    print!("{out}");
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CliResult {
    if a.nodes < 2 || a.max_indeg == 0 || a.terminals == 0 || a.max_messages == 0 {
        return Err(Failure {
            code: EXIT_INVALID,
            error: anyhow!("--nodes must be at least 2 and the other counts positive"),
        });
    }
    if a.terminals >= a.nodes {
        return Err(Failure {
            code: EXIT_INVALID,
            error: anyhow!("--terminals must be below --nodes"),
        });
    }
    let net = random_network(&GeneratorConfig {
        nodes: a.nodes,
        max_in_degree: a.max_indeg,
        terminals: a.terminals,
        max_messages: a.max_messages,
        seed: a.seed,
    });
    write_file(&a.out, &net.to_json())?;
    println!("{}: {} nodes, {} edges, {} messages", net.name(), net.node_count(), net.edge_count(), net.message_count());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> CliResult {
    let manifest = RunManifest::collect(
        &a.net,
        a.sol.as_deref(),
        a.plan.as_deref(),
        a.verification.as_deref(),
        a.design.as_deref(),
    )?;
    print!("{}", manifest.summary());
    if let Some(out) = &a.out {
        write_file(out, &to_json(&manifest))?;
    }
    Ok(())
}

fn cmd_fixture(a: FixtureArgs) -> CliResult {
    let Some(name) = a.name else {
        for n in fixtures::NAMES {
            println!("{n}");
        }
        return Ok(());
    };
    let net = fixtures::by_name(&name).ok_or_else(|| Failure {
        code: EXIT_INVALID,
        error: anyhow!("unknown fixture {name:?}; known: {}", fixtures::NAMES.join(", ")),
    })?;
    fs::create_dir_all(&a.dir)
        .with_context(|| format!("creating {}", a.dir.display()))
        .map_err(fail(EXIT_IO))?;
    let net_path = a.dir.join(format!("{name}.json"));
    write_file(&net_path, &net.to_json())?;
    println!("wrote {}", net_path.display());
    if let Some(sol) = fixtures::known_solution(&name, &net) {
        let path = a.dir.join(format!("{name}.sol.json"));
        write_file(&path, &solution::solution_to_json(&net, &sol).map_err(solution_failure)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
