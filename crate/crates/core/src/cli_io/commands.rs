use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::format::{
    parse_instance, parse_solution, write_instance, write_solution, FormatError, SolutionFile,
};
use super::report::{
    render_json, render_text, Checks, ConfigEcho, InstanceDigest, IterationDigest, PhaseCounters,
    RunReport,
};
use crate::instance::KCommodityInstance;
use crate::ipm::{Engine, IpmError, Mode};
use crate::solver::{
    check_solution, generate_instance, solve_mincost, solve_throughput, throughput_instance,
    verify_certificate, FlowSolution, GeneratorConfig, SolveConfig, SolveError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "kflow", version, about = "k-commodity min-cost and max-throughput flow")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance and print a run report.
    Solve(SolveArgs),
    /// Check a solution file against an instance.
    Verify(VerifyArgs),
    /// Print a random feasible instance.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Mincost,
    Throughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Direct,
    Maintained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IpmArg {
    Strict,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Instance file.
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Problem::Mincost)]
    pub mode: Problem,
    #[arg(long, value_enum, default_value_t = EngineArg::Direct)]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = IpmArg::Practical)]
    pub ipm: IpmArg,
    /// Cap on attempted iterations per path phase.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Largest step scale in practical mode.
    #[arg(long)]
    pub step_scale: Option<f64>,
    /// Route maintained outputs through the stabilizer.
    #[arg(long)]
    pub stabilize: bool,
    /// Source/sink pairs `s1:t1,s2:t2,...` (throughput mode, 1-based).
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
    /// Also write the solution file here.
    #[arg(long)]
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub solution: PathBuf,
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Pairs of a throughput solution, as given to `solve`.
    #[arg(long)]
    pub pairs: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    pub report: ReportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    /// Largest capacity `U`.
    #[arg(long = "max-capacity", default_value_t = 10)]
    pub max_capacity: i64,
    /// Largest cost `C`.
    #[arg(long = "max-cost", default_value_t = 10)]
    pub max_cost: i64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the instance here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Io(String),
    Format(FormatError),
    Solve(SolveError),
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Format(_) | CliError::Usage(_) => EXIT_INVALID,
            CliError::Solve(e) => solve_exit_code(e),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(s) | CliError::Usage(s) => f.write_str(s),
            CliError::Format(e) => write!(f, "{e}"),
            CliError::Solve(e) => write!(f, "{e}"),
        }
    }
}

/// Exit code for a solver failure.
pub fn solve_exit_code(err: &SolveError) -> i32 {
    match err {
        SolveError::Instance(_) | SolveError::InvalidPair { .. } | SolveError::InvalidGenerator(_) => {
            EXIT_INVALID
        }
        SolveError::Ipm(IpmError::IterationCapExceeded { .. }) | SolveError::Infeasible { .. } => {
            EXIT_DIVERGED
        }
        _ => EXIT_FAILURE,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Parses `s1:t1,s2:t2,...` into 0-based pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>, String> {
    text.split(',')
        .map(|p| {
            let (s, t) = p
                .split_once(':')
                .ok_or_else(|| format!("pair {p:?} is not of the form s:t"))?;
            let parse = |v: &str| -> Result<usize, String> {
                match v.trim().parse::<usize>() {
                    Ok(x) if x >= 1 => Ok(x - 1),
                    _ => Err(format!("pair {p:?} has an invalid vertex {v:?}")),
                }
            };
            Ok((parse(s)?, parse(t)?))
        })
        .collect()
}

fn render<T: Serialize>(value: &T, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(value),
        ReportFormat::Json => render_json(value),
    }
}

fn finish(result: Result<i32, CliError>, err: &mut impl Write) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn config_from(args: &SolveArgs) -> SolveConfig {
    let mut cfg = SolveConfig {
        eps: args.eps,
        engine: match args.engine {
            EngineArg::Direct => Engine::Direct,
            EngineArg::Maintained => Engine::Maintained,
        },
        mode: match args.ipm {
            IpmArg::Strict => Mode::Strict,
            IpmArg::Practical => Mode::Practical,
        },
        stabilize: args.stabilize,
        ..SolveConfig::default()
    };
    if let Some(cap) = args.max_iters {
        cfg.max_iterations = cap;
    }
    if let Some(s) = args.step_scale {
        cfg.step_scale = s;
    }
    cfg
}

/// Assembles a report whose numbers are recomputed from `flows` and the certificate.
fn build_report(
    inst: &KCommodityInstance,
    config: ConfigEcho,
    flows: &[Vec<f64>],
    dual: Option<&[f64]>,
    sol: &FlowSolution,
    throughput: Option<f64>,
    wall_time_s: f64,
) -> Result<RunReport, SolveError> {
    let eps = config.eps;
    let cert = &sol.certificate;
    let certificate = verify_certificate(&cert.lp, &cert.iterate.x, &cert.iterate.y, &cert.iterate.s, eps)?;
    let claimed = inst.objective(flows);
    let solution = check_solution(inst, flows, claimed, dual, eps)?;
    Ok(RunReport {
        instance: InstanceDigest::of(inst),
        config,
        objective: solution.objective,
        throughput,
        residuals: solution.residuals.clone(),
        total_residual: solution.total_residual,
        gap: certificate.gap,
        iterations: IterationDigest {
            reverse: sol.reverse.iterations,
            forward: sol.forward.iterations,
            total: sol.reverse.iterations + sol.forward.iterations,
            rejected: sol.reverse.rejected + sol.forward.rejected,
            batches: sol.reverse.batches + sol.forward.batches,
        },
        wall_time_s,
        counters: PhaseCounters {
            reverse: sol.reverse.counters.clone(),
            forward: sol.forward.counters.clone(),
        },
        pass: certificate.pass && solution.pass,
        checks: Checks {
            certificate,
            solution,
        },
    })
}

pub fn cmd_solve(args: &SolveArgs, out: &mut impl Write, err: &mut impl Write) -> i32 {
    finish(solve_inner(args, out), err)
}

fn solve_inner(args: &SolveArgs, out: &mut impl Write) -> Result<i32, CliError> {
    let inst = parse_instance(&read(&args.instance)?).map_err(CliError::Format)?;
    if !(args.eps > 0.0) {
        return Err(CliError::Usage(format!("--eps must be positive, got {}", args.eps)));
    }
    let cfg = config_from(args);
    let mut echo = ConfigEcho {
        problem: "mincost",
        engine: cfg.engine,
        ipm: cfg.mode,
        eps: cfg.eps,
        step_scale: cfg.step_scale,
        max_iterations: cfg.max_iterations,
        stabilize: cfg.stabilize,
        pairs: None,
    };
    let started = Instant::now();
    let (report, file) = match args.mode {
        Problem::Mincost => {
            if args.pairs.is_some() {
                return Err(CliError::Usage("--pairs requires --mode throughput".into()));
            }
            let sol = solve_mincost(&inst, &cfg).map_err(CliError::Solve)?;
            let wall = started.elapsed().as_secs_f64();
            let report = build_report(&inst, echo, &sol.flows, Some(&sol.dual), &sol, None, wall)
                .map_err(CliError::Solve)?;
            let file = SolutionFile {
                objective: report.objective,
                throughput: None,
                flows: sol.flows.clone(),
                dual: Some(sol.dual.clone()),
            };
            (report, file)
        }
        Problem::Throughput => {
            let text = args
                .pairs
                .as_deref()
                .ok_or_else(|| CliError::Usage("--mode throughput requires --pairs".into()))?;
            let pairs = parse_pairs(text).map_err(CliError::Usage)?;
            echo.problem = "throughput";
            echo.pairs = Some(pairs.iter().map(|&(s, t)| (s + 1, t + 1)).collect());
            let sol = solve_throughput(inst.graph(), inst.capacity(), &pairs, &cfg)
                .map_err(CliError::Solve)?;
            let wall = started.elapsed().as_secs_f64();
            let report = build_report(
                &sol.instance,
                echo,
                &sol.flows,
                None,
                &sol.inner,
                Some(sol.throughput),
                wall,
            )
            .map_err(CliError::Solve)?;
            let file = SolutionFile {
                objective: report.objective,
                throughput: Some(sol.throughput),
                flows: sol.flows.clone(),
                dual: None,
            };
            (report, file)
        }
    };
    if let Some(path) = &args.solution {
        write_file(path, &write_solution(&file))?;
    }
    out.write_all(render(&report, args.report).as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILURE })
}

#[derive(Debug, Clone, Serialize)]
struct VerifyOutput {
    instance: InstanceDigest,
    check: crate::solver::SolutionCheck,
    #[serde(skip_serializing_if = "Option::is_none")]
    throughput: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    throughput_recomputed: Option<f64>,
    pass: bool,
}

pub fn cmd_verify(args: &VerifyArgs, out: &mut impl Write, err: &mut impl Write) -> i32 {
    finish(verify_inner(args, out), err)
}

fn verify_inner(args: &VerifyArgs, out: &mut impl Write) -> Result<i32, CliError> {
    let base = parse_instance(&read(&args.instance)?).map_err(CliError::Format)?;
    let inst = match &args.pairs {
        Some(text) => {
            let pairs = parse_pairs(text).map_err(CliError::Usage)?;
            throughput_instance(base.graph(), base.capacity(), &pairs).map_err(CliError::Solve)?
        }
        None => base,
    };
    let dual_dim = inst.k() * (inst.n() - 1) + inst.m();
    let sol = parse_solution(&read(&args.solution)?, inst.k(), inst.m(), dual_dim)
        .map_err(CliError::Format)?;
    if sol.throughput.is_some() && args.pairs.is_none() {
        return Err(CliError::Usage("throughput solution requires --pairs".into()));
    }
    let check = check_solution(&inst, &sol.flows, sol.objective, sol.dual.as_deref(), args.eps)
        .map_err(CliError::Solve)?;
    let base_m = inst.m() - if args.pairs.is_some() { inst.k() } else { 0 };
    let recomputed = args
        .pairs
        .as_ref()
        .map(|_| (0..inst.k()).map(|i| sol.flows[i][base_m + i]).sum::<f64>());
    let throughput_ok = match (sol.throughput, recomputed) {
        (Some(claimed), Some(r)) => (claimed - r).abs() <= args.eps,
        _ => true,
    };
    let report = VerifyOutput {
        instance: InstanceDigest::of(&inst),
        pass: check.pass && throughput_ok,
        check,
        throughput: sol.throughput,
        throughput_recomputed: recomputed,
    };
    out.write_all(render(&report, args.report).as_bytes())
        .map_err(|e| CliError::Io(e.to_string()))?;
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILURE })
}

pub fn cmd_gen(args: &GenArgs, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let result = (|| {
        let inst = generate_instance(&GeneratorConfig {
            n: args.n,
            m: args.m,
            k: args.k,
            max_capacity: args.max_capacity,
            max_cost: args.max_cost,
            seed: args.seed,
        })
        .map_err(CliError::Solve)?;
        let text = write_instance(&inst);
        match &args.out {
            Some(path) => write_file(path, &text)?,
            None => out
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))?,
        }
        Ok(EXIT_OK)
    })();
    finish(result, err)
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli, out: &mut impl Write, err: &mut impl Write) -> i32 {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, out, err),
        Command::Verify(a) => cmd_verify(a, out, err),
        Command::Gen(a) => cmd_gen(a, out, err),
    }
}
