//! Command-line interface, file formats and run reports.

mod commands;
mod format;
mod report;

pub use commands::{
    cmd_gen, cmd_solve, cmd_verify, parse_pairs, run, solve_exit_code, Cli, Command, EngineArg,
    GenArgs, IpmArg, Problem, ReportFormat, SolveArgs, VerifyArgs, EXIT_DIVERGED, EXIT_FAILURE,
    EXIT_INVALID, EXIT_OK,
};
pub use format::{
    parse_instance, parse_solution, write_instance, write_solution, FormatError, SolutionFile,
};
pub use report::{
    render_json, render_text, Checks, ConfigEcho, InstanceDigest, IterationDigest, PhaseCounters,
    RunReport,
};
