//! Generates a random instance, round-trips it through the text format,
//! solves it and re-checks the written solution from scratch.

use kflow::cli_io::{parse_instance, parse_solution, write_instance, write_solution, SolutionFile};
use kflow::solver::{check_solution, generate_instance, solve_mincost, GeneratorConfig, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gen = GeneratorConfig {
        n: 6,
        m: 12,
        k: 2,
        max_capacity: 10,
        max_cost: 10,
        seed: 42,
    };
    let text = write_instance(&generate_instance(&gen)?);
    print!("{text}");
    let inst = parse_instance(&text)?;
    let cfg = SolveConfig::default().with_eps(1e-3);
    let sol = solve_mincost(&inst, &cfg)?;
    let file = SolutionFile {
        objective: sol.objective,
        throughput: None,
        flows: sol.flows.clone(),
        dual: Some(sol.dual.clone()),
    };
    let written = write_solution(&file);
    let read = parse_solution(&written, inst.k(), inst.m(), sol.dual.len())?;
    let check = check_solution(&inst, &read.flows, read.objective, read.dual.as_deref(), cfg.eps)?;
    println!(
        "objective {:.6}, residual {:.2e}, capacity excess {:.2e}, pass {}",
        check.objective, check.total_residual, check.capacity_excess, check.pass
    );
    Ok(())
}
