//! Runs both engines on one instance and prints the maintained engine's
//! audit and cost counters.

use std::time::Instant;

use kflow::ipm::Engine;
use kflow::solver::{generate_instance, solve_mincost, GeneratorConfig, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = generate_instance(&GeneratorConfig {
        n: 7,
        m: 15,
        k: 2,
        max_capacity: 10,
        max_cost: 10,
        seed: 3,
    })?;
    let base = SolveConfig::default().with_eps(1e-3);
    let started = Instant::now();
    let direct = solve_mincost(&inst, &base)?;
    println!("direct     objective {:.6} in {:.2} s", direct.objective, started.elapsed().as_secs_f64());

    let mut cfg = base.with_engine(Engine::Maintained);
    cfg.audit = true;
    let started = Instant::now();
    let sol = solve_mincost(&inst, &cfg)?;
    println!("maintained objective {:.6} in {:.2} s", sol.objective, started.elapsed().as_secs_f64());
    for (phase, stats) in [("reverse", &sol.reverse), ("forward", &sol.forward)] {
        let a = &stats.audit;
        println!(
            "{phase}: {} iterations in {} batches, max ln-error of x̄/s̄ {:.2e} over {} checks, \
             {} premise violations, {} fallback solves",
            stats.iterations, stats.batches, a.max_maintenance_error, a.maintenance_checks,
            a.premise_violations, stats.solve_fallbacks
        );
        let c = &stats.counters;
        println!(
            "  s̄ rewrites {}, x̄ rewrites {}, heavy-hitter rows scanned {}, schur solves {}",
            c.primal_dual.s_rewrites, c.primal_dual.x_rewrites, c.heavy_hitter.rows_scanned, c.schur.solves
        );
    }
    Ok(())
}
