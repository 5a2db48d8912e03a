//! Two commodities competing for a shared edge.

use kflow::instance::{DirectedGraph, KCommodityInstance};
use kflow::solver::{check_solution, solve_mincost, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Edge 0→1 (capacity 3) and the detour 0→2→1 (capacity 5 each).
    let graph = DirectedGraph::new(3, vec![(0, 1), (0, 2), (2, 1)])?;
    let inst = KCommodityInstance::new(
        graph,
        vec![3, 5, 5],
        vec![vec![1, 1, 1], vec![1, 2, 2]],
        vec![vec![-2, 2, 0], vec![-2, 2, 0]],
    )?;
    let cfg = SolveConfig::default().with_eps(1e-3);
    let sol = solve_mincost(&inst, &cfg)?;
    println!("objective {:.6} (optimum 5)", sol.objective);
    for (i, f) in sol.flows.iter().enumerate() {
        println!("commodity {}: {:?}", i + 1, f.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    }
    println!(
        "iterations {} (reverse {}, forward {}), gap {:.2e}",
        sol.iterations, sol.reverse.iterations, sol.forward.iterations, sol.gap
    );
    let check = check_solution(&inst, &sol.flows, sol.objective, Some(&sol.dual), cfg.eps)?;
    println!("independent check passes: {}", check.pass);
    Ok(())
}
