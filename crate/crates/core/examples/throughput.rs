//! Maximum total throughput of two source/sink pairs on a path.

use kflow::instance::DirectedGraph;
use kflow::solver::{solve_throughput, SolveConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = DirectedGraph::new(4, vec![(0, 1), (1, 2), (2, 3)])?;
    let capacity = [2, 6, 3];
    let pairs = [(0, 2), (1, 3)];
    let sol = solve_throughput(&graph, &capacity, &pairs, &SolveConfig::default().with_eps(1e-3))?;
    println!("throughput {:.6} (optimum 5)", sol.throughput);
    for (i, (f, r)) in sol.per_commodity.iter().zip(&sol.residuals_before_repair).enumerate() {
        println!("pair {}: {f:.6} units, residual before repair {r:.2e}", i + 1);
    }
    Ok(())
}
