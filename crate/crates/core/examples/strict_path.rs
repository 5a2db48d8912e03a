//! Strict-mode path following with the per-iteration invariant audit.

use kflow::instance::augment_initial;
use kflow::ipm::{run_path, Direction, Engine, IpmParameters};
use kflow::solver::{generate_instance, GeneratorConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = generate_instance(&GeneratorConfig {
        n: 3,
        m: 3,
        k: 1,
        max_capacity: 5,
        max_cost: 5,
        seed: 11,
    })?;
    let (aug, start) = augment_initial(&inst, 0.01)?;
    let params = IpmParameters::strict(inst.k(), aug.m(), Direction::Forward).with_audit(true);
    println!("lambda {:.3}, h {:.3e}", params.lambda, params.h);
    let out = run_path(Engine::Direct, aug.lp_start(), start, 1e-3, &params)?;
    let a = &out.stats.audit;
    println!("reached t = {:.3e} in {} iterations", out.iterate.t, out.stats.iterations);
    println!("max centrality {:.3e} (bound {:.4})", a.max_centrality, 1.0 / 16.0);
    println!(
        "max step norms {:.3e} / {:.3e} (bound {:.3})",
        a.max_step_norm_s,
        a.max_step_norm_x,
        params.lambda / 16.0
    );
    let n = ((inst.k() + 1) * aug.m()) as f64;
    println!("max ratio {:.1} (bound {:.1}), magnitude violations {}", a.max_ratio, 3.0 * n, a.magnitude_violations);
    Ok(())
}
