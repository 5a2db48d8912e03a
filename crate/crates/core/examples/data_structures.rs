//! The maintenance building blocks on their own.

use std::sync::Arc;

use kflow::instance::{build_incidence, DirectedGraph};
use kflow::linalg::{DenseMatrix, InverseMaintenance};
use kflow::maintenance::{change_growth_slope, Stabilizer, SumOfProduct};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Running sums Σ_ℓ D A h^{(ℓ)} with a weight change in the middle.
    let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)])?;
    let a = Arc::new(build_incidence(&g).delete_first_column());
    let mut sop = SumOfProduct::new(Arc::clone(&a), vec![1.0, 2.0, 3.0])?;
    sop.add(&[1.0, 0.5])?;
    sop.update(2, 10.0)?;
    sop.add(&[0.0, 1.0])?;
    println!("sum of products: {:?}", (0..3).map(|e| sop.query(e)).collect::<Result<Vec<_>, _>>()?);

    // M⁻¹v under a permanent rank-1 update and a temporary one.
    let m = DenseMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
    let (mut im, x) = InverseMaintenance::init(m, vec![1.0, 2.0])?;
    println!("initial solution {x:?}");
    let u = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]);
    let x = im.update(&u, &u, vec![1.0, 2.0])?;
    println!("after M += e1 e1ᵀ: {x:?}");
    let y = im.temp_update(&u, &u, &[(1, 1.0)])?;
    println!("temporary (M + e1 e1ᵀ)⁻¹(v + e2): {y:?}, stored solution unchanged: {:?}", im.solution());

    // A drifting stream through the stabilizer.
    let mut st = Stabilizer::new(vec![0.0; 16], 0.05, 0.1);
    for step in 0..16 {
        st.stabilize(&[(step % 16, 0.02), ((step * 5) % 16, -0.01)]);
    }
    println!(
        "stabilizer changes per step {:?}, log-log slope {:?}",
        st.changes_per_step(),
        change_growth_slope(st.changes_per_step(), 4)
    );
    Ok(())
}
