//! Flattening a Lipschitz graph domain: the pulled-back coefficients.

use ainfty_lab::pde::{graph_transform, CoefficientField, LipschitzGraph};

fn main() -> ainfty_lab::Result<()> {
    let phi = LipschitzGraph::smoothed_abs();
    let b = graph_transform(&phi, &CoefficientField::identity())?;
    println!("graph Lipschitz constant {:.4}, lambda {:.4}", phi.lipschitz_constant(), b.lambda());
    for x in [-1.0, -0.05, 0.0, 0.05, 1.0] {
        let m = b.eval(x, 0.5);
        println!("x = {x:>5}: phi = {:.4}, A = {m:?}", phi.value(x));
    }
    Ok(())
}
