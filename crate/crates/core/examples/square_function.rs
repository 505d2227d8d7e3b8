//! Square function, non-tangential maximal function and Carleson box
//! integral for the solution with datum the indicator of Q.

use ainfty_lab::pde::{CoefficientField, DirichletProblem, Grid, SolverOptions};
use ainfty_lab::potential::{interval_solution, ConeSpec, Interval, SolutionAnalysis};

fn main() -> ainfty_lab::Result<()> {
    let q = Interval::new(0.0, 1.0)?;
    let grid = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 64.0)?;
    let mut problem = DirichletProblem::new(&CoefficientField::identity(), &grid, SolverOptions::default())?;
    let sol = interval_solution(&mut problem, &q)?;
    let a = SolutionAnalysis::new(&sol);
    for x in [-1.0, -0.5, -0.25, 0.0, 0.75] {
        let cone = ConeSpec::new(x, 1.0, 1.0)?;
        println!(
            "x = {x:>5}: S^2 = {:.4}, u* = {:.4}",
            a.square_function_sq(&cone)?,
            a.nt_maximal(x, 1.0)?
        );
    }
    for level in 0..3 {
        let sub = q.sub(level, 0);
        println!("Carleson box over [{}, {}]: {:.4}", sub.lo(), sub.hi(), a.carleson_functional(&sub, 1.0)?);
    }
    Ok(())
}
