//! Elliptic measure of the dyadic partition of Q and the kernel bracket.

use ainfty_lab::pde::{operator_suite, DirichletProblem, Grid, SolverOptions};
use ainfty_lab::potential::{elliptic_measure, kernel_check, Half, Interval};

fn main() -> ainfty_lab::Result<()> {
    let q = Interval::new(0.0, 1.0)?;
    let grid = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 64.0)?;
    for field in operator_suite() {
        let mut problem = DirichletProblem::new(&field, &grid, SolverOptions::default())?;
        let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, 8)?;
        let left = kernel_check(&mut problem, &q, 0.25, Some(Half::Left))?;
        let right = kernel_check(&mut problem, &q, 0.25, Some(Half::Right))?;
        println!(
            "{:<24} omega(Q) {:.4}  leak {:.4}  kappa {:.3}  adjacent ratio {:.3}  halves {:.3}/{:.3}",
            field.name(),
            omega.measure.total(),
            omega.leak,
            omega.measure.doubling_constant(),
            omega.adjacent_ratio(6),
            left,
            right
        );
    }
    Ok(())
}
