//! Empirical delta to epsilon curve of harmonic measure against Lebesgue.

use ainfty_lab::ainfty::ainfty_scan;
use ainfty_lab::measure::{make_measure, MeasureSpec};
use ainfty_lab::pde::{operator_by_name, DirichletProblem, Grid, SolverOptions};
use ainfty_lab::potential::{elliptic_measure, Interval};

fn main() -> ainfty_lab::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "pullback".into());
    let q = Interval::new(0.0, 1.0)?;
    let grid = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 64.0)?;
    let mut problem = DirichletProblem::new(&operator_by_name(&name, &[])?, &grid, SolverOptions::default())?;
    let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, 8)?;
    let leb = make_measure(&MeasureSpec::Lebesgue, 1, 8)?;
    let rep = ainfty_scan(&omega.measure, &leb, &[0.3, 0.1, 0.03, 0.01, 0.003, 0.001])?;
    println!("{:>8} {:>10} {:>10}  worst cube", "delta", "epsilon", "cells");
    for r in &rep.rows {
        println!("{:>8} {:>10.5} {:>10.5}  {}", r.delta, r.epsilon, r.epsilon_cells, r.worst_cube);
    }
    Ok(())
}
