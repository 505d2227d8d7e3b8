//! Dirichlet problem for each operator of the suite with a step datum.

use ainfty_lab::pde::{gradient, operator_suite, solve_dirichlet, BoundaryData, Grid, SolverOptions};

fn main() -> ainfty_lab::Result<()> {
    let grid = Grid::truncated(0.0, 1.0, 4.0, 1.0 / 64.0)?;
    let data = BoundaryData::from_fn(&grid, |x, t| if t == 0.0 && x.abs() < 0.5 { 1.0 } else { 0.0 });
    let (i, j) = (grid.nx / 2, grid.nt / 4);
    for field in operator_suite() {
        let sol = solve_dirichlet(&field, &grid, &data, SolverOptions::default())?;
        let g = gradient(&sol);
        println!(
            "{:<24} u(0,1) = {:.5}  |grad u| near (0,1) = {:.4}  {} iters, residual {:.1e}, excess {:.1e}",
            field.name(),
            sol.value_at(0.0, 1.0)?,
            g.at(i, j)[0].hypot(g.at(i, j)[1]),
            sol.stats.iterations,
            sol.stats.residual,
            sol.max_principle_excess()
        );
    }
    Ok(())
}
