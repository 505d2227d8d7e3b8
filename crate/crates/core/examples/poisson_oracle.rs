//! Harmonic measure of [-1/2, 1/2] seen from (0, 1) against the Poisson kernel.

use std::time::Instant;

use ainfty_lab::pde::{CoefficientField, DirichletProblem, Grid, SolverOptions};

fn main() -> ainfty_lab::Result<()> {
    let h: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0 / 256.0);
    let start = Instant::now();
    let grid = Grid::truncated(0.0, 1.0, 8.0, h)?;
    let mut problem = DirichletProblem::new(&CoefficientField::identity(), &grid, SolverOptions::default())?;
    let (w, stats) = problem.point_weights(0.0, 1.0)?;
    let faces = grid.face_range(-0.5, 0.5)?;
    let omega: f64 = w[faces].iter().sum();
    let exact = 2.0 / std::f64::consts::PI * 0.5f64.atan();
    println!("grid {}x{}  solver {} ({} iterations, residual {:.2e})", grid.nx, grid.nt, stats.method, stats.iterations, stats.residual);
    println!("omega = {omega:.6}  poisson = {exact:.6}  error = {:.2e}", (omega - exact).abs());
    println!("elapsed {:.2?}", start.elapsed());
    Ok(())
}
