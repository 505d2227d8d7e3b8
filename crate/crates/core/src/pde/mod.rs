//! Finite-volume solver for `div A∇u = 0` on a truncated upper half-plane.

pub mod assemble;
pub mod banded;
pub mod coeff;
pub mod grid;
pub mod krylov;
pub mod multigrid;
pub mod solve;

pub use assemble::{assemble, SystemMatrix};
pub use coeff::{graph_transform, operator_by_name, operator_suite, CoefficientField, LipschitzGraph};
pub use grid::Grid;
pub use krylov::SolveStats;
pub use solve::{
    gradient, solve_dirichlet, BoundaryData, DirichletProblem, GradientField, GridSolution,
    SolverOptions, MAX_PRINCIPLE_TOL,
};
