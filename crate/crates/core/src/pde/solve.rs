//! Dirichlet problems on a truncated half-plane rectangle: forward solves,
//! adjoint solves and solution post-processing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::assemble::{assemble, num_faces, Stencil, SystemMatrix};
use crate::pde::banded::BandedLu;
use crate::pde::coeff::CoefficientField;
use crate::pde::grid::Grid;
use crate::pde::krylov::{bicgstab, pcg, true_residual, KrylovControl, SolveStats};
use crate::pde::multigrid::Multigrid;

/// Slack allowed on the discrete maximum principle.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual targeted by the iterative solvers.
    pub tol: f64,
    /// Largest relative residual accepted as converged.
    pub accept: f64,
    pub max_iter: usize,
    /// Systems with `N·bandwidth` at most this are factored directly.
    pub direct_limit: usize,
    /// Gauss–Seidel sweeps before and after each coarse correction.
    pub smoothing: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-13,
            accept: 1e-10,
            max_iter: 200,
            direct_limit: 2_000_000,
            smoothing: 2,
        }
    }
}

/// Dirichlet values on the four sides, one per boundary face.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub bottom: Vec<f64>,
    pub top: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl BoundaryData {
    pub fn zeros(grid: &Grid) -> Self {
        BoundaryData {
            bottom: vec![0.0; grid.nx],
            top: vec![0.0; grid.nx],
            left: vec![0.0; grid.nt],
            right: vec![0.0; grid.nt],
        }
    }

    /// Bottom data with zero on the artificial sides and top.
    pub fn bottom_only(grid: &Grid, bottom: Vec<f64>) -> Result<Self> {
        if bottom.len() != grid.nx {
            return Err(Error::Mismatch(format!(
                "bottom datum has {} values for {} faces",
                bottom.len(),
                grid.nx
            )));
        }
        Ok(BoundaryData {
            bottom,
            ..Self::zeros(grid)
        })
    }

    /// Samples `g(x, t)` at the boundary face midpoints.
    pub fn from_fn(grid: &Grid, g: impl Fn(f64, f64) -> f64) -> Self {
        BoundaryData {
            bottom: (0..grid.nx).map(|i| g(grid.x_center(i), 0.0)).collect(),
            top: (0..grid.nx).map(|i| g(grid.x_center(i), grid.t_top)).collect(),
            left: (0..grid.nt).map(|j| g(grid.x_lo, grid.t_center(j))).collect(),
            right: (0..grid.nt).map(|j| g(grid.x_hi, grid.t_center(j))).collect(),
        }
    }

    /// Face vector in the assembly's face numbering.
    pub fn faces(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * (self.bottom.len() + self.left.len()));
        out.extend_from_slice(&self.bottom);
        out.extend_from_slice(&self.top);
        out.extend_from_slice(&self.left);
        out.extend_from_slice(&self.right);
        out
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.bottom.len() != grid.nx
            || self.top.len() != grid.nx
            || self.left.len() != grid.nt
            || self.right.len() != grid.nt
        {
            return Err(Error::Mismatch("boundary data do not match the grid".into()));
        }
        if self.faces().iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("boundary data must be finite".into()));
        }
        Ok(())
    }

    pub fn range(&self) -> (f64, f64) {
        self.faces()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

#[derive(Clone, Debug)]
pub struct GridSolution {
    pub grid: Grid,
    /// Cell values, row by row from the bottom.
    pub u: Vec<f64>,
    pub data: BoundaryData,
    pub stats: SolveStats,
    pub warnings: Vec<String>,
}

impl GridSolution {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.index(i, j)]
    }

    /// Bilinear interpolation among cell centers.
    pub fn value_at(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self
            .grid
            .interpolation(x, t)?
            .iter()
            .map(|&(c, w)| w * self.u[c])
            .sum())
    }

    pub fn range(&self) -> (f64, f64) {
        self.u
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// How far the solution leaves `[min data, max data]`; zero when inside.
    pub fn max_principle_excess(&self) -> f64 {
        let (dlo, dhi) = self.data.range();
        let (ulo, uhi) = self.range();
        (dlo - ulo).max(uhi - dhi).max(0.0)
    }

    /// `i,j,x,t,u` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "x", "t", "u"])?;
        for j in 0..self.grid.nt {
            for i in 0..self.grid.nx {
                w.write_record(&[
                    i.to_string(),
                    j.to_string(),
                    format!("{}", self.grid.x_center(i)),
                    format!("{}", self.grid.t_center(j)),
                    format!("{:e}", self.value(i, j)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

enum Engine {
    Direct(BandedLu),
    Iterative(Box<Multigrid>),
}

impl Engine {
    fn build(
        field: &CoefficientField,
        grid: &Grid,
        st: &Stencil,
        transpose: bool,
        opts: &SolverOptions,
    ) -> Result<Self> {
        if BandedLu::cost(grid.nx, grid.nt) <= opts.direct_limit {
            Ok(Engine::Direct(BandedLu::factor(st)?))
        } else {
            Ok(Engine::Iterative(Box::new(Multigrid::build(
                field,
                grid,
                st,
                transpose,
                opts.smoothing,
            )?)))
        }
    }

    fn solve(
        &mut self,
        st: &Stencil,
        symmetric: bool,
        b: &[f64],
        x: &mut [f64],
        opts: &SolverOptions,
    ) -> Result<SolveStats> {
        let ctl = KrylovControl {
            tol: opts.tol,
            accept: opts.accept,
            max_iter: opts.max_iter,
        };
        match self {
            Engine::Direct(lu) => {
                lu.solve(b, x);
                let residual = true_residual(st, b, x);
                if !(residual <= opts.accept) {
                    return Err(Error::NumericalFailure {
                        iterations: 1,
                        residual,
                        history: vec![residual],
                    });
                }
                Ok(SolveStats {
                    method: "banded-lu".into(),
                    iterations: 1,
                    residual,
                    history: vec![residual],
                })
            }
            Engine::Iterative(mg) => {
                let pre = |r: &[f64], z: &mut [f64]| mg.apply(st, r, z);
                if symmetric {
                    pcg(st, b, x, &ctl, pre)
                } else {
                    bicgstab(st, b, x, &ctl, pre)
                }
            }
        }
    }
}

/// An assembled operator with lazily built forward and adjoint solvers.
pub struct DirichletProblem {
    field: CoefficientField,
    system: SystemMatrix,
    symmetric: bool,
    options: SolverOptions,
    forward: Option<Engine>,
    adjoint: Option<(Stencil, Engine)>,
}

impl DirichletProblem {
    pub fn new(field: &CoefficientField, grid: &Grid, options: SolverOptions) -> Result<Self> {
        let system = assemble(field, grid)?;
        let symmetric = system.stencil.is_symmetric();
        Ok(DirichletProblem {
            field: field.clone(),
            system,
            symmetric,
            options,
            forward: None,
            adjoint: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.system.grid
    }

    pub fn system(&self) -> &SystemMatrix {
        &self.system
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn solve(&mut self, data: &BoundaryData) -> Result<GridSolution> {
        let grid = self.system.grid.clone();
        data.check(&grid)?;
        let b = self.system.rhs(&data.faces());
        let st = &self.system.stencil;
        if self.forward.is_none() {
            self.forward = Some(Engine::build(&self.field, &grid, st, false, &self.options)?);
        }
        let engine = self.forward.as_mut().unwrap();
        let mut x = vec![0.0; st.padded_len()];
        let stats = engine.solve(st, self.symmetric, &b, &mut x, &self.options)?;
        Ok(GridSolution {
            u: st.unpad(&x),
            grid,
            data: data.clone(),
            stats,
            warnings: self.system.warnings.clone(),
        })
    }

    /// Boundary face weights `ω = Bᵀ M⁻ᵀ w` for point weights `w` on cells,
    /// so that `Σ_faces ω·g = Σ_cells w·u` for every datum `g`.
    pub fn adjoint_weights(&mut self, cells: &[(usize, f64)]) -> Result<(Vec<f64>, SolveStats)> {
        let grid = self.system.grid.clone();
        let st = &self.system.stencil;
        let mut w = vec![0.0; st.padded_len()];
        for &(c, v) in cells {
            if c >= grid.len() {
                return Err(Error::Geometry(format!("cell {c} outside the grid")));
            }
            w[st.at(c % grid.nx, c / grid.nx)] += v;
        }
        let mut y = vec![0.0; st.padded_len()];
        let stats = if self.symmetric {
            if self.forward.is_none() {
                self.forward = Some(Engine::build(&self.field, &grid, st, false, &self.options)?);
            }
            let engine = self.forward.as_mut().unwrap();
            engine.solve(st, true, &w, &mut y, &self.options)?
        } else {
            if self.adjoint.is_none() {
                let t = st.transpose();
                let engine = Engine::build(&self.field, &grid, &t, true, &self.options)?;
                self.adjoint = Some((t, engine));
            }
            let (t, engine) = self.adjoint.as_mut().unwrap();
            engine.solve(t, false, &w, &mut y, &self.options)?
        };
        let faces = self.system.boundary_adjoint(&y);
        debug_assert_eq!(faces.len(), num_faces(&grid));
        Ok((faces, stats))
    }

    /// Face weights of the point evaluation at `(x, t)`.
    pub fn point_weights(&mut self, x: f64, t: f64) -> Result<(Vec<f64>, SolveStats)> {
        if !self.system.grid.contains(x, t) {
            return Err(Error::Geometry(format!("pole ({x}, {t}) is not inside the grid")));
        }
        let w = self.system.grid.interpolation(x, t)?;
        self.adjoint_weights(&w)
    }
}

pub fn solve_dirichlet(
    field: &CoefficientField,
    grid: &Grid,
    data: &BoundaryData,
    options: SolverOptions,
) -> Result<GridSolution> {
    DirichletProblem::new(field, grid, options)?.solve(data)
}

/// Cell gradients of a solution; centered inside, one-sided at the edges.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub grid: Grid,
    pub gx: Vec<f64>,
    pub gt: Vec<f64>,
}

impl GradientField {
    pub fn at(&self, i: usize, j: usize) -> [f64; 2] {
        let c = self.grid.index(i, j);
        [self.gx[c], self.gt[c]]
    }

    pub fn norm_sq(&self, c: usize) -> f64 {
        self.gx[c] * self.gx[c] + self.gt[c] * self.gt[c]
    }
}

pub fn gradient(sol: &GridSolution) -> GradientField {
    let g = &sol.grid;
    let (nx, nt, h) = (g.nx, g.nt, g.h);
    let u = &sol.u;
    let mut gx = vec![0.0; nx * nt];
    let mut gt = vec![0.0; nx * nt];
    let diff = |lo: f64, hi: f64, span: usize| (hi - lo) / (span as f64 * h);
    for j in 0..nt {
        for i in 0..nx {
            let c = j * nx + i;
            gx[c] = match (i > 0, i + 1 < nx) {
                (true, true) => diff(u[c - 1], u[c + 1], 2),
                (false, true) => diff(u[c], u[c + 1], 1),
                (true, false) => diff(u[c - 1], u[c], 1),
                (false, false) => 0.0,
            };
            gt[c] = match (j > 0, j + 1 < nt) {
                (true, true) => diff(u[c - nx], u[c + nx], 2),
                (false, true) => diff(u[c], u[c + nx], 1),
                (true, false) => diff(u[c - nx], u[c], 1),
                (false, false) => 0.0,
            };
        }
    }
    GradientField {
        grid: g.clone(),
        gx,
        gt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::coeff::operator_suite;

    fn small() -> Grid {
        Grid::truncated(0.0, 1.0, 2.0, 1.0 / 8.0).unwrap()
    }

    #[test]
    fn constants_are_exact() {
        let g = small();
        for op in operator_suite() {
            let data = BoundaryData::from_fn(&g, |_, _| 0.7);
            let sol = solve_dirichlet(&op, &g, &data, SolverOptions::default()).unwrap();
            for v in &sol.u {
                assert!((v - 0.7).abs() < 1e-12, "{} gave {v}", op.name());
            }
        }
    }

    #[test]
    fn linear_in_t_is_exact() {
        let g = small();
        let data = BoundaryData::from_fn(&g, |_, t| t);
        let sol = solve_dirichlet(&CoefficientField::identity(), &g, &data, SolverOptions::default())
            .unwrap();
        for j in 0..g.nt {
            for i in 0..g.nx {
                assert!((sol.value(i, j) - g.t_center(j)).abs() < 1e-12);
            }
        }
        let grad = gradient(&sol);
        for j in 0..g.nt {
            for i in 0..g.nx {
                let [a, b] = grad.at(i, j);
                assert!(a.abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
            }
        }
    }

    fn iterative() -> SolverOptions {
        SolverOptions {
            direct_limit: 0,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn iterative_matches_direct() {
        let g = Grid::truncated(0.0, 1.0, 4.0, 1.0 / 16.0).unwrap();
        let data = BoundaryData::bottom_only(
            &g,
            (0..g.nx).map(|i| (g.x_center(i).abs() <= 0.5) as u8 as f64).collect(),
        )
        .unwrap();
        for op in operator_suite() {
            let a = solve_dirichlet(&op, &g, &data, SolverOptions::default()).unwrap();
            let b = solve_dirichlet(&op, &g, &data, iterative()).unwrap();
            assert_eq!(a.stats.method, "banded-lu");
            assert!(b.stats.method.starts_with("multigrid"));
            assert!(b.stats.residual <= 1e-10);
            for (x, y) in a.u.iter().zip(&b.u) {
                assert!((x - y).abs() < 1e-10, "{}: {x} vs {y}", op.name());
            }
            assert!(b.max_principle_excess() <= MAX_PRINCIPLE_TOL);
        }
    }

    #[test]
    fn adjoint_reproduces_point_value() {
        let g = Grid::truncated(0.0, 1.0, 4.0, 1.0 / 16.0).unwrap();
        for opts in [SolverOptions::default(), iterative()] {
            for op in operator_suite() {
                let mut prob = DirichletProblem::new(&op, &g, opts.clone()).unwrap();
                let data = BoundaryData::from_fn(&g, |x, t| (x * 1.3).sin() + 0.2 * t);
                let sol = prob.solve(&data).unwrap();
                let (w, _) = prob.point_weights(0.3, 1.1).unwrap();
                let via: f64 = w.iter().zip(data.faces()).map(|(a, b)| a * b).sum();
                let direct = sol.value_at(0.3, 1.1).unwrap();
                assert!((via - direct).abs() < 1e-9, "{}: {via} vs {direct}", op.name());
                let total: f64 = w.iter().sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pole_outside_is_rejected() {
        let g = small();
        let mut prob = DirichletProblem::new(&CoefficientField::identity(), &g, SolverOptions::default())
            .unwrap();
        assert!(matches!(prob.point_weights(0.0, 0.0), Err(Error::Geometry(_))));
        assert!(matches!(prob.point_weights(9.0, 1.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn bilinear_gradient() {
        let g = small();
        let data = BoundaryData::from_fn(&g, |x, t| x * t);
        let sol = solve_dirichlet(&CoefficientField::identity(), &g, &data, SolverOptions::default())
            .unwrap();
        let grad = gradient(&sol);
        for &(i, j) in &[(3, 2), (10, 7), (20, 12)] {
            let [a, b] = grad.at(i, j);
            assert!((a - g.t_center(j)).abs() < 1e-9);
            assert!((b - g.x_center(i)).abs() < 1e-9);
        }
    }
}
