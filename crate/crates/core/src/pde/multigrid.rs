//! Geometric multigrid V-cycle used as a Krylov preconditioner.
//!
//! Coarse operators are rediscretized on the `2h` grids. Transfers are
//! cell-centered bilinear prolongation `P` and its exact transpose as
//! restriction, with odd reflection across the Dirichlet walls. Pre-smoothing
//! is forward Gauss–Seidel and post-smoothing the reversed sweep, so the cycle
//! is symmetric whenever the operators are.

use crate::error::Result;
use crate::pde::assemble::{assemble, Stencil};
use crate::pde::banded::BandedLu;
use crate::pde::coeff::CoefficientField;
use crate::pde::grid::Grid;

/// Coarsening stops once a level has at most this many cells.
const COARSEST_CELLS: usize = 4096;
/// Largest coarsest-level `N·bandwidth` factored directly.
const COARSE_DIRECT_COST: usize = 50_000_000;
const COARSE_SWEEPS: usize = 50;

#[derive(Clone, Debug)]
enum Coarse {
    Direct(BandedLu),
    Smooth,
}

#[derive(Clone, Debug)]
struct Work {
    r: Vec<f64>,
    bc: Vec<f64>,
    xc: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Multigrid {
    ops: Vec<Stencil>,
    work: Vec<Work>,
    coarse: Coarse,
    smoothing: usize,
}

impl Multigrid {
    /// Builds the coarse hierarchy below `fine`, which stays with the caller.
    /// With `transpose` the coarse operators are transposed as well.
    pub fn build(
        field: &CoefficientField,
        grid: &Grid,
        fine: &Stencil,
        transpose: bool,
        smoothing: usize,
    ) -> Result<Self> {
        let mut ops: Vec<Stencil> = Vec::new();
        let mut g = grid.clone();
        while g.len() > COARSEST_CELLS {
            let Some(c) = g.coarsen() else { break };
            let st = assemble(field, &c)?.stencil;
            ops.push(if transpose { st.transpose() } else { st });
            g = c;
        }
        let mut dims = vec![(fine.nx, fine.nt, fine.padded_len())];
        dims.extend(ops.iter().map(|s| (s.nx, s.nt, s.padded_len())));
        let work = dims
            .windows(2)
            .map(|w| Work {
                r: vec![0.0; w[0].2],
                bc: vec![0.0; w[1].2],
                xc: vec![0.0; w[1].2],
            })
            .collect();
        let last = ops.last().unwrap_or(fine);
        let coarse = if BandedLu::cost(last.nx, last.nt) <= COARSE_DIRECT_COST {
            Coarse::Direct(BandedLu::factor(last)?)
        } else {
            Coarse::Smooth
        };
        Ok(Multigrid {
            ops,
            work,
            coarse,
            smoothing,
        })
    }

    pub fn levels(&self) -> usize {
        self.ops.len() + 1
    }

    /// `z ≈ M⁻¹ r` by one V-cycle.
    pub fn apply(&mut self, fine: &Stencil, r: &[f64], z: &mut [f64]) {
        let mut chain: Vec<&Stencil> = Vec::with_capacity(self.ops.len() + 1);
        chain.push(fine);
        chain.extend(self.ops.iter());
        vcycle(&chain, &mut self.work, &self.coarse, self.smoothing, r, z);
    }
}

fn vcycle(
    chain: &[&Stencil],
    work: &mut [Work],
    coarse: &Coarse,
    nu: usize,
    b: &[f64],
    x: &mut [f64],
) {
    let st = chain[0];
    x.fill(0.0);
    if chain.len() == 1 {
        match coarse {
            Coarse::Direct(lu) => lu.solve(b, x),
            Coarse::Smooth => {
                for _ in 0..COARSE_SWEEPS {
                    st.gauss_seidel(b, x, true);
                    st.gauss_seidel(b, x, false);
                }
            }
        }
        return;
    }
    for _ in 0..nu {
        st.gauss_seidel(b, x, true);
    }
    let (w, rest) = work.split_first_mut().expect("work per level");
    st.residual(b, x, &mut w.r);
    let c = chain[1];
    restrict(st, &w.r, c, &mut w.bc);
    vcycle(&chain[1..], rest, coarse, nu, &w.bc, &mut w.xc);
    prolong_add(c, &w.xc, st, x);
    for _ in 0..nu {
        st.gauss_seidel(b, x, false);
    }
}

/// Coarse neighbors of fine cell `(i, j)` with bilinear weights; reflected
/// ghosts carry a negative sign.
#[inline]
fn stencil_of(i: usize, j: usize, ncx: usize, nct: usize) -> [(usize, usize, f64); 4] {
    let (ic, jc) = ((i / 2) as isize, (j / 2) as isize);
    let di = if i.is_multiple_of(2) { -1 } else { 1 };
    let dj = if j.is_multiple_of(2) { -1 } else { 1 };
    let map = |a: isize, b: isize, w: f64| -> (usize, usize, f64) {
        let mut sign = 1.0;
        let mut a = a;
        let mut b = b;
        if a < 0 {
            a = 0;
            sign = -sign;
        } else if a >= ncx as isize {
            a = ncx as isize - 1;
            sign = -sign;
        }
        if b < 0 {
            b = 0;
            sign = -sign;
        } else if b >= nct as isize {
            b = nct as isize - 1;
            sign = -sign;
        }
        (a as usize, b as usize, sign * w)
    };
    [
        map(ic, jc, 9.0 / 16.0),
        map(ic + di, jc, 3.0 / 16.0),
        map(ic, jc + dj, 3.0 / 16.0),
        map(ic + di, jc + dj, 1.0 / 16.0),
    ]
}

pub(crate) fn prolong_add(coarse: &Stencil, xc: &[f64], fine: &Stencil, x: &mut [f64]) {
    for j in 0..fine.nt {
        for i in 0..fine.nx {
            let mut v = 0.0;
            for (a, b, w) in stencil_of(i, j, coarse.nx, coarse.nt) {
                v += w * xc[coarse.at(a, b)];
            }
            x[fine.at(i, j)] += v;
        }
    }
}

pub(crate) fn restrict(fine: &Stencil, r: &[f64], coarse: &Stencil, bc: &mut [f64]) {
    bc.fill(0.0);
    for j in 0..fine.nt {
        for i in 0..fine.nx {
            let v = r[fine.at(i, j)];
            for (a, b, w) in stencil_of(i, j, coarse.nx, coarse.nt) {
                bc[coarse.at(a, b)] += w * v;
            }
        }
    }
}
