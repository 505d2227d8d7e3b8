//! Banded LU without pivoting for small grid systems.
//!
//! Cells are renumbered so the shorter grid dimension runs fastest, which
//! keeps the half-bandwidth at `min(nx, nt) + 1` for the nine-point stencil.
//! The matrices assembled here are M-matrices, so elimination without
//! pivoting is stable.

use crate::error::{Error, Result};
use crate::pde::assemble::Stencil;

#[derive(Clone, Debug)]
pub struct BandedLu {
    nx: usize,
    nt: usize,
    x_fast: bool,
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedLu {
    /// Work estimate `N·bandwidth` used to decide between direct and
    /// iterative solves.
    pub fn cost(nx: usize, nt: usize) -> usize {
        nx * nt * (nx.min(nt) + 1)
    }

    pub fn factor(st: &Stencil) -> Result<Self> {
        let (nx, nt) = (st.nx, st.nt);
        let x_fast = nx <= nt;
        let n = nx * nt;
        let bw = nx.min(nt) + 1;
        let width = 2 * bw + 1;
        let mut band = vec![0.0; n * width];
        let off = st.offsets();
        let order = |i: usize, j: usize| if x_fast { j * nx + i } else { i * nt + j };
        for j in 0..nt {
            for i in 0..nx {
                let p = st.at(i, j);
                let row = order(i, j);
                for (k, &o) in off.iter().enumerate() {
                    let v = st.coef[p][k];
                    if v == 0.0 {
                        continue;
                    }
                    let q = (p as isize + o) as usize;
                    let (qi, qj) = (q % (nx + 2), q / (nx + 2));
                    if qi == 0 || qj == 0 || qi > nx || qj > nt {
                        continue;
                    }
                    let col = order(qi - 1, qj - 1);
                    band[row * width + (col + bw - row)] += v;
                }
            }
        }
        for k in 0..n {
            let pivot = band[k * width + bw];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(Error::NumericalFailure {
                    iterations: k,
                    residual: f64::NAN,
                    history: vec![],
                });
            }
            let last = (k + bw).min(n - 1);
            for r in k + 1..=last {
                let lrk = band[r * width + (k + bw - r)];
                if lrk == 0.0 {
                    continue;
                }
                let f = lrk / pivot;
                band[r * width + (k + bw - r)] = f;
                for c in k + 1..=last {
                    let u = band[k * width + (c + bw - k)];
                    if u != 0.0 {
                        band[r * width + (c + bw - r)] -= f * u;
                    }
                }
            }
        }
        Ok(BandedLu { nx, nt, x_fast, n, bw, band })
    }

    /// Solves `M x = b` for padded vectors.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let (nx, nt, n, bw) = (self.nx, self.nt, self.n, self.bw);
        let width = 2 * bw + 1;
        let stride = nx + 2;
        let padded = |k: usize| -> usize {
            let (i, j) = if self.x_fast { (k % nx, k / nx) } else { (k / nt, k % nt) };
            (j + 1) * stride + i + 1
        };
        let mut y: Vec<f64> = (0..n).map(|k| b[padded(k)]).collect();
        for r in 0..n {
            let first = r.saturating_sub(bw);
            let mut acc = y[r];
            for c in first..r {
                acc -= self.band[r * width + (c + bw - r)] * y[c];
            }
            y[r] = acc;
        }
        for r in (0..n).rev() {
            let last = (r + bw).min(n - 1);
            let mut acc = y[r];
            for c in r + 1..=last {
                acc -= self.band[r * width + (c + bw - r)] * y[c];
            }
            y[r] = acc / self.band[r * width + bw];
        }
        for (k, v) in y.into_iter().enumerate() {
            x[padded(k)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::assemble::assemble;
    use crate::pde::coeff::CoefficientField;
    use crate::pde::grid::Grid;

    fn check(field: &CoefficientField, grid: &Grid) {
        let m = assemble(field, grid).unwrap();
        let st = &m.stencil;
        let lu = BandedLu::factor(st).unwrap();
        let n = st.padded_len();
        let want = st.pad(&(0..grid.len()).map(|k| ((k * 37) % 17) as f64 - 8.0).collect::<Vec<_>>());
        let mut b = vec![0.0; n];
        st.apply(&want, &mut b);
        let mut x = vec![0.0; n];
        lu.solve(&b, &mut x);
        for (a, w) in x.iter().zip(&want) {
            assert!((a - w).abs() < 1e-9, "{a} vs {w}");
        }
    }

    #[test]
    fn recovers_known_solution() {
        let f = CoefficientField::new("v", vec![], 0.2, false, |x, t| {
            let b = (3.0 * x).sin() + t;
            [[1.0 + 0.3 * x.cos(), 0.2 + b], [0.2 - b, 1.1]]
        })
        .unwrap();
        check(&f, &Grid::new(0.0, 1.0, 0.5, 1.0 / 16.0).unwrap());
        check(&f, &Grid::new(0.0, 0.5, 1.0, 1.0 / 16.0).unwrap());
        check(&CoefficientField::identity(), &Grid::new(-1.0, 1.0, 1.0, 0.125).unwrap());
    }
}
