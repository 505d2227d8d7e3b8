//! Cell-centered finite-volume assembly of `M = −h²·L_h`.
//!
//! The symmetric part `S` of `A` is split along directions,
//! `S = (a11 − |s|) e1e1ᵀ + (a22 − |s|) e2e2ᵀ + |s| ddᵀ` with
//! `d = (1, sign s)`, so every piece is a nonnegative one-dimensional
//! diffusion: axis weights are harmonic averages of the center values across
//! faces, and each grid vertex carries one diagonal edge with weight `|s|`.
//! The antisymmetric part `b = (a12 − a21)/2` acts as the divergence-free
//! drift `(−∂_t b, ∂_x b)`; its face fluxes are differences of `b` at the face
//! endpoints. A face uses the central value when that keeps its coefficient
//! nonnegative and the upwind value otherwise. Dirichlet data sit on the
//! boundary faces, half a cell from the centers.

use crate::error::Result;
use crate::pde::coeff::CoefficientField;
use crate::pde::grid::Grid;

pub const C: usize = 0;
pub const W: usize = 1;
pub const E: usize = 2;
pub const S: usize = 3;
pub const N: usize = 4;
pub const SW: usize = 5;
pub const SE: usize = 6;
pub const NW: usize = 7;
pub const NE: usize = 8;

pub const OPPOSITE: [usize; 9] = [C, E, W, N, S, NE, NW, SE, SW];

/// Nine-point stencil on a zero-padded `(nx + 2) × (nt + 2)` layout.
///
/// Row `p` reads `(M x)_p = Σ_k coef[p][k]·x[p + offset_k]`; off-diagonal
/// entries are nonpositive for a monotone assembly.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub nx: usize,
    pub nt: usize,
    pub coef: Vec<[f64; 9]>,
    pub nine_point: bool,
}

impl Stencil {
    pub fn zeros(nx: usize, nt: usize) -> Self {
        Stencil {
            nx,
            nt,
            coef: vec![[0.0; 9]; (nx + 2) * (nt + 2)],
            nine_point: false,
        }
    }

    pub fn stride(&self) -> usize {
        self.nx + 2
    }

    pub fn padded_len(&self) -> usize {
        (self.nx + 2) * (self.nt + 2)
    }

    /// Padded index of interior cell `(i, j)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> usize {
        (j + 1) * (self.nx + 2) + i + 1
    }

    pub fn offsets(&self) -> [isize; 9] {
        let s = self.stride() as isize;
        [0, -1, 1, -s, s, -s - 1, -s + 1, s - 1, s + 1]
    }

    pub fn pad(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.padded_len()];
        for j in 0..self.nt {
            let p = self.at(0, j);
            out[p..p + self.nx].copy_from_slice(&v[j * self.nx..(j + 1) * self.nx]);
        }
        out
    }

    pub fn unpad(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nx * self.nt);
        for j in 0..self.nt {
            let p = self.at(0, j);
            out.extend_from_slice(&v[p..p + self.nx]);
        }
        out
    }

    pub fn row(&self, i: usize, j: usize) -> [f64; 9] {
        self.coef[self.at(i, j)]
    }

    /// `y = M x` on padded vectors; ghost entries of `y` are left untouched.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let s = self.stride();
        for j in 1..=self.nt {
            let base = j * s;
            if self.nine_point {
                for p in base + 1..=base + self.nx {
                    let c = &self.coef[p];
                    y[p] = c[C] * x[p]
                        + c[W] * x[p - 1]
                        + c[E] * x[p + 1]
                        + c[S] * x[p - s]
                        + c[N] * x[p + s]
                        + c[SW] * x[p - s - 1]
                        + c[SE] * x[p - s + 1]
                        + c[NW] * x[p + s - 1]
                        + c[NE] * x[p + s + 1];
                }
            } else {
                for p in base + 1..=base + self.nx {
                    let c = &self.coef[p];
                    y[p] = c[C] * x[p]
                        + c[W] * x[p - 1]
                        + c[E] * x[p + 1]
                        + c[S] * x[p - s]
                        + c[N] * x[p + s];
                }
            }
        }
    }

    /// `r = b − M x`.
    pub fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        self.apply(x, r);
        for j in 1..=self.nt {
            let base = j * self.stride();
            for p in base + 1..=base + self.nx {
                r[p] = b[p] - r[p];
            }
        }
    }

    /// One Gauss–Seidel sweep, lexicographic or reversed.
    pub fn gauss_seidel(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let s = self.stride();
        let nx = self.nx;
        let nine = self.nine_point;
        let relax = |p: usize, x: &mut [f64]| {
            let c = &self.coef[p];
            let mut acc = b[p] - c[W] * x[p - 1] - c[E] * x[p + 1] - c[S] * x[p - s] - c[N] * x[p + s];
            if nine {
                acc -= c[SW] * x[p - s - 1]
                    + c[SE] * x[p - s + 1]
                    + c[NW] * x[p + s - 1]
                    + c[NE] * x[p + s + 1];
            }
            x[p] = acc / c[C];
        };
        if forward {
            for j in 1..=self.nt {
                for p in j * s + 1..=j * s + nx {
                    relax(p, x);
                }
            }
        } else {
            for j in (1..=self.nt).rev() {
                for p in (j * s + 1..=j * s + nx).rev() {
                    relax(p, x);
                }
            }
        }
    }

    pub fn transpose(&self) -> Stencil {
        let mut out = Stencil::zeros(self.nx, self.nt);
        out.nine_point = self.nine_point;
        let off = self.offsets();
        for j in 0..self.nt {
            for i in 0..self.nx {
                let p = self.at(i, j);
                let mut row = [0.0; 9];
                row[C] = self.coef[p][C];
                for k in 1..9 {
                    let q = (p as isize + off[k]) as usize;
                    row[k] = self.coef[q][OPPOSITE[k]];
                }
                out.coef[p] = row;
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        let off = self.offsets();
        (0..self.nt).all(|j| {
            (0..self.nx).all(|i| {
                let p = self.at(i, j);
                (1..9).all(|k| {
                    let q = (p as isize + off[k]) as usize;
                    self.coef[p][k] == self.coef[q][OPPOSITE[k]]
                })
            })
        })
    }
}

/// Coupling of an interior cell to a boundary face value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryLink {
    pub cell: u32,
    pub face: u32,
    pub weight: f64,
}

/// Boundary face numbering: bottom `0..nx`, top `nx..2nx`, left
/// `2nx..2nx+nt`, right `2nx+nt..2nx+2nt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    Bottom(usize),
    Top(usize),
    Left(usize),
    Right(usize),
}

impl Face {
    pub fn id(self, grid: &Grid) -> usize {
        match self {
            Face::Bottom(i) => i,
            Face::Top(i) => grid.nx + i,
            Face::Left(j) => 2 * grid.nx + j,
            Face::Right(j) => 2 * grid.nx + grid.nt + j,
        }
    }
}

pub fn num_faces(grid: &Grid) -> usize {
    2 * (grid.nx + grid.nt)
}

/// The assembled Dirichlet system `M u = B g`.
#[derive(Clone, Debug)]
pub struct SystemMatrix {
    pub grid: Grid,
    pub stencil: Stencil,
    pub links: Vec<BoundaryLink>,
    /// Faces where the drift flux was upwinded.
    pub upwinded_faces: usize,
    /// Cells whose axis weight went negative and was clipped to zero.
    pub clipped_cells: usize,
    pub warnings: Vec<String>,
}

impl SystemMatrix {
    pub fn is_monotone(&self) -> bool {
        self.clipped_cells == 0
    }

    /// `B g` as a padded vector.
    pub fn rhs(&self, faces: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.stencil.padded_len()];
        for l in &self.links {
            let c = l.cell as usize;
            let p = self.stencil.at(c % self.grid.nx, c / self.grid.nx);
            b[p] += l.weight * faces[l.face as usize];
        }
        b
    }

    /// `Bᵀ y` for a padded vector `y`.
    pub fn boundary_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; num_faces(&self.grid)];
        for l in &self.links {
            let c = l.cell as usize;
            let p = self.stencil.at(c % self.grid.nx, c / self.grid.nx);
            out[l.face as usize] += l.weight * y[p];
        }
        out
    }

    /// Row of `M / h²` for interior cell `(i, j)`, the classical scaling.
    pub fn scaled_row(&self, i: usize, j: usize) -> [f64; 9] {
        let h2 = self.grid.h * self.grid.h;
        self.stencil.row(i, j).map(|v| v / h2)
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

pub fn assemble(field: &CoefficientField, grid: &Grid) -> Result<SystemMatrix> {
    let (nx, nt) = (grid.nx, grid.nt);
    let n = nx * nt;
    let mut ax = vec![0.0; n];
    let mut at = vec![0.0; n];
    let mut clipped_cells = 0;
    for j in 0..nt {
        let t = grid.t_center(j);
        for i in 0..nx {
            let x = grid.x_center(i);
            let a = field.eval(x, t);
            field.probe_matrix(&a, x, t)?;
            let s = 0.5 * (a[0][1] + a[1][0]).abs();
            let (u, v) = (a[0][0] - s, a[1][1] - s);
            if u < 0.0 || v < 0.0 {
                clipped_cells += 1;
            }
            ax[j * nx + i] = u.max(0.0);
            at[j * nx + i] = v.max(0.0);
        }
    }
    let nvx = nx + 1;
    let mut sv = vec![0.0; nvx * (nt + 1)];
    let mut bv = vec![0.0; nvx * (nt + 1)];
    for vj in 0..=nt {
        let t = grid.t_face(vj);
        for vi in 0..=nx {
            let x = grid.x_face(vi);
            let a = field.eval(x, t);
            if vj > 0 {
                field.probe_matrix(&a, x, t)?;
            }
            sv[vj * nvx + vi] = 0.5 * (a[0][1] + a[1][0]);
            bv[vj * nvx + vi] = 0.5 * (a[0][1] - a[1][0]);
        }
    }

    let mut st = Stencil::zeros(nx, nt);
    let mut links = Vec::new();
    let mut upwinded_faces = 0;
    let vid = |vi: usize, vj: usize| vj * nvx + vi;

    for j in 0..nt {
        for i in 0..nx {
            let c = j * nx + i;
            let p = st.at(i, j);
            let (b_sw, b_se) = (bv[vid(i, j)], bv[vid(i + 1, j)]);
            let (b_nw, b_ne) = (bv[vid(i, j + 1)], bv[vid(i + 1, j + 1)]);
            // (direction, neighbor weight or boundary weight, drift flux, boundary face)
            let faces = [
                (W, (i > 0).then(|| harmonic(ax[c], ax[c - 1])), 2.0 * ax[c], b_nw - b_sw, Face::Left(j)),
                (E, (i + 1 < nx).then(|| harmonic(ax[c], ax[c + 1])), 2.0 * ax[c], b_se - b_ne, Face::Right(j)),
                (S, (j > 0).then(|| harmonic(at[c], at[c - nx])), 2.0 * at[c], b_sw - b_se, Face::Bottom(i)),
                (N, (j + 1 < nt).then(|| harmonic(at[c], at[c + nx])), 2.0 * at[c], b_ne - b_nw, Face::Top(i)),
            ];
            for (dir, inner, wall, flux, face) in faces {
                match inner {
                    Some(w) => {
                        let sigma = if w + 0.5 * flux >= 0.0 {
                            0.5 * flux
                        } else {
                            upwinded_faces += 1;
                            0.0
                        };
                        st.coef[p][dir] -= w + sigma;
                        st.coef[p][C] += w + sigma;
                    }
                    None => {
                        let sigma = if wall + flux >= 0.0 {
                            flux
                        } else {
                            upwinded_faces += 1;
                            0.0
                        };
                        let total = wall + sigma;
                        st.coef[p][C] += total;
                        if total != 0.0 {
                            links.push(BoundaryLink {
                                cell: c as u32,
                                face: face.id(grid) as u32,
                                weight: total,
                            });
                        }
                    }
                }
            }
        }
    }

    let inside = |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < nt;
    for vj in 0..=nt {
        for vi in 0..=nx {
            let s = sv[vid(vi, vj)];
            if s == 0.0 {
                continue;
            }
            st.nine_point = true;
            let w = s.abs();
            let (vi, vj) = (vi as isize, vj as isize);
            // Cells on the chosen diagonal, each with the direction toward the other.
            let (a, b) = if s > 0.0 {
                ((vi - 1, vj - 1, NE), (vi, vj, SW))
            } else {
                ((vi, vj - 1, NW), (vi - 1, vj, SE))
            };
            match (inside(a.0, a.1), inside(b.0, b.1)) {
                (true, true) => {
                    for (ci, cj, dir) in [a, b] {
                        let p = st.at(ci as usize, cj as usize);
                        st.coef[p][dir] -= w;
                        st.coef[p][C] += w;
                    }
                }
                (true, false) | (false, true) => {
                    let (ci, cj, _) = if inside(a.0, a.1) { a } else { b };
                    let (ci, cj) = (ci as usize, cj as usize);
                    let p = st.at(ci, cj);
                    st.coef[p][C] += 2.0 * w;
                    let faces = vertex_faces(grid, vi as usize, vj as usize);
                    let share = 2.0 * w / faces.len() as f64;
                    for f in faces {
                        links.push(BoundaryLink {
                            cell: (cj * nx + ci) as u32,
                            face: f.id(grid) as u32,
                            weight: share,
                        });
                    }
                }
                (false, false) => {}
            }
        }
    }

    let mut warnings = Vec::new();
    if clipped_cells > 0 {
        warnings.push(format!(
            "monotonicity loss: mixed coefficient exceeds the diagonal in {clipped_cells} cells; axis weights clipped"
        ));
    }
    Ok(SystemMatrix {
        grid: grid.clone(),
        stencil: st,
        links,
        upwinded_faces,
        clipped_cells,
        warnings,
    })
}

/// Boundary faces adjacent to a boundary vertex; its value is their average.
fn vertex_faces(grid: &Grid, vi: usize, vj: usize) -> Vec<Face> {
    let mut out = Vec::with_capacity(2);
    let along = |k: usize, n: usize| -> Vec<usize> {
        [k.checked_sub(1), (k < n).then_some(k)].into_iter().flatten().collect()
    };
    if vj == 0 {
        out.extend(along(vi, grid.nx).into_iter().map(Face::Bottom));
    } else if vj == grid.nt {
        out.extend(along(vi, grid.nx).into_iter().map(Face::Top));
    }
    if vi == 0 {
        out.extend(along(vj, grid.nt).into_iter().map(Face::Left));
    } else if vi == grid.nx {
        out.extend(along(vj, grid.nt).into_iter().map(Face::Right));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::coeff::CoefficientField;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(0.0, 1.0, 1.0, 1.0 / n as f64).unwrap()
    }

    #[test]
    fn laplacian_stencil() {
        let g = unit_grid(3);
        let m = assemble(&CoefficientField::identity(), &g).unwrap();
        let h2 = g.h * g.h;
        let row = m.scaled_row(1, 1);
        let want = [4.0, -1.0, -1.0, -1.0, -1.0, 0.0, 0.0, 0.0, 0.0].map(|v| v / h2);
        for k in 0..9 {
            assert!((row[k] - want[k]).abs() < 1e-9 * want[0].abs());
        }
        assert!(!m.stencil.nine_point);
    }

    #[test]
    fn anisotropic_stencil_by_hand() {
        let g = unit_grid(3);
        let m = assemble(&CoefficientField::diagonal(2.0, 1.0).unwrap(), &g).unwrap();
        let row = m.stencil.row(1, 1);
        assert_eq!(&row[..5], &[6.0, -2.0, -2.0, -1.0, -1.0]);
        // Corner cell: two wall faces at half distance.
        let corner = m.stencil.row(0, 0);
        assert_eq!(&corner[..5], &[2.0 * 2.0 + 2.0 + 2.0 * 1.0 + 1.0, 0.0, -2.0, 0.0, -1.0]);
    }

    #[test]
    fn vertex_faces_cases() {
        let g = unit_grid(4);
        assert_eq!(vertex_faces(&g, 0, 0), vec![Face::Bottom(0), Face::Left(0)]);
        assert_eq!(vertex_faces(&g, 2, 0), vec![Face::Bottom(1), Face::Bottom(2)]);
        assert_eq!(vertex_faces(&g, 4, 3), vec![Face::Right(2), Face::Right(3)]);
        assert_eq!(vertex_faces(&g, 4, 4), vec![Face::Top(3), Face::Right(3)]);
    }

    fn check_rows(m: &SystemMatrix) {
        let g = &m.grid;
        let mut wall = vec![0.0; g.len()];
        for l in &m.links {
            assert!(l.weight >= 0.0);
            wall[l.cell as usize] += l.weight;
        }
        for j in 0..g.nt {
            for i in 0..g.nx {
                let row = m.stencil.row(i, j);
                assert!(row[1..].iter().all(|&v| v <= 0.0), "positive off-diagonal");
                let sum: f64 = row.iter().sum::<f64>() - wall[g.index(i, j)];
                assert!(sum.abs() < 1e-12, "row sum {sum} at ({i},{j})");
            }
        }
    }

    #[test]
    fn constant_skew_rows() {
        let g = unit_grid(6);
        let m = assemble(&CoefficientField::skew(0.3).unwrap(), &g).unwrap();
        check_rows(&m);
        assert_eq!(m.upwinded_faces, 0);
        assert!(m.stencil.is_symmetric());
    }

    #[test]
    fn variable_skew_and_mixed_rows() {
        let f = CoefficientField::new("v", vec![], 0.2, false, |x, t| {
            let b = 2.0 * (3.0 * x).sin() * (1.0 + t);
            let s = 0.4 * (2.0 * t).cos();
            [[1.0 + 0.2 * x, s + b], [s - b, 1.0]]
        })
        .unwrap();
        let g = unit_grid(8);
        let m = assemble(&f, &g).unwrap();
        check_rows(&m);
        assert!(m.stencil.nine_point);
        assert!(!m.stencil.is_symmetric());
        assert!(m.is_monotone());
    }

    #[test]
    fn transpose_is_involution() {
        let f = CoefficientField::new("v", vec![], 0.2, false, |x, t| {
            let b = (3.0 * x).sin() + t;
            [[1.0, 0.3 + b], [0.3 - b, 1.2]]
        })
        .unwrap();
        let m = assemble(&f, &unit_grid(5)).unwrap();
        let tt = m.stencil.transpose().transpose();
        assert_eq!(tt.coef, m.stencil.coef);
        // ⟨Mx, y⟩ = ⟨x, Mᵀy⟩
        let n = m.stencil.padded_len();
        let x: Vec<f64> = (0..n).map(|k| ((k * 7919) % 13) as f64).collect();
        let y: Vec<f64> = (0..n).map(|k| ((k * 104729) % 11) as f64).collect();
        let (x, y) = (m.stencil.pad(&m.stencil.unpad(&x)), m.stencil.pad(&m.stencil.unpad(&y)));
        let mut mx = vec![0.0; n];
        let mut mty = vec![0.0; n];
        m.stencil.apply(&x, &mut mx);
        m.stencil.transpose().apply(&y, &mut mty);
        let a: f64 = mx.iter().zip(&y).map(|(p, q)| p * q).sum();
        let b: f64 = x.iter().zip(&mty).map(|(p, q)| p * q).sum();
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn clipping_warns() {
        let f = CoefficientField::new("m", vec![], 0.1, true, |_, _| [[1.0, 1.2], [1.2, 2.0]]).unwrap();
        let m = assemble(&f, &unit_grid(4)).unwrap();
        assert!(!m.is_monotone());
        assert_eq!(m.warnings.len(), 1);
    }
}
