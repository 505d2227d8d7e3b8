//! Potential-theoretic quantities on solver output: elliptic measure,
//! kernel averages, square function, non-tangential maximal function and the
//! Carleson functional.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{DataFunction, DiscreteMeasure, MeasureSpec};
use crate::pde::coeff::OperatorId;
use crate::pde::{
    gradient, BoundaryData, CoefficientField, DirichletProblem, Grid, GridSolution, SolveStats,
    SolverOptions,
};

/// Relative slack for cell-center membership tests on cone and box edges.
const EDGE_TOL: f64 = 1e-9;

/// A boundary interval `[x_Q − ℓ/2, x_Q + ℓ/2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub center: f64,
    pub side: f64,
}

impl Interval {
    pub fn new(center: f64, side: f64) -> Result<Self> {
        if !(side > 0.0) || !center.is_finite() {
            return Err(Error::Geometry(format!("bad interval center {center}, side {side}")));
        }
        Ok(Interval { center, side })
    }

    pub fn lo(&self) -> f64 {
        self.center - self.side / 2.0
    }

    pub fn hi(&self) -> f64 {
        self.center + self.side / 2.0
    }

    /// `A_Q = (x_Q, ℓ(Q))`.
    pub fn corkscrew(&self) -> (f64, f64) {
        (self.center, self.side)
    }

    /// `A_η(Q) = (x_Q, ηℓ(Q)/2)`.
    pub fn corkscrew_eta(&self, eta: f64) -> (f64, f64) {
        (self.center, eta * self.side / 2.0)
    }

    /// The dyadic subinterval with Morton index `m` at `level`.
    pub fn sub(&self, level: u32, m: usize) -> Interval {
        let side = self.side / (1u64 << level) as f64;
        Interval {
            center: self.lo() + (m as f64 + 0.5) * side,
            side,
        }
    }

    pub fn left_half(&self) -> Interval {
        self.sub(1, 0)
    }

    pub fn right_half(&self) -> Interval {
        self.sub(1, 1)
    }

    pub fn dilate(&self, factor: f64) -> Interval {
        Interval {
            center: self.center,
            side: self.side * factor,
        }
    }
}

/// `Γ_γ^h(x) = {(y, s): |y − x| ≤ γs, 0 < s ≤ h}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub aperture: f64,
    pub height: f64,
    pub vertex: f64,
}

impl ConeSpec {
    pub fn new(vertex: f64, aperture: f64, height: f64) -> Result<Self> {
        if !(aperture > 0.0 && height > 0.0) {
            return Err(Error::Geometry("cone aperture and height must be positive".into()));
        }
        Ok(ConeSpec {
            aperture,
            height,
            vertex,
        })
    }
}

/// `(1/π)(atan((b − x)/t) − atan((a − x)/t))`, the Laplacian's harmonic
/// measure of `[a, b]` from `(x, t)` in the half-plane.
pub fn poisson_interval(x: f64, t: f64, a: f64, b: f64) -> f64 {
    (((b - x) / t).atan() - ((a - x) / t).atan()) / std::f64::consts::PI
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureProvenance {
    pub operator: OperatorId,
    pub pole: (f64, f64),
    pub grid: Grid,
    pub interval: Interval,
    pub depth: u32,
    pub truncation: f64,
}

/// Harmonic measure of a boundary interval partitioned dyadically.
#[derive(Clone, Debug)]
pub struct EllipticMeasure {
    /// Cell masses over the interval `Q` at the requested depth.
    pub measure: DiscreteMeasure,
    /// Raw weights of every boundary face, in assembly numbering.
    pub faces: Vec<f64>,
    /// Mass on the artificial sides and top.
    pub leak: f64,
    /// Mass on the whole bottom edge.
    pub bottom_total: f64,
    pub provenance: MeasureProvenance,
    pub stats: SolveStats,
}

impl EllipticMeasure {
    /// Largest mass ratio between neighbouring cubes of one level, over
    /// levels `1..=max_level`.
    pub fn adjacent_ratio(&self, max_level: u32) -> f64 {
        let mut worst: f64 = 1.0;
        for l in 1..=max_level.min(self.measure.depth()) {
            for w in self.measure.level_masses(l).windows(2) {
                let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
                worst = worst.max(if a > 0.0 { b / a } else { f64::INFINITY });
            }
        }
        worst
    }
}

/// How bottom faces inside `Q` map onto `2^depth` dyadic cells.
enum Partition {
    /// Each cell is a run of this many faces.
    Group(usize),
    /// Each face is split evenly into this many cells.
    Split(usize),
}

fn partition(grid: &Grid, q: &Interval, depth: u32) -> Result<(std::ops::Range<usize>, Partition)> {
    let faces = grid.face_range(q.lo(), q.hi())?;
    let nf = faces.len();
    let cells = 1usize
        .checked_shl(depth)
        .filter(|_| depth < 40)
        .ok_or(Error::DepthExceeded { level: depth, max_depth: 39 })?;
    let part = if cells <= nf && nf % cells == 0 {
        Partition::Group(nf / cells)
    } else if cells > nf && cells % nf == 0 {
        Partition::Split(cells / nf)
    } else {
        return Err(Error::Geometry(format!(
            "{nf} faces in Q cannot be matched with 2^{depth} dyadic cells"
        )));
    };
    Ok((faces, part))
}

/// Elliptic measure of `Q`'s dyadic cells from `pole`, by one adjoint solve.
pub fn elliptic_measure(
    problem: &mut DirichletProblem,
    pole: (f64, f64),
    q: &Interval,
    depth: u32,
) -> Result<EllipticMeasure> {
    let grid = problem.grid().clone();
    let (range, part) = partition(&grid, q, depth)?;
    let (faces, stats) = problem.point_weights(pole.0, pole.1)?;
    // Round-off can leave masses of order 1e−17 below zero.
    let faces: Vec<f64> = faces.into_iter().map(|v| v.max(0.0)).collect();
    let bottom_total: f64 = faces[..grid.nx].iter().sum();
    let leak: f64 = faces[grid.nx..].iter().sum();
    let inside = &faces[range];
    let masses = match part {
        Partition::Group(g) => inside.chunks(g).map(|c| c.iter().sum()).collect(),
        Partition::Split(s) => inside
            .iter()
            .flat_map(|&m| std::iter::repeat_n(m / s as f64, s))
            .collect(),
    };
    let measure = DiscreteMeasure::from_masses(1, depth, masses, MeasureSpec::FromBoundary)?;
    Ok(EllipticMeasure {
        measure,
        faces,
        leak,
        bottom_total,
        provenance: MeasureProvenance {
            operator: problem.field().id(),
            pole,
            grid: grid.clone(),
            interval: *q,
            depth,
            truncation: (grid.x_hi - grid.x_lo) / (2.0 * q.side),
        },
        stats,
    })
}

/// Bottom face datum equal to the face average of a cell function on `Q`,
/// zero outside `Q`.
pub fn bottom_datum(grid: &Grid, q: &Interval, f: &DataFunction) -> Result<Vec<f64>> {
    if f.dim() != 1 {
        return Err(Error::Mismatch("boundary data must be one-dimensional".into()));
    }
    let (range, part) = partition(grid, q, f.depth())?;
    let mut out = vec![0.0; grid.nx];
    let vals = f.values();
    match part {
        Partition::Group(g) => {
            for (k, face) in range.enumerate() {
                out[face] = vals[k / g] as f64;
            }
        }
        Partition::Split(s) => {
            for (k, face) in range.enumerate() {
                let ones: usize = vals[k * s..(k + 1) * s].iter().map(|&v| v as usize).sum();
                out[face] = ones as f64 / s as f64;
            }
        }
    }
    Ok(out)
}

/// Which half of `S` carries the datum in the kernel check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Half {
    Left,
    Right,
}

/// `u(A_η(S))` for the datum `χ` of one half of `S`, or of all of `S` with
/// `half = None`.
pub fn kernel_check(
    problem: &mut DirichletProblem,
    s: &Interval,
    eta: f64,
    half: Option<Half>,
) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Parameter(format!("η = {eta} not in (0, 1)")));
    }
    let (x, t) = s.corkscrew_eta(eta);
    let (w, _) = problem.point_weights(x, t)?;
    let target = match half {
        Some(Half::Left) => s.left_half(),
        Some(Half::Right) => s.right_half(),
        None => *s,
    };
    let range = problem.grid().face_range(target.lo(), target.hi())?;
    Ok(w[range].iter().sum())
}

/// Gradient-based quadratures over a fixed solution.
pub struct SolutionAnalysis {
    pub grid: Grid,
    u_abs: Vec<f64>,
    /// Per row, prefix sums of `|∇u|²h²` (length `nx + 1` per row).
    row_prefix: Vec<f64>,
    /// Summed-area table of `t|∇u|²h²` (`(nx + 1) × (nt + 1)`).
    carleson: Vec<f64>,
}

impl SolutionAnalysis {
    pub fn new(sol: &GridSolution) -> Self {
        let g = sol.grid.clone();
        let grad = gradient(sol);
        let (nx, nt, h2) = (g.nx, g.nt, g.h * g.h);
        let mut row_prefix = vec![0.0; (nx + 1) * nt];
        let mut carleson = vec![0.0; (nx + 1) * (nt + 1)];
        for j in 0..nt {
            let t = g.t_center(j);
            let mut acc = 0.0;
            for i in 0..nx {
                let e = grad.norm_sq(g.index(i, j)) * h2;
                acc += e;
                row_prefix[j * (nx + 1) + i + 1] = acc;
                carleson[(j + 1) * (nx + 1) + i + 1] =
                    carleson[j * (nx + 1) + i + 1] + carleson[(j + 1) * (nx + 1) + i]
                        - carleson[j * (nx + 1) + i]
                        + t * e;
            }
        }
        SolutionAnalysis {
            u_abs: sol.u.iter().map(|v| v.abs()).collect(),
            grid: g,
            row_prefix,
            carleson,
        }
    }

    fn rows_up_to(&self, height: f64) -> usize {
        let n = (height / self.grid.h - 0.5 + EDGE_TOL).floor();
        if n < 0.0 {
            0
        } else {
            (n as usize + 1).min(self.grid.nt)
        }
    }

    /// Column range of centers with `|y − x| ≤ r`, unclipped.
    fn columns(&self, x: f64, r: f64) -> (i64, i64) {
        let g = &self.grid;
        let lo = ((x - r - g.x_lo) / g.h - 0.5 - EDGE_TOL).ceil() as i64;
        let hi = ((x + r - g.x_lo) / g.h - 0.5 + EDGE_TOL).floor() as i64;
        (lo, hi)
    }

    fn cone_sum(&self, cone: &ConeSpec, clip: bool) -> Result<f64> {
        let g = &self.grid;
        let rows = self.rows_up_to(cone.height);
        if rows == 0 {
            return Err(Error::Geometry("cone contains no cell centers".into()));
        }
        if !clip && cone.height > g.t_top + EDGE_TOL * g.h {
            return Err(Error::Geometry("cone is taller than the grid".into()));
        }
        let mut total = 0.0;
        let mut cells = 0;
        for j in 0..rows {
            let (lo, hi) = self.columns(cone.vertex, cone.aperture * g.t_center(j));
            if !clip && (lo < 0 || hi >= g.nx as i64) {
                return Err(Error::Geometry("cone leaves the grid laterally".into()));
            }
            let (lo, hi) = (lo.max(0), hi.min(g.nx as i64 - 1));
            if hi < lo {
                continue;
            }
            let base = j * (g.nx + 1);
            total += self.row_prefix[base + hi as usize + 1] - self.row_prefix[base + lo as usize];
            cells += (hi - lo + 1) as usize;
        }
        if cells == 0 {
            return Err(Error::Geometry("cone contains no cell centers".into()));
        }
        Ok(total)
    }

    /// `S_γ^h(u)(x)²` by the cell-center midpoint rule; the cone must fit.
    pub fn square_function_sq(&self, cone: &ConeSpec) -> Result<f64> {
        self.cone_sum(cone, false)
    }

    pub fn square_function(&self, cone: &ConeSpec) -> Result<f64> {
        self.square_function_sq(cone).map(f64::sqrt)
    }

    /// Same as [`Self::square_function_sq`] with the cone cut at the grid.
    pub fn square_function_sq_clipped(&self, cone: &ConeSpec) -> Result<f64> {
        self.cone_sum(cone, true)
    }

    /// `u*(x) = sup |u|` over cell centers in the full-height cone.
    pub fn nt_maximal(&self, x: f64, aperture: f64) -> Result<f64> {
        let g = &self.grid;
        let mut best: Option<f64> = None;
        for j in 0..g.nt {
            let (lo, hi) = self.columns(x, aperture * g.t_center(j));
            let (lo, hi) = (lo.max(0), hi.min(g.nx as i64 - 1));
            for i in lo..=hi {
                let v = self.u_abs[g.index(i as usize, j)];
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        best.ok_or_else(|| Error::Geometry("cone contains no cell centers".into()))
    }

    /// `u*` at every bottom face midpoint, with cones cut at the grid.
    pub fn nt_maximal_profile(&self, aperture: f64) -> Vec<f64> {
        let g = &self.grid;
        let nx = g.nx;
        let mut out = vec![0.0f64; nx];
        for j in 0..g.nt {
            let m = (aperture * g.t_center(j) / g.h + EDGE_TOL).floor() as usize;
            let row = &self.u_abs[j * nx..(j + 1) * nx];
            for (o, v) in out.iter_mut().zip(sliding_max(row, m)) {
                *o = o.max(v);
            }
        }
        out
    }

    /// `S_γ^h(u)²` at every bottom face midpoint, with cones cut at the grid.
    pub fn square_function_sq_profile(&self, aperture: f64, height: f64) -> Vec<f64> {
        let g = &self.grid;
        let nx = g.nx;
        let mut out = vec![0.0; nx];
        for j in 0..self.rows_up_to(height) {
            let m = (aperture * g.t_center(j) / g.h + EDGE_TOL).floor() as usize;
            let base = j * (nx + 1);
            for (i, o) in out.iter_mut().enumerate() {
                let lo = i.saturating_sub(m);
                let hi = (i + m).min(nx - 1);
                *o += self.row_prefix[base + hi + 1] - self.row_prefix[base + lo];
            }
        }
        out
    }

    /// `(1/|(1+γ)Q|)·∫_{T((1+γ)Q)} t|∇u|²` by the midpoint rule.
    pub fn carleson_functional(&self, q: &Interval, aperture: f64) -> Result<f64> {
        let g = &self.grid;
        let big = q.dilate(1.0 + aperture);
        let (lo, hi) = self.columns(big.center, big.side / 2.0);
        let rows = self.rows_up_to(big.side);
        if lo < 0 || hi >= g.nx as i64 || big.side > g.t_top + EDGE_TOL * g.h {
            return Err(Error::Geometry("Carleson box exceeds the grid".into()));
        }
        if hi < lo || rows == 0 {
            return Err(Error::Geometry("Carleson box contains no cell centers".into()));
        }
        let w = g.nx + 1;
        let (lo, hi) = (lo as usize, hi as usize + 1);
        let s = self.carleson[rows * w + hi] - self.carleson[rows * w + lo] - self.carleson[hi]
            + self.carleson[lo];
        Ok(s / big.side)
    }
}

/// Maximum over the window `[i − m, i + m]` (clipped) for every `i`.
fn sliding_max(row: &[f64], m: usize) -> Vec<f64> {
    let n = row.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + m).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&b| row[b] <= row[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(m);
        while dq.front().is_some_and(|&f| f < lo) {
            dq.pop_front();
        }
        out.push(row[*dq.front().expect("window nonempty")]);
    }
    out
}

/// Solution of the Dirichlet problem with datum `χ_Q` on the bottom.
pub fn interval_solution(problem: &mut DirichletProblem, q: &Interval) -> Result<GridSolution> {
    let grid = problem.grid().clone();
    let range = grid.face_range(q.lo(), q.hi())?;
    let mut bottom = vec![0.0; grid.nx];
    bottom[range].iter_mut().for_each(|v| *v = 1.0);
    problem.solve(&BoundaryData::bottom_only(&grid, bottom)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub k: f64,
    pub h: f64,
    pub pole: (f64, f64),
    pub u_k: f64,
    pub u_2k: f64,
    pub difference: f64,
    /// Largest value of the `2K` solution on the artificial boundary of the
    /// `K` box.
    pub lateral_magnitude: f64,
    pub consistent: bool,
    /// Fitted exponent of `u(x_Q, t) ~ (ℓ/t)^α` along the vertical ray.
    pub alpha: f64,
}

/// Solves with datum `χ_Q` on the `K` and `2K` truncations and compares.
pub fn truncation_study(
    field: &CoefficientField,
    q: &Interval,
    k: f64,
    h: f64,
    options: SolverOptions,
) -> Result<TruncationReport> {
    let pole = q.corkscrew();
    let small = Grid::truncated(q.center, q.side, k, h)?;
    let large = Grid::truncated(q.center, q.side, 2.0 * k, h)?;
    let u_small = interval_solution(&mut DirichletProblem::new(field, &small, options.clone())?, q)?;
    let u_large = interval_solution(&mut DirichletProblem::new(field, &large, options)?, q)?;
    let analysis_pole = |s: &GridSolution| s.value_at(pole.0, pole.1);
    let (a, b) = (analysis_pole(&u_small)?, analysis_pole(&u_large)?);
    // Values of the large solution along the small box's sides and top.
    let mut lateral: f64 = 0.0;
    let n = 64;
    for s in 0..=n {
        let f = s as f64 / n as f64;
        let t = (f * small.t_top).clamp(large.h, small.t_top);
        for x in [small.x_lo, small.x_hi] {
            lateral = lateral.max(u_large.value_at(x, t)?.abs());
        }
        let x = small.x_lo + f * (small.x_hi - small.x_lo);
        lateral = lateral.max(u_large.value_at(x, small.t_top)?.abs());
    }
    // Log-log fit of the vertical decay between 2ℓ and Kℓ.
    let (mut sx, mut sy, mut sxx, mut sxy, mut m) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let steps = 16;
    for s in 0..=steps {
        let t = q.side * 2.0 * (k / 2.0).powf(s as f64 / steps as f64);
        let v = u_large.value_at(q.center, t)?;
        if v > 0.0 {
            let (lx, ly) = ((t / q.side).ln(), v.ln());
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            m += 1.0;
        }
    }
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let difference = (a - b).abs();
    Ok(TruncationReport {
        k,
        h,
        pole,
        u_k: a,
        u_2k: b,
        difference,
        lateral_magnitude: lateral,
        consistent: difference <= lateral,
        alpha: -slope,
    })
}
