//! Experiment pipelines: square-function growth on shrinking sets, the
//! Carleson-to-A∞ bound, `L^p` comparisons and empirical A∞ curves.
//!
//! Prop11/thm110/thm116 share one pass over a nest of sets `E`: one adjoint
//! solve gives `ω^{A_Q}` on `Q`, and every `E` costs one forward solve with
//! the oscillating datum `χ_H` built from its good cover.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cover::{build_good_cover, GoodCover};
use crate::error::{Error, Result};
use crate::measure::{DataFunction, DiscreteMeasure};
use crate::oscillate::build_oscillating_data;
use crate::pde::coeff::OperatorId;
use crate::pde::{BoundaryData, CoefficientField, DirichletProblem, Grid, GridSolution, SolverOptions};
use crate::potential::{bottom_datum, elliptic_measure, ConeSpec, Interval, SolutionAnalysis};

/// `C_emp ≤ c₀(1 + A_emp)` constant, fitted once on the identity operator
/// with the default configuration and frozen.
pub const THM110_C0: f64 = 0.151;

/// Relative spread allowed for `(min S²)/k̄` along a nest.
pub const PROP11_SPREAD: f64 = 0.5;

/// Factor around the median allowed for `C_emp` along a nest.
pub const THM110_MEDIAN_FACTOR: f64 = 2.0;

/// `k̄ = ⌊ln(1/ω(E))⌋`, with a guard for values a rounding error below an
/// integer.
pub fn kbar(omega_e: f64) -> u32 {
    if !(omega_e > 0.0) {
        return 0;
    }
    ((1.0 / omega_e).ln() + 1e-9).floor().max(0.0) as u32
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub lhs: f64,
    pub relation: String,
    pub rhs: f64,
    pub passed: bool,
}

impl Assertion {
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::make(name, lhs, "<=", rhs, lhs <= rhs)
    }

    pub fn lt(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::make(name, lhs, "<", rhs, lhs < rhs)
    }

    pub fn ge(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::make(name, lhs, ">=", rhs, lhs >= rhs)
    }

    pub fn eq(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::make(name, lhs, "==", rhs, lhs == rhs)
    }

    fn make(name: impl Into<String>, lhs: f64, relation: &str, rhs: f64, passed: bool) -> Self {
        Assertion {
            name: name.into(),
            lhs,
            relation: relation.into(),
            rhs,
            passed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
}

impl Provenance {
    pub fn new(seed: Option<u64>) -> Self {
        Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport<R> {
    pub experiment: String,
    pub operator: Option<OperatorId>,
    pub params: serde_json::Value,
    pub rows: Vec<R>,
    pub assertions: Vec<Assertion>,
    pub summary: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl<R: Serialize> ExperimentReport<R> {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failed(&self) -> Vec<&Assertion> {
        self.assertions.iter().filter(|a| !a.passed).collect()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shared configuration of the nest experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestConfig {
    pub q: Interval,
    pub h: f64,
    pub truncation: f64,
    /// Dyadic depth of the partition of `Q` carrying `ω`, `E` and `H`.
    pub depth: u32,
    pub epsilon0_prime: f64,
    pub gamma: f64,
    pub p: f64,
    pub p_min: f64,
    /// Point of `Q` the nest shrinks to.
    pub center: f64,
    /// `ω(E)` targets, strictly decreasing.
    pub targets: Vec<f64>,
    pub solver: SolverOptions,
}

impl Default for NestConfig {
    fn default() -> Self {
        NestConfig {
            q: Interval { center: 0.0, side: 1.0 },
            h: 1.0 / 256.0,
            truncation: 8.0,
            depth: 16,
            epsilon0_prime: 0.25,
            gamma: 1.0,
            p: 4.0,
            p_min: 4.0,
            center: -1.0 / 6.0,
            targets: vec![1e-2, 1e-3, 1e-4, 1e-5],
            solver: SolverOptions::default(),
        }
    }
}

/// Nested runs of cells around `center` whose `ω`-masses first reach each
/// target. Growth alternates right and left, so the sets are nested.
pub fn nest_by_mass(
    omega: &DiscreteMeasure,
    center: usize,
    targets: &[f64],
) -> Result<Vec<DataFunction>> {
    if omega.dim() != 1 {
        return Err(Error::Mismatch("nests are built on one-dimensional measures".into()));
    }
    if targets.windows(2).any(|w| w[1] >= w[0]) || targets.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::Parameter("nest targets must be positive and strictly decreasing".into()));
    }
    let cells = omega.cells();
    let n = cells.len();
    if center >= n {
        return Err(Error::Geometry(format!("nest center cell {center} outside the tree")));
    }
    let (mut lo, mut hi) = (center, center);
    let mut mass = cells[center];
    let mut out: Vec<Option<DataFunction>> = vec![None; targets.len()];
    let mut right = true;
    loop {
        for (k, &t) in targets.iter().enumerate() {
            if out[k].is_none() && mass >= t {
                out[k] = Some(DataFunction::indicator(1, omega.depth(), lo..=hi)?);
            }
        }
        if out.iter().all(Option::is_some) {
            break;
        }
        let can_right = hi + 1 < n;
        let can_left = lo > 0;
        if !can_right && !can_left {
            return Err(Error::Parameter(format!(
                "Q carries mass {mass}, below the nest target {}",
                targets[0]
            )));
        }
        if (right && can_right) || !can_left {
            hi += 1;
            mass += cells[hi];
        } else {
            lo -= 1;
            mass += cells[lo];
        }
        right = !right;
    }
    let out: Vec<DataFunction> = out.into_iter().map(|d| d.expect("filled")).collect();
    if let Some(k) = (1..out.len()).find(|&k| out[k] == out[k - 1]) {
        return Err(Error::Parameter(format!(
            "depth {} is too coarse: targets {} and {} give the same set",
            omega.depth(),
            targets[k - 1],
            targets[k]
        )));
    }
    Ok(out)
}

/// The good cover of `E` over `ω` and the oscillating set `H`.
pub fn oscillating_datum(
    omega: &DiscreteMeasure,
    e: &DataFunction,
    epsilon0_prime: f64,
) -> Result<(GoodCover, DataFunction)> {
    let cover = build_good_cover(omega, e, epsilon0_prime)?;
    let h = build_oscillating_data(&cover);
    Ok((cover, h))
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Exponent `α` of `u(x, t) ~ t^{−α}` fitted on `[t_lo, t_hi]`.
pub fn decay_exponent(sol: &GridSolution, x: f64, t_lo: f64, t_hi: f64) -> Result<f64> {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let steps = 16;
    for s in 0..=steps {
        let t = t_lo * (t_hi / t_lo).powf(s as f64 / steps as f64);
        let v = sol.value_at(x, t)?;
        if v > 0.0 {
            xs.push(t.ln());
            ys.push(v.ln());
        }
    }
    Ok(-fit_slope(&xs, &ys))
}

fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// `(max − min)/mean`.
pub fn relative_spread(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (max - min) / mean
}

/// Everything measured for one set `E` of a nest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestRow {
    pub target: f64,
    pub omega_e: f64,
    /// `|E|/|Q|`.
    pub lebesgue_fraction: f64,
    pub cells: usize,
    pub kbar: u32,
    /// Cover length, zero when skipped.
    pub k: usize,
    pub skipped: Option<String>,
    pub h_fraction: f64,
    /// `min_{x∈E} S_γ^{γℓ}(u)(x)²`.
    pub min_s2: f64,
    /// `max` over dyadic `Q' ⊂ Q` of the Carleson functional.
    pub a_emp: f64,
    /// `(|E|/|Q|)·ln(1/ω(E))`.
    pub c_emp: f64,
    pub s_norm: f64,
    pub ustar_norm: f64,
    /// `[ln 1/ω(E)]^{p/2}·|E|/|Q|`.
    pub log_weighted_size: f64,
    /// Square-function bands above `γℓ` at the nest center:
    /// `R_j` over heights `(2^{j−1}γℓ, 2^jγℓ]`.
    pub tail: Vec<f64>,
    pub theta: f64,
    pub alpha: f64,
    pub max_principle_excess: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestRun {
    pub operator: OperatorId,
    pub config: NestConfig,
    pub omega_q: f64,
    pub leak: f64,
    pub kappa: f64,
    pub rows: Vec<NestRow>,
    pub warnings: Vec<String>,
}

/// Runs the shared nest pipeline for one operator.
pub fn run_nest(field: &CoefficientField, cfg: &NestConfig) -> Result<NestRun> {
    let q = cfg.q;
    if !(cfg.q.lo() < cfg.center && cfg.center < cfg.q.hi()) {
        return Err(Error::Geometry("nest center must lie inside Q".into()));
    }
    let grid = Grid::truncated(q.center, q.side, cfg.truncation, cfg.h)?;
    let mut problem = DirichletProblem::new(field, &grid, cfg.solver.clone())?;
    let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, cfg.depth)?;
    let mu = &omega.measure;
    let kappa = mu.doubling_constant();
    let n = mu.num_cells();
    let center_cell = (((cfg.center - q.lo()) / q.side) * n as f64).floor() as usize;
    let nest = nest_by_mass(mu, center_cell, &cfg.targets)?;
    let mut warnings = problem.system().warnings.clone();
    let mut rows = Vec::with_capacity(nest.len());
    for (e, &target) in nest.iter().zip(&cfg.targets) {
        let omega_e: f64 = e.support().map(|c| mu.cells()[c]).sum();
        let mut row = NestRow {
            target,
            omega_e,
            lebesgue_fraction: e.lebesgue(),
            cells: e.count(),
            kbar: kbar(omega_e),
            k: 0,
            skipped: None,
            h_fraction: 0.0,
            min_s2: f64::NAN,
            a_emp: f64::NAN,
            c_emp: e.lebesgue() * (1.0 / omega_e).ln(),
            s_norm: f64::NAN,
            ustar_norm: f64::NAN,
            log_weighted_size: (1.0 / omega_e).ln().powf(cfg.p / 2.0) * e.lebesgue(),
            tail: vec![],
            theta: f64::NAN,
            alpha: f64::NAN,
            max_principle_excess: 0.0,
            residual: f64::NAN,
        };
        let (cover, h) = match oscillating_datum(mu, e, cfg.epsilon0_prime) {
            Ok(v) => v,
            Err(err @ (Error::SetTooLarge { .. } | Error::Parameter(_) | Error::DegenerateMeasure(_))) => {
                row.skipped = Some(err.to_string());
                rows.push(row);
                continue;
            }
            Err(err) => return Err(err),
        };
        row.k = cover.k();
        if cover.k() < 2 {
            // H is empty and u vanishes identically.
            row.skipped = Some("cover has a single level, so H is empty".into());
            row.min_s2 = 0.0;
            row.a_emp = 0.0;
            row.s_norm = 0.0;
            row.ustar_norm = 0.0;
            rows.push(row);
            continue;
        }
        row.h_fraction = h.lebesgue();
        let bottom = bottom_datum(&grid, &q, &h)?;
        let sol = problem.solve(&BoundaryData::bottom_only(&grid, bottom)?)?;
        row.residual = sol.stats.residual;
        row.max_principle_excess = sol.max_principle_excess();
        let analysis = SolutionAnalysis::new(&sol);
        row.min_s2 = min_square_function(&analysis, e, &q, cfg.gamma)?;
        row.a_emp = carleson_sup(&analysis, &q, cfg.gamma, 4.0 * cfg.h)?;
        let (s_norm, ustar_norm) = lp_norms(&analysis, cfg.gamma, cfg.p);
        row.s_norm = s_norm;
        row.ustar_norm = ustar_norm;
        row.tail = tail_bands(&analysis, cfg.center, cfg.gamma, cfg.gamma * q.side)?;
        row.theta = band_decay(&row.tail);
        row.alpha = decay_exponent(&sol, q.center, 2.0 * q.side, grid.t_top / 2.0)?;
        if cfg.p <= 1.0 / row.alpha {
            warnings.push(format!(
                "p = {} is at most 1/alpha = {:.3} for target {target}",
                cfg.p,
                1.0 / row.alpha
            ));
        }
        rows.push(row);
    }
    Ok(NestRun {
        operator: field.id(),
        config: cfg.clone(),
        omega_q: mu.total(),
        leak: omega.leak,
        kappa,
        rows,
        warnings,
    })
}

/// `min` over the cells of `E` of the truncated square function squared,
/// with the cone vertex at each cell center.
pub fn min_square_function(
    analysis: &SolutionAnalysis,
    e: &DataFunction,
    q: &Interval,
    gamma: f64,
) -> Result<f64> {
    let side = q.side / (1usize << e.depth()) as f64;
    let mut best = f64::INFINITY;
    for c in e.support() {
        let x = q.lo() + (c as f64 + 0.5) * side;
        best = best.min(analysis.square_function_sq(&ConeSpec::new(x, gamma, gamma * q.side)?)?);
    }
    Ok(best)
}

/// Largest Carleson functional over dyadic subintervals of `Q` with side at
/// least `min_side`.
pub fn carleson_sup(analysis: &SolutionAnalysis, q: &Interval, gamma: f64, min_side: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    let mut level = 0;
    while q.side / (1u64 << level) as f64 >= min_side {
        for m in 0..(1usize << level) {
            best = best.max(analysis.carleson_functional(&q.sub(level, m), gamma)?);
        }
        level += 1;
    }
    Ok(best)
}

/// `(‖S_γ(u)‖_p, ‖u*‖_p)` over the bottom face midpoints, full-height cones
/// cut at the grid.
pub fn lp_norms(analysis: &SolutionAnalysis, gamma: f64, p: f64) -> (f64, f64) {
    let g = &analysis.grid;
    let s2 = analysis.square_function_sq_profile(gamma, g.t_top);
    let star = analysis.nt_maximal_profile(gamma);
    let norm = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        vals.map(|v| v.abs().powf(p) * g.h).sum::<f64>().powf(1.0 / p)
    };
    (norm(&mut s2.iter().map(|v| v.max(0.0).sqrt())), norm(&mut star.into_iter()))
}

/// `R_j` over heights `(2^{j−1}s₀, 2^js₀]` for the cone at `x`, while the
/// band starts below the top of the grid.
pub fn tail_bands(analysis: &SolutionAnalysis, x: f64, gamma: f64, s0: f64) -> Result<Vec<f64>> {
    let top = analysis.grid.t_top;
    let mut out = Vec::new();
    let mut lo = s0;
    let mut below = analysis.square_function_sq_clipped(&ConeSpec::new(x, gamma, s0)?)?;
    while lo < top {
        let hi = (2.0 * lo).min(top);
        let upto = analysis.square_function_sq_clipped(&ConeSpec::new(x, gamma, hi)?)?;
        out.push((upto - below).max(0.0));
        below = upto;
        lo *= 2.0;
    }
    Ok(out)
}

/// `θ` with `R_{j+1}/R_j ≈ 2^{−θ}`, fitted over all bands but the last.
pub fn band_decay(tail: &[f64]) -> f64 {
    let used: Vec<(f64, f64)> = tail
        .iter()
        .take(tail.len().saturating_sub(1))
        .enumerate()
        .filter(|(_, &r)| r > 0.0)
        .map(|(j, &r)| (j as f64, r.log2()))
        .collect();
    if used.len() < 2 {
        return f64::NAN;
    }
    let (x, y): (Vec<f64>, Vec<f64>) = used.into_iter().unzip();
    -fit_slope(&x, &y)
}

fn run_params(run: &NestRun) -> serde_json::Value {
    serde_json::json!({
        "config": run.config,
        "omega_q": run.omega_q,
        "leak": run.leak,
        "kappa": run.kappa,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop11Row {
    pub target: f64,
    pub omega_e: f64,
    pub kbar: u32,
    pub k: usize,
    pub min_s2: f64,
    pub ratio: f64,
    pub skipped: Option<String>,
}

pub fn prop11_report(run: &NestRun) -> ExperimentReport<Prop11Row> {
    let rows: Vec<Prop11Row> = run
        .rows
        .iter()
        .map(|r| Prop11Row {
            target: r.target,
            omega_e: r.omega_e,
            kbar: r.kbar,
            k: r.k,
            min_s2: r.min_s2,
            ratio: r.min_s2 / r.kbar as f64,
            skipped: r.skipped.clone(),
        })
        .collect();
    let live: Vec<&Prop11Row> = rows.iter().filter(|r| r.skipped.is_none()).collect();
    let mut assertions = Vec::new();
    for w in live.windows(2) {
        if w[1].kbar > w[0].kbar {
            assertions.push(Assertion::lt(
                format!("min_s2 increases from kbar {} to {}", w[0].kbar, w[1].kbar),
                w[0].min_s2,
                w[1].min_s2,
            ));
        }
    }
    let ratios: Vec<f64> = live.iter().map(|r| r.ratio).collect();
    let spread = relative_spread(&ratios);
    assertions.push(Assertion::le("ratio relative spread", spread, PROP11_SPREAD));
    let x: Vec<f64> = live.iter().map(|r| r.kbar as f64).collect();
    let y: Vec<f64> = live.iter().map(|r| r.min_s2).collect();
    let mut summary = BTreeMap::new();
    summary.insert("slope".into(), fit_slope(&x, &y));
    summary.insert("min_ratio".into(), ratios.iter().cloned().fold(f64::INFINITY, f64::min));
    summary.insert("spread".into(), spread);
    summary.insert("live_rows".into(), live.len() as f64);
    ExperimentReport {
        experiment: "prop11".into(),
        operator: Some(run.operator.clone()),
        params: run_params(run),
        rows,
        assertions,
        summary,
        warnings: run.warnings.clone(),
        provenance: Provenance::new(None),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm110Row {
    pub target: f64,
    pub omega_e: f64,
    pub lebesgue_fraction: f64,
    pub a_emp: f64,
    pub c_emp: f64,
    pub bound: f64,
    pub skipped: Option<String>,
}

pub fn thm110_report(run: &NestRun, c0: f64) -> ExperimentReport<Thm110Row> {
    let rows: Vec<Thm110Row> = run
        .rows
        .iter()
        .map(|r| Thm110Row {
            target: r.target,
            omega_e: r.omega_e,
            lebesgue_fraction: r.lebesgue_fraction,
            a_emp: r.a_emp,
            c_emp: r.c_emp,
            bound: c0 * (1.0 + r.a_emp),
            skipped: r.skipped.clone(),
        })
        .collect();
    let mut assertions = Vec::new();
    for r in rows.iter().filter(|r| r.a_emp.is_finite()) {
        assertions.push(Assertion::le(
            format!("C_emp <= c0 (1 + A_emp) at omega {:.3e}", r.omega_e),
            r.c_emp,
            r.bound,
        ));
    }
    let c: Vec<f64> = rows.iter().map(|r| r.c_emp).collect();
    let med = median(&c);
    for (r, &v) in rows.iter().zip(&c) {
        assertions.push(Assertion::le(
            format!("C_emp at most {THM110_MEDIAN_FACTOR} x median at omega {:.3e}", r.omega_e),
            v,
            THM110_MEDIAN_FACTOR * med,
        ));
        assertions.push(Assertion::ge(
            format!("C_emp at least median / {THM110_MEDIAN_FACTOR} at omega {:.3e}", r.omega_e),
            v,
            med / THM110_MEDIAN_FACTOR,
        ));
    }
    let mut summary = BTreeMap::new();
    summary.insert("c0".into(), c0);
    summary.insert("median_c_emp".into(), med);
    summary.insert(
        "max_a_emp".into(),
        rows.iter().map(|r| r.a_emp).filter(|v| v.is_finite()).fold(0.0, f64::max),
    );
    ExperimentReport {
        experiment: "thm110".into(),
        operator: Some(run.operator.clone()),
        params: run_params(run),
        rows,
        assertions,
        summary,
        warnings: run.warnings.clone(),
        provenance: Provenance::new(None),
    }
}

/// `c₀ = max C_emp/(1 + A_emp)` over the live rows of a run.
pub fn fit_c0(run: &NestRun) -> f64 {
    run.rows
        .iter()
        .filter(|r| r.a_emp.is_finite())
        .map(|r| r.c_emp / (1.0 + r.a_emp))
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thm116Row {
    pub target: f64,
    pub omega_e: f64,
    pub s_norm: f64,
    pub ustar_norm: f64,
    pub a_emp: f64,
    pub log_weighted_size: f64,
    pub theta: f64,
    pub alpha: f64,
    pub skipped: Option<String>,
}

pub fn thm116_report(run: &NestRun) -> ExperimentReport<Thm116Row> {
    let rows: Vec<Thm116Row> = run
        .rows
        .iter()
        .map(|r| Thm116Row {
            target: r.target,
            omega_e: r.omega_e,
            s_norm: r.s_norm,
            ustar_norm: r.ustar_norm,
            a_emp: if r.ustar_norm > 0.0 { r.s_norm / r.ustar_norm } else { 0.0 },
            log_weighted_size: r.log_weighted_size,
            theta: r.theta,
            alpha: r.alpha,
            skipped: r.skipped.clone(),
        })
        .collect();
    let live: Vec<&Thm116Row> = rows.iter().filter(|r| r.skipped.is_none()).collect();
    let mut assertions = vec![Assertion::ge("p at least p_min", run.config.p, run.config.p_min)];
    if let Some(first) = live.first() {
        for r in &live {
            assertions.push(Assertion::le(
                format!("Eq122 quantity bounded by twice the largest set at omega {:.3e}", r.omega_e),
                r.log_weighted_size,
                2.0 * first.log_weighted_size,
            ));
            assertions.push(Assertion::lt(format!("A_emp finite at omega {:.3e}", r.omega_e), r.a_emp, f64::INFINITY));
            assertions.push(Assertion::ge(format!("tail decay theta positive at omega {:.3e}", r.omega_e), r.theta, 0.0));
        }
    }
    let mut summary = BTreeMap::new();
    summary.insert("p".into(), run.config.p);
    summary.insert(
        "max_a_emp".into(),
        live.iter().map(|r| r.a_emp).fold(0.0, f64::max),
    );
    ExperimentReport {
        experiment: "thm116".into(),
        operator: Some(run.operator.clone()),
        params: run_params(run),
        rows,
        assertions,
        summary,
        warnings: run.warnings.clone(),
        provenance: Provenance::new(None),
    }
}

/// Worst `σ(E)/σ(Q)` over Borel `E ⊂ Q` with `ω(E)/ω(Q) < δ`, both
/// measures having constant density on each finest cell.
///
/// Cells are taken in ascending order of `ω/σ` density; the last one
/// fractionally. `cells_only` restricts `E` to whole cells instead.
pub fn worst_ratio(omega: &[f64], sigma: &[f64], delta: f64, cells_only: bool) -> Option<f64> {
    let wq: f64 = omega.iter().sum();
    let sq: f64 = sigma.iter().sum();
    if !(wq > 0.0 && sq > 0.0) {
        return None;
    }
    let mut order: Vec<usize> = (0..omega.len()).filter(|&i| sigma[i] > 0.0).collect();
    order.sort_by(|&a, &b| {
        (omega[a] * sigma[b])
            .partial_cmp(&(omega[b] * sigma[a]))
            .unwrap()
            .then(a.cmp(&b))
    });
    let budget = delta * wq;
    let (mut used, mut got) = (0.0, 0.0);
    for i in order {
        if cells_only {
            if used + omega[i] < budget {
                used += omega[i];
                got += sigma[i];
            } else {
                break;
            }
        } else if used + omega[i] <= budget {
            used += omega[i];
            got += sigma[i];
        } else {
            got += sigma[i] * (budget - used) / omega[i];
            break;
        }
    }
    Some(got / sq)
}

/// Exhaustive oracle for [`worst_ratio`]: every subset of whole cells plus
/// at most one fractional cell (the vertices of the fractional problem).
pub fn worst_ratio_bruteforce(omega: &[f64], sigma: &[f64], delta: f64, cells_only: bool) -> Option<f64> {
    let n = omega.len();
    assert!(n <= 16, "brute force limited to 16 cells");
    let wq: f64 = omega.iter().sum();
    let sq: f64 = sigma.iter().sum();
    if !(wq > 0.0 && sq > 0.0) {
        return None;
    }
    let budget = delta * wq;
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << n) {
        let (mut w, mut s) = (0.0, 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                w += omega[i];
                s += sigma[i];
            }
        }
        if cells_only {
            if w < budget {
                best = best.max(s);
            }
            continue;
        }
        if w > budget {
            continue;
        }
        best = best.max(s);
        for j in 0..n {
            if mask >> j & 1 == 0 && omega[j] > 0.0 {
                let frac = ((budget - w) / omega[j]).min(1.0);
                best = best.max(s + frac * sigma[j]);
            } else if mask >> j & 1 == 0 && sigma[j] > 0.0 {
                best = best.max(s + sigma[j]);
            }
        }
    }
    Some(best / sq)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub delta: f64,
    /// Sup over Borel sets.
    pub epsilon: f64,
    pub epsilon_renormalized: f64,
    /// Sup over unions of whole finest cells.
    pub epsilon_cells: f64,
    pub worst_cube: String,
    pub skipped_cubes: usize,
}

/// Empirical δ → ε curve of `ω` against `σ` over every dyadic cube.
pub fn ainfty_scan(
    omega: &DiscreteMeasure,
    sigma: &DiscreteMeasure,
    deltas: &[f64],
) -> Result<ExperimentReport<ScanRow>> {
    if omega.dim() != sigma.dim() || omega.depth() != sigma.depth() {
        return Err(Error::Mismatch("ω and σ must live on the same tree".into()));
    }
    if deltas.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
        return Err(Error::Parameter("δ values must lie in (0, 1]".into()));
    }
    let depth = omega.depth();
    let fan = 1usize << omega.dim();
    let total = omega.total();
    let renorm: Vec<f64> = omega.cells().iter().map(|m| m / total).collect();
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (mut eps, mut eps_r, mut eps_c) = (0.0f64, 0.0f64, 0.0f64);
        let mut worst = String::new();
        let mut skipped = 0;
        for l in 0..=depth {
            let width = fan.pow(depth - l);
            let count = fan.pow(l);
            for m in 0..count {
                let r = m * width..(m + 1) * width;
                let (w, s) = (&omega.cells()[r.clone()], &sigma.cells()[r.clone()]);
                let Some(v) = worst_ratio(w, s, delta, false) else {
                    skipped += 1;
                    continue;
                };
                if v > eps {
                    eps = v;
                    worst = crate::dyadic::DyadicCube::from_morton(omega.dim(), l, m as u64).to_string();
                }
                eps_r = eps_r.max(worst_ratio(&renorm[r], s, delta, false).unwrap_or(0.0));
                eps_c = eps_c.max(worst_ratio(w, s, delta, true).unwrap_or(0.0));
            }
        }
        rows.push(ScanRow {
            delta,
            epsilon: eps,
            epsilon_renormalized: eps_r,
            epsilon_cells: eps_c,
            worst_cube: worst,
            skipped_cubes: skipped,
        });
    }
    let mut assertions = Vec::new();
    let mut sorted: Vec<&ScanRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.delta.partial_cmp(&b.delta).unwrap());
    for w in sorted.windows(2) {
        assertions.push(Assertion::le(
            format!("epsilon nondecreasing in delta ({} to {})", w[0].delta, w[1].delta),
            w[0].epsilon,
            w[1].epsilon,
        ));
    }
    let mut summary = BTreeMap::new();
    summary.insert("omega_total".into(), total);
    Ok(ExperimentReport {
        experiment: "ainfty-scan".into(),
        operator: None,
        params: serde_json::json!({
            "omega": omega.metadata(),
            "sigma": sigma.metadata(),
            "deltas": deltas,
        }),
        rows,
        assertions,
        summary,
        warnings: vec![],
        provenance: Provenance::new(None),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_measure, MeasureSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn kbar_arithmetic() {
        assert_eq!(kbar((-5.0f64).exp()), 5);
        assert_eq!(kbar(1e-2), 4);
        assert_eq!(kbar(1e-5), 11);
        assert_eq!(kbar(1.0), 0);
    }

    #[test]
    fn identical_measures_give_identity_curve() {
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 6).unwrap();
        let rep = ainfty_scan(&leb, &leb, &[0.5, 0.1, 0.013]).unwrap();
        for r in &rep.rows {
            assert_abs_diff_eq!(r.epsilon, r.delta, epsilon = 1e-12);
            assert_eq!(r.epsilon, r.epsilon_renormalized);
        }
        assert!(rep.passed());
    }

    #[test]
    fn bernoulli_curve_between_delta_and_one() {
        let w = make_measure(&MeasureSpec::Bernoulli { p: 0.6 }, 1, 10).unwrap();
        let s = make_measure(&MeasureSpec::Lebesgue, 1, 10).unwrap();
        let deltas = [0.3, 0.1, 0.03, 0.01, 0.001];
        let rep = ainfty_scan(&w, &s, &deltas).unwrap();
        let mut last = 1.0;
        for r in &rep.rows {
            assert!(r.epsilon > r.delta && r.epsilon < 1.0, "{r:?}");
            assert!(r.epsilon < last);
            last = r.epsilon;
        }
    }

    #[test]
    fn greedy_matches_bruteforce() {
        let w = make_measure(&MeasureSpec::RandomDoubling { kappa: 5.0, seed: 9 }, 1, 4).unwrap();
        let s = make_measure(&MeasureSpec::Bernoulli { p: 0.3 }, 1, 4).unwrap();
        for delta in [0.02, 0.1, 0.25, 0.5, 0.9] {
            for cells_only in [false, true] {
                let g = worst_ratio(w.cells(), s.cells(), delta, cells_only).unwrap();
                let b = worst_ratio_bruteforce(w.cells(), s.cells(), delta, cells_only).unwrap();
                if cells_only {
                    // Whole-cell greedy is exact when σ is uniform only.
                    assert!(g <= b + 1e-12);
                } else {
                    assert_abs_diff_eq!(g, b, epsilon = 1e-12);
                }
            }
        }
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 4).unwrap();
        for delta in [0.05, 0.3, 0.77] {
            let g = worst_ratio(w.cells(), leb.cells(), delta, true).unwrap();
            let b = worst_ratio_bruteforce(w.cells(), leb.cells(), delta, true).unwrap();
            assert_abs_diff_eq!(g, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn nest_is_nested_and_hits_targets() {
        let w = make_measure(&MeasureSpec::RandomDoubling { kappa: 3.0, seed: 1 }, 1, 12).unwrap();
        let nest = nest_by_mass(&w, 1000, &[1e-1, 1e-2, 1e-3]).unwrap();
        for pair in nest.windows(2) {
            assert!(pair[1].support().all(|c| pair[0].get(c)));
        }
        for (e, t) in nest.iter().zip([1e-1, 1e-2, 1e-3]) {
            let m: f64 = e.support().map(|c| w.cells()[c]).sum();
            assert!(m >= t);
        }
        assert!(nest_by_mass(&w, 0, &[1e-2, 1e-1]).is_err());
    }

    #[test]
    fn slope_fit() {
        assert_abs_diff_eq!(fit_slope(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(relative_spread(&[1.0, 1.5]), 0.4, epsilon = 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
