//! The acceptance battery behind `ainfty-lab suite`.
//!
//! Each check returns a [`CriterionResult`]; wall times are kept apart so
//! that the serialized results are reproducible byte for byte.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ainfty::{ainfty_scan, prop11_report, run_nest, thm110_report, Assertion, NestConfig, NestRun, THM110_C0};
use crate::cover::{build_good_cover, verify_cover};
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::measure::{make_measure, DataFunction, DiscreteMeasure, MeasureSpec};
use crate::oscillate::{build_oscillating_data, certify, oscillation_terms};
use crate::pde::{operator_by_name, operator_suite, BoundaryData, CoefficientField, DirichletProblem, Grid, SolverOptions, MAX_PRINCIPLE_TOL};
use crate::potential::{elliptic_measure, kernel_check, poisson_interval, Half, Interval};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub quick: bool,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions { quick: false, seed: 20240601 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub assertions: Vec<Assertion>,
}

impl CriterionResult {
    fn new(id: u32, name: &str, assertions: Vec<Assertion>, detail: String) -> Self {
        CriterionResult {
            id,
            name: name.into(),
            passed: assertions.iter().all(|a| a.passed),
            detail,
            assertions,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteReport {
    pub options: SuiteOptions,
    pub criteria: Vec<CriterionResult>,
    /// Nest runs behind the square-function and Carleson checks.
    pub nests: Vec<NestRun>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

/// Seconds per criterion id, plus runtime budgets checked against them.
pub type Timings = BTreeMap<String, f64>;

pub fn run_suite(opts: &SuiteOptions) -> Result<(SuiteReport, Timings)> {
    let mut timings = Timings::new();
    let mut criteria = Vec::new();
    let mut excess: f64 = 0.0;
    let mut timed = |id: u32, f: &mut dyn FnMut() -> Result<CriterionResult>| -> Result<CriterionResult> {
        let start = Instant::now();
        let r = f()?;
        timings.insert(format!("criterion_{id:02}"), start.elapsed().as_secs_f64());
        Ok(r)
    };

    criteria.push(timed(1, &mut || poisson_check(opts))?);
    criteria.push(timed(2, &mut || {
        let (r, e) = adjoint_check(opts)?;
        excess = excess.max(e);
        Ok(r)
    })?);
    let triples = random_triples(opts.seed, if opts.quick { 50 } else { 200 });
    let mut cover_results = Vec::new();
    criteria.push(timed(3, &mut || {
        let (r, c) = cover_check(&triples)?;
        cover_results = c;
        Ok(r)
    })?);
    criteria.push(timed(4, &mut || f_structure_check(&triples, &cover_results))?);
    criteria.push(timed(5, &mut || certificate_check(&triples, &cover_results))?);
    criteria.push(timed(6, &mut || doubling_split_check(opts.seed))?);
    let mut nests = Vec::new();
    criteria.push(timed(7, &mut || {
        let (r, n) = prop11_check(opts)?;
        nests = n;
        Ok(r)
    })?);
    for run in &nests {
        for row in &run.rows {
            excess = excess.max(row.max_principle_excess);
        }
    }
    criteria.push(timed(8, &mut || thm110_check(&nests))?);
    criteria.push(timed(9, &mut || {
        let (r, e) = kernel_bracket_check(opts)?;
        excess = excess.max(e);
        Ok(r)
    })?);
    criteria.push(timed(10, &mut || determinism_check(opts, excess))?);
    criteria.push(timed(11, &mut || scan_check(opts))?);

    // Runtime budgets only apply at full resolution.
    if !opts.quick {
        let budget = |c: &mut CriterionResult, secs: f64, limit: f64| {
            if secs >= limit {
                c.passed = false;
                c.detail.push_str(&format!("; runtime over {limit} s"));
            }
        };
        budget(&mut criteria[0], timings["criterion_01"], 30.0);
        budget(&mut criteria[6], timings["criterion_07"], 600.0);
    }
    Ok((
        SuiteReport {
            options: opts.clone(),
            criteria,
            nests,
        },
        timings,
    ))
}

fn poisson_check(opts: &SuiteOptions) -> Result<CriterionResult> {
    let h = if opts.quick { 1.0 / 64.0 } else { 1.0 / 256.0 };
    let q = Interval::new(0.0, 1.0)?;
    let grid = Grid::truncated(0.0, 1.0, 8.0, h)?;
    let mut problem = DirichletProblem::new(&CoefficientField::identity(), &grid, SolverOptions::default())?;
    let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, 0)?;
    let exact = poisson_interval(0.0, 1.0, -0.5, 0.5);
    let err = (omega.measure.total() - exact).abs();
    Ok(CriterionResult::new(
        1,
        "Poisson oracle",
        vec![Assertion::le("|omega - poisson|", err, 1e-2)],
        format!("omega = {:.6}, poisson = {exact:.6}, h = {h}", omega.measure.total()),
    ))
}

/// Forward values against adjoint weights; returns the largest
/// maximum-principle excess of the forward solves.
fn adjoint_check(opts: &SuiteOptions) -> Result<(CriterionResult, f64)> {
    let ops = operator_suite();
    let per_op = 4;
    let grid = Grid::truncated(0.0, 1.0, 4.0, 1.0 / 32.0)?;
    let results: Vec<Result<(f64, f64)>> = ops
        .par_iter()
        .enumerate()
        .map(|(o, field)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (0xad01 + o as u64));
            let mut problem = DirichletProblem::new(field, &grid, SolverOptions::default())?;
            let (mut worst, mut excess) = (0.0f64, 0.0f64);
            for _ in 0..per_op {
                let data = BoundaryData {
                    bottom: (0..grid.nx).map(|_| rng.gen::<f64>()).collect(),
                    top: (0..grid.nx).map(|_| rng.gen::<f64>()).collect(),
                    left: (0..grid.nt).map(|_| rng.gen::<f64>()).collect(),
                    right: (0..grid.nt).map(|_| rng.gen::<f64>()).collect(),
                };
                let i = rng.gen_range(1..grid.nx - 1);
                let j = rng.gen_range(1..grid.nt - 1);
                let (x, t) = (grid.x_center(i), grid.t_center(j));
                let sol = problem.solve(&data)?;
                excess = excess.max(sol.max_principle_excess());
                let (w, _) = problem.point_weights(x, t)?;
                let adj: f64 = w.iter().zip(data.faces()).map(|(a, b)| a * b).sum();
                worst = worst.max((sol.value_at(x, t)? - adj).abs());
            }
            Ok((worst, excess))
        })
        .collect();
    let mut assertions = Vec::new();
    let mut excess: f64 = 0.0;
    for (field, r) in ops.iter().zip(results) {
        let (worst, e) = r?;
        excess = excess.max(e);
        assertions.push(Assertion::le(format!("|u(X) - sum F w| for {}", field.name()), worst, 1e-9));
    }
    Ok((
        CriterionResult::new(2, "Adjoint consistency", assertions, format!("{} pairs", per_op * ops.len())),
        excess,
    ))
}

/// A random (measure, E, ε₀′) triple.
#[derive(Clone, Debug)]
pub struct Triple {
    pub measure: DiscreteMeasure,
    pub set: DataFunction,
    pub epsilon0_prime: f64,
}

pub fn random_triples(seed: u64, count: usize) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let dim: u8 = if rng.gen_bool(0.7) { 1 } else { 2 };
        let depth = if dim == 1 { rng.gen_range(4..=10) } else { rng.gen_range(2..=5) };
        let spec = match rng.gen_range(0..3) {
            0 => MeasureSpec::Lebesgue,
            1 => MeasureSpec::Bernoulli { p: rng.gen_range(0.2..0.8) },
            _ => MeasureSpec::RandomDoubling {
                kappa: rng.gen_range(2.5..6.0),
                seed: rng.gen(),
            },
        };
        let Ok(measure) = make_measure(&spec, dim, depth) else { continue };
        let n = measure.num_cells();
        let count = rng.gen_range(1..=(n / 128).max(1));
        let cells: Vec<usize> = (0..count).map(|_| rng.gen_range(0..n)).collect();
        let set = DataFunction::indicator(dim, depth, cells).expect("cells in range");
        // Keep ε₀ = κε₀′ below one.
        let epsilon0_prime = rng.gen_range(0.1..0.95) / measure.doubling_constant();
        out.push(Triple {
            measure,
            set,
            epsilon0_prime,
        });
    }
    out
}

fn is_infeasible(e: &Error) -> bool {
    matches!(e, Error::SetTooLarge { .. } | Error::Parameter(_) | Error::EmptySet)
}

type CoverOutcome = Option<crate::cover::GoodCover>;

fn cover_check(triples: &[Triple]) -> Result<(CriterionResult, Vec<CoverOutcome>)> {
    let built: Vec<Result<(CoverOutcome, bool)>> = triples
        .par_iter()
        .map(|t| match build_good_cover(&t.measure, &t.set, t.epsilon0_prime) {
            Ok(c) => {
                let ok = verify_cover(&t.measure, &c)?.passed();
                Ok((Some(c), ok))
            }
            Err(e) if is_infeasible(&e) => Ok((None, true)),
            Err(e) => Err(e),
        })
        .collect();
    let mut covers = Vec::with_capacity(triples.len());
    let mut failures = 0;
    for r in built {
        let (c, ok) = r?;
        failures += usize::from(!ok);
        covers.push(c);
    }
    let built_count = covers.iter().filter(|c| c.is_some()).count();
    Ok((
        CriterionResult::new(
            3,
            "Cover invariants",
            vec![Assertion::eq("failed covers", failures as f64, 0.0)],
            format!("{} triples, {built_count} covers built", triples.len()),
        ),
        covers,
    ))
}

fn f_structure_check(triples: &[Triple], covers: &[CoverOutcome]) -> Result<CriterionResult> {
    let mut failures = 0usize;
    for (t, c) in triples.iter().zip(covers) {
        let Some(c) = c else { continue };
        let f = build_oscillating_data(c);
        let terms = oscillation_terms(c);
        let n = t.measure.num_cells();
        for cell in 0..n {
            let hits = terms.iter().filter(|g| g.get(cell)).count();
            if f.values()[cell] > 1 || hits > 1 || (hits == 1) != f.get(cell) {
                failures += 1;
                break;
            }
        }
    }
    Ok(CriterionResult::new(
        4,
        "F structure",
        vec![Assertion::eq("failed covers", failures as f64, 0.0)],
        format!("{} covers", covers.iter().flatten().count()),
    ))
}

fn certificate_check(triples: &[Triple], covers: &[CoverOutcome]) -> Result<CriterionResult> {
    let mut asserted = 0usize;
    let mut failures = 0usize;
    let mut feasible = 0usize;
    for (t, c) in triples.iter().zip(covers) {
        let Some(c) = c else { continue };
        let f = build_oscillating_data(c);
        match certify(&t.measure, c, &f, &t.set) {
            Ok(cert) => {
                feasible += usize::from(cert.feasible);
                if cert.all_jumps_meet_beta0 {
                    asserted += 1;
                    failures += usize::from(!cert.bound_holds);
                }
            }
            Err(Error::CertificateViolation(_)) => {
                asserted += 1;
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CriterionResult::new(
        5,
        "Square-sum certificate",
        vec![Assertion::eq("violated certificates", failures as f64, 0.0)],
        format!("{asserted} runs with every jump at least beta0, {feasible} flagged feasible"),
    ))
}

fn doubling_split_check(seed: u64) -> Result<CriterionResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0404);
    let mut failures = 0usize;
    let mut cubes = 0usize;
    for _ in 0..50 {
        let dim: u8 = if rng.gen_bool(0.5) { 1 } else { 2 };
        let depth = if dim == 1 { 10 } else { 5 };
        let spec = MeasureSpec::RandomDoubling {
            kappa: rng.gen_range(2.0..8.0),
            seed: rng.gen(),
        };
        let mu = make_measure(&spec, dim, depth)?;
        let alpha0 = 1.0 / mu.doubling_constant();
        for l in 0..depth {
            for m in 0..(1u64 << (dim as u32 * l)) {
                let s = DyadicCube::from_morton(dim, l, m);
                let ms = mu.cube_mass(&s)?;
                let tilde: f64 = s
                    .tilde_selection()
                    .iter()
                    .map(|c| mu.cube_mass(c))
                    .sum::<Result<f64>>()?;
                let r = tilde / ms;
                cubes += 1;
                if r < alpha0 * (1.0 - 1e-12) || r > (1.0 - alpha0) * (1.0 + 1e-12) {
                    failures += 1;
                }
            }
        }
    }
    Ok(CriterionResult::new(
        6,
        "Tilde split bracket",
        vec![Assertion::eq("failed cubes", failures as f64, 0.0)],
        format!("{cubes} cubes over 50 measures"),
    ))
}

/// Configuration of the nest checks at suite resolution.
pub fn suite_nest_config(quick: bool) -> NestConfig {
    NestConfig {
        h: if quick { 1.0 / 64.0 } else { 1.0 / 256.0 },
        ..NestConfig::default()
    }
}

fn prop11_check(opts: &SuiteOptions) -> Result<(CriterionResult, Vec<NestRun>)> {
    let cfg = suite_nest_config(opts.quick);
    let mut runs = Vec::new();
    let mut assertions = Vec::new();
    let mut detail = Vec::new();
    for name in ["identity", "skew"] {
        let run = run_nest(&operator_by_name(name, &[])?, &cfg)?;
        let rep = prop11_report(&run);
        detail.push(format!(
            "{name}: slope {:.4}, spread {:.3}",
            rep.summary["slope"], rep.summary["spread"]
        ));
        for mut a in rep.assertions {
            a.name = format!("{name}: {}", a.name);
            assertions.push(a);
        }
        runs.push(run);
    }
    Ok((CriterionResult::new(7, "Square function growth", assertions, detail.join("; ")), runs))
}

fn thm110_check(runs: &[NestRun]) -> Result<CriterionResult> {
    let mut assertions = Vec::new();
    let mut detail = Vec::new();
    for run in runs {
        let rep = thm110_report(run, THM110_C0);
        detail.push(format!("{}: median C_emp {:.4e}", run.operator.name, rep.summary["median_c_emp"]));
        for mut a in rep.assertions {
            a.name = format!("{}: {}", run.operator.name, a.name);
            assertions.push(a);
        }
    }
    Ok(CriterionResult::new(8, "Carleson to A-infinity", assertions, detail.join("; ")))
}

/// Kernel bracket over the operator suite; returns the largest excess of
/// the adjoint weights over `[0, 1]`.
fn kernel_bracket_check(opts: &SuiteOptions) -> Result<(CriterionResult, f64)> {
    let h = if opts.quick { 1.0 / 64.0 } else { 1.0 / 128.0 };
    let s = Interval::new(0.0, 1.0)?;
    let grid = Grid::truncated(0.0, 1.0, 8.0, h)?;
    let ops = operator_suite();
    let results: Vec<Result<Vec<(String, f64)>>> = ops
        .par_iter()
        .map(|field| {
            let mut problem = DirichletProblem::new(field, &grid, SolverOptions::default())?;
            let mut out = Vec::new();
            for half in [Half::Left, Half::Right] {
                let v = kernel_check(&mut problem, &s, 0.25, Some(half))?;
                out.push((format!("{} {:?}", field.name(), half), v));
            }
            Ok(out)
        })
        .collect();
    let mut assertions = Vec::new();
    let mut excess: f64 = 0.0;
    for r in results {
        for (name, v) in r? {
            excess = excess.max(-v).max(v - 1.0);
            assertions.push(Assertion::ge(format!("{name} >= 0.01"), v, 0.01));
            assertions.push(Assertion::le(format!("{name} <= 0.99"), v, 0.99));
        }
    }
    Ok((CriterionResult::new(9, "Kernel bracket", assertions, format!("eta 0.25, h = {h}")), excess))
}

fn small_pipeline(seed: u64) -> Result<String> {
    let mu = make_measure(&MeasureSpec::RandomDoubling { kappa: 3.0, seed }, 1, 10)?;
    let set = DataFunction::indicator(1, 10, 300..302)?;
    let cover = build_good_cover(&mu, &set, 0.2)?;
    let f = build_oscillating_data(&cover);
    let cert = certify(&mu, &cover, &f, &set)?;
    let grid = Grid::truncated(0.0, 1.0, 2.0, 1.0 / 32.0)?;
    let mut problem = DirichletProblem::new(&operator_by_name("smooth", &[])?, &grid, SolverOptions::default())?;
    let q = Interval::new(0.0, 1.0)?;
    let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, 8)?;
    Ok(serde_json::to_string(&(cover.to_file(), cert, omega.measure.cells()))?)
}

fn determinism_check(opts: &SuiteOptions, excess: f64) -> Result<CriterionResult> {
    let a = small_pipeline(opts.seed)?;
    let b = small_pipeline(opts.seed)?;
    Ok(CriterionResult::new(
        10,
        "Maximum principle and determinism",
        vec![
            Assertion::le("largest excess over the data range", excess, MAX_PRINCIPLE_TOL),
            Assertion::eq("repeat runs differ", f64::from(u8::from(a != b)), 0.0),
        ],
        "all suite solves; repeated cover, certificate and measure pipeline".into(),
    ))
}

fn scan_check(opts: &SuiteOptions) -> Result<CriterionResult> {
    let deltas = [1e-1, 1e-2, 1e-3];
    let depth = if opts.quick { 8 } else { 10 };
    let leb = make_measure(&MeasureSpec::Lebesgue, 1, depth)?;
    let same = ainfty_scan(&leb, &leb, &deltas)?;
    let mut assertions: Vec<Assertion> = same
        .rows
        .iter()
        .map(|r| Assertion::eq(format!("lebesgue epsilon({})", r.delta), r.epsilon, r.delta))
        .collect();
    let q = Interval::new(0.0, 1.0)?;
    let grid = Grid::truncated(0.0, 1.0, 8.0, if opts.quick { 1.0 / 64.0 } else { 1.0 / 128.0 })?;
    let mut problem = DirichletProblem::new(&CoefficientField::identity(), &grid, SolverOptions::default())?;
    let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, depth)?;
    let rep = ainfty_scan(&omega.measure, &leb, &deltas)?;
    for w in rep.rows.windows(2) {
        assertions.push(Assertion::lt(
            format!("harmonic epsilon({}) < epsilon({})", w[1].delta, w[0].delta),
            w[1].epsilon,
            w[0].epsilon,
        ));
    }
    assertions.push(Assertion::lt("harmonic epsilon(1e-3) < epsilon(1e-1)", rep.rows[2].epsilon, rep.rows[0].epsilon));
    let curve: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.epsilon)).collect();
    Ok(CriterionResult::new(11, "A-infinity scan", assertions, format!("harmonic curve [{}]", curve.join(", "))))
}
