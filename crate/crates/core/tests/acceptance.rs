//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! Reference values come from oracles written here: closed forms, forward
//! solves, and brute-force sums over finest cells.

use std::f64::consts::PI;
use std::time::Instant;

use ainfty_lab::ainfty::{ainfty_scan, run_nest, NestConfig, NestRun, THM110_C0};
use ainfty_lab::cover::{build_good_cover, GoodCover};
use ainfty_lab::dyadic::DyadicCube;
use ainfty_lab::measure::{make_measure, DataFunction, DiscreteMeasure, MeasureSpec};
use ainfty_lab::oscillate::build_oscillating_data;
use ainfty_lab::pde::{operator_by_name, operator_suite, BoundaryData, CoefficientField, DirichletProblem, Grid, SolverOptions};
use ainfty_lab::potential::{elliptic_measure, kernel_check, Half, Interval};
use ainfty_lab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const POISSON_TOL: f64 = 1e-2;
const POISSON_SECONDS: f64 = 30.0;
const ADJOINT_TOL: f64 = 1e-9;
/// Relative slack for floating-point sums in the "exact" inequalities.
const ROUND_TOL: f64 = 1e-12;
const SPREAD_MAX: f64 = 0.5;
const PROP11_SECONDS: f64 = 600.0;
const MEDIAN_FACTOR: f64 = 2.0;
const KERNEL_LO: f64 = 0.01;
const KERNEL_HI: f64 = 0.99;
const RANGE_TOL: f64 = 1e-8;
const SEED: u64 = 0x5eed_ac;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Cells of a cube in Morton order.
fn cells_of(q: &DyadicCube, dim: u8, depth: u32) -> std::ops::Range<usize> {
    let width = 1usize << (dim as u32 * (depth - q.level()));
    let m = q.morton() as usize;
    m * width..(m + 1) * width
}

fn mass(mu: &DiscreteMeasure, cells: impl Iterator<Item = usize>) -> f64 {
    cells.map(|c| mu.cells()[c]).sum()
}

fn poisson() -> Outcome {
    let start = Instant::now();
    let q = Interval::new(0.0, 1.0).unwrap();
    let grid = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 256.0).unwrap();
    let mut problem = DirichletProblem::new(&CoefficientField::identity(), &grid, SolverOptions::default()).unwrap();
    let omega = elliptic_measure(&mut problem, (0.0, 1.0), &q, 0).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let exact = 2.0 / PI * 0.5f64.atan();
    let err = (omega.measure.total() - exact).abs();
    outcome(
        err <= POISSON_TOL && secs < POISSON_SECONDS,
        format!("|omega - 2/pi atan(1/2)| = {err:.3e} (tol {POISSON_TOL}), {secs:.1} s (limit {POISSON_SECONDS} s)"),
    )
}

/// Returns the outcome and the largest excursion of any forward solve
/// outside its data range.
fn adjoint() -> (Outcome, f64) {
    let grid = Grid::truncated(0.0, 1.0, 4.0, 1.0 / 32.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst, mut excursion) = (0.0f64, 0.0f64);
    let ops = operator_suite();
    for pair in 0..20 {
        let field = &ops[pair % ops.len()];
        let mut problem = DirichletProblem::new(field, &grid, SolverOptions::default()).unwrap();
        let data = BoundaryData {
            bottom: (0..grid.nx).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            top: (0..grid.nx).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            left: (0..grid.nt).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            right: (0..grid.nt).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let i = rng.gen_range(0..grid.nx);
        let j = rng.gen_range(0..grid.nt);
        let sol = problem.solve(&data).unwrap();
        let all: Vec<f64> = data.faces();
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for &v in &sol.u {
            excursion = excursion.max(lo - v).max(v - hi);
        }
        let forward = sol.u[j * grid.nx + i];
        let (w, _) = problem.point_weights(grid.x_center(i), grid.t_center(j)).unwrap();
        let adjoint: f64 = w.iter().zip(&all).map(|(a, b)| a * b).sum();
        worst = worst.max((forward - adjoint).abs());
    }
    (
        outcome(worst <= ADJOINT_TOL, format!("max |u(X) - sum F w| = {worst:.3e} over 20 pairs (tol {ADJOINT_TOL:e})")),
        excursion,
    )
}

struct Triple {
    mu: DiscreteMeasure,
    set: DataFunction,
    eps0p: f64,
}

fn triples() -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut out = Vec::new();
    while out.len() < 200 {
        let dim: u8 = if rng.gen_bool(0.6) { 1 } else { 2 };
        let depth = if dim == 1 { rng.gen_range(3..=10) } else { rng.gen_range(2..=5) };
        let spec = match rng.gen_range(0..3) {
            0 => MeasureSpec::Lebesgue,
            1 => MeasureSpec::Bernoulli { p: rng.gen_range(0.15..0.85) },
            _ => MeasureSpec::RandomDoubling { kappa: rng.gen_range(2.0..7.0), seed: rng.gen() },
        };
        let mu = make_measure(&spec, dim, depth).unwrap();
        let n = mu.num_cells();
        let count = rng.gen_range(1..=(n / 64).max(1));
        let set = DataFunction::indicator(dim, depth, (0..count).map(|_| rng.gen_range(0..n))).unwrap();
        let kappa = brute_kappa(&mu);
        out.push(Triple { mu, set, eps0p: rng.gen_range(0.05..0.95) / kappa });
    }
    out
}

fn brute_kappa(mu: &DiscreteMeasure) -> f64 {
    let (dim, depth) = (mu.dim(), mu.depth());
    let mut kappa: f64 = 1.0;
    for l in 0..depth {
        for m in 0..(1u64 << (dim as u32 * l)) {
            let q = DyadicCube::from_morton(dim, l, m);
            let pm = mass(mu, cells_of(&q, dim, depth));
            for c in 0..(1u64 << dim) {
                let child = DyadicCube::from_morton(dim, l + 1, (m << dim) | c);
                kappa = kappa.max(pm / mass(mu, cells_of(&child, dim, depth)));
            }
        }
    }
    kappa
}

/// Definition (i)–(iii), iterated decay and proper containment by direct
/// summation. Returns a description of the first violation.
fn brute_check_cover(mu: &DiscreteMeasure, set: &DataFunction, c: &GoodCover) -> Option<String> {
    let (dim, depth) = (mu.dim(), mu.depth());
    let n = mu.num_cells();
    let k = c.k();
    let eps0 = c.epsilon0;
    let mut members: Vec<Vec<bool>> = Vec::with_capacity(k);
    for l in 1..=k {
        let mut m = vec![false; n];
        for q in &c.level(l).cubes {
            for cell in cells_of(q, dim, depth) {
                if m[cell] {
                    return Some(format!("level {l}: cubes overlap at cell {cell}"));
                }
                m[cell] = true;
            }
        }
        // Maximality: no two sibling sets fill a parent.
        for q in &c.level(l).cubes {
            if q.level() > 0 {
                let parent = q.parent().unwrap();
                if cells_of(&parent, dim, depth).all(|cell| m[cell])
                    && !c.level(l).cubes.contains(&parent)
                {
                    return Some(format!("level {l}: cube {q} not maximal"));
                }
            }
        }
        if (0..n).any(|cell| m[cell] != c.level(l).cells.get(cell)) {
            return Some(format!("level {l}: cell set differs from its cubes"));
        }
        members.push(m);
    }
    if set.support().any(|cell| !members[k - 1][cell]) {
        return Some("E not inside U_k".into());
    }
    for l in 2..=k {
        if (0..n).any(|cell| members[l - 1][cell] && !members[l - 2][cell]) {
            return Some(format!("U_{l} not inside U_{}", l - 1));
        }
        for q in &c.level(l).cubes {
            let strict = c.level(l - 1).cubes.iter().any(|p| p.level() < q.level() && p.contains(q));
            if !strict {
                return Some(format!("cube {q} of level {l} not properly inside level {}", l - 1));
            }
        }
    }
    if c.level(1).cubes.iter().any(|q| q.level() == 0) {
        return Some("level 1 contains the root".into());
    }
    // Smallness against the previous level (the root for l = 1), and the
    // iterated bound for every pair m < l.
    let root = vec![DyadicCube::root(dim)];
    for l in 1..=k {
        for m in 0..l {
            let parents = if m == 0 { &root } else { &c.level(m).cubes };
            for s in parents {
                let ws = mass(mu, cells_of(s, dim, depth));
                let inter = mass(mu, cells_of(s, dim, depth).filter(|&cell| members[l - 1][cell]));
                let bound = eps0.powi((l - m) as i32) * ws;
                if inter > bound * (1.0 + ROUND_TOL) {
                    return Some(format!("omega(S cap U_{l}) = {inter} > eps0^{} omega(S) = {bound} for S = {s}", l - m));
                }
            }
        }
    }
    None
}

/// `Ũ_{j−1} \ U_j` computed from cube lists.
fn brute_terms(c: &GoodCover) -> Vec<Vec<bool>> {
    let (dim, depth) = (c.dim, c.depth);
    let n = 1usize << (dim as u32 * depth);
    (2..=c.k())
        .map(|j| {
            let mut t = vec![false; n];
            for q in &c.level(j - 1).cubes {
                if q.level() == depth {
                    continue;
                }
                let shift = dim as u32 * (depth - q.level() - 1);
                for cell in cells_of(q, dim, depth) {
                    let digit = (cell >> shift) & ((1 << dim) - 1);
                    if digit & 1 == 0 && !c.level(j).cells.get(cell) {
                        t[cell] = true;
                    }
                }
            }
            t
        })
        .collect()
}

fn average(mu: &DiscreteMeasure, f: &DataFunction, q: &DyadicCube) -> f64 {
    let r = cells_of(q, mu.dim(), mu.depth());
    let w = mass(mu, r.clone());
    mass(mu, r.filter(|&c| f.get(c))) / w
}

struct CoverStats {
    covers: usize,
    infeasible: usize,
    cover_failures: Vec<String>,
    f_failures: usize,
    certified: usize,
    cert_failures: usize,
    reported: usize,
}

fn covers_and_data(triples: &[Triple]) -> CoverStats {
    let mut s = CoverStats {
        covers: 0,
        infeasible: 0,
        cover_failures: vec![],
        f_failures: 0,
        certified: 0,
        cert_failures: 0,
        reported: 0,
    };
    for (t_idx, t) in triples.iter().enumerate() {
        let c = match build_good_cover(&t.mu, &t.set, t.eps0p) {
            Ok(c) => c,
            Err(Error::SetTooLarge { .. }) | Err(Error::EmptySet) => {
                s.infeasible += 1;
                continue;
            }
            Err(e) => {
                s.cover_failures.push(format!("triple {t_idx}: {e}"));
                continue;
            }
        };
        s.covers += 1;
        if let Some(v) = brute_check_cover(&t.mu, &t.set, &c) {
            s.cover_failures.push(format!("triple {t_idx}: {v}"));
        }

        // F structure.
        let f = build_oscillating_data(&c);
        let terms = brute_terms(&c);
        let n = t.mu.num_cells();
        let mut ok = f.values().iter().all(|&v| v <= 1);
        for cell in 0..n {
            let hits = terms.iter().filter(|term| term[cell]).count();
            ok &= hits <= 1 && (hits == 1) == f.get(cell);
        }
        s.f_failures += usize::from(!ok);

        // Square-sum certificate.
        let (dim, depth) = (t.mu.dim(), t.mu.depth());
        let kappa = brute_kappa(&t.mu);
        let alpha0 = 1.0 / kappa;
        let beta0 = (alpha0 / 2.0).min(1.0 - 2.0 * alpha0);
        let k = c.k();
        let mut all_meet = true;
        let mut min_sum = f64::INFINITY;
        for x in t.set.support() {
            let cell = DyadicCube::from_morton(dim, depth, x as u64);
            let mut sum = 0.0;
            for l in 0..depth {
                let a = cell.ancestor_at(l).unwrap();
                let b = cell.ancestor_at(l + 1).unwrap();
                let d = average(&t.mu, &f, &a) - average(&t.mu, &f, &b);
                sum += d * d;
            }
            min_sum = min_sum.min(sum);
            for l in 1..k {
                let sc = c.level(l).cubes.iter().find(|q| q.contains(&cell)).expect("E covered");
                let child = cell.ancestor_at(sc.level() + 1).unwrap();
                let jump = (average(&t.mu, &f, sc) - average(&t.mu, &f, &child)).abs();
                all_meet &= jump >= beta0;
            }
        }
        if all_meet && beta0 > 0.0 {
            s.certified += 1;
            let m = (k as f64 - 1.0) * beta0 * beta0;
            s.cert_failures += usize::from(min_sum < m * (1.0 - ROUND_TOL));
        } else {
            s.reported += 1;
        }
    }
    s
}

fn tilde_bracket() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let (mut cubes, mut failures) = (0usize, 0usize);
    let mut worst: f64 = f64::INFINITY;
    for _ in 0..50 {
        let dim: u8 = if rng.gen_bool(0.5) { 1 } else { 2 };
        let depth = if dim == 1 { 9 } else { 5 };
        let spec = MeasureSpec::RandomDoubling { kappa: rng.gen_range(2.0..9.0), seed: rng.gen() };
        let mu = make_measure(&spec, dim, depth).unwrap();
        let alpha0 = 1.0 / brute_kappa(&mu);
        for l in 0..depth {
            for m in 0..(1u64 << (dim as u32 * l)) {
                let s = DyadicCube::from_morton(dim, l, m);
                let ws = mass(&mu, cells_of(&s, dim, depth));
                // Children whose first coordinate bit is 0.
                let tilde: f64 = (0..(1u64 << dim))
                    .filter(|c| c & 1 == 0)
                    .map(|c| mass(&mu, cells_of(&DyadicCube::from_morton(dim, l + 1, (m << dim) | c), dim, depth)))
                    .sum();
                let r = tilde / ws;
                cubes += 1;
                worst = worst.min((r - alpha0).min(1.0 - alpha0 - r));
                if r < alpha0 * (1.0 - ROUND_TOL) || r > (1.0 - alpha0) * (1.0 + ROUND_TOL) {
                    failures += 1;
                }
            }
        }
    }
    outcome(
        failures == 0,
        format!("{failures} failures over {cubes} cubes of 50 measures (smallest margin {worst:.3e})"),
    )
}

fn relative_spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / (v.iter().sum::<f64>() / v.len() as f64)
}

fn prop11(runs: &[(String, NestRun)], secs: f64) -> Outcome {
    let mut passed = secs < PROP11_SECONDS;
    let mut parts = Vec::new();
    for (name, run) in runs {
        let live: Vec<_> = run.rows.iter().filter(|r| r.k >= 2 && r.skipped.is_none()).collect();
        let kbar: Vec<u32> = live.iter().map(|r| ((1.0 / r.omega_e).ln() + 1e-9).floor() as u32).collect();
        let s2: Vec<f64> = live.iter().map(|r| r.min_s2).collect();
        let mut monotone = true;
        for w in 1..live.len() {
            if kbar[w] > kbar[w - 1] && s2[w] <= s2[w - 1] {
                monotone = false;
            }
        }
        let ratios: Vec<f64> = s2.iter().zip(&kbar).map(|(s, &k)| s / k as f64).collect();
        let spread = relative_spread(&ratios);
        passed &= monotone && spread <= SPREAD_MAX && live.len() >= 2;
        let pairs: Vec<String> = kbar.iter().zip(&s2).map(|(k, s)| format!("{k}:{s:.4}")).collect();
        parts.push(format!(
            "{name} kbar:minS2 [{}] monotone {monotone}, spread {spread:.3} (max {SPREAD_MAX})",
            pairs.join(" ")
        ));
    }
    parts.push(format!("{secs:.0} s (limit {PROP11_SECONDS} s)"));
    outcome(passed, parts.join("; "))
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 { s[n / 2] } else { 0.5 * (s[n / 2 - 1] + s[n / 2]) }
}

fn thm110(runs: &[(String, NestRun)]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, run) in runs {
        // |E|/|Q| from the cell count at the nest depth.
        let c: Vec<f64> = run
            .rows
            .iter()
            .map(|r| (r.cells as f64 / (1u64 << run.config.depth) as f64) * (1.0 / r.omega_e).ln())
            .collect();
        let med = median(&c);
        let within = c.iter().all(|&v| v <= MEDIAN_FACTOR * med && v >= med / MEDIAN_FACTOR);
        let bound = run.rows.iter().zip(&c).all(|(r, &v)| !r.a_emp.is_finite() || v <= THM110_C0 * (1.0 + r.a_emp));
        passed &= within;
        let vals: Vec<String> = c.iter().map(|v| format!("{v:.3e}")).collect();
        parts.push(format!(
            "{name} C_emp [{}] median {med:.3e}, within x{MEDIAN_FACTOR}: {within}, c0 bound holds: {bound}",
            vals.join(" ")
        ));
    }
    outcome(passed, parts.join("; "))
}

fn kernel_bracket() -> (Outcome, f64) {
    let s = Interval::new(0.0, 1.0).unwrap();
    let grid = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 128.0).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for field in operator_suite() {
        let mut problem = DirichletProblem::new(&field, &grid, SolverOptions::default()).unwrap();
        for half in [Half::Left, Half::Right] {
            let v = kernel_check(&mut problem, &s, 0.25, Some(half)).unwrap();
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (
        outcome(
            lo >= KERNEL_LO && hi <= KERNEL_HI,
            format!("values in [{lo:.4}, {hi:.4}] over 5 operators x 2 halves (bracket [{KERNEL_LO}, {KERNEL_HI}])"),
        ),
        (-lo).max(hi - 1.0).max(0.0),
    )
}

fn determinism(excursion: f64) -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let codes: Vec<i32> = dirs
        .iter()
        .map(|d| {
            ainfty_lab::cli::run([
                "ainfty-lab",
                "suite",
                "--quick",
                "--seed",
                "7",
                "--quiet",
                "--out",
                d.path().to_str().unwrap(),
            ])
        })
        .collect();
    let outputs: Vec<Vec<(String, Vec<u8>)>> = dirs
        .iter()
        .map(|d| {
            let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(d.path().join("suite"))
                .unwrap()
                .map(|e| e.unwrap())
                .filter(|e| !e.file_name().to_string_lossy().starts_with("manifest"))
                .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
                .collect();
            files.sort();
            files
        })
        .collect();
    let identical = !outputs[0].is_empty() && outputs[0] == outputs[1];
    outcome(
        identical && codes[0] == codes[1] && excursion <= RANGE_TOL,
        format!(
            "largest excursion outside data range {excursion:.2e} (tol {RANGE_TOL:e}); two quick suites byte-identical: {identical} ({} files, exit codes {:?})",
            outputs[0].len(),
            codes
        ),
    )
}

fn scan() -> Outcome {
    let deltas = [1e-1, 1e-2, 1e-3];
    let leb = make_measure(&MeasureSpec::Lebesgue, 1, 10).unwrap();
    let same = ainfty_scan(&leb, &leb, &deltas).unwrap();
    let exact = same.rows.iter().all(|r| r.epsilon == r.delta);
    let q = Interval::new(0.0, 1.0).unwrap();
    let grid = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 128.0).unwrap();
    let mut problem = DirichletProblem::new(&CoefficientField::identity(), &grid, SolverOptions::default()).unwrap();
    let omega = elliptic_measure(&mut problem, (0.0, 1.0), &q, 10).unwrap();
    let rep = ainfty_scan(&omega.measure, &leb, &deltas).unwrap();
    let eps: Vec<f64> = rep.rows.iter().map(|r| r.epsilon).collect();
    let decreasing = eps.windows(2).all(|w| w[1] < w[0]);
    outcome(
        exact && decreasing && eps[2] < eps[0],
        format!(
            "lebesgue epsilon = delta exactly: {exact}; harmonic epsilon at 1e-1, 1e-2, 1e-3 = [{:.4}, {:.4}, {:.4}]",
            eps[0], eps[1], eps[2]
        ),
    )
}

fn report(id: u32, name: &str, o: &Outcome, failed: &mut Vec<u32>) {
    println!("criterion {id:>2} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    if !o.passed {
        failed.push(id);
    }
}

fn main() {
    // `cargo test` passes filter arguments; the battery always runs whole.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = Vec::new();
    println!("acceptance battery");

    report(1, "Poisson oracle", &poisson(), &mut failed);
    let (o, mut excursion) = adjoint();
    report(2, "Adjoint consistency", &o, &mut failed);

    let t = triples();
    let s = covers_and_data(&t);
    report(
        3,
        "Cover invariants",
        &outcome(
            s.cover_failures.is_empty(),
            format!(
                "{} failures over {} triples ({} covers, {} set-too-large){}",
                s.cover_failures.len(),
                t.len(),
                s.covers,
                s.infeasible,
                s.cover_failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
            ),
        ),
        &mut failed,
    );
    report(
        4,
        "F structure",
        &outcome(s.f_failures == 0, format!("{} failures over {} covers", s.f_failures, s.covers)),
        &mut failed,
    );
    report(
        5,
        "Square-sum certificate",
        &outcome(
            s.cert_failures == 0,
            format!(
                "{} violations over {} runs with every jump >= beta0 > 0; {} runs reported only",
                s.cert_failures, s.certified, s.reported
            ),
        ),
        &mut failed,
    );
    report(6, "Tilde split bracket", &tilde_bracket(), &mut failed);

    let start = Instant::now();
    let cfg = NestConfig::default();
    let runs: Vec<(String, NestRun)> = ["identity", "skew"]
        .iter()
        .map(|name| (name.to_string(), run_nest(&operator_by_name(name, &[]).unwrap(), &cfg).unwrap()))
        .collect();
    let secs = start.elapsed().as_secs_f64();
    for (_, run) in &runs {
        for r in &run.rows {
            excursion = excursion.max(r.max_principle_excess);
        }
    }
    report(7, "Square function growth", &prop11(&runs, secs), &mut failed);
    report(8, "Carleson constant along nests", &thm110(&runs), &mut failed);

    let (o, e) = kernel_bracket();
    excursion = excursion.max(e);
    report(9, "Kernel bracket", &o, &mut failed);
    report(10, "Maximum principle and determinism", &determinism(excursion), &mut failed);
    report(11, "A-infinity scan", &scan(), &mut failed);

    if failed.is_empty() {
        println!("all 11 criteria pass");
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
