//! Command-line driver.
//!
//! Settings come from built-in defaults, then an optional `key = value`
//! config file with `[section]` headers, then flags. Every output file name
//! carries the first 12 hex digits of the config hash.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ainfty::{self, Assertion, ExperimentReport, NestConfig, Provenance};
use crate::cover::{build_good_cover, verify_cover};
use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::measure::{make_measure, DataFunction, DiscreteMeasure, MeasureSpec};
use crate::oscillate::{build_oscillating_data, certify};
use crate::pde::{operator_by_name, BoundaryData, DirichletProblem, Grid, SolverOptions, MAX_PRINCIPLE_TOL};
use crate::potential::{bottom_datum, elliptic_measure, Interval};
use crate::suite::{run_suite, SuiteOptions};

/// Environment variable naming the output root when `--out` is absent.
pub const OUT_ENV: &str = "AINFTY_LAB_OUT";

/// Version of the JSON and CSV layouts described in `schemas/`.
pub const SCHEMA_VERSION: u32 = 1;

/// A set `E` of finest cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SetSpec {
    /// Explicit Morton indices.
    Cells { cells: Vec<usize> },
    /// Cells whose centers lie in `[a, b)`, in unit coordinates of the
    /// first axis.
    Interval { a: f64, b: f64 },
    Random { count: usize, seed: u64 },
    /// ω-targets `start·ratio^j`, `j < steps`, for nest experiments.
    Nest { ratio: f64, steps: usize },
}

impl FromStr for SetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("set spec '{s}' needs KIND:ARGS")))?;
        let parts: Vec<&str> = args.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        let num = |p: &str| -> Result<f64> {
            p.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{p}' in set spec '{s}'")))
        };
        let int = |p: &str| -> Result<u64> {
            p.parse::<u64>().map_err(|_| Error::Parse(format!("bad integer '{p}' in set spec '{s}'")))
        };
        match (kind, parts.as_slice()) {
            ("cells", ps) if !ps.is_empty() => Ok(SetSpec::Cells {
                cells: ps.iter().map(|p| int(p).map(|v| v as usize)).collect::<Result<_>>()?,
            }),
            ("interval", [a, b]) => Ok(SetSpec::Interval { a: num(a)?, b: num(b)? }),
            ("random", [c, seed]) => Ok(SetSpec::Random {
                count: int(c)? as usize,
                seed: int(seed)?,
            }),
            ("nest", [r, steps]) => Ok(SetSpec::Nest {
                ratio: num(r)?,
                steps: int(steps)? as usize,
            }),
            _ => Err(Error::Parse(format!("unrecognised set spec '{s}'"))),
        }
    }
}

impl SetSpec {
    /// The set on a tree of the given shape. Nest specs are rejected here.
    pub fn realize(&self, dim: u8, depth: u32) -> Result<DataFunction> {
        let n = 1usize << (dim as u32 * depth);
        match self {
            SetSpec::Cells { cells } => {
                if let Some(c) = cells.iter().find(|&&c| c >= n) {
                    return Err(Error::Parameter(format!("cell {c} outside a tree of {n} cells")));
                }
                DataFunction::indicator(dim, depth, cells.iter().copied())
            }
            SetSpec::Interval { a, b } => {
                if !(0.0 <= *a && a < b && *b <= 1.0) {
                    return Err(Error::Parameter(format!("interval [{a}, {b}) not inside [0, 1]")));
                }
                let cells = (0..n).filter(|&c| {
                    let x = DyadicCube::from_morton(dim, depth, c as u64).center()[0];
                    *a <= x && x < *b
                });
                DataFunction::indicator(dim, depth, cells)
            }
            SetSpec::Random { count, seed } => {
                if *count == 0 || *count > n {
                    return Err(Error::Parameter(format!("random set size {count} not in 1..={n}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut f = DataFunction::zeros(dim, depth);
                while f.count() < *count {
                    f.set(rng.gen_range(0..n), true);
                }
                Ok(f)
            }
            SetSpec::Nest { .. } => Err(Error::Parameter(
                "nest specs only apply to prop11, thm110 and thm116".into(),
            )),
        }
    }

    pub fn nest_targets(&self, start: f64) -> Result<Vec<f64>> {
        match self {
            SetSpec::Nest { ratio, steps } => {
                if !(*ratio > 0.0 && *ratio < 1.0) || *steps == 0 {
                    return Err(Error::Parameter("nest needs 0 < ratio < 1 and steps ≥ 1".into()));
                }
                Ok((0..*steps).map(|j| start * ratio.powi(j as i32)).collect())
            }
            _ => Err(Error::Parameter("nest experiments need a nest:ratio,steps set".into())),
        }
    }
}

/// Every setting of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub operator: String,
    pub operator_params: Vec<f64>,
    pub h: f64,
    pub truncation: f64,
    pub ell: f64,
    pub dim: u8,
    pub depth: u32,
    pub epsilon0_prime: f64,
    pub measure: String,
    pub gamma: f64,
    pub eta: f64,
    pub set: String,
    pub nest_start: f64,
    pub nest_center: f64,
    pub p: f64,
    pub p_min: f64,
    pub deltas: Vec<f64>,
    pub seed: u64,
    pub quick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: String::new(),
            operator: "identity".into(),
            operator_params: vec![],
            h: 1.0 / 256.0,
            truncation: 8.0,
            ell: 1.0,
            dim: 1,
            depth: 16,
            epsilon0_prime: 0.25,
            measure: "harmonic".into(),
            gamma: 1.0,
            eta: 0.25,
            set: "cells:0".into(),
            nest_start: 1e-2,
            nest_center: -1.0 / 6.0,
            p: 4.0,
            p_min: 4.0,
            deltas: vec![1e-1, 1e-2, 1e-3],
            seed: 0,
            quick: false,
        }
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{s}'"))))
        .collect()
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::Parse(format!("bad value '{v}' for '{key}'")))
}

impl RunConfig {
    /// Sets `section.key`; unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "operator.name" => self.operator = v.into(),
            "operator.params" => self.operator_params = parse_list(v)?,
            "grid.h" => self.h = parse(key, v)?,
            "grid.K" | "grid.truncation" => self.truncation = parse(key, v)?,
            "grid.ell" => self.ell = parse(key, v)?,
            "dyadic.dim" => self.dim = parse(key, v)?,
            "dyadic.depth" => self.depth = parse(key, v)?,
            "dyadic.eps0p" => self.epsilon0_prime = parse(key, v)?,
            "dyadic.measure" => self.measure = v.into(),
            "cone.gamma" => self.gamma = parse(key, v)?,
            "cone.eta" => self.eta = parse(key, v)?,
            "experiment.set" => self.set = v.into(),
            "experiment.nest_start" => self.nest_start = parse(key, v)?,
            "experiment.nest_center" => self.nest_center = parse(key, v)?,
            "experiment.p" => self.p = parse(key, v)?,
            "experiment.p_min" => self.p_min = parse(key, v)?,
            "experiment.deltas" => self.deltas = parse_list(v)?,
            "experiment.seed" => self.seed = parse(key, v)?,
            _ => return Err(Error::Parse(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file with `[section]` headers. `#` starts a
    /// comment.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            if section.is_empty() {
                return Err(Error::Parse(format!("line {}: key outside a section", n + 1)));
            }
            self.set(&format!("{section}.{}", k.trim()), v).map_err(|e| match e {
                Error::Parse(m) => Error::Parse(format!("line {}: {m}", n + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if !(self.h > 0.0 && self.h <= 0.25) {
            return bad(format!("h = {} not in (0, 1/4]", self.h));
        }
        if !(self.truncation >= 2.0) {
            return bad(format!("K = {} below 2", self.truncation));
        }
        if !(self.ell > 0.0) {
            return bad(format!("ell = {} not positive", self.ell));
        }
        if !(self.dim == 1 || self.dim == 2) {
            return bad(format!("dim = {} not 1 or 2", self.dim));
        }
        if !(self.epsilon0_prime > 0.0 && self.epsilon0_prime < 1.0) {
            return bad(format!("eps0p = {} not in (0, 1)", self.epsilon0_prime));
        }
        if !(self.gamma > 0.0) || !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("gamma must be positive and eta in (0, 1)".into());
        }
        if !(self.p >= 1.0) || !(self.p_min >= 1.0) {
            return bad("p and p_min must be at least 1".into());
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return bad("deltas must lie in (0, 1]".into());
        }
        SetSpec::from_str(&self.set)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn interval(&self) -> Result<Interval> {
        Interval::new(0.0, self.ell)
    }

    fn field(&self) -> Result<crate::pde::CoefficientField> {
        operator_by_name(&self.operator, &self.operator_params)
    }

    fn nest_config(&self) -> Result<NestConfig> {
        let spec = SetSpec::from_str(&self.set)?;
        Ok(NestConfig {
            q: self.interval()?,
            h: self.h * self.ell,
            truncation: self.truncation,
            depth: self.depth,
            epsilon0_prime: self.epsilon0_prime,
            gamma: self.gamma,
            p: self.p,
            p_min: self.p_min,
            center: self.nest_center * self.ell,
            targets: spec.nest_targets(self.nest_start)?,
            solver: SolverOptions::default(),
        })
    }
}

#[derive(Parser, Debug)]
#[command(name = "ainfty-lab", version, about = "Good covers, oscillating data and elliptic-measure experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build and verify a good ε₀-cover of a set.
    Cover(CommonArgs),
    /// Oscillating data F for a cover, with the square-sum certificate.
    Oscillate(CommonArgs),
    /// Dirichlet solve with datum χ_E on Q.
    Solve(CommonArgs),
    /// Elliptic measure of the dyadic partition of Q from A_Q.
    Measure(CommonArgs),
    /// Square-function growth along a nest.
    Prop11(CommonArgs),
    /// Carleson constant against the A∞ quantity along a nest.
    Thm110(CommonArgs),
    /// L^p comparison of S and u* along a nest.
    Thm116(CommonArgs),
    /// Empirical δ → ε curve.
    AinftyScan(CommonArgs),
    /// The acceptance battery.
    Suite(CommonArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Cover(a) => ("cover", a),
            Command::Oscillate(a) => ("oscillate", a),
            Command::Solve(a) => ("solve", a),
            Command::Measure(a) => ("measure", a),
            Command::Prop11(a) => ("prop11", a),
            Command::Thm110(a) => ("thm110", a),
            Command::Thm116(a) => ("thm116", a),
            Command::AinftyScan(a) => ("ainfty-scan", a),
            Command::Suite(a) => ("suite", a),
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// Config file of `key = value` lines under [operator], [grid], [dyadic],
    /// [cone], [experiment].
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output root [default: $AINFTY_LAB_OUT or ./out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Operator: identity, diagonal, smooth, skew, pullback [default: identity].
    #[arg(long)]
    pub operator: Option<String>,
    /// Comma-separated operator parameters [default: suite values].
    #[arg(long)]
    pub operator_params: Option<String>,
    /// Grid spacing in units of ℓ(Q) [default: 1/256].
    #[arg(long)]
    pub h: Option<f64>,
    /// Truncation K: the box is 2Kℓ wide and Kℓ tall [default: 8].
    #[arg(long = "K", alias = "truncation")]
    pub truncation: Option<f64>,
    /// Side ℓ(Q) of Q centered at 0 [default: 1].
    #[arg(long)]
    pub ell: Option<f64>,
    /// Dimension of the dyadic tree [default: 1].
    #[arg(long)]
    pub dim: Option<u8>,
    /// Depth of the dyadic tree [default: 16].
    #[arg(long)]
    pub depth: Option<u32>,
    /// Cover threshold ε₀′ [default: 0.25].
    #[arg(long)]
    pub eps0p: Option<f64>,
    /// lebesgue, bernoulli:P, random-doubling:KAPPA,SEED or harmonic [default: harmonic].
    #[arg(long)]
    pub measure: Option<String>,
    /// Cone aperture γ [default: 1].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Corkscrew height factor η [default: 0.25].
    #[arg(long)]
    pub eta: Option<f64>,
    /// cells:i,j,… | interval:a,b | random:count,seed | nest:ratio,steps [default: cells:0].
    #[arg(long)]
    pub set: Option<String>,
    /// Exponent p [default: 4].
    #[arg(long)]
    pub p: Option<f64>,
    /// Smallest accepted p [default: 4].
    #[arg(long)]
    pub p_min: Option<f64>,
    /// Comma-separated δ values [default: 0.1,0.01,0.001].
    #[arg(long)]
    pub deltas: Option<String>,
    /// Seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reduced sizes for `suite`.
    #[arg(long)]
    pub quick: bool,
    /// No progress output.
    #[arg(long)]
    pub quiet: bool,
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(path) = &self.config {
            cfg.apply_file(&fs::read_to_string(path)?)?;
        }
        macro_rules! over {
            ($field:ident, $key:expr) => {
                if let Some(v) = &self.$field {
                    cfg.set($key, &v.to_string())?;
                }
            };
        }
        over!(operator, "operator.name");
        over!(operator_params, "operator.params");
        over!(h, "grid.h");
        over!(truncation, "grid.K");
        over!(ell, "grid.ell");
        over!(dim, "dyadic.dim");
        over!(depth, "dyadic.depth");
        over!(eps0p, "dyadic.eps0p");
        over!(measure, "dyadic.measure");
        over!(gamma, "cone.gamma");
        over!(eta, "cone.eta");
        over!(set, "experiment.set");
        over!(p, "experiment.p");
        over!(p_min, "experiment.p_min");
        over!(deltas, "experiment.deltas");
        over!(seed, "experiment.seed");
        cfg.quick = self.quick;
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    version: &'static str,
    config: &'a RunConfig,
    config_hash: &'a str,
    seed: u64,
    outputs: Vec<String>,
    passed: bool,
    wall_time_s: f64,
    timings: BTreeMap<String, f64>,
    unix_time: u64,
}

/// Writes named outputs with the config hash in the file name.
struct Outputs {
    dir: PathBuf,
    tag: String,
    written: Vec<String>,
}

impl Outputs {
    fn path(&mut self, stem: &str, ext: &str) -> PathBuf {
        let name = format!("{stem}.{}.{ext}", self.tag);
        self.written.push(name.clone());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(stem, "json"), text)?;
        Ok(())
    }

    fn report<R: Serialize>(&mut self, stem: &str, rep: &ExperimentReport<R>) -> Result<()> {
        self.json(stem, rep)?;
        let p = self.path(stem, "csv");
        rep.write_csv(&p)
    }
}

/// Outcome of one subcommand: pass flag plus extra timings.
struct Outcome {
    passed: bool,
    timings: BTreeMap<String, f64>,
}

impl Outcome {
    fn pass(passed: bool) -> Self {
        Outcome { passed, timings: BTreeMap::new() }
    }
}

fn provenance(cfg: &RunConfig, hash: &str) -> Provenance {
    Provenance {
        config_hash: Some(hash.to_string()),
        ..Provenance::new(Some(cfg.seed))
    }
}

fn tree_measure(cfg: &RunConfig) -> Result<DiscreteMeasure> {
    if cfg.measure == "harmonic" {
        if cfg.dim != 1 {
            return Err(Error::Parameter("harmonic measures live on d = 1".into()));
        }
        let q = cfg.interval()?;
        let grid = Grid::truncated(0.0, cfg.ell, cfg.truncation, cfg.h * cfg.ell)?;
        let mut problem = DirichletProblem::new(&cfg.field()?, &grid, SolverOptions::default())?;
        Ok(elliptic_measure(&mut problem, q.corkscrew(), &q, cfg.depth)?.measure)
    } else {
        make_measure(&MeasureSpec::from_str(&cfg.measure)?, cfg.dim, cfg.depth)
    }
}

fn execute(name: &str, cfg: &RunConfig, hash: &str, out: &mut Outputs, quiet: bool) -> Result<Outcome> {
    let prov = provenance(cfg, hash);
    match name {
        "cover" => {
            let mu = tree_measure(cfg)?;
            let set = SetSpec::from_str(&cfg.set)?.realize(cfg.dim, cfg.depth)?;
            let cover = build_good_cover(&mu, &set, cfg.epsilon0_prime)?;
            let report = verify_cover(&mu, &cover)?;
            out.json("cover", &serde_json::json!({ "cover": cover.to_file(), "provenance": prov }))?;
            out.json("cover-report", &serde_json::json!({ "report": report, "provenance": prov }))?;
            Ok(Outcome::pass(report.passed()))
        }
        "oscillate" => {
            let mu = tree_measure(cfg)?;
            let set = SetSpec::from_str(&cfg.set)?.realize(cfg.dim, cfg.depth)?;
            let cover = build_good_cover(&mu, &set, cfg.epsilon0_prime)?;
            let f = build_oscillating_data(&cover);
            let cert = certify(&mu, &cover, &f, &set)?;
            let mut w = csv::Writer::from_path(out.path("oscillating-data", "csv"))?;
            w.write_record(["cell", "f"])?;
            for (c, v) in f.values().iter().enumerate() {
                w.write_record([c.to_string(), v.to_string()])?;
            }
            w.flush()?;
            out.json("certificate", &serde_json::json!({ "certificate": cert, "provenance": prov }))?;
            Ok(Outcome::pass(!cert.all_jumps_meet_beta0 || cert.bound_holds))
        }
        "solve" => {
            if cfg.dim != 1 {
                return Err(Error::Parameter("solve takes d = 1 sets".into()));
            }
            let q = cfg.interval()?;
            let grid = Grid::truncated(0.0, cfg.ell, cfg.truncation, cfg.h * cfg.ell)?;
            let set = SetSpec::from_str(&cfg.set)?.realize(1, cfg.depth)?;
            let bottom = bottom_datum(&grid, &q, &set)?;
            let mut problem = DirichletProblem::new(&cfg.field()?, &grid, SolverOptions::default())?;
            let sol = problem.solve(&BoundaryData::bottom_only(&grid, bottom)?)?;
            sol.write_csv(fs::File::create(out.path("solution", "csv"))?)?;
            let excess = sol.max_principle_excess();
            let check = Assertion::le("maximum principle excess", excess, MAX_PRINCIPLE_TOL);
            out.json(
                "solve",
                &serde_json::json!({
                    "grid": grid,
                    "stats": sol.stats,
                    "warnings": sol.warnings,
                    "assertions": [check],
                    "provenance": prov,
                }),
            )?;
            Ok(Outcome::pass(check.passed))
        }
        "measure" => {
            let q = cfg.interval()?;
            let grid = Grid::truncated(0.0, cfg.ell, cfg.truncation, cfg.h * cfg.ell)?;
            let mut problem = DirichletProblem::new(&cfg.field()?, &grid, SolverOptions::default())?;
            let omega = elliptic_measure(&mut problem, q.corkscrew(), &q, cfg.depth)?;
            omega.measure.write_csv(fs::File::create(out.path("measure", "csv"))?)?;
            out.json(
                "measure",
                &serde_json::json!({
                    "metadata": omega.measure.metadata(),
                    "leak": omega.leak,
                    "bottom_total": omega.bottom_total,
                    "provenance": omega.provenance,
                    "stats": omega.stats,
                    "run": prov,
                }),
            )?;
            Ok(Outcome::pass(true))
        }
        "prop11" | "thm110" | "thm116" => {
            let run = ainfty::run_nest(&cfg.field()?, &cfg.nest_config()?)?;
            let passed = match name {
                "prop11" => write_report(out, name, ainfty::prop11_report(&run), &prov, quiet)?,
                "thm110" => write_report(out, name, ainfty::thm110_report(&run, ainfty::THM110_C0), &prov, quiet)?,
                _ => write_report(out, name, ainfty::thm116_report(&run), &prov, quiet)?,
            };
            Ok(Outcome::pass(passed))
        }
        "ainfty-scan" => {
            let omega = tree_measure(cfg)?;
            let sigma = make_measure(&MeasureSpec::Lebesgue, cfg.dim, cfg.depth)?;
            let rep = ainfty::ainfty_scan(&omega, &sigma, &cfg.deltas)?;
            write_report(out, name, rep, &prov, quiet).map(Outcome::pass)
        }
        "suite" => {
            let opts = SuiteOptions { quick: cfg.quick, seed: cfg.seed };
            let (report, timings) = run_suite(&opts)?;
            for c in report.criteria.iter().filter(|_| !quiet) {
                eprintln!("[{}] criterion {:>2} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
            }
            out.json("suite", &serde_json::json!({ "report": report, "provenance": prov }))?;
            Ok(Outcome {
                passed: report.passed(),
                timings,
            })
        }
        _ => Err(Error::Parameter(format!("unknown subcommand '{name}'"))),
    }
}

fn write_report<R: Serialize>(
    out: &mut Outputs,
    stem: &str,
    mut rep: ExperimentReport<R>,
    prov: &Provenance,
    quiet: bool,
) -> Result<bool> {
    rep.provenance = prov.clone();
    out.report(stem, &rep)?;
    for a in rep.failed().into_iter().filter(|_| !quiet) {
        eprintln!("assertion failed: {} ({} {} {})", a.name, a.lhs, a.relation, a.rhs);
    }
    Ok(rep.passed())
}

/// Runs the CLI on `argv` and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_command(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_command(cmd: &Command) -> Result<bool> {
    let start = Instant::now();
    let (name, args) = cmd.parts();
    let mut cfg = RunConfig {
        subcommand: name.into(),
        ..RunConfig::default()
    };
    args.apply(&mut cfg)?;
    cfg.validate()?;
    let hash = cfg.hash();
    let root = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let dir = root.join(name);
    fs::create_dir_all(&dir)?;
    let mut out = Outputs {
        dir: dir.clone(),
        tag: hash[..12].to_string(),
        written: vec![],
    };
    let outcome = with_workers(args.workers, || execute(name, &cfg, &hash, &mut out, args.quiet))?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        config_hash: &hash,
        seed: cfg.seed,
        outputs: out.written.clone(),
        passed: outcome.passed,
        wall_time_s: start.elapsed().as_secs_f64(),
        timings: outcome.timings,
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_manifest(&dir, &out.tag, &manifest)?;
    if !args.quiet {
        println!("{}", dir.display());
    }
    Ok(outcome.passed)
}

fn write_manifest(dir: &Path, tag: &str, m: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(m)?;
    text.push('\n');
    fs::write(dir.join(format!("manifest.{tag}.json")), text)?;
    Ok(())
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(0) => Err(Error::Parameter("--workers must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?
            .install(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_specs_parse() {
        assert_eq!(SetSpec::from_str("cells:0,3").unwrap(), SetSpec::Cells { cells: vec![0, 3] });
        assert_eq!(SetSpec::from_str("nest:0.1,4").unwrap(), SetSpec::Nest { ratio: 0.1, steps: 4 });
        assert!(SetSpec::from_str("interval:0.5").is_err());
        assert!(SetSpec::from_str("blob:1").is_err());
        let e = SetSpec::from_str("interval:0,0.25").unwrap().realize(1, 4).unwrap();
        assert_eq!(e.support().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        let r = SetSpec::from_str("random:5,7").unwrap().realize(2, 3).unwrap();
        assert_eq!(r.count(), 5);
    }

    #[test]
    fn nest_targets_are_geometric() {
        let t = SetSpec::from_str("nest:0.1,4").unwrap().nest_targets(1e-2).unwrap();
        assert_eq!(t.len(), 4);
        assert!((t[3] - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn config_file_and_unknown_keys() {
        let mut cfg = RunConfig::default();
        cfg.apply_file("[grid]\nh = 0.125 # coarse\nK = 4\n\n[dyadic]\nmeasure = bernoulli:0.6\n").unwrap();
        assert_eq!(cfg.h, 0.125);
        assert_eq!(cfg.truncation, 4.0);
        assert_eq!(cfg.measure, "bernoulli:0.6");
        assert!(cfg.apply_file("[grid]\nwidth = 3\n").is_err());
        assert!(cfg.apply_file("h = 3\n").is_err());
    }

    #[test]
    fn hash_tracks_config() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
