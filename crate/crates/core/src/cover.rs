//! Good ε₀-covers built from dyadic stopping cubes.
//!
//! Starting from `E`, each pass replaces the current set by the union of the
//! maximal dyadic cubes on which its relative mass exceeds `ε₀′`. A set is
//! kept as a cover level only while the unit cube itself does not qualify, so
//! the top level satisfies the smallness condition against the root too.
//! Levels are numbered so that `U_1 ⊇ U_2 ⊇ … ⊇ U_k ⊇ E`.

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::measure::{DataFunction, DiscreteMeasure};

/// Relative slack for comparisons of accumulated sums.
pub const ACCUMULATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct CoverLevel {
    pub l: usize,
    pub cubes: Vec<DyadicCube>,
    pub cells: DataFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GoodCover {
    pub epsilon0: f64,
    pub epsilon0_prime: f64,
    pub kappa: f64,
    pub dim: u8,
    pub depth: u32,
    /// `levels[l - 1]` is `U_l`.
    pub levels: Vec<CoverLevel>,
    pub set: DataFunction,
    pub source: String,
}

impl GoodCover {
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    /// `U_l` for `1 ≤ l ≤ k`.
    pub fn level(&self, l: usize) -> &CoverLevel {
        &self.levels[l - 1]
    }

    /// The cube of level `l` containing a finest cell, if any.
    pub fn cube_containing(&self, l: usize, cell: usize) -> Option<DyadicCube> {
        let level = self.level(l);
        if !level.cells.get(cell) {
            return None;
        }
        let idx = level
            .cubes
            .partition_point(|q| q.cell_range(self.depth).end <= cell);
        level.cubes.get(idx).copied()
    }

    /// `log ω(E) / log ε₀`, the length the iteration should roughly reach.
    pub fn predicted_length(&self, set_mass: f64, total: f64) -> f64 {
        (set_mass / total).ln() / self.epsilon0.ln()
    }

    /// Rebuilds a cover from cube lists, recomputing the cell sets.
    pub fn from_parts(
        epsilon0: f64,
        epsilon0_prime: f64,
        kappa: f64,
        depth: u32,
        set: DataFunction,
        levels: Vec<Vec<DyadicCube>>,
        source: String,
    ) -> Result<Self> {
        let dim = set.dim();
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(i, mut cubes)| {
                cubes.sort_by_key(|q| q.cell_range(depth).start);
                let cells = cells_of(dim, depth, &cubes)?;
                Ok(CoverLevel {
                    l: i + 1,
                    cubes,
                    cells,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GoodCover {
            epsilon0,
            epsilon0_prime,
            kappa,
            dim,
            depth,
            levels,
            set,
            source,
        })
    }

    pub fn to_file(&self) -> CoverFile {
        CoverFile {
            epsilon0: self.epsilon0,
            epsilon0_prime: self.epsilon0_prime,
            k: self.k(),
            kappa: self.kappa,
            dim: self.dim,
            depth: self.depth,
            source: self.source.clone(),
            set: self
                .set
                .support()
                .map(|c| DyadicCube::from_morton(self.dim, self.depth, c as u64))
                .collect(),
            levels: self
                .levels
                .iter()
                .map(|lv| LevelFile {
                    l: lv.l,
                    cubes: lv.cubes.clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: CoverFile) -> Result<Self> {
        if file.levels.len() != file.k {
            return Err(Error::Parse(format!(
                "cover declares k = {} but lists {} levels",
                file.k,
                file.levels.len()
            )));
        }
        let mut set = DataFunction::zeros(file.dim, file.depth);
        for q in &file.set {
            if q.level() != file.depth || q.dim() != file.dim {
                return Err(Error::Parse(format!("set cell {q} is not a finest cell")));
            }
            set.set(q.morton() as usize, true);
        }
        let mut levels = file.levels;
        levels.sort_by_key(|lv| lv.l);
        for (i, lv) in levels.iter().enumerate() {
            if lv.l != i + 1 {
                return Err(Error::Parse(format!("cover levels are not 1..k (found {})", lv.l)));
            }
        }
        GoodCover::from_parts(
            file.epsilon0,
            file.epsilon0_prime,
            file.kappa,
            file.depth,
            set,
            levels.into_iter().map(|lv| lv.cubes).collect(),
            file.source,
        )
    }
}

/// JSON layout of a cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverFile {
    pub epsilon0: f64,
    pub epsilon0_prime: f64,
    pub k: usize,
    pub kappa: f64,
    pub dim: u8,
    pub depth: u32,
    pub source: String,
    pub set: Vec<DyadicCube>,
    pub levels: Vec<LevelFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFile {
    pub l: usize,
    pub cubes: Vec<DyadicCube>,
}

fn cells_of(dim: u8, depth: u32, cubes: &[DyadicCube]) -> Result<DataFunction> {
    let mut cells = DataFunction::zeros(dim, depth);
    for q in cubes {
        if q.dim() != dim || q.level() > depth {
            return Err(Error::Mismatch(format!("cube {q} does not fit the tree")));
        }
        for c in q.cell_range(depth) {
            cells.set(c, true);
        }
    }
    Ok(cells)
}

/// Maximal dyadic cubes `S` with `ν(S)/μ(S) > threshold`, in Morton order.
pub(crate) fn stopping_cubes(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    threshold: f64,
) -> Vec<DyadicCube> {
    let dim = mu.dim();
    let fan = 1u64 << dim;
    let mut out = Vec::new();
    let mut frontier = vec![0u64];
    for level in 0..=mu.depth() {
        let (wm, wn) = (mu.level_masses(level), nu.level_masses(level));
        let mut next = Vec::new();
        for &m in &frontier {
            let w = wm[m as usize];
            if w > 0.0 && wn[m as usize] / w > threshold {
                out.push(DyadicCube::from_morton(dim, level, m));
            } else if level < mu.depth() && wn[m as usize] > 0.0 {
                next.extend((0..fan).map(|c| m * fan + c));
            }
        }
        frontier = next;
    }
    out.sort_by_key(|q| q.cell_range(mu.depth()).start);
    out
}

pub fn build_good_cover(
    mu: &DiscreteMeasure,
    set: &DataFunction,
    epsilon0_prime: f64,
) -> Result<GoodCover> {
    mu.check_function(set)?;
    if !(epsilon0_prime > 0.0 && epsilon0_prime < 1.0) {
        return Err(Error::Parameter(format!(
            "eps0' = {epsilon0_prime} not in (0, 1)"
        )));
    }
    let kappa = mu.doubling_constant();
    if !kappa.is_finite() {
        return Err(Error::DegenerateMeasure(
            "a positive-mass cube has a zero-mass child".into(),
        ));
    }
    let epsilon0 = kappa * epsilon0_prime;
    if epsilon0 >= 1.0 {
        return Err(Error::Parameter(format!(
            "realized eps0 = kappa * eps0' = {epsilon0} must be < 1 (kappa = {kappa})"
        )));
    }
    let total = mu.total();
    let set_mass = mu.restrict(set)?.total();
    if set_mass <= 0.0 {
        return Err(Error::EmptySet);
    }

    // Each pushed set is kept only while the unit cube itself does not
    // qualify for it, which is the smallness condition against the root.
    let mut sets: Vec<(Vec<DyadicCube>, DataFunction)> = Vec::new();
    let mut current = set.clone();
    loop {
        let nu = mu.restrict(&current)?;
        let root_average = nu.total() / total;
        if root_average > epsilon0_prime {
            sets.pop();
            if sets.is_empty() {
                return Err(Error::SetTooLarge {
                    root_average,
                    threshold: epsilon0_prime,
                });
            }
            break;
        }
        let cubes = stopping_cubes(mu, &nu, epsilon0_prime);
        let cells = cells_of(mu.dim(), mu.depth(), &cubes)?;
        sets.push((cubes, cells.clone()));
        current = cells;
    }
    Ok(assemble(mu, set, epsilon0, epsilon0_prime, kappa, sets))
}

fn assemble(
    mu: &DiscreteMeasure,
    set: &DataFunction,
    epsilon0: f64,
    epsilon0_prime: f64,
    kappa: f64,
    mut sets: Vec<(Vec<DyadicCube>, DataFunction)>,
) -> GoodCover {
    sets.reverse();
    let levels = sets
        .into_iter()
        .enumerate()
        .map(|(i, (cubes, cells))| CoverLevel {
            l: i + 1,
            cubes,
            cells,
        })
        .collect();
    GoodCover {
        epsilon0,
        epsilon0_prime,
        kappa,
        dim: mu.dim(),
        depth: mu.depth(),
        levels,
        set: set.clone(),
        source: format!("{}; |E| = {} cells", mu.spec(), set.count()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed value of the checked ratio (normalised so that the
    /// bound is 1 where a ratio applies).
    pub worst: f64,
    pub failures: usize,
    /// Reported but not part of the definition.
    pub informational: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub gap: usize,
    pub worst_ratio: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub k: usize,
    pub epsilon0: f64,
    pub checks: Vec<CheckResult>,
    /// Worst `ω(S_j^{(m)} ∩ U_l) / ω(S_j^{(m)})` per gap `l − m`.
    pub decay: Vec<DecayRow>,
}

impl CoverReport {
    /// All definition checks pass (informational entries excluded).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.informational)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed && !c.informational)
            .map(|c| c.name.as_str())
            .collect()
    }
}

struct Tally {
    name: &'static str,
    worst: f64,
    failures: usize,
    informational: bool,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            worst: 0.0,
            failures: 0,
            informational: false,
        }
    }

    fn ratio(&mut self, value: f64, bound: f64) {
        let r = if bound > 0.0 { value / bound } else { f64::INFINITY };
        let r = if value <= 0.0 { 0.0 } else { r };
        self.worst = self.worst.max(r);
        if value > bound * (1.0 + ACCUMULATION_TOL) {
            self.failures += 1;
        }
    }

    fn flag(&mut self, ok: bool) {
        if !ok {
            self.failures += 1;
            self.worst = f64::INFINITY;
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            name: self.name.to_string(),
            passed: self.failures == 0,
            worst: self.worst,
            failures: self.failures,
            informational: self.informational,
        }
    }
}

/// Direct sum of finest masses over a cube restricted to a cell set.
fn mass_in(mu: &DiscreteMeasure, cube: &DyadicCube, cells: Option<&DataFunction>) -> f64 {
    let r = cube.cell_range(mu.depth());
    let w = &mu.cells()[r.clone()];
    match cells {
        None => w.iter().sum(),
        Some(f) => w
            .iter()
            .zip(&f.values()[r])
            .filter(|(_, &v)| v == 1)
            .map(|(m, _)| m)
            .sum(),
    }
}

/// Checks nesting, disjointness, smallness, the iterated decay bound and
/// proper containment by direct summation over finest cells.
pub fn verify_cover(mu: &DiscreteMeasure, cover: &GoodCover) -> Result<CoverReport> {
    if mu.dim() != cover.dim || mu.depth() != cover.depth {
        return Err(Error::Mismatch("cover and measure live on different trees".into()));
    }
    let k = cover.k();
    let depth = cover.depth;
    let root = DyadicCube::root(cover.dim);

    let mut nesting = Tally::new("nesting");
    let inner = |l: usize| -> &DataFunction {
        if l > k {
            &cover.set
        } else {
            &cover.level(l).cells
        }
    };
    for l in 1..=k {
        let (outer, inner) = (&cover.level(l).cells, inner(l + 1));
        let ok = inner
            .values()
            .iter()
            .zip(outer.values())
            .all(|(&a, &b)| a <= b);
        nesting.flag(ok);
    }

    let mut consistent = Tally::new("cells-match-cubes");
    let mut disjoint = Tally::new("disjoint");
    for lv in &cover.levels {
        let mut ranges: Vec<_> = lv.cubes.iter().map(|q| q.cell_range(depth)).collect();
        ranges.sort_by_key(|r| r.start);
        disjoint.flag(ranges.windows(2).all(|w| w[0].end <= w[1].start));
        let mut union = vec![0u8; lv.cells.values().len()];
        for r in &ranges {
            for c in r.clone() {
                union[c] = 1;
            }
        }
        consistent.flag(union == lv.cells.values());
    }

    let parents = |l: usize| -> Vec<DyadicCube> {
        if l == 0 {
            vec![root]
        } else {
            cover.level(l).cubes.clone()
        }
    };

    let mut smallness = Tally::new("smallness");
    for l in 1..=k {
        let cells = &cover.level(l).cells;
        for s in parents(l - 1) {
            let ws = mass_in(mu, &s, None);
            smallness.ratio(mass_in(mu, &s, Some(cells)), cover.epsilon0 * ws);
        }
    }

    let mut decay_check = Tally::new("iterated-decay");
    let mut decay = Vec::new();
    for gap in 1..k {
        let bound = cover.epsilon0.powi(gap as i32);
        let mut worst: f64 = 0.0;
        for m in 1..=(k - gap) {
            let l = m + gap;
            let cells = &cover.level(l).cells;
            for s in &cover.level(m).cubes {
                let ws = mass_in(mu, s, None);
                let hit = mass_in(mu, s, Some(cells));
                worst = worst.max(hit / ws);
                decay_check.ratio(hit, bound * ws);
            }
        }
        decay.push(DecayRow {
            gap,
            worst_ratio: worst,
            bound,
        });
    }

    let mut proper = Tally::new("proper-containment");
    for l in 1..=k {
        let outer = parents(l - 1);
        for s in &cover.level(l).cubes {
            let ok = outer.iter().any(|p| p.contains(s) && p.level() < s.level());
            proper.flag(ok);
        }
    }

    let mut maximal = Tally::new("stopping-maximality");
    maximal.informational = true;
    for l in 1..=k {
        let cells = inner(l + 1);
        for s in &cover.level(l).cubes {
            match s.parent() {
                Ok(p) => {
                    let wp = mass_in(mu, &p, None);
                    maximal.ratio(mass_in(mu, &p, Some(cells)), cover.epsilon0_prime * wp);
                }
                Err(_) => maximal.flag(false),
            }
        }
    }

    Ok(CoverReport {
        k,
        epsilon0: cover.epsilon0,
        checks: vec![
            nesting.finish(),
            consistent.finish(),
            disjoint.finish(),
            smallness.finish(),
            decay_check.finish(),
            proper.finish(),
            maximal.finish(),
        ],
        decay,
    })
}

/// Largest `ω(E)` among `family` for which the builder returns `k ≥ 2`.
pub fn empirical_threshold(
    mu: &DiscreteMeasure,
    family: &[DataFunction],
    epsilon0_prime: f64,
) -> Option<f64> {
    family
        .iter()
        .filter_map(|e| {
            let cover = build_good_cover(mu, e, epsilon0_prime).ok()?;
            (cover.k() >= 2).then(|| mu.restrict(e).map(|r| r.total()).ok())?
        })
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.max(m))))
}
