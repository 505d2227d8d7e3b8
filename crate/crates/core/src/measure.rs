//! Discrete measures on the finest cells of a dyadic tree.
//!
//! A [`DiscreteMeasure`] keeps the full pyramid of cube masses: level `l`
//! holds `2^{dl}` masses in Morton order, each the sum of its `2^d` children
//! taken in Morton order. Cube masses are therefore additive by construction
//! and every query is a lookup.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};

/// Generator recipe for a test measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeasureSpec {
    Lebesgue,
    /// Product measure; each coordinate split gives `p` to the lower half.
    Bernoulli { p: f64 },
    /// Independent splits uniform in `[1/κ, 1 − 1/κ]` per node and coordinate.
    RandomDoubling { kappa: f64, seed: u64 },
    /// Masses supplied externally (elliptic measure of a boundary partition).
    FromBoundary,
}

impl MeasureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureSpec::Lebesgue => "lebesgue",
            MeasureSpec::Bernoulli { .. } => "bernoulli",
            MeasureSpec::RandomDoubling { .. } => "random-doubling",
            MeasureSpec::FromBoundary => "from-boundary",
        }
    }
}

impl fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureSpec::Lebesgue => write!(f, "lebesgue"),
            MeasureSpec::Bernoulli { p } => write!(f, "bernoulli:{p}"),
            MeasureSpec::RandomDoubling { kappa, seed } => {
                write!(f, "random-doubling:{kappa},{seed}")
            }
            MeasureSpec::FromBoundary => write!(f, "from-boundary"),
        }
    }
}

impl FromStr for MeasureSpec {
    type Err = Error;

    /// `lebesgue`, `bernoulli:P`, `random-doubling:KAPPA,SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .filter(|a| !a.is_empty())
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number '{a}' in measure '{s}'")))
                })
                .collect()
        };
        match kind {
            "lebesgue" => Ok(MeasureSpec::Lebesgue),
            "bernoulli" => match nums()?.as_slice() {
                [p] => Ok(MeasureSpec::Bernoulli { p: *p }),
                _ => Err(Error::Parse(format!("expected bernoulli:P, got '{s}'"))),
            },
            "random-doubling" => match nums()?.as_slice() {
                [kappa, seed] if *seed >= 0.0 && seed.fract() == 0.0 => {
                    Ok(MeasureSpec::RandomDoubling {
                        kappa: *kappa,
                        seed: *seed as u64,
                    })
                }
                _ => Err(Error::Parse(format!(
                    "expected random-doubling:KAPPA,SEED, got '{s}'"
                ))),
            },
            _ => Err(Error::Parse(format!("unknown measure kind '{kind}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    dim: u8,
    depth: u32,
    levels: Vec<Vec<f64>>,
    spec: MeasureSpec,
}

impl DiscreteMeasure {
    /// Wraps finest-cell masses (Morton order).
    pub fn from_masses(dim: u8, depth: u32, masses: Vec<f64>, spec: MeasureSpec) -> Result<Self> {
        check_dims(dim, depth)?;
        let n = 1usize << (dim as u32 * depth);
        if masses.len() != n {
            return Err(Error::Mismatch(format!(
                "expected {n} cell masses, got {}",
                masses.len()
            )));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m >= 0.0))
        {
            return Err(Error::Parameter(format!("cell {i} has invalid mass {m}")));
        }
        let fan = 1usize << dim;
        let mut levels = vec![masses];
        for _ in 0..depth {
            let finer = levels.last().expect("nonempty");
            let coarser = finer.chunks_exact(fan).map(|ch| ch.iter().sum()).collect();
            levels.push(coarser);
        }
        levels.reverse();
        Ok(DiscreteMeasure {
            dim,
            depth,
            levels,
            spec,
        })
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn num_cells(&self) -> usize {
        self.levels[self.depth as usize].len()
    }

    pub fn cells(&self) -> &[f64] {
        &self.levels[self.depth as usize]
    }

    /// Masses of all cubes at `level`, Morton order.
    pub fn level_masses(&self, level: u32) -> &[f64] {
        &self.levels[level as usize]
    }

    pub fn total(&self) -> f64 {
        self.levels[0][0]
    }

    pub fn cube_mass(&self, cube: &DyadicCube) -> Result<f64> {
        self.check_cube(cube)?;
        Ok(self.levels[cube.level() as usize][cube.morton() as usize])
    }

    fn check_cube(&self, cube: &DyadicCube) -> Result<()> {
        if cube.dim() != self.dim {
            return Err(Error::Mismatch(format!(
                "cube dimension {} vs measure dimension {}",
                cube.dim(),
                self.dim
            )));
        }
        if cube.level() > self.depth {
            return Err(Error::Resolution {
                level: cube.level(),
                depth: self.depth,
            });
        }
        Ok(())
    }

    /// The measure `F dμ`.
    pub fn restrict(&self, f: &DataFunction) -> Result<DiscreteMeasure> {
        self.check_function(f)?;
        let masses = self
            .cells()
            .iter()
            .zip(f.values())
            .map(|(m, &v)| if v == 1 { *m } else { 0.0 })
            .collect();
        DiscreteMeasure::from_masses(self.dim, self.depth, masses, MeasureSpec::FromBoundary)
    }

    pub(crate) fn check_function(&self, f: &DataFunction) -> Result<()> {
        if f.dim() != self.dim || f.depth() != self.depth {
            return Err(Error::Mismatch(format!(
                "function on (d={}, L={}) vs measure on (d={}, L={})",
                f.dim(),
                f.depth(),
                self.dim,
                self.depth
            )));
        }
        Ok(())
    }

    /// `(∫_S F dμ) / μ(S)`.
    pub fn average(&self, f: &DataFunction, cube: &DyadicCube) -> Result<f64> {
        self.check_function(f)?;
        let mass = self.cube_mass(cube)?;
        if mass <= 0.0 {
            return Err(Error::ZeroMass(cube.to_string()));
        }
        let r = cube.cell_range(self.depth);
        let num: f64 = self.cells()[r.clone()]
            .iter()
            .zip(&f.values()[r])
            .filter(|(_, &v)| v == 1)
            .map(|(m, _)| m)
            .sum();
        Ok(num / mass)
    }

    /// Largest parent/child mass ratio over the whole tree; `+∞` when a
    /// positive-mass cube has a zero-mass child.
    pub fn doubling_constant(&self) -> f64 {
        let fan = 1usize << self.dim;
        let mut kappa: f64 = 1.0;
        for l in 0..self.depth as usize {
            let (coarse, fine) = (&self.levels[l], &self.levels[l + 1]);
            for (m, &pm) in coarse.iter().enumerate() {
                if pm <= 0.0 {
                    continue;
                }
                for &cm in &fine[m * fan..(m + 1) * fan] {
                    if cm <= 0.0 {
                        return f64::INFINITY;
                    }
                    kappa = kappa.max(pm / cm);
                }
            }
        }
        kappa
    }

    /// Dyadic maximal function: for each finest cell, the largest average of
    /// `g` over the cubes containing it.
    pub fn dyadic_maximal(&self, g: &DataFunction) -> Result<Vec<f64>> {
        let restricted = self.restrict(g)?;
        Ok(self.maximal_of(&restricted))
    }

    /// Maximal function of `ν` relative to `self` where `ν ≤ self` cellwise.
    /// Zero-mass cubes contribute nothing.
    pub(crate) fn maximal_of(&self, nu: &DiscreteMeasure) -> Vec<f64> {
        let fan = 1usize << self.dim;
        let ratio = |l: usize, m: usize| {
            let w = self.levels[l][m];
            if w > 0.0 {
                nu.levels[l][m] / w
            } else {
                0.0
            }
        };
        let mut best = vec![ratio(0, 0)];
        for l in 1..=self.depth as usize {
            let mut next = Vec::with_capacity(best.len() * fan);
            for (pm, &b) in best.iter().enumerate() {
                for c in 0..fan {
                    next.push(b.max(ratio(l, pm * fan + c)));
                }
            }
            best = next;
        }
        best
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cell", "mass"])?;
        for (m, mass) in self.cells().iter().enumerate() {
            let cell = DyadicCube::from_morton(self.dim, self.depth, m as u64);
            w.write_record([cell.to_string(), format!("{mass:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `cell,mass` CSV with cells in ascending Morton order.
    pub fn read_csv<R: Read>(reader: R, spec: MeasureSpec) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "cell" || &headers[1] != "mass" {
            return Err(Error::Parse("expected header 'cell,mass'".into()));
        }
        let mut masses = Vec::new();
        let mut shape: Option<(u8, u32)> = None;
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let cell: DyadicCube = rec[0].parse()?;
            let (dim, depth) = *shape.get_or_insert((cell.dim(), cell.level()));
            if cell.dim() != dim || cell.level() != depth || cell.morton() != k as u64 {
                return Err(Error::Parse(format!(
                    "row {k}: cell {cell} out of order or inconsistent"
                )));
            }
            let mass: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {k}: bad mass '{}'", &rec[1])))?;
            masses.push(mass);
        }
        let (dim, depth) = shape.ok_or_else(|| Error::Parse("empty measure file".into()))?;
        DiscreteMeasure::from_masses(dim, depth, masses, spec)
    }

    pub fn metadata(&self) -> MeasureMetadata {
        let (params, seed) = match &self.spec {
            MeasureSpec::Lebesgue | MeasureSpec::FromBoundary => (vec![], None),
            MeasureSpec::Bernoulli { p } => (vec![*p], None),
            MeasureSpec::RandomDoubling { kappa, seed } => (vec![*kappa], Some(*seed)),
        };
        MeasureMetadata {
            dim: self.dim,
            depth: self.depth,
            kind: self.spec.name().to_string(),
            params,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureMetadata {
    pub dim: u8,
    pub depth: u32,
    pub kind: String,
    pub params: Vec<f64>,
    pub seed: Option<u64>,
}

fn check_dims(dim: u8, depth: u32) -> Result<()> {
    if dim != 1 && dim != 2 {
        return Err(Error::Parameter(format!("dimension {dim} not in {{1, 2}}")));
    }
    if dim as u32 * depth > 40 {
        return Err(Error::DepthExceeded {
            level: depth,
            max_depth: 40 / dim as u32,
        });
    }
    Ok(())
}

pub fn make_measure(spec: &MeasureSpec, dim: u8, depth: u32) -> Result<DiscreteMeasure> {
    check_dims(dim, depth)?;
    let fan = 1usize << dim;
    let masses = match *spec {
        MeasureSpec::Lebesgue => {
            let n = 1usize << (dim as u32 * depth);
            vec![1.0 / n as f64; n]
        }
        MeasureSpec::Bernoulli { p } => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Parameter(format!("bernoulli p = {p} not in (0, 1)")));
            }
            let split: Vec<f64> = (0..fan)
                .map(|c| {
                    (0..dim as usize)
                        .map(|k| if (c >> k) & 1 == 0 { p } else { 1.0 - p })
                        .product()
                })
                .collect();
            refine(depth, fan, |_, out: &mut [f64]| out.copy_from_slice(&split))
        }
        MeasureSpec::RandomDoubling { kappa, seed } => {
            if !(kappa > 1.0) || !kappa.is_finite() {
                return Err(Error::Parameter(format!("kappa target {kappa} must exceed 1")));
            }
            if kappa < 2.0 {
                return Err(Error::Parameter(format!(
                    "kappa target {kappa} < 2 is infeasible: some child always carries at most half the mass"
                )));
            }
            let (lo, hi) = (1.0 / kappa, 1.0 - 1.0 / kappa);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            refine(depth, fan, |_, out: &mut [f64]| {
                let s1: f64 = rng.gen_range(lo..=hi);
                if dim == 1 {
                    out[0] = s1;
                    out[1] = 1.0 - s1;
                } else {
                    let s2a: f64 = rng.gen_range(lo..=hi);
                    let s2b: f64 = rng.gen_range(lo..=hi);
                    out[0] = s1 * s2a;
                    out[1] = (1.0 - s1) * s2b;
                    out[2] = s1 * (1.0 - s2a);
                    out[3] = (1.0 - s1) * (1.0 - s2b);
                }
            })
        }
        MeasureSpec::FromBoundary => {
            return Err(Error::Parameter(
                "from-boundary measures are built with DiscreteMeasure::from_masses".into(),
            ))
        }
    };
    DiscreteMeasure::from_masses(dim, depth, masses, spec.clone())
}

/// Top-down multiplicative cascade: `split` fills the child fractions of each
/// node, visited level by level in Morton order.
fn refine(depth: u32, fan: usize, mut split: impl FnMut(usize, &mut [f64])) -> Vec<f64> {
    let mut masses = vec![1.0];
    let mut frac = vec![0.0; fan];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(masses.len() * fan);
        for (m, &mass) in masses.iter().enumerate() {
            split(m, &mut frac);
            next.extend(frac.iter().map(|f| mass * f));
        }
        masses = next;
    }
    masses
}

/// A `{0,1}`-valued function on the finest cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataFunction {
    dim: u8,
    depth: u32,
    values: Vec<u8>,
}

impl DataFunction {
    pub fn zeros(dim: u8, depth: u32) -> Self {
        DataFunction {
            dim,
            depth,
            values: vec![0; 1 << (dim as u32 * depth)],
        }
    }

    pub fn ones(dim: u8, depth: u32) -> Self {
        DataFunction {
            dim,
            depth,
            values: vec![1; 1 << (dim as u32 * depth)],
        }
    }

    pub fn from_values(dim: u8, depth: u32, values: Vec<u8>) -> Result<Self> {
        check_dims(dim, depth)?;
        if values.len() != 1 << (dim as u32 * depth) {
            return Err(Error::Mismatch(format!(
                "expected {} values, got {}",
                1usize << (dim as u32 * depth),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::Parameter(format!("data value {v} not in {{0, 1}}")));
        }
        Ok(DataFunction { dim, depth, values })
    }

    /// Indicator of a set of cells given by Morton number.
    pub fn indicator(dim: u8, depth: u32, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut f = DataFunction::zeros(dim, depth);
        for c in cells {
            if c >= f.values.len() {
                return Err(Error::Parameter(format!("cell {c} out of range")));
            }
            f.values[c] = 1;
        }
        Ok(f)
    }

    /// Indicator of a dyadic cube.
    pub fn cube_indicator(cube: &DyadicCube, depth: u32) -> Self {
        let mut f = DataFunction::zeros(cube.dim(), depth);
        for v in &mut f.values[cube.cell_range(depth)] {
            *v = 1;
        }
        f
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, cell: usize) -> bool {
        self.values[cell] == 1
    }

    pub fn set(&mut self, cell: usize, on: bool) {
        self.values[cell] = on as u8;
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i)
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    /// Lebesgue measure of the support in the unit cube.
    pub fn lebesgue(&self) -> f64 {
        self.count() as f64 / self.values.len() as f64
    }

    /// Exported in the measure CSV format with masses in `{0, 1}`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cell", "value"])?;
        for (m, v) in self.values.iter().enumerate() {
            let cell = DyadicCube::from_morton(self.dim, self.depth, m as u64);
            w.write_record([cell.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(dim: u8, level: u32, index: &[u32]) -> DyadicCube {
        DyadicCube::new(dim, level, index).unwrap()
    }

    // Oracle: mass of a d=1 cube under bernoulli(p) is the product over the
    // address bits, p for a 0 bit and 1-p for a 1 bit.
    fn bernoulli_oracle(p: f64, cube: &DyadicCube) -> f64 {
        let i = cube.index()[0];
        (0..cube.level())
            .map(|b| if (i >> b) & 1 == 0 { p } else { 1.0 - p })
            .product()
    }

    #[test]
    fn cube_mass_examples() {
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 6).unwrap();
        assert_abs_diff_eq!(leb.cube_mass(&c(1, 1, &[0])).unwrap(), 0.5, epsilon = 1e-15);
        let b = make_measure(&MeasureSpec::Bernoulli { p: 0.6 }, 1, 6).unwrap();
        assert_abs_diff_eq!(b.cube_mass(&c(1, 1, &[0])).unwrap(), 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(b.cube_mass(&c(1, 2, &[0])).unwrap(), 0.36, epsilon = 1e-14);
        for level in 0..=6 {
            for i in 0..(1u32 << level) {
                let q = c(1, level, &[i]);
                assert_abs_diff_eq!(
                    b.cube_mass(&q).unwrap(),
                    bernoulli_oracle(0.6, &q),
                    epsilon = 1e-14
                );
            }
        }
        assert!(matches!(
            b.cube_mass(&c(1, 7, &[0])),
            Err(Error::Resolution { level: 7, depth: 6 })
        ));
        assert_abs_diff_eq!(b.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn average_examples() {
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 4).unwrap();
        let ones = DataFunction::ones(1, 4);
        assert_eq!(leb.average(&ones, &c(1, 2, &[1])).unwrap(), 1.0);
        let left = DataFunction::cube_indicator(&c(1, 1, &[0]), 4);
        assert_abs_diff_eq!(leb.average(&left, &DyadicCube::root(1)).unwrap(), 0.5);
        let b = make_measure(&MeasureSpec::Bernoulli { p: 0.6 }, 1, 4).unwrap();
        // direct summation over the left half
        let direct: f64 = b.cells()[..8].iter().sum::<f64>() / b.cells().iter().sum::<f64>();
        assert_abs_diff_eq!(direct, 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(
            b.average(&left, &DyadicCube::root(1)).unwrap(),
            direct,
            epsilon = 1e-14
        );
    }

    #[test]
    fn average_zero_mass_errors() {
        let mut masses = vec![0.25; 4];
        masses[0] = 0.0;
        let mu = DiscreteMeasure::from_masses(1, 2, masses, MeasureSpec::FromBoundary).unwrap();
        let f = DataFunction::ones(1, 2);
        assert!(matches!(
            mu.average(&f, &c(1, 2, &[0])),
            Err(Error::ZeroMass(_))
        ));
    }

    #[test]
    fn doubling_constant_examples() {
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 8).unwrap();
        assert_abs_diff_eq!(leb.doubling_constant(), 2.0, epsilon = 1e-12);
        let b = make_measure(&MeasureSpec::Bernoulli { p: 0.6 }, 1, 8).unwrap();
        // exhaustive scan oracle
        let mut worst: f64 = 0.0;
        for level in 0..8 {
            for i in 0..(1u32 << level) {
                let q = c(1, level, &[i]);
                let m = bernoulli_oracle(0.6, &q);
                for ch in q.children(8).unwrap() {
                    worst = worst.max(m / bernoulli_oracle(0.6, &ch));
                }
            }
        }
        assert_abs_diff_eq!(worst, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(b.doubling_constant(), worst, epsilon = 1e-9);
        let mut masses = vec![0.125; 8];
        masses[3] = 0.0;
        let mu = DiscreteMeasure::from_masses(1, 3, masses, MeasureSpec::FromBoundary).unwrap();
        assert_eq!(mu.doubling_constant(), f64::INFINITY);
    }

    #[test]
    fn maximal_examples() {
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 2).unwrap();
        let ones = DataFunction::ones(1, 2);
        assert!(leb.dyadic_maximal(&ones).unwrap().iter().all(|&v| v == 1.0));
        let g = DataFunction::indicator(1, 2, [0]).unwrap();
        let m = leb.dyadic_maximal(&g).unwrap();
        // ancestors of cell 3: (2,[3]) -> 0, (1,[1]) -> 0, root -> 1/4
        assert_abs_diff_eq!(m[3], 0.25);
        assert_abs_diff_eq!(m[0], 1.0);
        assert_abs_diff_eq!(m[1], 0.5);
    }

    #[test]
    fn make_measure_examples() {
        let leb = make_measure(&MeasureSpec::Lebesgue, 1, 3).unwrap();
        assert!(leb.cells().iter().all(|&m| m == 0.125));
        let b = make_measure(&MeasureSpec::Bernoulli { p: 0.6 }, 1, 2).unwrap();
        for (got, want) in b.cells().iter().zip([0.36, 0.24, 0.24, 0.16]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let spec = MeasureSpec::RandomDoubling { kappa: 4.0, seed: 7 };
        assert_eq!(make_measure(&spec, 2, 5).unwrap(), make_measure(&spec, 2, 5).unwrap());
        assert!(make_measure(&MeasureSpec::Bernoulli { p: 1.0 }, 1, 2).is_err());
        assert!(make_measure(&MeasureSpec::RandomDoubling { kappa: 1.0, seed: 0 }, 1, 2).is_err());
    }

    #[test]
    fn random_doubling_respects_target() {
        for dim in [1u8, 2] {
            let mu = make_measure(&MeasureSpec::RandomDoubling { kappa: 4.0, seed: 3 }, dim, 6)
                .unwrap();
            let kappa = mu.doubling_constant();
            let bound = if dim == 1 { 4.0 } else { 16.0 };
            assert!(kappa <= bound + 1e-9, "kappa {kappa}");
            assert_abs_diff_eq!(mu.total(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("lebesgue".parse::<MeasureSpec>().unwrap(), MeasureSpec::Lebesgue);
        assert_eq!(
            "bernoulli:0.6".parse::<MeasureSpec>().unwrap(),
            MeasureSpec::Bernoulli { p: 0.6 }
        );
        assert_eq!(
            "random-doubling:4,11".parse::<MeasureSpec>().unwrap(),
            MeasureSpec::RandomDoubling { kappa: 4.0, seed: 11 }
        );
        assert!("bernoulli".parse::<MeasureSpec>().is_err());
        assert!("cantor:3".parse::<MeasureSpec>().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mu = make_measure(&MeasureSpec::RandomDoubling { kappa: 3.0, seed: 1 }, 2, 3).unwrap();
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("cell,mass\n\"3:0,0\","));
        let back = DiscreteMeasure::read_csv(&buf[..], mu.spec().clone()).unwrap();
        assert_eq!(back, mu);
    }
}
