//! The oscillating datum built from a good cover and its martingale
//! square-sum certificate.
//!
//! `F = Σ_{j=2}^{k} χ(Ũ_{j−1} \ U_j)` where `Ũ_l` is the union of the tilde
//! halves of the level-`l` cubes. Along the chain of a point of `E`, each
//! level `l < k` contributes a jump `|⨍_S F − ⨍_T F|` between the cover cube
//! `S ∋ x` and its child `T ∋ x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{GoodCover, ACCUMULATION_TOL};
use crate::dyadic::{chain_to_cell, DyadicCube};
use crate::error::{Error, Result};
use crate::measure::{DataFunction, DiscreteMeasure};

/// Membership of a finest cell in the tilde half of the level-`l` cube
/// containing it.
fn in_tilde(cover: &GoodCover, l: usize, cell: usize) -> bool {
    match cover.cube_containing(l, cell) {
        Some(s) if s.level() < cover.depth => {
            let c = DyadicCube::from_morton(cover.dim, cover.depth, cell as u64);
            c.ancestor_at(s.level() + 1)
                .map(|child| child.index()[0] % 2 == 0)
                .unwrap_or(false)
        }
        _ => false,
    }
}

/// The summands `χ(Ũ_{j−1} \ U_j)` for `j = 2..=k`, in order.
pub fn oscillation_terms(cover: &GoodCover) -> Vec<DataFunction> {
    let n = 1usize << (cover.dim as u32 * cover.depth);
    (2..=cover.k())
        .map(|j| {
            let inner = &cover.level(j).cells;
            let values = (0..n)
                .map(|c| (in_tilde(cover, j - 1, c) && !inner.get(c)) as u8)
                .collect();
            DataFunction::from_values(cover.dim, cover.depth, values).expect("0/1 values")
        })
        .collect()
}

pub fn build_oscillating_data(cover: &GoodCover) -> DataFunction {
    let n = 1usize << (cover.dim as u32 * cover.depth);
    let mut counts = vec![0u8; n];
    for term in oscillation_terms(cover) {
        for c in term.support() {
            counts[c] += 1;
        }
    }
    debug_assert!(counts.iter().all(|&v| v <= 1), "summands overlap");
    let values = counts.into_iter().map(|v| v.min(1)).collect();
    DataFunction::from_values(cover.dim, cover.depth, values).expect("0/1 values")
}

/// Cube averages of `F dμ / dμ` backed by two mass pyramids.
struct Averages<'a> {
    mu: &'a DiscreteMeasure,
    nu: DiscreteMeasure,
}

impl<'a> Averages<'a> {
    fn new(mu: &'a DiscreteMeasure, f: &DataFunction) -> Result<Self> {
        Ok(Averages {
            mu,
            nu: mu.restrict(f)?,
        })
    }

    fn get(&self, q: &DyadicCube) -> Result<f64> {
        let w = self.mu.cube_mass(q)?;
        if w <= 0.0 {
            return Err(Error::DegenerateMeasure(format!("cube {q} has zero mass")));
        }
        Ok(self.nu.cube_mass(q)? / w)
    }

    fn square_sum(&self, cell: &DyadicCube, top: &DyadicCube) -> Result<f64> {
        let chain = chain_to_cell(cell, top)?;
        let mut sum = 0.0;
        for (q, child) in chain.pairs() {
            let d = self.get(q)? - self.get(child)?;
            sum += d * d;
        }
        Ok(sum)
    }
}

/// `Σ |⨍_Q F dμ − ⨍_{Q'} F dμ|²` over consecutive pairs of the chain from
/// `top` down to the finest cell `cell`.
pub fn martingale_square_sum(
    mu: &DiscreteMeasure,
    f: &DataFunction,
    cell: usize,
    top: &DyadicCube,
) -> Result<f64> {
    let x = DyadicCube::from_morton(mu.dim(), mu.depth(), cell as u64);
    Averages::new(mu, f)?.square_sum(&x, top)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSum {
    pub cell: DyadicCube,
    pub sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationCertificate {
    /// The certified lower bound `(k − 1)·β₀²`.
    #[serde(rename = "M")]
    pub m: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub epsilon0: f64,
    pub k: usize,
    /// `(κ + 1)·ε₀/(1 − ε₀) < β₀`.
    pub feasible: bool,
    pub all_jumps_meet_beta0: bool,
    /// Smallest per-level jump over `E` and all levels `1..k`.
    pub jump_floor: f64,
    /// Smallest jump at each level `l = 1..k−1`.
    pub level_jump_floor: Vec<f64>,
    pub min_square_sum: f64,
    /// Whether `min_square_sum ≥ M` (asserted when every jump meets `β₀`).
    pub bound_holds: bool,
    pub cells: Vec<CellSum>,
}

/// `β₀ = min{α₀/2, 1 − 2α₀}` with `α₀ = 1/κ`.
pub fn beta0(kappa: f64) -> f64 {
    let alpha0 = 1.0 / kappa;
    (alpha0 / 2.0).min(1.0 - 2.0 * alpha0)
}

pub fn certify(
    mu: &DiscreteMeasure,
    cover: &GoodCover,
    f: &DataFunction,
    set: &DataFunction,
) -> Result<OscillationCertificate> {
    mu.check_function(f)?;
    mu.check_function(set)?;
    let k = cover.k();
    let kappa = cover.kappa;
    let alpha0 = 1.0 / kappa;
    let beta0 = beta0(kappa);
    let eps0 = cover.epsilon0;
    let feasible = (kappa + 1.0) * eps0 / (1.0 - eps0) < beta0;
    let averages = Averages::new(mu, f)?;
    let root = DyadicCube::root(mu.dim());

    let cells: Vec<usize> = set.support().collect();
    let per_cell: Vec<(f64, Vec<f64>)> = cells
        .par_iter()
        .map(|&c| {
            let x = DyadicCube::from_morton(mu.dim(), mu.depth(), c as u64);
            let sum = averages.square_sum(&x, &root)?;
            let mut jumps = Vec::with_capacity(k.saturating_sub(1));
            for l in 1..k {
                let s = cover.cube_containing(l, c).ok_or_else(|| {
                    Error::Mismatch(format!("cell {x} of E is not covered at level {l}"))
                })?;
                let t = x.ancestor_at(s.level() + 1).expect("cover cube above the cell");
                jumps.push((averages.get(&s)? - averages.get(&t)?).abs());
            }
            Ok((sum, jumps))
        })
        .collect::<Result<_>>()?;

    let mut level_jump_floor = vec![f64::INFINITY; k.saturating_sub(1)];
    let mut min_square_sum = f64::INFINITY;
    for (sum, jumps) in &per_cell {
        min_square_sum = min_square_sum.min(*sum);
        for (floor, j) in level_jump_floor.iter_mut().zip(jumps) {
            *floor = floor.min(*j);
        }
    }
    let jump_floor = level_jump_floor.iter().copied().fold(f64::INFINITY, f64::min);
    let all_jumps_meet_beta0 = level_jump_floor.iter().all(|&j| j >= beta0);
    let m = (k.saturating_sub(1)) as f64 * beta0 * beta0;
    let bound_holds = min_square_sum >= m * (1.0 - ACCUMULATION_TOL);
    if all_jumps_meet_beta0 && !bound_holds {
        return Err(Error::CertificateViolation(format!(
            "every jump meets beta0 = {beta0} but min square sum {min_square_sum} < {m}"
        )));
    }
    Ok(OscillationCertificate {
        m,
        alpha0,
        beta0,
        epsilon0: eps0,
        k,
        feasible,
        all_jumps_meet_beta0,
        jump_floor,
        level_jump_floor,
        min_square_sum,
        bound_holds,
        cells: cells
            .iter()
            .zip(&per_cell)
            .map(|(&c, (sum, _))| CellSum {
                cell: DyadicCube::from_morton(mu.dim(), mu.depth(), c as u64),
                sum: *sum,
            })
            .collect(),
    })
}
