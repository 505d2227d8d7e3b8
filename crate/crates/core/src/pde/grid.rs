//! Uniform cell-centered grids on truncated half-plane rectangles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FIT_TOL: f64 = 1e-9;

/// `[x_lo, x_hi] × [0, t_top]` split into `nx × nt` square cells of side `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_top: f64,
    pub h: f64,
    pub nx: usize,
    pub nt: usize,
}

fn fit(len: f64, h: f64, what: &str) -> Result<usize> {
    let n = len / h;
    let r = n.round();
    if r < 1.0 || (n - r).abs() > FIT_TOL * n.max(1.0) {
        return Err(Error::Geometry(format!("{what} {len} is not a positive multiple of h = {h}")));
    }
    Ok(r as usize)
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, t_top: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Geometry(format!("spacing {h} must be positive")));
        }
        let nx = fit(x_hi - x_lo, h, "width")?;
        let nt = fit(t_top, h, "height")?;
        Ok(Grid { x_lo, x_hi, t_top, h, nx, nt })
    }

    /// `[x_Q − Kℓ, x_Q + Kℓ] × [0, Kℓ]`.
    pub fn truncated(x_q: f64, ell: f64, k: f64, h: f64) -> Result<Self> {
        if !(ell > 0.0 && k > 0.0) {
            return Err(Error::Geometry("side length and truncation factor must be positive".into()));
        }
        Self::new(x_q - k * ell, x_q + k * ell, k * ell, h)
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.h
    }

    pub fn t_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    pub fn x_face(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h
    }

    pub fn t_face(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// The grid with spacing `2h`, when both counts are even.
    pub fn coarsen(&self) -> Option<Grid> {
        if !self.nx.is_multiple_of(2) || !self.nt.is_multiple_of(2) || self.nx < 4 || self.nt < 4 {
            return None;
        }
        Some(Grid {
            h: 2.0 * self.h,
            nx: self.nx / 2,
            nt: self.nt / 2,
            ..self.clone()
        })
    }

    /// Whether `(x, t)` lies strictly inside the rectangle.
    pub fn contains(&self, x: f64, t: f64) -> bool {
        x > self.x_lo && x < self.x_hi && t > 0.0 && t < self.t_top
    }

    /// Bilinear interpolation weights among the four cell centers around
    /// `(x, t)`.
    pub fn interpolation(&self, x: f64, t: f64) -> Result<[(usize, f64); 4]> {
        let locate = |s: f64, n: usize, what: &str| -> Result<(usize, f64)> {
            let lo = 0.5;
            let hi = n as f64 - 0.5;
            if n < 2 || !(s >= lo - FIT_TOL && s <= hi + FIT_TOL) {
                return Err(Error::Geometry(format!(
                    "{what} coordinate lies outside the cell-center hull"
                )));
            }
            let f = (s - 0.5).clamp(0.0, (n - 1) as f64);
            let i = (f.floor() as usize).min(n - 2);
            Ok((i, f - i as f64))
        };
        let (i, fx) = locate((x - self.x_lo) / self.h, self.nx, "x")?;
        let (j, ft) = locate(t / self.h, self.nt, "t")?;
        Ok([
            (self.index(i, j), (1.0 - fx) * (1.0 - ft)),
            (self.index(i + 1, j), fx * (1.0 - ft)),
            (self.index(i, j + 1), (1.0 - fx) * ft),
            (self.index(i + 1, j + 1), fx * ft),
        ])
    }

    /// Index of the bottom face containing `x`, if any.
    pub fn bottom_face(&self, x: f64) -> Option<usize> {
        let s = (x - self.x_lo) / self.h;
        if s < 0.0 || s >= self.nx as f64 {
            return None;
        }
        Some(s.floor() as usize)
    }

    /// Bottom-face index range covering `[a, b]`, which must align with faces.
    pub fn face_range(&self, a: f64, b: f64) -> Result<std::ops::Range<usize>> {
        let s = (a - self.x_lo) / self.h;
        let e = (b - self.x_lo) / self.h;
        let (sr, er) = (s.round(), e.round());
        if (s - sr).abs() > FIT_TOL * s.abs().max(1.0)
            || (e - er).abs() > FIT_TOL * e.abs().max(1.0)
            || sr < 0.0
            || er > self.nx as f64
            || er <= sr
        {
            return Err(Error::Geometry(format!(
                "interval [{a}, {b}] does not align with the bottom faces"
            )));
        }
        Ok(sr as usize..er as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_counts() {
        let g = Grid::truncated(0.0, 1.0, 8.0, 1.0 / 256.0).unwrap();
        assert_eq!((g.nx, g.nt), (4096, 2048));
        assert!(Grid::new(0.0, 1.0, 1.0, 0.3).is_err());
        assert!(Grid::new(0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn interpolation_at_face_crossing() {
        let g = Grid::truncated(0.0, 1.0, 2.0, 0.25).unwrap();
        let w = g.interpolation(0.0, 1.0).unwrap();
        for (_, wt) in w {
            assert!((wt - 0.25).abs() < 1e-15);
        }
        assert!(g.interpolation(0.0, 0.05).is_err());
        assert!(g.interpolation(5.0, 1.0).is_err());
    }

    #[test]
    fn face_alignment() {
        let g = Grid::truncated(0.0, 1.0, 2.0, 0.25).unwrap();
        assert_eq!(g.face_range(-0.5, 0.5).unwrap(), 6..10);
        assert!(g.face_range(-0.4, 0.5).is_err());
        assert_eq!(g.coarsen().unwrap().nx, 8);
    }
}
