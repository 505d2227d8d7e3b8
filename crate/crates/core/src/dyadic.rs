//! Dyadic cubes in the unit cube `[0,1]^d`, `d ∈ {1, 2}`.
//!
//! Cells of a tree of depth `L` are linearised in Morton (Z) order with the
//! first coordinate in the lowest bit. Every dyadic cube then covers a
//! contiguous range of finest cells, and the children of the cube with Morton
//! number `m` are `2^d·m + c` for `c = 0..2^d`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// Default truncation depth of the tree: 14 for `d = 1`, 10 for `d = 2`.
pub fn default_max_depth(dim: u8) -> u32 {
    match dim {
        1 => 14,
        _ => 10,
    }
}

/// A dyadic cube `index · 2^-level + [0, 2^-level]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    dim: u8,
    level: u32,
    index: [u32; MAX_DIM],
}

impl DyadicCube {
    pub fn root(dim: u8) -> Self {
        assert!(dim == 1 || dim == 2, "dimension must be 1 or 2");
        DyadicCube {
            dim,
            level: 0,
            index: [0; MAX_DIM],
        }
    }

    pub fn new(dim: u8, level: u32, index: &[u32]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Parameter(format!("dimension {dim} not in {{1, 2}}")));
        }
        if index.len() != dim as usize {
            return Err(Error::Mismatch(format!(
                "index has {} components, dimension is {dim}",
                index.len()
            )));
        }
        if level > 31 {
            return Err(Error::DepthExceeded {
                level,
                max_depth: 31,
            });
        }
        let mut idx = [0; MAX_DIM];
        for (slot, &i) in idx.iter_mut().zip(index) {
            if u64::from(i) >= 1u64 << level {
                return Err(Error::Parameter(format!(
                    "index component {i} out of range at level {level}"
                )));
            }
            *slot = i;
        }
        Ok(DyadicCube {
            dim,
            level,
            index: idx,
        })
    }

    /// Cube from its Morton number at `level`.
    pub fn from_morton(dim: u8, level: u32, morton: u64) -> Self {
        let mut index = [0u32; MAX_DIM];
        for bit in 0..level {
            for (c, slot) in index.iter_mut().enumerate().take(dim as usize) {
                let b = (morton >> (bit as u64 * dim as u64 + c as u64)) & 1;
                *slot |= (b as u32) << bit;
            }
        }
        DyadicCube { dim, level, index }
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn index(&self) -> &[u32] {
        &self.index[..self.dim as usize]
    }

    pub fn side(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// South-west corner.
    pub fn corner(&self) -> Vec<f64> {
        let s = self.side();
        self.index().iter().map(|&i| i as f64 * s).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.index()
            .iter()
            .map(|&i| (i as f64 + 0.5) * s)
            .collect()
    }

    pub fn morton(&self) -> u64 {
        let mut m = 0u64;
        for bit in 0..self.level {
            for c in 0..self.dim as usize {
                let b = ((self.index[c] >> bit) & 1) as u64;
                m |= b << (bit as u64 * self.dim as u64 + c as u64);
            }
        }
        m
    }

    pub fn num_children(&self) -> usize {
        1 << self.dim
    }

    /// The `2^d` children in Morton order (first coordinate fastest).
    pub fn children(&self, max_depth: u32) -> Result<Vec<DyadicCube>> {
        if self.level + 1 > max_depth {
            return Err(Error::DepthExceeded {
                level: self.level + 1,
                max_depth,
            });
        }
        Ok(self.children_unchecked())
    }

    pub(crate) fn children_unchecked(&self) -> Vec<DyadicCube> {
        (0..self.num_children())
            .map(|c| self.child(c))
            .collect()
    }

    fn child(&self, c: usize) -> DyadicCube {
        let mut index = [0; MAX_DIM];
        for (k, slot) in index.iter_mut().enumerate().take(self.dim as usize) {
            *slot = 2 * self.index[k] + ((c >> k) & 1) as u32;
        }
        DyadicCube {
            dim: self.dim,
            level: self.level + 1,
            index,
        }
    }

    pub fn parent(&self) -> Result<DyadicCube> {
        if self.level == 0 {
            return Err(Error::NoParent);
        }
        let mut index = self.index;
        for i in index.iter_mut() {
            *i /= 2;
        }
        Ok(DyadicCube {
            dim: self.dim,
            level: self.level - 1,
            index,
        })
    }

    /// The ancestor at `level` (the cube itself when `level == self.level`).
    pub fn ancestor_at(&self, level: u32) -> Option<DyadicCube> {
        if level > self.level {
            return None;
        }
        let shift = self.level - level;
        let mut index = self.index;
        for i in index.iter_mut() {
            *i >>= shift;
        }
        Some(DyadicCube {
            dim: self.dim,
            level,
            index,
        })
    }

    /// Closed containment: `other ⊆ self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        self.dim == other.dim && other.ancestor_at(self.level).as_ref() == Some(self)
    }

    /// Children with even first index coordinate: the lower half in coordinate 1.
    pub fn tilde_selection(&self) -> Vec<DyadicCube> {
        (0..self.num_children())
            .filter(|c| c & 1 == 0)
            .map(|c| self.child(c))
            .collect()
    }

    /// Whether this cube is one of the tilde children of its parent.
    pub fn is_tilde_child(&self) -> bool {
        self.level > 0 && self.index[0].is_multiple_of(2)
    }

    /// Range of finest-cell Morton numbers covered at `depth`.
    pub fn cell_range(&self, depth: u32) -> Range<usize> {
        debug_assert!(depth >= self.level);
        let shift = (depth - self.level) as u64 * self.dim as u64;
        let m = self.morton() as usize;
        (m << shift)..((m + 1) << shift)
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.level)?;
        for (k, i) in self.index().iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

impl FromStr for DyadicCube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (level, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("cube address '{s}' lacks ':'")))?;
        let level: u32 = level
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad level in '{s}'")))?;
        let index = rest
            .split(',')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse(format!("bad index in '{s}'")))?;
        DyadicCube::new(index.len() as u8, level, &index)
    }
}

impl Serialize for DyadicCube {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DyadicCube {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ancestor chain from a top cube down to a cell, inclusive at both ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicChain {
    cubes: Vec<DyadicCube>,
}

impl DyadicChain {
    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// Consecutive (parent, child) pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (&DyadicCube, &DyadicCube)> {
        self.cubes.windows(2).map(|w| (&w[0], &w[1]))
    }
}

pub fn chain_to_cell(cell: &DyadicCube, top: &DyadicCube) -> Result<DyadicChain> {
    if !top.contains(cell) {
        return Err(Error::NotAncestor {
            cell: cell.to_string(),
            top: top.to_string(),
        });
    }
    let cubes = (top.level..=cell.level)
        .map(|l| cell.ancestor_at(l).expect("level within range"))
        .collect();
    Ok(DyadicChain { cubes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(dim: u8, level: u32, index: &[u32]) -> DyadicCube {
        DyadicCube::new(dim, level, index).unwrap()
    }

    #[test]
    fn children_examples() {
        let root = DyadicCube::root(1);
        assert_eq!(root.children(14).unwrap(), vec![c(1, 1, &[0]), c(1, 1, &[1])]);
        let root2 = DyadicCube::root(2);
        assert_eq!(
            root2.children(10).unwrap(),
            vec![
                c(2, 1, &[0, 0]),
                c(2, 1, &[1, 0]),
                c(2, 1, &[0, 1]),
                c(2, 1, &[1, 1])
            ]
        );
        assert_eq!(
            c(1, 2, &[3]).children(14).unwrap(),
            vec![c(1, 3, &[6]), c(1, 3, &[7])]
        );
    }

    #[test]
    fn children_depth_exceeded() {
        let err = c(1, 3, &[1]).children(3).unwrap_err();
        assert!(matches!(err, Error::DepthExceeded { level: 4, max_depth: 3 }));
    }

    #[test]
    fn parent_examples() {
        assert_eq!(c(1, 3, &[6]).parent().unwrap(), c(1, 2, &[3]));
        assert_eq!(c(1, 1, &[1]).parent().unwrap(), c(1, 0, &[0]));
        assert!(matches!(DyadicCube::root(1).parent(), Err(Error::NoParent)));
    }

    #[test]
    fn tilde_examples() {
        assert_eq!(DyadicCube::root(1).tilde_selection(), vec![c(1, 1, &[0])]);
        assert_eq!(
            DyadicCube::root(2).tilde_selection(),
            vec![c(2, 1, &[0, 0]), c(2, 1, &[0, 1])]
        );
        assert_eq!(c(1, 2, &[3]).tilde_selection(), vec![c(1, 3, &[6])]);
    }

    #[test]
    fn chain_examples() {
        let root = DyadicCube::root(1);
        let chain = chain_to_cell(&c(1, 2, &[0]), &root).unwrap();
        assert_eq!(
            chain.cubes(),
            &[root, c(1, 1, &[0]), c(1, 2, &[0])]
        );
        let cell = c(1, 4, &[5]);
        assert_eq!(chain_to_cell(&cell, &cell).unwrap().len(), 1);
        assert!(matches!(
            chain_to_cell(&c(1, 2, &[3]), &c(1, 1, &[0])),
            Err(Error::NotAncestor { .. })
        ));
    }

    #[test]
    fn geometry() {
        let q = c(2, 2, &[1, 3]);
        assert_eq!(q.side(), 0.25);
        assert_eq!(q.corner(), vec![0.25, 0.75]);
        assert_eq!(q.center(), vec![0.375, 0.875]);
    }

    #[test]
    fn address_round_trip() {
        let q = c(2, 5, &[17, 3]);
        assert_eq!(q.to_string(), "5:17,3");
        assert_eq!("5:17,3".parse::<DyadicCube>().unwrap(), q);
        assert_eq!("3:7".parse::<DyadicCube>().unwrap(), c(1, 3, &[7]));
        assert!("3:8".parse::<DyadicCube>().is_err());
        assert!("x".parse::<DyadicCube>().is_err());
    }

    #[test]
    fn morton_layout_is_contiguous() {
        let depth = 4;
        for dim in [1u8, 2] {
            for level in 0..=depth {
                let n = 1u64 << (dim as u32 * level);
                for m in 0..n {
                    let q = DyadicCube::from_morton(dim, level, m);
                    assert_eq!(q.morton(), m);
                    let r = q.cell_range(depth);
                    for cell in r.clone() {
                        let f = DyadicCube::from_morton(dim, depth, cell as u64);
                        assert!(q.contains(&f));
                    }
                    assert_eq!(r.len(), 1 << (dim as u32 * (depth - level)));
                }
            }
        }
    }
}
