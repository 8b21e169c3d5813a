//! Lattice point sets carried by cellular sets.
//!
//! Every grid lives on the global lattice `h·Z^d`. Cell grids hold the
//! centers `(k + ½)h` of the cells tiling each cube; node grids hold the
//! interior finite-difference nodes `k·h` of each cube. Overlapping cubes
//! share points, so a field sampled on the grid takes one value per point.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CellularSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    /// Cell centers; cells of measure `h^d` tile the set exactly.
    Cells,
    /// Interior nodes of each cube (Dirichlet boundary excluded).
    Nodes,
}

/// Discretization of a cellular set.
#[derive(Debug, Clone)]
pub struct GridSpec {
    set: CellularSet,
    h: f64,
    kind: GridKind,
    keys: Vec<Vec<i64>>,
    coords: Vec<f64>,
    lookup: HashMap<Vec<i64>, usize>,
}

impl GridSpec {
    /// Cell-centered grid whose cells tile every cube of `set`.
    pub fn cells(set: &CellularSet, h: f64) -> Result<Self> {
        Self::build(set, h, GridKind::Cells)
    }

    /// Union of the interior nodes of every cube of `set`.
    pub fn interior_nodes(set: &CellularSet, h: f64) -> Result<Self> {
        Self::build(set, h, GridKind::Nodes)
    }

    fn build(set: &CellularSet, h: f64, kind: GridKind) -> Result<Self> {
        let dim = set.dim();
        let mut keys = BTreeSet::new();
        for cube in &set.cubes {
            let bounds = cube.lattice_bounds(h)?;
            let ranges: Vec<(i64, i64)> = bounds
                .iter()
                .map(|&(lo, hi)| match kind {
                    GridKind::Cells => (lo, hi),
                    GridKind::Nodes => (lo + 1, hi - 1),
                })
                .collect();
            let empty = match kind {
                GridKind::Cells => ranges.iter().any(|(lo, hi)| lo >= hi),
                GridKind::Nodes => ranges.iter().any(|(lo, hi)| lo > hi),
            };
            if empty {
                return Err(Error::NonTilingGrid(format!(
                    "cube of half-side {} has no {} at spacing {h}",
                    cube.half_side,
                    match kind {
                        GridKind::Cells => "cells",
                        GridKind::Nodes => "interior nodes",
                    }
                )));
            }
            for_each_key(&ranges, kind, |k| {
                keys.insert(k.to_vec());
            });
        }
        let offset = match kind {
            GridKind::Cells => 0.5,
            GridKind::Nodes => 0.0,
        };
        let keys: Vec<Vec<i64>> = keys.into_iter().collect();
        let mut coords = Vec::with_capacity(keys.len() * dim);
        for k in &keys {
            coords.extend(k.iter().map(|&ki| (ki as f64 + offset) * h));
        }
        let lookup = keys.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();
        Ok(Self {
            set: set.clone(),
            h,
            kind,
            keys,
            coords,
            lookup,
        })
    }

    pub fn set(&self) -> &CellularSet {
        &self.set
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// `h^d`.
    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }

    pub fn key(&self, i: usize) -> &[i64] {
        &self.keys[i]
    }

    pub fn index_of_key(&self, key: &[i64]) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    /// Index of the grid point at `x`, if `x` is (numerically) a grid point.
    pub fn index_of_point(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let offset = match self.kind {
            GridKind::Cells => 0.5,
            GridKind::Nodes => 0.0,
        };
        let mut key = Vec::with_capacity(x.len());
        for &xi in x {
            let k = xi / self.h - offset;
            let r = k.round();
            if (k - r).abs() > 1e-6 {
                return None;
            }
            key.push(r as i64);
        }
        self.index_of_key(&key)
    }

    /// Indicator of the grid points lying in `a`.
    pub fn mask(&self, a: &CellularSet) -> Vec<bool> {
        let tol = 1e-9 * self.h;
        self.points()
            .map(|x| {
                a.cubes.iter().any(|c| {
                    x.iter()
                        .zip(&c.center)
                        .all(|(xi, ci)| (xi - ci).abs() <= c.half_side + tol)
                })
            })
            .collect()
    }

    /// Grid function equal to one on the points of `a`.
    pub fn indicator(&self, a: &CellularSet) -> Vec<f64> {
        self.mask(a)
            .into_iter()
            .map(|m| if m { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Calls `f` on each integer key of the product of half-open ranges (cells)
/// or closed ranges (nodes).
fn for_each_key(ranges: &[(i64, i64)], kind: GridKind, mut f: impl FnMut(&[i64])) {
    let end = |(_, hi): (i64, i64)| match kind {
        GridKind::Cells => hi,
        GridKind::Nodes => hi + 1,
    };
    let d = ranges.len();
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if ranges.iter().any(|&r| r.0 >= end(r)) {
        return;
    }
    loop {
        f(&k);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            k[axis] += 1;
            if k[axis] < end(ranges[axis]) {
                break;
            }
            k[axis] = ranges[axis].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cube;

    fn interval(lo: f64, hi: f64) -> Cube {
        Cube::new(vec![(lo + hi) / 2.0], (hi - lo) / 2.0).unwrap()
    }

    #[test]
    fn cells_tile_unit_interval() {
        let g = GridSpec::cells(&CellularSet::single(interval(0.0, 1.0)), 0.25).unwrap();
        let xs: Vec<f64> = g.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert_eq!(g.cell_measure(), 0.25);
    }

    #[test]
    fn nodes_exclude_boundary() {
        let g = GridSpec::interior_nodes(&CellularSet::single(interval(0.0, 1.0)), 0.25).unwrap();
        let xs: Vec<f64> = g.points().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
        assert_eq!(g.index_of_point(&[0.5]), Some(1));
        assert_eq!(g.index_of_point(&[0.4]), None);
        assert_eq!(g.index_of_point(&[1.0]), None);
    }

    #[test]
    fn overlapping_cubes_share_points() {
        let set = CellularSet::new(vec![interval(-1.0, 1.0), interval(0.0, 2.0)]).unwrap();
        let cells = GridSpec::cells(&set, 0.5).unwrap();
        assert_eq!(cells.len(), 6);
        assert!((cells.len() as f64 * cells.cell_measure() - set.measure()).abs() < 1e-12);
        let nodes = GridSpec::interior_nodes(&set, 0.5).unwrap();
        // -0.5, 0, 0.5 from the first cube and 0.5, 1, 1.5 from the second.
        assert_eq!(nodes.len(), 5);
    }

    #[test]
    fn two_dimensional_enumeration() {
        let c = Cube::new(vec![0.0, 0.0], 1.0).unwrap();
        let g = GridSpec::cells(&CellularSet::single(c.clone()), 0.5).unwrap();
        assert_eq!(g.len(), 16);
        let n = GridSpec::interior_nodes(&CellularSet::single(c), 0.5).unwrap();
        assert_eq!(n.len(), 9);
        assert_eq!(n.point(4), &[0.0, 0.0]);
    }

    #[test]
    fn non_tiling_spacing_is_rejected() {
        let set = CellularSet::single(interval(0.0, 1.0));
        assert!(matches!(GridSpec::cells(&set, 0.3), Err(Error::NonTilingGrid(_))));
    }

    #[test]
    fn cube_without_interior_nodes_is_rejected() {
        let set = CellularSet::single(interval(0.0, 0.5));
        assert!(GridSpec::interior_nodes(&set, 0.5).is_err());
    }

    #[test]
    fn mask_selects_subset() {
        let set = CellularSet::new(vec![interval(-1.0, 1.0), interval(9.0, 11.0)]).unwrap();
        let g = GridSpec::cells(&set, 0.5).unwrap();
        let m = g.mask(&CellularSet::single(interval(9.0, 11.0)));
        assert_eq!(m.iter().filter(|&&b| b).count(), 4);
    }
}
