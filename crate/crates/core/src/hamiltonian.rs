//! Finite-difference two-particle Hamiltonian
//! `H_Λ = −½(Δ₁ + Δ₂) + U(x₁, x₂) + g·(V(x₁) + V(x₂))` on a box with
//! Dirichlet boundary conditions.
//!
//! Grid points of the box are pairs of interior lattice nodes, one per
//! particle. The Laplacian is the second-order central stencil; Dirichlet
//! conditions come from leaving boundary nodes out. A hard core removes the
//! points with `‖x₁ − x₂‖_max < r₀`, which imposes Dirichlet conditions on
//! the core boundary as well.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{max_dist, CellularSet, Cube, TwoParticleBox};
use crate::grid::{GridKind, GridSpec};
use crate::kernel_field::{sup_field, FieldSample};

/// Radial profile of the interaction on `[r₀, r₁]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase")]
pub enum InteractionProfile {
    /// Constant `amplitude` up to `r₁`.
    Square { amplitude: f64 },
    /// Piecewise-linear interpolation of `values` at `separations`,
    /// clamped to the end values outside the table.
    Table {
        separations: Vec<f64>,
        values: Vec<f64>,
    },
}

/// Interaction `U(x₁, x₂)` depending only on `s = ‖x₁ − x₂‖_max`, zero for
/// `s > r₁`, with an optional hard core `s < r₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPotential {
    #[serde(default)]
    pub r0: Option<f64>,
    pub r1: f64,
    #[serde(flatten)]
    pub profile: InteractionProfile,
}

impl InteractionPotential {
    /// `U ≡ 0`.
    pub fn none() -> Self {
        Self::square(0.0, 1.0)
    }

    pub fn square(amplitude: f64, r1: f64) -> Self {
        Self {
            r0: None,
            r1,
            profile: InteractionProfile::Square { amplitude },
        }
    }

    pub fn with_hard_core(mut self, r0: f64) -> Self {
        self.r0 = Some(r0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1.is_finite()) {
            return Err(invalid("interaction.r1", "must be finite and positive"));
        }
        if let Some(r0) = self.r0 {
            if !(r0 > 0.0 && r0 < self.r1) {
                return Err(invalid("interaction.r0", format!("need 0 < r0 < r1, got r0 = {r0}")));
            }
        }
        match &self.profile {
            InteractionProfile::Square { amplitude } if !amplitude.is_finite() => {
                Err(invalid("interaction.amplitude", "must be finite"))
            }
            InteractionProfile::Table { separations, values } => {
                if separations.is_empty() || separations.len() != values.len() {
                    return Err(invalid(
                        "interaction.table",
                        "separations and values must be nonempty and of equal length",
                    ));
                }
                if separations.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("interaction.separations", "must be strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("interaction.values", "must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_hard_core(&self, s: f64) -> bool {
        self.r0.is_some_and(|r0| s < r0)
    }

    /// Value at separation `s` outside the hard core.
    pub fn at_separation(&self, s: f64) -> f64 {
        if s > self.r1 {
            return 0.0;
        }
        match &self.profile {
            InteractionProfile::Square { amplitude } => *amplitude,
            InteractionProfile::Table { separations, values } => interpolate(separations, values, s),
        }
    }

    /// `U(x₁, x₂)`, or `None` inside the hard core.
    pub fn evaluate(&self, x1: &[f64], x2: &[f64]) -> Result<Option<f64>> {
        let s = max_dist(x1, x2)?;
        if self.is_hard_core(s) {
            return Ok(None);
        }
        Ok(Some(self.at_separation(s)))
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let i = xs.partition_point(|&t| t <= x) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + t * (ys[i + 1] - ys[i])
}

/// `W(x) = U(x) + g·(v(x₁) + v(x₂))`; `+∞` inside the hard core.
pub fn potential_energy(
    interaction: &InteractionPotential,
    grid: &GridSpec,
    v: &FieldSample,
    x1: &[f64],
    x2: &[f64],
    coupling: f64,
) -> Result<f64> {
    let i1 = grid.index_of_point(x1).ok_or_else(|| Error::OffGrid(x1.to_vec()))?;
    let i2 = grid.index_of_point(x2).ok_or_else(|| Error::OffGrid(x2.to_vec()))?;
    Ok(match interaction.evaluate(x1, x2)? {
        None => f64::INFINITY,
        Some(u) => u + coupling * (v.values[i1] + v.values[i2]),
    })
}

/// Options that do not change between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOptions {
    /// Coupling `g` of the external field (default 1).
    pub coupling: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { coupling: 1.0 }
    }
}

/// Interior nodes of one cube in lexicographic order, with their indices
/// into the field grid.
#[derive(Debug, Clone)]
struct ParticleAxis {
    extents: Vec<usize>,
    field_index: Vec<usize>,
    coords: Vec<f64>,
}

impl ParticleAxis {
    fn new(cube: &Cube, grid: &GridSpec) -> Result<Self> {
        let h = grid.spacing();
        let bounds = cube.lattice_bounds(h)?;
        let extents: Vec<usize> = bounds
            .iter()
            .map(|&(lo, hi)| (hi - lo - 1).max(0) as usize)
            .collect();
        if extents.contains(&0) {
            return Err(Error::NonTilingGrid(format!(
                "cube of half-side {} has no interior nodes at spacing {h}",
                cube.half_side
            )));
        }
        let d = cube.dim();
        let total: usize = extents.iter().product();
        let mut field_index = Vec::with_capacity(total);
        let mut coords = Vec::with_capacity(total * d);
        let mut key = vec![0i64; d];
        for lin in 0..total {
            let mut rem = lin;
            for axis in (0..d).rev() {
                key[axis] = bounds[axis].0 + 1 + (rem % extents[axis]) as i64;
                rem /= extents[axis];
            }
            let idx = grid
                .index_of_key(&key)
                .ok_or_else(|| Error::OffGrid(key.iter().map(|&k| k as f64 * h).collect()))?;
            field_index.push(idx);
            coords.extend(key.iter().map(|&k| k as f64 * h));
        }
        Ok(Self {
            extents,
            field_index,
            coords,
        })
    }

    fn len(&self) -> usize {
        self.field_index.len()
    }

    fn dim(&self) -> usize {
        self.extents.len()
    }

    fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    /// Linear-index stride of each axis.
    fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for axis in (0..d.saturating_sub(1)).rev() {
            s[axis] = s[axis + 1] * self.extents[axis + 1];
        }
        s
    }

    /// Neighbors of `i` along each axis that stay inside the cube.
    fn neighbors(&self, i: usize, strides: &[usize], out: &mut Vec<usize>) {
        out.clear();
        for (axis, &stride) in strides.iter().enumerate() {
            let pos = (i / stride) % self.extents[axis];
            if pos > 0 {
                out.push(i - stride);
            }
            if pos + 1 < self.extents[axis] {
                out.push(i + stride);
            }
        }
    }
}

/// Everything needed to reassemble the operator on another box.
#[derive(Debug, Clone)]
struct Source {
    grid: GridSpec,
    field: FieldSample,
    interaction: InteractionPotential,
    options: AssemblyOptions,
}

/// Symmetric sparse operator on the retained grid points of a box.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    bx: TwoParticleBox,
    h: f64,
    /// `(i₁, i₂)` local node indices of each retained point.
    points: Vec<(usize, usize)>,
    /// Per-point potential `W`.
    potential: Vec<f64>,
    /// Per-point interaction `U`.
    interaction_values: Vec<f64>,
    kinetic_diag: f64,
    hop: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    masked: usize,
    source: Source,
}

/// Assembles `H_Λ` from a field sample on `grid`, which must hold the
/// interior nodes of both projection cubes.
pub fn assemble(
    bx: &TwoParticleBox,
    grid: &GridSpec,
    interaction: &InteractionPotential,
    v: &FieldSample,
    options: &AssemblyOptions,
) -> Result<DiscreteHamiltonian> {
    bx.validate()?;
    interaction.validate()?;
    if grid.kind() != GridKind::Nodes {
        return Err(invalid("grid", "the Hamiltonian needs a node grid"));
    }
    if grid.dim() != bx.dim() {
        return Err(Error::DimensionMismatch {
            expected: bx.dim(),
            got: grid.dim(),
        });
    }
    if v.values.len() != grid.len() {
        return Err(invalid(
            "field",
            format!("sample has {} values for {} grid points", v.values.len(), grid.len()),
        ));
    }
    if !options.coupling.is_finite() {
        return Err(invalid("coupling", "must be finite"));
    }

    let h = grid.spacing();
    let p1 = ParticleAxis::new(&bx.cube1(), grid)?;
    let p2 = ParticleAxis::new(&bx.cube2(), grid)?;
    let (n1, n2) = (p1.len(), p2.len());

    let mut id = vec![usize::MAX; n1 * n2];
    let mut points = Vec::new();
    let mut potential = Vec::new();
    let mut interaction_values = Vec::new();
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let Some(u) = interaction.evaluate(p1.point(i1), p2.point(i2))? else {
                continue;
            };
            id[i1 * n2 + i2] = points.len();
            points.push((i1, i2));
            interaction_values.push(u);
            let field = v.values[p1.field_index[i1]] + v.values[p2.field_index[i2]];
            potential.push(u + options.coupling * field);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInterior);
    }

    let s1 = p1.strides();
    let s2 = p2.strides();
    let mut row_ptr = Vec::with_capacity(points.len() + 1);
    let mut cols = Vec::new();
    let mut nb = Vec::new();
    let mut row = Vec::new();
    row_ptr.push(0);
    for &(i1, i2) in &points {
        row.clear();
        p1.neighbors(i1, &s1, &mut nb);
        row.extend(nb.iter().map(|&j1| id[j1 * n2 + i2]).filter(|&k| k != usize::MAX));
        p2.neighbors(i2, &s2, &mut nb);
        row.extend(nb.iter().map(|&j2| id[i1 * n2 + j2]).filter(|&k| k != usize::MAX));
        row.sort_unstable();
        cols.extend_from_slice(&row);
        row_ptr.push(cols.len());
    }

    let coords = 2 * bx.dim();
    Ok(DiscreteHamiltonian {
        bx: bx.clone(),
        h,
        masked: n1 * n2 - points.len(),
        points,
        potential,
        interaction_values,
        kinetic_diag: coords as f64 / (h * h),
        hop: -0.5 / (h * h),
        row_ptr,
        cols,
        source: Source {
            grid: grid.clone(),
            field: v.clone(),
            interaction: interaction.clone(),
            options: options.clone(),
        },
    })
}

/// Hamiltonian on `S(Λ) = cube2 × cube1` with the same field and interaction.
pub fn swap_operator(hd: &DiscreteHamiltonian) -> Result<DiscreteHamiltonian> {
    let s = &hd.source;
    assemble(&hd.bx.swapped(), &s.grid, &s.interaction, &s.field, &s.options)
}

/// `W̄_Λ` together with the terms of `W̄ ≤ Ū + V̄₁ + V̄₂ ≤ Ū + 2V̄_{ΠΛ}`
/// (field terms scaled by `|g|`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupReport {
    pub w_bar: f64,
    pub u_bar: f64,
    pub v_bar_first: f64,
    pub v_bar_second: f64,
    pub v_bar_shadow: f64,
    pub chain_holds: bool,
}

pub fn sup_potential(hd: &DiscreteHamiltonian) -> SupReport {
    let w_bar = hd.potential.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let u_bar = hd.interaction_values.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    let s = &hd.source;
    let v1 = sup_field(&s.grid, &s.field, &CellularSet::single(hd.bx.cube1()));
    let v2 = sup_field(&s.grid, &s.field, &CellularSet::single(hd.bx.cube2()));
    let vs = v1.max(v2);
    let g = s.options.coupling.abs();
    let slack = 1e-12 * (1.0 + u_bar + g * (v1 + v2));
    let chain_holds = w_bar <= u_bar + g * (v1 + v2) + slack && u_bar + g * (v1 + v2) <= u_bar + 2.0 * g * vs + slack;
    SupReport {
        w_bar,
        u_bar,
        v_bar_first: v1,
        v_bar_second: v2,
        v_bar_shadow: vs,
        chain_holds,
    }
}

impl DiscreteHamiltonian {
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn box_(&self) -> &TwoParticleBox {
        &self.bx
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Grid points removed by the hard core.
    pub fn masked_count(&self) -> usize {
        self.masked
    }

    /// Points before masking.
    pub fn full_count(&self) -> usize {
        self.points.len() + self.masked
    }

    pub fn potential_diag(&self) -> &[f64] {
        &self.potential
    }

    pub fn nnz(&self) -> usize {
        self.points.len() + self.cols.len()
    }

    /// Local node indices `(i₁, i₂)` of retained point `p`.
    pub fn point_indices(&self, p: usize) -> (usize, usize) {
        self.points[p]
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for p in 0..self.dim() {
            let mut acc = (self.kinetic_diag + self.potential[p]) * x[p];
            for &q in &self.cols[self.row_ptr[p]..self.row_ptr[p + 1]] {
                acc += self.hop * x[q];
            }
            y[p] = acc;
        }
    }

    /// Upper bound on `‖H‖₂` from Gershgorin discs.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|p| {
                let off = (self.row_ptr[p + 1] - self.row_ptr[p]) as f64 * self.hop.abs();
                (self.kinetic_diag + self.potential[p]).abs() + off
            })
            .fold(0.0, f64::max)
    }

    fn fill_dense(&self, with_potential: bool) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for p in 0..n {
            m[(p, p)] = self.kinetic_diag + if with_potential { self.potential[p] } else { 0.0 };
            for &q in &self.cols[self.row_ptr[p]..self.row_ptr[p + 1]] {
                m[(p, q)] = self.hop;
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.fill_dense(true)
    }

    /// Kinetic part `−½(Δ₁ + Δ₂)` on the retained points.
    pub fn kinetic_dense(&self) -> DMatrix<f64> {
        self.fill_dense(false)
    }

    /// Field sample the operator was assembled from.
    pub fn field(&self) -> &FieldSample {
        &self.source.field
    }

    /// Node grid carrying the field.
    pub fn field_grid(&self) -> &GridSpec {
        &self.source.grid
    }

    pub fn coupling(&self) -> f64 {
        self.source.options.coupling
    }

    /// Reassembles the operator on the same box and grid with another field.
    pub fn with_field(&self, v: &FieldSample) -> Result<Self> {
        let s = &self.source;
        assemble(&self.bx, &s.grid, &s.interaction, v, &s.options)
    }

    /// Same operator with the potential replaced.
    pub fn with_potential(&self, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != self.dim() {
            return Err(invalid("potential", "length must match the operator dimension"));
        }
        let mut out = self.clone();
        out.potential = potential;
        Ok(out)
    }

    /// Operator with the kinetic part removed (diagonal potential only).
    pub fn potential_only(&self) -> Self {
        let mut out = self.clone();
        out.kinetic_diag = 0.0;
        out.hop = 0.0;
        out
    }

    /// `max |H[p,q] − H[q,p]|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in 0..self.dim() {
            for &q in &self.cols[self.row_ptr[p]..self.row_ptr[p + 1]] {
                let back = self.cols[self.row_ptr[q]..self.row_ptr[q + 1]].binary_search(&p);
                if back.is_err() {
                    worst = worst.max(self.hop.abs());
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_field::{CovarianceKernel, FieldSampler};
    use proptest::prelude::*;

    fn unit_box() -> TwoParticleBox {
        TwoParticleBox::symmetric(vec![0.5], 0.5).unwrap()
    }

    fn nodes(bx: &TwoParticleBox, h: f64) -> GridSpec {
        GridSpec::interior_nodes(&bx.shadow(), h).unwrap()
    }

    fn sorted_eigs(m: DMatrix<f64>) -> Vec<f64> {
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn square_well_energies() {
        let bx = TwoParticleBox::new(Cube::new(vec![0.0], 1.0).unwrap(), Cube::new(vec![0.0], 4.0).unwrap())
            .unwrap();
        let grid = nodes(&bx, 0.5);
        let u = InteractionPotential::square(2.0, 1.0);
        let zero = FieldSample::constant(grid.len(), 0.0);
        assert_eq!(potential_energy(&u, &grid, &zero, &[0.0], &[0.5], 1.0).unwrap(), 2.0);
        assert_eq!(potential_energy(&u, &grid, &zero, &[0.0], &[3.0], 1.0).unwrap(), 0.0);

        let mut v = zero.clone();
        v.values[grid.index_of_point(&[0.0]).unwrap()] = 1.5;
        v.values[grid.index_of_point(&[0.5]).unwrap()] = -0.5;
        let none = InteractionPotential::none();
        assert_eq!(potential_energy(&none, &grid, &v, &[0.0], &[0.5], 1.0).unwrap(), 1.0);
        assert!(matches!(
            potential_energy(&none, &grid, &v, &[0.1], &[0.5], 1.0),
            Err(Error::OffGrid(_))
        ));
    }

    #[test]
    fn hard_core_energy_is_infinite() {
        let bx = unit_box();
        let grid = nodes(&bx, 0.25);
        let u = InteractionPotential::square(1.0, 0.6).with_hard_core(0.3);
        let v = FieldSample::constant(grid.len(), 0.0);
        assert_eq!(potential_energy(&u, &grid, &v, &[0.5], &[0.5], 1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn table_profile_interpolates() {
        let u = InteractionPotential {
            r0: None,
            r1: 2.0,
            profile: InteractionProfile::Table {
                separations: vec![0.0, 1.0, 2.0],
                values: vec![4.0, 2.0, 0.0],
            },
        };
        u.validate().unwrap();
        assert_eq!(u.at_separation(0.5), 3.0);
        assert_eq!(u.at_separation(1.5), 1.0);
        assert_eq!(u.at_separation(2.5), 0.0);
    }

    #[test]
    fn interaction_validation() {
        assert!(InteractionPotential::square(1.0, 1.0).with_hard_core(1.5).validate().is_err());
        assert!(InteractionPotential::square(1.0, -1.0).validate().is_err());
    }

    #[test]
    fn free_spectrum_matches_discrete_dirichlet_sums() {
        let h = 0.25;
        let bx = unit_box();
        let grid = nodes(&bx, h);
        let hd = assemble(
            &bx,
            &grid,
            &InteractionPotential::none(),
            &FieldSample::constant(grid.len(), 0.0),
            &AssemblyOptions::default(),
        )
        .unwrap();
        assert_eq!(hd.dim(), 9);
        let lam = |m: f64| (2.0 / (h * h)) * (1.0 - (m * std::f64::consts::PI / 4.0).cos());
        let mut expected: Vec<f64> = (1..=3)
            .flat_map(|j| (1..=3).map(move |k| 0.5 * (lam(j as f64) + lam(k as f64))))
            .collect();
        expected.sort_by(f64::total_cmp);
        let got = sorted_eigs(hd.to_dense());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-10, "{g} vs {e}");
        }
    }

    #[test]
    fn constant_field_shifts_diagonal_by_twice() {
        let bx = unit_box();
        let grid = nodes(&bx, 0.25);
        let u = InteractionPotential::square(0.7, 0.3);
        let base = assemble(&bx, &grid, &u, &FieldSample::constant(grid.len(), 0.0), &Default::default())
            .unwrap();
        let c = 1.25;
        let shifted = assemble(&bx, &grid, &u, &FieldSample::constant(grid.len(), c), &Default::default())
            .unwrap();
        for (a, b) in base.potential_diag().iter().zip(shifted.potential_diag()) {
            assert!((b - a - 2.0 * c).abs() < 1e-14);
        }
    }

    #[test]
    fn hard_core_removes_points_inside_core() {
        let bx = unit_box();
        let grid = nodes(&bx, 0.25);
        let v = FieldSample::constant(grid.len(), 0.0);
        let diag_only = InteractionPotential::square(0.0, 1.0).with_hard_core(0.2);
        let hd = assemble(&bx, &grid, &diag_only, &v, &Default::default()).unwrap();
        assert_eq!(hd.masked_count(), 3);
        for p in 0..hd.dim() {
            let (i1, i2) = hd.point_indices(p);
            assert_ne!(i1, i2);
        }
        // 0.25 < 0.3, so nearest off-diagonal neighbors are inside the core too.
        let wider = InteractionPotential::square(0.0, 1.0).with_hard_core(0.3);
        let hd = assemble(&bx, &grid, &wider, &v, &Default::default()).unwrap();
        assert_eq!(hd.masked_count(), 7);
        assert_eq!(hd.dim(), 2);
    }

    #[test]
    fn full_hard_core_is_an_error() {
        let bx = unit_box();
        let grid = nodes(&bx, 0.25);
        let v = FieldSample::constant(grid.len(), 0.0);
        let u = InteractionPotential::square(0.0, 2.0).with_hard_core(1.0);
        assert!(matches!(assemble(&bx, &grid, &u, &v, &Default::default()), Err(Error::EmptyInterior)));
    }

    #[test]
    fn non_tiling_spacing_is_an_error() {
        let bx = unit_box();
        let grid = GridSpec::interior_nodes(&CellularSet::single(Cube::new(vec![0.0], 3.0).unwrap()), 1.0)
            .unwrap();
        let v = FieldSample::constant(grid.len(), 0.0);
        assert!(assemble(&bx, &grid, &InteractionPotential::none(), &v, &Default::default()).is_err());
    }

    #[test]
    fn symmetric_box_swap_is_identical() {
        let bx = unit_box();
        let grid = nodes(&bx, 0.125);
        let sampler = FieldSampler::new(&CovarianceKernel::exponential(1.0, 0.3), grid.clone()).unwrap();
        let v = sampler.sample_stream(4, 0);
        let u = InteractionPotential::square(1.0, 0.3);
        let hd = assemble(&bx, &grid, &u, &v, &Default::default()).unwrap();
        let sw = swap_operator(&hd).unwrap();
        let a = sorted_eigs(hd.to_dense());
        let b = sorted_eigs(sw.to_dense());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        let twice = swap_operator(&sw).unwrap();
        assert_eq!(sorted_eigs(twice.to_dense()), a);
    }

    #[test]
    fn sup_potential_examples() {
        let bx = unit_box();
        let grid = nodes(&bx, 0.25);
        let c = -1.5;
        let hd = assemble(&bx, &grid, &InteractionPotential::none(), &FieldSample::constant(grid.len(), c), &Default::default())
            .unwrap();
        let s = sup_potential(&hd);
        assert_eq!(s.w_bar, 3.0);
        assert!(s.chain_holds);

        let well = InteractionPotential::square(2.0, 5.0);
        let hd = assemble(&bx, &grid, &well, &FieldSample::constant(grid.len(), 0.0), &Default::default())
            .unwrap();
        let s = sup_potential(&hd);
        assert_eq!((s.w_bar, s.u_bar), (2.0, 2.0));
    }

    #[test]
    fn kinetic_part_is_positive() {
        let bx = TwoParticleBox::new(Cube::new(vec![0.0], 1.0).unwrap(), Cube::new(vec![0.5], 0.5).unwrap())
            .unwrap();
        let grid = nodes(&bx, 0.125);
        let hd = assemble(&bx, &grid, &InteractionPotential::none(), &FieldSample::constant(grid.len(), 0.0), &Default::default())
            .unwrap();
        assert!(sorted_eigs(hd.kinetic_dense())[0] >= -1e-10);
        assert_eq!(hd.asymmetry(), 0.0);
        let m = hd.to_dense();
        assert_eq!(m.clone(), m.transpose());
    }

    #[test]
    fn apply_matches_dense() {
        let bx = TwoParticleBox::new(Cube::new(vec![0.0, 0.0], 0.5).unwrap(), Cube::new(vec![0.5, 0.0], 0.5).unwrap())
            .unwrap();
        let grid = nodes(&bx, 0.25);
        let sampler = FieldSampler::new(&CovarianceKernel::exponential(1.0, 0.3), grid.clone()).unwrap();
        let hd = assemble(&bx, &grid, &InteractionPotential::square(1.0, 0.3), &sampler.sample_stream(1, 1), &Default::default())
            .unwrap();
        let x: Vec<f64> = (0..hd.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; hd.dim()];
        hd.apply(&x, &mut y);
        let dense = hd.to_dense() * nalgebra::DVector::from_vec(x);
        for (a, b) in y.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn hard_core_never_lowers_ground_state() {
        let bx = TwoParticleBox::symmetric(vec![0.0], 1.0).unwrap();
        let grid = nodes(&bx, 0.25);
        let sampler = FieldSampler::new(&CovarianceKernel::exponential(1.0, 0.5), grid.clone()).unwrap();
        for i in 0..5 {
            let v = sampler.sample_stream(8, i);
            let free = assemble(&bx, &grid, &InteractionPotential::none(), &v, &Default::default()).unwrap();
            let cored = assemble(&bx, &grid, &InteractionPotential::square(0.0, 1.0).with_hard_core(0.3), &v, &Default::default())
                .unwrap();
            let e_free = sorted_eigs(free.to_dense())[0];
            let e_cored = sorted_eigs(cored.to_dense())[0];
            assert!(e_cored >= e_free - 1e-10);
        }
    }

    proptest! {
        #[test]
        fn potential_is_exchange_symmetric(seed in 0u64..1000, a in 0usize..7, b in 0usize..7) {
            let bx = TwoParticleBox::symmetric(vec![0.0], 1.0).unwrap();
            let grid = nodes(&bx, 0.25);
            let sampler = FieldSampler::new(&CovarianceKernel::exponential(1.0, 0.5), grid.clone()).unwrap();
            let v = sampler.sample_stream(seed, 0);
            let u = InteractionPotential::square(1.5, 0.6);
            let (xa, xb) = (grid.point(a).to_vec(), grid.point(b).to_vec());
            let w1 = potential_energy(&u, &grid, &v, &xa, &xb, 1.0).unwrap();
            let w2 = potential_energy(&u, &grid, &v, &xb, &xa, 1.0).unwrap();
            prop_assert_eq!(w1, w2);
        }

        #[test]
        fn sup_chain_holds(seed in 0u64..1000) {
            let bx = TwoParticleBox::new(Cube::new(vec![0.0], 1.0).unwrap(), Cube::new(vec![0.5], 1.5).unwrap()).unwrap();
            let grid = nodes(&bx, 0.25);
            let sampler = FieldSampler::new(&CovarianceKernel::exponential(2.0, 0.5), grid.clone()).unwrap();
            let hd = assemble(&bx, &grid, &InteractionPotential::square(-1.0, 0.5), &sampler.sample_stream(seed, 3), &Default::default()).unwrap();
            prop_assert!(sup_potential(&hd).chain_holds);
        }
    }
}
