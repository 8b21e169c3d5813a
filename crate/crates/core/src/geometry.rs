//! Cubes, two-particle boxes and their shadows in the max-norm.
//!
//! All cubes are closed and axis-aligned. A two-particle box is the product
//! `cube1 × cube2 ⊂ R^d × R^d`; its shadow is the union of the two cubes in
//! `R^d`. Distances between sets use `‖·‖_max`, so the distance between two
//! cubes is the largest per-axis interval gap.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance used when snapping cube faces onto a lattice.
const LATTICE_TOL: f64 = 1e-9;

/// Separation constant of the distance condition. It does not depend on `d`.
pub const SEPARATION_FACTOR: f64 = 8.0;

/// `max_i |x_i - y_i|`.
pub fn max_dist(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Closed axis-aligned cube `{x : |x_i - center_i| <= half_side}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub half_side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, half_side: f64) -> Result<Self> {
        if !(half_side > 0.0 && half_side.is_finite()) {
            return Err(invalid("half_side", format!("must be positive, got {half_side}")));
        }
        if center.is_empty() {
            return Err(invalid("center", "dimension must be at least 1"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(invalid("center", "coordinates must be finite"));
        }
        Ok(Self { center, half_side })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - self.half_side
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + self.half_side
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.center)
                .all(|(xi, ci)| (xi - ci).abs() <= self.half_side)
    }

    /// Lebesgue measure `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_side).powi(self.dim() as i32)
    }

    /// Max-norm distance between two closed cubes; zero iff they intersect.
    pub fn distance(&self, other: &Cube) -> f64 {
        self.center
            .iter()
            .zip(&other.center)
            .map(|(a, b)| ((a - b).abs() - (self.half_side + other.half_side)).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Intersection cube as per-axis `[lo, hi]` intervals, or `None` when the
    /// interior overlap is empty.
    fn overlap(bounds: &[(f64, f64)], cube: &Cube) -> Option<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(bounds.len());
        for (axis, &(lo, hi)) in bounds.iter().enumerate() {
            let lo = lo.max(cube.lower(axis));
            let hi = hi.min(cube.upper(axis));
            if hi <= lo {
                return None;
            }
            out.push((lo, hi));
        }
        Some(out)
    }

    /// Integer lattice coordinates of the lower and upper faces for spacing `h`.
    ///
    /// Faces must sit on the global lattice `h·Z^d`; this keeps grids of
    /// overlapping cubes aligned so shared points carry one field value.
    pub fn lattice_bounds(&self, h: f64) -> Result<Vec<(i64, i64)>> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("grid spacing must be positive, got {h}")));
        }
        (0..self.dim())
            .map(|axis| {
                let lo = snap(self.lower(axis), h)?;
                let hi = snap(self.upper(axis), h)?;
                Ok((lo, hi))
            })
            .collect()
    }
}

fn snap(x: f64, h: f64) -> Result<i64> {
    let k = (x / h).round();
    if (x / h - k).abs() > LATTICE_TOL * (1.0 + k.abs()) {
        return Err(Error::NonTilingGrid(format!(
            "cube face {x} is not a multiple of spacing {h}"
        )));
    }
    Ok(k as i64)
}

/// Two-particle box `cube1 × cube2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoParticleBox {
    #[serde(rename = "center1")]
    pub center1: Vec<f64>,
    #[serde(rename = "L1")]
    pub half_side1: f64,
    #[serde(rename = "center2")]
    pub center2: Vec<f64>,
    #[serde(rename = "L2")]
    pub half_side2: f64,
}

impl TwoParticleBox {
    pub fn new(cube1: Cube, cube2: Cube) -> Result<Self> {
        if cube1.dim() != cube2.dim() {
            return Err(Error::DimensionMismatch {
                expected: cube1.dim(),
                got: cube2.dim(),
            });
        }
        Ok(Self {
            center1: cube1.center,
            half_side1: cube1.half_side,
            center2: cube2.center,
            half_side2: cube2.half_side,
        })
    }

    /// Box with both cubes centered at `center`, half-side `l` (a symmetric box).
    pub fn symmetric(center: Vec<f64>, l: f64) -> Result<Self> {
        Self::new(Cube::new(center.clone(), l)?, Cube::new(center, l)?)
    }

    /// Re-checks the invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        Self::new(
            Cube::new(self.center1.clone(), self.half_side1)?,
            Cube::new(self.center2.clone(), self.half_side2)?,
        )
        .map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.center1.len()
    }

    /// Projection `Π₁Λ`.
    pub fn cube1(&self) -> Cube {
        Cube {
            center: self.center1.clone(),
            half_side: self.half_side1,
        }
    }

    /// Projection `Π₂Λ`.
    pub fn cube2(&self) -> Cube {
        Cube {
            center: self.center2.clone(),
            half_side: self.half_side2,
        }
    }

    /// Concatenated center `u = (u₁, u₂) ∈ R^{2d}`.
    pub fn center(&self) -> Vec<f64> {
        self.center1.iter().chain(&self.center2).copied().collect()
    }

    pub fn max_half_side(&self) -> f64 {
        self.half_side1.max(self.half_side2)
    }

    /// `|Λ| = |Π₁Λ|·|Π₂Λ|`.
    pub fn volume(&self) -> f64 {
        self.cube1().volume() * self.cube2().volume()
    }

    /// `S(Λ) = cube2 × cube1`.
    pub fn swapped(&self) -> Self {
        Self {
            center1: self.center2.clone(),
            half_side1: self.half_side2,
            center2: self.center1.clone(),
            half_side2: self.half_side1,
        }
    }

    /// Shadow `ΠΛ = Π₁Λ ∪ Π₂Λ`.
    pub fn shadow(&self) -> CellularSet {
        CellularSet {
            cubes: vec![self.cube1(), self.cube2()],
        }
    }
}

/// Finite union of closed cubes in `R^d` (overlap permitted).
///
/// Shadows of boxes have two cubes; unions of a projection with another
/// shadow (as needed for conditioning sets) may have up to four.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellularSet {
    pub cubes: Vec<Cube>,
}

impl CellularSet {
    pub fn new(cubes: Vec<Cube>) -> Result<Self> {
        let Some(first) = cubes.first() else {
            return Err(invalid("cubes", "a cellular set needs at least one cube"));
        };
        let d = first.dim();
        if let Some(bad) = cubes.iter().find(|c| c.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        Ok(Self { cubes })
    }

    pub fn single(cube: Cube) -> Self {
        Self { cubes: vec![cube] }
    }

    pub fn dim(&self) -> usize {
        self.cubes[0].dim()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.cubes.iter().any(|c| c.contains(x))
    }

    pub fn union(&self, other: &CellularSet) -> CellularSet {
        CellularSet {
            cubes: self.cubes.iter().chain(&other.cubes).cloned().collect(),
        }
    }

    /// Measure of the union by inclusion–exclusion over cube intersections.
    pub fn measure(&self) -> f64 {
        let n = self.cubes.len();
        let d = self.dim();
        let mut total = 0.0;
        for mask in 1u32..(1 << n) {
            let mut bounds: Option<Vec<(f64, f64)>> = None;
            let mut empty = false;
            for (i, cube) in self.cubes.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    continue;
                }
                let next = match &bounds {
                    None => Some((0..d).map(|a| (cube.lower(a), cube.upper(a))).collect()),
                    Some(b) => Cube::overlap(b, cube),
                };
                match next {
                    Some(b) => bounds = Some(b),
                    None => {
                        empty = true;
                        break;
                    }
                }
            }
            if empty {
                continue;
            }
            let vol: f64 = bounds
                .expect("mask is nonempty")
                .iter()
                .map(|(lo, hi)| hi - lo)
                .product();
            if mask.count_ones() % 2 == 1 {
                total += vol;
            } else {
                total -= vol;
            }
        }
        total
    }
}

/// `inf { ‖x - y‖_max : x ∈ A, y ∈ B }`; zero iff the closed sets meet.
pub fn set_distance(a: &CellularSet, b: &CellularSet) -> f64 {
    a.cubes
        .iter()
        .flat_map(|ca| b.cubes.iter().map(move |cb| ca.distance(cb)))
        .fold(f64::INFINITY, f64::min)
}

/// `min{‖u − u′‖_max, ‖S(u) − u′‖_max} > 8·max[L₁, L₂, L′₁, L′₂]`.
pub fn distance_condition(a: &TwoParticleBox, b: &TwoParticleBox) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    let u_prime = b.center();
    let direct = max_dist(&a.center(), &u_prime).expect("equal dimensions");
    let swapped = max_dist(&a.swapped().center(), &u_prime).expect("equal dimensions");
    let scale = SEPARATION_FACTOR * a.max_half_side().max(b.max_half_side());
    direct.min(swapped) > scale
}

/// The four partial-separation patterns: one projection cube is away from
/// the union of the other three.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PartialCase {
    /// `Π₁Λ` isolated.
    A,
    /// `Π₂Λ` isolated.
    B,
    /// `Π₁Λ′` isolated.
    C,
    /// `Π₂Λ′` isolated.
    D,
}

impl PartialCase {
    pub const ALL: [PartialCase; 4] = [PartialCase::A, PartialCase::B, PartialCase::C, PartialCase::D];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationVerdict {
    pub distance_condition_met: bool,
    pub complete: bool,
    pub partial_cases: Vec<PartialCase>,
}

impl SeparationVerdict {
    /// Whether the verdict satisfies the separation dichotomy.
    pub fn is_classified(&self) -> bool {
        self.complete || !self.partial_cases.is_empty()
    }
}

/// Isolated projection cube and the union of the remaining three.
pub fn partial_split(a: &TwoParticleBox, b: &TwoParticleBox, case: PartialCase) -> (Cube, CellularSet) {
    let all = [a.cube1(), a.cube2(), b.cube1(), b.cube2()];
    let idx = case as usize;
    let rest = all
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, c)| c.clone())
        .collect();
    (all[idx].clone(), CellularSet { cubes: rest })
}

/// Complete/partial separation classification of a pair of boxes.
pub fn classify_separation(a: &TwoParticleBox, b: &TwoParticleBox) -> SeparationVerdict {
    if !distance_condition(a, b) {
        return SeparationVerdict {
            distance_condition_met: false,
            complete: false,
            partial_cases: Vec::new(),
        };
    }
    let complete = set_distance(&a.shadow(), &b.shadow()) > 0.0;
    let partial_cases = PartialCase::ALL
        .into_iter()
        .filter(|&case| {
            let (cube, rest) = partial_split(a, b, case);
            set_distance(&CellularSet::single(cube), &rest) > 0.0
        })
        .collect();
    SeparationVerdict {
        distance_condition_met: true,
        complete,
        partial_cases,
    }
}

/// Random point uniformly distributed in the Euclidean ball of radius `r`.
fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-r..=r)).collect();
        if p.iter().map(|x| x * x).sum::<f64>() <= r * r {
            return p;
        }
    }
}

/// Draws a pair of boxes satisfying the distance condition.
///
/// Half-sides are uniform in `(0, max_l]`; the four cube centers are uniform
/// in the ball of radius `radius_factor · max_l`. Pairs failing the distance
/// condition are rejected. Returns the pair and the number of rejections.
pub fn random_separated_pair<R: Rng + ?Sized>(
    rng: &mut R,
    dim: usize,
    max_l: f64,
    radius_factor: f64,
) -> (TwoParticleBox, TwoParticleBox, usize) {
    let radius = radius_factor * max_l;
    let mut rejected = 0;
    loop {
        let cube = |rng: &mut R| Cube {
            center: uniform_in_ball(rng, dim, radius),
            half_side: max_l * (1.0 - rng.random::<f64>()),
        };
        let c1 = cube(rng);
        let c2 = cube(rng);
        let c3 = cube(rng);
        let c4 = cube(rng);
        let a = TwoParticleBox::new(c1, c2).expect("same dimension");
        let b = TwoParticleBox::new(c3, c4).expect("same dimension");
        if distance_condition(&a, &b) {
            return (a, b, rejected);
        }
        rejected += 1;
    }
}
