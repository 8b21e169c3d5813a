//! Eigenvalues of the discrete Hamiltonian, window counts and the spectral
//! distance between two operators restricted to an energy interval.
//!
//! Operators up to [`DENSE_THRESHOLD`] points are diagonalized densely and
//! return every eigenvalue. Larger ones go through a block Lanczos solver
//! with full reorthogonalization that returns the lowest `k` eigenvalues;
//! windows reaching past the computed range are refused rather than
//! silently undercounted.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::DiscreteHamiltonian;

/// Largest operator dimension solved densely.
pub const DENSE_THRESHOLD: usize = 4096;

/// Absolute tolerance for eigenvalue identities (shift, swap).
pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dense,
    IterativeLowest { k: usize },
}

/// How many eigenvalues to ask for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenCount {
    All,
    Lowest(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Operators of at most this dimension are solved densely.
    #[serde(default = "default_threshold")]
    pub dense_threshold: usize,
    /// Largest Krylov basis the iterative solver may build.
    #[serde(default = "default_max_basis")]
    pub max_basis: usize,
    /// Residual tolerance relative to `‖H‖`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_threshold() -> usize {
    DENSE_THRESHOLD
}

fn default_max_basis() -> usize {
    1500
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            dense_threshold: default_threshold(),
            max_basis: default_max_basis(),
            tolerance: default_tolerance(),
        }
    }
}

/// Sorted eigenvalues `E₀ ≤ E₁ ≤ …` of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    method: SolveMethod,
    dim: usize,
}

impl Spectrum {
    /// Spectrum of a matrix known to be fully diagonalized.
    pub fn from_all(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let dim = eigenvalues.len();
        Self {
            eigenvalues,
            method: SolveMethod::Dense,
            dim,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn count_computed(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn method(&self) -> SolveMethod {
        self.method
    }

    /// Dimension of the operator the spectrum belongs to.
    pub fn operator_dim(&self) -> usize {
        self.dim
    }

    pub fn is_complete(&self) -> bool {
        self.eigenvalues.len() == self.dim
    }

    /// Every eigenvalue `≤ hi` is present in the list.
    pub fn covers(&self, hi: f64) -> bool {
        self.is_complete() || self.eigenvalues.last().is_some_and(|&top| hi < top)
    }

    fn check_coverage(&self, hi: f64) -> Result<()> {
        if self.covers(hi) {
            Ok(())
        } else {
            Err(Error::Coverage {
                covered: self.eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY),
                needed: hi,
            })
        }
    }

    /// Eigenvalues in `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> &[f64] {
        let a = self.eigenvalues.partition_point(|&e| e < lo);
        let b = self.eigenvalues.partition_point(|&e| e <= hi);
        &self.eigenvalues[a..b.max(a)]
    }

    /// Distance from `e` to the nearest computed eigenvalue.
    pub fn distance_to(&self, e: f64) -> f64 {
        let i = self.eigenvalues.partition_point(|&x| x < e);
        let above = self.eigenvalues.get(i).map(|x| x - e);
        let below = i.checked_sub(1).map(|j| e - self.eigenvalues[j]);
        above.into_iter().chain(below).fold(f64::INFINITY, f64::min)
    }

    /// `index,eigenvalue` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, e) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{e:.16e}\n"));
        }
        out
    }
}

pub fn eigensolve(hd: &DiscreteHamiltonian, count: EigenCount) -> Result<Spectrum> {
    eigensolve_with(hd, count, &SolverOptions::default())
}

pub fn eigensolve_with(
    hd: &DiscreteHamiltonian,
    count: EigenCount,
    options: &SolverOptions,
) -> Result<Spectrum> {
    let n = hd.dim();
    if n == 0 {
        return Err(Error::EmptyInterior);
    }
    let k = match count {
        EigenCount::All => n,
        EigenCount::Lowest(0) => return Err(invalid("k", "need at least one eigenvalue")),
        EigenCount::Lowest(k) => k.min(n),
    };
    if n <= options.dense_threshold {
        return Ok(Spectrum::from_all(dense_eigenvalues(hd.to_dense())));
    }
    if k == n {
        return Err(invalid(
            "k",
            format!("all {n} eigenvalues requested above the dense threshold {}", options.dense_threshold),
        ));
    }
    let eigenvalues = lowest_block_lanczos(hd, k, options)?;
    Ok(Spectrum {
        eigenvalues,
        method: SolveMethod::IterativeLowest { k },
        dim: n,
    })
}

/// Spectrum guaranteed to contain every eigenvalue `≤ hi`: all of them in
/// dense mode, otherwise the lowest `k` with `k` doubled until covered.
pub fn eigensolve_covering(hd: &DiscreteHamiltonian, hi: f64, options: &SolverOptions) -> Result<Spectrum> {
    if hd.dim() <= options.dense_threshold {
        return eigensolve_with(hd, EigenCount::All, options);
    }
    let mut k = 16;
    loop {
        let s = eigensolve_with(hd, EigenCount::Lowest(k), options)?;
        if s.covers(hi) {
            return Ok(s);
        }
        if 2 * k > options.max_basis / 2 || 2 * k >= hd.dim() {
            return Err(Error::Coverage {
                covered: s.eigenvalues().last().copied().unwrap_or(f64::NEG_INFINITY),
                needed: hi,
            });
        }
        k *= 2;
    }
}

/// Sorted eigenvalues of a symmetric matrix.
pub fn dense_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Block Lanczos with full (two-pass) reorthogonalization and Rayleigh–Ritz
/// extraction. The block size lets clusters of up to `p` degenerate
/// eigenvalues converge together.
fn lowest_block_lanczos(hd: &DiscreteHamiltonian, k: usize, options: &SolverOptions) -> Result<Vec<f64>> {
    let n = hd.dim();
    let p = k.clamp(4, 8).min(n);
    let max_basis = options.max_basis.max(k + 2 * p).min(n);
    let norm = hd.norm_bound();
    let tol = options.tolerance * norm.max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut hq: Vec<DVector<f64>> = Vec::new();
    let mut t = DMatrix::<f64>::zeros(0, 0);
    let mut block: Vec<DVector<f64>> = (0..p)
        .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    let mut next_check = k + p;
    let mut worst = f64::INFINITY;

    loop {
        let before = q.len();
        for mut v in block.drain(..) {
            let start = v.norm();
            for _ in 0..2 {
                for qi in &q {
                    let c = qi.dot(&v);
                    v.axpy(-c, qi, 1.0);
                }
            }
            let r = v.norm();
            // Deflate directions already spanned.
            if r > 1e-10 * start.max(f64::MIN_POSITIVE) && q.len() < max_basis {
                v /= r;
                let mut w = DVector::zeros(n);
                hd.apply(v.as_slice(), w.as_mut_slice());
                q.push(v);
                hq.push(w);
            }
        }
        let added = q.len() - before;
        t = extend_projection(&t, &q, &hq, before);
        let exhausted = added == 0 || q.len() >= max_basis;

        if q.len() >= next_check || exhausted {
            let eig = SymmetricEigen::new(t.clone());
            let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let take = k.min(order.len());
            worst = 0.0;
            for &j in &order[..take] {
                let y = eig.eigenvectors.column(j);
                let theta = eig.eigenvalues[j];
                let mut r = DVector::zeros(n);
                for (i, yi) in y.iter().enumerate() {
                    r.axpy(*yi, &hq[i], 1.0);
                    r.axpy(-theta * yi, &q[i], 1.0);
                }
                worst = worst.max(r.norm());
            }
            if take == k && worst <= tol {
                let mut out: Vec<f64> = order[..k].iter().map(|&j| eig.eigenvalues[j]).collect();
                out.sort_by(f64::total_cmp);
                return Ok(out);
            }
            if exhausted {
                return Err(Error::NoConvergence {
                    iterations: q.len(),
                    residual: worst,
                });
            }
            next_check = q.len() + (q.len() / 4).max(p);
        }
        block = hq[before..].to_vec();
        if block.is_empty() {
            return Err(Error::NoConvergence {
                iterations: q.len(),
                residual: worst,
            });
        }
    }
}

/// Grows `T = QᵀHQ` by the columns added after index `from`.
fn extend_projection(t: &DMatrix<f64>, q: &[DVector<f64>], hq: &[DVector<f64>], from: usize) -> DMatrix<f64> {
    let m = q.len();
    let mut out = DMatrix::zeros(m, m);
    out.view_mut((0, 0), (from, from)).copy_from(t);
    for j in from..m {
        for i in 0..=j {
            // Average both orders to keep T exactly symmetric.
            let v = 0.5 * (q[i].dot(&hq[j]) + q[j].dot(&hq[i]));
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `max_j |E_j(v + t) − E_j(v) − 2gt|` for a constant shift of the field.
pub fn shift_check(hd: &DiscreteHamiltonian, t: f64) -> Result<f64> {
    let base = eigensolve(hd, EigenCount::All)?;
    let shifted = eigensolve(&hd.with_field(&hd.field().shifted(t))?, EigenCount::All)?;
    let expected = 2.0 * hd.coupling() * t;
    Ok(base
        .eigenvalues()
        .iter()
        .zip(shifted.eigenvalues())
        .map(|(a, b)| (b - a - expected).abs())
        .fold(0.0, f64::max))
}

/// Number of eigenvalues in `[lo, hi]`, with multiplicity.
pub fn count_in_window(s: &Spectrum, lo: f64, hi: f64) -> Result<usize> {
    if !(lo <= hi) {
        return Err(invalid("window", format!("need lo <= hi, got [{lo}, {hi}]")));
    }
    s.check_coverage(hi)?;
    Ok(s.restrict(lo, hi).len())
}

/// `inf |E − E′|` over eigenvalues of both spectra lying in `J = [lo, hi]`;
/// `+∞` when either restriction is empty.
pub fn spectral_distance(s: &Spectrum, s2: &Spectrum, j: (f64, f64)) -> Result<f64> {
    let (lo, hi) = j;
    if !(lo <= hi) {
        return Err(invalid("J", format!("need lo <= hi, got [{lo}, {hi}]")));
    }
    s.check_coverage(hi)?;
    s2.check_coverage(hi)?;
    Ok(min_gap(s.restrict(lo, hi), s2.restrict(lo, hi)))
}

/// Smallest `|a_i − b_j|` between two sorted lists.
fn min_gap(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut best = f64::INFINITY;
    while i < a.len() && j < b.len() {
        best = best.min((a[i] - b[j]).abs());
        if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}
