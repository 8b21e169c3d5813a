use nalgebra::{DMatrix, DVector};

use super::kernel::CovarianceKernel;
use crate::error::{Error, Result};
use crate::geometry::CellularSet;
use crate::grid::{GridKind, GridSpec};

/// Relative eigenvalue floor below which a Gram matrix counts as singular.
const PD_RELATIVE_FLOOR: f64 = 1e-12;

/// Relative norm below which a candidate basis vector is treated as
/// linearly dependent on the ones already accepted.
const DEPENDENCE_TOL: f64 = 1e-8;

/// Point covariance matrix `K[p, q] = C(x_p, x_q)` on a grid.
pub fn covariance_matrix(kernel: &CovarianceKernel, grid: &GridSpec) -> DMatrix<f64> {
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for p in 0..n {
        for q in p..n {
            let c = kernel.covariance(grid.point(p), grid.point(q));
            k[(p, q)] = c;
            k[(q, p)] = c;
        }
    }
    k
}

/// `‖1_A‖_C` computed on a cell grid, without assembling a basis.
pub fn normalizing_constant(kernel: &CovarianceKernel, grid: &GridSpec, a: &CellularSet) -> f64 {
    let ind = grid.indicator(a);
    let hd = grid.cell_measure();
    let mut acc = 0.0;
    for p in (0..grid.len()).filter(|&p| ind[p] != 0.0) {
        for q in (0..grid.len()).filter(|&q| ind[q] != 0.0) {
            acc += kernel.covariance(grid.point(p), grid.point(q));
        }
    }
    (acc * hd * hd).max(0.0).sqrt()
}

/// Discretized `L²_C(A)`: the Gram form of `⟨ζ, η⟩_C = ∫∫ ζ(x) C(x,y) η(y) dx dy`
/// on cell grid functions, the normalized indicator `η̂₀ = 1_B / Z_B` of a
/// leading subset `B ⊆ A`, and a C-orthonormal basis led by `η̂₀`.
#[derive(Debug, Clone)]
pub struct KernelSpace {
    kernel: CovarianceKernel,
    grid: GridSpec,
    leading: CellularSet,
    cov: DMatrix<f64>,
    gram: DMatrix<f64>,
    z: f64,
    eta0: DVector<f64>,
    basis: DMatrix<f64>,
}

impl KernelSpace {
    /// Space over the whole grid with `η̂₀ = 1_A / Z_A`.
    pub fn assemble(kernel: &CovarianceKernel, grid: GridSpec) -> Result<Self> {
        let leading = grid.set().clone();
        Self::assemble_with_leading(kernel, grid, &leading)
    }

    /// Space over the grid whose basis is led by the normalized indicator of
    /// `leading` (a subset of the grid's set).
    pub fn assemble_with_leading(
        kernel: &CovarianceKernel,
        grid: GridSpec,
        leading: &CellularSet,
    ) -> Result<Self> {
        kernel.validate()?;
        if grid.kind() != GridKind::Cells {
            return Err(Error::NonTilingGrid(
                "kernel spaces need a cell-centered grid".into(),
            ));
        }
        if grid.is_empty() {
            return Err(Error::NonTilingGrid("empty grid".into()));
        }
        let cov = covariance_matrix(kernel, &grid);
        check_positive_definite(&cov)?;

        let hd = grid.cell_measure();
        let gram = &cov * (hd * hd);
        let indicator = DVector::from_vec(grid.indicator(leading));
        if indicator.iter().all(|&x| x == 0.0) {
            return Err(Error::Geometry("leading set contains no grid cells".into()));
        }
        let z = quad(&gram, &indicator, &indicator).max(0.0).sqrt();
        let eta0 = &indicator / z;
        let basis = orthonormal_basis(&gram, &eta0);

        Ok(Self {
            kernel: *kernel,
            grid,
            leading: leading.clone(),
            cov,
            gram,
            z,
            eta0,
            basis,
        })
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn leading_set(&self) -> &CellularSet {
        &self.leading
    }

    /// Point covariance `K[p, q] = C(x_p, x_q)`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `G[p, q] = C(x_p, x_q)·h^d·h^d`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `Z = ‖1_B‖_C` for the leading set `B`.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// `η̂₀ = 1_B / Z`.
    pub fn eta0(&self) -> &DVector<f64> {
        &self.eta0
    }

    /// C-orthonormal basis, one grid function per column; column 0 is `η̂₀`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// `⟨ζ, η⟩_C`.
    pub fn inner(&self, zeta: &DVector<f64>, eta: &DVector<f64>) -> f64 {
        quad(&self.gram, zeta, eta)
    }

    pub fn norm(&self, zeta: &DVector<f64>) -> f64 {
        self.inner(zeta, zeta).max(0.0).sqrt()
    }

    /// Max deviation of `⟨η_i, η_j⟩_C` from `δ_ij` over the basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let m = self.basis.transpose() * &self.gram * &self.basis;
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((m[(i, j)] - target).abs());
            }
        }
        worst
    }
}

fn quad(g: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(&(g * b))
}

fn check_positive_definite(cov: &DMatrix<f64>) -> Result<()> {
    let eig = cov.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= PD_RELATIVE_FLOOR * max {
        return Err(Error::NotPositiveDefinite { min, max });
    }
    Ok(())
}

/// Modified Gram–Schmidt in the `G` inner product, seeded with `lead`
/// (assumed normalized) and completed with cell indicators. Each candidate
/// is orthogonalized twice.
fn orthonormal_basis(gram: &DMatrix<f64>, lead: &DVector<f64>) -> DMatrix<f64> {
    let n = gram.nrows();
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut gq: Vec<DVector<f64>> = Vec::with_capacity(n);
    q.push(lead.clone());
    gq.push(gram * lead);

    for p in 0..n {
        if q.len() == n {
            break;
        }
        let mut w = DVector::zeros(n);
        w[p] = 1.0;
        let reference = gram[(p, p)].sqrt();
        for _ in 0..2 {
            for (qj, gqj) in q.iter().zip(&gq) {
                let c = w.dot(gqj);
                w.axpy(-c, qj, 1.0);
            }
        }
        let gw = gram * &w;
        let norm = w.dot(&gw).max(0.0).sqrt();
        if norm <= DEPENDENCE_TOL * reference {
            continue;
        }
        q.push(w / norm);
        gq.push(gw / norm);
    }
    DMatrix::from_columns(&q)
}
