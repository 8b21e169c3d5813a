use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::kernel::CovarianceKernel;
use super::space::{covariance_matrix, KernelSpace};
use crate::error::{Error, Result};
use crate::geometry::CellularSet;
use crate::grid::GridSpec;
use crate::rng::{derive_stream, stream_id};

/// One realization of the external field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: Vec<f64>,
    pub seed_path: String,
}

impl FieldSample {
    pub fn constant(len: usize, c: f64) -> Self {
        Self {
            values: vec![c; len],
            seed_path: "constant".into(),
        }
    }

    /// The move `v ↦ v + t·1`.
    pub fn shifted(&self, t: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + t).collect(),
            seed_path: format!("{}+{t}", self.seed_path),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Mean-zero Gaussian sampler with covariance `C(x_p, x_q)` on a grid,
/// realized as `v = F z` with `F Fᵀ = K`.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    grid: GridSpec,
    factor: DMatrix<f64>,
}

impl FieldSampler {
    pub fn new(kernel: &CovarianceKernel, grid: GridSpec) -> Result<Self> {
        kernel.validate()?;
        let cov = covariance_matrix(kernel, &grid);
        Ok(Self {
            factor: factorize(cov)?,
            grid,
        })
    }

    /// Sampler on the cells of a kernel space.
    pub fn for_space(space: &KernelSpace) -> Result<Self> {
        Ok(Self {
            factor: factorize(space.covariance().clone())?,
            grid: space.grid().clone(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, seed_path: String) -> FieldSample {
        let n = self.grid.len();
        let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let v = &self.factor * z;
        FieldSample {
            values: v.as_slice().to_vec(),
            seed_path,
        }
    }

    /// Sample drawn from the stream `(master, index)`.
    pub fn sample_stream(&self, master: u64, index: u64) -> FieldSample {
        let mut rng = derive_stream(master, index);
        self.sample(&mut rng, stream_id(master, index))
    }
}

/// Cholesky factor, or a symmetric square root when the covariance is only
/// semidefinite (for example the zero kernel).
fn factorize(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = cov.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if eig.eigenvalues.iter().any(|&l| l < -1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::FactorizationFailed);
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

/// Plain integral `[ζ] = Σ ζ(x) v(x) h^d` over the cells of the space.
pub fn coefficient(space: &KernelSpace, v: &FieldSample, zeta: &DVector<f64>) -> f64 {
    let hd = space.grid().cell_measure();
    zeta.iter().zip(&v.values).map(|(z, x)| z * x).sum::<f64>() * hd
}

/// All basis coefficients `Γ_i = [η_i]`.
pub fn coefficients(space: &KernelSpace, v: &FieldSample) -> DVector<f64> {
    let hd = space.grid().cell_measure();
    space.basis().tr_mul(&DVector::from_column_slice(&v.values)) * hd
}

/// `V̄_A = max |v|` over the grid points lying in `a`.
pub fn sup_field(grid: &GridSpec, v: &FieldSample, a: &CellularSet) -> f64 {
    grid.mask(a)
        .into_iter()
        .zip(&v.values)
        .filter(|(m, _)| *m)
        .map(|(_, x)| x.abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cube;
    use crate::stats;

    fn interval_grid(lo: f64, hi: f64, h: f64) -> GridSpec {
        let a = CellularSet::single(Cube::new(vec![(lo + hi) / 2.0], (hi - lo) / 2.0).unwrap());
        GridSpec::cells(&a, h).unwrap()
    }

    #[test]
    fn same_stream_is_bitwise_identical() {
        let s = FieldSampler::new(&CovarianceKernel::exponential(1.0, 0.5), interval_grid(0.0, 2.0, 0.1))
            .unwrap();
        let a = s.sample_stream(9, 4);
        let b = s.sample_stream(9, 4);
        assert_eq!(a, b);
        assert_ne!(a.values, s.sample_stream(9, 5).values);
    }

    #[test]
    fn nugget_only_variances() {
        let sigma2 = 2.5;
        let s = FieldSampler::new(&CovarianceKernel::white(sigma2), interval_grid(0.0, 1.0, 0.25)).unwrap();
        let n = 4000;
        let draws: Vec<FieldSample> = (0..n).map(|i| s.sample_stream(1, i)).collect();
        let col = |p: usize| draws.iter().map(|d| d.values[p]).collect::<Vec<_>>();
        for p in 0..4 {
            let var = stats::covariance(&col(p), &col(p));
            assert!((var - sigma2).abs() < 4.0 * sigma2 * (2.0 / n as f64).sqrt());
        }
        let tol = 3.0 / (n as f64).sqrt();
        assert!(stats::pearson(&col(0), &col(1)).abs() < tol);
        assert!(stats::pearson(&col(2), &col(3)).abs() < tol);
    }

    #[test]
    fn exponential_correlation_matches_kernel() {
        let ell = 0.5;
        let kernel = CovarianceKernel::exponential(1.0, ell);
        let grid = interval_grid(0.0, 1.0, 0.25);
        let s = FieldSampler::new(&kernel, grid.clone()).unwrap();
        let n = 5000;
        let draws: Vec<FieldSample> = (0..n).map(|i| s.sample_stream(2, i)).collect();
        let col = |p: usize| draws.iter().map(|d| d.values[p]).collect::<Vec<_>>();
        for q in 1..4 {
            let emp = stats::pearson(&col(0), &col(q));
            let dist = (grid.point(q)[0] - grid.point(0)[0]).abs();
            let exact = (-dist / ell).exp();
            assert!((emp - exact).abs() < 3.0 / (n as f64).sqrt(), "{emp} vs {exact}");
        }
    }

    #[test]
    fn zero_kernel_gives_zero_field() {
        let s = FieldSampler::new(&CovarianceKernel::exponential(0.0, 1.0), interval_grid(0.0, 1.0, 0.25))
            .unwrap();
        assert!(s.sample_stream(0, 0).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn coefficient_of_constant_field() {
        let kernel = CovarianceKernel::exponential(1.0, 0.3);
        let space = KernelSpace::assemble(&kernel, interval_grid(0.0, 2.0, 0.1)).unwrap();
        let c = -1.75;
        let v = FieldSample::constant(space.dim(), c);
        let got = coefficient(&space, &v, space.eta0());
        let expected = c * 2.0 / space.z();
        assert!((got - expected).abs() < 1e-12);
        let zero = DVector::zeros(space.dim());
        assert_eq!(coefficient(&space, &v, &zero), 0.0);
    }

    #[test]
    fn sup_field_examples() {
        let grid = interval_grid(0.0, 1.0, 0.25);
        let all = grid.set().clone();
        assert_eq!(sup_field(&grid, &FieldSample::constant(4, -3.0), &all), 3.0);
        let mut spike = FieldSample::constant(4, 0.0);
        spike.values[2] = 7.0;
        assert_eq!(sup_field(&grid, &spike, &all), 7.0);
    }
}
