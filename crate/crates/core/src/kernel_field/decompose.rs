use nalgebra::DVector;

use super::sampler::{coefficient, FieldSample};
use super::space::KernelSpace;

/// Split `v = Γ₀·α + Ξ` of a field into its ground level `Γ₀ = [η̂₀]` times
/// the regression profile `α(x) = Cov(v(x), Γ₀) / Var(Γ₀)` and a residual
/// fluctuation `Ξ`. For Gaussian fields `Γ₀` and `Ξ` are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub gamma0: f64,
    pub regression_profile: Vec<f64>,
    pub fluctuation: Vec<f64>,
    /// Sub-ulp rounding carry, nonzero only where cancellation in `γ·a + ξ`
    /// makes `x` unreachable from any single float `ξ`.
    carry: Vec<f64>,
}

impl Decomposition {
    /// `Γ₀·α + Ξ`.
    pub fn recombine(&self) -> Vec<f64> {
        self.with_gamma0(self.gamma0)
    }

    /// `γ·α + Ξ` for an injected ground level `γ`.
    pub fn with_gamma0(&self, gamma: f64) -> Vec<f64> {
        self.regression_profile
            .iter()
            .zip(&self.fluctuation)
            .zip(&self.carry)
            .map(|((a, xi), c)| (gamma * a + xi) + c)
            .collect()
    }
}

/// `α = K η̂₀ h^d / ⟨η̂₀, η̂₀⟩_C` on the cells of the space.
pub fn regression_profile(space: &KernelSpace) -> Vec<f64> {
    let hd = space.grid().cell_measure();
    let var = space.inner(space.eta0(), space.eta0());
    let cross: DVector<f64> = space.covariance() * space.eta0() * hd;
    cross.iter().map(|c| c / var).collect()
}

pub fn decompose(space: &KernelSpace, v: &FieldSample) -> Decomposition {
    let gamma0 = coefficient(space, v, space.eta0());
    let alpha = regression_profile(space);
    let (fluctuation, carry) = alpha
        .iter()
        .zip(&v.values)
        .map(|(&a, &x)| {
            let xi = exact_residual(x, gamma0, a);
            // Both terms are within a few ulps of x, so the difference is exact
            // and adding it back lands on x.
            (xi, x - (gamma0 * a + xi))
        })
        .unzip();
    Decomposition {
        gamma0,
        regression_profile: alpha,
        fluctuation,
        carry,
    }
}

/// Residual `ξ ≈ x − γ·a` adjusted by ulps so that `γ·a + ξ` rounds back to
/// `x` exactly.
fn exact_residual(x: f64, gamma: f64, a: f64) -> f64 {
    let p = gamma * a;
    let mut xi = x - p;
    for _ in 0..64 {
        let back = p + xi;
        if back == x {
            return xi;
        }
        xi = if back < x { xi.next_up() } else { xi.next_down() };
    }
    x - p
}
