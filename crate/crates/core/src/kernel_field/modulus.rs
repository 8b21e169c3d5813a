//! Conditioned continuity moduli of the ground-level coefficient.
//!
//! `ν_{A,A′}(b)` is the largest conditional probability that `[η̂₀]`, with
//! `η̂₀ = 1_A / Z_A`, falls in a window of width `b`, given all other basis
//! coefficients of `L²_C(A ∪ A′)`. The empirical estimator only needs a way
//! to draw the conditioning data and then the leading coefficient given that
//! data, so it is written against [`ConditionalLaw`].

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::CovarianceKernel;
use super::sampler::{coefficients, FieldSampler};
use super::space::KernelSpace;
use crate::error::{invalid, Error, Result};
use crate::geometry::{max_dist, set_distance, CellularSet, TwoParticleBox, SEPARATION_FACTOR};
use crate::grid::GridSpec;
use crate::rng::{derive_stream, SampleRng};
use crate::stats::normal_window_mass;

/// Minimum number of inner draws for a usable conditional CDF.
pub const MIN_INNER: usize = 100;

/// Joint law of (conditioning data, leading coefficient).
pub trait ConditionalLaw: Sync {
    type Condition: Send;

    fn draw_condition(&self, rng: &mut SampleRng) -> Self::Condition;

    fn draw_leading(&self, condition: &Self::Condition, rng: &mut SampleRng) -> f64;
}

/// Gaussian conditioning of `Γ₀` on `Γ_{≥1}`, computed from the coefficient
/// covariance `Σ = Bᵀ G B` of the assembled basis rather than assumed.
#[derive(Debug, Clone)]
pub struct GaussianConditional {
    space: KernelSpace,
    sampler: FieldSampler,
    weights: DVector<f64>,
    sd: f64,
}

impl GaussianConditional {
    /// Conditioning of `[1̂_A]` on the rest of `L²_C(A ∪ A′)`; `a_prime`
    /// may be absent.
    pub fn new(
        kernel: &CovarianceKernel,
        a: &CellularSet,
        a_prime: Option<&CellularSet>,
        h: f64,
    ) -> Result<Self> {
        let union = match a_prime {
            Some(ap) => {
                if set_distance(a, ap) <= 0.0 {
                    return Err(Error::Geometry(
                        "conditioning sets must be disjoint".into(),
                    ));
                }
                a.union(ap)
            }
            None => a.clone(),
        };
        let grid = GridSpec::cells(&union, h)?;
        let space = KernelSpace::assemble_with_leading(kernel, grid, a)?;
        let sampler = FieldSampler::for_space(&space)?;

        let sigma = space.basis().transpose() * space.gram() * space.basis();
        let n = sigma.nrows();
        let (weights, var) = if n == 1 {
            (DVector::zeros(0), sigma[(0, 0)])
        } else {
            let rest = sigma.view((1, 1), (n - 1, n - 1)).into_owned();
            let cross = sigma.view((1, 0), (n - 1, 1)).column(0).into_owned();
            let chol = rest.cholesky().ok_or(Error::FactorizationFailed)?;
            let beta = chol.solve(&cross);
            let var = sigma[(0, 0)] - cross.dot(&beta);
            (beta, var)
        };
        Ok(Self {
            space,
            sampler,
            weights,
            sd: var.max(0.0).sqrt(),
        })
    }

    pub fn space(&self) -> &KernelSpace {
        &self.space
    }

    /// Conditional standard deviation of `Γ₀`.
    pub fn conditional_sd(&self) -> f64 {
        self.sd
    }
}

impl ConditionalLaw for GaussianConditional {
    /// Conditional mean of `Γ₀` given the drawn `Γ_{≥1}`.
    type Condition = f64;

    fn draw_condition(&self, rng: &mut SampleRng) -> f64 {
        let v = self.sampler.sample(rng, String::new());
        let gamma = coefficients(&self.space, &v);
        let rest = gamma.rows(1, gamma.len() - 1);
        self.weights.dot(&rest)
    }

    fn draw_leading(&self, mean: &f64, rng: &mut SampleRng) -> f64 {
        mean + self.sd * rng.sample::<f64, _>(StandardNormal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    /// Max over outer draws; a lower estimate of the essential supremum.
    pub value: f64,
    pub per_outer: Vec<f64>,
    pub n_inner: usize,
    /// Binomial standard error of `value` at `n_inner` draws.
    pub std_error: f64,
}

/// Empirical `ν(b)`: for each of `n_outer` conditioning draws, `n_inner`
/// conditional draws of the leading coefficient and an exact search over
/// window positions `y` of `F(y + b) − F(y)`.
pub fn modulus_empirical<L: ConditionalLaw>(
    law: &L,
    b: f64,
    n_outer: usize,
    n_inner: usize,
    seed: u64,
) -> Result<ModulusEstimate> {
    if n_inner < MIN_INNER {
        return Err(invalid(
            "n_inner",
            format!("need at least {MIN_INNER} inner draws, got {n_inner}"),
        ));
    }
    if n_outer == 0 {
        return Err(invalid("n_outer", "need at least one conditioning draw"));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(invalid("b", format!("window width must be nonnegative, got {b}")));
    }
    let per_outer: Vec<f64> = (0..n_outer as u64)
        .into_par_iter()
        .map(|o| {
            let mut rng = derive_stream(seed, o);
            let condition = law.draw_condition(&mut rng);
            let mut draws: Vec<f64> = (0..n_inner)
                .map(|_| law.draw_leading(&condition, &mut rng))
                .collect();
            draws.sort_by(f64::total_cmp);
            max_window_fraction(&draws, b)
        })
        .collect();
    let value = per_outer.iter().copied().fold(0.0, f64::max);
    Ok(ModulusEstimate {
        value,
        std_error: (value * (1.0 - value) / n_inner as f64).sqrt(),
        per_outer,
        n_inner,
    })
}

/// `max_y #{x ∈ [y, y + b)} / n` over sorted samples.
fn max_window_fraction(sorted: &[f64], b: f64) -> f64 {
    if b <= 0.0 || sorted.is_empty() {
        return 0.0;
    }
    let mut best = 0;
    let mut j = 0;
    for (i, &lo) in sorted.iter().enumerate() {
        j = j.max(i);
        while j < sorted.len() && sorted[j] < lo + b {
            j += 1;
        }
        best = best.max(j - i);
    }
    best as f64 / sorted.len() as f64
}

/// Which leading indicator a `μ̄` evaluation used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeadingChoice {
    /// `1̂_{ΠΛ}` against `ΠΛ′`.
    Shadow,
    /// `1̂_{Π₁Λ}` against `Π₂Λ ∪ ΠΛ′`.
    First,
    /// `1̂_{Π₂Λ}` against `Π₁Λ ∪ ΠΛ′`.
    Second,
}

#[derive(Debug, Clone)]
pub enum ModulusMode {
    /// Exact value `Φ(b/2) − Φ(−b/2)` for Gaussian fields.
    ClosedFormGaussian,
    Empirical(EmpiricalModulus),
}

/// Settings of the empirical `μ̄` evaluation; the supremum over admissible
/// companion boxes is replaced by a maximum over `probes`.
#[derive(Debug, Clone)]
pub struct EmpiricalModulus {
    pub kernel: CovarianceKernel,
    pub h: f64,
    pub probes: Vec<TwoParticleBox>,
    pub n_outer: usize,
    pub n_inner: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEvaluation {
    pub probe: usize,
    pub choice: LeadingChoice,
    pub estimate: ModulusEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusBar {
    pub value: f64,
    pub evaluations: Vec<ModulusEvaluation>,
}

/// `μ̄_Λ(b) = max[μ⁽⁰⁾, μ⁽¹⁾, μ⁽²⁾]`.
pub fn modulus_bar(bx: &TwoParticleBox, b: f64, mode: &ModulusMode) -> Result<ModulusBar> {
    match mode {
        ModulusMode::ClosedFormGaussian => Ok(ModulusBar {
            value: normal_window_mass(b),
            evaluations: Vec::new(),
        }),
        ModulusMode::Empirical(cfg) => {
            if cfg.probes.is_empty() {
                return Err(invalid("probes", "empirical modulus needs at least one probe box"));
            }
            let mut evaluations = Vec::new();
            for (i, probe) in cfg.probes.iter().enumerate() {
                if probe.dim() != bx.dim() || !centers_separated(bx, probe) {
                    continue;
                }
                for (choice, lead, rest) in conditioning_pairs(bx, probe) {
                    if set_distance(&lead, &rest) <= 0.0 {
                        continue;
                    }
                    let law = GaussianConditional::new(&cfg.kernel, &lead, Some(&rest), cfg.h)?;
                    let estimate = modulus_empirical(&law, b, cfg.n_outer, cfg.n_inner, cfg.seed)?;
                    evaluations.push(ModulusEvaluation {
                        probe: i,
                        choice,
                        estimate,
                    });
                }
            }
            if evaluations.is_empty() {
                return Err(invalid(
                    "probes",
                    "no probe box is admissible (separated centers and disjoint sets)",
                ));
            }
            let value = evaluations
                .iter()
                .map(|e| e.estimate.value)
                .fold(0.0, f64::max);
            Ok(ModulusBar { value, evaluations })
        }
    }
}

/// `‖u − u′‖_max > 8·max[L₁, L₂, L′₁, L′₂]`.
pub fn centers_separated(a: &TwoParticleBox, b: &TwoParticleBox) -> bool {
    let scale = SEPARATION_FACTOR * a.max_half_side().max(b.max_half_side());
    max_dist(&a.center(), &b.center()).is_ok_and(|d| d > scale)
}

fn conditioning_pairs(
    bx: &TwoParticleBox,
    other: &TwoParticleBox,
) -> [(LeadingChoice, CellularSet, CellularSet); 3] {
    let shadow_other = other.shadow();
    let c1 = CellularSet::single(bx.cube1());
    let c2 = CellularSet::single(bx.cube2());
    [
        (LeadingChoice::Shadow, bx.shadow(), shadow_other.clone()),
        (LeadingChoice::First, c1.clone(), c2.union(&shadow_other)),
        (LeadingChoice::Second, c2, c1.union(&shadow_other)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Cube;

    fn interval(lo: f64, hi: f64) -> CellularSet {
        CellularSet::single(Cube::new(vec![(lo + hi) / 2.0], (hi - lo) / 2.0).unwrap())
    }

    /// Law with a fixed standard normal leading coefficient.
    struct StandardNormalLaw;

    impl ConditionalLaw for StandardNormalLaw {
        type Condition = ();
        fn draw_condition(&self, _: &mut SampleRng) {}
        fn draw_leading(&self, _: &(), rng: &mut SampleRng) -> f64 {
            rng.sample(StandardNormal)
        }
    }

    #[test]
    fn window_search_is_exact() {
        let xs = [0.0, 0.1, 0.2, 1.0, 1.05];
        assert_eq!(max_window_fraction(&xs, 0.25), 0.6);
        assert_eq!(max_window_fraction(&xs, 0.2), 0.4);
        assert_eq!(max_window_fraction(&xs, 0.0), 0.0);
        assert_eq!(max_window_fraction(&xs, 10.0), 1.0);
    }

    #[test]
    fn zero_width_is_zero() {
        let est = modulus_empirical(&StandardNormalLaw, 0.0, 2, 500, 1).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn too_few_inner_draws_is_an_error() {
        assert!(modulus_empirical(&StandardNormalLaw, 1.0, 2, 99, 1).is_err());
    }

    #[test]
    fn monotone_in_b_and_bounded() {
        let mut last = 0.0;
        for b in [0.1, 0.3, 0.7, 1.5, 3.0, 10.0] {
            let est = modulus_empirical(&StandardNormalLaw, b, 3, 2000, 7).unwrap();
            assert!(est.value >= last && est.value <= 1.0);
            last = est.value;
        }
    }

    #[test]
    fn gaussian_conditional_is_standard_normal() {
        let kernel = CovarianceKernel::exponential(1.0, 0.5);
        let law = GaussianConditional::new(&kernel, &interval(-1.0, 1.0), Some(&interval(9.0, 11.0)), 0.25)
            .unwrap();
        assert!((law.conditional_sd() - 1.0).abs() < 1e-8);
        assert!(law.weights.amax() < 1e-8);
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let kernel = CovarianceKernel::exponential(1.0, 0.5);
        assert!(GaussianConditional::new(&kernel, &interval(-1.0, 1.0), Some(&interval(0.0, 2.0)), 0.25)
            .is_err());
    }

    #[test]
    fn closed_form_bar() {
        let b = TwoParticleBox::symmetric(vec![0.0], 1.0).unwrap();
        let m = modulus_bar(&b, 0.1, &ModulusMode::ClosedFormGaussian).unwrap();
        assert!((m.value - 0.03988).abs() < 1e-5);
        assert!(m.value <= 0.1 / (2.0 * std::f64::consts::PI).sqrt());
        let m = modulus_bar(&b, 0.0, &ModulusMode::ClosedFormGaussian).unwrap();
        assert_eq!(m.value, 0.0);
    }

    #[test]
    fn empirical_bar_needs_probes() {
        let b = TwoParticleBox::symmetric(vec![0.0], 1.0).unwrap();
        let mode = ModulusMode::Empirical(EmpiricalModulus {
            kernel: CovarianceKernel::exponential(1.0, 0.5),
            h: 0.25,
            probes: vec![],
            n_outer: 1,
            n_inner: 200,
            seed: 0,
        });
        assert!(modulus_bar(&b, 1.0, &mode).is_err());
    }

    #[test]
    fn empirical_bar_within_band_of_closed_form() {
        let bx = TwoParticleBox::new(
            Cube::new(vec![0.0], 1.0).unwrap(),
            Cube::new(vec![4.0], 1.0).unwrap(),
        )
        .unwrap();
        let probes = vec![
            TwoParticleBox::symmetric(vec![30.0], 1.0).unwrap(),
            TwoParticleBox::new(Cube::new(vec![-20.0], 1.0).unwrap(), Cube::new(vec![25.0], 0.5).unwrap())
                .unwrap(),
            // Rejected: centers too close.
            TwoParticleBox::symmetric(vec![5.0], 1.0).unwrap(),
        ];
        let b = 1.0;
        let mode = ModulusMode::Empirical(EmpiricalModulus {
            kernel: CovarianceKernel::exponential(1.0, 0.5),
            h: 0.25,
            probes,
            n_outer: 4,
            n_inner: 5000,
            seed: 12,
        });
        let m = modulus_bar(&bx, b, &mode).unwrap();
        // Two admissible probes times three leading choices.
        assert_eq!(m.evaluations.len(), 6);
        let exact = normal_window_mass(b);
        for e in &m.evaluations {
            assert!(e.estimate.value <= exact + 3.0 * e.estimate.std_error + 0.01, "{e:?}");
        }
    }
}
