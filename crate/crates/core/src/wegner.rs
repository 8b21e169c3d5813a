//! Monte Carlo estimates of eigenvalue concentration.
//!
//! The one-volume estimator measures `P(∃k: |E − E_k| ≤ ε)` for a single box;
//! the two-volume estimator measures `P(dist(Σ(H_Λ), Σ(H_Λ′); J) ≤ ε)` for two
//! separated boxes driven by one shared field sample. Both report the factors
//! of the corresponding theoretical bound and a fitted proportionality
//! constant, since the bound's constants are not explicit.
//!
//! Each sample draws its field from its own indexed stream and results are
//! reduced in sample order, so the report does not depend on how samples are
//! scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{distance_condition, CellularSet, TwoParticleBox};
use crate::grid::GridSpec;
use crate::hamiltonian::{assemble, sup_potential, AssemblyOptions, InteractionPotential};
use crate::kernel_field::{modulus_bar, normalizing_constant, CovarianceKernel, FieldSampler, ModulusMode};
use crate::spectral::{count_in_window, eigensolve_covering, spectral_distance, SolverOptions};
use crate::stats::{pearson, wilson_interval};

/// Fewest samples an estimator accepts.
pub const MIN_SAMPLES: usize = 100;

/// Largest tolerated fraction of failed samples.
pub const MAX_FAILURE_RATE: f64 = 0.01;

/// Settings shared by both estimators.
#[derive(Debug, Clone)]
pub struct SamplingSetup {
    pub kernel: CovarianceKernel,
    pub interaction: InteractionPotential,
    pub h: f64,
    pub coupling: f64,
    pub epsilons: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub modulus: ModulusMode,
    pub solver: SolverOptions,
}

impl SamplingSetup {
    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.interaction.validate()?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid("h", format!("grid spacing must be positive, got {}", self.h)));
        }
        if !self.coupling.is_finite() {
            return Err(invalid("coupling", "must be finite"));
        }
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons", "need at least one half-width"));
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(invalid("epsilons", format!("every ε must lie in (0, 1), got {e}")));
        }
        if self.samples < MIN_SAMPLES {
            return Err(invalid(
                "samples",
                format!("need at least {MIN_SAMPLES} samples, got {}", self.samples),
            ));
        }
        Ok(())
    }

    fn sorted_epsilons(&self) -> Vec<f64> {
        let mut e = self.epsilons.clone();
        e.sort_by(f64::total_cmp);
        e.dedup();
        e
    }

    fn options(&self) -> AssemblyOptions {
        AssemblyOptions {
            coupling: self.coupling,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WegnerOneConfig {
    pub bx: TwoParticleBox,
    pub energy: f64,
    pub setup: SamplingSetup,
}

impl WegnerOneConfig {
    pub fn validate(&self) -> Result<()> {
        self.bx.validate()?;
        if !self.energy.is_finite() {
            return Err(invalid("energy", "must be finite"));
        }
        self.setup.validate()?;
        GridSpec::interior_nodes(&self.bx.shadow(), self.setup.h)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WegnerTwoConfig {
    pub bx: TwoParticleBox,
    pub bx_prime: TwoParticleBox,
    /// Center `b` of `J = [b − δ, b + δ]`.
    pub j_center: f64,
    /// Half-width `δ` of `J`.
    pub j_half_width: f64,
    pub setup: SamplingSetup,
}

impl WegnerTwoConfig {
    pub fn validate(&self) -> Result<()> {
        self.bx.validate()?;
        self.bx_prime.validate()?;
        if self.bx.dim() != self.bx_prime.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.bx.dim(),
                got: self.bx_prime.dim(),
            });
        }
        if !distance_condition(&self.bx, &self.bx_prime) {
            return Err(Error::Geometry(
                "boxes violate the distance condition min(|u-u'|, |S(u)-u'|) > 8 max L".into(),
            ));
        }
        if !(self.j_half_width > 0.0 && self.j_half_width.is_finite() && self.j_center.is_finite()) {
            return Err(invalid("J", "need a finite center and a positive half-width δ"));
        }
        self.setup.validate()?;
        GridSpec::interior_nodes(&self.union_shadow(), self.setup.h)?;
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.j_center - self.j_half_width, self.j_center + self.j_half_width)
    }

    fn union_shadow(&self) -> CellularSet {
        self.bx.shadow().union(&self.bx_prime.shadow())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    OneVolume,
    TwoVolume,
}

/// Result for one half-width `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub hits: usize,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Argument `4Zε` of the modulus (largest over both boxes when two).
    pub modulus_arg: f64,
    /// `μ(4Zε)`, or the larger of the two box moduli.
    pub modulus: f64,
    /// Bound with the constant set to one.
    pub rhs_unit: f64,
    /// Bound with the fitted constant.
    pub rhs: f64,
    /// `p̂ / μ`.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub estimator: Estimator,
    pub samples: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub first_failure: Option<String>,
    /// `|Λ|`.
    pub volume: f64,
    /// `|Λ′|` for the two-volume estimator.
    pub volume_prime: Option<f64>,
    /// `Ê(E + 2 + W̄)^d`, or `Ê[(b+δ+1+W̄)^d (b+δ+1+W̄′)^d]`.
    pub moment: f64,
    /// `Z_{ΠΛ}`.
    pub z: f64,
    pub z_prime: Option<f64>,
    /// Largest `p̂ / rhs_unit`; `None` when every `rhs_unit` vanishes.
    pub c_hat: Option<f64>,
    /// `p̂` is nondecreasing in `ε`.
    pub monotone: bool,
    /// With the constant calibrated at the smallest `ε`, the lower Wilson
    /// bound never exceeds the bound at any other `ε`.
    pub shape_holds: bool,
    /// Mean of `N_Λ(J)` and `N_Λ′(J)` (two-volume only).
    pub mean_level_counts: Option<(f64, f64)>,
    /// Pearson correlation of `N_Λ(J)` and `N_Λ′(J)` across samples.
    pub level_count_correlation: Option<f64>,
    pub rows: Vec<EpsilonRow>,
}

/// `c·|Λ|·moment·μ(4Zε)`.
pub fn rhs_bound_one(c: f64, volume: f64, moment: f64, modulus: f64) -> f64 {
    c * volume * moment * modulus
}

/// `c·|Λ|·|Λ′|·moment·max[μ̄(4εZ), μ̄′(4εZ′)]`.
pub fn rhs_bound_two(c: f64, volume: f64, volume_prime: f64, moment: f64, modulus_max: f64) -> f64 {
    c * volume * volume_prime * moment * modulus_max
}

/// Argument `4Zε` of the modulus.
pub fn modulus_argument(z: f64, epsilon: f64) -> f64 {
    4.0 * z * epsilon
}

/// `Z_{ΠΛ} = ‖1_{ΠΛ}‖_C` on the cells of the shadow.
pub fn shadow_normalizer(kernel: &CovarianceKernel, bx: &TwoParticleBox, h: f64) -> Result<f64> {
    let shadow = bx.shadow();
    let cells = GridSpec::cells(&shadow, h)?;
    Ok(normalizing_constant(kernel, &cells, &shadow))
}

struct OneSample {
    distance: f64,
    moment: f64,
}

struct TwoSample {
    distance: f64,
    moment: f64,
    counts: (usize, usize),
}

pub fn wegner_one(cfg: &WegnerOneConfig) -> Result<WegnerReport> {
    cfg.validate()?;
    let setup = &cfg.setup;
    let epsilons = setup.sorted_epsilons();
    let eps_max = *epsilons.last().expect("validated nonempty");
    let grid = GridSpec::interior_nodes(&cfg.bx.shadow(), setup.h)?;
    let sampler = FieldSampler::new(&setup.kernel, grid.clone())?;
    let options = setup.options();
    let d = cfg.bx.dim() as i32;

    let outcomes: Vec<Result<OneSample>> = (0..setup.samples as u64)
        .into_par_iter()
        .map(|i| {
            let v = sampler.sample_stream(setup.seed, i);
            let hd = assemble(&cfg.bx, &grid, &setup.interaction, &v, &options)?;
            let spectrum = eigensolve_covering(&hd, cfg.energy + eps_max, &setup.solver)?;
            let w_bar = sup_potential(&hd).w_bar;
            Ok(OneSample {
                distance: spectrum.distance_to(cfg.energy),
                moment: (cfg.energy + 2.0 + w_bar).powi(d),
            })
        })
        .collect();
    let (ok, failed, first_failure) = split_failures(outcomes)?;

    let z = shadow_normalizer(&setup.kernel, &cfg.bx, setup.h)?;
    let volume = cfg.bx.volume();
    let moment = ok.iter().map(|s| s.moment).sum::<f64>() / ok.len() as f64;
    let distances: Vec<f64> = ok.iter().map(|s| s.distance).collect();
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let arg = modulus_argument(z, eps);
        let mu = modulus_bar(&cfg.bx, arg, &setup.modulus)?.value;
        rows.push(row(eps, &distances, arg, mu, rhs_bound_one(1.0, volume, moment, mu)));
    }
    Ok(finish(
        WegnerReport {
            estimator: Estimator::OneVolume,
            samples: setup.samples,
            succeeded: ok.len(),
            failed,
            first_failure,
            volume,
            volume_prime: None,
            moment,
            z,
            z_prime: None,
            c_hat: None,
            monotone: false,
            shape_holds: false,
            mean_level_counts: None,
            level_count_correlation: None,
            rows,
        },
    ))
}

pub fn wegner_two(cfg: &WegnerTwoConfig) -> Result<WegnerReport> {
    cfg.validate()?;
    let setup = &cfg.setup;
    let epsilons = setup.sorted_epsilons();
    let window = cfg.window();
    let grid = GridSpec::interior_nodes(&cfg.union_shadow(), setup.h)?;
    let sampler = FieldSampler::new(&setup.kernel, grid.clone())?;
    let options = setup.options();
    let d = cfg.bx.dim() as i32;
    let base = cfg.j_center + cfg.j_half_width + 1.0;

    let outcomes: Vec<Result<TwoSample>> = (0..setup.samples as u64)
        .into_par_iter()
        .map(|i| {
            // One field on the union of both shadows drives both operators.
            let v = sampler.sample_stream(setup.seed, i);
            let a = assemble(&cfg.bx, &grid, &setup.interaction, &v, &options)?;
            let b = assemble(&cfg.bx_prime, &grid, &setup.interaction, &v, &options)?;
            let sa = eigensolve_covering(&a, window.1, &setup.solver)?;
            let sb = eigensolve_covering(&b, window.1, &setup.solver)?;
            let wa = sup_potential(&a).w_bar;
            let wb = sup_potential(&b).w_bar;
            Ok(TwoSample {
                distance: spectral_distance(&sa, &sb, window)?,
                moment: (base + wa).powi(d) * (base + wb).powi(d),
                counts: (
                    count_in_window(&sa, window.0, window.1)?,
                    count_in_window(&sb, window.0, window.1)?,
                ),
            })
        })
        .collect();
    let (ok, failed, first_failure) = split_failures(outcomes)?;

    let z = shadow_normalizer(&setup.kernel, &cfg.bx, setup.h)?;
    let z_prime = shadow_normalizer(&setup.kernel, &cfg.bx_prime, setup.h)?;
    let volume = cfg.bx.volume();
    let volume_prime = cfg.bx_prime.volume();
    let n = ok.len() as f64;
    let moment = ok.iter().map(|s| s.moment).sum::<f64>() / n;
    let distances: Vec<f64> = ok.iter().map(|s| s.distance).collect();
    let counts_a: Vec<f64> = ok.iter().map(|s| s.counts.0 as f64).collect();
    let counts_b: Vec<f64> = ok.iter().map(|s| s.counts.1 as f64).collect();

    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in &epsilons {
        let arg_a = modulus_argument(z, eps);
        let arg_b = modulus_argument(z_prime, eps);
        let mu_a = modulus_bar(&cfg.bx, arg_a, &setup.modulus)?.value;
        let mu_b = modulus_bar(&cfg.bx_prime, arg_b, &setup.modulus)?.value;
        let mu = mu_a.max(mu_b);
        let rhs_unit = rhs_bound_two(1.0, volume, volume_prime, moment, mu);
        rows.push(row(eps, &distances, arg_a.max(arg_b), mu, rhs_unit));
    }
    Ok(finish(WegnerReport {
        estimator: Estimator::TwoVolume,
        samples: setup.samples,
        succeeded: ok.len(),
        failed,
        first_failure,
        volume,
        volume_prime: Some(volume_prime),
        moment,
        z,
        z_prime: Some(z_prime),
        c_hat: None,
        monotone: false,
        shape_holds: false,
        mean_level_counts: Some((
            counts_a.iter().sum::<f64>() / n,
            counts_b.iter().sum::<f64>() / n,
        )),
        level_count_correlation: Some(pearson(&counts_a, &counts_b)),
        rows,
    }))
}

/// Separates failed samples, aborting when more than 1% failed.
fn split_failures<T>(outcomes: Vec<Result<T>>) -> Result<(Vec<T>, usize, Option<String>)> {
    let total = outcomes.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = 0;
    let mut first = None;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(s) => ok.push(s),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| format!("sample {i}: {e}"));
            }
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * total as f64 || ok.is_empty() {
        return Err(Error::TooManyFailures {
            failed,
            total,
            first: first.unwrap_or_default(),
        });
    }
    Ok((ok, failed, first))
}

fn row(epsilon: f64, distances: &[f64], modulus_arg: f64, modulus: f64, rhs_unit: f64) -> EpsilonRow {
    let hits = distances.iter().filter(|&&d| d <= epsilon).count();
    let n = distances.len();
    let p_hat = hits as f64 / n as f64;
    let (ci_lo, ci_hi) = wilson_interval(hits, n);
    EpsilonRow {
        epsilon,
        hits,
        p_hat,
        ci_lo,
        ci_hi,
        modulus_arg,
        modulus,
        rhs_unit,
        rhs: 0.0,
        slope: if modulus > 0.0 { p_hat / modulus } else { f64::INFINITY },
    }
}

/// Fits the constant and fills in the derived checks.
fn finish(mut report: WegnerReport) -> WegnerReport {
    let rows = &mut report.rows;
    report.c_hat = rows
        .iter()
        .filter(|r| r.rhs_unit > 0.0)
        .map(|r| r.p_hat / r.rhs_unit)
        .reduce(f64::max);
    let c = report.c_hat.unwrap_or(0.0);
    for r in rows.iter_mut() {
        r.rhs = c * r.rhs_unit;
        if !r.slope.is_finite() {
            r.slope = 0.0;
        }
    }
    report.monotone = rows.windows(2).all(|w| w[0].p_hat <= w[1].p_hat);
    report.shape_holds = match rows.first() {
        Some(cal) if cal.rhs_unit > 0.0 => {
            let c_cal = cal.p_hat / cal.rhs_unit;
            rows.iter().all(|r| r.ci_lo <= c_cal * r.rhs_unit * (1.0 + 1e-12))
        }
        _ => false,
    };
    report
}
