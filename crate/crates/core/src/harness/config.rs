//! Experiment configuration files (TOML) and their fail-fast validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TwoParticleBox;
use crate::grid::GridSpec;
use crate::hamiltonian::InteractionPotential;
use crate::kernel_field::{CovarianceKernel, EmpiricalModulus, KernelSpace, ModulusMode};
use crate::spectral::SolverOptions;
use crate::wegner::{SamplingSetup, WegnerOneConfig, WegnerTwoConfig, MIN_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    OneVolume,
    TwoVolume,
    FieldDiagnostics,
    GeometryCheck,
    Modulus,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OneVolume => "one-volume",
            Self::TwoVolume => "two-volume",
            Self::FieldDiagnostics => "field-diagnostics",
            Self::GeometryCheck => "geometry-check",
            Self::Modulus => "modulus",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(rename = "box")]
    pub bx: TwoParticleBox,
    #[serde(default, rename = "box_prime")]
    pub bx_prime: Option<TwoParticleBox>,
}

/// Energy interval `J = [center − half_width, center + half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulusKind {
    #[default]
    ClosedForm,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSection {
    #[serde(default)]
    pub mode: ModulusKind,
    /// Window widths for the `modulus` estimator.
    #[serde(default)]
    pub b: Vec<f64>,
    #[serde(default = "default_outer")]
    pub n_outer: usize,
    #[serde(default = "default_inner")]
    pub n_inner: usize,
    /// Companion boxes standing in for the supremum in empirical mode.
    #[serde(default)]
    pub probes: Vec<TwoParticleBox>,
}

fn default_outer() -> usize {
    200
}

fn default_inner() -> usize {
    10_000
}

impl Default for ModulusSection {
    fn default() -> Self {
        Self {
            mode: ModulusKind::default(),
            b: Vec::new(),
            n_outer: default_outer(),
            n_inner: default_inner(),
            probes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryCheckSection {
    pub trials: usize,
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_max_l")]
    pub max_half_side: f64,
    /// Cube centers are drawn in a ball of radius `radius_factor · max_half_side`.
    #[serde(default = "default_radius_factor")]
    pub radius_factor: f64,
}

fn default_dims() -> Vec<usize> {
    vec![1]
}

fn default_max_l() -> f64 {
    1.0
}

fn default_radius_factor() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Number of leading orthonormal coefficients examined.
    #[serde(default = "default_coefficients")]
    pub coefficients: usize,
}

fn default_coefficients() -> usize {
    5
}

fn default_coupling() -> f64 {
    1.0
}

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub estimator: EstimatorKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub energy: Option<f64>,
    #[serde(default)]
    pub geometry: Option<GeometrySection>,
    #[serde(default)]
    pub window: Option<WindowSection>,
    #[serde(default)]
    pub kernel: Option<CovarianceKernel>,
    #[serde(default)]
    pub interaction: Option<InteractionPotential>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub modulus: ModulusSection,
    #[serde(default)]
    pub geometry_check: Option<GeometryCheckSection>,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsSection>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }
}

/// Validated, ready-to-run form of a config.
#[derive(Debug, Clone)]
pub enum Plan {
    OneVolume(WegnerOneConfig),
    TwoVolume(WegnerTwoConfig),
    FieldDiagnostics {
        kernel: CovarianceKernel,
        bx: TwoParticleBox,
        h: f64,
        samples: usize,
        seed: u64,
        coefficients: usize,
    },
    GeometryCheck {
        section: GeometryCheckSection,
        seed: u64,
    },
    Modulus {
        kernel: CovarianceKernel,
        bx: TwoParticleBox,
        bx_prime: Option<TwoParticleBox>,
        h: f64,
        b: Vec<f64>,
        n_outer: usize,
        n_inner: usize,
        seed: u64,
    },
}

fn missing(field: &str, estimator: EstimatorKind) -> Error {
    Error::Config(format!("`{field}` is required by the {} estimator", estimator.name()))
}

/// Checks every precondition of the selected estimator before any sampling.
pub fn plan(cfg: &ExperimentConfig) -> Result<Plan> {
    let kind = cfg.estimator;
    if cfg.workers == Some(0) {
        return Err(Error::Config("`workers` must be at least 1".into()));
    }
    if kind == EstimatorKind::GeometryCheck {
        let section = cfg.geometry_check.clone().ok_or_else(|| missing("geometry_check", kind))?;
        if section.trials == 0 {
            return Err(Error::Config("`geometry_check.trials` must be positive".into()));
        }
        if section.dims.is_empty() || section.dims.iter().any(|&d| d == 0 || d > 3) {
            return Err(Error::Config("`geometry_check.dims` must list dimensions in 1..=3".into()));
        }
        if !(section.max_half_side > 0.0 && section.radius_factor >= crate::geometry::SEPARATION_FACTOR) {
            return Err(Error::Config(
                "`geometry_check` needs max_half_side > 0 and radius_factor >= 8 (smaller balls almost never hold a separated pair)"
                    .into(),
            ));
        }
        return Ok(Plan::GeometryCheck {
            section,
            seed: cfg.seed,
        });
    }

    let geometry = cfg.geometry.as_ref().ok_or_else(|| missing("geometry", kind))?;
    geometry.bx.validate()?;
    let kernel = cfg.kernel.ok_or_else(|| missing("kernel", kind))?;
    kernel.validate()?;
    let h = cfg.h.ok_or_else(|| missing("h", kind))?;
    // Tiling and positive definiteness on the cells of the shadow.
    let cells = GridSpec::cells(&geometry.bx.shadow(), h)?;
    KernelSpace::assemble(&kernel, cells)?;
    if let Some(bp) = &geometry.bx_prime {
        bp.validate()?;
        KernelSpace::assemble(&kernel, GridSpec::cells(&bp.shadow(), h)?)?;
    }
    let samples = || -> Result<usize> {
        let n = cfg.samples.ok_or_else(|| missing("samples", kind))?;
        if n < MIN_SAMPLES {
            return Err(Error::Config(format!("`samples` must be at least {MIN_SAMPLES}, got {n}")));
        }
        Ok(n)
    };

    match kind {
        EstimatorKind::OneVolume | EstimatorKind::TwoVolume => {
            let modulus = match cfg.modulus.mode {
                ModulusKind::ClosedForm => ModulusMode::ClosedFormGaussian,
                ModulusKind::Empirical => {
                    if cfg.modulus.probes.is_empty() {
                        return Err(Error::Config("empirical modulus needs `modulus.probes`".into()));
                    }
                    ModulusMode::Empirical(EmpiricalModulus {
                        kernel,
                        h,
                        probes: cfg.modulus.probes.clone(),
                        n_outer: cfg.modulus.n_outer,
                        n_inner: cfg.modulus.n_inner,
                        seed: cfg.seed,
                    })
                }
            };
            let setup = SamplingSetup {
                kernel,
                interaction: cfg.interaction.clone().unwrap_or_else(InteractionPotential::none),
                h,
                coupling: cfg.coupling,
                epsilons: cfg.epsilons.clone(),
                samples: samples()?,
                seed: cfg.seed,
                modulus,
                solver: cfg.solver.clone(),
            };
            if kind == EstimatorKind::OneVolume {
                let c = WegnerOneConfig {
                    bx: geometry.bx.clone(),
                    energy: cfg.energy.ok_or_else(|| missing("energy", kind))?,
                    setup,
                };
                c.validate()?;
                Ok(Plan::OneVolume(c))
            } else {
                let window = cfg.window.as_ref().ok_or_else(|| missing("window", kind))?;
                let c = WegnerTwoConfig {
                    bx: geometry.bx.clone(),
                    bx_prime: geometry.bx_prime.clone().ok_or_else(|| missing("geometry.box_prime", kind))?,
                    j_center: window.center,
                    j_half_width: window.half_width,
                    setup,
                };
                c.validate()?;
                Ok(Plan::TwoVolume(c))
            }
        }
        EstimatorKind::FieldDiagnostics => {
            let coefficients = cfg.diagnostics.as_ref().map_or(5, |d| d.coefficients);
            if coefficients == 0 {
                return Err(Error::Config("`diagnostics.coefficients` must be positive".into()));
            }
            Ok(Plan::FieldDiagnostics {
                kernel,
                bx: geometry.bx.clone(),
                h,
                samples: samples()?,
                seed: cfg.seed,
                coefficients,
            })
        }
        EstimatorKind::Modulus => {
            let m = &cfg.modulus;
            if m.b.is_empty() || m.b.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
                return Err(Error::Config("`modulus.b` must list nonnegative window widths".into()));
            }
            if m.n_outer == 0 || m.n_inner < crate::kernel_field::modulus::MIN_INNER {
                return Err(Error::Config(format!(
                    "`modulus` needs n_outer >= 1 and n_inner >= {}",
                    crate::kernel_field::modulus::MIN_INNER
                )));
            }
            if let Some(bp) = &geometry.bx_prime {
                if crate::geometry::set_distance(&geometry.bx.shadow(), &bp.shadow()) <= 0.0 {
                    return Err(Error::Config("modulus conditioning shadows must be disjoint".into()));
                }
            }
            Ok(Plan::Modulus {
                kernel,
                bx: geometry.bx.clone(),
                bx_prime: geometry.bx_prime.clone(),
                h,
                b: m.b.clone(),
                n_outer: m.n_outer,
                n_inner: m.n_inner,
                seed: cfg.seed,
            })
        }
        EstimatorKind::GeometryCheck => unreachable!("handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"
estimator = "one-volume"
seed = 3
samples = 200
h = 0.25
energy = 5.0
epsilons = [0.05, 0.1]

[geometry.box]
center1 = [0.0]
L1 = 1.0
center2 = [0.0]
L2 = 1.0

[kernel]
family = "exponential"
scale = 1.0
length = 0.5

[interaction]
r1 = 0.5
profile = "square"
amplitude = 1.0
"#;

    #[test]
    fn parses_and_plans() {
        let cfg = ExperimentConfig::from_toml(ONE).unwrap();
        assert_eq!(cfg.estimator, EstimatorKind::OneVolume);
        assert_eq!(cfg.solver, SolverOptions::default());
        let Plan::OneVolume(c) = plan(&cfg).unwrap() else {
            panic!("wrong plan")
        };
        assert_eq!(c.setup.samples, 200);
        assert_eq!(c.setup.interaction, InteractionPotential::square(1.0, 0.5));
        // Round trip through TOML.
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = ExperimentConfig::from_toml(&ONE.replace("energy", "energie")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("energie"), "{msg}");
    }

    #[test]
    fn preconditions_are_checked_before_running() {
        let bad_eps = ONE.replace("[0.05, 0.1]", "[0.05, 1.5]");
        let err = plan(&ExperimentConfig::from_toml(&bad_eps).unwrap()).unwrap_err();
        assert!(err.to_string().contains("epsilons"), "{err}");

        let bad_h = ONE.replace("h = 0.25", "h = 0.3");
        assert!(matches!(
            plan(&ExperimentConfig::from_toml(&bad_h).unwrap()),
            Err(Error::NonTilingGrid(_))
        ));

        let no_energy = ONE.replace("energy = 5.0\n", "");
        let err = plan(&ExperimentConfig::from_toml(&no_energy).unwrap()).unwrap_err();
        assert!(err.to_string().contains("energy"), "{err}");

        let not_pd = ONE
            .replace("\"exponential\"", "\"squared_exponential\"")
            .replace("length = 0.5", "length = 20.0")
            .replace("h = 0.25", "h = 0.03125");
        assert!(matches!(
            plan(&ExperimentConfig::from_toml(&not_pd).unwrap()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn two_volume_requires_separation() {
        let text = ONE.replace("one-volume", "two-volume")
            + "\n[geometry.box_prime]\ncenter1 = [4.0]\nL1 = 1.0\ncenter2 = [4.0]\nL2 = 1.0\n\n[window]\ncenter = 5.0\nhalf_width = 1.0\n";
        let err = plan(&ExperimentConfig::from_toml(&text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)), "{err}");
        let ok = text.replace("[4.0]", "[20.0]");
        assert!(matches!(plan(&ExperimentConfig::from_toml(&ok).unwrap()), Ok(Plan::TwoVolume(_))));
    }
}
