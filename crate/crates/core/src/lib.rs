//! Numerical laboratory for two interacting particles in a continuum random
//! field.
//!
//! The pieces, bottom up:
//!
//! - [`geometry`]: cubes, two-particle boxes, shadows and the separation
//!   classification of distant box pairs.
//! - [`grid`]: lattice point sets carried by unions of cubes.
//! - [`kernel_field`]: covariance kernels, the kernel inner-product space,
//!   Gaussian sampling, ground-level decomposition and continuity moduli.
//! - [`hamiltonian`]: the finite-difference two-particle operator.
//! - [`spectral`]: eigenvalues, window counts and spectral distances.
//! - [`wegner`]: Monte Carlo eigenvalue-concentration estimators.
//! - [`harness`]: configs, orchestration and on-disk artifacts.

// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod grid;
pub mod hamiltonian;
pub mod harness;
pub mod kernel_field;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod wegner;

pub use error::{Error, Result};
pub use geometry::{
    classify_separation, distance_condition, CellularSet, Cube, PartialCase, SeparationVerdict,
    TwoParticleBox,
};
pub use grid::{GridKind, GridSpec};
pub use hamiltonian::{
    assemble, swap_operator, AssemblyOptions, DiscreteHamiltonian, InteractionPotential,
    InteractionProfile,
};
pub use harness::{ExperimentConfig, RunManifest, RunOptions};
pub use kernel_field::{CovarianceKernel, FieldSample, FieldSampler, KernelFamily, KernelSpace, ModulusMode};
pub use rng::{derive_stream, SampleRng};
pub use spectral::{eigensolve, EigenCount, SolverOptions, Spectrum};
pub use wegner::{wegner_one, wegner_two, WegnerOneConfig, WegnerReport, WegnerTwoConfig};
