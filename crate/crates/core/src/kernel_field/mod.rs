//! Covariance kernels, the discretized space `L²_C(A)`, Gaussian field
//! sampling, ground-level decomposition and continuity moduli.

mod decompose;
mod kernel;
pub mod modulus;
mod sampler;
mod space;

pub use decompose::{decompose, regression_profile, Decomposition};
pub use kernel::{CovarianceKernel, KernelFamily};
pub use modulus::{
    modulus_bar, modulus_empirical, ConditionalLaw, EmpiricalModulus, GaussianConditional,
    LeadingChoice, ModulusBar, ModulusEstimate, ModulusMode,
};
pub use sampler::{coefficient, coefficients, sup_field, FieldSample, FieldSampler};
pub use space::{covariance_matrix, normalizing_constant, KernelSpace};
