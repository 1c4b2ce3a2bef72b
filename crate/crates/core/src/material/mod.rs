//! Energy densities, their quadratic forms, and hypothesis validation.

pub mod density;
pub mod hessian;
pub mod layout;
pub mod validate;

pub use density::{
    compression_barrier, dist_so3, reference_density_d1, reference_density_d2, DensityKind,
    DensitySpec, LawParams, MaterialLaw,
};
pub use hessian::{extract_q_by_hessian, HessianExtraction};
pub use layout::PhaseLayout;
pub use validate::{validate_hypotheses, CheckResult, HypothesisReport};
