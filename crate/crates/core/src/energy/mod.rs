//! The energy functionals, the deformation algebra and admissibility checks.

pub mod deformation;
pub mod functionals;
pub mod stray;

pub use deformation::{
    build_deformation, check_admissibility, AdmissibilityReport, BoundaryDatum, DeformationState,
    Scaling, DEFAULT_C_DOMAIN,
};
pub use functionals::{
    elastic_term_g, f_eps, f_eps_delta, f_hom, g_eps, g_lin, Domain, EnergyBreakdown, Functional,
};
pub use stray::StrayModel;
