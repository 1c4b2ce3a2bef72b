//! Recovery sequences, ε- and δ-sweeps, commutativity and two-scale checks.

pub mod recovery;
pub mod scenario;
pub mod sweep;
pub mod two_scale;

pub use recovery::{
    build_recovery_pair, commensurate_cell, CorrectorBank, RecoveryOptions, RecoveryPair,
    MIN_CELL_SAMPLES,
};
pub use scenario::{
    compose_macro, sample_macro, AffineGreatCircle, MacroFields, SampledMacro, Scenario,
    ScenarioId, SCENARIO_GRADIENT,
};
pub use sweep::{
    commute_check, eps_from_denominators, fit_loglog, g_lin_sweep, gamma_sweep,
    linearization_sweep, richardson, CommuteReport, Experiment, ExperimentSetup, StrayParams,
    SweepResult, SweepRow,
};
pub use two_scale::{
    product_check, recovery_chain_check, riemann_lebesgue_check, two_scale_pairing, SeparableTest,
    TestTerm, TwoScaleCheck,
};
