//! Stationary traveling-wave profiles and Cauchy-problem simulation for
//! nonlocal traffic-flow conservation laws on a road whose speed limit
//! jumps at `x = 0`.
//!
//! Two laws are covered. In (M1) the velocity is `kappa(x) v(A)` with `A`
//! a downstream weighted average of the density; in (M2) it is the
//! downstream weighted average of `kappa v(rho)`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod nonlocal;
pub mod profile;
pub mod roots;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    classify, conjugate_density, flux, solve_flux_level, stagnation_point, CaseLabel, CaseLetter,
    CaseTag, FluxLevelSet, Kernel, KernelMoments, KernelShape, Model, Multiplicity, RoadCondition,
    VelocityLaw, VelocityModel, DEFAULT_CLASSIFY_TOL,
};
pub use nonlocal::{average_density, average_derivative, average_velocity_m2, GridFunction};
pub use profile::{
    build_homogeneous_profile, build_homogeneous_profile_m2, build_profile, build_profile_family,
    build_profile_family_m2, build_profile_m2, build_unique_profile_a2, build_unique_profile_m2,
    critical_trace, family_min_gap, kink_certificate, local_maxima, residual, residual_m2,
    KinkReport, MarchStats, Profile, ProfileProblem, SolverParams, TraceRange,
};
pub use simulator::{
    add_bump, persistence_metric, phi_map, profile_initial, relax_family, riemann_initial,
    sup_difference, Candidate, ConvergenceDiagnostic, FamilyTable, PhiOptions, RunOutput, Scheme,
    SimGrid, SimState, StepReport, Stepper,
};
