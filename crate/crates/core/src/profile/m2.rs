//! Profiles of the averaged-velocity law (M2). These are continuous at
//! `x = 0` but their slope jumps there.

use super::{
    assemble, check_multiplicity, family, homogeneous, march_range, sup_defect, M2Node, MarchStats,
    Profile, ProfileProblem, SolverParams,
};
use crate::error::{Error, Result};
use crate::model::{Kernel, KernelMoments, Model, Multiplicity, RoadCondition, VelocityModel};
use crate::nonlocal::{average_velocity_m2, GridFunction};
use crate::roots::RootOptions;

fn check_model(problem: &ProfileProblem) -> Result<()> {
    if problem.model != Model::M2 {
        return Err(Error::UnsupportedCase {
            case: problem.case.label.to_string(),
        });
    }
    Ok(())
}

fn node<'a>(problem: &ProfileProblem, moments: &'a KernelMoments, opts: RootOptions) -> M2Node<'a> {
    M2Node {
        m: moments,
        cond: problem.cond,
        v: problem.velocity,
        fbar: problem.fbar,
        opts,
    }
}

/// The constant-road profile for (M2), solving `P(x) kappa int v(P) w = fbar`.
/// Coincides with the (M1) one only when `v` is affine.
pub fn build_homogeneous_profile_m2(
    kappa: f64,
    rho_plus: f64,
    v: &VelocityModel,
    kernel: &Kernel,
    dx: f64,
    domain_len: f64,
) -> Result<Profile> {
    let cond = RoadCondition::new(kappa, kappa)?;
    let moments = kernel.cell_moments(dx)?;
    let eq = M2Node {
        m: &moments,
        cond,
        v: *v,
        fbar: kappa * rho_plus * v.eval(rho_plus),
        opts: SolverParams::new(dx).newton,
    };
    homogeneous(Model::M2, &cond, rho_plus, v, &moments, domain_len, &eq)
}

/// Solves nodes `first, ..., 0` of `grid` for `P_i V(x_i) = fbar`, where the
/// first cell of the window depends on the unknown `P_i`.
pub fn march_backward_m2(
    grid: &mut GridFunction,
    first: usize,
    fbar: f64,
    cond: &RoadCondition,
    v: &VelocityModel,
    moments: &KernelMoments,
    opts: RootOptions,
) -> Result<MarchStats> {
    if first >= grid.len() {
        return Err(Error::WindowOutOfRange { index: first });
    }
    if grid.left_trace_at_zero.is_some() {
        return Err(Error::InvalidInput(
            "(M2) profiles are continuous; drop the trace".into(),
        ));
    }
    let eq = M2Node {
        m: moments,
        cond: *cond,
        v: *v,
        fbar,
        opts,
    };
    march_range(grid, first, 0, cond, &eq, true)
}

/// One member of a C1 or D1 family, parameterized by `P(0)`.
pub fn build_profile_m2(
    problem: &ProfileProblem,
    trace: f64,
    params: &SolverParams,
) -> Result<Profile> {
    check_model(problem)?;
    check_multiplicity(problem, Multiplicity::Infinite)?;
    problem.check_trace(trace)?;
    let moments = problem.kernel.cell_moments(params.dx)?;
    let eq = node(problem, &moments, params.newton);
    assemble(problem, trace, problem.constant_right(trace), params, &eq)
}

pub fn build_profile_family_m2(
    problem: &ProfileProblem,
    traces: &[f64],
    params: &SolverParams,
) -> Result<Vec<Profile>> {
    check_model(problem)?;
    check_multiplicity(problem, Multiplicity::Infinite)?;
    for &t in traces {
        problem.check_trace(t)?;
    }
    family(traces, |t| build_profile_m2(problem, t, params))
}

/// The unique C2/D2 profile, constant `rho+` on `x >= 0`.
pub fn build_unique_profile_m2(problem: &ProfileProblem, params: &SolverParams) -> Result<Profile> {
    check_model(problem)?;
    check_multiplicity(problem, Multiplicity::Unique)?;
    let moments = problem.kernel.cell_moments(params.dx)?;
    let eq = node(problem, &moments, params.newton);
    assemble(problem, problem.rho_plus, true, params, &eq)
}

/// `max |P_i V(x_i) - fbar|` over the nodes of `[x_min, x_max]`.
pub fn residual_m2(
    profile: &Profile,
    cond: &RoadCondition,
    v: &VelocityModel,
    kernel: &Kernel,
) -> Result<f64> {
    let moments = kernel.cell_moments(profile.dx())?;
    let eq = M2Node {
        m: &moments,
        cond: *cond,
        v: *v,
        fbar: profile.fbar,
        opts: RootOptions::default(),
    };
    sup_defect(&profile.grid, profile.last_index(), cond, &eq)
}

/// Observed and predicted slope jump of an (M2) profile at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinkReport {
    pub left_slope: f64,
    pub right_slope: f64,
    pub predicted_jump: f64,
    pub observed_jump: f64,
    pub relative_error: f64,
}

/// Compares `P'(0+) - P'(0-)` with `(kappa+ - kappa-) P(0) v(P(0)) w(0) / V(0)`.
/// Slopes use three-point one-sided differences.
pub fn kink_certificate(
    profile: &Profile,
    cond: &RoadCondition,
    v: &VelocityModel,
    kernel: &Kernel,
) -> Result<KinkReport> {
    let g = &profile.grid;
    let z = profile.zero_index();
    if z < 2 || z + 2 >= g.len() {
        return Err(Error::InvalidInput("x = 0 must be an interior node".into()));
    }
    let dx = g.dx;
    let p = &g.values;
    let left_slope = (3.0 * p[z] - 4.0 * p[z - 1] + p[z - 2]) / (2.0 * dx);
    let right_slope = (-3.0 * p[z] + 4.0 * p[z + 1] - p[z + 2]) / (2.0 * dx);
    let moments = kernel.cell_moments(dx)?;
    let p0 = p[z];
    let vel = average_velocity_m2(g, z, &moments, cond, v)?;
    let predicted = (cond.kappa_plus - cond.kappa_minus) * p0 / vel * v.eval(p0) * kernel.eval(0.0);
    let observed = right_slope - left_slope;
    let report = KinkReport {
        left_slope,
        right_slope,
        predicted_jump: predicted,
        observed_jump: observed,
        relative_error: (observed - predicted).abs() / predicted.abs(),
    };
    if predicted.abs() < 1e-14 {
        return Err(Error::DegenerateKink { predicted });
    }
    Ok(report)
}
