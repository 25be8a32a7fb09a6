//! Profiles of the averaged-density law (M1).

use super::{
    assemble, check_multiplicity, family, homogeneous, march_range, sup_defect, M1Node, MarchStats,
    Profile, ProfileProblem, SolverParams,
};
use crate::error::{Error, Result};
use crate::model::{Kernel, KernelMoments, Model, Multiplicity, RoadCondition, VelocityModel};
use crate::nonlocal::GridFunction;
use crate::roots::RootOptions;

fn check_model(problem: &ProfileProblem) -> Result<()> {
    if problem.model != Model::M1 {
        return Err(Error::UnsupportedCase {
            case: problem.case.label.to_string(),
        });
    }
    Ok(())
}

/// The constant-road profile `W`, increasing from the conjugate of `rho+`
/// to `rho+` on `[-L, L]` and normalized so that `W(0)` is the midpoint of
/// the two asymptotes.
pub fn build_homogeneous_profile(
    kappa: f64,
    rho_plus: f64,
    v: &VelocityModel,
    kernel: &Kernel,
    dx: f64,
    domain_len: f64,
) -> Result<Profile> {
    let cond = RoadCondition::new(kappa, kappa)?;
    let moments = kernel.cell_moments(dx)?;
    let eq = M1Node {
        m: &moments,
        v: *v,
        fbar: kappa * rho_plus * v.eval(rho_plus),
        opts: SolverParams::new(dx).newton,
    };
    homogeneous(Model::M1, &cond, rho_plus, v, &moments, domain_len, &eq)
}

/// Solves nodes `first, first - 1, ..., 0` of `grid` for
/// `kappa(x_i) Q_i v(A(Q; x_i)) = fbar`, each from its right neighbour.
/// Everything right of `first` (plus the right padding) is the seed. When
/// node `x = 0` is solved its left trace is set to `kappa+ Q(0+) / kappa-`.
pub fn march_backward(
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
    let eq = M1Node {
        m: moments,
        v: *v,
        fbar,
        opts,
    };
    march_range(grid, first, 0, cond, &eq, true)
}

/// One member of an A1 or B1 family, parameterized by `Q(0+)`.
pub fn build_profile(
    problem: &ProfileProblem,
    trace: f64,
    params: &SolverParams,
) -> Result<Profile> {
    check_model(problem)?;
    check_multiplicity(problem, Multiplicity::Infinite)?;
    problem.check_trace(trace)?;
    let moments = problem.kernel.cell_moments(params.dx)?;
    let eq = M1Node {
        m: &moments,
        v: problem.velocity,
        fbar: problem.fbar,
        opts: params.newton,
    };
    assemble(problem, trace, problem.constant_right(trace), params, &eq)
}

/// A1/B1 profiles for each trace, computed concurrently and sorted by trace.
pub fn build_profile_family(
    problem: &ProfileProblem,
    traces: &[f64],
    params: &SolverParams,
) -> Result<Vec<Profile>> {
    check_model(problem)?;
    check_multiplicity(problem, Multiplicity::Infinite)?;
    for &t in traces {
        problem.check_trace(t)?;
    }
    family(traces, |t| build_profile(problem, t, params))
}

/// The unique profile of case A2 (or B2): `rho+` on `x > 0`, the connecting
/// jump at `0`, marched on `x < 0`.
pub fn build_unique_profile_a2(problem: &ProfileProblem, params: &SolverParams) -> Result<Profile> {
    check_model(problem)?;
    check_multiplicity(problem, Multiplicity::Unique)?;
    let moments = problem.kernel.cell_moments(params.dx)?;
    let eq = M1Node {
        m: &moments,
        v: problem.velocity,
        fbar: problem.fbar,
        opts: params.newton,
    };
    assemble(problem, problem.rho_plus, true, params, &eq)
}

/// `max |kappa(x_i) Q_i v(A(Q; x_i)) - fbar|` over the nodes of
/// `[x_min, x_max]`. At `x = 0` the right trace is used together with
/// `kappa+`, which equals the left-trace form by the connecting condition.
pub fn residual(
    profile: &Profile,
    cond: &RoadCondition,
    v: &VelocityModel,
    kernel: &Kernel,
) -> Result<f64> {
    let moments = kernel.cell_moments(profile.dx())?;
    let eq = M1Node {
        m: &moments,
        v: *v,
        fbar: profile.fbar,
        opts: RootOptions::default(),
    };
    sup_defect(&profile.grid, profile.last_index(), cond, &eq)
}

/// Strict local maxima `(x, Q)` with `x < below_x` and `Q > floor`, in
/// increasing `x`. Plateaus count once, at their right end.
pub fn local_maxima(profile: &Profile, below_x: f64, floor: f64) -> Vec<(f64, f64)> {
    let g = &profile.grid;
    let z = profile.zero_index();
    let vals = profile.left_values();
    let mut out = Vec::new();
    for i in 1..vals.len() - 1 {
        let x = if i == z { 0.0 } else { g.x(i) };
        if x >= below_x {
            break;
        }
        if vals[i] > vals[i - 1] && vals[i] > vals[i + 1] && vals[i] > floor {
            out.push((x, vals[i]));
        }
    }
    out
}
