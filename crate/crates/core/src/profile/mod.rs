//! Stationary profiles.
//!
//! A profile is built right to left. On `x >= 0` the road is homogeneous and
//! the profile is either a constant or a shifted homogeneous wave through a
//! prescribed value at `x = 0`. The wave is obtained by seeding a short
//! window far to the right with the decaying linear mode around `rho+` and
//! shooting on its amplitude, so every node left of the seed satisfies the
//! discrete stationary equation exactly. The part on `x < 0` is then
//! marched node by node.

mod m1;
mod m2;

use std::cmp::Ordering;

pub use m1::{
    build_homogeneous_profile, build_profile, build_profile_family, build_unique_profile_a2,
    local_maxima, march_backward, residual,
};
pub use m2::{
    build_homogeneous_profile_m2, build_profile_family_m2, build_profile_m2,
    build_unique_profile_m2, kink_certificate, march_backward_m2, residual_m2, KinkReport,
};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    classify, solve_flux_level, CaseLabel, CaseTag, FluxLevelSet, Kernel, KernelMoments, Model,
    Multiplicity, RoadCondition, VelocityModel, DEFAULT_CLASSIFY_TOL,
};
use crate::nonlocal::{density_window, velocity_cell, velocity_window_rest, GridFunction};
use crate::roots::{illinois, newton_bisect, Root, RootOptions};

/// Rounding allowance for monotonicity checks: far from the jump the
/// profile sits on its asymptote to the last bit.
pub const MONOTONE_SLACK: f64 = 1e-14;

/// Counters collected while marching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchStats {
    pub nodes: usize,
    pub newton_iterations: usize,
    pub bisection_fallbacks: usize,
    /// Smallest derivative of the node equation at an accepted root.
    pub min_slope: f64,
}

impl Default for MarchStats {
    fn default() -> Self {
        Self {
            nodes: 0,
            newton_iterations: 0,
            bisection_fallbacks: 0,
            min_slope: f64::INFINITY,
        }
    }
}

impl MarchStats {
    fn record(&mut self, root: &Root) {
        self.nodes += 1;
        self.newton_iterations += root.iterations;
        self.bisection_fallbacks += root.bisections;
        self.min_slope = self.min_slope.min(root.dfx);
    }

    fn merge(&mut self, other: &MarchStats) {
        self.nodes += other.nodes;
        self.newton_iterations += other.newton_iterations;
        self.bisection_fallbacks += other.bisection_fallbacks;
        self.min_slope = self.min_slope.min(other.min_slope);
    }
}

/// Discretization and solver settings shared by all profile builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub dx: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub newton: RootOptions,
    /// Largest seed amplitude, relative to the width of the homogeneous wave.
    pub seed_scale: f64,
}

impl SolverParams {
    pub fn new(dx: f64) -> Self {
        Self {
            dx,
            x_min: -3.0,
            x_max: 3.0,
            newton: RootOptions::new(1e-15, 1e-15, 60),
            seed_scale: 1e-5,
        }
    }

    pub fn with_domain(mut self, x_min: f64, x_max: f64) -> Self {
        self.x_min = x_min;
        self.x_max = x_max;
        self
    }

    fn validate(&self, kernel: &Kernel) -> Result<usize> {
        let n = kernel.cells_per_horizon(self.dx)?;
        if !(self.x_min < 0.0 && self.x_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "profile domain [{}, {}] must contain x = 0 in its interior",
                self.x_min, self.x_max
            )));
        }
        Ok(n)
    }

    /// Number of nodes strictly left of `x = 0`; `x_min` is snapped onto the grid.
    fn left_nodes(&self) -> usize {
        ((-self.x_min / self.dx).round() as usize).max(1)
    }

    fn right_nodes(&self) -> usize {
        ((self.x_max / self.dx).round() as usize).max(1)
    }
}

/// Admissible values of the trace at `x = 0+` (M1) or `x = 0` (M2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl TraceRange {
    pub fn contains(&self, t: f64) -> bool {
        let above = if self.lo_closed {
            t >= self.lo
        } else {
            t > self.lo
        };
        let below = if self.hi_closed {
            t <= self.hi
        } else {
            t < self.hi
        };
        above && below
    }

    /// `n` evenly spaced traces inside the range, ending at a closed endpoint
    /// when there is one.
    pub fn spread(&self, n: usize) -> Vec<f64> {
        let span = self.hi - self.lo;
        match (self.lo_closed, self.hi_closed) {
            (_, true) => (1..=n)
                .map(|k| self.lo + span * k as f64 / n as f64)
                .collect(),
            (true, false) => (0..n)
                .map(|k| self.lo + span * k as f64 / n as f64)
                .collect(),
            (false, false) => (1..=n)
                .map(|k| self.lo + span * k as f64 / (n + 1) as f64)
                .collect(),
        }
    }
}

impl std::fmt::Display for TraceRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Far-field data for one profile computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileProblem {
    pub model: Model,
    pub cond: RoadCondition,
    pub velocity: VelocityModel,
    pub kernel: Kernel,
    pub fbar: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub case: CaseTag,
    pub levels: FluxLevelSet,
}

impl ProfileProblem {
    /// Classifies the far-field pair and stores the flux level.
    pub fn new(
        model: Model,
        cond: RoadCondition,
        velocity: VelocityModel,
        kernel: Kernel,
        rho_minus: f64,
        rho_plus: f64,
    ) -> Result<Self> {
        let case = classify(
            &cond,
            rho_minus,
            rho_plus,
            &velocity,
            model,
            DEFAULT_CLASSIFY_TOL,
        )?;
        let fbar = cond.kappa_plus * rho_plus * velocity.eval(rho_plus);
        let levels = solve_flux_level(fbar, &cond, &velocity)?;
        Ok(Self {
            model,
            cond,
            velocity,
            kernel,
            fbar,
            rho_minus,
            rho_plus,
            case,
            levels,
        })
    }

    /// Picks the far-field pair of a regular case at flux level `fbar`.
    pub fn from_case(
        label: CaseLabel,
        cond: RoadCondition,
        velocity: VelocityModel,
        kernel: Kernel,
        fbar: f64,
    ) -> Result<Self> {
        let (letter, index) = match label {
            CaseLabel::Regular { letter, index } => (letter, index),
            other => {
                return Err(Error::UnsupportedCase {
                    case: other.to_string(),
                })
            }
        };
        if letter.slowdown() != (cond.kappa_minus > cond.kappa_plus) {
            return Err(Error::InvalidInput(format!(
                "case {label} needs kappa- {} kappa+",
                if letter.slowdown() { ">" } else { "<" }
            )));
        }
        let levels = solve_flux_level(fbar, &cond, &velocity)?;
        let (rho_minus, rho_plus) = levels.far_field(index)?;
        let problem = Self::new(letter.model(), cond, velocity, kernel, rho_minus, rho_plus)?;
        if problem.case.label != label {
            return Err(Error::InvalidInput(format!(
                "far field ({rho_minus}, {rho_plus}) classifies as {}, not {label}",
                problem.case.label
            )));
        }
        Ok(problem)
    }

    fn label(&self) -> String {
        self.case.label.to_string()
    }

    /// The lower root of the `kappa+` flux at level `fbar`; the homogeneous
    /// wave on `x > 0` runs from it to `rho+`.
    pub fn conjugate_plus(&self) -> f64 {
        self.levels.plus.0
    }

    /// Admissible traces for the families (sub-case 1 only).
    pub fn trace_range(&self) -> Result<TraceRange> {
        if self.case.label.index() != Some(1) {
            return Err(Error::UnsupportedCase { case: self.label() });
        }
        let lo = self.conjugate_plus();
        if self.cond.kappa_minus > self.cond.kappa_plus {
            Ok(TraceRange {
                lo,
                hi: self.rho_plus,
                lo_closed: false,
                hi_closed: true,
            })
        } else {
            let mut hi = self.rho_plus;
            let mut hi_closed = false;
            if self.model == Model::M1 {
                // Q(0-) = kappa+ Q(0+) / kappa- must stay a density.
                let cap = self.cond.kappa_minus / self.cond.kappa_plus;
                if cap < hi {
                    hi = cap;
                    hi_closed = true;
                }
            }
            Ok(TraceRange {
                lo,
                hi,
                lo_closed: true,
                hi_closed,
            })
        }
    }

    fn check_trace(&self, trace: f64) -> Result<()> {
        let range = self.trace_range()?;
        if !range.contains(trace) {
            return Err(Error::InadmissibleTrace {
                trace,
                range: range.to_string(),
            });
        }
        Ok(())
    }

    /// Whether the profile through `trace` is constant on `x > 0`.
    fn constant_right(&self, trace: f64) -> bool {
        let tol = 1e-14;
        (trace - self.rho_plus).abs() <= tol || (trace - self.conjugate_plus()).abs() <= tol
    }
}

/// A computed stationary profile. The grid extends past `x_max` by at least
/// one horizon so the defining equation can be evaluated up to `x_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub grid: GridFunction,
    pub x_max: f64,
    pub model: Model,
    pub fbar: f64,
    /// `None` for homogeneous profiles.
    pub case: Option<CaseTag>,
    pub trace_minus: f64,
    pub trace_plus: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub residual_sup: f64,
    pub stats: MarchStats,
}

impl Profile {
    pub fn x_min(&self) -> f64 {
        self.grid.x0
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn zero_index(&self) -> usize {
        self.grid
            .zero_index()
            .expect("profile grids have a node at x = 0")
    }

    /// Index of the last node inside `[x_min, x_max]`.
    pub fn last_index(&self) -> usize {
        self.grid.index_of(self.x_max)
    }

    pub fn has_jump(&self) -> bool {
        self.grid.left_trace_at_zero.is_some()
    }

    /// `(x, Q)` pairs on `[x_min, x_max]`; a jump at `0` contributes two rows,
    /// the left trace first.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let z = self.zero_index();
        let mut out = Vec::with_capacity(self.last_index() + 2);
        for i in 0..=self.last_index() {
            let x = if i == z { 0.0 } else { self.grid.x(i) };
            if i == z {
                if let Some(t) = self.grid.left_trace_at_zero {
                    out.push((x, t));
                }
            }
            out.push((x, self.grid.values[i]));
        }
        out
    }

    /// Values on `x < 0` in increasing order of `x`, ending with `Q(0-)`.
    pub fn left_values(&self) -> Vec<f64> {
        let z = self.zero_index();
        let mut v = self.grid.values[..z].to_vec();
        v.push(self.trace_minus);
        v
    }

    /// Piecewise-linear evaluation; at `0` returns the right trace.
    pub fn eval(&self, x: f64) -> f64 {
        self.grid.eval(x)
    }
}

/// Solves the stationary equation at one node given everything to its right.
pub(crate) trait NodeEquation: Sync {
    fn solve(&self, g: &GridFunction, i: usize, kappa: f64, guess: f64) -> Result<Root>;

    /// `|stationary flux - fbar|` at node `i`.
    fn defect(&self, g: &GridFunction, i: usize, kappa: f64) -> Result<f64>;

    /// Whether the trace at `x = 0` jumps with the speed limit.
    fn jumps(&self) -> bool;
}

pub(crate) struct M1Node<'a> {
    pub m: &'a KernelMoments,
    pub v: VelocityModel,
    pub fbar: f64,
    pub opts: RootOptions,
}

impl NodeEquation for M1Node<'_> {
    fn solve(&self, g: &GridFunction, i: usize, kappa: f64, guess: f64) -> Result<Root> {
        let (coef, rest) = density_window(g, i, self.m)?;
        let target = self.fbar / kappa;
        let v = &self.v;
        let eq = |q: f64| {
            let a = coef * q + rest;
            (q * v.eval(a) - target, v.eval(a) + q * v.deriv(a) * coef)
        };
        if eq(1.0).0 < 0.0 {
            return Err(Error::Blowup { x: g.x(i) });
        }
        newton_bisect(eq, 0.0, 1.0, guess, self.opts)
    }

    fn defect(&self, g: &GridFunction, i: usize, kappa: f64) -> Result<f64> {
        let (coef, rest) = density_window(g, i, self.m)?;
        let q = g.value(i)?;
        Ok((kappa * q * self.v.eval(coef * q + rest) - self.fbar).abs())
    }

    fn jumps(&self) -> bool {
        true
    }
}

pub(crate) struct M2Node<'a> {
    pub m: &'a KernelMoments,
    pub cond: RoadCondition,
    pub v: VelocityModel,
    pub fbar: f64,
    pub opts: RootOptions,
}

impl NodeEquation for M2Node<'_> {
    fn solve(&self, g: &GridFunction, i: usize, _kappa: f64, guess: f64) -> Result<Root> {
        let rest = velocity_window_rest(g, i, self.m, &self.cond, &self.v)?;
        let k0 = self.cond.kappa(g.x(i) + 0.5 * self.m.dx);
        let right = g.left_value(i + 1)?;
        let (v, gauss, fbar) = (&self.v, &self.m.gauss[0], self.fbar);
        let eq = |p: f64| {
            let (c, dc) = velocity_cell(gauss, p, right, v);
            let vel = k0 * c + rest;
            (p * vel - fbar, vel + p * k0 * dc)
        };
        if eq(1.0).0 < 0.0 {
            return Err(Error::Blowup { x: g.x(i) });
        }
        newton_bisect(eq, 0.0, 1.0, guess, self.opts)
    }

    fn defect(&self, g: &GridFunction, i: usize, _kappa: f64) -> Result<f64> {
        let vel = crate::nonlocal::average_velocity_m2(g, i, self.m, &self.cond, &self.v)?;
        Ok((g.value(i)? * vel - self.fbar).abs())
    }

    fn jumps(&self) -> bool {
        false
    }
}

/// Speed limit seen by node `i`; the node at `x = 0` belongs to the right.
fn node_kappa(g: &GridFunction, i: usize, cond: &RoadCondition) -> f64 {
    match g.zero_index() {
        Some(z) if i >= z => cond.kappa_plus,
        Some(_) => cond.kappa_minus,
        None => cond.kappa(g.x(i)),
    }
}

/// Solves nodes `hi, hi - 1, ..., lo` in turn. With `connect`, solving the
/// node at `x = 0` sets the left trace from the connecting condition when
/// the law jumps.
pub(crate) fn march_range<E: NodeEquation>(
    g: &mut GridFunction,
    hi: usize,
    lo: usize,
    cond: &RoadCondition,
    eq: &E,
    connect: bool,
) -> Result<MarchStats> {
    let mut stats = MarchStats::default();
    let z = g.zero_index();
    let mut guess = g.value(hi + 1).unwrap_or(0.5);
    for i in (lo..=hi).rev() {
        let kappa = node_kappa(g, i, cond);
        let root = eq.solve(g, i, kappa, guess)?;
        g.values[i] = root.x;
        stats.record(&root);
        guess = root.x;
        if connect && Some(i) == z && eq.jumps() && cond.kappa_minus != cond.kappa_plus {
            let t = cond.kappa_plus * root.x / cond.kappa_minus;
            if t > 1.0 {
                return Err(Error::Blowup { x: 0.0 });
            }
            g.left_trace_at_zero = Some(t);
            guess = t;
        }
    }
    Ok(stats)
}

/// Largest nodal defect of the stationary equation on nodes `0..=last`.
pub(crate) fn sup_defect<E: NodeEquation>(
    g: &GridFunction,
    last: usize,
    cond: &RoadCondition,
    eq: &E,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..=last {
        worst = worst.max(eq.defect(g, i, node_kappa(g, i, cond))?);
    }
    Ok(worst)
}

/// Ratio `r` of the discrete mode `rho+ - a r^j` decaying to the right.
///
/// Linearizing about `rho+` gives `S(r) = -v / (rho v')`, with
/// `S(r) = sum_k omega_k r^k + mu_k / dx (r^{k+1} - r^k)` increasing on
/// `[0, 1]` and `S(1) = 1`.
pub(crate) fn decay_ratio(m: &KernelMoments, rho_plus: f64, v: &VelocityModel) -> Result<f64> {
    let c = -v.eval(rho_plus) / (rho_plus * v.deriv(rho_plus));
    if !(c < 1.0) || !(c > 0.0) {
        return Err(Error::Domain {
            what: "rho+ (needs rho+ > rho_hat)",
            value: rho_plus,
        });
    }
    let inv_dx = 1.0 / m.dx;
    let s = |r: f64| {
        let (mut val, mut der) = (0.0, 0.0);
        let mut rk = 1.0; // r^k
        let mut drk = 0.0; // k r^{k-1}
        for k in 0..m.cells() {
            let a = m.omega[k] - m.mu[k] * inv_dx;
            let b = m.mu[k] * inv_dx;
            val += a * rk + b * rk * r;
            der += a * drk + b * (drk * r + rk);
            drk = drk * r + rk;
            rk *= r;
        }
        (val - c, der)
    };
    if s(0.0).0 >= 0.0 {
        return Ok(0.0);
    }
    Ok(newton_bisect(s, 0.0, 1.0, 0.5, RootOptions::new(0.0, 1e-15, 200))?.x)
}

/// A grid on `[x_min, x_right]` with `0` as a node, holding `fill`.
fn blank_grid(
    params: &SolverParams,
    right_nodes: usize,
    fill: f64,
) -> Result<(GridFunction, usize)> {
    let z = params.left_nodes();
    let x0 = -(z as f64) * params.dx;
    let g = GridFunction::new(x0, params.dx, vec![fill; z + right_nodes + 1])?.with_right_pad(fill);
    Ok((g, z))
}

/// Fills nodes `s..` with the linear mode `rho+ - a r^(j - s)` and marches
/// nodes `s - 1` down to `z`.
#[allow(clippy::too_many_arguments)]
fn shoot_once<E: NodeEquation>(
    g: &mut GridFunction,
    z: usize,
    s: usize,
    rho_plus: f64,
    ratio: f64,
    a: f64,
    cond: &RoadCondition,
    eq: &E,
) -> Result<MarchStats> {
    let mut dev = a;
    for q in &mut g.values[s..] {
        *q = (rho_plus - dev).clamp(0.0, 1.0);
        dev *= ratio;
    }
    g.left_trace_at_zero = None;
    if s > z {
        march_range(g, s - 1, z, cond, eq, false)
    } else {
        Ok(MarchStats::default())
    }
}

/// Fills `x >= 0` with the homogeneous wave through `(0, trace)`.
///
/// The mode is seeded with an amplitude of about `seed_scale` times the wave
/// height, small enough for the linearization to hold to roughly
/// `seed_scale^2` and large enough that rounding in the seed stays far below
/// the target accuracy. The seed node is the leftmost one from which that
/// amplitude still reaches `trace`; the amplitude is then tuned by regula
/// falsi on its logarithm. Returns the grid, the index of `x = 0` and the
/// statistics of the final march.
#[allow(clippy::too_many_arguments)]
pub(crate) fn shoot_right<E: NodeEquation>(
    params: &SolverParams,
    n: usize,
    rho_plus: f64,
    conjugate: f64,
    trace: f64,
    ratio: f64,
    cond: &RoadCondition,
    eq: &E,
) -> Result<(GridFunction, usize, MarchStats)> {
    let a_cap = params.seed_scale * (rho_plus - conjugate);
    let mut right = params.right_nodes() + n + 1;
    let (mut g, z) = blank_grid(params, right, rho_plus)?;
    if rho_plus - trace <= a_cap {
        let stats = shoot_once(&mut g, z, z, rho_plus, ratio, rho_plus - trace, cond, eq)?;
        return Ok((g, z, stats));
    }
    let reach = |g: &mut GridFunction, s: usize, a: f64| -> Result<f64> {
        shoot_once(g, z, s, rho_plus, ratio, a, cond, eq)?;
        Ok(g.values[z])
    };
    // Grow the right part until a seed at its far end overshoots the trace.
    loop {
        let far = g.len() - 1;
        if reach(&mut g, far, a_cap)? <= trace {
            break;
        }
        if right > 1000 * n + params.right_nodes() {
            return Err(Error::SeedCollapse);
        }
        right += (right / 2).max(n);
        g = blank_grid(params, right, rho_plus)?.0;
    }
    // Leftmost seed node that still overshoots: reach() decreases with s.
    let (mut lo, mut hi) = (z, g.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if reach(&mut g, mid, a_cap)? > trace {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = hi;
    let mut a_lo = a_cap * ratio.max(0.5) * 0.5;
    let mut tries = 0;
    while reach(&mut g, s, a_lo)? <= trace {
        a_lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(Error::SeedCollapse);
        }
    }
    let opts = RootOptions::new(1e-13, 1e-14, 100);
    let la = match illinois(
        |la| Ok(reach(&mut g, s, la.exp())? - trace),
        a_lo.ln(),
        a_cap.ln(),
        opts,
    ) {
        Ok(root) => root.x,
        // Rounding noise in the shot can stall the bracket; keep the best point.
        Err(Error::NoConvergence { x, .. }) => x,
        Err(e) => return Err(e),
    };
    let stats = shoot_once(&mut g, z, s, rho_plus, ratio, la.exp(), cond, eq)?;
    Ok((g, z, stats))
}

/// Builds one profile: right part (constant or shot), connecting condition,
/// march on `x < 0`, residual.
pub(crate) fn assemble<E: NodeEquation>(
    problem: &ProfileProblem,
    trace: f64,
    constant: bool,
    params: &SolverParams,
    eq: &E,
) -> Result<Profile> {
    let n = params.validate(&problem.kernel)?;
    let m_cells = n;
    let cond = &problem.cond;
    let (mut g, z, mut stats) = if constant {
        let (g, z) = blank_grid(params, params.right_nodes() + m_cells + 1, trace)?;
        (g, z, MarchStats::default())
    } else {
        let moments = problem.kernel.cell_moments(params.dx)?;
        let ratio = decay_ratio(&moments, problem.rho_plus, &problem.velocity)?;
        shoot_right(
            params,
            n,
            problem.rho_plus,
            problem.conjugate_plus(),
            trace,
            ratio,
            cond,
            eq,
        )?
    };
    let trace_plus = g.values[z];
    let trace_minus = if eq.jumps() && cond.kappa_minus != cond.kappa_plus {
        let t = cond.kappa_plus * trace_plus / cond.kappa_minus;
        if t > 1.0 {
            return Err(Error::Blowup { x: 0.0 });
        }
        g = g.with_left_trace(t)?;
        t
    } else {
        trace_plus
    };
    stats.merge(&march_range(&mut g, z - 1, 0, cond, eq, false)?);
    let last = g.index_of(params.x_max);
    let residual_sup = sup_defect(&g, last, cond, eq)?;
    Ok(Profile {
        grid: g,
        x_max: (last - z) as f64 * params.dx,
        model: problem.model,
        fbar: problem.fbar,
        case: Some(problem.case),
        trace_minus,
        trace_plus,
        rho_minus: problem.rho_minus,
        rho_plus: problem.rho_plus,
        residual_sup,
        stats,
    })
}

/// The homogeneous wave on `[-L, L]` through `(0, (rho* + rho+) / 2)`.
/// `eq` must be set up for the constant road `cond`.
pub(crate) fn homogeneous<E: NodeEquation>(
    model: Model,
    cond: &RoadCondition,
    rho_plus: f64,
    v: &VelocityModel,
    moments: &KernelMoments,
    domain_len: f64,
    eq: &E,
) -> Result<Profile> {
    let rho_hat = crate::model::stagnation_point(v)?;
    if !(rho_plus > rho_hat) || rho_plus >= 1.0 {
        return Err(Error::Domain {
            what: "rho+ (needs rho_hat < rho+ < 1)",
            value: rho_plus,
        });
    }
    let dx = moments.dx;
    let fbar = cond.kappa_plus * rho_plus * v.eval(rho_plus);
    let conjugate = crate::model::conjugate_density(rho_plus, v)?;
    let params = SolverParams::new(dx).with_domain(-domain_len, domain_len);
    let n = params.validate(&moments.kernel)?;
    let ratio = decay_ratio(moments, rho_plus, v)?;
    let mid = 0.5 * (conjugate + rho_plus);
    let (mut g, z, mut stats) = shoot_right(&params, n, rho_plus, conjugate, mid, ratio, cond, eq)?;
    stats.merge(&march_range(&mut g, z - 1, 0, cond, eq, false)?);
    let last = g.index_of(params.x_max);
    for i in 0..last {
        if g.values[i + 1] < g.values[i] - MONOTONE_SLACK {
            return Err(Error::NonMonotone { x: g.x(i) });
        }
    }
    if g.values[last] - g.values[0] < 0.5 * (rho_plus - conjugate) {
        return Err(Error::SeedCollapse);
    }
    let residual_sup = sup_defect(&g, last, cond, eq)?;
    Ok(Profile {
        trace_minus: g.values[z],
        trace_plus: g.values[z],
        grid: g,
        x_max: (last - z) as f64 * dx,
        model,
        fbar,
        case: None,
        rho_minus: conjugate,
        rho_plus,
        residual_sup,
        stats,
    })
}

/// Builds a family in parallel and returns it sorted by trace.
pub(crate) fn family<F>(traces: &[f64], build: F) -> Result<Vec<Profile>>
where
    F: Fn(f64) -> Result<Profile> + Sync,
{
    let mut out = traces
        .par_iter()
        .map(|&t| build(t))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| {
        a.trace_plus
            .partial_cmp(&b.trace_plus)
            .unwrap_or(Ordering::Equal)
    });
    Ok(out)
}

/// The largest trace whose profile still marches through to `x_min`,
/// located by bisection between an admissible trace `ok` and a failing one
/// `bad`. Profiles just below it linger near the unstable root before
/// reaching `rho-`, which is where oscillatory members live.
pub fn critical_trace<F>(build: F, mut ok: f64, mut bad: f64, iterations: usize) -> Result<f64>
where
    F: Fn(f64) -> Result<Profile>,
{
    build(ok)?;
    if build(bad).is_ok() {
        return Err(Error::InvalidInput(format!("trace {bad} does not blow up")));
    }
    for _ in 0..iterations {
        let mid = 0.5 * (ok + bad);
        match build(mid) {
            Ok(_) => ok = mid,
            Err(Error::Blowup { .. }) => bad = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(ok)
}

/// Smallest vertical gap between consecutive members of a sorted family
/// over the nodes on `[x_min, x_max]`, using the left trace at `0`.
/// Negative if two members cross.
pub fn family_min_gap(family: &[Profile]) -> f64 {
    let mut gap = f64::INFINITY;
    for pair in family.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let (sa, sb) = (a.samples(), b.samples());
        for (p, q) in sa.iter().zip(&sb) {
            gap = gap.min(q.1 - p.1);
        }
    }
    gap
}

pub(crate) fn check_multiplicity(problem: &ProfileProblem, wanted: Multiplicity) -> Result<()> {
    match problem.case.multiplicity {
        m if m == wanted => Ok(()),
        Multiplicity::None => Err(Error::NoProfile {
            case: problem.label(),
        }),
        _ => Err(Error::UnsupportedCase {
            case: problem.label(),
        }),
    }
}
