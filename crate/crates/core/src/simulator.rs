//! Finite-volume solver for the Cauchy problems.
//!
//! Cells have width `dx` and `x = 0` is always a cell edge, so the jump of
//! the speed limit sits exactly on an interface. The nonlocal average at an
//! interface runs over the `h / dx` cells to its right, and the speed limit
//! in the flux is taken from the upwind cell. One ghost cell on the left and
//! `h / dx + 1` on the right hold the far-field values.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Kernel, Model, RoadCondition, VelocityModel};
use crate::profile::Profile;

/// Interfaces per rayon task; below this a step runs on one thread.
const PAR_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Upwind,
    LaxFriedrichs,
}

impl Scheme {
    /// Lax-Friedrichs for (M1), upwind for (M2). Where `kappa` drops, the
    /// (M1) flux balance doubles the density across `x = 0`, and the
    /// upwind flux can then push the first downstream cell past 1; the
    /// Lax-Friedrichs dissipation keeps it in range.
    pub fn default_for(model: Model) -> Self {
        match model {
            Model::M1 => Scheme::LaxFriedrichs,
            Model::M2 => Scheme::Upwind,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Upwind => "upwind",
            Scheme::LaxFriedrichs => "lax-friedrichs",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "upwind" | "godunov" => Ok(Scheme::Upwind),
            "lax-friedrichs" | "lf" => Ok(Scheme::LaxFriedrichs),
            other => Err(Error::InvalidInput(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Uniform cell layout with `x = 0` on an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl SimGrid {
    pub fn new(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(Error::Domain {
                what: "dx",
                value: dx,
            });
        }
        if !(x_min < 0.0 && x_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "simulation domain [{x_min}, {x_max}] must contain x = 0 in its interior"
            )));
        }
        Ok(Self { x_min, x_max, dx })
    }

    /// Cells left of `0`, after snapping `x_min` to the grid.
    pub fn left_cells(&self) -> usize {
        ((-self.x_min / self.dx).round() as usize).max(1)
    }

    pub fn right_cells(&self) -> usize {
        ((self.x_max / self.dx).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub cells: Vec<f64>,
    pub dx: f64,
    pub t: f64,
    /// Cell `interface_index` is the first one right of `x = 0`.
    pub interface_index: usize,
    pub left_farfield: f64,
    pub right_farfield: f64,
    pub scheme: Scheme,
    pub cfl: f64,
}

impl SimState {
    /// Cell averages `f(j)` for `j` in `0..n`, with the grid and far field
    /// of `grid`.
    fn build(grid: &SimGrid, far: (f64, f64), f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        for (what, value) in [("rho-", far.0), ("rho+", far.1)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Domain { what, value });
            }
        }
        let (l, r) = (grid.left_cells(), grid.right_cells());
        let dx = grid.dx;
        let cells = (0..l + r)
            .map(|j| {
                let a = (j as f64 - l as f64) * dx;
                f(a, a + dx)
            })
            .collect::<Vec<_>>();
        for (index, &value) in cells.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::StateOutOfBounds { index, value });
            }
        }
        Ok(Self {
            cells,
            dx,
            t: 0.0,
            interface_index: l,
            left_farfield: far.0,
            right_farfield: far.1,
            scheme: Scheme::Upwind,
            cfl: 0.4,
        })
    }

    pub fn with_scheme(mut self, scheme: Scheme, cfl: f64) -> Self {
        self.scheme = scheme;
        self.cfl = cfl;
        self
    }

    /// The cell layout of this state.
    pub fn grid(&self) -> SimGrid {
        let x_min = self.x_left();
        SimGrid {
            x_min,
            x_max: x_min + self.len() as f64 * self.dx,
            dx: self.dx,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Left edge of the first cell.
    pub fn x_left(&self) -> f64 {
        -(self.interface_index as f64) * self.dx
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 - self.interface_index as f64 + 0.5) * self.dx
    }

    /// `sum rho_j dx`, compensated.
    pub fn mass(&self) -> f64 {
        kahan_sum(self.cells.iter().copied()) * self.dx
    }

    /// Indices of cells whose centers satisfy `|x| <= window`.
    pub fn window(&self, window: f64) -> std::ops::Range<usize> {
        let k = ((window / self.dx) - 0.5 + 1e-9).floor().max(-1.0) as isize + 1;
        let k = k.max(0) as usize;
        let lo = self.interface_index.saturating_sub(k);
        let hi = (self.interface_index + k).min(self.len());
        lo..hi
    }
}

fn kahan_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0, 0.0);
    for x in it {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Step-function data: `rho-` left of `0`, `rho+` right of it.
pub fn riemann_initial(rho_minus: f64, rho_plus: f64, grid: &SimGrid) -> Result<SimState> {
    SimState::build(grid, (rho_minus, rho_plus), |a, _| {
        if a < 0.0 {
            rho_minus
        } else {
            rho_plus
        }
    })
}

/// Cell averages of a profile; beyond its stored grid the profile is
/// continued by its end values.
pub fn profile_initial(profile: &Profile, grid: &SimGrid) -> Result<SimState> {
    let far = (profile.rho_minus, profile.rho_plus);
    SimState::build(grid, far, |a, b| {
        profile.grid.interval_mean(a, b).clamp(0.0, 1.0)
    })
}

/// Adds `amount` to every cell whose center lies in `[a, b]`.
pub fn add_bump(state: &mut SimState, a: f64, b: f64, amount: f64) -> Result<()> {
    for j in 0..state.len() {
        let x = state.center(j);
        if x >= a && x <= b {
            let value = state.cells[j] + amount;
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::StateOutOfBounds { index: j, value });
            }
            state.cells[j] = value;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    /// Flux through the left boundary.
    pub flux_in: f64,
    /// Flux through the right boundary.
    pub flux_out: f64,
    /// `|mass change - dt (flux_in - flux_out)|`.
    pub mass_defect: f64,
}

/// Model data needed to advance a state.
#[derive(Debug, Clone, PartialEq)]
pub struct Stepper {
    pub model: Model,
    pub cond: RoadCondition,
    pub v: VelocityModel,
    omega: Vec<f64>,
    dx: f64,
}

impl Stepper {
    pub fn new(
        model: Model,
        cond: RoadCondition,
        v: VelocityModel,
        kernel: &Kernel,
        dx: f64,
    ) -> Result<Self> {
        let moments = kernel.cell_moments(dx)?;
        Ok(Self {
            model,
            cond,
            v,
            omega: moments.omega,
            dx,
        })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// `cfl dx / (kappa_max v(0))`.
    pub fn stable_dt(&self, cfl: f64) -> f64 {
        cfl * self.dx / (self.cond.kappa_max() * self.v.eval(0.0))
    }

    fn check(&self, state: &SimState) -> Result<()> {
        if (state.dx - self.dx).abs() > 1e-12 * self.dx {
            return Err(Error::InvalidInput(format!(
                "state spacing {} differs from the stepper's {}",
                state.dx, self.dx
            )));
        }
        if !(state.cfl > 0.0 && state.cfl <= 0.5) {
            return Err(Error::Cfl { cfl: state.cfl });
        }
        Ok(())
    }

    /// Cells padded with one ghost on the left and `n + 1` on the right.
    fn extended(&self, state: &SimState) -> Vec<f64> {
        let n = self.omega.len();
        let mut e = Vec::with_capacity(state.len() + n + 2);
        e.push(state.left_farfield);
        e.extend_from_slice(&state.cells);
        e.extend(std::iter::repeat_n(state.right_farfield, n + 1));
        e
    }

    /// Interface fluxes `F_0 .. F_N` for the current state; interface `j`
    /// is the left edge of cell `j`.
    pub fn fluxes(&self, state: &SimState, dt: f64) -> Vec<f64> {
        let e = self.extended(state);
        let iface = state.interface_index;
        let (km, kp) = (self.cond.kappa_minus, self.cond.kappa_plus);
        // Extended index `k` is cell `k - 1`.
        let kappa = |k: usize| if k > iface { kp } else { km };
        let omega = &self.omega;
        // Quantity averaged by the kernel, per extended cell.
        let g: Vec<f64> = match self.model {
            Model::M1 => e.clone(),
            Model::M2 => e
                .iter()
                .enumerate()
                .map(|(k, &r)| kappa(k) * self.v.eval(r))
                .collect(),
        };
        // Averaged quantity over the window starting at extended edge `k`.
        let window = |k: usize| -> f64 { omega.iter().zip(&g[k..]).map(|(w, x)| w * x).sum() };
        // Upwind flux across the left edge of extended cell `k`.
        let upwind = |k: usize| -> f64 {
            let avg = window(k);
            match self.model {
                Model::M1 => e[k - 1] * kappa(k - 1) * self.v.eval(avg),
                Model::M2 => e[k - 1] * avg,
            }
        };
        let n_if = state.len() + 1;
        let flux_at = |j: usize| -> f64 {
            let k = j + 1;
            match state.scheme {
                Scheme::Upwind => upwind(k),
                // upwind(k) is also the cell flux of cell k - 1 with its
                // window at its right edge.
                Scheme::LaxFriedrichs => {
                    0.5 * (upwind(k) + upwind(k + 1)) - 0.5 * self.dx / dt * (e[k] - e[k - 1])
                }
            }
        };
        if n_if >= 2 * PAR_CHUNK {
            (0..n_if)
                .into_par_iter()
                .with_min_len(PAR_CHUNK)
                .map(flux_at)
                .collect()
        } else {
            (0..n_if).map(flux_at).collect()
        }
    }

    /// Advances by the stable step, shortened so as not to pass `t_stop`.
    pub fn step(&self, state: &mut SimState, t_stop: f64) -> Result<StepReport> {
        self.check(state)?;
        let stable = self.stable_dt(state.cfl);
        let remaining = t_stop - state.t;
        if remaining > 0.0 && remaining <= stable * (1.0 + 1e-9) {
            // Land exactly on `t_stop` rather than accumulating rounding.
            let report = self.step_dt(state, remaining)?;
            state.t = t_stop;
            return Ok(report);
        }
        self.step_dt(state, stable.min(remaining.max(0.0)))
    }

    /// Advances by exactly `dt` (which must not exceed the stable step).
    pub fn step_dt(&self, state: &mut SimState, dt: f64) -> Result<StepReport> {
        self.check(state)?;
        if dt == 0.0 {
            return Ok(StepReport {
                dt,
                flux_in: 0.0,
                flux_out: 0.0,
                mass_defect: 0.0,
            });
        }
        if dt > self.stable_dt(0.5) * (1.0 + 1e-9) {
            return Err(Error::Cfl {
                cfl: dt / self.stable_dt(1.0),
            });
        }
        let f = self.fluxes(state, dt);
        let lambda = dt / self.dx;
        let mut change = Vec::with_capacity(state.len());
        for (j, rho) in state.cells.iter_mut().enumerate() {
            let new = *rho - lambda * (f[j + 1] - f[j]);
            change.push(new - *rho);
            *rho = new;
        }
        for (index, &value) in state.cells.iter().enumerate() {
            if !(-1e-12..=1.0 + 1e-12).contains(&value) || !value.is_finite() {
                return Err(Error::StateOutOfBounds { index, value });
            }
        }
        state.t += dt;
        let (flux_in, flux_out) = (f[0], f[f.len() - 1]);
        let mass_change = kahan_sum(change.into_iter()) * self.dx;
        Ok(StepReport {
            dt,
            flux_in,
            flux_out,
            mass_defect: (mass_change - dt * (flux_in - flux_out)).abs(),
        })
    }

    /// Integrates to `t_final`, landing exactly on each requested snapshot
    /// time.
    pub fn run(
        &self,
        initial: SimState,
        t_final: f64,
        snapshot_times: &[f64],
    ) -> Result<RunOutput> {
        if !(t_final > initial.t) {
            return Err(Error::InvalidInput(format!(
                "t_final = {t_final} must exceed the start time"
            )));
        }
        let mut times = snapshot_times.to_vec();
        times.sort_by(|a, b| a.total_cmp(b));
        if let Some(&last) = times.last() {
            if last > t_final {
                return Err(Error::InvalidInput(format!(
                    "snapshot time {last} is after t_final"
                )));
            }
        }
        let mut state = initial;
        let mut snapshots = Vec::with_capacity(times.len());
        let mut next = 0;
        let mut out = RunOutput::default();
        let tol = 1e-9 * self.stable_dt(state.cfl);
        loop {
            while next < times.len() && times[next] <= state.t + tol {
                snapshots.push(state.clone());
                next += 1;
            }
            if state.t >= t_final - tol {
                break;
            }
            let stop = times.get(next).map_or(t_final, |&t| t.min(t_final));
            let report = self.step(&mut state, stop)?;
            out.steps += 1;
            out.max_mass_defect = out.max_mass_defect.max(report.mass_defect);
        }
        out.snapshots = snapshots;
        out.final_state = Some(state);
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<SimState>,
    pub final_state: Option<SimState>,
    pub steps: usize,
    pub max_mass_defect: f64,
}

/// Member values per cell, precomputed for one cell layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTable {
    pub cells: std::ops::Range<usize>,
    pub traces: Vec<f64>,
    /// `values[m][j - cells.start]` is the cell average of member `m`.
    pub values: Vec<Vec<f64>>,
}

impl FamilyTable {
    /// `family` must be sorted by trace; only cells with `|x| <= window`
    /// are tabulated.
    pub fn new(family: &[Profile], like: &SimState, window: f64) -> Result<Self> {
        if family.is_empty() {
            return Err(Error::InvalidInput("empty profile family".into()));
        }
        let cells = like.window(window);
        let dx = like.dx;
        let values = family
            .iter()
            .map(|p| {
                cells
                    .clone()
                    .map(|j| {
                        let a = like.center(j) - 0.5 * dx;
                        p.grid.interval_mean(a, a + dx)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            cells,
            traces: family.iter().map(|p| p.trace_plus).collect(),
            values,
        })
    }

    /// Tabulates simulator states directly, labelled by `traces`; `states`
    /// must share one layout and be ordered like their labels.
    pub fn from_states(states: &[SimState], traces: &[f64], window: f64) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::InvalidInput("empty profile family".into()));
        };
        if states.len() != traces.len() {
            return Err(Error::InvalidInput(
                "one trace label per state is required".into(),
            ));
        }
        if states
            .iter()
            .any(|s| s.len() != first.len() || s.interface_index != first.interface_index)
        {
            return Err(Error::InvalidInput("states have different layouts".into()));
        }
        let cells = first.window(window);
        Ok(Self {
            values: states
                .iter()
                .map(|s| s.cells[cells.clone()].to_vec())
                .collect(),
            cells,
            traces: traces.to_vec(),
        })
    }

    pub fn members(&self) -> usize {
        self.traces.len()
    }
}

/// Runs every member, as initial data on the layout and scheme of
/// `template`, for time `t_relax`. This moves it onto the nearby stationary
/// state of the scheme itself, which differs from the profile by `O(dx)`.
/// Members are independent and run concurrently.
pub fn relax_family(
    stepper: &Stepper,
    family: &[Profile],
    template: &SimState,
    t_relax: f64,
) -> Result<Vec<SimState>> {
    let grid = template.grid();
    family
        .par_iter()
        .map(|p| {
            let s = profile_initial(p, &grid)?.with_scheme(template.scheme, template.cfl);
            let out = stepper.run(s, t_relax, &[])?;
            Ok(out.final_state.expect("run always returns its final state"))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiOptions {
    /// A cell is skipped, its trace parameter being unresolvable, when the
    /// envelope there is thinner than this, or when the two members
    /// bracketing the cell value differ by less than `min_gap` times their
    /// trace spacing relative to the full trace range.
    pub min_gap: f64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self { min_gap: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceDiagnostic {
    pub phi_spread: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub l1_distance_to_nearest: f64,
    pub nearest_trace: f64,
    pub inside_envelope: bool,
    /// Cells that entered the spread.
    pub cells_used: usize,
    /// Cells clamped to the envelope.
    pub cells_clamped: usize,
}

/// Assigns to each cell the trace of the family member through it,
/// interpolating linearly between tabulated members, and reports the
/// spread of those traces together with the L1 distance to the closest
/// member.
pub fn phi_map(
    state: &SimState,
    table: &FamilyTable,
    opts: PhiOptions,
) -> Result<ConvergenceDiagnostic> {
    let cells = table.cells.clone();
    if cells.end > state.len() {
        return Err(Error::InvalidInput(
            "family table does not match the state layout".into(),
        ));
    }
    let last = table.members() - 1;
    let span = table.traces[last] - table.traces[0];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut used, mut clamped) = (0, 0);
    for (c, j) in cells.clone().enumerate() {
        let (bottom, top) = (table.values[0][c], table.values[last][c]);
        let rho = state.cells[j];
        if rho < bottom || rho > top {
            clamped += 1;
        }
        if top - bottom < opts.min_gap || last == 0 {
            continue;
        }
        let rho = rho.clamp(bottom, top);
        // Members are ordered at every cell: bisect for the bracketing pair.
        let (mut a, mut b) = (0, last);
        while b - a > 1 {
            let m = (a + b) / 2;
            if table.values[m][c] <= rho {
                a = m;
            } else {
                b = m;
            }
        }
        let (va, vb) = (table.values[a][c], table.values[b][c]);
        // Members that coincide here cannot tell their traces apart.
        let (ta, tb) = (table.traces[a], table.traces[b]);
        if vb - va < opts.min_gap * (tb - ta) / span {
            continue;
        }
        let s = if vb > va { (rho - va) / (vb - va) } else { 0.0 };
        let phi = table.traces[a] + s * (table.traces[b] - table.traces[a]);
        lo = lo.min(phi);
        hi = hi.max(phi);
        used += 1;
    }
    let dx = state.dx;
    let (mut best, mut best_trace) = (f64::INFINITY, f64::NAN);
    for (m, member) in table.values.iter().enumerate() {
        let d: f64 = cells
            .clone()
            .zip(member)
            .map(|(j, q)| (state.cells[j] - q).abs())
            .sum::<f64>()
            * dx;
        if d < best {
            best = d;
            best_trace = table.traces[m];
        }
    }
    let (phi_min, phi_max) = if used == 0 {
        (f64::NAN, f64::NAN)
    } else {
        (lo, hi)
    };
    Ok(ConvergenceDiagnostic {
        phi_spread: if used == 0 { 0.0 } else { hi - lo },
        phi_min,
        phi_max,
        l1_distance_to_nearest: best,
        nearest_trace: best_trace,
        inside_envelope: clamped == 0,
        cells_used: used,
        cells_clamped: clamped,
    })
}

/// What a run is compared against in [`persistence_metric`].
#[derive(Debug, Clone, Copy)]
pub enum Candidate<'a> {
    Profile(&'a Profile),
    /// The step `(rho-, rho+)` with its jump at `0`.
    Step(f64, f64),
}

/// `(t, sup |rho - candidate|)` over cells with `|x| <= window`, per snapshot.
pub fn persistence_metric(
    snapshots: &[SimState],
    candidate: Candidate<'_>,
    window: f64,
) -> Vec<(f64, f64)> {
    snapshots
        .iter()
        .map(|s| {
            let dx = s.dx;
            let d = s
                .window(window)
                .map(|j| {
                    let x = s.center(j);
                    let c = match candidate {
                        Candidate::Profile(p) => p.grid.interval_mean(x - 0.5 * dx, x + 0.5 * dx),
                        Candidate::Step(l, r) => {
                            if x < 0.0 {
                                l
                            } else {
                                r
                            }
                        }
                    };
                    (s.cells[j] - c).abs()
                })
                .fold(0.0, f64::max);
            (s.t, d)
        })
        .collect()
}

/// `sup |a - b|` over cells of `a` whose centers lie in `[x_lo, x_hi]`.
pub fn sup_difference(a: &SimState, b: &SimState, x_lo: f64, x_hi: f64) -> Result<f64> {
    if a.len() != b.len() || a.interface_index != b.interface_index {
        return Err(Error::InvalidInput("states have different layouts".into()));
    }
    Ok((0..a.len())
        .filter(|&j| (x_lo..=x_hi).contains(&a.center(j)))
        .map(|j| (a.cells[j] - b.cells[j]).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 0.2;

    fn stepper(model: Model, km: f64, kp: f64, dx: f64) -> Stepper {
        let cond = RoadCondition::new(km, kp).unwrap();
        Stepper::new(
            model,
            cond,
            VelocityModel::lwr(),
            &Kernel::linear(H).unwrap(),
            dx,
        )
        .unwrap()
    }

    #[test]
    fn constant_state_is_steady() {
        for model in [Model::M1, Model::M2] {
            for scheme in [Scheme::Upwind, Scheme::LaxFriedrichs] {
                let st = stepper(model, 1.3, 1.3, 0.01);
                let grid = SimGrid::new(-1.0, 1.0, 0.01).unwrap();
                let mut s = riemann_initial(0.4, 0.4, &grid)
                    .unwrap()
                    .with_scheme(scheme, 0.4);
                for _ in 0..50 {
                    st.step(&mut s, 10.0).unwrap();
                }
                assert!(
                    s.cells.iter().all(|&r| (r - 0.4).abs() < 1e-14),
                    "{model} {scheme}"
                );
            }
        }
    }

    #[test]
    fn riemann_data_is_a_step() {
        let grid = SimGrid::new(-1.0, 1.0 + H, 0.01).unwrap();
        let s = riemann_initial(0.25, 0.75, &grid).unwrap();
        assert_eq!(s.interface_index, 100);
        assert!((s.x_left() + 1.0).abs() < 1e-15);
        assert!(s.cells[..100].iter().all(|&r| r == 0.25));
        assert!(s.cells[100..].iter().all(|&r| r == 0.75));
        assert!(s.center(99) < 0.0 && s.center(100) > 0.0);
    }

    #[test]
    fn zero_step_is_identity() {
        let st = stepper(Model::M1, 2.0, 1.0, 0.01);
        let grid = SimGrid::new(-1.0, 1.0, 0.01).unwrap();
        let mut s = riemann_initial(0.1, 0.8, &grid).unwrap();
        let before = s.clone();
        st.step_dt(&mut s, 0.0).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn mass_balance_per_step() {
        for model in [Model::M1, Model::M2] {
            let st = stepper(model, 2.0, 1.0, 0.005);
            let grid = SimGrid::new(-1.0, 1.0 + H, 0.005).unwrap();
            let mut s = riemann_initial(0.1, 0.75, &grid).unwrap();
            for _ in 0..200 {
                let m0 = s.mass();
                let r = st.step(&mut s, 100.0).unwrap();
                assert!(r.mass_defect < 1e-13);
                let m1 = s.mass();
                assert!((m1 - m0 - r.dt * (r.flux_in - r.flux_out)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cfl_limits() {
        let st = stepper(Model::M1, 2.0, 1.0, 0.01);
        let grid = SimGrid::new(-1.0, 1.0, 0.01).unwrap();
        let mut s = riemann_initial(0.1, 0.8, &grid)
            .unwrap()
            .with_scheme(Scheme::Upwind, 0.7);
        assert!(matches!(st.step(&mut s, 1.0), Err(Error::Cfl { .. })));
        let mut s = riemann_initial(0.1, 0.8, &grid).unwrap();
        assert!(matches!(st.step_dt(&mut s, 1.0), Err(Error::Cfl { .. })));
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let st = stepper(Model::M2, 1.0, 2.0, 0.01);
        let grid = SimGrid::new(-1.0, 1.0 + H, 0.01).unwrap();
        let s = riemann_initial(0.25, 0.1, &grid).unwrap();
        let out = st.run(s, 0.5, &[0.0, 0.1, 0.5]).unwrap();
        assert_eq!(out.snapshots.len(), 3);
        assert_eq!(out.snapshots[0].t, 0.0);
        let dt = st.stable_dt(0.4);
        assert!(dt < 0.1);
        assert_eq!(out.snapshots[1].t, 0.1);
        assert_eq!(out.final_state.unwrap().t, 0.5);
        assert!(persistence_metric(&[], Candidate::Step(0.0, 1.0), 1.0).is_empty());
    }

    #[test]
    fn window_is_symmetric() {
        let grid = SimGrid::new(-3.0, 3.0, 0.1).unwrap();
        let s = riemann_initial(0.2, 0.2, &grid).unwrap();
        let w = s.window(1.0);
        assert_eq!(w.len(), 20);
        assert!(w.clone().all(|j| s.center(j).abs() <= 1.0));
        let g = s.grid();
        assert!((g.x_min + 3.0).abs() < 1e-12 && (g.x_max - 3.0).abs() < 1e-12);
    }

    #[test]
    fn phi_of_a_member_is_its_trace() {
        let grid = SimGrid::new(-1.0, 1.0, 0.05).unwrap();
        let states: Vec<SimState> = [0.2, 0.3, 0.4]
            .iter()
            .map(|&c| {
                let mut s = riemann_initial(c, c, &grid).unwrap();
                for (j, r) in s.cells.iter_mut().enumerate() {
                    *r += 0.001 * j as f64;
                }
                s
            })
            .collect();
        let table = FamilyTable::from_states(&states, &[1.0, 2.0, 3.0], 0.5).unwrap();
        let d = phi_map(&states[1], &table, PhiOptions::default()).unwrap();
        assert!(d.phi_spread < 1e-12 && (d.phi_min - 2.0).abs() < 1e-12);
        assert!(d.l1_distance_to_nearest < 1e-15 && d.inside_envelope);
        let mut mid = states[0].clone();
        for r in mid.cells.iter_mut() {
            *r += 0.05;
        }
        let d = phi_map(&mid, &table, PhiOptions::default()).unwrap();
        assert!((d.phi_min - 1.5).abs() < 1e-9 && (d.phi_max - 1.5).abs() < 1e-9);
        let mut low = states[0].clone();
        low.cells[20] = 0.0;
        let d = phi_map(&low, &table, PhiOptions::default()).unwrap();
        assert!(!d.inside_envelope && d.cells_clamped == 1);
    }

    #[test]
    fn coinciding_members_are_skipped() {
        // The lowest member stays apart; the upper two agree right of 0.
        let grid = SimGrid::new(-1.0, 1.0, 0.05).unwrap();
        let states: Vec<SimState> = [0.3, 0.5]
            .iter()
            .map(|&c| riemann_initial(c, 0.9, &grid).unwrap())
            .chain(std::iter::once(riemann_initial(0.1, 0.1, &grid).unwrap()))
            .collect();
        let ordered = [states[2].clone(), states[0].clone(), states[1].clone()];
        let table = FamilyTable::from_states(&ordered, &[1.0, 2.0, 3.0], 0.5).unwrap();
        let d = phi_map(&ordered[1], &table, PhiOptions::default()).unwrap();
        assert!(d.phi_spread < 1e-12, "{d:?}");
        assert_eq!(d.cells_used, 10);
    }
}
