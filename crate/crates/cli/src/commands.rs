use std::path::PathBuf;

use rayon::prelude::*;
use roughroad::profile::MONOTONE_SLACK;
use roughroad::{
    build_profile, build_profile_m2, build_unique_profile_a2, build_unique_profile_m2,
    kink_certificate, persistence_metric, phi_map, relax_family, riemann_initial, solve_flux_level,
    Candidate, CaseLabel, CaseLetter, CaseTag, FamilyTable, KinkReport, Model, Multiplicity,
    PhiOptions, Profile, ProfileProblem, RunOutput, SimState, SolverParams, Stepper,
};
use serde::Serialize;

use crate::config::{Scenario, Setup};
use crate::error::{CliError, Result};
use crate::output::{
    emit_plot_script, profile_csv, snapshot_csv, ArtifactSink, Manifest, PlotStyle,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Classify,
    Profile,
    Family,
    Simulate,
    Sweep,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Classify => "classify",
            CommandKind::Profile => "profile",
            CommandKind::Family => "family",
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
        }
    }
}

/// What a command printed, plus the manifest of what it wrote.
#[derive(Debug, Clone)]
pub struct Report {
    pub lines: Vec<String>,
    pub out: PathBuf,
    pub manifest: Manifest,
}

/// Runs `kind` for `scenario`, writing below `out` (or the scenario's own
/// output directory).
pub fn run(
    kind: CommandKind,
    mut scenario: Scenario,
    out: Option<PathBuf>,
    dx: Option<f64>,
) -> Result<Report> {
    if dx.is_some() {
        scenario.dx = dx;
    }
    let out = out.unwrap_or_else(|| PathBuf::from(&scenario.output));
    let mut sink = ArtifactSink::new(&out)?;
    let lines = match kind {
        CommandKind::Classify => classify(&scenario.resolve()?),
        CommandKind::Profile => profile(&scenario.resolve()?, &mut sink)?,
        CommandKind::Family => family(&scenario.resolve()?, &mut sink)?,
        CommandKind::Simulate => simulate(&scenario.resolve()?, &mut sink)?,
        CommandKind::Sweep => sweep(&scenario, &mut sink)?,
    };
    sink.write("report.txt", &(lines.join("\n") + "\n"))?;
    let manifest = sink.finish(kind.name())?;
    manifest.validate(&out)?;
    Ok(Report {
        lines,
        out,
        manifest,
    })
}

fn classify(setup: &Setup) -> Vec<String> {
    let mut lines = vec![setup.tag.to_string()];
    lines.push(format!(
        "rho- = {}, rho+ = {}, fbar = {}",
        setup.rho_minus, setup.rho_plus, setup.fbar
    ));
    if let Ok(l) = solve_flux_level(setup.fbar, &setup.cond, &setup.velocity) {
        lines.push(format!(
            "flux level: rho1 = {}, rho2 = {}, rho3 = {}, rho4 = {}, rho_hat = {}",
            l.rho1, l.rho2, l.rho3, l.rho4, l.rho_hat
        ));
    }
    lines
}

/// One profile for `problem`: the trace picks a family member, unique cases
/// ignore it.
fn build_one(
    problem: &ProfileProblem,
    trace: Option<f64>,
    params: &SolverParams,
) -> Result<Profile> {
    let built = match (problem.case.multiplicity, problem.model) {
        (Multiplicity::Infinite, model) => {
            let trace = trace
                .ok_or_else(|| CliError::config("traces", "this case needs at least one trace"))?;
            match model {
                Model::M1 => build_profile(problem, trace, params),
                Model::M2 => build_profile_m2(problem, trace, params),
            }
        }
        (_, Model::M1) => build_unique_profile_a2(problem, params),
        (_, Model::M2) => build_unique_profile_m2(problem, params),
    };
    Ok(built?)
}

fn kink_of(setup: &Setup, p: &Profile) -> Option<KinkReport> {
    (setup.model == Model::M2)
        .then(|| kink_certificate(p, &setup.cond, &setup.velocity, &setup.kernel).ok())
        .flatten()
}

fn describe(p: &Profile) -> String {
    format!(
        "trace_minus = {}, trace_plus = {}, residual = {:e}, nodes = {}, bisection fallbacks = {}",
        p.trace_minus, p.trace_plus, p.residual_sup, p.stats.nodes, p.stats.bisection_fallbacks
    )
}

fn profile(setup: &Setup, sink: &mut ArtifactSink) -> Result<Vec<String>> {
    let problem = setup.problem()?;
    let p = build_one(
        &problem,
        setup.scenario.traces.first().copied(),
        &setup.solver_params(),
    )?;
    let kink = kink_of(setup, &p);
    let csv = sink.write("profile.csv", &profile_csv(&p, kink.as_ref()))?;
    emit_plot_script(
        sink,
        "profile.gp",
        &[csv],
        PlotStyle::Profiles,
        &setup.tag.label.to_string(),
    )?;
    let mut lines = vec![setup.tag.to_string(), describe(&p)];
    if let Some(k) = kink {
        lines.push(format!(
            "kink: predicted = {}, observed = {}, relative error = {:e}",
            k.predicted_jump, k.observed_jump, k.relative_error
        ));
    }
    Ok(lines)
}

/// True when consecutive members (sorted by trace) are nodewise ordered
/// away from `x = 0`, up to rounding.
pub fn non_crossing(family: &[Profile]) -> bool {
    family.windows(2).all(|pair| {
        let (a, b) = (&pair[0], &pair[1]);
        let z = a.zero_index();
        a.grid.values.len() == b.grid.values.len()
            && a.grid
                .values
                .iter()
                .zip(&b.grid.values)
                .enumerate()
                .all(|(i, (qa, qb))| i == z || *qa <= qb + MONOTONE_SLACK)
    })
}

fn build_family(setup: &Setup, problem: &ProfileProblem, traces: &[f64]) -> Result<Vec<Profile>> {
    if problem.case.multiplicity != Multiplicity::Infinite {
        return Err(roughroad::Error::UnsupportedCase {
            case: problem.case.label.to_string(),
        }
        .into());
    }
    if traces.is_empty() {
        return Err(CliError::config(
            "traces",
            "a family needs at least one trace",
        ));
    }
    let params = setup.solver_params();
    Ok(match setup.model {
        Model::M1 => roughroad::build_profile_family(problem, traces, &params)?,
        Model::M2 => roughroad::build_profile_family_m2(problem, traces, &params)?,
    })
}

fn write_family(
    setup: &Setup,
    family: &[Profile],
    sink: &mut ArtifactSink,
    dir: &str,
) -> Result<Vec<PathBuf>> {
    family
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let kink = kink_of(setup, p);
            sink.write(
                format!("{dir}family_{k:02}.csv"),
                &profile_csv(p, kink.as_ref()),
            )
        })
        .collect()
}

fn family(setup: &Setup, sink: &mut ArtifactSink) -> Result<Vec<String>> {
    let problem = setup.problem()?;
    let fam = build_family(setup, &problem, &setup.scenario.traces)?;
    let files = write_family(setup, &fam, sink, "")?;
    emit_plot_script(
        sink,
        "family.gp",
        &files,
        PlotStyle::Profiles,
        &setup.tag.label.to_string(),
    )?;
    let mut lines = vec![setup.tag.to_string(), format!("members: {}", fam.len())];
    lines.extend(fam.iter().map(describe));
    lines.push(format!("non-crossing: {}", non_crossing(&fam)));
    lines.push(format!("min gap: {:e}", roughroad::family_min_gap(&fam)));
    Ok(lines)
}

const DIAG_WINDOW: f64 = 2.0;

fn diagnostics_csv(setup: &Setup, out: &RunOutput, table: Option<&FamilyTable>) -> Result<String> {
    let step = Candidate::Step(setup.rho_minus, setup.rho_plus);
    let dist = persistence_metric(&out.snapshots, step, DIAG_WINDOW);
    let mut s = String::from("t,mass,min,max,step_distance,phi_spread,l1_nearest\n");
    for (snap, (_, d)) in out.snapshots.iter().zip(dist) {
        let lo = snap.cells.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = snap.cells.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (phi, l1) = match table {
            Some(t) => {
                let d = phi_map(snap, t, PhiOptions::default())?;
                (
                    d.phi_spread.to_string(),
                    d.l1_distance_to_nearest.to_string(),
                )
            }
            None => (String::new(), String::new()),
        };
        s.push_str(&format!(
            "{},{},{lo},{hi},{d},{phi},{l1}\n",
            snap.t,
            snap.mass()
        ));
    }
    Ok(s)
}

/// Riemann run plus snapshot files, diagnostics and a plot script under
/// `dir`. With a family, the diagnostics include the trace spread.
fn simulate_into(
    setup: &Setup,
    family: Option<&[Profile]>,
    sink: &mut ArtifactSink,
    dir: &str,
) -> Result<Vec<String>> {
    let stepper = Stepper::new(
        setup.model,
        setup.cond,
        setup.velocity,
        &setup.kernel,
        setup.dx,
    )?;
    let init = riemann_initial(setup.rho_minus, setup.rho_plus, &setup.sim_grid()?)?
        .with_scheme(setup.scheme, setup.scenario.cfl);
    let table = match family {
        Some(f) if !f.is_empty() => {
            let t_relax = setup.scenario.t_final.min(10.0);
            let relaxed = relax_family(&stepper, f, &init, t_relax)?;
            let traces: Vec<f64> = f.iter().map(|p| p.trace_plus).collect();
            Some(FamilyTable::from_states(&relaxed, &traces, DIAG_WINDOW)?)
        }
        _ => None,
    };
    let out = stepper.run(init, setup.scenario.t_final, &setup.snapshot_times())?;
    let mut files = Vec::new();
    for (k, snap) in out.snapshots.iter().enumerate() {
        files.push(sink.write(
            format!("{dir}snapshot_{k:03}.csv"),
            &snapshot_csv(setup.model, snap),
        )?);
    }
    sink.write(
        format!("{dir}diagnostics.csv"),
        &diagnostics_csv(setup, &out, table.as_ref())?,
    )?;
    let title = format!("{} Riemann data", setup.tag.label);
    emit_plot_script(
        sink,
        &format!("{dir}snapshots.gp"),
        &files,
        PlotStyle::Snapshots,
        &title,
    )?;
    let last: &SimState = out
        .final_state
        .as_ref()
        .expect("run returns its final state");
    Ok(vec![
        format!(
            "scheme = {}, steps = {}, t = {}",
            last.scheme, out.steps, last.t
        ),
        format!("max mass defect per step = {:e}", out.max_mass_defect),
    ])
}

fn simulate(setup: &Setup, sink: &mut ArtifactSink) -> Result<Vec<String>> {
    let family = match (setup.tag.multiplicity, setup.scenario.traces.is_empty()) {
        (Multiplicity::Infinite, false) => Some(build_family(
            setup,
            &setup.problem()?,
            &setup.scenario.traces,
        )?),
        _ => None,
    };
    let mut lines = vec![setup.tag.to_string()];
    lines.extend(simulate_into(setup, family.as_deref(), sink, "")?);
    Ok(lines)
}

/// Per-case record written to `case.json` in the sweep.
#[derive(Debug, Clone, Serialize)]
struct CaseRecord {
    case: String,
    model: String,
    multiplicity: String,
    stability: String,
    kappa_minus: f64,
    kappa_plus: f64,
    fbar: f64,
    rho_minus: f64,
    rho_plus: f64,
    traces: Vec<f64>,
    failed_traces: Vec<(f64, String)>,
}

/// Marker file names for a tag: multiplicity, stability and, when no
/// profile exists, `no_stationary_profile`.
pub fn markers(tag: &CaseTag) -> Vec<String> {
    let stability = match (tag.multiplicity, tag.stable) {
        (Multiplicity::None, _) => "na",
        (_, true) => "stable",
        (_, false) => "unstable",
    };
    let mut m = vec![
        format!("multiplicity_{}", tag.multiplicity),
        format!("stability_{stability}"),
    ];
    if tag.multiplicity == Multiplicity::None {
        m.push("no_stationary_profile".into());
    }
    m
}

pub const SWEEP_MEMBERS: usize = 5;

fn sweep_case(base: &Scenario, label: CaseLabel, root: PathBuf) -> Result<(ArtifactSink, String)> {
    let CaseLabel::Regular { letter, .. } = label else {
        unreachable!("the sweep covers regular cases only")
    };
    let (km, kp) = if letter.slowdown() {
        (2.0, 1.0)
    } else {
        (1.0, 2.0)
    };
    let fbar = base.fbar.unwrap_or(0.1875);
    let mut scenario = Scenario::from_case(letter.model(), km, kp, fbar, &label.to_string());
    scenario.h = base.h;
    scenario.dx = base.dx;
    scenario.t_final = base.t_final;
    scenario.snapshot_times = base.snapshot_times.clone();
    scenario.scheme = base.scheme.clone();
    scenario.cfl = base.cfl;
    scenario.kernel = base.kernel.clone();
    scenario.velocity = base.velocity.clone();
    let setup = scenario.resolve()?;
    let mut sink = ArtifactSink::new(root.join(label.to_string()))?;
    sink.write("scenario.toml", &scenario.to_toml())?;
    for m in markers(&setup.tag) {
        sink.write(&m, &format!("{}\n", setup.tag))?;
    }

    let problem = setup.problem()?;
    let params = setup.solver_params();
    let mut traces = Vec::new();
    let mut failed = Vec::new();
    let mut profiles = Vec::new();
    match setup.tag.multiplicity {
        Multiplicity::Infinite => {
            let range = problem.trace_range()?;
            for t in range.spread(SWEEP_MEMBERS) {
                match build_one(&problem, Some(t), &params) {
                    Ok(p) => {
                        traces.push(t);
                        profiles.push(p);
                    }
                    // Members past the blow-up threshold are reported, not fatal.
                    Err(CliError::Numerical(e @ roughroad::Error::Blowup { .. })) => {
                        failed.push((t, e.to_string()))
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Multiplicity::Unique => profiles.push(build_one(&problem, None, &params)?),
        Multiplicity::None => {}
    }
    if !profiles.is_empty() {
        let files = write_family(&setup, &profiles, &mut sink, "")?;
        emit_plot_script(
            &mut sink,
            "profiles.gp",
            &files,
            PlotStyle::Profiles,
            &label.to_string(),
        )?;
    }
    let family = matches!(setup.tag.multiplicity, Multiplicity::Infinite).then_some(&profiles[..]);
    simulate_into(&setup, family, &mut sink, "")?;
    let record = CaseRecord {
        case: label.to_string(),
        model: setup.model.to_string(),
        multiplicity: setup.tag.multiplicity.to_string(),
        stability: markers(&setup.tag)[1]
            .trim_start_matches("stability_")
            .to_string(),
        kappa_minus: km,
        kappa_plus: kp,
        fbar: setup.fbar,
        rho_minus: setup.rho_minus,
        rho_plus: setup.rho_plus,
        traces,
        failed_traces: failed,
    };
    sink.write(
        "case.json",
        &(serde_json::to_string_pretty(&record).expect("plain data") + "\n"),
    )?;
    Ok((sink, setup.tag.to_string()))
}

/// All sixteen cases at speed limits 2 and 1, run concurrently; each case
/// directory holds its scenario, markers, profiles and a simulation.
fn sweep(base: &Scenario, sink: &mut ArtifactSink) -> Result<Vec<String>> {
    let labels: Vec<CaseLabel> = CaseLetter::all()
        .into_iter()
        .flat_map(|letter| (1..=4).map(move |index| CaseLabel::Regular { letter, index }))
        .collect();
    let root = sink.root().to_path_buf();
    let results: Vec<Result<(ArtifactSink, String)>> = labels
        .par_iter()
        .map(|&label| sweep_case(base, label, root.clone()))
        .collect();
    let mut lines = Vec::new();
    for r in results {
        let (case_sink, line) = r?;
        sink.absorb(case_sink);
        lines.push(line);
    }
    Ok(lines)
}
