//! Scenario files: flat TOML documents, one scenario per file.
//!
//! ```toml
//! model = "M1"
//! kappa_minus = 2.0
//! kappa_plus = 1.0
//! fbar = 0.1875
//! case = "A1"
//! dx = 0.005
//! traces = [0.4, 0.5, 0.6]
//! ```

use std::path::Path;

use roughroad::{
    classify, flux, solve_flux_level, CaseLabel, CaseTag, Kernel, KernelShape, Model,
    ProfileProblem, RoadCondition, Scheme, SimGrid, SolverParams, VelocityModel,
    DEFAULT_CLASSIFY_TOL,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn default_h() -> f64 {
    0.2
}
fn default_x_min() -> f64 {
    -3.0
}
fn default_x_max() -> f64 {
    3.0
}
fn default_sim_x_min() -> f64 {
    -5.0
}
fn default_t_final() -> f64 {
    20.0
}
fn default_cfl() -> f64 {
    0.4
}
fn default_kernel() -> String {
    "linear".into()
}
fn default_velocity() -> String {
    "lwr".into()
}
fn default_output() -> String {
    "out".into()
}
fn default_tol() -> f64 {
    DEFAULT_CLASSIFY_TOL
}

/// The document as written. Densities are given either directly
/// (`rho_minus`, `rho_plus`) or through a flux level and a case label
/// (`fbar`, `case`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: String,
    pub kappa_minus: f64,
    pub kappa_plus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default = "default_h")]
    pub h: f64,
    /// Defaults to `h / 40`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    /// Profile domain.
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    /// Simulation domain; the right end defaults to `5 + h`.
    #[serde(default = "default_sim_x_min")]
    pub sim_x_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_x_max: Option<f64>,
    #[serde(default)]
    pub traces: Vec<f64>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// `upwind` or `lax-friedrichs`; defaults per model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_velocity")]
    pub velocity: String,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default = "default_tol")]
    pub classify_tol: f64,
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().to_string();
        // The error span covers the key or its value; either way the key
        // is what precedes `=` on that line.
        let key = e
            .span()
            .map(|span| {
                let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
                let line = &text[start..text[start..].find('\n').map_or(text.len(), |i| start + i)];
                line.split('=').next().unwrap_or("").trim().to_string()
            })
            .filter(|k| !k.is_empty())
            .unwrap_or_else(|| "document".into());
        CliError::config(key, message)
    })
}

pub fn read_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text)
}

impl Scenario {
    /// A scenario with every default applied and densities given by `fbar`
    /// and `case`.
    pub fn from_case(
        model: Model,
        kappa_minus: f64,
        kappa_plus: f64,
        fbar: f64,
        case: &str,
    ) -> Self {
        Self {
            model: model.to_string(),
            kappa_minus,
            kappa_plus,
            rho_minus: None,
            rho_plus: None,
            fbar: Some(fbar),
            case: Some(case.to_string()),
            h: default_h(),
            dx: None,
            x_min: default_x_min(),
            x_max: default_x_max(),
            sim_x_min: default_sim_x_min(),
            sim_x_max: None,
            traces: Vec::new(),
            t_final: default_t_final(),
            snapshot_times: Vec::new(),
            scheme: None,
            cfl: default_cfl(),
            kernel: default_kernel(),
            velocity: default_velocity(),
            output: default_output(),
            classify_tol: default_tol(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are plain TOML values")
    }

    pub fn resolve(&self) -> Result<Setup> {
        Setup::new(self.clone())
    }
}

/// A validated scenario with model objects built.
#[derive(Debug, Clone)]
pub struct Setup {
    pub scenario: Scenario,
    pub model: Model,
    pub cond: RoadCondition,
    pub velocity: VelocityModel,
    pub kernel: Kernel,
    pub fbar: f64,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub tag: CaseTag,
    pub dx: f64,
    pub scheme: Scheme,
}

fn bad(key: &str, e: impl std::fmt::Display) -> CliError {
    CliError::config(key, e.to_string())
}

fn density(key: &str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(bad(key, format!("density {value} is outside [0, 1]")))
    }
}

fn positive(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(bad(key, format!("{value} must be positive")))
    }
}

impl Setup {
    fn new(s: Scenario) -> Result<Self> {
        let model: Model = s.model.parse().map_err(|e| bad("model", e))?;
        let cond = RoadCondition::new(
            positive("kappa_minus", s.kappa_minus)?,
            positive("kappa_plus", s.kappa_plus)?,
        )
        .map_err(|e| bad("kappa_minus", e))?;
        let velocity: VelocityModel = s.velocity.parse().map_err(|e| bad("velocity", e))?;
        let shape: KernelShape = s.kernel.parse().map_err(|e| bad("kernel", e))?;
        let h = positive("h", s.h)?;
        let kernel = Kernel::new(shape, h).map_err(|e| bad("h", e))?;
        let dx = positive("dx", s.dx.unwrap_or(h / 40.0))?;
        kernel.cells_per_horizon(dx).map_err(|e| bad("dx", e))?;
        if s.x_min > -h {
            return Err(bad(
                "x_min",
                format!("{} must be at most -h = {}", s.x_min, -h),
            ));
        }
        if s.x_max < h {
            return Err(bad(
                "x_max",
                format!("{} must be at least h = {h}", s.x_max),
            ));
        }
        if s.sim_x_min > -h {
            return Err(bad(
                "sim_x_min",
                format!("{} must be at most -h = {}", s.sim_x_min, -h),
            ));
        }
        if let Some(x) = s.sim_x_max {
            if x < h {
                return Err(bad("sim_x_max", format!("{x} must be at least h = {h}")));
            }
        }
        if !(s.cfl > 0.0 && s.cfl <= 0.5) {
            return Err(bad("cfl", format!("{} must lie in (0, 0.5]", s.cfl)));
        }
        positive("t_final", s.t_final)?;
        for &t in &s.snapshot_times {
            if !(0.0..=s.t_final).contains(&t) {
                return Err(bad(
                    "snapshot_times",
                    format!("{t} is outside [0, t_final]"),
                ));
            }
        }
        for &t in &s.traces {
            density("traces", t)?;
        }
        let scheme = match &s.scheme {
            Some(name) => name.parse().map_err(|e| bad("scheme", e))?,
            None => Scheme::default_for(model),
        };
        positive("classify_tol", s.classify_tol)?;

        let (rho_minus, rho_plus, fbar, tag) = match (s.rho_minus, s.rho_plus, s.fbar, &s.case) {
            (Some(rm), Some(rp), None, None) => {
                let (rm, rp) = (density("rho_minus", rm)?, density("rho_plus", rp)?);
                let tag = classify(&cond, rm, rp, &velocity, model, s.classify_tol)
                    .map_err(|e| bad("rho_plus", e))?;
                let fbar =
                    flux(cond.kappa_minus, rm, &velocity).map_err(|e| bad("rho_minus", e))?;
                (rm, rp, fbar, tag)
            }
            (None, None, Some(fbar), Some(case)) => {
                let label: CaseLabel = case.parse().map_err(|e| bad("case", e))?;
                let (Some(letter), Some(index)) = (label.letter(), label.index()) else {
                    return Err(bad("case", format!("`{case}` is not one of A1..D4")));
                };
                if letter.model() != model {
                    return Err(bad(
                        "case",
                        format!("case {case} belongs to {}, not {model}", letter.model()),
                    ));
                }
                if letter.slowdown() != (cond.kappa_minus > cond.kappa_plus) {
                    return Err(bad(
                        "case",
                        format!("case {case} does not match the ordering of the speed limits"),
                    ));
                }
                let levels = solve_flux_level(positive("fbar", fbar)?, &cond, &velocity)
                    .map_err(|e| bad("fbar", e))?;
                let (rm, rp) = levels.far_field(index).map_err(|e| bad("case", e))?;
                let tag = classify(&cond, rm, rp, &velocity, model, s.classify_tol)
                    .map_err(|e| bad("case", e))?;
                (rm, rp, fbar, tag)
            }
            _ => {
                return Err(bad(
                    "rho_minus",
                    "give either rho_minus and rho_plus, or fbar and case (not both)",
                ))
            }
        };
        Ok(Self {
            scenario: s,
            model,
            cond,
            velocity,
            kernel,
            fbar,
            rho_minus,
            rho_plus,
            tag,
            dx,
            scheme,
        })
    }

    pub fn problem(&self) -> Result<ProfileProblem> {
        Ok(ProfileProblem::new(
            self.model,
            self.cond,
            self.velocity,
            self.kernel,
            self.rho_minus,
            self.rho_plus,
        )?)
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams::new(self.dx).with_domain(self.scenario.x_min, self.scenario.x_max)
    }

    pub fn sim_grid(&self) -> Result<SimGrid> {
        let h = self.kernel.h();
        let x_max = self.scenario.sim_x_max.unwrap_or(5.0 + h);
        SimGrid::new(self.scenario.sim_x_min, x_max, self.dx).map_err(|e| bad("sim_x_min", e))
    }

    /// Snapshot times, with `t_final` appended when missing.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut times = self.scenario.snapshot_times.clone();
        times.sort_by(|a, b| a.total_cmp(b));
        if times.last() != Some(&self.scenario.t_final) {
            times.push(self.scenario.t_final);
        }
        times
    }
}
