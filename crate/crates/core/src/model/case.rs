use std::fmt;
use std::str::FromStr;

use super::{flux, stagnation_point, Model, RoadCondition, VelocityModel};
use crate::error::{Error, Result};

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// `A`/`B` for (M1), `C`/`D` for (M2); the first of each pair has
/// `kappa- > kappa+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseLetter {
    A,
    B,
    C,
    D,
}

impl CaseLetter {
    pub fn new(model: Model, slowdown: bool) -> Self {
        match (model, slowdown) {
            (Model::M1, true) => CaseLetter::A,
            (Model::M1, false) => CaseLetter::B,
            (Model::M2, true) => CaseLetter::C,
            (Model::M2, false) => CaseLetter::D,
        }
    }

    pub fn model(self) -> Model {
        match self {
            CaseLetter::A | CaseLetter::B => Model::M1,
            CaseLetter::C | CaseLetter::D => Model::M2,
        }
    }

    /// True when the road slows down across the jump (`kappa- > kappa+`).
    pub fn slowdown(self) -> bool {
        matches!(self, CaseLetter::A | CaseLetter::C)
    }

    pub fn all() -> [CaseLetter; 4] {
        [CaseLetter::A, CaseLetter::B, CaseLetter::C, CaseLetter::D]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    Regular { letter: CaseLetter, index: u8 },
    TrivialZero,
    TrivialOne,
    TrivialStep,
}

impl CaseLabel {
    pub fn regular(letter: CaseLetter, index: u8) -> Result<Self> {
        if !(1..=4).contains(&index) {
            return Err(Error::InvalidInput(format!(
                "case index must be 1..=4, got {index}"
            )));
        }
        Ok(CaseLabel::Regular { letter, index })
    }

    pub fn index(&self) -> Option<u8> {
        match self {
            CaseLabel::Regular { index, .. } => Some(*index),
            _ => None,
        }
    }

    pub fn letter(&self) -> Option<CaseLetter> {
        match self {
            CaseLabel::Regular { letter, .. } => Some(*letter),
            _ => None,
        }
    }

    /// All sixteen regular labels, `A1..A4, B1..B4, C1..C4, D1..D4`.
    pub fn all_regular() -> Vec<CaseLabel> {
        CaseLetter::all()
            .into_iter()
            .flat_map(|letter| (1..=4).map(move |index| CaseLabel::Regular { letter, index }))
            .collect()
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::Regular { letter, index } => write!(f, "{letter:?}{index}"),
            CaseLabel::TrivialZero => f.write_str("trivial-zero"),
            CaseLabel::TrivialOne => f.write_str("trivial-one"),
            CaseLabel::TrivialStep => f.write_str("trivial-step"),
        }
    }
}

impl FromStr for CaseLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "trivial-zero" => return Ok(CaseLabel::TrivialZero),
            "trivial-one" => return Ok(CaseLabel::TrivialOne),
            "trivial-step" => return Ok(CaseLabel::TrivialStep),
            _ => {}
        }
        let bad = || Error::InvalidInput(format!("unknown case label `{s}`"));
        let mut chars = s.chars();
        let letter = match chars.next().ok_or_else(bad)? {
            'A' | 'a' => CaseLetter::A,
            'B' | 'b' => CaseLetter::B,
            'C' | 'c' => CaseLetter::C,
            'D' | 'd' => CaseLetter::D,
            _ => return Err(bad()),
        };
        let index: u8 = chars.as_str().parse().map_err(|_| bad())?;
        CaseLabel::regular(letter, index).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Multiplicity {
    Infinite,
    Unique,
    None,
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Multiplicity::Infinite => "infinite",
            Multiplicity::Unique => "unique",
            Multiplicity::None => "none",
        })
    }
}

impl FromStr for Multiplicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "infinite" => Ok(Multiplicity::Infinite),
            "unique" => Ok(Multiplicity::Unique),
            "none" => Ok(Multiplicity::None),
            other => Err(Error::InvalidInput(format!(
                "unknown multiplicity `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CaseTag {
    pub label: CaseLabel,
    pub model: Model,
    pub multiplicity: Multiplicity,
    pub stable: bool,
}

impl CaseTag {
    /// Looks up the existence/stability table for a label.
    pub fn from_label(label: CaseLabel, model: Model) -> Self {
        let (multiplicity, stable) = match label {
            CaseLabel::Regular { index: 1, .. } => (Multiplicity::Infinite, true),
            CaseLabel::Regular { index: 2, .. } => (Multiplicity::Unique, false),
            CaseLabel::Regular { .. } => (Multiplicity::None, false),
            CaseLabel::TrivialZero | CaseLabel::TrivialOne | CaseLabel::TrivialStep => {
                (Multiplicity::Unique, false)
            }
        };
        let model = label.letter().map(CaseLetter::model).unwrap_or(model);
        Self {
            label,
            model,
            multiplicity,
            stable,
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stability = match (self.multiplicity, self.stable) {
            (Multiplicity::None, _) => "n/a",
            (_, true) => "stable",
            (_, false) => "unstable",
        };
        write!(f, "{} | {} | {}", self.label, self.multiplicity, stability)
    }
}

/// Classifies the far-field pair `(rho-, rho+)` into one of the sixteen
/// existence/stability cases (or a trivial zero-flux case).
pub fn classify(
    cond: &RoadCondition,
    rho_minus: f64,
    rho_plus: f64,
    v: &VelocityModel,
    model: Model,
    tol: f64,
) -> Result<CaseTag> {
    let f_minus = flux(cond.kappa_minus, rho_minus, v)?;
    let f_plus = flux(cond.kappa_plus, rho_plus, v)?;
    let residual = (f_minus - f_plus).abs();
    if residual >= tol {
        return Err(Error::ConstraintViolation { residual });
    }
    if cond.kappa_minus == cond.kappa_plus {
        return Err(Error::HomogeneousRoad);
    }
    let letter = CaseLetter::new(model, cond.kappa_minus > cond.kappa_plus);

    if f_plus.max(f_minus) < tol {
        let low = |r: f64| r < 0.5;
        let label = match (low(rho_minus), low(rho_plus)) {
            (true, true) => CaseLabel::TrivialZero,
            (false, false) => CaseLabel::TrivialOne,
            (true, false) => CaseLabel::TrivialStep,
            (false, true) => CaseLabel::Regular { letter, index: 4 },
        };
        return Ok(CaseTag::from_label(label, model));
    }

    let rho_hat = stagnation_point(v)?;
    for rho in [rho_minus, rho_plus] {
        if (rho - rho_hat).abs() < tol {
            return Err(Error::Ambiguous { rho, rho_hat });
        }
    }
    let index = match (rho_minus < rho_hat, rho_plus > rho_hat) {
        (true, true) => 1,
        (true, false) => 2,
        (false, true) => 3,
        (false, false) => 4,
    };
    Ok(CaseTag::from_label(
        CaseLabel::Regular { letter, index },
        model,
    ))
}
