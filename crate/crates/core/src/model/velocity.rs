use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Closed-form velocity laws `v(rho)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityLaw {
    /// `v = 1 - rho`.
    Lwr,
    /// `v = (1 - rho)(1 + c rho)`, admissible for `0 <= c < 1`.
    Concave { c: f64 },
    /// `v = 1 - rho^a`.
    Power { a: f64 },
    /// `v = (1 - rho)^a`.
    DecayPower { a: f64 },
}

/// A velocity law that has been checked against the structural assumptions
/// `v(0) = 1`, `v(1) = 0`, `v' < 0` and `v'' <= 0` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityModel {
    law: VelocityLaw,
}

const SAMPLES: usize = 1000;
const TOL: f64 = 1e-12;

impl VelocityModel {
    pub fn lwr() -> Self {
        Self {
            law: VelocityLaw::Lwr,
        }
    }

    /// Validates `law` by sampling 1001 points of `[0, 1]`.
    pub fn new(law: VelocityLaw) -> Result<Self> {
        let model = Self { law };
        let reject = |reason: String| Error::InvalidVelocity {
            name: model.name(),
            reason,
        };
        if (model.eval(0.0) - 1.0).abs() > TOL {
            return Err(reject(format!("v(0) = {}", model.eval(0.0))));
        }
        if model.eval(1.0).abs() > TOL {
            return Err(reject(format!("v(1) = {}", model.eval(1.0))));
        }
        for k in 0..=SAMPLES {
            let rho = k as f64 / SAMPLES as f64;
            let d1 = model.deriv(rho);
            let d2 = model.second_deriv(rho);
            if !(d1 < 0.0) || !d1.is_finite() {
                return Err(reject(format!("v'({rho}) = {d1} is not negative")));
            }
            if d2 > TOL || !d2.is_finite() {
                return Err(reject(format!("v''({rho}) = {d2} is positive")));
            }
        }
        Ok(model)
    }

    pub fn law(&self) -> VelocityLaw {
        self.law
    }

    pub fn name(&self) -> String {
        match self.law {
            VelocityLaw::Lwr => "lwr".to_string(),
            VelocityLaw::Concave { c } => format!("concave:{c}"),
            VelocityLaw::Power { a } => format!("power:{a}"),
            VelocityLaw::DecayPower { a } => format!("decay:{a}"),
        }
    }

    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        match self.law {
            VelocityLaw::Lwr => 1.0 - rho,
            VelocityLaw::Concave { c } => (1.0 - rho) * (1.0 + c * rho),
            VelocityLaw::Power { a } => 1.0 - rho.powf(a),
            VelocityLaw::DecayPower { a } => (1.0 - rho).max(0.0).powf(a),
        }
    }

    #[inline]
    pub fn deriv(&self, rho: f64) -> f64 {
        match self.law {
            VelocityLaw::Lwr => -1.0,
            VelocityLaw::Concave { c } => c - 1.0 - 2.0 * c * rho,
            VelocityLaw::Power { a } => -a * rho.powf(a - 1.0),
            VelocityLaw::DecayPower { a } => -a * (1.0 - rho).max(0.0).powf(a - 1.0),
        }
    }

    #[inline]
    pub fn second_deriv(&self, rho: f64) -> f64 {
        match self.law {
            VelocityLaw::Lwr => 0.0,
            VelocityLaw::Concave { c } => -2.0 * c,
            VelocityLaw::Power { a } | VelocityLaw::DecayPower { a } if a == 1.0 => 0.0,
            VelocityLaw::Power { a } => -a * (a - 1.0) * rho.powf(a - 2.0),
            VelocityLaw::DecayPower { a } => a * (a - 1.0) * (1.0 - rho).max(0.0).powf(a - 2.0),
        }
    }
}

impl Default for VelocityModel {
    fn default() -> Self {
        Self::lwr()
    }
}

impl fmt::Display for VelocityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for VelocityModel {
    type Err = Error;

    /// Accepts `lwr`, `concave:<c>`, `power:<a>` and `decay:<a>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let param = |arg: Option<&str>| -> Result<f64> {
            arg.and_then(|a| a.trim().parse::<f64>().ok())
                .ok_or_else(|| {
                    Error::InvalidInput(format!("velocity `{s}` needs a numeric parameter"))
                })
        };
        let law = match kind {
            "lwr" | "greenshields" => VelocityLaw::Lwr,
            "concave" => VelocityLaw::Concave { c: param(arg)? },
            "power" => VelocityLaw::Power { a: param(arg)? },
            "decay" => VelocityLaw::DecayPower { a: param(arg)? },
            _ => return Err(Error::InvalidInput(format!("unknown velocity model `{s}`"))),
        };
        Self::new(law)
    }
}
