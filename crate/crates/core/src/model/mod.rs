//! Flux, velocity, kernel and road-coefficient definitions, the flux level
//! sets and the case classifier.

mod case;
mod kernel;
mod velocity;

use std::fmt;
use std::str::FromStr;

pub use case::{classify, CaseLabel, CaseLetter, CaseTag, Multiplicity, DEFAULT_CLASSIFY_TOL};
pub use kernel::{Kernel, KernelMoments, KernelShape};
pub(crate) use kernel::{GAUSS_NODES, GAUSS_WEIGHTS};
pub use velocity::{VelocityLaw, VelocityModel};

use crate::error::{Error, Result};
use crate::roots::{newton_bisect, RootOptions};

/// Which nonlocal law: velocity of the averaged density (M1) or averaged
/// `kappa * v` (M2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    M1,
    M2,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::M1 => "M1",
            Model::M2 => "M2",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "M1" | "m1" => Ok(Model::M1),
            "M2" | "m2" => Ok(Model::M2),
            other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
        }
    }
}

/// Piecewise-constant speed limit with a single jump at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoadCondition {
    pub kappa_minus: f64,
    pub kappa_plus: f64,
}

impl RoadCondition {
    pub fn new(kappa_minus: f64, kappa_plus: f64) -> Result<Self> {
        for (what, value) in [("kappa_minus", kappa_minus), ("kappa_plus", kappa_plus)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Domain { what, value });
            }
        }
        Ok(Self {
            kappa_minus,
            kappa_plus,
        })
    }

    /// `kappa(x)`, taking the right value at the jump itself.
    #[inline]
    pub fn kappa(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.kappa_minus
        } else {
            self.kappa_plus
        }
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_minus.max(self.kappa_plus)
    }

    pub fn swapped(&self) -> Self {
        Self {
            kappa_minus: self.kappa_plus,
            kappa_plus: self.kappa_minus,
        }
    }
}

/// `f(kappa, rho) = kappa * rho * v(rho)`.
pub fn flux(kappa: f64, rho: f64, v: &VelocityModel) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Domain {
            what: "rho",
            value: rho,
        });
    }
    Ok(kappa * rho * v.eval(rho))
}

/// `d f / d rho` for `kappa = 1`.
#[inline]
fn flux_slope(rho: f64, v: &VelocityModel) -> f64 {
    v.eval(rho) + rho * v.deriv(rho)
}

/// The unique maximiser of `rho v(rho)` on `[0, 1]`.
pub fn stagnation_point(v: &VelocityModel) -> Result<f64> {
    let root = newton_bisect(
        |r| (flux_slope(r, v), 2.0 * v.deriv(r) + r * v.second_deriv(r)),
        0.0,
        1.0,
        0.5,
        RootOptions::new(0.0, 1e-15, 100),
    )?;
    Ok(root.x)
}

/// Roots of `f(kappa, rho) = fbar` on the increasing branch `[0, rho_hat]`
/// and the decreasing branch `[rho_hat, 1]`.
fn branch_roots(kappa: f64, fbar: f64, rho_hat: f64, v: &VelocityModel) -> Result<(f64, f64)> {
    let fmax = kappa * rho_hat * v.eval(rho_hat);
    if fbar > fmax {
        return Err(Error::FluxOutOfRange { fbar, max: fmax });
    }
    if fbar >= fmax * (1.0 - 4.0 * f64::EPSILON) {
        return Ok((rho_hat, rho_hat));
    }
    let g = |r: f64| (kappa * r * v.eval(r) - fbar, kappa * flux_slope(r, v));
    let opts = RootOptions::new(0.0, 1e-13, 100);
    let lo = if fbar == 0.0 {
        0.0
    } else {
        newton_bisect(g, 0.0, rho_hat, 0.5 * rho_hat, opts)?.x
    };
    let hi = if fbar == 0.0 {
        1.0
    } else {
        newton_bisect(g, rho_hat, 1.0, 0.5 * (1.0 + rho_hat), opts)?.x
    };
    Ok((lo, hi))
}

/// The four densities at flux level `fbar`, ordered `rho1 < rho2 <= rho_hat
/// <= rho3 < rho4`. `rho1`, `rho4` lie on the flux with the larger
/// `kappa`, `rho2`, `rho3` on the one with the smaller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxLevelSet {
    pub fbar: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    pub rho4: f64,
    pub rho_hat: f64,
    /// `(lower, upper)` roots of `f^-(rho) = fbar`.
    pub minus: (f64, f64),
    /// `(lower, upper)` roots of `f^+(rho) = fbar`.
    pub plus: (f64, f64),
}

impl FluxLevelSet {
    /// Far-field pair `(rho-, rho+)` for sub-case `index` (1..=4) of the
    /// current road. The index picks the branch of each asymptote: `rho-`
    /// on the stable (lower) branch for 1 and 2, `rho+` on the stable
    /// (upper) branch for 1 and 3.
    pub fn far_field(&self, index: u8) -> Result<(f64, f64)> {
        let (m_lo, m_hi) = self.minus;
        let (p_lo, p_hi) = self.plus;
        match index {
            1 => Ok((m_lo, p_hi)),
            2 => Ok((m_lo, p_lo)),
            3 => Ok((m_hi, p_hi)),
            4 => Ok((m_hi, p_lo)),
            _ => Err(Error::InvalidInput(format!(
                "case index must be 1..=4, got {index}"
            ))),
        }
    }
}

pub fn solve_flux_level(
    fbar: f64,
    cond: &RoadCondition,
    v: &VelocityModel,
) -> Result<FluxLevelSet> {
    if !(fbar >= 0.0) || !fbar.is_finite() {
        return Err(Error::Domain {
            what: "fbar",
            value: fbar,
        });
    }
    let rho_hat = stagnation_point(v)?;
    let minus = branch_roots(cond.kappa_minus, fbar, rho_hat, v)?;
    let plus = branch_roots(cond.kappa_plus, fbar, rho_hat, v)?;
    let (big, small) = if cond.kappa_minus >= cond.kappa_plus {
        (minus, plus)
    } else {
        (plus, minus)
    };
    Ok(FluxLevelSet {
        fbar,
        rho1: big.0,
        rho2: small.0,
        rho3: small.1,
        rho4: big.1,
        rho_hat,
        minus,
        plus,
    })
}

/// The other density carrying the same flux on the same road segment.
pub fn conjugate_density(rho: f64, v: &VelocityModel) -> Result<f64> {
    let rho_hat = stagnation_point(v)?;
    let (lo, hi) = branch_roots(1.0, rho * v.eval(rho), rho_hat, v)?;
    Ok(if rho >= rho_hat { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lwr() -> VelocityModel {
        VelocityModel::lwr()
    }

    #[test]
    fn flux_examples() {
        let v = lwr();
        assert_eq!(flux(1.0, 0.0, &v).unwrap(), 0.0);
        assert_eq!(flux(2.0, 0.5, &v).unwrap(), 0.5);
        assert_eq!(flux(1.0, 0.75, &v).unwrap(), 0.1875);
        assert!(flux(1.0, 1.2, &v).is_err());
    }

    #[test]
    fn stagnation_point_of_lwr() {
        let v = lwr();
        let r = stagnation_point(&v).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert!(flux_slope(0.4, &v) > 0.0);
        assert!(flux_slope(0.6, &v) < 0.0);
    }

    #[test]
    fn stagnation_point_of_concave_law() {
        // d/drho [rho (1-rho)(1+c rho)] = 1 + 2(c-1) rho - 3 c rho^2.
        let c = 0.5;
        let v = VelocityModel::new(VelocityLaw::Concave { c }).unwrap();
        let r = stagnation_point(&v).unwrap();
        let exact = (2.0 * (c - 1.0) + ((2.0 * (c - 1.0)).powi(2) + 12.0 * c).sqrt()) / (6.0 * c);
        assert!((r - exact).abs() < 1e-14);
    }

    #[test]
    fn zero_flux_level() {
        let cond = RoadCondition::new(2.0, 1.0).unwrap();
        let l = solve_flux_level(0.0, &cond, &lwr()).unwrap();
        assert_eq!((l.rho1, l.rho2, l.rho3, l.rho4), (0.0, 0.0, 1.0, 1.0));
    }

    #[test]
    fn maximal_flux_level_coincides() {
        let cond = RoadCondition::new(1.0, 1.0).unwrap();
        let l = solve_flux_level(0.25, &cond, &lwr()).unwrap();
        assert_eq!(l.rho2, 0.5);
        assert_eq!(l.rho3, 0.5);
    }

    #[test]
    fn out_of_range_level() {
        let cond = RoadCondition::new(2.0, 1.0).unwrap();
        assert!(matches!(
            solve_flux_level(0.3, &cond, &lwr()),
            Err(Error::FluxOutOfRange { .. })
        ));
    }

    #[test]
    fn far_field_selection_mirrors() {
        let v = lwr();
        let a = solve_flux_level(0.1875, &RoadCondition::new(2.0, 1.0).unwrap(), &v).unwrap();
        let b = solve_flux_level(0.1875, &RoadCondition::new(1.0, 2.0).unwrap(), &v).unwrap();
        assert_eq!(a.far_field(1).unwrap(), (a.rho1, a.rho3));
        assert_eq!(a.far_field(2).unwrap(), (a.rho1, a.rho2));
        assert_eq!(a.far_field(3).unwrap(), (a.rho4, a.rho3));
        assert_eq!(a.far_field(4).unwrap(), (a.rho4, a.rho2));
        assert_eq!(b.far_field(1).unwrap(), (b.rho2, b.rho4));
        assert_eq!(b.far_field(2).unwrap(), (b.rho2, b.rho1));
        assert_eq!(b.far_field(3).unwrap(), (b.rho3, b.rho4));
        assert_eq!(b.far_field(4).unwrap(), (b.rho3, b.rho1));
    }

    #[test]
    fn conjugate_of_three_quarters() {
        let r = conjugate_density(0.75, &lwr()).unwrap();
        assert!((r - 0.25).abs() < 1e-13);
    }
}
