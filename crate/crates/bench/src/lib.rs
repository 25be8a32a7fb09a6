//! Shared fixtures for the benchmarks.

use roughroad::{CaseLabel, CaseLetter, Kernel, ProfileProblem, RoadCondition, VelocityModel};

pub const H: f64 = 0.2;

/// The A1 or C1 problem at the reference flux level, with `kappa- = 2`, `kappa+ = 1`.
pub fn slowdown_problem(letter: CaseLetter) -> ProfileProblem {
    ProfileProblem::from_case(
        CaseLabel::Regular { letter, index: 1 },
        RoadCondition::new(2.0, 1.0).expect("positive limits"),
        VelocityModel::lwr(),
        Kernel::linear(H).expect("positive horizon"),
        0.1875,
    )
    .expect("A1 and C1 exist at this level")
}
