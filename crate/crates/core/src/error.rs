use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} lies outside its admissible domain")]
    Domain { what: &'static str, value: f64 },

    #[error("velocity model `{name}` violates the structural assumptions: {reason}")]
    InvalidVelocity { name: String, reason: String },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("horizon h = {h} is not an integer multiple of dx = {dx}")]
    GridMismatch { h: f64, dx: f64 },

    #[error("root is not bracketed on [{lo}, {hi}] (f(lo) = {flo}, f(hi) = {fhi})")]
    NotBracketed {
        lo: f64,
        hi: f64,
        flo: f64,
        fhi: f64,
    },

    #[error("root solve did not converge within {iterations} iterations (last x = {x})")]
    NoConvergence { iterations: usize, x: f64 },

    #[error("flux level {fbar} exceeds the attainable maximum {max}")]
    FluxOutOfRange { fbar: f64, max: f64 },

    #[error("far-field states violate the flux balance: |f(k-, rho-) - f(k+, rho+)| = {residual}")]
    ConstraintViolation { residual: f64 },

    #[error(
        "density {rho} is within tolerance of the stagnation point {rho_hat}; case is ambiguous"
    )]
    Ambiguous { rho: f64, rho_hat: f64 },

    #[error("kappa- == kappa+: the road has no speed-limit jump")]
    HomogeneousRoad,

    #[error("averaging window at node {index} leaves the stored grid and no padding value is set")]
    WindowOutOfRange { index: usize },

    #[error("profile exceeds density 1 at x = {x}: the backward continuation blows up")]
    Blowup { x: f64 },

    #[error("homogeneous profile collapsed onto the constant state; seed perturbation too small")]
    SeedCollapse,

    #[error("profile lost monotonicity at x = {x}")]
    NonMonotone { x: f64 },

    #[error("trace {trace} is outside the admissible range {range}")]
    InadmissibleTrace { trace: f64, range: String },

    #[error("no stationary profile exists for case {case}")]
    NoProfile { case: String },

    #[error("operation does not apply to case {case}")]
    UnsupportedCase { case: String },

    #[error("predicted kink magnitude {predicted} is degenerate")]
    DegenerateKink { predicted: f64 },

    #[error("CFL factor {cfl} exceeds 0.5")]
    Cfl { cfl: f64 },

    #[error("cell {index} left [0, 1] with value {value}")]
    StateOutOfBounds { index: usize, value: f64 },

    #[error("{0}")]
    InvalidInput(String),
}
