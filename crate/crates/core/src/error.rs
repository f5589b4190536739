use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{branch} branch unstable: mode {mode} has Hessian eigenvalue {eigenvalue:.3e}")]
    Unstable {
        branch: char,
        mode: usize,
        eigenvalue: f64,
    },

    #[error("{what} did not converge (residual {residual:.3e})")]
    NoConvergence { what: String, residual: f64 },

    #[error("no cooling on mode {mode}: gamma_minus {gamma_minus:.4e} <= gamma_plus {gamma_plus:.4e}")]
    NoCooling {
        mode: usize,
        gamma_plus: f64,
        gamma_minus: f64,
    },

    #[error("{what} size {size} exceeds cap {cap}")]
    SizeCap {
        what: String,
        size: usize,
        cap: usize,
    },

    #[error("drive at {beat:.6e} rad/s is within the guard band of radial mode {mode} ({omega:.6e} rad/s)")]
    Resonance { mode: usize, beat: f64, omega: f64 },

    #[error("coupling/width ratio {ratio:.3} exceeds bound {bound} for reservoir {reservoir}")]
    Validity {
        reservoir: &'static str,
        ratio: f64,
        bound: f64,
    },

    #[error("step size underflow at t = {t:.4e} (h = {h:.3e}); the problem is stiff, use the steady-state solver")]
    Stiffness { t: f64, h: f64 },

    #[error("steady state: {0}")]
    SteadyState(String),
}
