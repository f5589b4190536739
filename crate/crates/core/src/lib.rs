//! Quantum energy transport through a trapped-ion spin magnet.
//!
//! Two collective axial modes of a mixed-species ion crystal are laser cooled
//! and serve as source and drain reservoirs with Lorentzian densities of
//! states. The magnet is coupled to them through red-sideband exchange, and the
//! reservoirs are eliminated to give a master equation on the spins alone.
//!
//! Units: ħ = k_B = 1, every frequency and rate is angular (rad/s), masses are
//! in amu and lengths in metres. [`units`] holds the conversions used at I/O.

pub mod crystal;
pub mod dimer;
pub mod error;
pub mod lindblad;
pub mod magnet;
pub mod ode;
pub mod oracle;
pub mod protocol;
pub mod reservoir;
pub mod transport;
pub mod units;

pub use error::{Error, Result};

/// Complex dense matrix used for all operators.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Complex dense vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
