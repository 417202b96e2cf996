//! Numerical tolerances shared by invariant checks and tests.

/// Relative Hermiticity tolerance for constructed Hamiltonians.
pub const HERMITIAN_REL: f64 = 1e-12;

/// Relative Hermiticity tolerance accepted on input to the exponential.
/// Looser than [`HERMITIAN_REL`] so that operators assembled by arithmetic
/// on large angular frequencies are not rejected for rounding.
pub const HERMITIAN_INPUT_REL: f64 = 1e-10;

/// Maximum entry of |U†U − 1| for a unitary.
pub const UNITARY: f64 = 1e-10;

/// Trace deviation allowed for a density matrix.
pub const DENSITY_TRACE: f64 = 1e-10;

/// Most negative eigenvalue allowed for a density matrix.
pub const DENSITY_POSITIVITY: f64 = 1e-10;

/// Trace change allowed under unitary evolution.
pub const TRACE_PRESERVATION: f64 = 1e-12;

/// Slack on the probability range [0, 1] for noiseless signals.
pub const PROBABILITY: f64 = 1e-10;

/// Parseval energy balance, relative.
pub const PARSEVAL_REL: f64 = 1e-9;

/// Relative slack used when a time must be an integer multiple of a period.
pub const GRID_SNAP_REL: f64 = 1e-9;

/// Relative tolerance for the on-resonance precondition of the closed-form
/// signal.
pub const RESONANCE_REL: f64 = 1e-2;
