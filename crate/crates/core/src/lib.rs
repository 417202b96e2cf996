//! Simulation and analysis toolkit for Fourier NMR detected by a single
//! nitrogen-vacancy electron spin.
//!
//! The crate is layered bottom-up:
//!
//! * [`dynamics`]: dense complex operators, Hermitian exponentials, pulses and
//!   sequence propagators on the joint electron-nuclear space.
//! * [`spinsys`]: isotopes, hyperfine-coupled nuclei and the Hamiltonians built
//!   from them.
//! * [`protocols`]: multipulse sweeps, free-precession (FID) protocols, 2D
//!   acquisitions, decoherence envelopes, shot noise and the closed-form
//!   single-nucleus signal.
//! * [`spectra`]: Fourier transforms, peak picking, time-domain tone fitting,
//!   alias resolution, isotope and harmonic labelling.
//! * [`seqlang`]: a small text language for pulse sequences.
//! * [`cli`]: configuration, file formats and the command implementations
//!   behind the `nvnmr` binary.

pub mod cli;
pub mod dynamics;
pub mod protocols;
pub mod seqlang;
pub mod spectra;
pub mod spinsys;
pub mod tolerances;
pub mod units;

pub use dynamics::{Density, Operator, Pulse, PulseSequence, Unitary};
pub use spinsys::{FreeHamiltonianKind, Isotope, Nucleus, SpinSystem};
