//! Measurement protocols: multipulse sweeps, free-precession acquisitions in
//! one and two time dimensions, relaxation envelopes and shot noise.
//!
//! Every entangling block `Ucp` is
//! `π/2(y) · [τ/2 − π − τ/2]^N · π/2(−x)`, and the free-precession signal is
//! `p = |⟨α| Ucp† Ufree Ucp |α⟩|²` averaged over the unpolarized nuclei.
//! Phase cycling repeats the acquisition with the readout π/2 that follows
//! the free period inverted and returns half the difference, which isolates
//! the nuclear part of the signal.

mod analytic;
mod engine;
mod noise;

pub use analytic::{
    analytic_signal, periodic_flip_rabi_frequency, secular_post_cp_state, AnalyticPoint, RotationModel,
};
pub use engine::{
    fid_protocol, measure_sequence, multipulse_count_sweep, multipulse_sweep, post_cp_state, protocol_2d,
    ucp_unitary,
};
pub use noise::{add_shot_noise, add_shot_noise_2d, ShotNoise};

use std::f64::consts::PI;

use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::spinsys::{SpinError, SpinSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Spin(#[from] SpinError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("closed form not applicable: {0}")]
    NotApplicable(String),
}

/// Phase sequence of the π pulses in a multipulse train.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhasePattern {
    /// All pulses about x.
    Cp,
    /// x y x y y x y x.
    Xy8,
}

impl PhasePattern {
    pub fn phases(&self) -> &'static [f64] {
        const H: f64 = 0.5 * PI;
        match self {
            Self::Cp => &[0.0],
            Self::Xy8 => &[0.0, H, 0.0, H, H, 0.0, H, 0.0],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Cp => "cp",
            Self::Xy8 => "xy8",
        }
    }
}

/// Multipulse train parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpParams {
    pub n_pulses: u64,
    /// Center-to-center pulse spacing, seconds.
    pub tau: f64,
    pub pattern: PhasePattern,
    /// π-pulse length, seconds; 0 for instantaneous pulses.
    pub pulse_duration: f64,
}

impl CpParams {
    pub fn new(n_pulses: u64, tau: f64, pattern: PhasePattern, pulse_duration: f64) -> Result<Self, ProtocolError> {
        if n_pulses == 0 {
            return Err(ProtocolError::InvalidParams("n_pulses must be at least 1".into()));
        }
        if pattern == PhasePattern::Xy8 && n_pulses % 8 != 0 {
            return Err(ProtocolError::InvalidParams(format!("XY8 needs a multiple of 8 pulses, got {n_pulses}")));
        }
        if !(pulse_duration >= 0.0 && pulse_duration.is_finite()) {
            return Err(ProtocolError::InvalidParams(format!("pulse duration {pulse_duration} s")));
        }
        if !(tau > pulse_duration && tau.is_finite()) {
            return Err(ProtocolError::InvalidParams(format!(
                "tau ({tau} s) must exceed the pulse duration ({pulse_duration} s)"
            )));
        }
        Ok(Self { n_pulses, tau, pattern, pulse_duration })
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self, ProtocolError> {
        Self::new(self.n_pulses, tau, self.pattern, self.pulse_duration)
    }

    pub fn with_n(&self, n_pulses: u64) -> Result<Self, ProtocolError> {
        Self::new(n_pulses, self.tau, self.pattern, self.pulse_duration)
    }

    /// Filter frequency 1/(2τ), Hz.
    pub fn filter_frequency(&self) -> f64 {
        0.5 / self.tau
    }

    pub fn train_duration(&self) -> f64 {
        self.n_pulses as f64 * self.tau
    }
}

/// Uniform time axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcquisitionGrid {
    pub start: f64,
    pub dwell: f64,
    pub count: usize,
}

impl AcquisitionGrid {
    pub fn new(start: f64, dwell: f64, count: usize) -> Result<Self, ProtocolError> {
        if !(dwell > 0.0 && dwell.is_finite()) || !start.is_finite() {
            return Err(ProtocolError::InvalidParams(format!("grid dwell {dwell} s, start {start} s")));
        }
        if count < 2 {
            return Err(ProtocolError::InvalidParams(format!("grid needs at least 2 points, got {count}")));
        }
        if start < 0.0 {
            return Err(ProtocolError::InvalidParams(format!("grid start {start} s is negative")));
        }
        Ok(Self { start, dwell, count })
    }

    /// A degenerate one-point axis at time `t`. The dwell is kept only so
    /// that frequency axes stay defined.
    pub fn point(t: f64, dwell: f64) -> Result<Self, ProtocolError> {
        let mut g = Self::new(t, dwell, 2)?;
        g.count = 1;
        Ok(g)
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dwell
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.time(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.time(self.count.saturating_sub(1))
    }
}

/// Split of a signal into the part carried by electron coherence and the
/// part carried by nuclear polarization, plus the elapsed time used for
/// relaxation envelopes. For an uncycled signal `p = 1/2 + electronic +
/// nuclear`; a cycled signal equals `nuclear`.
#[derive(Clone, Debug, PartialEq)]
pub struct Components {
    pub electronic: Vec<f64>,
    pub nuclear: Vec<f64>,
    pub elapsed: Vec<f64>,
}

/// Descriptive metadata carried into output headers.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalMeta {
    pub protocol: String,
    /// Column name of the swept variable.
    pub axis: String,
    pub phase_cycled: bool,
    pub extra: Vec<(String, String)>,
}

impl SignalMeta {
    pub fn new(protocol: &str, axis: &str, phase_cycled: bool) -> Self {
        Self { protocol: protocol.into(), axis: axis.into(), phase_cycled, extra: Vec::new() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub grid: AcquisitionGrid,
    pub values: Vec<f64>,
    pub components: Option<Components>,
    pub meta: SignalMeta,
}

impl Signal {
    /// Bare samples without a component split.
    pub fn from_samples(grid: AcquisitionGrid, values: Vec<f64>, meta: SignalMeta) -> Result<Self, ProtocolError> {
        if values.len() != grid.count {
            return Err(ProtocolError::InvalidParams(format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.count
            )));
        }
        Ok(Self { grid, values, components: None, meta })
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }
}

/// Row-major `values[i1 * n2 + i2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal2D {
    pub grid1: AcquisitionGrid,
    pub grid2: AcquisitionGrid,
    pub values: Vec<f64>,
    pub components: Option<Components>,
    pub meta: SignalMeta,
}

impl Signal2D {
    pub fn get(&self, i1: usize, i2: usize) -> f64 {
        self.values[i1 * self.grid2.count + i2]
    }

    /// The t1 trace at fixed t2 index.
    pub fn column(&self, i2: usize) -> Vec<f64> {
        (0..self.grid1.count).map(|i1| self.get(i1, i2)).collect()
    }
}

fn recombine(c: &Components, cycled: bool) -> Vec<f64> {
    c.electronic
        .iter()
        .zip(&c.nuclear)
        .map(|(e, n)| if cycled { *n } else { 0.5 + e + n })
        .collect()
}

fn envelope_components(c: &Components, system: &SpinSystem) -> Components {
    let decay = |t: f64, t_rel: f64| if t_rel.is_infinite() { 1.0 } else { (-t / t_rel).exp() };
    Components {
        electronic: c.electronic.iter().zip(&c.elapsed).map(|(e, t)| e * decay(*t, system.t2())).collect(),
        nuclear: c.nuclear.iter().zip(&c.elapsed).map(|(n, t)| n * decay(*t, system.t1())).collect(),
        elapsed: c.elapsed.clone(),
    }
}

/// Damps the electronic component with exp(−t/T2) and the nuclear
/// component with exp(−t/T1), using the system's electron relaxation times.
/// A cycled signal therefore only sees the T1 envelope. Signals without a
/// component split are returned unchanged.
pub fn apply_envelopes(signal: &Signal, system: &SpinSystem) -> Signal {
    let mut out = signal.clone();
    if let Some(c) = &signal.components {
        let damped = envelope_components(c, system);
        out.values = recombine(&damped, signal.meta.phase_cycled);
        out.components = Some(damped);
    }
    out
}

pub fn apply_envelopes_2d(signal: &Signal2D, system: &SpinSystem) -> Signal2D {
    let mut out = signal.clone();
    if let Some(c) = &signal.components {
        let damped = envelope_components(c, system);
        out.values = recombine(&damped, signal.meta.phase_cycled);
        out.components = Some(damped);
    }
    out
}
