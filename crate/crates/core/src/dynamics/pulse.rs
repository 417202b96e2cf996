use std::f64::consts::PI;

use super::{embed, expm_hermitian, spin, DynamicsError, Operator, Unitary, C64};
use crate::spinsys::SpinSystem;
use crate::units::angular;

/// Rectangular microwave pulse on the electron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    /// Rotation angle, rad, in (0, 2π].
    pub angle: f64,
    /// Rotation axis azimuth, rad; 0 is +x.
    pub phase: f64,
    /// Seconds; 0 means an instantaneous rotation.
    pub duration: f64,
    /// Carrier detuning, Hz.
    pub detuning: f64,
}

impl Pulse {
    pub fn new(angle: f64, phase: f64, duration: f64, detuning: f64) -> Result<Self, DynamicsError> {
        if !(angle > 0.0 && angle <= 2.0 * PI * (1.0 + 1e-12)) {
            return Err(DynamicsError::InvalidPulse(format!("angle {angle} outside (0, 2π]")));
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(DynamicsError::InvalidPulse(format!("duration {duration} s")));
        }
        if !phase.is_finite() || !detuning.is_finite() {
            return Err(DynamicsError::InvalidPulse("non-finite phase or detuning".into()));
        }
        Ok(Self { angle, phase, duration, detuning })
    }

    pub fn ideal(angle: f64, phase: f64) -> Self {
        Self::new(angle, phase, 0.0, 0.0).expect("valid ideal pulse")
    }

    pub fn is_ideal(&self) -> bool {
        self.duration == 0.0
    }
}

/// Instantaneous electron rotation exp(−iθ(cos φ Sx + sin φ Sy)) ⊗ 1.
pub fn ideal_rotation(angle: f64, phase: f64, k: usize) -> Unitary {
    let half = 0.5 * angle;
    let rot = &Operator::identity(2).scale(half.cos())
        + &spin::transverse(phase).scale_complex(C64::new(0.0, -2.0 * half.sin()));
    let u = if k == 0 { rot } else { rot.kron(&Operator::identity(1 << k)) };
    Unitary::assume(u)
}

/// Propagator of a pulse. Finite pulses include the free Hamiltonian, so the
/// nuclei keep precessing while the electron is driven.
pub fn pulse_unitary(p: &Pulse, system: &SpinSystem) -> Unitary {
    let k = system.nuclei().len();
    if p.is_ideal() {
        return ideal_rotation(p.angle, p.phase, k);
    }
    let rabi = p.angle / p.duration;
    let drive = embed(&spin::transverse(p.phase), 0, k).expect("electron slot");
    let detune = embed(&spin::z(), 0, k).expect("electron slot");
    let h = &(&drive.scale(rabi) + &detune.scale(angular(p.detuning))) + &system.joint_hamiltonian();
    expm_hermitian(&h, p.duration).expect("pulse Hamiltonian is Hermitian")
}
