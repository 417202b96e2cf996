//! Spin system description and Hamiltonians.
//!
//! The electron manifolds are handled in the projector convention: in |α⟩
//! (the NV mS = 0 state) a nucleus feels only the bias field and precesses
//! at its Larmor frequency ω0; in |β⟩ it evolves under
//! (ω0 + a∥)·Iz + a⊥·Ix. Spectral lines therefore sit at ω0 and ω0 + a∥, and
//! a multipulse train is resonant when τ = π / (ω0 + a∥/2), the mean of the
//! two.
//!
//! All public frequencies are in Hz (or MHz where noted); Hamiltonians are
//! returned in rad/s.

use std::f64::consts::PI;

use thiserror::Error;

use crate::dynamics::{spin, Operator};
use crate::units::{angular, MHZ};

/// Largest supported number of nuclei (joint dimension 128).
pub const MAX_NUCLEI: usize = 6;

/// Parallel hyperfine splitting of the intrinsic 15N nucleus, MHz.
pub const NV15_HYPERFINE_MHZ: f64 = 3.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("bias field must be positive and finite, got {0} T")]
    InvalidField(f64),
    #[error("relaxation times must satisfy t1 >= t2 > 0 (t1 = {t1} s, t2 = {t2} s)")]
    InvalidRelaxation { t1: f64, t2: f64 },
    #[error("at most {MAX_NUCLEI} nuclei are supported, got {0}")]
    TooManyNuclei(usize),
    #[error("invalid hyperfine coupling: {0}")]
    InvalidCoupling(String),
    #[error("gyromagnetic ratio must be nonzero and finite, got {0}")]
    InvalidGamma(f64),
    #[error("unknown isotope '{0}'")]
    UnknownIsotope(String),
    #[error("periodic-flip spacing must be positive, got {0} s")]
    InvalidTau(f64),
    #[error("first flip offset must lie in (0, tau], got {lead} s for tau {tau} s")]
    InvalidLead { tau: f64, lead: f64 },
}

/// A spin-1/2 nuclear species.
#[derive(Clone, Debug, PartialEq)]
pub struct Isotope {
    pub name: String,
    /// Gyromagnetic ratio γ/2π, MHz/T, signed.
    pub gamma: f64,
}

const TABLE: &[(&str, f64)] = &[
    ("1H", 42.577478),
    ("13C", 10.7084),
    ("15N", -4.316),
    ("19F", 40.0776),
    ("29Si", -8.4655),
    ("31P", 17.2514),
];

impl Isotope {
    pub fn new(name: impl Into<String>, gamma: f64) -> Result<Self, SpinError> {
        if gamma == 0.0 || !gamma.is_finite() {
            return Err(SpinError::InvalidGamma(gamma));
        }
        Ok(Self { name: name.into(), gamma })
    }

    pub fn lookup(name: &str) -> Option<Self> {
        TABLE
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, g)| Self { name: (*n).to_string(), gamma: *g })
    }

    pub fn table() -> Vec<Self> {
        TABLE.iter().map(|(n, g)| Self { name: (*n).to_string(), gamma: *g }).collect()
    }
}

/// |γ|·B0 in MHz.
pub fn larmor_frequency(isotope: &Isotope, b0: f64) -> Result<f64, SpinError> {
    check_field(b0)?;
    Ok(isotope.gamma.abs() * b0)
}

/// The two 15N lines of the NV's own nitrogen, MHz, ascending.
pub fn nv15_lines(b0: f64) -> Result<[f64; 2], SpinError> {
    let n15 = Isotope::lookup("15N").expect("15N in table");
    let bare = larmor_frequency(&n15, b0)?;
    let shifted = (bare - NV15_HYPERFINE_MHZ).abs();
    Ok(if bare <= shifted { [bare, shifted] } else { [shifted, bare] })
}

fn check_field(b0: f64) -> Result<(), SpinError> {
    if b0 > 0.0 && b0.is_finite() {
        Ok(())
    } else {
        Err(SpinError::InvalidField(b0))
    }
}

/// A nucleus coupled to the electron.
#[derive(Clone, Debug, PartialEq)]
pub struct Nucleus {
    pub isotope: Isotope,
    /// Parallel coupling a∥, Hz, signed.
    pub a_par: f64,
    /// Transverse coupling a⊥, Hz, non-negative.
    pub a_perp: f64,
}

impl Nucleus {
    pub fn new(isotope: Isotope, a_par: f64, a_perp: f64) -> Result<Self, SpinError> {
        if !a_par.is_finite() || !a_perp.is_finite() {
            return Err(SpinError::InvalidCoupling("non-finite value".into()));
        }
        if a_perp < 0.0 {
            return Err(SpinError::InvalidCoupling(format!("a_perp = {a_perp} Hz is negative")));
        }
        Ok(Self { isotope, a_par, a_perp })
    }
}

/// Which electron manifold a conditional Hamiltonian refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Manifold {
    Alpha,
    Beta,
}

/// Free-precession Hamiltonian family used between the two entangling
/// blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FreeHamiltonianKind {
    /// One electron π flip at the midpoint of the period.
    H1,
    /// No flips.
    H2,
    /// Electron flips every `tau`; the first flip comes after `lead`. The
    /// period t is rounded to a whole number of `tau` cycles.
    H3 { tau: f64, lead: f64 },
}

impl FreeHamiltonianKind {
    /// Periodic flips at tau, 2tau, ...
    pub fn h3(tau: f64) -> Result<Self, SpinError> {
        Self::h3_with_lead(tau, tau)
    }

    pub fn h3_with_lead(tau: f64, lead: f64) -> Result<Self, SpinError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SpinError::InvalidTau(tau));
        }
        if !(lead > 0.0 && lead <= tau) {
            return Err(SpinError::InvalidLead { tau, lead });
        }
        Ok(Self::H3 { tau, lead })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::H1 => "h1",
            Self::H2 => "h2",
            Self::H3 { .. } => "h3",
        }
    }
}

/// Bias field, electron relaxation and coupled nuclei.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinSystem {
    b0: f64,
    nuclei: Vec<Nucleus>,
    t1: f64,
    t2: f64,
}

impl SpinSystem {
    pub fn new(b0: f64, nuclei: Vec<Nucleus>, t1_electron: f64, t2_electron: f64) -> Result<Self, SpinError> {
        check_field(b0)?;
        if nuclei.len() > MAX_NUCLEI {
            return Err(SpinError::TooManyNuclei(nuclei.len()));
        }
        if !(t2_electron > 0.0 && t1_electron >= t2_electron) || t2_electron.is_nan() || t1_electron.is_nan() {
            return Err(SpinError::InvalidRelaxation { t1: t1_electron, t2: t2_electron });
        }
        Ok(Self { b0, nuclei, t1: t1_electron, t2: t2_electron })
    }

    pub fn with_relaxation(&self, t1: f64, t2: f64) -> Result<Self, SpinError> {
        Self::new(self.b0, self.nuclei.clone(), t1, t2)
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn nuclei(&self) -> &[Nucleus] {
        &self.nuclei
    }

    /// Electron T1, seconds.
    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Electron T2, seconds.
    pub fn t2(&self) -> f64 {
        self.t2
    }

    /// Joint Hilbert-space dimension 2^(K+1).
    pub fn dim(&self) -> usize {
        1 << (self.nuclei.len() + 1)
    }

    /// Signed bare precession frequency γ·B0 of nucleus `i`, Hz.
    pub fn larmor_hz(&self, i: usize) -> f64 {
        self.nuclei[i].isotope.gamma * MHZ * self.b0
    }

    /// Signed mean of the two manifold frequencies, ω0 + a∥/2, Hz.
    pub fn center_frequency_hz(&self, i: usize) -> f64 {
        self.larmor_hz(i) + 0.5 * self.nuclei[i].a_par
    }

    /// Pulse spacing resonant with nucleus `i`: half its center period.
    pub fn resonance_tau(&self, i: usize) -> f64 {
        0.5 / self.center_frequency_hz(i).abs()
    }

    /// Nuclear-sector Hamiltonian conditioned on the electron manifold,
    /// rad/s, dimension 2^K.
    pub fn free_hamiltonian(&self, manifold: Manifold) -> Operator {
        let k = self.nuclei.len();
        let mut h = Operator::zeros(1 << k);
        for (j, n) in self.nuclei.iter().enumerate() {
            let w0 = angular(self.larmor_hz(j));
            let single = match manifold {
                Manifold::Alpha => spin::z().scale(w0),
                Manifold::Beta => &spin::z().scale(w0 + angular(n.a_par)) + &spin::x().scale(angular(n.a_perp)),
            };
            h = &h + &embed_nuclear(&single, j, k);
        }
        h
    }

    /// |α⟩⟨α| ⊗ H_α + |β⟩⟨β| ⊗ H_β on the joint space, rad/s.
    pub fn joint_hamiltonian(&self) -> Operator {
        let ha = spin::proj_alpha().kron(&self.free_hamiltonian(Manifold::Alpha));
        let hb = spin::proj_beta().kron(&self.free_hamiltonian(Manifold::Beta));
        &ha + &hb
    }
}

/// Embeds a single-nucleus operator at nuclear index `j` (0-based) among
/// `k` nuclei, without the electron factor.
pub fn embed_nuclear(op: &Operator, j: usize, k: usize) -> Operator {
    assert!(j < k && op.dim() == 2);
    let mut out = Operator::identity(1);
    for s in 0..k {
        out = out.kron(&if s == j { op.clone() } else { spin::identity() });
    }
    out
}

/// Secular two-spin Hamiltonian generated by an on-resonance multipulse
/// train, rad/s: (2a⊥/π)·Sz⊗Ix. Its action on the electron coherence is a
/// conditional nuclear rotation by φ = a⊥·t/π after a train of length t.
pub fn effective_cp_hamiltonian(nucleus: &Nucleus) -> Operator {
    let c = 2.0 * angular(nucleus.a_perp) / PI;
    spin::z().kron(&spin::x()).scale(c)
}

/// Nuclear Rabi angular frequency a⊥/π, rad/s, of the secular dynamics.
pub fn rabi_angular_frequency(nucleus: &Nucleus) -> f64 {
    angular(nucleus.a_perp) / PI
}
