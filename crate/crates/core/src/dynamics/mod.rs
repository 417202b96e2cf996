//! Dense linear algebra on the joint electron-nuclear space.
//!
//! Operators are stored as dense complex matrices with the electron as the
//! most significant tensor factor. Hamiltonians are in rad/s and times in
//! seconds; propagators are `exp(−iHt)`.

mod operator;
mod pulse;
mod sequence;

pub use operator::{embed, embed_pair, spin, Operator, C64, ONE, ZERO};
pub use pulse::{ideal_rotation, pulse_unitary, Pulse};
pub use sequence::{sequence_unitary, Element, PulseSequence};

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("slot {slot} out of range for {k} nuclei")]
    SlotOutOfRange { slot: usize, k: usize },
    #[error("operator is not Hermitian (relative deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (max |U†U - 1| = {0:e})")]
    NotUnitary(f64),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("invalid delay: {0} s")]
    InvalidDelay(f64),
}

/// Operator satisfying U†U = 1 within [`tolerances::UNITARY`].
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(Operator);

impl Unitary {
    pub fn new(op: Operator) -> Result<Self, DynamicsError> {
        let dev = unitarity_deviation(&op);
        if dev > tolerances::UNITARY {
            return Err(DynamicsError::NotUnitary(dev));
        }
        Ok(Self(op))
    }

    /// Wraps an operator known to be unitary by construction. Debug builds
    /// still verify it.
    pub(crate) fn assume(op: Operator) -> Self {
        debug_assert!(unitarity_deviation(&op) <= tolerances::UNITARY);
        Self(op)
    }

    pub fn identity(dim: usize) -> Self {
        Self(Operator::identity(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    /// `self · rhs`, i.e. `rhs` acts first.
    pub fn then_after(&self, rhs: &Unitary) -> Self {
        Self(&self.0 * &rhs.0)
    }

    /// `next · self`: apply `self`, then `next`.
    pub fn followed_by(&self, next: &Unitary) -> Self {
        Self(&next.0 * &self.0)
    }

    pub fn pow(&self, mut n: u64) -> Self {
        let mut base = self.0.clone();
        let mut acc = Operator::identity(self.dim());
        while n > 0 {
            if n & 1 == 1 {
                acc = &acc * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        Self(acc)
    }

    /// U A U†.
    pub fn conjugate(&self, a: &Operator) -> Operator {
        &(&self.0 * a) * &self.0.adjoint()
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.0)
    }
}

pub fn unitarity_deviation(op: &Operator) -> f64 {
    (&op.adjoint() * op).max_abs_diff(&Operator::identity(op.dim()))
}

/// Hermitian, unit-trace, positive semidefinite operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Density(Operator);

impl Density {
    pub fn new(op: Operator) -> Result<Self, DynamicsError> {
        let herm = op.max_abs_diff(&op.adjoint());
        if herm > tolerances::HERMITIAN_REL {
            return Err(DynamicsError::InvalidDensity(format!("not Hermitian ({herm:e})")));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tolerances::DENSITY_TRACE || tr.im.abs() > tolerances::DENSITY_TRACE {
            return Err(DynamicsError::InvalidDensity(format!("trace {tr}")));
        }
        let min = op.hermitian_eigenvalues().first().copied().unwrap_or(0.0);
        if min < -tolerances::DENSITY_POSITIVITY {
            return Err(DynamicsError::InvalidDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self(op))
    }

    /// Electron in |α⟩, nuclei fully mixed: Pα ⊗ 1 / 2^K.
    pub fn electron_alpha(k: usize) -> Self {
        let nuc = 1usize << k;
        let mut op = spin::proj_alpha();
        if k > 0 {
            op = op.kron(&Operator::identity(nuc).scale(1.0 / nuc as f64));
        }
        Self(op)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.0
    }

    /// tr(ρ A).
    pub fn expectation(&self, a: &Operator) -> f64 {
        (&self.0 * a).trace().re
    }
}

/// U ρ U†.
pub fn evolve(rho: &Density, u: &Unitary) -> Result<Density, DynamicsError> {
    if rho.dim() != u.dim() {
        return Err(DynamicsError::DimensionMismatch { left: rho.dim(), right: u.dim() });
    }
    Ok(Density(u.conjugate(&rho.0)))
}

/// exp(−i h t) by spectral decomposition; `h` in rad/s.
pub fn expm_hermitian(h: &Operator, t: f64) -> Result<Unitary, DynamicsError> {
    Ok(Propagator::new(h)?.at(t))
}

/// Cached eigendecomposition of a Hermitian generator, for evaluating
/// exp(−iht) at many times.
#[derive(Clone, Debug)]
pub struct Propagator {
    vectors: DMatrix<C64>,
    values: Vec<f64>,
}

impl Propagator {
    pub fn new(h: &Operator) -> Result<Self, DynamicsError> {
        let dev = h.hermitian_deviation();
        if dev > tolerances::HERMITIAN_INPUT_REL {
            return Err(DynamicsError::NotHermitian(dev));
        }
        let sym = DMatrix::from_fn(h.dim(), h.dim(), |i, j| 0.5 * (h.get(i, j) + h.get(j, i).conj()));
        let eig = SymmetricEigen::new(sym);
        Ok(Self { vectors: eig.eigenvectors, values: eig.eigenvalues.iter().copied().collect() })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> Unitary {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &w) in self.values.iter().enumerate() {
            let phase = C64::from_polar(1.0, -w * t);
            for i in 0..n {
                scaled[(i, j)] *= phase;
            }
        }
        Unitary::assume(Operator::from_matrix(scaled * self.vectors.adjoint()).expect("square power-of-two"))
    }
}
