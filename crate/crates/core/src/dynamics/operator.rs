use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::DynamicsError;
use crate::tolerances;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Dense square operator on a space whose dimension is a power of two.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self, DynamicsError> {
        if m.nrows() != m.ncols() {
            return Err(DynamicsError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if !m.nrows().is_power_of_two() {
            return Err(DynamicsError::NotPowerOfTwo(m.nrows()));
        }
        Ok(Self(m))
    }

    /// Row-major construction; panics on a malformed literal, so only use it
    /// with fixed small tables.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            .expect("operator literal must be square with power-of-two size")
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim.is_power_of_two());
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim.is_power_of_two());
        Self(DMatrix::identity(dim, dim))
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        let n = entries.len();
        assert!(n.is_power_of_two());
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * C64::new(c, 0.0))
    }

    pub fn scale_complex(&self, c: C64) -> Self {
        Self(&self.0 * c)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest entry of |A − A†| relative to the largest entry of A.
    pub fn hermitian_deviation(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        self.max_abs_diff(&self.adjoint()) / scale
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= tolerances::HERMITIAN_REL
    }

    pub fn commutator(&self, other: &Operator) -> Self {
        &(self * other) - &(other * self)
    }

    /// Spectral norm of a Hermitian operator (largest |eigenvalue|).
    pub fn hermitian_norm(&self) -> f64 {
        nalgebra::SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Eigenvalues of a Hermitian operator in ascending order.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        assert_eq!(self.dim(), rhs.dim(), "operator dimension mismatch");
        Operator(&self.0 - &rhs.0)
    }
}

/// Spin-1/2 operators (half the Pauli matrices) and manifold projectors.
/// Basis order is (|α⟩, |β⟩) = (m = +1/2, m = −1/2).
pub mod spin {
    use super::*;

    pub fn identity() -> Operator {
        Operator::identity(2)
    }

    pub fn x() -> Operator {
        Operator::from_rows(&[&[ZERO, C64::new(0.5, 0.0)], &[C64::new(0.5, 0.0), ZERO]])
    }

    pub fn y() -> Operator {
        Operator::from_rows(&[&[ZERO, C64::new(0.0, -0.5)], &[C64::new(0.0, 0.5), ZERO]])
    }

    pub fn z() -> Operator {
        Operator::diagonal(&[C64::new(0.5, 0.0), C64::new(-0.5, 0.0)])
    }

    /// cos φ·Sx + sin φ·Sy.
    pub fn transverse(phase: f64) -> Operator {
        &x().scale(phase.cos()) + &y().scale(phase.sin())
    }

    pub fn proj_alpha() -> Operator {
        Operator::diagonal(&[ONE, ZERO])
    }

    pub fn proj_beta() -> Operator {
        Operator::diagonal(&[ZERO, ONE])
    }
}

/// Embeds a single-spin operator at `slot` among `k + 1` spins; slot 0 is
/// the electron, slots 1..=k are nuclei.
pub fn embed(op: &Operator, slot: usize, k: usize) -> Result<Operator, DynamicsError> {
    if slot > k {
        return Err(DynamicsError::SlotOutOfRange { slot, k });
    }
    if op.dim() != 2 {
        return Err(DynamicsError::DimensionMismatch { left: op.dim(), right: 2 });
    }
    let mut out = if slot == 0 { op.clone() } else { spin::identity() };
    for s in 1..=k {
        let factor = if s == slot { op.clone() } else { spin::identity() };
        out = out.kron(&factor);
    }
    Ok(out)
}

/// Embeds an operator on the electron plus one nucleus (a 4×4 two-spin
/// operator with the electron as the first factor) into the joint space.
pub fn embed_pair(op: &Operator, nucleus: usize, k: usize) -> Result<Operator, DynamicsError> {
    if nucleus == 0 || nucleus > k {
        return Err(DynamicsError::SlotOutOfRange { slot: nucleus, k });
    }
    if op.dim() != 4 {
        return Err(DynamicsError::DimensionMismatch { left: op.dim(), right: 4 });
    }
    let dim = 1usize << (k + 1);
    let m = op.matrix();
    let nuc_bit = k - nucleus;
    let elec_bit = k;
    let pair_index = |i: usize| ((i >> elec_bit) & 1) * 2 + ((i >> nuc_bit) & 1);
    let rest_mask = !((1usize << elec_bit) | (1usize << nuc_bit));
    Operator::from_matrix(DMatrix::from_fn(dim, dim, |i, j| {
        if i & rest_mask != j & rest_mask {
            ZERO
        } else {
            m[(pair_index(i), pair_index(j))]
        }
    }))
}
