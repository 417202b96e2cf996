//! Closed-form free-precession signal of a single nucleus.
//!
//! With instantaneous pulses every propagator is block structured in the
//! electron manifolds, so the whole calculation reduces to 2×2 nuclear
//! matrices. After the entangling block the state has the form
//!
//! ```text
//! σa = 1/4 + (cos φ / 2)·Sx + Sz ⊗ (sin φ · m·I)
//! ```
//!
//! and the detected probability splits into an electronic and a nuclear
//! trace:
//!
//! ```text
//! p = 1/2 + (cos²φ / 2)·tr(U Sx U† Sx) + 2·tr(U SzQ U† SzQ),   Q = sin φ · m·I
//! ```
//!
//! The rotation (φ, m) is either taken from the exact manifold-conditional
//! propagators of the train, or from the secular limit φ = a⊥·N·τ/π about x.

use std::f64::consts::PI;

use super::{CpParams, ProtocolError};
use crate::dynamics::{spin, Operator, C64};
use crate::spinsys::{FreeHamiltonianKind, SpinSystem};
use crate::tolerances;
use crate::units::angular;

type M2 = [[C64; 2]; 2];

const I: C64 = C64::new(0.0, 1.0);
const Z: C64 = C64::new(0.0, 0.0);

fn id() -> M2 {
    [[C64::new(1.0, 0.0), Z], [Z, C64::new(1.0, 0.0)]]
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[Z; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn dag(a: &M2) -> M2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn scale(a: &M2, s: C64) -> M2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

fn tr(a: &M2) -> C64 {
    a[0][0] + a[1][1]
}

/// Spin-1/2 matrices I_x, I_y, I_z.
fn half_pauli(k: usize) -> M2 {
    let h = C64::new(0.5, 0.0);
    match k {
        0 => [[Z, h], [h, Z]],
        1 => [[Z, -I * 0.5], [I * 0.5, Z]],
        _ => [[h, Z], [Z, -h]],
    }
}

/// exp(−i t (hx·Ix + hz·Iz)) for real hx, hz.
fn su2(hx: f64, hz: f64, t: f64) -> M2 {
    let norm = hx.hypot(hz);
    if norm == 0.0 {
        return id();
    }
    let (s, c) = (0.5 * norm * t).sin_cos();
    let (nx, nz) = (hx / norm, hz / norm);
    [
        [C64::new(c, -s * nz), C64::new(0.0, -s * nx)],
        [C64::new(0.0, -s * nx), C64::new(c, s * nz)],
    ]
}

/// Joint operator that is block diagonal or block anti-diagonal in the
/// electron manifolds. `Anti(c, d)` is [[0, d], [c, 0]]: `c` carries |α⟩ to
/// |β⟩.
#[derive(Clone, Copy, Debug)]
enum Block {
    Diag(M2, M2),
    Anti(M2, M2),
}

impl Block {
    fn then(&self, next: &Block) -> Block {
        // next · self
        match (next, self) {
            (Block::Diag(a1, b1), Block::Diag(a2, b2)) => Block::Diag(mul(a1, a2), mul(b1, b2)),
            (Block::Diag(a, b), Block::Anti(c, d)) => Block::Anti(mul(b, c), mul(a, d)),
            (Block::Anti(c, d), Block::Diag(a, b)) => Block::Anti(mul(c, a), mul(d, b)),
            (Block::Anti(c1, d1), Block::Anti(c2, d2)) => Block::Diag(mul(d1, c2), mul(c1, d2)),
        }
    }

    fn pow(&self, mut n: u64) -> Block {
        let mut acc = Block::Diag(id(), id());
        let mut base = *self;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.then(&base);
            }
            n >>= 1;
            base = base.then(&base);
        }
        acc
    }

    /// tr(U Sx U† Sx).
    fn electronic_trace(&self) -> f64 {
        match self {
            Block::Diag(a, b) => 0.5 * tr(&mul(a, &dag(b))).re,
            Block::Anti(c, d) => 0.5 * tr(&mul(d, &dag(c))).re,
        }
    }

    /// tr(U (Sz⊗Q) U† (Sz⊗Q)).
    fn nuclear_trace(&self, q: &M2) -> f64 {
        let t = |u: &M2| tr(&mul(&mul(&mul(u, q), &dag(u)), q)).re;
        match self {
            Block::Diag(a, b) => 0.25 * (t(a) + t(b)),
            Block::Anti(c, d) => -0.25 * (t(c) + t(d)),
        }
    }
}

/// Rotation angle used for the post-block state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RotationModel {
    /// From the exact conditional propagators of the pulse train.
    Exact,
    /// Secular limit: φ = a⊥·N·τ/π about the nuclear x axis.
    Secular,
}

/// Closed-form signal at one evolution time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticPoint {
    /// Direct acquisition.
    pub p: f64,
    /// Phase-cycled (nuclear) signal.
    pub nuclear: f64,
    /// Electron-coherence part of `p`.
    pub electronic: f64,
    /// Entangling angle φ.
    pub phi: f64,
}

struct Model {
    alpha: (f64, f64),
    beta: (f64, f64),
}

impl Model {
    fn new(system: &SpinSystem) -> Self {
        let n = &system.nuclei()[0];
        let w0 = angular(system.larmor_hz(0));
        Self { alpha: (0.0, w0), beta: (angular(n.a_perp), w0 + angular(n.a_par)) }
    }

    fn free(&self, t: f64) -> Block {
        Block::Diag(su2(self.alpha.0, self.alpha.1, t), su2(self.beta.0, self.beta.1, t))
    }

    /// Ideal π pulse about the axis at `phase`.
    fn flip(phase: f64) -> Block {
        let up = scale(&id(), -I * C64::from_polar(1.0, phase));
        let down = scale(&id(), -I * C64::from_polar(1.0, -phase));
        Block::Anti(up, down)
    }

    fn evolution(&self, kind: FreeHamiltonianKind, t: f64) -> Block {
        match kind {
            FreeHamiltonianKind::H2 => self.free(t),
            FreeHamiltonianKind::H1 => {
                let half = self.free(0.5 * t);
                half.then(&Self::flip(0.0)).then(&half)
            }
            FreeHamiltonianKind::H3 { tau, lead } => {
                let n = (t / tau).round().max(0.0) as u64;
                self.free(lead).then(&Self::flip(0.0)).then(&self.free(tau - lead)).pow(n)
            }
        }
    }
}

fn check(system: &SpinSystem, cp: &CpParams) -> Result<(), ProtocolError> {
    if system.nuclei().len() != 1 {
        return Err(ProtocolError::NotApplicable(format!("{} nuclei (need exactly one)", system.nuclei().len())));
    }
    if cp.pulse_duration != 0.0 {
        return Err(ProtocolError::NotApplicable("finite pulse duration".into()));
    }
    if cp.n_pulses % 2 != 0 {
        return Err(ProtocolError::NotApplicable("odd number of π pulses".into()));
    }
    let res = system.resonance_tau(0);
    if ((cp.tau - res) / res).abs() > tolerances::RESONANCE_REL {
        return Err(ProtocolError::NotApplicable(format!("tau {} s is off resonance ({} s)", cp.tau, res)));
    }
    Ok(())
}

/// cos φ and the nuclear operator Q = sin φ · m·I of the post-block state.
fn rotation(system: &SpinSystem, cp: &CpParams, model: RotationModel) -> (f64, M2) {
    match model {
        RotationModel::Secular => {
            let phi = angular(system.nuclei()[0].a_perp) * cp.train_duration() / PI;
            (phi.cos(), scale(&half_pauli(0), C64::new(phi.sin(), 0.0)))
        }
        RotationModel::Exact => {
            let m = Model::new(system);
            let gap = m.free(0.5 * cp.tau);
            let phases = cp.pattern.phases();
            let mut train = Block::Diag(id(), id());
            for i in 0..cp.n_pulses as usize {
                train = train.then(&gap).then(&Model::flip(phases[i % phases.len()])).then(&gap);
            }
            let Block::Diag(va, vb) = train else { unreachable!("even pulse count returns to the start manifold") };
            let w = mul(&va, &dag(&vb));
            let cos_phi = 0.5 * tr(&w).re;
            // W = cos φ − 2i (w·I) and Q = −w·I.
            let mut q = [[Z; 2]; 2];
            for k in 0..3 {
                let wk = (I * tr(&mul(&w, &half_pauli(k)))).re;
                q = [
                    [q[0][0] - half_pauli(k)[0][0] * wk, q[0][1] - half_pauli(k)[0][1] * wk],
                    [q[1][0] - half_pauli(k)[1][0] * wk, q[1][1] - half_pauli(k)[1][1] * wk],
                ];
            }
            (cos_phi, q)
        }
    }
}

/// Single-nucleus free-precession signal in closed form.
pub fn analytic_signal(
    system: &SpinSystem,
    cp: &CpParams,
    kind: FreeHamiltonianKind,
    t1: f64,
    model: RotationModel,
) -> Result<AnalyticPoint, ProtocolError> {
    check(system, cp)?;
    let (cos_phi, q) = rotation(system, cp, model);
    let uf = Model::new(system).evolution(kind, t1);
    let electronic = 0.5 * cos_phi * cos_phi * uf.electronic_trace();
    let nuclear = 2.0 * uf.nuclear_trace(&q);
    Ok(AnalyticPoint {
        p: 0.5 + electronic + nuclear,
        nuclear,
        electronic,
        phi: (1.0 - cos_phi * cos_phi).max(0.0).sqrt().atan2(cos_phi),
    })
}

/// The secular post-block state 1/4 + (cos φ/2)·Sx + sin φ·Sz⊗Ix with
/// φ = a⊥·N·τ/π, for a single nucleus.
pub fn secular_post_cp_state(system: &SpinSystem, cp: &CpParams) -> Result<Operator, ProtocolError> {
    if system.nuclei().len() != 1 {
        return Err(ProtocolError::NotApplicable("need exactly one nucleus".into()));
    }
    let phi = angular(system.nuclei()[0].a_perp) * cp.train_duration() / PI;
    let one = Operator::identity(4).scale(0.25);
    let sx = spin::x().kron(&spin::identity()).scale(0.5 * phi.cos());
    let zx = spin::z().kron(&spin::x()).scale(phi.sin());
    Ok(&(&one + &sx) + &zx)
}

/// Angular frequency at which periodic flips with spacing `tau` rotate the
/// nucleus, from the exact two-flip propagator.
pub fn periodic_flip_rabi_frequency(system: &SpinSystem, tau: f64, lead: f64) -> Result<f64, ProtocolError> {
    if system.nuclei().len() != 1 {
        return Err(ProtocolError::NotApplicable("need exactly one nucleus".into()));
    }
    let kind = FreeHamiltonianKind::h3_with_lead(tau, lead)?;
    let Block::Diag(a, _) = Model::new(system).evolution(kind, 2.0 * tau) else {
        unreachable!("two flips return to the start manifold")
    };
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let half_trace = 0.5 * tr(&a) / det.sqrt();
    let angle = 2.0 * half_trace.re.abs().min(1.0).acos();
    Ok(angle / (2.0 * tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{fid_protocol, post_cp_state, AcquisitionGrid, PhasePattern};
    use crate::spinsys::{rabi_angular_frequency, Isotope, Nucleus};

    fn single(b0: f64, iso: &str, a_par: f64, a_perp: f64) -> SpinSystem {
        SpinSystem::new(b0, vec![Nucleus::new(Isotope::lookup(iso).unwrap(), a_par, a_perp).unwrap()], 2e-4, 1e-5)
            .unwrap()
    }

    #[test]
    fn su2_matches_dense_exponential() {
        let h = &spin::x().scale(1.3e6) + &spin::z().scale(-2.2e6);
        let dense = crate::dynamics::expm_hermitian(&h, 0.77e-6).unwrap();
        let closed = su2(1.3e6, -2.2e6, 0.77e-6);
        for i in 0..2 {
            for j in 0..2 {
                assert!((dense.operator().get(i, j) - closed[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn limits_of_the_angle() {
        let sys = single(0.1955, "13C", 4.0e6, 0.0);
        let cp = CpParams::new(32, sys.resonance_tau(0), PhasePattern::Cp, 0.0).unwrap();
        let pt = analytic_signal(&sys, &cp, FreeHamiltonianKind::H2, 3e-6, RotationModel::Exact).unwrap();
        assert!(pt.nuclear.abs() < 1e-15);
        // φ = π/2 in the secular model: no electronic part.
        let tau = single(0.174, "1H", 0.0, 1e3).resonance_tau(0);
        let sys = single(0.174, "1H", 0.0, PI / (4.0 * 64.0 * tau));
        let cp = CpParams::new(64, tau, PhasePattern::Cp, 0.0).unwrap();
        let pt = analytic_signal(&sys, &cp, FreeHamiltonianKind::H2, 1e-6, RotationModel::Secular).unwrap();
        assert!(pt.electronic.abs() < 1e-12);
        assert!((pt.phi - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn preconditions() {
        let sys = single(0.1955, "13C", 4.0e6, 2e5);
        let tau = sys.resonance_tau(0);
        let ok = CpParams::new(32, tau, PhasePattern::Cp, 0.0).unwrap();
        let k = FreeHamiltonianKind::H2;
        assert!(analytic_signal(&sys, &ok.with_tau(1.2 * tau).unwrap(), k, 0.0, RotationModel::Exact).is_err());
        assert!(analytic_signal(&sys, &ok.with_n(31).unwrap(), k, 0.0, RotationModel::Exact).is_err());
        let finite = CpParams::new(32, tau, PhasePattern::Cp, 2e-8).unwrap();
        assert!(analytic_signal(&sys, &finite, k, 0.0, RotationModel::Exact).is_err());
    }

    #[test]
    fn exact_state_matches_simulation_in_strong_coupling() {
        let sys = single(2.09321 / 10.7084, "13C", 4.02350e6, 251.35e3);
        let cp = CpParams::new(32, sys.resonance_tau(0), PhasePattern::Xy8, 0.0).unwrap();
        let (cos_phi, q) = rotation(&sys, &cp, RotationModel::Exact);
        let mut qop = Operator::zeros(2);
        qop = &qop + &Operator::from_rows(&[&[q[0][0], q[0][1]], &[q[1][0], q[1][1]]]);
        let closed = &(&Operator::identity(4).scale(0.25) + &spin::x().kron(&spin::identity()).scale(0.5 * cos_phi))
            + &spin::z().kron(&qop);
        let sim = post_cp_state(&sys, &cp).unwrap();
        assert!(sim.operator().max_abs_diff(&closed) < 1e-12);
    }

    #[test]
    fn cycled_signal_at_zero_time() {
        // With no free evolution the cycled signal is sin²φ / 2.
        let sys = single(0.1955, "13C", 4.0e6, 2e5);
        let cp = CpParams::new(24, sys.resonance_tau(0), PhasePattern::Cp, 0.0).unwrap();
        let pt = analytic_signal(&sys, &cp, FreeHamiltonianKind::H2, 0.0, RotationModel::Exact).unwrap();
        assert!((pt.p - 1.0).abs() < 1e-12);
        assert!((pt.nuclear - 0.5 * pt.phi.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn h2_cycled_equals_nuclear_trace() {
        let sys = single(0.1955, "13C", 4.02e6, 251e3);
        let cp = CpParams::new(32, sys.resonance_tau(0), PhasePattern::Cp, 0.0).unwrap();
        let grid = AcquisitionGrid::new(0.0, 0.173e-6, 40).unwrap();
        let sim = fid_protocol(&sys, &cp, FreeHamiltonianKind::H2, &grid, true).unwrap();
        for (i, t) in grid.times().into_iter().enumerate() {
            let a = analytic_signal(&sys, &cp, FreeHamiltonianKind::H2, t, RotationModel::Exact).unwrap();
            assert!((sim.values[i] - a.nuclear).abs() < 1e-8);
        }
    }

    #[test]
    fn weak_coupling_rabi_rate() {
        let sys = single(0.174, "1H", 0.0, 2e3);
        let tau = sys.resonance_tau(0);
        let w = periodic_flip_rabi_frequency(&sys, tau, tau).unwrap();
        let expect = rabi_angular_frequency(&sys.nuclei()[0]);
        assert!(((w - expect) / expect).abs() < 1e-3, "{w} vs {expect}");
    }
}
