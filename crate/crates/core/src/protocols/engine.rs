use std::f64::consts::PI;

use rayon::prelude::*;

use super::{AcquisitionGrid, Components, CpParams, ProtocolError, Signal, Signal2D, SignalMeta};
use crate::dynamics::{
    embed, ideal_rotation, pulse_unitary, sequence_unitary, spin, Density, Operator, Propagator, Pulse,
    PulseSequence, Unitary,
};
use crate::spinsys::{FreeHamiltonianKind, SpinSystem};

/// Precomputed pieces shared by every point of a sweep.
struct Engine<'a> {
    system: &'a SpinSystem,
    free: Propagator,
    flip: Unitary,
}

impl<'a> Engine<'a> {
    fn new(system: &'a SpinSystem) -> Result<Self, ProtocolError> {
        Ok(Self {
            system,
            free: Propagator::new(&system.joint_hamiltonian())?,
            flip: ideal_rotation(PI, 0.0, system.nuclei().len()),
        })
    }

    fn k(&self) -> usize {
        self.system.nuclei().len()
    }

    fn free(&self, t: f64) -> Unitary {
        self.free.at(t)
    }

    /// [gap − π(phase) − gap] for one pulse of the train.
    fn cycle(&self, cp: &CpParams, phase: f64, gap: &Unitary) -> Unitary {
        let pulse = if cp.pulse_duration == 0.0 {
            ideal_rotation(PI, phase, self.k())
        } else {
            pulse_unitary(&Pulse::new(PI, phase, cp.pulse_duration, 0.0).expect("valid π pulse"), self.system)
        };
        gap.followed_by(&pulse).followed_by(gap)
    }

    fn train(&self, cp: &CpParams) -> Unitary {
        let gap = self.free(0.5 * (cp.tau - cp.pulse_duration));
        let phases = cp.pattern.phases();
        let mut period = Unitary::identity(self.system.dim());
        for &ph in phases {
            period = period.followed_by(&self.cycle(cp, ph, &gap));
        }
        let len = phases.len() as u64;
        let mut u = period.pow(cp.n_pulses / len);
        for &ph in &phases[..(cp.n_pulses % len) as usize] {
            u = u.followed_by(&self.cycle(cp, ph, &gap));
        }
        u
    }

    fn ucp(&self, cp: &CpParams) -> Unitary {
        ideal_rotation(0.5 * PI, 0.5 * PI, self.k())
            .followed_by(&self.train(cp))
            .followed_by(&ideal_rotation(0.5 * PI, PI, self.k()))
    }

    /// Probability of finding the electron back in |α⟩ after a multipulse
    /// train framed by π/2(y) and π/2(−y).
    fn multipulse(&self, cp: &CpParams) -> f64 {
        let u = ideal_rotation(0.5 * PI, 0.5 * PI, self.k())
            .followed_by(&self.train(cp))
            .followed_by(&ideal_rotation(0.5 * PI, 1.5 * PI, self.k()));
        alpha_population(&u)
    }

    fn free_evolution(&self, kind: FreeHamiltonianKind, t: f64) -> Unitary {
        match kind {
            FreeHamiltonianKind::H2 => self.free(t),
            FreeHamiltonianKind::H1 => {
                let half = self.free(0.5 * t);
                half.followed_by(&self.flip).followed_by(&half)
            }
            FreeHamiltonianKind::H3 { tau, lead } => {
                let n = (t / tau).round().max(0.0) as u64;
                let cycle = self.free(lead).followed_by(&self.flip).followed_by(&self.free(tau - lead));
                cycle.pow(n)
            }
        }
    }
}

/// Population of the electron |α⟩ manifold after `u` acts on |α⟩⟨α| ⊗ 1/2^K.
fn alpha_population(u: &Unitary) -> f64 {
    let m = u.operator();
    let half = m.dim() / 2;
    let mut s = 0.0;
    for i in 0..half {
        for j in 0..half {
            s += m.get(i, j).norm_sqr();
        }
    }
    s / half as f64
}

/// Re tr(A B).
fn trace_product(a: &Operator, b: &Operator) -> f64 {
    let (a, b) = (a.matrix(), b.matrix());
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// The entangling block π/2(y) · train · π/2(−x).
pub fn ucp_unitary(system: &SpinSystem, cp: &CpParams) -> Result<Unitary, ProtocolError> {
    Ok(Engine::new(system)?.ucp(cp))
}

/// State after the entangling block acting on |α⟩⟨α| ⊗ 1/2^K.
pub fn post_cp_state(system: &SpinSystem, cp: &CpParams) -> Result<Density, ProtocolError> {
    let u = ucp_unitary(system, cp)?;
    Ok(crate::dynamics::evolve(&Density::electron_alpha(system.nuclei().len()), &u)?)
}

/// Probability of returning to |α⟩ after an arbitrary resolved sequence.
pub fn measure_sequence(system: &SpinSystem, seq: &PulseSequence) -> Result<f64, ProtocolError> {
    Ok(alpha_population(&sequence_unitary(seq, system)?))
}

/// Multipulse spectrum: p(τ) for each spacing on `taus`, with the pulse
/// count, pattern and pulse length taken from `template`.
pub fn multipulse_sweep(
    system: &SpinSystem,
    taus: &AcquisitionGrid,
    template: &CpParams,
) -> Result<Signal, ProtocolError> {
    let engine = Engine::new(system)?;
    let params: Vec<CpParams> = taus.times().into_iter().map(|t| template.with_tau(t)).collect::<Result<_, _>>()?;
    let values: Vec<f64> = params.par_iter().map(|cp| engine.multipulse(cp)).collect();
    let elapsed = params.iter().map(|cp| cp.train_duration()).collect();
    let mut meta = SignalMeta::new("multipulse", "tau_s", false);
    meta.extra.push(("n_pulses".into(), template.n_pulses.to_string()));
    meta.extra.push(("pattern".into(), template.pattern.label().into()));
    Ok(Signal {
        grid: *taus,
        components: Some(Components {
            electronic: values.iter().map(|p| p - 0.5).collect(),
            nuclear: vec![0.0; values.len()],
            elapsed,
        }),
        values,
        meta,
    })
}

/// Multipulse signal versus train length at fixed τ. Each grid time t is
/// rounded to the nearest count N = t/τ that completes the phase pattern.
pub fn multipulse_count_sweep(
    system: &SpinSystem,
    cp: &CpParams,
    grid: &AcquisitionGrid,
) -> Result<Signal, ProtocolError> {
    let engine = Engine::new(system)?;
    let len = cp.pattern.phases().len() as u64;
    let counts: Vec<u64> = grid
        .times()
        .iter()
        .map(|t| ((t / cp.tau / len as f64).round().max(0.0) as u64) * len)
        .collect();
    let values: Vec<f64> = counts
        .par_iter()
        .map(|&n| if n == 0 { 1.0 } else { engine.multipulse(&cp.with_n(n).expect("valid count")) })
        .collect();
    let mut meta = SignalMeta::new("multipulse_count", "t_s", false);
    meta.extra.push(("tau_s".into(), cp.tau.to_string()));
    Ok(Signal {
        grid: *grid,
        components: Some(Components {
            electronic: values.iter().map(|p| p - 0.5).collect(),
            nuclear: vec![0.0; values.len()],
            elapsed: counts.iter().map(|&n| n as f64 * cp.tau).collect(),
        }),
        values,
        meta,
    })
}

/// Detection operators for the direct and the cycled readout, and the
/// post-block state.
struct Readout {
    sigma: Operator,
    direct: Operator,
    cycled: Operator,
}

impl Readout {
    fn new(engine: &Engine, cp: &CpParams) -> Self {
        let k = engine.k();
        let ucp = engine.ucp(cp);
        let pa = embed(&spin::proj_alpha(), 0, k).expect("electron slot");
        let direct = ucp.conjugate(&pa);
        let sigma = direct.scale(1.0 / (1usize << k) as f64);
        let inv = ideal_rotation(PI, 0.0, k).adjoint();
        let cycled = inv.conjugate(&direct);
        Self { sigma, direct, cycled }
    }

    /// (p_direct, p_cycled) after free evolution `uf`.
    fn probabilities(&self, uf: &Unitary) -> (f64, f64) {
        let evolved = uf.conjugate(&self.sigma);
        (trace_product(&self.direct, &evolved), trace_product(&self.cycled, &evolved))
    }
}

fn split(pairs: &[(f64, f64)], elapsed: Vec<f64>, cycled: bool) -> (Vec<f64>, Components) {
    let electronic: Vec<f64> = pairs.iter().map(|(a, b)| 0.5 * (a + b) - 0.5).collect();
    let nuclear: Vec<f64> = pairs.iter().map(|(a, b)| 0.5 * (a - b)).collect();
    let values = if cycled { nuclear.clone() } else { pairs.iter().map(|(a, _)| *a).collect() };
    (values, Components { electronic, nuclear, elapsed })
}

/// Free-precession signal p(t1) between two identical entangling blocks.
/// With `phase_cycle` the returned values are half the difference between
/// the direct acquisition and one with the readout π/2 inverted.
pub fn fid_protocol(
    system: &SpinSystem,
    cp: &CpParams,
    kind: FreeHamiltonianKind,
    grid: &AcquisitionGrid,
    phase_cycle: bool,
) -> Result<Signal, ProtocolError> {
    let engine = Engine::new(system)?;
    let readout = Readout::new(&engine, cp);
    let times = grid.times();
    let pairs: Vec<(f64, f64)> =
        times.par_iter().map(|&t| readout.probabilities(&engine.free_evolution(kind, t))).collect();
    let (values, components) = split(&pairs, times, phase_cycle);
    let mut meta = SignalMeta::new("fid", "t1_s", phase_cycle);
    meta.extra.push(("hamiltonian".into(), kind.label().into()));
    meta.extra.push(("n_pulses".into(), cp.n_pulses.to_string()));
    meta.extra.push(("tau_s".into(), cp.tau.to_string()));
    Ok(Signal { grid: *grid, values, components: Some(components), meta })
}

/// Two-dimensional acquisition: H1 evolution for t1 followed by periodic
/// flips (H3) for t2.
pub fn protocol_2d(
    system: &SpinSystem,
    cp: &CpParams,
    grid1: &AcquisitionGrid,
    grid2: &AcquisitionGrid,
    second: FreeHamiltonianKind,
    phase_cycle: bool,
) -> Result<Signal2D, ProtocolError> {
    if !matches!(second, FreeHamiltonianKind::H3 { .. }) {
        return Err(ProtocolError::InvalidParams("the second evolution period must use periodic flips".into()));
    }
    let engine = Engine::new(system)?;
    let readout = Readout::new(&engine, cp);
    let first: Vec<Unitary> =
        grid1.times().par_iter().map(|&t| engine.free_evolution(FreeHamiltonianKind::H1, t)).collect();
    let later: Vec<Unitary> = grid2.times().par_iter().map(|&t| engine.free_evolution(second, t)).collect();
    let n2 = grid2.count;
    let pairs: Vec<(f64, f64)> = (0..grid1.count * n2)
        .into_par_iter()
        .map(|idx| readout.probabilities(&first[idx / n2].followed_by(&later[idx % n2])))
        .collect();
    let elapsed = (0..grid1.count * n2).map(|idx| grid1.time(idx / n2) + grid2.time(idx % n2)).collect();
    let (values, components) = split(&pairs, elapsed, phase_cycle);
    let mut meta = SignalMeta::new("fid2d", "t1_s", phase_cycle);
    meta.extra.push(("n_pulses".into(), cp.n_pulses.to_string()));
    meta.extra.push(("tau_s".into(), cp.tau.to_string()));
    Ok(Signal2D { grid1: *grid1, grid2: *grid2, values, components: Some(components), meta })
}
