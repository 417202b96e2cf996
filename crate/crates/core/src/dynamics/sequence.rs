use std::collections::HashMap;
use std::f64::consts::PI;

use super::{ideal_rotation, pulse_unitary, DynamicsError, Propagator, Pulse, Unitary};
use crate::spinsys::SpinSystem;

/// One step of a resolved pulse program.
#[derive(Clone, Debug, PartialEq)]
pub enum Element {
    Pulse(Pulse),
    /// Free evolution under the joint Hamiltonian, seconds.
    Delay(f64),
    /// Instantaneous electron π rotation about x inside a free-evolution
    /// period.
    Flip,
    /// Exact inverse of the enclosed block (its time-reversed propagator).
    Inverse(Vec<Element>),
}

/// Ordered, fully resolved list of elements; the first element acts first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PulseSequence {
    pub elements: Vec<Element>,
}

impl PulseSequence {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: Element) -> &mut Self {
        self.elements.push(e);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Wall-clock length of the program; inverse blocks count their
    /// forward duration.
    pub fn duration(&self) -> f64 {
        fn walk(es: &[Element]) -> f64 {
            es.iter()
                .map(|e| match e {
                    Element::Pulse(p) => p.duration,
                    Element::Delay(t) => *t,
                    Element::Flip => 0.0,
                    Element::Inverse(inner) => walk(inner),
                })
                .sum()
        }
        walk(&self.elements)
    }
}

struct Cache<'a> {
    system: &'a SpinSystem,
    free: Propagator,
    delays: HashMap<u64, Unitary>,
    pulses: HashMap<[u64; 4], Unitary>,
    flip: Unitary,
}

impl Cache<'_> {
    fn element(&mut self, e: &Element) -> Result<Unitary, DynamicsError> {
        Ok(match e {
            Element::Pulse(p) => {
                let key = [p.angle.to_bits(), p.phase.to_bits(), p.duration.to_bits(), p.detuning.to_bits()];
                if let Some(u) = self.pulses.get(&key) {
                    u.clone()
                } else {
                    let u = pulse_unitary(p, self.system);
                    self.pulses.insert(key, u.clone());
                    u
                }
            }
            Element::Delay(t) => {
                if !(*t >= 0.0 && t.is_finite()) {
                    return Err(DynamicsError::InvalidDelay(*t));
                }
                let free = &self.free;
                self.delays.entry(t.to_bits()).or_insert_with(|| free.at(*t)).clone()
            }
            Element::Flip => self.flip.clone(),
            Element::Inverse(inner) => self.block(inner)?.adjoint(),
        })
    }

    fn block(&mut self, es: &[Element]) -> Result<Unitary, DynamicsError> {
        let mut u = Unitary::identity(self.system.dim());
        for e in es {
            u = u.followed_by(&self.element(e)?);
        }
        Ok(u)
    }
}

/// Product of element propagators, later elements on the left.
pub fn sequence_unitary(seq: &PulseSequence, system: &SpinSystem) -> Result<Unitary, DynamicsError> {
    let mut cache = Cache {
        system,
        free: Propagator::new(&system.joint_hamiltonian())?,
        delays: HashMap::new(),
        pulses: HashMap::new(),
        flip: ideal_rotation(PI, 0.0, system.nuclei().len()),
    };
    cache.block(&seq.elements)
}
