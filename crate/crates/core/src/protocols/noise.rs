use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use super::{Components, ProtocolError, Signal, Signal2D};

/// Optical readout statistics. A readout of the bright state |α⟩ yields on
/// average `photons` counts; |β⟩ yields `photons · (1 − contrast)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShotNoise {
    pub photons: f64,
    pub contrast: f64,
    pub averages: u64,
}

impl ShotNoise {
    pub fn new(photons: f64, contrast: f64, averages: u64) -> Result<Self, ProtocolError> {
        if !(photons > 0.0 && photons.is_finite()) {
            return Err(ProtocolError::InvalidParams(format!("photons per readout {photons}")));
        }
        if !(contrast > 0.0 && contrast <= 1.0) {
            return Err(ProtocolError::InvalidParams(format!("contrast {contrast} outside (0, 1]")));
        }
        if averages == 0 {
            return Err(ProtocolError::InvalidParams("averages must be at least 1".into()));
        }
        Ok(Self { photons, contrast, averages })
    }

    /// Photon-count estimate of a probability p, drawing from `rng`.
    fn estimate(&self, p: f64, rng: &mut ChaCha8Rng) -> f64 {
        let total = self.photons * self.averages as f64;
        let mean = (total * (1.0 - self.contrast * (1.0 - p))).max(0.0);
        let counts = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(rng) } else { 0.0 };
        1.0 - (1.0 - counts / total) / self.contrast
    }

    /// Standard deviation of a single estimate at probability p.
    pub fn sigma(&self, p: f64) -> f64 {
        let total = self.photons * self.averages as f64;
        (total * (1.0 - self.contrast * (1.0 - p))).max(0.0).sqrt() / (total * self.contrast)
    }
}

/// Generator for one sample point: the master seed picks the key and the
/// point index picks the stream, so the draw does not depend on evaluation
/// order.
fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn noisy_values(values: &[f64], components: Option<&Components>, cycled: bool, noise: &ShotNoise, seed: u64) -> Vec<f64> {
    (0..values.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = point_rng(seed, i as u64);
            match (components, cycled) {
                (Some(c), true) => {
                    let direct = 0.5 + c.electronic[i] + c.nuclear[i];
                    let inverted = 0.5 + c.electronic[i] - c.nuclear[i];
                    0.5 * (noise.estimate(direct, &mut rng) - noise.estimate(inverted, &mut rng))
                }
                _ => noise.estimate(values[i], &mut rng),
            }
        })
        .collect()
}

/// Replaces each sample by a photon-count estimate. Cycled signals draw
/// both acquisitions. The component split is dropped because it no longer
/// describes the noisy values.
pub fn add_shot_noise(signal: &Signal, noise: &ShotNoise, seed: u64) -> Signal {
    let mut out = signal.clone();
    out.values = noisy_values(&signal.values, signal.components.as_ref(), signal.meta.phase_cycled, noise, seed);
    out.components = None;
    out
}

pub fn add_shot_noise_2d(signal: &Signal2D, noise: &ShotNoise, seed: u64) -> Signal2D {
    let mut out = signal.clone();
    out.values = noisy_values(&signal.values, signal.components.as_ref(), signal.meta.phase_cycled, noise, seed);
    out.components = None;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{AcquisitionGrid, SignalMeta};

    fn flat(p: f64, n: usize) -> Signal {
        Signal::from_samples(AcquisitionGrid::new(0.0, 1e-7, n).unwrap(), vec![p; n], SignalMeta::new("t", "t1_s", false))
            .unwrap()
    }

    #[test]
    fn validation() {
        assert!(ShotNoise::new(0.03, 0.0, 1).is_err());
        assert!(ShotNoise::new(0.0, 0.3, 1).is_err());
        assert!(ShotNoise::new(0.03, 0.3, 0).is_err());
        assert!(ShotNoise::new(0.03, 1.0, 1).is_ok());
    }

    #[test]
    fn converges_with_many_averages() {
        let noise = ShotNoise::new(0.05, 0.3, 1_000_000).unwrap();
        let s = flat(0.7, 64);
        let out = add_shot_noise(&s, &noise, 7);
        let sigma = noise.sigma(0.7) / (out.values.len() as f64).sqrt();
        let mean = out.values.iter().sum::<f64>() / out.values.len() as f64;
        assert!((mean - 0.7).abs() < 3.0 * sigma, "{mean} vs sigma {sigma}");
    }

    #[test]
    fn deterministic_per_seed() {
        let noise = ShotNoise::new(0.05, 0.3, 1000).unwrap();
        let s = flat(0.4, 256);
        let a = add_shot_noise(&s, &noise, 42);
        let b = add_shot_noise(&s, &noise, 42);
        let c = add_shot_noise(&s, &noise, 43);
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
        // Same point index and seed give the same draw regardless of length.
        let short = add_shot_noise(&flat(0.4, 16), &noise, 42);
        assert_eq!(&a.values[..16], &short.values[..]);
    }
}
