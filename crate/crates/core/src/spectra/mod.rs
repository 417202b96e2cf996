//! Frequency-domain analysis of acquired signals.
//!
//! Transforms are unnormalized DFTs (`X_k = Σ x_n e^{-2πikn/M}`) of the
//! mean-removed, optionally windowed and zero-padded record. Only the
//! non-negative frequency half is kept for real input.

mod assign;
mod fit;
mod peaks;

pub use assign::{
    assign_isotope, classify_harmonic, resolve_aliases, unalias, Harmonic, HarmonicKind, IsotopeLine, IsotopeMatch,
    PeakAssignment,
};
pub use fit::{fit_frequency, FitOptions, FitResult, ToneFit};
pub use peaks::{find_dips, find_peaks, find_peaks_2d, Peak, Peak2D};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::protocols::{AcquisitionGrid, Signal, Signal2D};
use crate::tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("sample times are not uniformly spaced (point {index})")]
    NonUniformGrid { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("fit is singular: {0}")]
    Singular(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    None,
    /// Quarter-period cosine falling from 1 at the first sample to 0 one
    /// sample past the last.
    Cosine,
}

impl Window {
    fn weights(&self, n: usize) -> Vec<f64> {
        match self {
            Self::None => vec![1.0; n],
            Self::Cosine => (0..n).map(|i| (0.5 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Cosine => "cosine",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Bin frequencies, Hz, from 0 up to the Nyquist frequency.
    pub freqs: Vec<f64>,
    pub values: Vec<C64>,
    /// Sample spacing of the transformed record, seconds.
    pub dwell: f64,
    /// Length of the zero-padded transform.
    pub fft_len: usize,
}

impl Spectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / (self.fft_len as f64 * self.dwell)
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dwell
    }

    /// Index of the bin closest to `freq`.
    pub fn nearest_bin(&self, freq: f64) -> usize {
        ((freq / self.bin_width()).round().max(0.0) as usize).min(self.freqs.len() - 1)
    }

    /// Time-domain energy implied by the one-sided half, counting the
    /// mirrored negative frequencies.
    pub fn energy(&self) -> f64 {
        let m = self.fft_len;
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let twice = k != 0 && !(m % 2 == 0 && k == m / 2);
                v.norm_sqr() * if twice { 2.0 } else { 1.0 }
            })
            .sum();
        s / m as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum2D {
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    /// Row-major, `values[i1 * f2.len() + i2]`.
    pub values: Vec<C64>,
}

impl Spectrum2D {
    pub fn get(&self, i1: usize, i2: usize) -> C64 {
        self.values[i1 * self.f2.len() + i2]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

/// Recovers a uniform grid from explicit sample times.
pub fn uniform_grid(times: &[f64]) -> Result<AcquisitionGrid, SpectraError> {
    if times.len() < 2 {
        return Err(SpectraError::InvalidArgument("at least two samples are required".into()));
    }
    let dwell = times[1] - times[0];
    if !(dwell > 0.0) {
        return Err(SpectraError::NonUniformGrid { index: 1 });
    }
    for (i, t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dwell;
        if (t - expected).abs() > tolerances::GRID_SNAP_REL * dwell.max(expected.abs()) {
            return Err(SpectraError::NonUniformGrid { index: i });
        }
    }
    AcquisitionGrid::new(times[0], dwell, times.len()).map_err(|e| SpectraError::InvalidArgument(e.to_string()))
}

fn padded_len(n: usize, zero_pad: usize) -> Result<usize, SpectraError> {
    if zero_pad == 0 {
        return Err(SpectraError::InvalidArgument("zero-padding factor must be at least 1".into()));
    }
    Ok(n.next_power_of_two() * zero_pad)
}

fn prepare(samples: &[f64], window: Window, remove_mean: bool) -> Vec<C64> {
    let mean = if remove_mean { samples.iter().sum::<f64>() / samples.len() as f64 } else { 0.0 };
    samples.iter().zip(window.weights(samples.len())).map(|(x, w)| C64::new((x - mean) * w, 0.0)).collect()
}

fn fft_in_place(buf: &mut [C64]) {
    let fft = FftPlanner::new().plan_fft_forward(buf.len());
    fft.process(buf);
}

/// Full two-sided DFT of a real record after mean removal and windowing.
pub fn full_transform(samples: &[f64], window: Window, zero_pad: usize) -> Result<Vec<C64>, SpectraError> {
    if samples.is_empty() {
        return Err(SpectraError::InvalidArgument("empty record".into()));
    }
    let m = padded_len(samples.len(), zero_pad)?;
    let mut buf = prepare(samples, window, true);
    buf.resize(m, C64::new(0.0, 0.0));
    fft_in_place(&mut buf);
    Ok(buf)
}

fn one_sided(full: Vec<C64>, dwell: f64) -> Spectrum {
    let m = full.len();
    debug_assert!(
        (1..m).all(|k| (full[k] - full[m - k].conj()).norm() <= 1e-9 * (1.0 + full[k].norm())),
        "real input must give a Hermitian-symmetric transform"
    );
    let half = m / 2 + 1;
    let df = 1.0 / (m as f64 * dwell);
    Spectrum {
        freqs: (0..half).map(|k| k as f64 * df).collect(),
        values: full.into_iter().take(half).collect(),
        dwell,
        fft_len: m,
    }
}

/// One-sided spectrum of raw samples on a uniform grid with spacing `dwell`.
pub fn transform_samples(samples: &[f64], dwell: f64, window: Window, zero_pad: usize) -> Result<Spectrum, SpectraError> {
    if !(dwell > 0.0 && dwell.is_finite()) {
        return Err(SpectraError::InvalidArgument(format!("dwell {dwell}")));
    }
    Ok(one_sided(full_transform(samples, window, zero_pad)?, dwell))
}

pub fn transform(signal: &Signal, window: Window, zero_pad: usize) -> Result<Spectrum, SpectraError> {
    transform_samples(&signal.values, signal.grid.dwell, window, zero_pad)
}

/// Separable transform: one-sided along t1 for every t2 column, then along
/// t2 for every f1 row, keeping non-negative f2. With a single t2 point the
/// second axis is left untouched, so each row equals the 1D transform.
pub fn transform_2d(
    signal: &Signal2D,
    windows: (Window, Window),
    pads: (usize, usize),
) -> Result<Spectrum2D, SpectraError> {
    let (n1, n2) = (signal.grid1.count, signal.grid2.count);
    let columns: Vec<Spectrum> = (0..n2)
        .into_par_iter()
        .map(|i2| transform_samples(&signal.column(i2), signal.grid1.dwell, windows.0, pads.0))
        .collect::<Result<_, _>>()?;
    let f1 = columns[0].freqs.clone();
    let nf1 = f1.len();
    debug_assert_eq!(n1, signal.grid1.count);

    if n2 == 1 {
        let values = columns[0].values.clone();
        return Ok(Spectrum2D { f1, f2: vec![0.0], values });
    }

    let m2 = padded_len(n2, pads.1)?;
    let half2 = m2 / 2 + 1;
    let w2 = windows.1.weights(n2);
    let rows: Vec<Vec<C64>> = (0..nf1)
        .into_par_iter()
        .map(|k1| {
            let row: Vec<C64> = columns.iter().map(|c| c.values[k1]).collect();
            let mean = row.iter().sum::<C64>() / n2 as f64;
            let mut buf: Vec<C64> = row.iter().zip(&w2).map(|(v, w)| (v - mean) * *w).collect();
            buf.resize(m2, C64::new(0.0, 0.0));
            fft_in_place(&mut buf);
            buf.truncate(half2);
            buf
        })
        .collect();
    let df2 = 1.0 / (m2 as f64 * signal.grid2.dwell);
    Ok(Spectrum2D { f1, f2: (0..half2).map(|k| k as f64 * df2).collect(), values: rows.concat() })
}
