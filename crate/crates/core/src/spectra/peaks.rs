use super::{Spectrum, Spectrum2D};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    /// Hz.
    pub freq: f64,
    /// Spectral magnitude for picked peaks, tone amplitude for fitted ones.
    pub amplitude: f64,
    /// Full width at half maximum, Hz.
    pub width: f64,
    /// One-sigma frequency uncertainty, Hz; `None` before fitting.
    pub fit_uncertainty: Option<f64>,
}

fn is_local_max(m: &[f64], k: usize) -> bool {
    let left = if k == 0 { m[k] > m[k + 1] } else { m[k] > m[k - 1] };
    let right = if k + 1 == m.len() { m[k] > m[k - 1] } else { m[k] >= m[k + 1] };
    left && right
}

/// Parabolic vertex through three neighbouring magnitudes, as an offset in
/// bins from the centre and the interpolated height.
fn parabolic(a: f64, b: f64, c: f64) -> (f64, f64) {
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::MIN_POSITIVE {
        return (0.0, b);
    }
    let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    (delta, b - 0.25 * (a - c) * delta)
}

fn half_width_edge(m: &[f64], k: usize, half: f64, step: isize) -> f64 {
    let mut i = k as isize;
    loop {
        let next = i + step;
        if next < 0 || next as usize >= m.len() {
            return i as f64;
        }
        let (hi, lo) = (m[i as usize], m[next as usize]);
        if lo <= half {
            return i as f64 + step as f64 * (hi - half) / (hi - lo);
        }
        i = next;
    }
}

/// Local maxima of the spectral magnitude at or above `threshold · max`,
/// refined by parabolic interpolation. Of two peaks closer than
/// `min_separation` Hz only the taller survives. Sorted by frequency.
///
/// # Panics
/// If `threshold` is outside (0, 1).
pub fn find_peaks(spectrum: &Spectrum, threshold: f64, min_separation: f64) -> Vec<Peak> {
    assert!(threshold > 0.0 && threshold < 1.0, "peak threshold {threshold} outside (0, 1)");
    let m = spectrum.magnitudes();
    if m.len() < 2 {
        return Vec::new();
    }
    let max = m.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let df = spectrum.bin_width();
    let mut found: Vec<Peak> = (0..m.len())
        .filter(|&k| m[k] >= threshold * max && is_local_max(&m, k))
        .map(|k| {
            let (delta, height) =
                if k > 0 && k + 1 < m.len() { parabolic(m[k - 1], m[k], m[k + 1]) } else { (0.0, m[k]) };
            let half = 0.5 * m[k];
            let width = (half_width_edge(&m, k, half, 1) - half_width_edge(&m, k, half, -1)) * df;
            Peak { freq: spectrum.freqs[k] + delta * df, amplitude: height, width, fit_uncertainty: None }
        })
        .collect();

    found.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    let mut kept: Vec<Peak> = Vec::new();
    for p in found {
        if kept.iter().all(|q| (q.freq - p.freq).abs() >= min_separation) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    kept
}

/// A local maximum of a 2D magnitude spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak2D {
    pub f1: f64,
    pub f2: f64,
    pub amplitude: f64,
}

/// Local maxima of the 2D magnitude over the eight-neighbourhood, at or
/// above `threshold · max`, tallest first. Positions are bin centres.
///
/// # Panics
/// If `threshold` is outside (0, 1).
pub fn find_peaks_2d(spectrum: &Spectrum2D, threshold: f64) -> Vec<Peak2D> {
    assert!(threshold > 0.0 && threshold < 1.0, "peak threshold {threshold} outside (0, 1)");
    let (n1, n2) = (spectrum.f1.len(), spectrum.f2.len());
    let m = spectrum.magnitudes();
    let max = m.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i1 in 0..n1 {
        for i2 in 0..n2 {
            let v = m[i1 * n2 + i2];
            if v < threshold * max {
                continue;
            }
            let mut is_max = true;
            for d1 in -1isize..=1 {
                for d2 in -1isize..=1 {
                    let (j1, j2) = (i1 as isize + d1, i2 as isize + d2);
                    if (d1, d2) == (0, 0) || j1 < 0 || j2 < 0 || j1 as usize >= n1 || j2 as usize >= n2 {
                        continue;
                    }
                    let w = m[j1 as usize * n2 + j2 as usize];
                    // Ties go to the first cell in row-major order.
                    let before = (d1, d2) < (0, 0);
                    if w > v || (before && w == v) {
                        is_max = false;
                    }
                }
            }
            if is_max {
                out.push(Peak2D { f1: spectrum.f1[i1], f2: spectrum.f2[i2], amplitude: v });
            }
        }
    }
    out.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
    out
}

/// Dips of a multipulse sweep p(τ), reported at their filter frequency
/// 1/(2τ). Depth is measured from the largest sample; dips at or above
/// `threshold` times the deepest one are kept, sorted by frequency. The
/// τ axis must be uniform.
///
/// # Panics
/// If `threshold` is outside (0, 1).
pub fn find_dips(taus: &[f64], values: &[f64], threshold: f64) -> Vec<Peak> {
    assert!(threshold > 0.0 && threshold < 1.0, "dip threshold {threshold} outside (0, 1)");
    assert_eq!(taus.len(), values.len());
    if values.len() < 2 {
        return Vec::new();
    }
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d: Vec<f64> = values.iter().map(|p| top - p).collect();
    let deepest = d.iter().cloned().fold(0.0, f64::max);
    if !(deepest > 0.0) {
        return Vec::new();
    }
    let step = taus[1] - taus[0];
    let to_freq = |tau: f64| 0.5 / tau;
    let mut out: Vec<Peak> = (0..d.len())
        .filter(|&k| d[k] >= threshold * deepest && is_local_max(&d, k))
        .map(|k| {
            let (delta, depth) =
                if k > 0 && k + 1 < d.len() { parabolic(d[k - 1], d[k], d[k + 1]) } else { (0.0, d[k]) };
            let half = 0.5 * d[k];
            let lo = taus[0] + half_width_edge(&d, k, half, -1) * step;
            let hi = taus[0] + half_width_edge(&d, k, half, 1) * step;
            Peak {
                freq: to_freq(taus[k] + delta * step),
                amplitude: depth,
                width: (to_freq(lo) - to_freq(hi)).abs(),
                fit_uncertainty: None,
            }
        })
        .collect();
    out.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{fid_protocol, AcquisitionGrid, CpParams, PhasePattern};
    use crate::spectra::{transform_samples, Window};
    use crate::spinsys::{FreeHamiltonianKind, Isotope, Nucleus, SpinSystem};
    use std::f64::consts::PI;

    #[test]
    fn two_dimensional_maxima() {
        let f1: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let f2: Vec<f64> = (0..5).map(|i| 10.0 * i as f64).collect();
        let mut values = vec![num_complex::Complex64::new(0.01, 0.0); 30];
        values[5 + 2] = num_complex::Complex64::new(1.0, 0.0);
        values[4 * 5 + 3] = num_complex::Complex64::new(0.0, 0.6);
        values[4 * 5 + 4] = num_complex::Complex64::new(0.6, 0.0);
        let s = Spectrum2D { f1, f2, values };
        let peaks = find_peaks_2d(&s, 0.5);
        assert_eq!(peaks.len(), 2);
        assert_eq!((peaks[0].f1, peaks[0].f2), (1.0, 20.0));
        assert_eq!((peaks[1].f1, peaks[1].f2), (4.0, 30.0));
        assert!(find_peaks_2d(&s, 0.7).len() == 1);
    }

    #[test]
    fn dip_at_filter_frequency() {
        let taus: Vec<f64> = (0..101).map(|i| 100e-9 + i as f64 * 0.5e-9).collect();
        let centre = 121.3e-9;
        let p: Vec<f64> = taus.iter().map(|t| 1.0 - 0.4 * (-((t - centre) / 2e-9).powi(2)).exp()).collect();
        let dips = find_dips(&taus, &p, 0.5);
        assert_eq!(dips.len(), 1);
        assert!((dips[0].freq - 0.5 / centre).abs() < 0.5 / centre * 1e-3);
        assert!((dips[0].amplitude - 0.4).abs() < 0.01);
        assert!(find_dips(&taus, &vec![1.0; taus.len()], 0.5).is_empty());
    }

    #[test]
    fn flat_and_empty() {
        let s = transform_samples(&[1.0; 64], 1e-6, Window::None, 1).unwrap();
        assert!(find_peaks(&s, 0.1, 0.0).is_empty());
        let mut flat = s.clone();
        flat.values.iter_mut().for_each(|v| *v = num_complex::Complex64::new(2.0, 0.0));
        assert!(find_peaks(&flat, 0.1, 0.0).is_empty());
    }

    #[test]
    fn single_on_grid_tone() {
        let (dwell, n) = (1e-7, 128);
        let f = 12.0 / (n as f64 * dwell);
        let xs: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 * dwell).cos()).collect();
        let s = transform_samples(&xs, dwell, Window::None, 1).unwrap();
        let peaks = find_peaks(&s, 0.5, 0.0);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].freq - f).abs() < 1e-9 * f);
        assert!(peaks[0].width > 0.0 && peaks[0].width <= 2.0 * s.bin_width());
    }

    #[test]
    fn off_grid_tone_interpolates_within_a_bin() {
        let (dwell, n) = (1e-7, 256);
        let f = 30.37 / (n as f64 * dwell);
        let xs: Vec<f64> = (0..n).map(|i| (2.0 * PI * f * i as f64 * dwell).sin()).collect();
        let s = transform_samples(&xs, dwell, Window::Cosine, 4).unwrap();
        let peaks = find_peaks(&s, 0.3, 0.0);
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].freq - f).abs() < 0.1 * s.bin_width());
    }

    #[test]
    fn merging_keeps_the_taller_peak() {
        let (dwell, n) = (1e-7, 512);
        let df = 1.0 / (n as f64 * dwell);
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 * dwell;
                (2.0 * PI * 40.0 * df * t).cos() + 0.6 * (2.0 * PI * 46.0 * df * t).cos()
            })
            .collect();
        let s = transform_samples(&xs, dwell, Window::None, 1).unwrap();
        assert_eq!(find_peaks(&s, 0.1, 0.0).len(), 2);
        let merged = find_peaks(&s, 0.1, 10.0 * df);
        assert_eq!(merged.len(), 1);
        assert!((merged[0].freq - 40.0 * df).abs() < 1e-6);
    }

    fn fig4_h2(dwell: f64, n: usize) -> (Vec<f64>, SpinSystem) {
        let c13 = Isotope::lookup("13C").unwrap();
        let sys = SpinSystem::new(2.09321 / c13.gamma, vec![Nucleus::new(c13, 4.02350e6, 251.35e3).unwrap()], 2e-4, 1e-5)
            .unwrap();
        let cp = CpParams::new(32, sys.resonance_tau(0), PhasePattern::Xy8, 0.0).unwrap();
        let grid = AcquisitionGrid::new(0.0, dwell, n).unwrap();
        (fid_protocol(&sys, &cp, FreeHamiltonianKind::H2, &grid, true).unwrap().values, sys)
    }

    fn fold(f: f64, dwell: f64) -> f64 {
        let fs = 1.0 / dwell;
        let r = f.rem_euclid(fs);
        r.min(fs - r)
    }

    #[test]
    fn h2_record_has_two_lines() {
        // 120 ns sampling folds the upper line below the 4.17 MHz Nyquist edge.
        for dwell in [120e-9, 40e-9] {
            let (xs, sys) = fig4_h2(dwell, 512);
            let s = transform_samples(&xs, dwell, Window::Cosine, 4).unwrap();
            let peaks = find_peaks(&s, 0.3, 3.0 * s.bin_width());
            assert_eq!(peaks.len(), 2, "dwell {dwell}: {peaks:?}");
            let lo = sys.larmor_hz(0);
            let hi = lo + 4.02350e6;
            let mut want = [fold(lo, dwell), fold(hi, dwell)];
            want.sort_by(f64::total_cmp);
            for (p, w) in peaks.iter().zip(want) {
                // One bin of the unpadded record.
                assert!((p.freq - w).abs() <= 1.0 / (512.0 * dwell), "{p:?} vs {w}");
            }
        }
    }
}
