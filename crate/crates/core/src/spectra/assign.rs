use super::{Peak, SpectraError};
use crate::spinsys::{larmor_frequency, nv15_lines, Isotope};
use crate::units::MHZ;

/// All frequencies in `band` (inclusive, Hz) that fold onto `f_measured`
/// when sampled every `dwell` seconds, ascending.
pub fn unalias(f_measured: f64, dwell: f64, band: (f64, f64)) -> Result<Vec<f64>, SpectraError> {
    let (lo, hi) = band;
    if !(lo.is_finite() && hi.is_finite() && lo < hi && hi >= 0.0) {
        return Err(SpectraError::InvalidArgument(format!("empty band ({lo}, {hi}) Hz")));
    }
    if !(dwell > 0.0 && dwell.is_finite()) {
        return Err(SpectraError::InvalidArgument(format!("dwell {dwell} s")));
    }
    let fs = 1.0 / dwell;
    let slack = 1e-9 * fs;
    if !(f_measured >= -slack && f_measured <= 0.5 * fs + slack) {
        return Err(SpectraError::InvalidArgument(format!("{f_measured} Hz lies outside [0, {}] Hz", 0.5 * fs)));
    }
    let edge = slack.max(1e-12 * hi.abs());
    let mut out: Vec<f64> = Vec::new();
    let m_max = (hi / fs).ceil() as i64 + 1;
    for m in 0..=m_max {
        for f in [m as f64 * fs - f_measured, m as f64 * fs + f_measured] {
            if f >= lo - edge && f <= hi + edge && f >= -edge && out.iter().all(|g| (g - f).abs() > edge) {
                out.push(f.max(0.0));
            }
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Intersects the alias candidates of several `(f_measured, dwell)`
/// observations of the same tone. Candidates agreeing within `tol` Hz are
/// merged; the returned frequencies are taken from the first observation.
pub fn resolve_aliases(observations: &[(f64, f64)], band: (f64, f64), tol: f64) -> Result<Vec<f64>, SpectraError> {
    let Some((first, rest)) = observations.split_first() else {
        return Err(SpectraError::InvalidArgument("no observations".into()));
    };
    let mut common = unalias(first.0, first.1, band)?;
    for &(f, dwell) in rest {
        let other = unalias(f, dwell, band)?;
        common.retain(|c| other.iter().any(|o| (o - c).abs() <= tol));
    }
    Ok(common)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsotopeLine {
    Larmor,
    /// One of the two lines of the NV's own 15N; index 0 is the lower.
    Nv15(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsotopeMatch {
    pub isotope: String,
    pub line: IsotopeLine,
    /// Hz.
    pub expected: f64,
    /// Measured minus expected, Hz.
    pub offset: f64,
}

/// Table isotopes and NV 15N lines within `tol` Hz of `freq` at field `b0`,
/// closest first. Empty when nothing matches or the inputs are unusable.
pub fn assign_isotope(freq: f64, b0: f64, tol: f64) -> Vec<IsotopeMatch> {
    if !(freq.is_finite() && tol > 0.0) {
        return Vec::new();
    }
    let mut lines: Vec<(String, IsotopeLine, f64)> = Isotope::table()
        .into_iter()
        .filter_map(|iso| larmor_frequency(&iso, b0).ok().map(|f| (iso.name, IsotopeLine::Larmor, f * MHZ)))
        .collect();
    if let Ok(nv) = nv15_lines(b0) {
        for (i, f) in nv.iter().enumerate() {
            lines.push(("15N".to_string(), IsotopeLine::Nv15(i), f * MHZ));
        }
    }
    let mut out: Vec<IsotopeMatch> = lines
        .into_iter()
        .filter(|(_, _, f)| (freq - f).abs() <= tol)
        .map(|(isotope, line, expected)| IsotopeMatch { isotope, line, expected, offset: freq - expected })
        .collect();
    out.sort_by(|a, b| a.offset.abs().total_cmp(&b.offset.abs()));
    out.dedup_by(|a, b| a.isotope == b.isotope && a.line == b.line);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HarmonicKind {
    /// Filter harmonic `f/k` of the multipulse sequence.
    Ordinary,
    /// Finite-pulse artefact at `2f/k` or `4f/k`.
    Spurious,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Harmonic {
    pub m: u32,
    pub k: u32,
    pub kind: HarmonicKind,
}

impl Harmonic {
    pub const MULTIPLIERS: [u32; 3] = [1, 2, 4];
    pub const MAX_ORDER: u32 = 9;

    /// `None` unless `m ∈ {1, 2, 4}` and `k` is odd and at most 9.
    pub fn new(m: u32, k: u32) -> Option<Self> {
        if !Self::MULTIPLIERS.contains(&m) || k % 2 == 0 || k > Self::MAX_ORDER {
            return None;
        }
        let kind = if m == 1 { HarmonicKind::Ordinary } else { HarmonicKind::Spurious };
        Some(Self { m, k, kind })
    }

    pub fn is_fundamental(&self) -> bool {
        self.m == 1 && self.k == 1
    }

    /// Multipulse frequency at which this harmonic of `f_nmr` appears.
    pub fn frequency(&self, f_nmr: f64) -> f64 {
        self.m as f64 * f_nmr / self.k as f64
    }
}

/// Finds the harmonic `m·f_nmr/k` closest to `f_multipulse` in relative
/// terms, accepting it if within `tol`.
pub fn classify_harmonic(f_multipulse: f64, f_nmr: f64, tol: f64) -> Option<Harmonic> {
    if !(f_multipulse > 0.0 && f_nmr > 0.0 && f_multipulse.is_finite() && f_nmr.is_finite()) {
        return None;
    }
    Harmonic::MULTIPLIERS
        .iter()
        .flat_map(|&m| (1..=Harmonic::MAX_ORDER).step_by(2).filter_map(move |k| Harmonic::new(m, k)))
        .map(|h| {
            let target = h.frequency(f_nmr);
            (h, (f_multipulse - target).abs() / target)
        })
        .filter(|(_, err)| *err <= tol)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(h, _)| h)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakAssignment {
    pub peak: Peak,
    /// Best isotope match, if any.
    pub isotope: Option<IsotopeMatch>,
    /// Harmonic relation to the NMR frequency, if one was tested and found.
    pub harmonic: Option<Harmonic>,
}

impl PeakAssignment {
    pub fn new(peak: Peak, b0: f64, tol_hz: f64) -> Self {
        Self { peak, isotope: assign_isotope(peak.freq, b0, tol_hz).into_iter().next(), harmonic: None }
    }

    /// Labels a multipulse peak relative to a known NMR frequency.
    pub fn with_harmonic(mut self, f_nmr: f64, tol: f64) -> Self {
        self.harmonic = classify_harmonic(self.peak.freq, f_nmr, tol);
        self
    }
}
