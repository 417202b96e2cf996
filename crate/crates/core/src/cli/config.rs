//! Run configuration. The file is TOML; every table rejects unknown keys.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::CliError;
use crate::protocols::{AcquisitionGrid, CpParams, PhasePattern, ShotNoise};
use crate::spectra::Window;
use crate::spinsys::{FreeHamiltonianKind, Isotope, Nucleus, SpinSystem};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: Option<SystemConfig>,
    pub protocol: Option<ProtocolConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub b0_t: f64,
    /// Electron relaxation times; omitted means no decay.
    #[serde(default = "infinite")]
    pub t1_s: f64,
    #[serde(default = "infinite")]
    pub t2_s: f64,
    #[serde(default)]
    pub nuclei: Vec<NucleusConfig>,
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucleusConfig {
    pub isotope: String,
    /// Overrides or supplies γ/2π in MHz/T.
    pub gamma_mhz_per_t: Option<f64>,
    pub a_par_hz: f64,
    pub a_perp_hz: f64,
    /// Free text shown in output headers, e.g. why a value was chosen.
    pub note: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Multipulse,
    MultipulseCount,
    Fid,
    Fid2d,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub start_s: f64,
    pub dwell_s: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub photons: f64,
    pub contrast: f64,
    pub averages: u64,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    pub n_pulses: u64,
    #[serde(default = "default_pattern")]
    pub pattern: String,
    /// Pulse spacing; defaults to the resonance of `resonant_nucleus`.
    pub tau_s: Option<f64>,
    #[serde(default)]
    pub resonant_nucleus: usize,
    #[serde(default)]
    pub pulse_s: f64,
    /// `h1`, `h2` or `h3` for `fid`.
    pub hamiltonian: Option<String>,
    /// Flip spacing of the periodic-flip evolution; defaults to `tau_s`.
    pub flip_tau_s: Option<f64>,
    /// Offset of the first periodic flip; defaults to the flip spacing.
    pub flip_lead_s: Option<f64>,
    #[serde(default = "yes")]
    pub phase_cycle: bool,
    #[serde(default)]
    pub envelopes: bool,
    pub grid: GridConfig,
    /// Second time axis for `fid2d`.
    pub grid2: Option<GridConfig>,
    pub noise: Option<NoiseConfig>,
}

fn default_pattern() -> String {
    "xy8".into()
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_window")]
    pub window: String,
    #[serde(default = "default_pad")]
    pub zero_pad: usize,
    #[serde(default = "default_window")]
    pub window2: String,
    #[serde(default = "default_pad")]
    pub zero_pad2: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub min_separation_hz: f64,
    #[serde(default = "yes")]
    pub fit: bool,
    #[serde(default = "yes")]
    pub fit_decay: bool,
    /// Initial tone frequencies for the fit; empty means the picked peaks.
    #[serde(default)]
    pub fit_guesses_hz: Vec<f64>,
    #[serde(default = "default_assign_tol")]
    pub assign_tol_hz: f64,
    /// Reference NMR frequency for harmonic labelling of multipulse dips.
    pub nmr_freq_hz: Option<f64>,
    #[serde(default = "default_harmonic_tol")]
    pub harmonic_tol: f64,
    /// Field for isotope assignment; defaults to the signal header.
    pub b0_t: Option<f64>,
}

fn default_window() -> String {
    "cosine".into()
}

fn default_pad() -> usize {
    4
}

fn default_threshold() -> f64 {
    0.3
}

fn default_assign_tol() -> f64 {
    20e3
}

fn default_harmonic_tol() -> f64 {
    5e-3
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
    pub prefix: Option<String>,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir(), prefix: None }
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{path}: {msg}"))
}

fn positive(path: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

/// Everything a simulation needs, checked.
#[derive(Clone, Debug)]
pub struct SimulationPlan {
    pub system: SpinSystem,
    pub kind: ProtocolKind,
    pub cp: CpParams,
    pub hamiltonian: FreeHamiltonianKind,
    pub grid: AcquisitionGrid,
    pub grid2: Option<AcquisitionGrid>,
    pub phase_cycle: bool,
    pub envelopes: bool,
    pub noise: Option<(ShotNoise, u64)>,
    /// Header lines describing the nuclei.
    pub notes: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.analysis.validate()?;
        if let Some(p) = &cfg.output.prefix {
            if p.is_empty() || p.contains(['/', '\\']) {
                return Err(invalid("output.prefix", format!("`{p}` is not a plain file-name prefix")));
            }
        }
        Ok(cfg)
    }

    pub fn system(&self) -> Result<SpinSystem, CliError> {
        let s = self.system.as_ref().ok_or_else(|| invalid("system", "missing table"))?;
        positive("system.b0_t", s.b0_t)?;
        let mut nuclei = Vec::new();
        for (i, n) in s.nuclei.iter().enumerate() {
            let path = format!("system.nuclei[{i}]");
            let iso = match (Isotope::lookup(&n.isotope), n.gamma_mhz_per_t) {
                (_, Some(g)) => Isotope::new(n.isotope.clone(), g).map_err(|e| invalid(&format!("{path}.gamma_mhz_per_t"), e))?,
                (Some(iso), None) => iso,
                (None, None) => {
                    return Err(invalid(
                        &format!("{path}.isotope"),
                        format!("unknown isotope `{}`; give gamma_mhz_per_t", n.isotope),
                    ))
                }
            };
            nuclei.push(Nucleus::new(iso, n.a_par_hz, n.a_perp_hz).map_err(|e| invalid(&path, e))?);
        }
        SpinSystem::new(s.b0_t, nuclei, s.t1_s, s.t2_s).map_err(|e| invalid("system", e))
    }

    /// Validates the system and protocol tables. `seed_override` replaces
    /// the noise seed.
    pub fn plan(&self, seed_override: Option<u64>) -> Result<SimulationPlan, CliError> {
        let system = self.system()?;
        let p = self.protocol.as_ref().ok_or_else(|| invalid("protocol", "missing table"))?;
        let pattern = match p.pattern.as_str() {
            "xy8" => PhasePattern::Xy8,
            "cp" => PhasePattern::Cp,
            other => return Err(invalid("protocol.pattern", format!("`{other}` (expected xy8 or cp)"))),
        };
        let tau = match p.tau_s {
            Some(t) => positive("protocol.tau_s", t)?,
            None => {
                if p.resonant_nucleus >= system.nuclei().len() {
                    return Err(invalid(
                        "protocol.tau_s",
                        format!("not given and there is no nucleus {} to be resonant with", p.resonant_nucleus),
                    ));
                }
                system.resonance_tau(p.resonant_nucleus)
            }
        };
        let cp = CpParams::new(p.n_pulses, tau, pattern, p.pulse_s).map_err(|e| invalid("protocol", e))?;
        let grid = AcquisitionGrid::new(p.grid.start_s, p.grid.dwell_s, p.grid.count)
            .map_err(|e| invalid("protocol.grid", e))?;
        let grid2 = match (p.kind, p.grid2) {
            (ProtocolKind::Fid2d, Some(g)) => {
                Some(AcquisitionGrid::new(g.start_s, g.dwell_s, g.count).map_err(|e| invalid("protocol.grid2", e))?)
            }
            (ProtocolKind::Fid2d, None) => return Err(invalid("protocol.grid2", "required for fid2d")),
            (_, Some(_)) => return Err(invalid("protocol.grid2", "only used by fid2d")),
            (_, None) => None,
        };
        let flip_tau = positive("protocol.flip_tau_s", p.flip_tau_s.unwrap_or(tau))?;
        let h3 = FreeHamiltonianKind::h3_with_lead(flip_tau, p.flip_lead_s.unwrap_or(flip_tau))
            .map_err(|e| invalid("protocol.flip_lead_s", e))?;
        let hamiltonian = match (p.kind, p.hamiltonian.as_deref()) {
            (ProtocolKind::Fid, Some("h1")) => FreeHamiltonianKind::H1,
            (ProtocolKind::Fid, Some("h2")) => FreeHamiltonianKind::H2,
            (ProtocolKind::Fid, Some("h3")) | (ProtocolKind::Fid2d, None) => h3,
            (ProtocolKind::Fid, Some(other)) => {
                return Err(invalid("protocol.hamiltonian", format!("`{other}` (expected h1, h2 or h3)")))
            }
            (ProtocolKind::Fid, None) => return Err(invalid("protocol.hamiltonian", "required for fid")),
            (_, Some(_)) => return Err(invalid("protocol.hamiltonian", "only used by fid")),
            (_, None) => FreeHamiltonianKind::H2,
        };
        let noise = match p.noise {
            None => None,
            Some(n) => {
                let sn = ShotNoise::new(n.photons, n.contrast, n.averages).map_err(|e| invalid("protocol.noise", e))?;
                let seed = seed_override
                    .or(n.seed)
                    .ok_or_else(|| invalid("protocol.noise.seed", "a seed is required when noise is enabled"))?;
                Some((sn, seed))
            }
        };
        let mut notes = BTreeMap::new();
        if let Some(s) = &self.system {
            for (i, n) in s.nuclei.iter().enumerate() {
                if let Some(note) = &n.note {
                    notes.insert(format!("nucleus_{i}_note"), note.clone());
                }
            }
        }
        Ok(SimulationPlan {
            system,
            kind: p.kind,
            cp,
            hamiltonian,
            grid,
            grid2,
            phase_cycle: p.phase_cycle,
            envelopes: p.envelopes,
            noise,
            notes,
        })
    }
}

pub fn parse_window(path: &str, name: &str) -> Result<Window, CliError> {
    match name {
        "none" => Ok(Window::None),
        "cosine" => Ok(Window::Cosine),
        other => Err(invalid(path, format!("`{other}` (expected none or cosine)"))),
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        parse_window("analysis.window", &self.window)?;
        parse_window("analysis.window2", &self.window2)?;
        if self.zero_pad == 0 || self.zero_pad2 == 0 {
            return Err(invalid("analysis.zero_pad", "must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid("analysis.threshold", format!("must lie in (0, 1), got {}", self.threshold)));
        }
        if !(self.min_separation_hz >= 0.0) {
            return Err(invalid("analysis.min_separation_hz", "must be non-negative"));
        }
        for (i, f) in self.fit_guesses_hz.iter().enumerate() {
            positive(&format!("analysis.fit_guesses_hz[{i}]"), *f)?;
        }
        positive("analysis.assign_tol_hz", self.assign_tol_hz)?;
        positive("analysis.harmonic_tol", self.harmonic_tol)?;
        if let Some(f) = self.nmr_freq_hz {
            positive("analysis.nmr_freq_hz", f)?;
        }
        if let Some(b) = self.b0_t {
            positive("analysis.b0_t", b)?;
        }
        Ok(())
    }
}
