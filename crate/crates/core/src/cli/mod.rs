//! Command implementations behind the `nvnmr` binary.
//!
//! Runs are driven by a TOML file with four tables: `[system]`,
//! `[protocol]`, `[analysis]` and `[output]` (see [`RunConfig`]). Unknown
//! keys are rejected. Outputs are CSV files whose leading `# key: value`
//! lines carry units, run parameters and the name of the manifest that
//! lists them.

mod config;
mod io;

pub use config::{
    AnalysisConfig, GridConfig, NoiseConfig, NucleusConfig, OutputConfig, ProtocolConfig, ProtocolKind, RunConfig,
    SimulationPlan, SystemConfig,
};
pub use io::{num, parse_numeric, sha256_hex, FileEntry, NumericTable, RunManifest, Table};

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::protocols::{
    add_shot_noise, add_shot_noise_2d, apply_envelopes, apply_envelopes_2d, fid_protocol, multipulse_count_sweep,
    multipulse_sweep, protocol_2d, AcquisitionGrid, ProtocolError, Signal, Signal2D, SignalMeta,
};
use crate::seqlang::{self, Args, Unit};
use crate::spectra::{
    self, find_dips, find_peaks, find_peaks_2d, fit_frequency, FitOptions, HarmonicKind, IsotopeLine, Peak,
    PeakAssignment, SpectraError,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
            Self::Io(_) => 3,
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::InvalidParams(_) | ProtocolError::Spin(_) => Self::Validation(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::NonUniformGrid { .. } | SpectraError::InvalidArgument(_) => Self::Validation(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn manifest(command: &str, config_sha: Option<String>, input_sha: Option<String>, seed: Option<u64>) -> RunManifest {
    RunManifest {
        tool: "nvnmr".into(),
        version: VERSION.into(),
        command: command.into(),
        config_sha256: config_sha,
        input_sha256: input_sha,
        seed,
        started_unix_s: io::now_unix(),
        finished_unix_s: 0.0,
        files: Vec::new(),
    }
}

enum Acquired {
    One(Signal),
    Two(Signal2D),
}

fn acquire(plan: &SimulationPlan) -> Result<Acquired, CliError> {
    let sys = &plan.system;
    let out = match plan.kind {
        ProtocolKind::Multipulse => Acquired::One(multipulse_sweep(sys, &plan.grid, &plan.cp)?),
        ProtocolKind::MultipulseCount => Acquired::One(multipulse_count_sweep(sys, &plan.cp, &plan.grid)?),
        ProtocolKind::Fid => Acquired::One(fid_protocol(sys, &plan.cp, plan.hamiltonian, &plan.grid, plan.phase_cycle)?),
        ProtocolKind::Fid2d => {
            let grid2 = plan.grid2.expect("validated");
            Acquired::Two(protocol_2d(sys, &plan.cp, &plan.grid, &grid2, plan.hamiltonian, plan.phase_cycle)?)
        }
    };
    Ok(match out {
        Acquired::One(mut s) => {
            if plan.envelopes {
                s = apply_envelopes(&s, sys);
            }
            if let Some((noise, seed)) = &plan.noise {
                s = add_shot_noise(&s, noise, *seed);
            }
            Acquired::One(s)
        }
        Acquired::Two(mut s) => {
            if plan.envelopes {
                s = apply_envelopes_2d(&s, sys);
            }
            if let Some((noise, seed)) = &plan.noise {
                s = add_shot_noise_2d(&s, noise, *seed);
            }
            Acquired::Two(s)
        }
    })
}

fn signal_header(t: &mut Table, meta: &SignalMeta, plan: &SimulationPlan, manifest_name: &str, config_sha: &str) {
    t.meta("nvnmr", "signal");
    t.meta("version", VERSION);
    t.meta("manifest", manifest_name);
    t.meta("config_sha256", config_sha);
    t.meta("protocol", &meta.protocol);
    t.meta("phase_cycled", meta.phase_cycled);
    t.meta("envelopes", plan.envelopes);
    t.meta("b0_t", num(plan.system.b0()));
    t.meta("electron_t1_s", num(plan.system.t1()));
    t.meta("electron_t2_s", num(plan.system.t2()));
    for (i, n) in plan.system.nuclei().iter().enumerate() {
        t.meta(
            &format!("nucleus_{i}"),
            format!(
                "{} gamma_mhz_per_t={} a_par_hz={} a_perp_hz={}",
                n.isotope.name,
                num(n.isotope.gamma),
                num(n.a_par),
                num(n.a_perp)
            ),
        );
    }
    for (k, v) in &plan.notes {
        t.meta(k, v);
    }
    t.meta("pattern", plan.cp.pattern.label());
    t.meta("pulse_s", num(plan.cp.pulse_duration));
    for (k, v) in &meta.extra {
        t.meta(k, v);
    }
    match &plan.noise {
        Some((n, seed)) => {
            t.meta("noise", format!("photons={} contrast={} averages={}", num(n.photons), num(n.contrast), n.averages));
            t.meta("seed", seed);
        }
        None => t.meta("noise", "none"),
    }
}

/// Runs the configured protocol and writes `<prefix>_signal.csv` and
/// `<prefix>_simulate.manifest.json`. Returns the written paths.
pub fn simulate(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Vec<PathBuf>, CliError> {
    let text = io::read_text(config_path)?;
    let cfg = RunConfig::parse(&text)?;
    let plan = cfg.plan(seed)?;
    let config_sha = sha256_hex(text.as_bytes());
    let prefix = cfg.output.prefix.clone().unwrap_or_else(|| stem(config_path));
    let manifest_name = format!("{prefix}_simulate.manifest.json");
    let m = manifest("simulate", Some(config_sha.clone()), None, plan.noise.map(|(_, s)| s));

    let table = match acquire(&plan)? {
        Acquired::One(s) => {
            let mut t = Table::new(&[&s.meta.axis, "p"]);
            signal_header(&mut t, &s.meta, &plan, &manifest_name, &config_sha);
            t.meta("units", format!("{} s, p probability", s.meta.axis));
            t.rows = s.times().iter().zip(&s.values).map(|(x, p)| vec![num(*x), num(*p)]).collect();
            t
        }
        Acquired::Two(s) => {
            let mut t = Table::new(&["t1_s", "t2_s", "p"]);
            signal_header(&mut t, &s.meta, &plan, &manifest_name, &config_sha);
            t.meta("units", "t1_s s, t2_s s, p probability");
            t.meta("layout", "row-major, t2 fastest");
            let (t1, t2) = (s.grid1.times(), s.grid2.times());
            for (i1, a) in t1.iter().enumerate() {
                for (i2, b) in t2.iter().enumerate() {
                    t.rows.push(vec![num(*a), num(*b), num(s.get(i1, i2))]);
                }
            }
            t
        }
    };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    io::write_outputs(&dir, &[(format!("{prefix}_signal.csv"), table.render())], &manifest_name, m)
}

enum Loaded {
    One(Signal),
    Two(Signal2D),
}

fn load_signal(name: &str, text: &str) -> Result<(Loaded, NumericTable), CliError> {
    let table = parse_numeric(name, text)?;
    if table.rows.is_empty() {
        return Err(CliError::Validation(format!("{name}: signal has no samples")));
    }
    let cycled = table.get("phase_cycled") == Some("true");
    let protocol = table.get("protocol").unwrap_or("unknown").to_string();
    let cols: Vec<&str> = table.columns.iter().map(String::as_str).collect();
    let grid_of = |times: &[f64], first_line: usize, stride: usize| {
        spectra::uniform_grid(times).map_err(|e| match e {
            SpectraError::NonUniformGrid { index } => {
                CliError::Validation(format!("{name}:{}: sample time breaks the uniform grid", table.lines[index * stride]))
            }
            _ => CliError::Validation(format!("{name}:{first_line}: {e}")),
        })
    };
    let loaded = match cols.as_slice() {
        [axis, "p"] => {
            let grid = grid_of(&table.column(0), table.lines[0], 1)?;
            let meta = SignalMeta::new(&protocol, axis, cycled);
            Loaded::One(Signal::from_samples(grid, table.column(1), meta)?)
        }
        ["t1_s", "t2_s", "p"] => {
            let t1: Vec<f64> = table.column(0);
            let t2: Vec<f64> = table.column(1);
            let n2 = t1.iter().take_while(|&&t| t == t1[0]).count();
            if table.rows.len() % n2 != 0 {
                return Err(CliError::Validation(format!("{name}: {} rows do not form a full t1 × t2 grid", table.rows.len())));
            }
            let n1 = table.rows.len() / n2;
            for (k, line) in table.lines.iter().enumerate() {
                if t1[k] != t1[(k / n2) * n2] || t2[k] != t2[k % n2] {
                    return Err(CliError::Validation(format!("{name}:{line}: row breaks the t1 × t2 grid layout")));
                }
            }
            let t1_axis: Vec<f64> = (0..n1).map(|i| t1[i * n2]).collect();
            let grid1 = if n1 == 1 {
                AcquisitionGrid::point(t1_axis[0], 1.0)?
            } else {
                grid_of(&t1_axis, table.lines[0], n2)?
            };
            let grid2 = if n2 == 1 { AcquisitionGrid::point(t2[0], 1.0)? } else { grid_of(&t2[..n2], table.lines[0], 1)? };
            let meta = SignalMeta::new(&protocol, "t1_s", cycled);
            Loaded::Two(Signal2D { grid1, grid2, values: table.column(2), components: None, meta })
        }
        _ => {
            return Err(CliError::Validation(format!(
                "{name}: unrecognized columns `{}` (expected <axis>,p or t1_s,t2_s,p)",
                table.columns.join(",")
            )))
        }
    };
    Ok((loaded, table))
}

fn harmonic_kind(k: HarmonicKind) -> &'static str {
    match k {
        HarmonicKind::Ordinary => "ordinary",
        HarmonicKind::Spurious => "spurious",
    }
}

fn peak_rows(peaks: &[Peak], b0: Option<f64>, a: &AnalysisConfig) -> Vec<Vec<String>> {
    peaks
        .iter()
        .map(|p| {
            let mut assigned = match b0 {
                Some(b) => PeakAssignment::new(*p, b, a.assign_tol_hz),
                None => PeakAssignment { peak: *p, isotope: None, harmonic: None },
            };
            if let Some(f) = a.nmr_freq_hz {
                assigned = assigned.with_harmonic(f, a.harmonic_tol);
            }
            let isotope = match &assigned.isotope {
                Some(m) => match m.line {
                    IsotopeLine::Larmor => m.isotope.clone(),
                    IsotopeLine::Nv15(i) => format!("{} (NV line {i})", m.isotope),
                },
                None => String::new(),
            };
            let (hm, hk, kind) = match assigned.harmonic {
                Some(h) => (h.m.to_string(), h.k.to_string(), harmonic_kind(h.kind).to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            vec![num(p.freq), p.fit_uncertainty.map(num).unwrap_or_default(), num(p.amplitude), isotope, hm, hk, kind]
        })
        .collect()
}

/// Analyzes a signal CSV and writes `<prefix>_spectrum.csv`,
/// `<prefix>_peaks.csv` and `<prefix>_analyze.manifest.json`. Nothing is
/// written if any step fails.
pub fn analyze(signal_path: &Path, config_path: Option<&Path>, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let (cfg, config_sha) = match config_path {
        Some(p) => {
            let text = io::read_text(p)?;
            (RunConfig::parse(&text)?, Some(sha256_hex(text.as_bytes())))
        }
        None => (RunConfig::default(), None),
    };
    let a = &cfg.analysis;
    let text = io::read_text(signal_path)?;
    let name = signal_path.display().to_string();
    let (loaded, input) = load_signal(&name, &text)?;
    let prefix = cfg
        .output
        .prefix
        .clone()
        .unwrap_or_else(|| stem(signal_path).trim_end_matches("_signal").to_string());
    let manifest_name = format!("{prefix}_analyze.manifest.json");
    let input_sha = sha256_hex(text.as_bytes());
    let b0 = a.b0_t.or_else(|| input.get("b0_t").and_then(|v| v.parse().ok()));
    let window = config::parse_window("analysis.window", &a.window)?;
    let window2 = config::parse_window("analysis.window2", &a.window2)?;

    let header = |t: &mut Table, what: &str| {
        t.meta("nvnmr", what);
        t.meta("version", VERSION);
        t.meta("manifest", &manifest_name);
        t.meta("input", signal_path.file_name().map(|f| f.to_string_lossy()).unwrap_or_default());
        t.meta("input_sha256", &input_sha);
        if let Some(s) = &config_sha {
            t.meta("config_sha256", s);
        }
    };
    let (spectrum, peaks) = match loaded {
        Loaded::One(s) if s.meta.axis == "tau_s" => {
            let taus = s.times();
            let dips = find_dips(&taus, &s.values, a.threshold);
            let top = s.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut spectrum = Table::new(&["f_hz", "re", "im", "abs"]);
            header(&mut spectrum, "multipulse filter response");
            spectrum.meta("units", "f_hz Hz (filter frequency 1/(2 tau)), re dip depth below the largest sample");
            for (tau, p) in taus.iter().zip(&s.values).rev() {
                let d = top - p;
                spectrum.rows.push(vec![num(0.5 / tau), num(d), "0".into(), num(d.abs())]);
            }
            let mut peaks = Table::new(&["f_hz", "f_err_hz", "amp", "isotope", "harmonic_m", "harmonic_k", "kind"]);
            header(&mut peaks, "peaks");
            peaks.meta("source", "multipulse dips");
            peaks.rows = peak_rows(&dips, b0, a);
            (spectrum, peaks)
        }
        Loaded::One(s) => {
            let spec = spectra::transform(&s, window, a.zero_pad)?;
            let mut found = find_peaks(&spec, a.threshold, a.min_separation_hz);
            let guesses: Vec<f64> =
                if a.fit_guesses_hz.is_empty() { found.iter().map(|p| p.freq).collect() } else { a.fit_guesses_hz.clone() };
            let fitted = a.fit && !guesses.is_empty();
            if fitted {
                let opts = FitOptions { decay: a.fit_decay, ..FitOptions::default() };
                let fit = fit_frequency(&s, &guesses, &opts)?;
                found = fit.peaks();
                found.sort_by(|x, y| x.freq.total_cmp(&y.freq));
            }
            let mut spectrum = Table::new(&["f_hz", "re", "im", "abs"]);
            header(&mut spectrum, "spectrum");
            spectrum.meta("window", window.label());
            spectrum.meta("zero_pad", a.zero_pad);
            spectrum.meta("units", "f_hz Hz, re/im/abs unnormalized DFT of the mean-removed signal");
            spectrum.rows = spec
                .freqs
                .iter()
                .zip(&spec.values)
                .map(|(f, v)| vec![num(*f), num(v.re), num(v.im), num(v.norm())])
                .collect();
            let mut peaks = Table::new(&["f_hz", "f_err_hz", "amp", "isotope", "harmonic_m", "harmonic_k", "kind"]);
            header(&mut peaks, "peaks");
            peaks.meta("source", if fitted { "time-domain fit" } else { "spectrum maxima" });
            peaks.meta("units", "f_hz Hz, f_err_hz Hz (one sigma), amp signal units for fits, |X| otherwise");
            peaks.rows = peak_rows(&found, b0, a);
            (spectrum, peaks)
        }
        Loaded::Two(s) => {
            let spec = spectra::transform_2d(&s, (window, window2), (a.zero_pad, a.zero_pad2))?;
            let mut spectrum = Table::new(&["f1_hz", "f2_hz", "re", "im", "abs"]);
            header(&mut spectrum, "spectrum2d");
            spectrum.meta("window", format!("{} {}", window.label(), window2.label()));
            spectrum.meta("zero_pad", format!("{} {}", a.zero_pad, a.zero_pad2));
            for (i1, f1) in spec.f1.iter().enumerate() {
                for (i2, f2) in spec.f2.iter().enumerate() {
                    let v = spec.get(i1, i2);
                    spectrum.rows.push(vec![num(*f1), num(*f2), num(v.re), num(v.im), num(v.norm())]);
                }
            }
            let mut peaks = Table::new(&["f1_hz", "f2_hz", "amp"]);
            header(&mut peaks, "peaks2d");
            peaks.meta("threshold", num(a.threshold));
            peaks.rows = find_peaks_2d(&spec, a.threshold)
                .iter()
                .map(|p| vec![num(p.f1), num(p.f2), num(p.amplitude)])
                .collect();
            (spectrum, peaks)
        }
    };
    let m = manifest("analyze", config_sha.clone(), Some(input_sha.clone()), None);
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config_path.map(|_| PathBuf::from(&cfg.output.dir)))
        .or_else(|| signal_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    let files = [(format!("{prefix}_spectrum.csv"), spectrum.render()), (format!("{prefix}_peaks.csv"), peaks.render())];
    io::write_outputs(&dir, &files, &manifest_name, m)
}

/// Loads a program from a file, or from the shipped library when no such
/// file exists and the name matches a shipped program.
pub fn load_program_text(path: &Path) -> Result<(String, String), CliError> {
    if !path.exists() {
        let key = path.to_string_lossy();
        if let Some((n, text)) = seqlang::LIBRARY.iter().find(|(n, _)| *n == key) {
            return Ok((format!("<library>/{n}.seq"), text.to_string()));
        }
    }
    Ok((path.display().to_string(), io::read_text(path)?))
}

/// Checks each program; returns one line per file. Any failure makes the
/// whole call fail with all diagnostics.
pub fn seq_check(paths: &[PathBuf]) -> Result<String, CliError> {
    let mut report = String::new();
    let mut failed = false;
    for p in paths {
        let (name, text) = load_program_text(p)?;
        match seqlang::parse(&text) {
            Ok(prog) => report.push_str(&format!("{name}: ok ({})\n", prog.name)),
            Err(e) => {
                failed = true;
                report.push_str(&format!("{name}:{e}\n"));
            }
        }
    }
    if failed {
        Err(CliError::Validation(report.trim_end().to_string()))
    } else {
        Ok(report)
    }
}

pub fn seq_format(path: &Path) -> Result<String, CliError> {
    let (name, text) = load_program_text(path)?;
    let prog = seqlang::parse(&text).map_err(|e| CliError::Validation(format!("{name}:{e}")))?;
    Ok(seqlang::format(&prog))
}

/// Parses `name=value` where value may carry a unit suffix, e.g.
/// `tau=121.8ns` or `n=8`.
pub fn parse_arg(spec: &str) -> Result<(String, f64), CliError> {
    let bad = |m: &str| CliError::Validation(format!("argument `{spec}`: {m}"));
    let (name, value) = spec.split_once('=').ok_or_else(|| bad("expected name=value"))?;
    let value = value.trim();
    let split = value.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E').unwrap_or(value.len());
    let (digits, unit) = value.split_at(split);
    let x: f64 = digits.parse().map_err(|_| bad("value is not a number"))?;
    let scale = if unit.is_empty() {
        1.0
    } else {
        Unit::parse(unit).ok_or_else(|| bad(&format!("unknown unit `{unit}`")))?.scale()
    };
    Ok((name.trim().to_string(), x * scale))
}

/// Expands a program and renders its timed schedule as CSV.
pub fn seq_expand(path: &Path, args: &[String]) -> Result<(String, String), CliError> {
    let (name, text) = load_program_text(path)?;
    let prog = seqlang::parse(&text).map_err(|e| CliError::Validation(format!("{name}:{e}")))?;
    let mut bound = Args::new();
    for a in args {
        let (k, v) = parse_arg(a)?;
        bound.insert(k, v);
    }
    let seq = seqlang::bind_and_expand(&prog, &bound).map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
    let rows = seqlang::schedule(&seq);
    let mut t = Table::new(&["t_start", "kind", "angle", "phase", "duration"]);
    t.meta("nvnmr", "schedule");
    t.meta("program", &prog.name);
    for (k, v) in &bound {
        t.meta(&format!("arg_{k}"), num(*v));
    }
    let total = rows.last().map(|r| r.t_start + r.duration).unwrap_or(0.0);
    t.meta("total_duration_s", num(total));
    t.meta("units", "t_start s, angle rad, phase rad, duration s");
    t.rows = rows
        .iter()
        .map(|r| vec![num(r.t_start), r.kind.to_string(), num(r.angle), num(r.phase), num(r.duration)])
        .collect();
    Ok((prog.name, t.render()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_units() {
        let (name, tau) = parse_arg("tau=121.8ns").unwrap();
        assert!(name == "tau" && (tau - 121.8e-9).abs() < 1e-21);
        assert_eq!(parse_arg("n=8").unwrap(), ("n".into(), 8.0));
        assert_eq!(parse_arg("t=1.5e-6").unwrap(), ("t".into(), 1.5e-6));
        assert!((parse_arg("t=2e3ns").unwrap().1 - 2e-6).abs() < 1e-21);
        assert!(parse_arg("t=5fs").is_err());
        assert!(parse_arg("t5").is_err());
    }

    #[test]
    fn xy8_schedule_csv() {
        let (name, csv) = seq_expand(Path::new("xy8"), &["n=8".into(), "tau=121.8ns".into()]).unwrap();
        assert_eq!(name, "xy8");
        let t = parse_numeric_schedule(&csv);
        assert_eq!(t.iter().filter(|k| k.as_str() == "pulse").count(), 8);
        assert_eq!(t.iter().filter(|k| k.as_str() == "delay").count(), 16);
        let total: f64 = csv.lines().find_map(|l| l.strip_prefix("# total_duration_s: ")).unwrap().parse().unwrap();
        assert!((total - 8.0 * 121.8e-9).abs() < 1e-12 * total);
    }

    fn parse_numeric_schedule(csv: &str) -> Vec<String> {
        csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect()
    }

    #[test]
    fn library_checks_and_formats() {
        let names: Vec<PathBuf> = seqlang::LIBRARY.iter().map(|(n, _)| PathBuf::from(n)).collect();
        let report = seq_check(&names).unwrap();
        assert_eq!(report.lines().count(), names.len());
        for (n, text) in seqlang::LIBRARY {
            assert_eq!(seq_format(Path::new(n)).unwrap(), *text);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation(String::new()).exit_code(), 1);
        assert_eq!(CliError::Runtime(String::new()).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 3);
    }
}
