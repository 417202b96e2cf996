use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nvnmr"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn simulate(cfg: &Path, dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    ok(&args);
}

fn analyze(signal: &Path, cfg: &Path, dir: &Path) {
    ok(&["analyze", signal.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
}

/// Data rows of a CSV, split into fields.
fn rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn without_timestamps(manifest: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(manifest).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("started_unix_s");
    obj.remove("finished_unix_s");
    v
}

fn files_in(dir: &Path) -> Vec<String> {
    match fs::read_dir(dir) {
        Ok(entries) => entries.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = config("fig4b.cfg");
    simulate(&cfg, a.path(), &[]);
    simulate(&cfg, b.path(), &["--threads", "1"]);
    let signal = |d: &TempDir| fs::read(d.path().join("fig4b_signal.csv")).unwrap();
    assert!(signal(&a) == signal(&b), "signal differs between reruns");
    let manifest = |d: &TempDir| fs::read_to_string(d.path().join("fig4b_simulate.manifest.json")).unwrap();
    assert_eq!(without_timestamps(&manifest(&a)), without_timestamps(&manifest(&b)));

    analyze(&a.path().join("fig4b_signal.csv"), &cfg, a.path());
    analyze(&b.path().join("fig4b_signal.csv"), &cfg, b.path());
    for f in ["fig4b_spectrum.csv", "fig4b_peaks.csv"] {
        let read = |d: &TempDir| fs::read_to_string(d.path().join(f)).unwrap();
        assert!(read(&a) == read(&b), "{f} differs between reruns");
    }
}

#[test]
fn seed_override_changes_noise_only() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let cfg = config("fig4b.cfg");
    simulate(&cfg, a.path(), &[]);
    simulate(&cfg, b.path(), &["--seed", "99"]);
    let (ra, rb) = (rows(&a.path().join("fig4b_signal.csv")), rows(&b.path().join("fig4b_signal.csv")));
    assert_eq!(ra.len(), rb.len());
    assert!(ra.iter().zip(&rb).all(|(x, y)| x[0] == y[0]));
    assert!(ra.iter().zip(&rb).any(|(x, y)| x[1] != y[1]));
    let m = fs::read_to_string(b.path().join("fig4b_simulate.manifest.json")).unwrap();
    assert_eq!(without_timestamps(&m)["seed"], 99);
}

#[test]
fn every_output_names_its_manifest() {
    let d = TempDir::new().unwrap();
    let cfg = config("fig4b.cfg");
    simulate(&cfg, d.path(), &[]);
    analyze(&d.path().join("fig4b_signal.csv"), &cfg, d.path());
    for (file, manifest) in [
        ("fig4b_signal.csv", "fig4b_simulate.manifest.json"),
        ("fig4b_spectrum.csv", "fig4b_analyze.manifest.json"),
        ("fig4b_peaks.csv", "fig4b_analyze.manifest.json"),
    ] {
        let text = fs::read_to_string(d.path().join(file)).unwrap();
        assert!(text.contains(&format!("# manifest: {manifest}\n")), "{file}");
        let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join(manifest)).unwrap()).unwrap();
        assert!(m["files"].as_array().unwrap().iter().any(|f| f["name"] == file));
    }
}

#[test]
fn fig4b_round_trip() {
    let d = TempDir::new().unwrap();
    let cfg = config("fig4b.cfg");
    simulate(&cfg, d.path(), &[]);
    analyze(&d.path().join("fig4b_signal.csv"), &cfg, d.path());
    let peaks = rows(&d.path().join("fig4b_peaks.csv"));
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    let (w0, a_par) = (2.09321e6, 4.02350e6);
    for (row, want) in peaks.iter().zip([w0, w0 + a_par]) {
        let f: f64 = row[0].parse().unwrap();
        assert!(((f - want) / want).abs() <= 1e-4, "{f} vs {want}");
        assert!(row[1].parse::<f64>().unwrap() > 0.0);
    }
    assert_eq!(peaks[0][3], "13C");
    assert_eq!(peaks[1][3], "");
}

#[test]
fn undersampled_variant_recovers_true_frequencies() {
    let d = TempDir::new().unwrap();
    let cfg = config("fig4b_undersampled.cfg");
    simulate(&cfg, d.path(), &[]);
    analyze(&d.path().join("fig4b_undersampled_signal.csv"), &cfg, d.path());
    let peaks = rows(&d.path().join("fig4b_undersampled_peaks.csv"));
    assert_eq!(peaks.len(), 2);
    for (row, want) in peaks.iter().zip([2.09321e6, 2.09321e6 + 4.02350e6]) {
        let f: f64 = row[0].parse().unwrap();
        assert!(((f - want) / want).abs() <= 1e-4, "{f} vs {want}");
    }
}

#[test]
fn fig5_has_two_main_peaks() {
    let d = TempDir::new().unwrap();
    let cfg = config("fig5.cfg");
    simulate(&cfg, d.path(), &[]);
    let signal = rows(&d.path().join("fig5_signal.csv"));
    assert_eq!(signal.len(), 120 * 40);
    analyze(&d.path().join("fig5_signal.csv"), &cfg, d.path());
    let peaks = rows(&d.path().join("fig5_peaks.csv"));
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    let spectrum = fs::read_to_string(d.path().join("fig5_spectrum.csv")).unwrap();
    assert!(spectrum.lines().any(|l| l == "f1_hz,f2_hz,re,im,abs"));
}

#[test]
fn empty_system_gives_flat_multipulse_signal() {
    let d = TempDir::new().unwrap();
    let cfg = d.path().join("empty.cfg");
    fs::write(
        &cfg,
        "[system]\nb0_t = 0.2\nnuclei = []\n\n[protocol]\nkind = \"multipulse\"\nn_pulses = 32\npattern = \"cp\"\n\
         tau_s = 1e-7\ngrid = { start_s = 5e-8, dwell_s = 1e-9, count = 50 }\n",
    )
    .unwrap();
    simulate(&cfg, d.path(), &[]);
    let signal = rows(&d.path().join("empty_signal.csv"));
    assert_eq!(signal.len(), 50);
    assert!(signal.iter().all(|r| r[1] == "1"), "{signal:?}");
}

#[test]
fn spurious_harmonic_is_labelled() {
    let d = TempDir::new().unwrap();
    let cfg = config("fig3_harmonic.cfg");
    simulate(&cfg, d.path(), &[]);
    analyze(&d.path().join("fig3_harmonic_signal.csv"), &cfg, d.path());
    let peaks = rows(&d.path().join("fig3_harmonic_peaks.csv"));
    assert_eq!(peaks.len(), 1, "{peaks:?}");
    let f: f64 = peaks[0][0].parse().unwrap();
    assert!((f - 8.21e6).abs() < 0.02e6, "{f}");
    assert_eq!(&peaks[0][4..], ["2", "1", "spurious"]);
}

#[test]
fn zero_length_signal_is_rejected_without_output() {
    let d = TempDir::new().unwrap();
    let signal = d.path().join("empty_signal.csv");
    fs::write(&signal, "# protocol: fid\nt1_s,p\n").unwrap();
    let out_dir = d.path().join("out");
    let out = run(&["analyze", signal.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no samples"));
    assert!(files_in(&out_dir).is_empty());
}

#[test]
fn malformed_signal_reports_the_line() {
    let d = TempDir::new().unwrap();
    let signal = d.path().join("bad_signal.csv");
    fs::write(&signal, "# protocol: fid\nt1_s,p\n0,0.1\n1e-7,0.2\n2e-7,zero\n3e-7,0.1\n").unwrap();
    let out = run(&["analyze", signal.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad_signal.csv:5:"), "{err}");

    fs::write(&signal, "t1_s,p\n0,0.1\n1e-7,0.2\n2.5e-7,0.1\n").unwrap();
    let out = run(&["analyze", signal.to_str().unwrap(), "--out", d.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad_signal.csv:4:"));
    assert!(files_in(&d.path().join("o")).is_empty());
}

#[test]
fn strict_config_aborts_before_computation() {
    let d = TempDir::new().unwrap();
    let text = fs::read_to_string(config("fig4b.cfg")).unwrap().replace("hamiltonian", "hamiltonain");
    let cfg = d.path().join("typo.cfg");
    fs::write(&cfg, text).unwrap();
    let out_dir = d.path().join("out");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hamiltonain"));
    assert!(files_in(&out_dir).is_empty());
}

#[test]
fn noise_requires_a_seed() {
    let d = TempDir::new().unwrap();
    let text = fs::read_to_string(config("fig4b.cfg")).unwrap().replace(", seed = 4021", "");
    let cfg = d.path().join("noseed.cfg");
    fs::write(&cfg, text).unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", d.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("protocol.noise.seed"));
    simulate(&cfg, d.path(), &["--seed", "5"]);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["simulate", "--config", "/nonexistent/run.cfg"]).status.code(), Some(3));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let v = ok(&["version"]);
    assert_eq!(String::from_utf8_lossy(&v.stdout).trim(), format!("nvnmr {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn seq_verbs_on_shipped_programs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("seq");
    let mut files: Vec<PathBuf> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut args = vec!["seq".to_string(), "check".to_string()];
    args.extend(files.iter().map(|f| f.display().to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let report = String::from_utf8(ok(&args).stdout).unwrap();
    assert_eq!(report.lines().filter(|l| l.contains(": ok")).count(), files.len());

    for f in &files {
        let once = ok(&["seq", "format", f.to_str().unwrap()]).stdout;
        assert_eq!(once, fs::read(f).unwrap(), "{}", f.display());
        let tmp = TempDir::new().unwrap();
        let copy = tmp.path().join("p.seq");
        fs::write(&copy, &once).unwrap();
        assert_eq!(ok(&["seq", "format", copy.to_str().unwrap()]).stdout, once);
    }

    let csv = String::from_utf8(ok(&["seq", "expand", "xy8", "--arg", "n=8", "--arg", "tau=121.8ns"]).stdout).unwrap();
    let kinds: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(kinds.iter().filter(|k| **k == "pulse").count(), 8);
    assert_eq!(kinds.iter().filter(|k| **k == "delay").count(), 16);
    let total: f64 = csv.lines().find_map(|l| l.strip_prefix("# total_duration_s: ")).unwrap().parse().unwrap();
    assert!((total - 8.0 * 121.8e-9).abs() <= 1e-12 * total);
}

#[test]
fn seq_check_reports_position() {
    let d = TempDir::new().unwrap();
    let f = d.path().join("broken.seq");
    fs::write(&f, "seq broken(tau: time) {\n    delay(tau)\n    flip;\n}\n").unwrap();
    let out = run(&["seq", "check", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.seq:3:5: syntax error"));
}
