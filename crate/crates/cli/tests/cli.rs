use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn mdllab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdllab")).current_dir(dir).args(args).env_remove("MDLLAB_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

/// `(header, rows)` of a whitespace `.dat` file.
fn dat(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect()).collect())
}

const SPREADING: &str = r#"
experiment = "spreading"
stride = 50
[solver]
dt = 1e-3
[grid]
axes = [{ n = 256, min = -15.0, max = 20.0 }]
[spreading]
t_final = 0.5
"#;

const SMALL_SLITS: &str = r#"
[[grid.axes]]
n = 256
min = 0.0
max = 30.0
[[grid.axes]]
n = 128
min = -12.0
max = 12.0
[double_slit]
x_slit = 8.0
x_s = 10.0
k_x = 10.0
sigma_s = 0.4
sigma_envelope = 1.5
dt_quantum = 2e-2
dt_classical = 1e-2
"#;

#[test]
fn missing_config_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = mdllab(tmp.path(), &["run", "--config", "missing.toml"]);
    assert_eq!(code(&o), 2);
    let err = stderr_json(&o);
    assert_eq!(err["error"], "config_read");
    assert_eq!(err["path"], "missing.toml");
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn unknown_and_inapplicable_keys_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "a.toml", "experiment = \"spreading\"\n[spreading]\nsigma0 = 1.0\nwidth = 2.0\n");
    write(tmp.path(), "b.toml", "experiment = \"measurement\"\n[solver]\ndt = 1e-3\n");
    for (name, kind) in [("a.toml", "config_parse"), ("b.toml", "config_invalid")] {
        let o = mdllab(tmp.path(), &["validate", "--config", name]);
        assert_eq!(code(&o), 2, "{name}");
        assert_eq!(stderr_json(&o)["error"], kind);
    }
}

#[test]
fn validate_echo_is_idempotent_and_side_effect_free() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "c.toml", SPREADING);
    let first = mdllab(tmp.path(), &["validate", "--config", "c.toml"]);
    assert_eq!(code(&first), 0);
    write(tmp.path(), "echo.toml", std::str::from_utf8(&first.stdout).unwrap());
    let second = mdllab(tmp.path(), &["validate", "--config", "echo.toml"]);
    assert_eq!(code(&second), 0);
    assert_eq!(first.stdout, second.stdout);
    let mut names: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["c.toml", "echo.toml"]);
}

#[test]
fn spreading_run_writes_monotone_quantum_width() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "s.toml", SPREADING);
    let o = mdllab(tmp.path(), &["run", "--config", "s.toml", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = tmp.path().join("run");

    let csv = fs::read_to_string(run.join("observables.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "sigma_x").unwrap();
    let quantum: Vec<f64> = lines.filter(|l| l.starts_with("quantum,")).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(quantum.len(), 11);
    assert!(quantum.windows(2).all(|w| w[1] > w[0]), "{quantum:?}");
    // analytic free spreading σ₀√(1 + (t/2)²) at t = 0.5
    assert!((quantum[10] / (1.0f64 + 0.0625).sqrt() - 1.0).abs() < 1e-3);
    // every float carries 17 significant digits
    let t1 = csv.lines().nth(2).unwrap().split(',').nth(1).unwrap();
    assert_eq!(t1.split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{t1}");

    let config: Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    let id = config["run_id"].as_str().unwrap();
    assert!(id.len() == 64 && id.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(config["rng"], "ChaCha8Rng");
    assert_eq!(config["grid"]["axes"][0]["n"], 256);

    let again = mdllab(tmp.path(), &["run", "--config", "s.toml", "--out", "run"]);
    assert_eq!(code(&again), 1);
    assert_eq!(stderr_json(&again)["error"], "output_exists");

    assert_eq!(code(&mdllab(tmp.path(), &["plotdata", "run"])), 0);
    let (head, rows) = dat(&run.join("plotdata/sigma_vs_t.dat"));
    assert!(head.starts_with("# t sigma_analytic sigma_quantum sigma_classical"), "{head}");
    assert_eq!(rows.len(), 11);
    assert!(run.join("plotdata/plots.md").exists());
}

#[test]
fn measurement_overlap_header_carries_tau() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "m.toml",
        "experiment = \"measurement\"\n[measurement]\ncoupling = 2.0\npointer_sigma = 0.5\nsamples = 5000\nt_end = 1.5\nt_points = 31\n",
    );
    let o = mdllab(tmp.path(), &["run", "--config", "m.toml", "--out", "run", "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&mdllab(tmp.path(), &["plotdata", "run"])), 0);
    let (head, rows) = dat(&tmp.path().join("run/plotdata/overlap_vs_t.dat"));
    let tau: f64 = head.strip_prefix("# t overlap tau=").unwrap().parse().unwrap();
    // 2.355 σ / (g δp) with δp = 2
    assert_eq!(tau, 2.355 * 0.5 / (2.0 * 2.0));
    assert_eq!(rows.len(), 31);
    assert!(rows.windows(2).all(|w| w[1][1] <= w[0][1]));
    let (_, hist) = dat(&tmp.path().join("run/plotdata/histogram.dat"));
    assert_eq!(hist.iter().map(|r| r[1]).sum::<f64>(), 5000.0);
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["histogram"]["seed"], 11);
}

#[test]
fn double_slit_screens_share_the_y_column() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "d.toml", &format!("experiment = \"double_slit\"\n{SMALL_SLITS}d = 3.0\n"));
    let o = mdllab(tmp.path(), &["run", "--config", "d.toml", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["quantum_initial", "quantum_final", "classical_initial", "classical_final"] {
        assert!(tmp.path().join(format!("run/snapshots/{f}.bin")).exists(), "{f}");
    }
    assert_eq!(code(&mdllab(tmp.path(), &["plotdata", "run"])), 0);
    let (hq, q) = dat(&tmp.path().join("run/plotdata/screen_quantum.dat"));
    let (hc, c) = dat(&tmp.path().join("run/plotdata/screen_classical.dat"));
    assert_eq!((hq.as_str(), hc.as_str()), ("# y intensity", "# y intensity"));
    assert_eq!(q.len(), 128);
    assert!(q.iter().zip(&c).all(|(a, b)| a[0] == b[0]));
}

#[test]
fn slit_scan_intensity_is_monotone_in_cos_phi() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "s.toml", &format!("experiment = \"slit_scan\"\n{SMALL_SLITS}[slit_scan]\nd_values = [2.0, 2.5, 3.0, 3.5, 4.0]\n"));
    let o = mdllab(tmp.path(), &["run", "--config", "s.toml", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&mdllab(tmp.path(), &["plotdata", "run"])), 0);
    let (head, rows) = dat(&tmp.path().join("run/plotdata/intensity_vs_d.dat"));
    assert!(head.starts_with("# cos_phi_cl total_intensity predicted d"));
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[1][0] >= w[0][0] && w[1][1] >= w[0][1] - 1e-12));
    // (1 + cos k_y d)/2
    assert!(rows.iter().all(|r| (r[1] - 0.5 * (1.0 + r[0])).abs() < 0.02));
}

#[test]
fn numerical_failures_exit_3() {
    let tmp = TempDir::new().unwrap();
    write(
        tmp.path(),
        "breach.toml",
        "experiment = \"custom_evolve\"\n[grid]\naxes = [{ n = 128, min = -8.0, max = 8.0 }]\n[custom_evolve]\nt_final = 2.0\nmomentum = [4.0]\n",
    );
    let o = mdllab(tmp.path(), &["run", "--config", "breach.toml", "--out", "b"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"], "numerical");
    assert!(!tmp.path().join("b").exists());

    // rays of a packet at rest in a trap meet at the centre after a quarter period π/2ω
    write(
        tmp.path(),
        "trap.toml",
        "experiment = \"custom_evolve\"\n[solver]\nkind = \"classical_decoupled\"\npotential = { kind = \"harmonic\", omega = 2.0 }\n[grid]\naxes = [{ n = 128, min = -10.0, max = 10.0 }]\n[custom_evolve]\nt_final = 1.0\n",
    );
    let o = mdllab(tmp.path(), &["run", "--config", "trap.toml", "--out", "c"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("characteristics cross"));
}

#[test]
fn plotdata_rejects_incomplete_runs() {
    let tmp = TempDir::new().unwrap();
    fs::create_dir(tmp.path().join("r")).unwrap();
    write(&tmp.path().join("r"), "config.json", "{\"experiment\": \"spreading\"}");
    let o = mdllab(tmp.path(), &["plotdata", "r"]);
    assert_eq!(code(&o), 1);
    assert_eq!(stderr_json(&o)["error"], "incomplete_run");
}

#[test]
fn thread_cap_must_be_positive() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "s.toml", SPREADING);
    let o = Command::new(env!("CARGO_BIN_EXE_mdllab"))
        .current_dir(tmp.path())
        .args(["run", "--config", "s.toml"])
        .env("MDLLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("MDLLAB_THREADS"));
}

#[test]
fn version_prints_package_version() {
    let o = mdllab(Path::new("."), &["version"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), format!("mdllab {}", env!("CARGO_PKG_VERSION")));
}
