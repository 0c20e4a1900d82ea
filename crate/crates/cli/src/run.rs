//! Executes a normalized run config and writes its run directory.
//!
//! Layout: `config.json` (normalized config, run id, seed, rng, grid),
//! experiment CSVs, `snapshots/*.bin` field files and `report.json`. Files
//! are created once and never rewritten; a non-empty target is refused.

use crate::config::{Plan, RunConfig};
use crate::error::CliError;
use mdllab::experiments::{
    edge_mass, run_double_slit, run_measurement_demo, run_spreading_comparison, scan_slit_distance, DoubleSlitResult,
    SlitKind, EDGE_BAND, EDGE_TOLERANCE,
};
use mdllab::io::{fmt_f64, write_field};
use mdllab::measurement::RNG_NAME;
use mdllab::observables::ObservableRow;
use mdllab::solvers::{evolve, EvolutionState, EvolveOptions, SolverSpec};
use mdllab::Field;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// sha256 of the normalized config without its output directory.
pub fn run_id(config: &RunConfig) -> String {
    let keyed = RunConfig { out: None, ..config.clone() };
    let digest = Sha256::digest(serde_json::to_vec(&keyed).expect("config serializes"));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn default_dir(config: &RunConfig, id: &str) -> PathBuf {
    Path::new("runs").join(format!("{}-{}", config.experiment.name(), &id[..12]))
}

fn ensure_empty(dir: &Path) -> Result<(), CliError> {
    match fs::read_dir(dir) {
        Ok(mut entries) => match entries.next() {
            Some(_) => Err(CliError::OutputExists(dir.to_path_buf())),
            None => Ok(()),
        },
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
        Err(e) => Err(CliError::io(dir)(e)),
    }
}

struct RunDir {
    root: PathBuf,
}

impl RunDir {
    fn create(root: &Path) -> Result<Self, CliError> {
        ensure_empty(root)?;
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(RunDir { root: root.to_path_buf() })
    }

    fn file(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
        let f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(CliError::io(&path))?;
        Ok((path, BufWriter::new(f)))
    }

    fn write_with(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
        let (path, mut w) = self.file(name)?;
        body(&mut w).and_then(|_| w.flush()).map_err(CliError::io(&path))
    }

    fn json(&self, name: &str, value: &Value) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    fn field(&self, name: &str, field: &Field) -> Result<(), CliError> {
        self.write_with(name, |w| write_field(w, field))
    }
}

fn observables_header(dims: usize) -> String {
    if dims == 1 {
        "solver,t,norm,mean_x,mean_p,sigma_x,sigma_p,energy,robertson_margin".into()
    } else {
        "solver,t,norm,mean_x,mean_y,mean_px,mean_py,sigma_x,sigma_y,sigma_px,sigma_py,energy,robertson_margin".into()
    }
}

fn observables_line(label: &str, r: &ObservableRow) -> String {
    let d = r.dims;
    let mut cols = vec![label.to_string(), fmt_f64(r.t), fmt_f64(r.norm)];
    for v in [&r.mean_x, &r.mean_p, &r.sigma_x, &r.sigma_p] {
        cols.extend(v[..d].iter().map(|x| fmt_f64(*x)));
    }
    cols.push(fmt_f64(r.energy));
    cols.push(fmt_f64(r.robertson_margin));
    cols.join(",")
}

fn write_observables(dir: &RunDir, dims: usize, runs: &[(String, &[ObservableRow])]) -> Result<(), CliError> {
    dir.write_with("observables.csv", |w| {
        writeln!(w, "{}", observables_header(dims))?;
        for (label, rows) in runs {
            for r in rows.iter() {
                writeln!(w, "{}", observables_line(label, r))?;
            }
        }
        Ok(())
    })
}

fn write_screen(dir: &RunDir, name: &str, screen: &Field) -> Result<(), CliError> {
    let g = *screen.grid();
    dir.write_with(name, |w| {
        writeln!(w, "y,intensity")?;
        for (i, v) in screen.values().iter().enumerate() {
            writeln!(w, "{},{}", fmt_f64(g.point(i)[0]), fmt_f64(v.re))?;
        }
        Ok(())
    })
}

fn slit_summary(r: &DoubleSlitResult) -> Value {
    json!({
        "screen_x": r.screen_x,
        "t_final": r.t_final,
        "phi_cl": r.phi_cl,
        "visibility": r.fringes.map(|f| f.visibility),
        "spectral_peak": r.fringes.map(|f| f.spectral_peak),
        "fringe_spacing": r.fringe_spacing,
        "expected_spacing": r.expected_spacing,
        "total_intensity": r.total_intensity,
    })
}

fn kind_name(k: SlitKind) -> &'static str {
    match k {
        SlitKind::Quantum => "quantum",
        SlitKind::Classical => "classical",
    }
}

/// Runs `config` (already normalized) into `out` and returns the directory.
pub fn execute(config: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let id = run_id(config);
    let root = out.map(Path::to_path_buf).or_else(|| config.out.clone()).unwrap_or_else(|| default_dir(config, &id));
    ensure_empty(&root)?;
    let plan = config.plan()?;
    let grid = config.grid.as_ref().map(|g| g.build()).transpose()?;

    // compute first so that a failed run leaves no directory behind
    let writer: Box<dyn FnOnce(&RunDir) -> Result<Value, CliError>> = match plan {
        Plan::Spreading(c) => {
            let table = run_spreading_comparison(&c)?;
            Box::new(move |dir| {
                let runs: Vec<(String, &[ObservableRow])> = table.runs.iter().map(|(l, r)| (l.clone(), r.as_slice())).collect();
                write_observables(dir, 1, &runs)?;
                dir.write_with("spreading.csv", |w| {
                    let hybrid: Vec<String> = table.lambdas.iter().map(|l| format!("sigma_hybrid_{l}")).collect();
                    let mut head = vec!["t", "sigma_analytic", "sigma_quantum", "sigma_classical"];
                    head.extend(hybrid.iter().map(String::as_str));
                    head.push("robertson_margin");
                    writeln!(w, "{}", head.join(","))?;
                    for r in &table.rows {
                        let mut cols = vec![fmt_f64(r.t), fmt_f64(r.sigma_analytic), fmt_f64(r.sigma_quantum), fmt_f64(r.sigma_classical)];
                        cols.extend(r.sigma_hybrid.iter().map(|s| fmt_f64(*s)));
                        cols.push(fmt_f64(r.robertson_margin));
                        writeln!(w, "{}", cols.join(","))?;
                    }
                    Ok(())
                })?;
                let rel = table.rows.iter().map(|r| (r.sigma_quantum / r.sigma_analytic - 1.0).abs()).fold(0.0, f64::max);
                let drift = table.rows.iter().map(|r| (r.sigma_classical - c.sigma0).abs()).fold(0.0, f64::max);
                Ok(json!({
                    "lambdas": table.lambdas,
                    "final": table.rows.last(),
                    "max_quantum_relative_error": rel,
                    "max_classical_drift": drift,
                }))
            })
        }
        Plan::DoubleSlit { config: c, kinds } => {
            let results = kinds.iter().map(|&k| run_double_slit(&c, k)).collect::<Result<Vec<_>, _>>()?;
            Box::new(move |dir| {
                let runs: Vec<(String, &[ObservableRow])> =
                    results.iter().map(|r| (kind_name(r.kind).to_string(), r.observables.as_slice())).collect();
                write_observables(dir, 2, &runs)?;
                let mut summary = serde_json::Map::new();
                for r in &results {
                    let name = kind_name(r.kind);
                    write_screen(dir, &format!("screen_{name}.csv"), &r.screen)?;
                    for (tag, (_, f)) in ["initial", "final"].iter().zip(&r.snapshots) {
                        dir.field(&format!("snapshots/{name}_{tag}.bin"), f)?;
                    }
                    summary.insert(name.to_string(), slit_summary(r));
                }
                Ok(json!({ "phi_cl": c.phi_cl(), "runs": summary }))
            })
        }
        Plan::SlitScan { config: c, d_values } => {
            let rows = scan_slit_distance(&c, &d_values)?;
            Box::new(move |dir| {
                let predicted = |phi: f64| 0.5 * (1.0 + phi.cos());
                dir.write_with("scan.csv", |w| {
                    writeln!(w, "d,phi_cl,cos_phi_cl,total_intensity,predicted,spectral_peak")?;
                    for r in &rows {
                        let cols = [r.d, r.phi_cl, r.phi_cl.cos(), r.total_intensity, predicted(r.phi_cl), r.spectral_peak];
                        writeln!(w, "{}", cols.map(fmt_f64).join(","))?;
                    }
                    Ok(())
                })?;
                let dev = rows.iter().map(|r| (r.total_intensity - predicted(r.phi_cl)).abs()).fold(0.0, f64::max);
                Ok(json!({ "rows": rows, "max_deviation": dev }))
            })
        }
        Plan::Measurement { config: c, t_grid, samples, seed } => {
            let report = run_measurement_demo(&c, &t_grid, samples, seed)?;
            Box::new(move |dir| {
                dir.write_with("overlaps.csv", |w| {
                    writeln!(w, "t,overlap,phase")?;
                    for r in &report.overlaps {
                        let phase = serde_json::to_value(r.phase).map_err(std::io::Error::other)?;
                        writeln!(w, "{},{},{}", fmt_f64(r.t), fmt_f64(r.overlap), phase.as_str().unwrap_or_default())?;
                    }
                    Ok(())
                })?;
                dir.write_with("histogram.csv", |w| {
                    let h = &report.histogram;
                    writeln!(w, "eigenvalue,probability,count")?;
                    for ((e, p), n) in h.eigenvalues.iter().zip(&h.probabilities).zip(&h.counts) {
                        writeln!(w, "{},{},{n}", fmt_f64(*e), fmt_f64(*p))?;
                    }
                    Ok(())
                })?;
                serde_json::to_value(&report).map_err(|e| CliError::Numerical(e.to_string()))
            })
        }
        Plan::Custom { spec, initial, t_final, stride } => {
            let (history, frames) = run_custom(&spec, &initial, t_final, stride)?;
            Box::new(move |dir| {
                write_observables(dir, initial.grid().dims(), &[(spec.kind.name().to_string(), &history)])?;
                dir.write_with("snapshots/index.csv", |w| {
                    writeln!(w, "file,t")?;
                    for (i, (t, _)) in frames.iter().enumerate() {
                        writeln!(w, "{},{}", snapshot_name(i), fmt_f64(*t))?;
                    }
                    Ok(())
                })?;
                for (i, (_, f)) in frames.iter().enumerate() {
                    dir.field(&format!("snapshots/{}", snapshot_name(i)), f)?;
                }
                Ok(json!({ "solver": spec.kind.name(), "snapshots": frames.len(), "final": history.last() }))
            })
        }
    };

    let dir = RunDir::create(&root)?;
    dir.json(
        "config.json",
        &json!({
            "run_id": id,
            "mdllab_version": env!("CARGO_PKG_VERSION"),
            "experiment": config.experiment.name(),
            "seed": config.seed,
            "rng": RNG_NAME,
            "grid": grid,
            "config": config,
        }),
    )?;
    let mut report = writer(&dir)?;
    report["run_id"] = json!(id);
    report["experiment"] = json!(config.experiment.name());
    dir.json("report.json", &report)?;
    Ok(root)
}

fn snapshot_name(i: usize) -> String {
    format!("state_{i:05}.bin")
}

type Frames = Vec<(f64, Field)>;

fn run_custom(spec: &SolverSpec, initial: &EvolutionState, t_final: f64, stride: usize) -> Result<(Vec<ObservableRow>, Frames), CliError> {
    let mut frames = Vec::new();
    let mut breach = None;
    let mut watch = |s: &EvolutionState, sp: &SolverSpec| {
        let f = s.to_field(sp.hbar);
        let m = edge_mass(&f, EDGE_BAND);
        if m > EDGE_TOLERANCE && breach.is_none() {
            breach = Some((s.t, m));
        }
        frames.push((s.t, f));
    };
    let opts = EvolveOptions { stride, keep_snapshots: false, record_observables: true };
    let history = evolve(initial, spec, t_final, opts, &mut [&mut watch])?;
    if let Some((t, mass)) = breach {
        return Err(mdllab::experiments::ExperimentError::DomainBreach { t, mass }.into());
    }
    Ok((history.observables, frames))
}
