//! Plot-ready whitespace-separated files derived from a finished run.
//!
//! Output goes to `RUN_DIR/plotdata/`, one `.dat` file per curve with a `#`
//! header naming the columns, plus a `plots.md` index.

use crate::error::CliError;
use serde_json::Value;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default().split(',').map(str::to_string).collect();
        let rows = lines.filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect();
        Ok(Table { header, rows })
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Rows restricted to `cols`, in that order, as `.dat` lines.
    fn select(&self, cols: &[usize], keep: impl Fn(&[String]) -> bool) -> Vec<String> {
        self.rows.iter().filter(|r| keep(r)).map(|r| cols.iter().map(|&c| r[c].as_str()).collect::<Vec<_>>().join(" ")).collect()
    }
}

struct Plot {
    file: String,
    header: String,
    lines: Vec<String>,
    about: String,
}

fn read_json(path: &Path, dir: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|_| CliError::Incomplete {
        dir: dir.to_path_buf(),
        reason: format!("missing {}", path.file_name().unwrap_or_default().to_string_lossy()),
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Incomplete { dir: dir.to_path_buf(), reason: format!("{}: {e}", path.display()) })
}

fn need(dir: &Path, what: &str) -> CliError {
    CliError::Incomplete { dir: dir.to_path_buf(), reason: format!("missing {what}") }
}

/// Writes the plot files for the run in `dir` and returns the output folder.
pub fn emit_plotdata(dir: &Path) -> Result<PathBuf, CliError> {
    let config = read_json(&dir.join("config.json"), dir)?;
    let report = read_json(&dir.join("report.json"), dir)?;
    let experiment = config["experiment"].as_str().ok_or_else(|| need(dir, "experiment in config.json"))?;
    let table = |name: &str| -> Result<Table, CliError> {
        let p = dir.join(name);
        if !p.exists() {
            return Err(need(dir, name));
        }
        Table::read(&p)
    };
    let cols = |t: &Table, names: &[&str], file: &str| -> Result<Vec<usize>, CliError> {
        names.iter().map(|n| t.col(n).ok_or_else(|| need(dir, &format!("column {n} in {file}")))).collect()
    };

    let mut plots = Vec::new();
    match experiment {
        "spreading" => {
            let t = table("spreading.csv")?;
            let names: Vec<&str> = t.header.iter().map(String::as_str).filter(|h| *h == "t" || h.starts_with("sigma_")).collect();
            let c = cols(&t, &names, "spreading.csv")?;
            plots.push(Plot {
                file: "sigma_vs_t.dat".into(),
                header: names.join(" "),
                lines: t.select(&c, |_| true),
                about: "Position spread σ_x(t): analytic free spreading, quantum, classical and hybrid runs.".into(),
            });
        }
        "double_slit" => {
            for kind in ["quantum", "classical"] {
                let name = format!("screen_{kind}.csv");
                if !dir.join(&name).exists() {
                    continue;
                }
                let t = table(&name)?;
                let c = cols(&t, &["y", "intensity"], &name)?;
                plots.push(Plot {
                    file: format!("screen_{kind}.dat"),
                    header: "y intensity".into(),
                    lines: t.select(&c, |_| true),
                    about: format!("Transverse screen intensity |ψ(x_s, y, T)|² of the {kind} run."),
                });
            }
            if plots.is_empty() {
                return Err(need(dir, "screen_*.csv"));
            }
        }
        "slit_scan" => {
            let t = table("scan.csv")?;
            let c = cols(&t, &["cos_phi_cl", "total_intensity", "predicted", "d", "spectral_peak"], "scan.csv")?;
            let mut lines: Vec<(f64, String)> = t
                .select(&c, |_| true)
                .into_iter()
                .map(|l| (l.split(' ').next().and_then(|v| v.parse().ok()).unwrap_or(f64::NAN), l))
                .collect();
            lines.sort_by(|a, b| a.0.total_cmp(&b.0));
            plots.push(Plot {
                file: "intensity_vs_d.dat".into(),
                header: "cos_phi_cl total_intensity predicted d spectral_peak".into(),
                lines: lines.into_iter().map(|(_, l)| l).collect(),
                about: "Classical screen intensity relative to the in-phase run against cos φ_cl, with the (1 + cos φ_cl)/2 prediction; rows sorted by cos φ_cl.".into(),
            });
        }
        "measurement" => {
            let tau = report["tau"].as_f64().ok_or_else(|| need(dir, "tau in report.json"))?;
            let t = table("overlaps.csv")?;
            let c = cols(&t, &["t", "overlap"], "overlaps.csv")?;
            plots.push(Plot {
                file: "overlap_vs_t.dat".into(),
                header: format!("t overlap tau={}", mdllab::io::fmt_f64(tau)),
                lines: t.select(&c, |_| true),
                about: "Overlap of adjacent pointer branches against time; the header carries the resolution time τ.".into(),
            });
            let h = table("histogram.csv")?;
            let c = cols(&h, &["eigenvalue", "count", "probability"], "histogram.csv")?;
            plots.push(Plot {
                file: "histogram.dat".into(),
                header: "eigenvalue count probability".into(),
                lines: h.select(&c, |_| true),
                about: "Sampled outcome counts with the Born weights.".into(),
            });
        }
        "custom_evolve" => {
            let t = table("observables.csv")?;
            let names: Vec<&str> = ["t", "sigma_x", "sigma_y", "energy"].into_iter().filter(|n| t.col(n).is_some()).collect();
            let c = cols(&t, &names, "observables.csv")?;
            plots.push(Plot {
                file: "sigma_vs_t.dat".into(),
                header: names.join(" "),
                lines: t.select(&c, |_| true),
                about: "Position spread and energy of the evolved state.".into(),
            });
        }
        other => return Err(CliError::Incomplete { dir: dir.to_path_buf(), reason: format!("unknown experiment {other}") }),
    }

    let out = dir.join("plotdata");
    if out.exists() {
        return Err(CliError::OutputExists(out));
    }
    fs::create_dir(&out).map_err(CliError::io(&out))?;
    let mut index = format!("# Plot data for {experiment} run {}\n\n", config["run_id"].as_str().unwrap_or("?"));
    for p in &plots {
        let mut body = format!("# {}\n", p.header);
        for l in &p.lines {
            body.push_str(l);
            body.push('\n');
        }
        let path = out.join(&p.file);
        fs::write(&path, body).map_err(CliError::io(&path))?;
        let _ = writeln!(index, "- `{}`: {} Columns: `{}`.", p.file, p.about, p.header);
    }
    let first = &plots[0];
    let _ = writeln!(index, "\nExample: `gnuplot -p -e \"plot '{}' using 1:2 with lines\"`", first.file);
    let path = out.join("plots.md");
    fs::write(&path, index).map_err(CliError::io(&path))?;
    Ok(out)
}
