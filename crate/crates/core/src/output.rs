//! CSV tables, JSON sidecars and run manifests.
//!
//! Numbers are written with `{:.17e}` so that files round-trip exactly and
//! diff cleanly; missing values are empty cells.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::permittivity::PermittivityPoint;
use crate::scenario::SampleSpec;
use crate::tables::{DecayTrace, SpectrumTable};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Minimal CSV builder with a mandatory header.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: Vec<String>,
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        let columns: Vec<String> = columns.iter().map(|c| c.as_ref().to_owned()).collect();
        let text = format!("{}\n", columns.join(","));
        Csv { columns, text }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.columns.len(), "CSV row width");
        let line: Vec<&str> = cells.iter().map(|c| c.as_ref()).collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, &self.text)?;
        Ok(())
    }
}

pub fn permittivity_csv(points: &[PermittivityPoint]) -> Csv {
    let mut csv = Csv::new(&["delta", "re_eps", "im_eps", "re_n", "im_n"]);
    for p in points {
        csv.row(&[
            fmt_f64(p.delta),
            fmt_f64(p.epsilon.re),
            fmt_f64(p.epsilon.im),
            fmt_f64(p.index.re),
            fmt_f64(p.index.im),
        ]);
    }
    csv
}

pub fn spectrum_csv(table: &SpectrumTable) -> Csv {
    let mut csv = Csv::new(&["delta", "q_s", "q_a", "q_0", "q_0_stderr"]);
    for r in &table.rows {
        csv.row(&[
            fmt_f64(r.delta),
            fmt_opt(r.q_s),
            fmt_opt(r.q_a),
            fmt_f64(r.q_0),
            fmt_opt(r.q_0_stderr),
        ]);
    }
    csv
}

pub fn decay_csv(trace: &DecayTrace) -> Csv {
    let mut csv = Csv::new(&["t", "population", "intensity"]);
    for r in &trace.rows {
        csv.row(&[fmt_f64(r.t), fmt_f64(r.population), fmt_f64(r.intensity)]);
    }
    csv
}

/// Averaged decay with `_mean` / `_stderr` columns.
pub fn averaged_decay_csv(
    mean: &DecayTrace,
    population_stderr: &[Option<f64>],
    intensity_stderr: &[Option<f64>],
) -> Csv {
    let mut csv = Csv::new(&[
        "t",
        "population_mean",
        "population_stderr",
        "intensity_mean",
        "intensity_stderr",
    ]);
    for (k, r) in mean.rows.iter().enumerate() {
        csv.row(&[
            fmt_f64(r.t),
            fmt_f64(r.population),
            fmt_opt(population_stderr.get(k).copied().flatten()),
            fmt_f64(r.intensity),
            fmt_opt(intensity_stderr.get(k).copied().flatten()),
        ]);
    }
    csv
}

/// Averaged spectrum with `_mean` / `_stderr` columns.
pub fn averaged_spectrum_csv(table: &SpectrumTable) -> Csv {
    let mut csv = Csv::new(&["delta", "q_0_mean", "q_0_stderr"]);
    for r in &table.rows {
        csv.row(&[fmt_f64(r.delta), fmt_f64(r.q_0), fmt_opt(r.q_0_stderr)]);
    }
    csv
}

/// Mie and averaged microscopic spectra on a common grid, with the
/// difference `micro - mie` and its size in standard errors.
pub fn comparison_csv(mie: &SpectrumTable, micro: &SpectrumTable) -> Csv {
    let mut csv = Csv::new(&[
        "delta",
        "mie_q_s",
        "mie_q_a",
        "mie_q_0",
        "micro_q_0_mean",
        "micro_q_0_stderr",
        "difference",
        "difference_in_stderr",
    ]);
    for (m, u) in mie.rows.iter().zip(&micro.rows) {
        let diff = u.q_0 - m.q_0;
        csv.row(&[
            fmt_f64(m.delta),
            fmt_opt(m.q_s),
            fmt_opt(m.q_a),
            fmt_f64(m.q_0),
            fmt_f64(u.q_0),
            fmt_opt(u.q_0_stderr),
            fmt_f64(diff),
            fmt_opt(u.q_0_stderr.filter(|s| *s > 0.0).map(|s| diff / s)),
        ]);
    }
    csv
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to reproduce a run and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub code_version: String,
    pub spec: Option<SampleSpec>,
    pub spec_digest: Option<String>,
    pub seeds: Vec<u64>,
    pub threads: usize,
    pub started_unix: f64,
    pub wall_clock_seconds: f64,
    pub timings: Vec<StageTiming>,
    pub outputs: Vec<OutputDigest>,
    /// Free-form notes: model choices and caveats of this run.
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, spec: Option<&SampleSpec>) -> Self {
        let started_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        RunManifest {
            command,
            code_version: env!("CARGO_PKG_VERSION").to_owned(),
            spec: spec.cloned(),
            spec_digest: spec.map(SampleSpec::digest),
            seeds: spec.map(|s| vec![s.seed()]).unwrap_or_default(),
            threads: rayon::current_num_threads(),
            started_unix,
            wall_clock_seconds: 0.0,
            timings: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = std::time::Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.to_owned(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    /// Records the digest of a file that was just written.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.outputs.push(OutputDigest {
            path: path.to_owned(),
            sha256,
        });
        Ok(())
    }

    /// Recomputes the digests of all recorded outputs; returns mismatching paths.
    pub fn verify(&self) -> Result<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            if sha256_file(&o.path)? != o.sha256 {
                bad.push(o.path.clone());
            }
        }
        Ok(bad)
    }
}
