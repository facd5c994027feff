//! Tabulated results: cross-section spectra and fluorescence decay traces.

use serde::{Deserialize, Serialize};

use crate::scenario::SampleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    Mie,
    MicroscopicSingle,
    MicroscopicAveraged,
}

/// One detuning point. The microscopic calculation only yields the total
/// cross section, so the elastic/absorption split is optional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub delta: f64,
    pub q_s: Option<f64>,
    pub q_a: Option<f64>,
    pub q_0: f64,
    pub q_0_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub method: SpectrumMethod,
    pub spec: SampleSpec,
    /// Number of configurations behind each row (1 for Mie and single runs).
    pub n_configs: usize,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    pub fn deltas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.delta).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.q_0).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    /// Time in `1/gamma`.
    pub t: f64,
    /// Excited-state population.
    pub population: f64,
    /// Fluorescence rate `-dP/dt`.
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub spec: Option<SampleSpec>,
    pub config_seed: Option<u64>,
    pub rows: Vec<DecayRow>,
}

impl DecayTrace {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }
}
