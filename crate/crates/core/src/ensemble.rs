//! Configuration averages of microscopic spectra and decay traces, and the
//! diffusion (Holstein) reference for the long-time decay.
//!
//! Configuration `k` of a scenario always uses random stream `k` of the
//! scenario seed, so ensembles can be extended without recomputation and
//! results do not depend on the number of worker threads: configurations are
//! computed in parallel, collected in index order and reduced with
//! compensated sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::microscopic::{
    build_effective_hamiltonian, check_dimension, decay_signal, eigenmodes, microscopic_spectrum,
    sample_configuration_with, AtomicConfiguration, EffectiveHamiltonian, MicroOptions, ModeSet, Polarized,
};
use crate::permittivity::{
    coupling_strength, min_real_permittivity, resonant_cross_section, single_atom_cross_section,
};
use crate::scenario::SampleSpec;
use crate::stats::{summarize, Summary};
use crate::tables::{DecayRow, DecayTrace, SpectrumMethod, SpectrumRow, SpectrumTable};

fn attribute<T>(index: u64, r: Result<T>) -> Result<T> {
    r.map_err(|source| Error::Configuration {
        index,
        source: Box::new(source),
    })
}

fn check_configs(n_configs: usize) -> Result<()> {
    if n_configs == 0 {
        return Err(Error::invalid("n_configs", "must be at least 1"));
    }
    Ok(())
}

/// Configuration and matrix for one index of the scenario.
pub fn build_configuration(
    spec: &SampleSpec,
    index: u64,
    opts: &MicroOptions,
) -> Result<(AtomicConfiguration, EffectiveHamiltonian)> {
    check_dimension(spec.n_atoms()?, opts.max_dim)?;
    if !spec.is_two_level() {
        return Err(Error::invalid(
            "f_ground/f_excited",
            "the microscopic model supports only the F0 = 0 -> F = 1 transition",
        ));
    }
    attribute(
        index,
        (|| {
            let config = sample_configuration_with(spec, index, opts.min_separation)?;
            let h = build_effective_hamiltonian(&config)?;
            Ok((config, h))
        })(),
    )
}

/// Eigenmodes for one configuration, read from or written to the cache.
pub fn configuration_modes(
    spec: &SampleSpec,
    index: u64,
    opts: &MicroOptions,
) -> Result<(AtomicConfiguration, EffectiveHamiltonian, ModeSet)> {
    let (config, h) = build_configuration(spec, index, opts)?;
    let digest = spec.geometry_digest();
    if let Some(cache) = &opts.cache {
        if let Some(modes) = cache.load(&digest, index, opts.min_separation)? {
            if modes.dim() == h.dim() {
                return Ok((config, h, modes));
            }
        }
    }
    let modes = attribute(index, eigenmodes(&h))?;
    if let Some(cache) = &opts.cache {
        cache.store(&digest, index, opts.min_separation, &modes)?;
    }
    Ok((config, h, modes))
}

/// Quadrature spectrum of a single configuration.
pub fn single_spectrum(spec: &SampleSpec, index: u64, opts: &MicroOptions) -> Result<SpectrumTable> {
    let deltas = spec.detuning_values();
    let (config, h) = build_configuration(spec, index, opts)?;
    let q = attribute(index, microscopic_spectrum(&h, &config, &deltas))?;
    Ok(SpectrumTable {
        method: SpectrumMethod::MicroscopicSingle,
        spec: spec.clone(),
        n_configs: 1,
        rows: deltas
            .iter()
            .zip(q)
            .map(|(&delta, q_0)| SpectrumRow {
                delta,
                q_s: None,
                q_a: None,
                q_0,
                q_0_stderr: None,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpectrum {
    /// Per-detuning mean with standard error (absent for a single configuration).
    pub table: SpectrumTable,
    /// `per_config[k][d]`: cross section of configuration `k` at detuning `d`.
    pub per_config: Vec<Vec<f64>>,
}

impl EnsembleSpectrum {
    pub fn summaries(&self) -> Vec<Summary> {
        (0..self.table.rows.len())
            .map(|d| summarize(&self.per_config.iter().map(|c| c[d]).collect::<Vec<_>>()))
            .collect()
    }

    /// Configuration-to-configuration standard deviation over the mean.
    pub fn relative_std(&self) -> Vec<Option<f64>> {
        self.summaries().iter().map(|s| s.std.map(|sd| sd / s.mean)).collect()
    }
}

/// Mean quadrature cross section over configurations `0..n_configs`.
pub fn average_spectrum(spec: &SampleSpec, n_configs: usize, opts: &MicroOptions) -> Result<EnsembleSpectrum> {
    check_configs(n_configs)?;
    check_dimension(spec.n_atoms()?, opts.max_dim)?;
    let per_config: Vec<Vec<f64>> = (0..n_configs as u64)
        .into_par_iter()
        .map(|k| Ok(single_spectrum(spec, k, opts)?.totals()))
        .collect::<Result<_>>()?;
    let deltas = spec.detuning_values();
    let rows = deltas
        .iter()
        .enumerate()
        .map(|(d, &delta)| {
            let s = summarize(&per_config.iter().map(|c| c[d]).collect::<Vec<_>>());
            SpectrumRow {
                delta,
                q_s: None,
                q_a: None,
                q_0: s.mean,
                q_0_stderr: s.stderr,
            }
        })
        .collect();
    Ok(EnsembleSpectrum {
        table: SpectrumTable {
            method: SpectrumMethod::MicroscopicAveraged,
            spec: spec.clone(),
            n_configs,
            rows,
        },
        per_config,
    })
}

/// Probe used for the decay runs: incidence along `+z`, polarization `x`.
pub fn default_excitation() -> Polarized {
    Polarized::linear([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]).expect("fixed unit vectors")
}

/// Decay trace of one configuration.
pub fn single_decay(spec: &SampleSpec, index: u64, t_grid: &[f64], opts: &MicroOptions) -> Result<DecayTrace> {
    let (config, h, modes) = configuration_modes(spec, index, opts)?;
    let mut trace = attribute(index, decay_signal(&h, &config, &modes, &default_excitation(), t_grid))?;
    trace.spec = Some(spec.clone());
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecay {
    /// Mean population and intensity.
    pub mean: DecayTrace,
    pub population_stderr: Vec<Option<f64>>,
    pub intensity_stderr: Vec<Option<f64>>,
    pub per_config: Vec<DecayTrace>,
}

/// Mean decay over configurations `0..n_configs`.
pub fn average_decay(
    spec: &SampleSpec,
    n_configs: usize,
    t_grid: &[f64],
    opts: &MicroOptions,
) -> Result<EnsembleDecay> {
    check_configs(n_configs)?;
    check_dimension(spec.n_atoms()?, opts.max_dim)?;
    let per_config: Vec<DecayTrace> = (0..n_configs as u64)
        .into_par_iter()
        .map(|k| single_decay(spec, k, t_grid, opts))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut population_stderr = Vec::with_capacity(t_grid.len());
    let mut intensity_stderr = Vec::with_capacity(t_grid.len());
    for (j, &t) in t_grid.iter().enumerate() {
        let p = summarize(&per_config.iter().map(|c| c.rows[j].population).collect::<Vec<_>>());
        let i = summarize(&per_config.iter().map(|c| c.rows[j].intensity).collect::<Vec<_>>());
        rows.push(DecayRow {
            t,
            population: p.mean,
            intensity: i.mean,
        });
        population_stderr.push(p.stderr);
        intensity_stderr.push(i.stderr);
    }
    Ok(EnsembleDecay {
        mean: DecayTrace {
            spec: Some(spec.clone()),
            config_seed: None,
            rows,
        },
        population_stderr,
        intensity_stderr,
        per_config,
    })
}

/// Lowest diffusion mode of a sphere with radiative-transfer parameters
/// taken from independent atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolsteinEstimate {
    /// `Gamma_H` in gamma.
    pub rate: f64,
    /// `l = 1 / (n0 sigma(delta))` in `lambdabar`.
    pub mean_free_path: f64,
    /// `D = v l / 3`.
    pub diffusion_constant: f64,
    /// `z0 = 0.71 l`.
    pub extrapolation_length: f64,
    /// Energy transport speed in `lambdabar * gamma`.
    pub transport_speed: f64,
    pub transport_model: String,
    /// The estimate exceeds the single-atom rate (ballistic escape, not clipped).
    pub ballistic: bool,
    /// The density already has a negative-permittivity window.
    pub dense_warning: bool,
}

/// `Gamma_H = pi^2 D / (a + 2 z0)^2`.
///
/// On resonance each scattering event holds the excitation for about one
/// atomic lifetime while the flight between atoms is negligible, so the
/// transport speed is one mean free path per lifetime, `v = l gamma`.
pub fn holstein_estimate(spec: &SampleSpec, delta: f64) -> Result<HolsteinEstimate> {
    if !delta.is_finite() {
        return Err(Error::invalid("delta", "must be finite"));
    }
    let sigma = single_atom_cross_section(delta, spec.f_ground(), spec.f_excited());
    let ell = 1.0 / (spec.density() * sigma);
    let v = ell;
    let d = v * ell / 3.0;
    let z0 = 0.71 * ell;
    let rate = std::f64::consts::PI.powi(2) * d / (spec.radius() + 2.0 * z0).powi(2);
    let coupling = coupling_strength(spec.eta(), spec.f_ground(), spec.f_excited())?;
    let dense_warning = min_real_permittivity(coupling)?.1 < 0.0;
    Ok(HolsteinEstimate {
        rate,
        mean_free_path: ell,
        diffusion_constant: d,
        extrapolation_length: z0,
        transport_speed: v,
        transport_model: "dwell-limited: v = l * gamma (one scattering per atomic lifetime)".into(),
        ballistic: rate > 1.0,
        dense_warning,
    })
}

/// Resonant optical depth across the diameter, `2a / max(l0, lambdabar)`.
///
/// The extinction length cannot drop below one reduced wavelength: beyond
/// that density the medium no longer gets more opaque per unit length.
pub fn optical_depth(spec: &SampleSpec) -> f64 {
    let l0 = 1.0 / (spec.density() * resonant_cross_section(spec.f_ground(), spec.f_excited()));
    2.0 * spec.radius() / l0.max(1.0)
}

/// Density giving `target` optical depth at `radius` in the dilute regime
/// (`l0 > lambdabar`), where the depth is linear in the density.
pub fn matched_density(target: f64, radius: f64) -> Result<f64> {
    if !(target > 0.0 && radius > 0.0) {
        return Err(Error::invalid("optical depth", "target and radius must be positive"));
    }
    let sigma = resonant_cross_section(crate::AngularMomentum::ZERO, crate::AngularMomentum::ONE);
    let eta = target / (2.0 * radius * sigma);
    if 1.0 / (eta * sigma) <= 1.0 {
        return Err(Error::invalid(
            "optical depth",
            format!("depth {target} at radius {radius} needs a mean free path below lambdabar"),
        ));
    }
    Ok(eta)
}
