use std::collections::HashMap;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::config::AtomicConfiguration;
use super::hamiltonian::EffectiveHamiltonian;
use super::modes::ModeSet;
use super::scattering::Polarized;
use crate::error::{Error, Result};
use crate::stats::linear_fit;
use crate::tables::{DecayRow, DecayTrace};
use crate::C64;

/// Residual above which the eigenbasis is considered too ill-conditioned
/// for the mode expansion.
pub const BIORTHOGONALITY_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMethod {
    /// `b(t) = sum_n c_n v_n e^{-i lambda_n t}`.
    ModeSum,
    /// Direct stepping with `exp(-i M dt)`.
    Propagator,
}

impl DecayMethod {
    pub fn for_modes(modes: &ModeSet) -> Self {
        if modes.biorthogonality_residual() <= BIORTHOGONALITY_LIMIT {
            DecayMethod::ModeSum
        } else {
            DecayMethod::Propagator
        }
    }
}

/// Sudden plane-wave imprint `e e^{i k.r_i} / sqrt(N)`.
pub fn initial_amplitudes(config: &AtomicConfiguration, excitation: &Polarized) -> Vec<C64> {
    let n = config.n_atoms();
    let norm = 1.0 / (n as f64).sqrt();
    let k = excitation.direction();
    let e = excitation.polarization();
    let mut b = Vec::with_capacity(3 * n);
    for r in config.positions() {
        let phase = C64::from_polar(norm, k[0] * r[0] + k[1] * r[1] + k[2] * r[2]);
        b.extend(e.iter().map(|c| c * phase));
    }
    b
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("t_grid", "must not be empty"));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "t_grid",
            "must be finite, non-negative and strictly increasing",
        ));
    }
    Ok(())
}

fn mode_coefficients(modes: &ModeSet, b0: &[C64]) -> Vec<C64> {
    let n = modes.dim();
    let rhs = Mat::<C64>::from_fn(n, 1, |i, _| b0[i]);
    let c = modes.vectors().partial_piv_lu().solve(&rhs);
    (0..n).map(|i| c[(i, 0)]).collect()
}

fn mode_sum(modes: &ModeSet, b0: &[C64], t_grid: &[f64]) -> Vec<DecayRow> {
    let n = modes.dim();
    let c = mode_coefficients(modes, b0);
    let lambda = modes.eigenvalues();
    let nt = t_grid.len();
    let amp = Mat::<C64>::from_fn(n, nt, |k, j| c[k] * (C64::new(0.0, -1.0) * lambda[k] * t_grid[j]).exp());
    let damp = Mat::<C64>::from_fn(n, nt, |k, j| C64::new(0.0, -1.0) * lambda[k] * amp[(k, j)]);
    let v = modes.vectors();
    let b = v * &amp;
    let bd = v * &damp;
    (0..nt)
        .map(|j| {
            let mut p = 0.0;
            let mut dp = 0.0;
            for i in 0..n {
                p += b[(i, j)].norm_sqr();
                dp += (b[(i, j)].conj() * bd[(i, j)]).re;
            }
            DecayRow {
                t: t_grid[j],
                population: p,
                intensity: -2.0 * dp,
            }
        })
        .collect()
}

/// `exp(a)` by scaling and squaring of a Taylor series.
fn expm(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0u32;
    while norm1 / f64::from(2u32.pow(s.min(30))) > 0.5 && s < 60 {
        s += 1;
    }
    let scale = 0.5f64.powi(s as i32);
    let a = Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)] * scale);
    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..40 {
        term = &term * &a;
        let inv = 1.0 / k as f64;
        term = Mat::<C64>::from_fn(n, n, |i, j| term[(i, j)] * inv);
        result = &result + &term;
        let tn = (0..n)
            .map(|j| (0..n).map(|i| term[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max);
        if tn < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

fn propagate(h: &EffectiveHamiltonian, b0: &[C64], t_grid: &[f64]) -> Vec<DecayRow> {
    let n = h.dim();
    let m = h.matrix();
    let g = h.decay_matrix();
    let mut cache: HashMap<u64, Mat<C64>> = HashMap::new();
    let mut b = Mat::<C64>::from_fn(n, 1, |i, _| b0[i]);
    let mut t_now = 0.0;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let dt = t - t_now;
        if dt > 0.0 {
            let u = cache
                .entry(dt.to_bits())
                .or_insert_with(|| expm(&Mat::<C64>::from_fn(n, n, |i, j| C64::new(0.0, -dt) * m[(i, j)])));
            b = &*u * &b;
            t_now = t;
        }
        let p: f64 = (0..n).map(|i| b[(i, 0)].norm_sqr()).sum();
        let mut intensity = 0.0;
        for i in 0..n {
            let mut gi = C64::new(0.0, 0.0);
            for j in 0..n {
                gi += b[(j, 0)] * g[(i, j)];
            }
            intensity += (b[(i, 0)].conj() * gi).re;
        }
        rows.push(DecayRow {
            t,
            population: p,
            intensity,
        });
    }
    rows
}

/// Excited population and fluorescence rate after a short pulse.
///
/// `P(t) = ||b(t)||^2` and `I(t) = -dP/dt = b^dagger (-2 Im M) b`, both
/// evaluated analytically. The mode expansion is used when the eigenbasis
/// is well conditioned, otherwise the state is propagated directly.
pub fn decay_signal(
    h: &EffectiveHamiltonian,
    config: &AtomicConfiguration,
    modes: &ModeSet,
    excitation: &Polarized,
    t_grid: &[f64],
) -> Result<DecayTrace> {
    check_grid(t_grid)?;
    if modes.dim() != h.dim() || h.n_atoms() != config.n_atoms() {
        return Err(Error::invalid(
            "modes",
            "mode set, matrix and configuration sizes differ",
        ));
    }
    if config.n_atoms() == 0 {
        return Err(Error::invalid("configuration", "decay needs at least one atom"));
    }
    let b0 = initial_amplitudes(config, excitation);
    let rows = match DecayMethod::for_modes(modes) {
        DecayMethod::ModeSum => mode_sum(modes, &b0, t_grid),
        DecayMethod::Propagator => propagate(h, &b0, t_grid),
    };
    Ok(DecayTrace {
        spec: None,
        config_seed: Some(config.index()),
        rows,
    })
}

/// `int_0^inf I dt` from the mode sum:
/// `sum_nm conj(c_n) c_m K_nm i / (conj(lambda_n) - lambda_m)` with
/// `K = V^dagger (-2 Im M) V`.
pub fn decay_energy_integral(h: &EffectiveHamiltonian, modes: &ModeSet, b0: &[C64]) -> Result<f64> {
    if modes.dim() != h.dim() || b0.len() != h.dim() {
        return Err(Error::invalid("modes", "dimension mismatch"));
    }
    let n = modes.dim();
    let c = mode_coefficients(modes, b0);
    let v = modes.vectors();
    let g = h.decay_matrix();
    let gc = Mat::<C64>::from_fn(n, n, |i, j| C64::new(g[(i, j)], 0.0));
    let k = v.adjoint() * (&gc * v);
    let lambda = modes.eigenvalues();
    let mut total = 0.0;
    for a in 0..n {
        let mut row = 0.0;
        for b in 0..n {
            let w = C64::new(0.0, 1.0) / (lambda[a].conj() - lambda[b]);
            row += (c[a].conj() * c[b] * k[(a, b)] * w).re;
        }
        total += row;
    }
    Ok(total)
}

/// Decay rate from a least-squares fit of `ln I(t)` over `[t1, t2]`.
pub fn tail_rate(trace: &DecayTrace, window: (f64, f64)) -> Result<f64> {
    let (t1, t2) = window;
    if !(t1 < t2) {
        return Err(Error::invalid("window", "needs t1 < t2"));
    }
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for r in trace.rows.iter().filter(|r| r.t >= t1 && r.t <= t2) {
        if !(r.intensity > 0.0) {
            return Err(Error::NonPositiveIntensity {
                t: r.t,
                value: r.intensity,
            });
        }
        ts.push(r.t);
        ys.push(r.intensity.ln());
    }
    let (slope, _) = linear_fit(&ts, &ys)
        .ok_or_else(|| Error::invalid("window", format!("fewer than two samples in [{t1}, {t2}]")))?;
    Ok(-slope)
}
