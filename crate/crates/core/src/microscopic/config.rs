use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SampleSpec;

const RETRIES_PER_ATOM: usize = 10_000;

/// Atom positions inside a sphere of radius `radius`, in `lambdabar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicConfiguration {
    positions: Vec<[f64; 3]>,
    radius: f64,
    /// Seed of the scenario; together with `index` it names the random stream.
    seed: u64,
    index: u64,
    min_separation: f64,
}

impl AtomicConfiguration {
    /// Explicit positions, mainly for tests and few-atom oracles.
    pub fn from_positions(positions: Vec<[f64; 3]>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(
                "radius",
                format!("must be finite and > 0, got {radius}"),
            ));
        }
        for p in &positions {
            if p.iter().any(|c| !c.is_finite()) || norm(p) > radius * (1.0 + 1e-12) {
                return Err(Error::invalid(
                    "positions",
                    format!("{p:?} lies outside radius {radius}"),
                ));
            }
        }
        Ok(AtomicConfiguration {
            positions,
            radius,
            seed: 0,
            index: 0,
            min_separation: 0.0,
        })
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Largest distance of an atom from the centre.
    pub fn extent(&self) -> f64 {
        self.positions.iter().map(norm).fold(0.0, f64::max)
    }

    /// Smallest pair distance and the pair realising it.
    pub fn closest_pair(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                let d = distance(&self.positions[i], &self.positions[j]);
                if best.is_none_or(|b| d < b.2) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }
}

pub(crate) fn norm(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Uniform positions in the ball, no separation constraint.
pub fn sample_configuration(spec: &SampleSpec, config_index: u64) -> Result<AtomicConfiguration> {
    sample_configuration_with(spec, config_index, 0.0)
}

/// Uniform positions in the ball drawn by rejection from the enclosing cube.
///
/// The stream is ChaCha20 keyed by the scenario seed with stream number
/// `config_index`, so configurations can be generated independently and in
/// any order. Points closer than `min_separation` to an accepted point are
/// redrawn.
pub fn sample_configuration_with(
    spec: &SampleSpec,
    config_index: u64,
    min_separation: f64,
) -> Result<AtomicConfiguration> {
    if !(min_separation >= 0.0 && min_separation.is_finite()) {
        return Err(Error::invalid("min_separation", "must be finite and >= 0"));
    }
    let n = spec.n_atoms()?;
    let a = spec.radius();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed());
    rng.set_stream(config_index);

    let mut positions: Vec<[f64; 3]> = Vec::with_capacity(n);
    while positions.len() < n {
        let mut placed = false;
        for _ in 0..RETRIES_PER_ATOM {
            let p = loop {
                let p = [
                    a * (2.0 * rng.random::<f64>() - 1.0),
                    a * (2.0 * rng.random::<f64>() - 1.0),
                    a * (2.0 * rng.random::<f64>() - 1.0),
                ];
                if norm(&p) <= a {
                    break p;
                }
            };
            if min_separation == 0.0 || positions.iter().all(|q| distance(&p, q) >= min_separation) {
                positions.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PackingTooDense {
                n_atoms: n,
                radius: a,
                min_separation,
                retries: RETRIES_PER_ATOM,
            });
        }
    }
    Ok(AtomicConfiguration {
        positions,
        radius: a,
        seed: spec.seed(),
        index: config_index,
        min_separation,
    })
}
