//! Scenario description shared by every computation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Angular momentum quantum number, stored as twice its value so that
/// half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AngularMomentum(u32);

impl AngularMomentum {
    pub const ZERO: Self = AngularMomentum(0);
    pub const ONE: Self = AngularMomentum(2);

    pub fn from_twice(twice: u32) -> Self {
        AngularMomentum(twice)
    }

    pub fn new(value: f64) -> Result<Self> {
        let twice = 2.0 * value;
        if !value.is_finite() || value < 0.0 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::invalid(
                "angular momentum",
                format!("{value} is not a non-negative half-integer"),
            ));
        }
        Ok(AngularMomentum(twice.round() as u32))
    }

    pub fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }

    /// `2F + 1`
    pub fn multiplicity(self) -> u32 {
        self.0 + 1
    }
}

impl fmt::Display for AngularMomentum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl Serialize for AngularMomentum {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for AngularMomentum {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        AngularMomentum::new(v).map_err(serde::de::Error::custom)
    }
}

/// Checks that `F0 -> F` is an allowed closed dipole transition.
pub fn check_transition(ground: AngularMomentum, excited: AngularMomentum) -> Result<()> {
    let (g, e) = (ground.twice() as i64, excited.twice() as i64);
    if (e - g).abs() > 2 || (e - g) % 2 != 0 {
        return Err(Error::invalid(
            "f_excited",
            format!("F = {excited} is not within one unit of F0 = {ground}"),
        ));
    }
    if g == 0 && e == 0 {
        return Err(Error::invalid("f_excited", "0 -> 0 is dipole forbidden"));
    }
    Ok(())
}

/// Uniform detuning grid in units of gamma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetuningGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl DetuningGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        let grid = DetuningGrid { min, max, count };
        grid.validate()?;
        Ok(grid)
    }

    pub fn single(delta: f64) -> Result<Self> {
        DetuningGrid::new(delta, delta, 1)
    }

    fn validate(&self) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::invalid("detuning", "bounds must be finite"));
        }
        match self.count {
            0 => Err(Error::invalid("detuning.count", "must be at least 1")),
            1 if self.min != self.max => Err(Error::invalid("detuning", "a single-point grid needs min == max")),
            1 => Ok(()),
            _ if self.max <= self.min => Err(Error::invalid(
                "detuning",
                "max must exceed min so the grid is strictly increasing",
            )),
            _ => Ok(()),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

/// `N = round(eta * (4/3) pi a^3)`.
pub fn derive_atom_count(eta: f64, radius: f64) -> Result<usize> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
    }
    let n = (eta * 4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)).round();
    if n < 1.0 {
        return Err(Error::TooDilute { eta, radius });
    }
    Ok(n as usize)
}

/// On-disk layout of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    eta: f64,
    radius: f64,
    f_ground: AngularMomentum,
    f_excited: AngularMomentum,
    detuning: DetuningGrid,
    seed: u64,
    n_configs: usize,
}

/// Physical scenario: a uniform sphere of cold atoms probed near resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecFile", into = "SpecFile")]
pub struct SampleSpec {
    eta: f64,
    radius: f64,
    f_ground: AngularMomentum,
    f_excited: AngularMomentum,
    detuning: DetuningGrid,
    seed: u64,
    n_configs: usize,
}

impl TryFrom<SpecFile> for SampleSpec {
    type Error = Error;

    fn try_from(f: SpecFile) -> Result<Self> {
        SampleSpec::new(f.eta, f.radius, f.detuning, f.seed)?
            .with_transition(f.f_ground, f.f_excited)?
            .with_n_configs(f.n_configs)
    }
}

impl From<SampleSpec> for SpecFile {
    fn from(s: SampleSpec) -> Self {
        SpecFile {
            eta: s.eta,
            radius: s.radius,
            f_ground: s.f_ground,
            f_excited: s.f_excited,
            detuning: s.detuning,
            seed: s.seed,
            n_configs: s.n_configs,
        }
    }
}

impl SampleSpec {
    /// A `F0 = 0 -> F = 1` scenario with one configuration.
    pub fn new(eta: f64, radius: f64, detuning: DetuningGrid, seed: u64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        detuning.validate()?;
        Ok(SampleSpec {
            eta,
            radius,
            f_ground: AngularMomentum::ZERO,
            f_excited: AngularMomentum::ONE,
            detuning,
            seed,
            n_configs: 1,
        })
    }

    pub fn with_transition(mut self, ground: AngularMomentum, excited: AngularMomentum) -> Result<Self> {
        check_transition(ground, excited)?;
        self.f_ground = ground;
        self.f_excited = excited;
        Ok(self)
    }

    pub fn with_n_configs(mut self, n_configs: usize) -> Result<Self> {
        if n_configs == 0 {
            return Err(Error::invalid("n_configs", "must be at least 1"));
        }
        self.n_configs = n_configs;
        Ok(self)
    }

    pub fn with_detuning(mut self, detuning: DetuningGrid) -> Result<Self> {
        detuning.validate()?;
        self.detuning = detuning;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn f_ground(&self) -> AngularMomentum {
        self.f_ground
    }
    pub fn f_excited(&self) -> AngularMomentum {
        self.f_excited
    }
    pub fn detuning(&self) -> &DetuningGrid {
        &self.detuning
    }
    pub fn detuning_values(&self) -> Vec<f64> {
        self.detuning.values()
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn n_configs(&self) -> usize {
        self.n_configs
    }

    pub fn n_atoms(&self) -> Result<usize> {
        derive_atom_count(self.eta, self.radius)
    }

    /// True when the microscopic module can treat this transition.
    pub fn is_two_level(&self) -> bool {
        self.f_ground == AngularMomentum::ZERO && self.f_excited == AngularMomentum::ONE
    }

    /// Atomic number density `n0` in `lambdabar^-3`.
    pub fn density(&self) -> f64 {
        self.eta
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario always serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a scenario; `.json` files are parsed as JSON, anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Hex SHA-256 of the canonical JSON form; keys caches and manifests.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario always serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Digest of the fields that determine atom positions (density, radius,
    /// seed). Detuning grid and configuration count do not enter, so cached
    /// per-configuration data survives changes to either.
    pub fn geometry_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.eta.to_bits().to_le_bytes());
        h.update(self.radius.to_bits().to_le_bytes());
        h.update(self.seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}
