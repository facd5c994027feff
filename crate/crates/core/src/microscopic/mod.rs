//! Exact single-excitation scattering by `N` fixed atoms with an
//! `F0 = 0 -> F = 1` transition.
//!
//! The three excited sublevels of each atom are represented in the Cartesian
//! basis, so the projected resolvent lives on a `3N` dimensional space. Its
//! matrix part `M` ([`EffectiveHamiltonian`]) carries the single-atom width
//! on the diagonal and the resonant dipole-dipole kernel off the diagonal;
//! the detuning enters only through `(delta - M)^{-1}`.
//!
//! Intermediate states with two excited atoms and one photon do not need a
//! separate representation: in the resonant rotating-wave kernel they fold
//! into the same dipole-dipole self-energy.

mod cache;
mod config;
mod decay;
mod hamiltonian;
mod modes;
mod scattering;

pub use cache::{ModeCache, CACHE_DIR_ENV, CACHE_FORMAT_VERSION};
pub use config::{sample_configuration, sample_configuration_with, AtomicConfiguration};
pub use decay::{
    decay_energy_integral, decay_signal, initial_amplitudes, tail_rate, DecayMethod, BIORTHOGONALITY_LIMIT,
};
pub use hamiltonian::{build_effective_hamiltonian, check_dimension, EffectiveHamiltonian, KERNEL_CONVENTION};
pub use modes::{eigenmodes, ModeSet};
pub use scattering::{
    microscopic_spectrum, optical_theorem_cross_section, scattering_amplitude, total_cross_section,
    total_cross_section_along, CrossSectionSolver, Polarized,
};

/// Knobs shared by all microscopic runs.
#[derive(Debug, Clone)]
pub struct MicroOptions {
    /// Minimum pair distance in `lambdabar`; 0 places atoms independently.
    pub min_separation: f64,
    /// Largest accepted dimension `3N`.
    pub max_dim: usize,
    /// Eigendecomposition cache; `None` disables caching.
    pub cache: Option<ModeCache>,
}

impl Default for MicroOptions {
    fn default() -> Self {
        MicroOptions {
            min_separation: 0.0,
            max_dim: crate::DEFAULT_MAX_DIM,
            cache: None,
        }
    }
}
