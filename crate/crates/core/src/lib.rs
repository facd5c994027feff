//! Near-resonant light scattering from dense, cold, spherical atomic clouds.
//!
//! Two complementary descriptions are implemented and compared:
//!
//! * a macroscopic one, where a self-consistent Lorentz-Lorenz permittivity
//!   ([`permittivity`]) is fed into Debye-Mie partial-wave theory ([`mie`]);
//! * a microscopic one, where the single-excitation resolvent of `N` fixed
//!   two-level (`F0 = 0 -> F = 1`) atoms is solved exactly ([`microscopic`]),
//!   and averaged over random configurations ([`ensemble`]).
//!
//! Units throughout: `hbar = 1`, frequencies and rates in units of the natural
//! width `gamma`, lengths in units of the reduced resonant wavelength
//! `lambdabar = c / omega_0`, cross sections in `lambdabar^2`.

// `!(x < y)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod microscopic;
pub mod mie;
pub mod output;
pub mod permittivity;
pub mod quadrature;
pub mod scenario;
pub mod specfun;
pub mod stats;
pub mod tables;

pub use error::{Error, Result};
pub use scenario::{derive_atom_count, AngularMomentum, DetuningGrid, SampleSpec};
pub use tables::{DecayRow, DecayTrace, SpectrumMethod, SpectrumRow, SpectrumTable};

/// Complex scalar used everywhere in the crate.
pub type C64 = num_complex::Complex64;

/// Default working limit on the dimension `3N` of dense microscopic problems.
pub const DEFAULT_MAX_DIM: usize = 9000;
