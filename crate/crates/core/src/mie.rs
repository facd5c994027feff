//! Debye-Mie partial-wave cross sections of a homogeneous sphere.
//!
//! For each order `J` the TM (`e`) and TE (`m`) scattering-matrix elements
//! are
//!
//! ```text
//! S_e = -(eps j(ka) [a h2(a)]' - h2(a) [ka j(ka)]') / (eps j(ka) [a h1(a)]' - h1(a) [ka j(ka)]')
//! S_m = -(    j(ka) [a h2(a)]' - h2(a) [ka j(ka)]') / (    j(ka) [a h1(a)]' - h1(a) [ka j(ka)]')
//! ```
//!
//! with `k = sqrt(eps)` inside the sphere, the exterior wavenumber equal to
//! one and all primes meaning `d/dz [z f(z)]` at the indicated argument.
//! Cross sections follow from
//!
//! ```text
//! Q_S = pi/2 sum (2J+1) (|1 - S_e|^2 + |1 - S_m|^2)
//! Q_A = pi/2 sum (2J+1) (2 - |S_e|^2 - |S_m|^2)
//! ```
//!
//! and `Q_0 = Q_S + Q_A`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permittivity::{coupling_strength, solve_permittivity};
use crate::scenario::SampleSpec;
use crate::specfun::{riccati_seq, BesselKind};
use crate::tables::{SpectrumMethod, SpectrumRow, SpectrumTable};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MieCoefficients {
    pub order: usize,
    pub s_e: C64,
    pub s_m: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSections {
    pub q_s: f64,
    pub q_a: f64,
    pub q_0: f64,
    /// Number of partial waves summed.
    pub orders: usize,
}

/// Radial functions needed for orders `1..=n_max`.
struct Radial {
    /// `[z j(z)]' / j(z)` at the interior argument.
    log_deriv: Vec<C64>,
    h1: Vec<C64>,
    h1d: Vec<C64>,
    h2: Vec<C64>,
    h2d: Vec<C64>,
}

fn term_error(order: usize, radius: f64, epsilon: C64) -> impl Fn(Error) -> Error {
    move |source| Error::MieTerm {
        order,
        radius,
        epsilon,
        source: Box::new(source),
    }
}

fn check_inputs(epsilon: C64, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(
            "radius",
            format!("must be finite and > 0, got {radius}"),
        ));
    }
    if !(epsilon.re.is_finite() && epsilon.im.is_finite()) {
        return Err(Error::invalid("epsilon", "must be finite"));
    }
    Ok(())
}

impl Radial {
    fn new(n_max: usize, epsilon: C64, radius: f64) -> Result<Self> {
        let err = term_error(n_max, radius, epsilon);
        let z = epsilon.sqrt() * radius;
        let x = C64::new(radius, 0.0);
        let (j, jd) = riccati_seq(BesselKind::J, n_max, z).map_err(&err)?;
        let (h1, h1d) = riccati_seq(BesselKind::H1, n_max, x).map_err(&err)?;
        let (h2, h2d) = riccati_seq(BesselKind::H2, n_max, x).map_err(&err)?;
        let log_deriv = jd.iter().zip(&j).map(|(d, f)| d / f).collect();
        Ok(Radial {
            log_deriv,
            h1,
            h1d,
            h2,
            h2d,
        })
    }

    fn coefficients(&self, order: usize, epsilon: C64) -> MieCoefficients {
        let d = self.log_deriv[order];
        let s = |weight: C64| {
            -(weight * self.h2d[order] - self.h2[order] * d) / (weight * self.h1d[order] - self.h1[order] * d)
        };
        MieCoefficients {
            order,
            s_e: s(epsilon),
            s_m: s(C64::new(1.0, 0.0)),
        }
    }
}

/// Scattering-matrix elements for a single partial wave `J >= 1`.
pub fn mie_coefficients(order: usize, epsilon: C64, radius: f64) -> Result<MieCoefficients> {
    check_inputs(epsilon, radius)?;
    if order == 0 {
        return Err(Error::invalid("order", "partial waves start at J = 1"));
    }
    Ok(Radial::new(order, epsilon, radius)?.coefficients(order, epsilon))
}

/// Initial truncation `x + 4 x^(1/3) + 2`.
pub fn initial_truncation(radius: f64) -> usize {
    (radius + 4.0 * radius.cbrt() + 2.0).ceil() as usize
}

fn contributions(c: &MieCoefficients) -> (f64, f64) {
    let w = 0.5 * PI * (2 * c.order + 1) as f64;
    let q_s = w * ((1.0 - c.s_e).norm_sqr() + (1.0 - c.s_m).norm_sqr());
    let q_a = w * (2.0 - c.s_e.norm_sqr() - c.s_m.norm_sqr());
    (q_s, q_a)
}

/// Sums a fixed number of partial waves.
pub fn cross_sections_truncated(epsilon: C64, radius: f64, orders: usize) -> Result<CrossSections> {
    check_inputs(epsilon, radius)?;
    let radial = Radial::new(orders.max(1), epsilon, radius)?;
    let (mut q_s, mut q_a) = (0.0, 0.0);
    for n in 1..=orders {
        let (s, a) = contributions(&radial.coefficients(n, epsilon));
        q_s += s;
        q_a += a;
    }
    Ok(CrossSections {
        q_s,
        q_a,
        q_0: q_s + q_a,
        orders,
    })
}

/// Elastic, absorption and total cross sections in `lambdabar^2`.
///
/// Summation starts with `x + 4 x^(1/3) + 2` orders and continues until a
/// term changes `Q_0` by less than `1e-12` relative (or drops to the
/// rounding level of a unitary term), up to twice the initial truncation.
pub fn cross_sections(epsilon: C64, radius: f64) -> Result<CrossSections> {
    check_inputs(epsilon, radius)?;
    let j0 = initial_truncation(radius);
    let j_cap = 2 * j0;
    let mut radial = Radial::new(j0, epsilon, radius)?;
    let (mut q_s, mut q_a) = (0.0, 0.0);
    let mut n = 1;
    loop {
        if n > j_cap {
            return Err(Error::NonConvergence {
                what: "Mie partial-wave sum",
                detail: format!("no convergence after {j_cap} orders (radius {radius}, epsilon {epsilon})"),
            });
        }
        if n >= radial.h1.len() {
            radial = Radial::new(j_cap, epsilon, radius)?;
        }
        let (s, a) = contributions(&radial.coefficients(n, epsilon));
        q_s += s;
        q_a += a;
        let q_0 = q_s + q_a;
        // second test: the term is at the rounding level of |S|^2 itself
        let unit = 0.5 * PI * (2 * n + 1) as f64;
        if n >= j0 && ((s + a).abs() <= 1e-12 * q_0.abs() || (s.abs() + a.abs()) <= 1e-14 * unit) {
            break;
        }
        n += 1;
    }
    Ok(CrossSections {
        q_s,
        q_a,
        q_0: q_s + q_a,
        orders: n,
    })
}

/// Mie spectrum over the detuning grid of `spec`.
pub fn mie_spectrum(spec: &SampleSpec) -> Result<SpectrumTable> {
    let coupling = coupling_strength(spec.eta(), spec.f_ground(), spec.f_excited())?;
    let rows = spec
        .detuning_values()
        .par_iter()
        .map(|&delta| {
            let eps = solve_permittivity(delta, coupling)?.epsilon;
            let q = cross_sections(eps, spec.radius())?;
            Ok(SpectrumRow {
                delta,
                q_s: Some(q.q_s),
                q_a: Some(q.q_a),
                q_0: q.q_0,
                q_0_stderr: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTable {
        method: SpectrumMethod::Mie,
        spec: spec.clone(),
        n_configs: 1,
        rows,
    })
}
