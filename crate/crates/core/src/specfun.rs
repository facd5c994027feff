//! Spherical Bessel and Hankel functions of integer order and complex
//! argument, plus the Riccati-type derivative `d/dz [z f_n(z)]`.
//!
//! The regular function `j_n` is obtained from Miller's downward recurrence
//! on the ratios `j_n / j_{n-1}` (a continued fraction), normalized against
//! the closed form of `j_0` (or `j_1` close to the zeros of `j_0`). The
//! Hankel functions use upward recurrence from their closed forms at orders
//! 0 and 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::C64;

/// Largest supported order.
pub const MAX_ORDER: usize = 512;
/// Largest supported `|z|`.
pub const MAX_ABS_ARG: f64 = 200.0;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BesselKind {
    /// Regular `j_n`.
    J,
    /// Outgoing `h_n^(1) = j_n + i y_n`.
    H1,
    /// Incoming `h_n^(2) = j_n - i y_n`.
    H2,
}

fn check_domain(kind: BesselKind, order: usize, z: C64) -> Result<()> {
    let domain_err = || Error::Domain {
        kind,
        order,
        z,
        max_abs: MAX_ABS_ARG,
        max_order: MAX_ORDER,
    };
    if order > MAX_ORDER || !z.re.is_finite() || !z.im.is_finite() || z.norm() > MAX_ABS_ARG {
        return Err(domain_err());
    }
    if kind != BesselKind::J && z == C64::new(0.0, 0.0) {
        return Err(domain_err());
    }
    Ok(())
}

fn check_value(kind: BesselKind, order: usize, z: C64, v: C64) -> Result<C64> {
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::Range {
            kind,
            order,
            z,
            what: "overflow",
        });
    }
    Ok(v)
}

/// `f_n(z)` for a single order.
pub fn sph_bessel(kind: BesselKind, order: usize, z: C64) -> Result<C64> {
    Ok(sph_bessel_seq(kind, order, z)?[order])
}

/// `f_0(z), ..., f_max_order(z)`.
pub fn sph_bessel_seq(kind: BesselKind, max_order: usize, z: C64) -> Result<Vec<C64>> {
    check_domain(kind, max_order, z)?;
    match kind {
        BesselKind::J => regular_seq(max_order, z),
        BesselKind::H1 | BesselKind::H2 => hankel_seq(kind, max_order, z),
    }
}

/// `d/dz [z f_n(z)] = z f_{n-1}(z) - n f_n(z)`.
pub fn riccati_derivative(kind: BesselKind, order: usize, z: C64) -> Result<C64> {
    let (_, d) = riccati_seq(kind, order, z)?;
    Ok(d[order])
}

/// Values `f_n(z)` and Riccati derivatives `[z f_n(z)]'` for `n = 0..=max_order`.
pub fn riccati_seq(kind: BesselKind, max_order: usize, z: C64) -> Result<(Vec<C64>, Vec<C64>)> {
    let f = sph_bessel_seq(kind, max_order, z)?;
    let mut d = Vec::with_capacity(max_order + 1);
    // n = 0 from the closed forms of z f_0(z).
    let d0 = match kind {
        BesselKind::J => z.cos(),
        BesselKind::H1 => (I * z).exp(),
        BesselKind::H2 => (-I * z).exp(),
    };
    d.push(check_value(kind, 0, z, d0)?);
    for n in 1..=max_order {
        let v = z * f[n - 1] - f[n] * n as f64;
        d.push(check_value(kind, n, z, v)?);
    }
    Ok((f, d))
}

fn regular_seq(n: usize, z: C64) -> Result<Vec<C64>> {
    let mut out = vec![C64::new(0.0, 0.0); n + 1];
    if z == C64::new(0.0, 0.0) {
        out[0] = C64::new(1.0, 0.0);
        return Ok(out);
    }
    let kind = BesselKind::J;
    let need = n.max(1);
    let top = need.max(z.norm().ceil() as usize);
    let start = top + 20 + (4.0 * (top as f64).sqrt()).ceil() as usize;

    // ratios[k] = j_k / j_{k-1}
    let mut ratios = vec![C64::new(0.0, 0.0); need + 1];
    let mut r = C64::new(0.0, 0.0);
    for k in (1..=start).rev() {
        r = z / (C64::new((2 * k + 1) as f64, 0.0) - z * r);
        if k <= need {
            ratios[k] = r;
        }
    }
    if ratios.iter().skip(1).any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::Range {
            kind,
            order: n,
            z,
            what: "ratio recurrence broke down",
        });
    }

    let j0 = z.sin() / z;
    let j1_closed = (j0 - z.cos()) / z;
    let mut j = if z.norm() >= 1.0 && j0.norm() < j1_closed.norm() {
        // close to a zero of j_0: anchor on j_1 instead
        let j1 = j1_closed;
        out[0] = j0;
        if n >= 1 {
            out[1] = j1;
        }
        j1
    } else {
        out[0] = j0;
        if n >= 1 {
            out[1] = j0 * ratios[1];
        }
        j0 * ratios[1]
    };
    check_value(kind, 0, z, out[0])?;
    for k in 2..=n {
        j *= ratios[k];
        out[k] = j;
    }
    for (k, v) in out.iter().enumerate() {
        check_value(kind, k, z, *v)?;
        if *v == C64::new(0.0, 0.0) || (v.norm() < f64::MIN_POSITIVE) {
            return Err(Error::Range {
                kind,
                order: k,
                z,
                what: "underflow",
            });
        }
    }
    Ok(out)
}

fn hankel_seq(kind: BesselKind, n: usize, z: C64) -> Result<Vec<C64>> {
    let (h0, h1) = match kind {
        BesselKind::H1 => {
            let e = (I * z).exp();
            (-I * e / z, -e * (z + I) / (z * z))
        }
        BesselKind::H2 => {
            let e = (-I * z).exp();
            (I * e / z, -e * (z - I) / (z * z))
        }
        BesselKind::J => unreachable!("regular kind handled separately"),
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(check_value(kind, 0, z, h0)?);
    if n == 0 {
        return Ok(out);
    }
    out.push(check_value(kind, 1, z, h1)?);
    for k in 1..n {
        let next = out[k] * ((2 * k + 1) as f64) / z - out[k - 1];
        out.push(check_value(kind, k + 1, z, next)?);
    }
    Ok(out)
}
