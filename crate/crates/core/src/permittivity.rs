//! Self-consistent Lorentz-Lorenz permittivity of a dense resonant gas.
//!
//! The local-field closure reads
//!
//! ```text
//! eps = (1 - 2 A g) / (1 + A g),    g = 1 / (delta + i sqrt(eps) / 2)
//! ```
//!
//! with `A` the coupling strength in units of gamma. The linewidth is
//! dressed by the refractive index `x = sqrt(eps)`, which turns the closure
//! into a cubic in `x`. Writing `x = i y` gives a cubic with *real*
//! coefficients,
//!
//! ```text
//! y^3/2 - (delta + A) y^2 + y/2 - (delta - 2A) = 0,
//! ```
//!
//! so the roots are either three imaginary `x` or one imaginary `x` plus a
//! pair `x, -conj(x)`. The physical branch is the pair member with
//! `Re x > 0` when the pair exists and the middle imaginary root otherwise.
//! That branch tends to `x = 1` as `A -> 0` or `|delta| -> inf`, is
//! continuous in `delta` (it passes through the root collisions on the
//! imaginary axis) and is passive, `Im eps >= 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{check_transition, AngularMomentum};
use crate::C64;

/// Lorentz-Lorenz coupling `A`, in units of gamma.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CouplingStrength(f64);

impl CouplingStrength {
    pub fn new(a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid("coupling", format!("must be finite and >= 0, got {a}")));
        }
        Ok(CouplingStrength(a))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Degeneracy-averaged resonant cross section `6 pi (2F+1) / (3 (2F0+1))`
/// in `lambdabar^2`.
pub fn resonant_cross_section(f_ground: AngularMomentum, f_excited: AngularMomentum) -> f64 {
    6.0 * std::f64::consts::PI * f64::from(f_excited.multiplicity()) / (3.0 * f64::from(f_ground.multiplicity()))
}

/// Independent-atom cross section at detuning `delta`.
pub fn single_atom_cross_section(delta: f64, f_ground: AngularMomentum, f_excited: AngularMomentum) -> f64 {
    resonant_cross_section(f_ground, f_excited) / (1.0 + 4.0 * delta * delta)
}

/// `A = (4 pi n0 / 3) |d|^2 / (3 (2F0+1))` with the reduced dipole element
/// eliminated in favour of gamma, giving `pi eta (2F+1) / (3 (2F0+1))`.
pub fn coupling_strength(eta: f64, f_ground: AngularMomentum, f_excited: AngularMomentum) -> Result<CouplingStrength> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", format!("must be finite and >= 0, got {eta}")));
    }
    check_transition(f_ground, f_excited)?;
    CouplingStrength::new(
        std::f64::consts::PI * eta * f64::from(f_excited.multiplicity()) / (3.0 * f64::from(f_ground.multiplicity())),
    )
}

/// Shortcut for the `F0 = 0 -> F = 1` transition.
pub fn coupling_strength_two_level(eta: f64) -> Result<CouplingStrength> {
    coupling_strength(eta, AngularMomentum::ZERO, AngularMomentum::ONE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `Re x > 0` member of a `x, -conj(x)` pair.
    Pair,
    /// Middle of three purely imaginary roots (Re eps < 0, Im eps = 0).
    MiddleImaginary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermittivityPoint {
    pub delta: f64,
    pub epsilon: C64,
    /// Refractive index `sqrt(eps)` on the selected branch.
    pub index: C64,
    /// Position of the selected root among all three, ordered by `Im x`
    /// and then `Re x`.
    pub root_index: u8,
    pub branch: Branch,
    pub residual: f64,
}

/// Right-hand side of the closure evaluated with refractive index `x`.
pub fn closure_rhs(delta: f64, coupling: CouplingStrength, x: C64) -> C64 {
    let a = coupling.value();
    let g = (C64::new(delta, 0.0) + C64::new(0.0, 0.5) * x).inv();
    (1.0 - 2.0 * a * g) / (1.0 + a * g)
}

/// Self-consistency residual `|eps - rhs(eps)| / max(1, |eps|)`.
pub fn closure_residual(delta: f64, coupling: CouplingStrength, x: C64) -> f64 {
    let eps = x * x;
    (eps - closure_rhs(delta, coupling, x)).norm() / eps.norm().max(1.0)
}

const RESIDUAL_TOL: f64 = 1e-10;
const AMBIGUITY_TOL: f64 = 1e-8;

/// Real roots of `y^3 + a y^2 + b y + c`, or one real root plus a complex
/// pair. Returns `(real_roots, pair)` where `pair` holds the root with
/// negative imaginary part.
fn real_cubic(a: f64, b: f64, c: f64) -> (Vec<f64>, Option<C64>) {
    let poly = |y: f64| ((y + a) * y + b) * y + c;
    let dpoly = |y: f64| (3.0 * y + 2.0 * a) * y + b;
    let polish = |mut y: f64| {
        for _ in 0..4 {
            let d = dpoly(y);
            if d == 0.0 {
                break;
            }
            let step = poly(y) / d;
            let next = y - step;
            if poly(next).abs() >= poly(y).abs() {
                break;
            }
            y = next;
        }
        y
    };

    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = q * q / 4.0 + p * p * p / 27.0;

    if disc < 0.0 {
        // three distinct real roots
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        let mut roots: Vec<f64> = (0..3)
            .map(|k| polish(m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift))
            .collect();
        roots.sort_by(|x, y| x.total_cmp(y));
        return (roots, None);
    }

    let s = disc.sqrt();
    let u = (-q / 2.0 + if q > 0.0 { -s } else { s }).cbrt();
    let t = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
    let r = polish(t - shift);
    // deflate: y^2 + (a + r) y + cst, with cst from Vieta's product when
    // r dominates (b + r (a + r) cancels badly there)
    let lin = a + r;
    let cst = if r.abs() >= 1.0 { -c / r } else { b + r * lin };
    let qd = lin * lin / 4.0 - cst;
    if qd >= 0.0 {
        // numerically a double root: report three real roots
        let sq = qd.sqrt();
        let mut roots = vec![r, polish(-lin / 2.0 - sq), polish(-lin / 2.0 + sq)];
        roots.sort_by(|x, y| x.total_cmp(y));
        return (roots, None);
    }
    let mut z = C64::new(-lin / 2.0, -(-qd).sqrt());
    for _ in 0..3 {
        let p = ((z + a) * z + b) * z + c;
        let d = (z * 3.0 + 2.0 * a) * z + b;
        if d.norm() == 0.0 {
            break;
        }
        let next = z - p / d;
        let pn = ((next + a) * next + b) * next + c;
        if !(pn.norm() < p.norm()) {
            break;
        }
        z = next;
    }
    (vec![r], Some(z))
}

/// All three roots `x` of the closure cubic, ordered by `Im x` then `Re x`.
pub fn closure_roots(delta: f64, coupling: CouplingStrength) -> [C64; 3] {
    let (real, pair) = cubic_in_y(delta, coupling);
    let mut xs: Vec<C64> = real.iter().map(|&y| C64::new(0.0, y)).collect();
    if let Some(y) = pair {
        let x = C64::new(0.0, 1.0) * y;
        xs.push(x);
        xs.push(-x.conj());
    }
    xs.sort_by(|u, v| u.im.total_cmp(&v.im).then(u.re.total_cmp(&v.re)));
    [xs[0], xs[1], xs[2]]
}

fn cubic_in_y(delta: f64, coupling: CouplingStrength) -> (Vec<f64>, Option<C64>) {
    let a = coupling.value();
    // monic form of y^3/2 - (delta + A) y^2 + y/2 - (delta - 2A)
    real_cubic(-2.0 * (delta + a), 1.0, -2.0 * (delta - 2.0 * a))
}

/// Solves the self-consistent closure at one detuning.
pub fn solve_permittivity(delta: f64, coupling: CouplingStrength) -> Result<PermittivityPoint> {
    if !delta.is_finite() {
        return Err(Error::invalid("delta", "must be finite"));
    }
    if coupling.value() == 0.0 {
        return Ok(PermittivityPoint {
            delta,
            epsilon: C64::new(1.0, 0.0),
            index: C64::new(1.0, 0.0),
            root_index: 2,
            branch: Branch::Pair,
            residual: 0.0,
        });
    }

    let roots = closure_roots(delta, coupling);
    let (real, pair) = cubic_in_y(delta, coupling);
    let (index, epsilon, branch) = match pair {
        Some(y) => {
            // y = u - i v with v > 0  ->  x = i y = v + i u
            let x = C64::new(0.0, 1.0) * y;
            (x, x * x, Branch::Pair)
        }
        None => {
            let y = real[1];
            (C64::new(0.0, y), C64::new(-y * y, 0.0), Branch::MiddleImaginary)
        }
    };

    let candidates = roots.to_vec();
    if index.im < -1e-12 * index.norm().max(1.0) {
        return Err(Error::NoCausalRoot {
            delta,
            coupling: coupling.value(),
            candidates,
        });
    }
    if branch == Branch::MiddleImaginary {
        let close = real
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != 1)
            .any(|(_, &y)| y >= 0.0 && (y - real[1]).abs() < AMBIGUITY_TOL);
        if close {
            return Err(Error::BranchAmbiguity {
                delta,
                coupling: coupling.value(),
                candidates,
            });
        }
    }

    let residual = closure_residual(delta, coupling, index);
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::Residual { delta, residual });
    }
    let root_index = roots
        .iter()
        .position(|r| (*r - index).norm() <= 1e-14 * index.norm().max(1.0))
        .unwrap_or(0) as u8;
    Ok(PermittivityPoint {
        delta,
        epsilon,
        index,
        root_index,
        branch,
        residual,
    })
}

/// Solves on a detuning grid; the result does not depend on the thread count.
pub fn permittivity_scan(deltas: &[f64], coupling: CouplingStrength) -> Result<Vec<PermittivityPoint>> {
    deltas.par_iter().map(|&d| solve_permittivity(d, coupling)).collect()
}

fn real_eps(delta: f64, coupling: CouplingStrength) -> Result<f64> {
    Ok(solve_permittivity(delta, coupling)?.epsilon.re)
}

/// Contiguous detuning interval where `Re eps < 0`, refined to `1e-6`.
///
/// The grid must cover `[-10, 10]`. When the sign pattern on the grid shows
/// several negative runs the widest one is returned.
pub fn negative_window(coupling: CouplingStrength, delta_grid: &[f64]) -> Result<Option<(f64, f64)>> {
    let lo = delta_grid.first().copied().unwrap_or(f64::NAN);
    let hi = delta_grid.last().copied().unwrap_or(f64::NAN);
    if !(lo <= -10.0 && hi >= 10.0) || delta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "delta_grid",
            "must be strictly increasing and cover at least [-10, 10]",
        ));
    }
    if coupling.value() == 0.0 {
        return Ok(None);
    }
    let re: Vec<f64> = permittivity_scan(delta_grid, coupling)?
        .iter()
        .map(|p| p.epsilon.re)
        .collect();

    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < re.len() {
        if re[i] < 0.0 {
            let start = i;
            while i + 1 < re.len() && re[i + 1] < 0.0 {
                i += 1;
            }
            let width = delta_grid[i] - delta_grid[start];
            if best.is_none_or(|(s, e)| width > delta_grid[e] - delta_grid[s]) {
                best = Some((start, i));
            }
        }
        i += 1;
    }
    let Some((start, end)) = best else {
        return Ok(None);
    };

    let refine = |mut pos: f64, mut neg: f64| -> Result<f64> {
        while (pos - neg).abs() > 1e-6 {
            let mid = 0.5 * (pos + neg);
            if real_eps(mid, coupling)? < 0.0 {
                neg = mid;
            } else {
                pos = mid;
            }
        }
        Ok(0.5 * (pos + neg))
    };
    let lo = if start == 0 {
        delta_grid[0]
    } else {
        refine(delta_grid[start - 1], delta_grid[start])?
    };
    let hi = if end + 1 == re.len() {
        delta_grid[end]
    } else {
        refine(delta_grid[end + 1], delta_grid[end])?
    };
    Ok(Some((lo, hi)))
}

/// Minimum of `Re eps` over `[-10, 10]`: grid search plus golden-section polish.
pub fn min_real_permittivity(coupling: CouplingStrength) -> Result<(f64, f64)> {
    let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
    let re: Vec<f64> = permittivity_scan(&grid, coupling)?
        .iter()
        .map(|p| p.epsilon.re)
        .collect();
    let (imin, _) = re
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let (mut a, mut b) = (grid[imin.saturating_sub(1)], grid[(imin + 1).min(grid.len() - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (real_eps(c, coupling)?, real_eps(d, coupling)?);
    while b - a > 1e-9 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = real_eps(c, coupling)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = real_eps(d, coupling)?;
        }
    }
    let d_min = 0.5 * (a + b);
    let v = real_eps(d_min, coupling)?.min(re[imin]);
    Ok((d_min, v))
}

/// Smallest density `eta = n0 lambdabar^3` at which a negative-permittivity
/// window opens, by bisection to `1e-4`.
pub fn critical_density(f_ground: AngularMomentum, f_excited: AngularMomentum) -> Result<f64> {
    let min_re =
        |eta: f64| -> Result<f64> { Ok(min_real_permittivity(coupling_strength(eta, f_ground, f_excited)?)?.1) };
    let (mut lo, mut hi) = (1e-3, 1.0);
    let (flo, fhi) = (min_re(lo)?, min_re(hi)?);
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::NonConvergence {
            what: "critical density bisection",
            detail: format!("invalid bracket: min Re eps = {flo} at eta = {lo}, {fhi} at eta = {hi}"),
        });
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if min_re(mid)? < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn a_of(eta: f64) -> CouplingStrength {
        coupling_strength_two_level(eta).unwrap()
    }

    /// Independent atoms: `eps = 1 + n0 alpha` with the bare Lorentzian
    /// polarizability, normalised so that `Im eps = n0 * 6 pi / (1 + 4 delta^2)`.
    fn independent_atoms(eta: f64, delta: f64) -> C64 {
        C64::new(1.0, 0.0) - 3.0 * PI * eta / C64::new(delta, 0.5)
    }

    #[test]
    fn coupling_basics() {
        assert_eq!(a_of(0.0).value(), 0.0);
        assert!((a_of(0.2).value() - 2.0 * a_of(0.1).value()).abs() < 1e-15);
        let g = AngularMomentum::new(1.5).unwrap();
        let e = AngularMomentum::new(2.5).unwrap();
        let a = coupling_strength(0.1, g, e).unwrap().value();
        assert!((a - PI * 0.1 * 6.0 / 12.0).abs() < 1e-15);
        assert!(coupling_strength(-0.1, g, e).is_err());
    }

    #[test]
    fn vacuum_when_uncoupled() {
        for d in [-3.0, 0.0, 7.5] {
            let p = solve_permittivity(d, a_of(0.0)).unwrap();
            assert_eq!(p.epsilon, C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn general_path_reduces_to_vacuum_for_tiny_coupling() {
        let p = solve_permittivity(0.3, CouplingStrength::new(1e-14).unwrap()).unwrap();
        assert!((p.epsilon - 1.0).norm() < 1e-12);
    }

    #[test]
    fn far_off_resonance_is_transparent() {
        let a = a_of(0.5);
        for sign in [-1.0, 1.0] {
            let e1 = solve_permittivity(sign * 1e3, a).unwrap().epsilon;
            let e2 = solve_permittivity(sign * 2e3, a).unwrap().epsilon;
            assert!((e1 - 1.0).norm() < 1e-2);
            // O(1/delta): doubling delta halves the deviation.
            let ratio = (e1 - 1.0).norm() / (e2 - 1.0).norm();
            assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
        }
    }

    #[test]
    fn dilute_limit_matches_single_atom_extinction() {
        let eta = 1e-4;
        for d in [-3.0, -0.5, 0.0, 0.25, 2.0] {
            let eps = solve_permittivity(d, a_of(eta)).unwrap().epsilon;
            let sigma = single_atom_cross_section(d, AngularMomentum::ZERO, AngularMomentum::ONE);
            // k Im eps = n0 sigma with k = 1 / lambdabar
            assert!((eps.im - eta * sigma).abs() < 1e-2 * eta * sigma, "delta {d}");
            let reference = independent_atoms(eta, d);
            assert!((eps - reference).norm() < 500.0 * eta * eta);
        }
    }

    #[test]
    fn dilute_residual_scales_quadratically() {
        let d = 0.3;
        let etas: [f64; 4] = [1e-4, 2e-4, 5e-4, 1e-3];
        let xs: Vec<f64> = etas.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = etas
            .iter()
            .map(|&e| {
                (solve_permittivity(d, a_of(e)).unwrap().epsilon - independent_atoms(e, d))
                    .norm()
                    .ln()
            })
            .collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!(slope >= 1.9, "scaling exponent {slope}");
    }

    #[test]
    fn residual_and_passivity_on_grids() {
        for eta in [0.02, 0.09, 0.5, 2.0] {
            let grid: Vec<f64> = (0..=4000).map(|i| -20.0 + 0.01 * i as f64).collect();
            for p in permittivity_scan(&grid, a_of(eta)).unwrap() {
                assert!(p.residual < 1e-10);
                assert!(p.epsilon.im >= -1e-12, "eta {eta} delta {}: {}", p.delta, p.epsilon);
                assert!(p.index.im >= 0.0 && p.index.re >= 0.0);
                let principal = p.epsilon.sqrt();
                assert!((principal - p.index).norm() < 1e-8 * p.index.norm().max(1.0));
            }
        }
    }

    #[test]
    fn branch_is_continuous_on_fine_grid() {
        for eta in [0.07, 0.09, 0.5] {
            let grid: Vec<f64> = (0..=20000).map(|i| -10.0 + 1e-3 * i as f64).collect();
            let xs: Vec<C64> = permittivity_scan(&grid, a_of(eta))
                .unwrap()
                .iter()
                .map(|p| p.epsilon)
                .collect();
            let jumps: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            for i in 1..jumps.len() - 1 {
                let local = jumps[i - 1].max(jumps[i + 1]);
                assert!(
                    jumps[i] <= 10.0 * local + 1e-9,
                    "eta {eta}: jump {} at delta {} (neighbours {local})",
                    jumps[i],
                    grid[i]
                );
            }
        }
    }

    #[test]
    fn negative_window_regimes() {
        let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
        assert_eq!(negative_window(a_of(0.02), &grid).unwrap(), None);
        assert_eq!(negative_window(a_of(0.0), &grid).unwrap(), None);
        let (lo, hi) = negative_window(a_of(0.5), &grid).unwrap().unwrap();
        assert!(lo < hi);
        assert!(solve_permittivity(0.5 * (lo + hi), a_of(0.5)).unwrap().epsilon.re < 0.0);
        // edges refined to 1e-6
        assert!(solve_permittivity(lo - 1e-5, a_of(0.5)).unwrap().epsilon.re > 0.0);
        assert!(solve_permittivity(hi + 1e-5, a_of(0.5)).unwrap().epsilon.re > 0.0);
        // inside the window the permittivity is real (forbidden zone)
        let mid = solve_permittivity(1.0, a_of(0.5)).unwrap();
        assert_eq!(mid.branch, Branch::MiddleImaginary);
        assert_eq!(mid.epsilon.im, 0.0);
        assert!(negative_window(a_of(0.5), &grid[100..]).is_err());
    }

    #[test]
    fn critical_density_in_bracket() {
        let eta_c = critical_density(AngularMomentum::ZERO, AngularMomentum::ONE).unwrap();
        assert!((0.05..=0.13).contains(&eta_c), "{eta_c}");
        let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
        let below = min_real_permittivity(a_of(eta_c - 2e-3)).unwrap().1;
        assert!(below > 0.0);
        let width = |eta| {
            let (lo, hi) = negative_window(a_of(eta), &grid).unwrap().unwrap();
            hi - lo
        };
        assert!(width(0.5) > width(eta_c + 0.01));
    }
}
