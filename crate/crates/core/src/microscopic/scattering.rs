use std::f64::consts::PI;
use std::sync::OnceLock;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use super::config::AtomicConfiguration;
use super::hamiltonian::EffectiveHamiltonian;
use crate::error::{Error, Result};
use crate::quadrature::SphereRule;
use crate::C64;

const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
const QUADRATURE_TOL: f64 = 1e-6;
const QUADRATURE_STEP: usize = 6;
const QUADRATURE_LEVELS: usize = 16;

/// A photon mode: unit propagation direction and unit transverse polarization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarized {
    direction: [f64; 3],
    polarization: [C64; 3],
}

impl Polarized {
    pub fn new(direction: [f64; 3], polarization: [C64; 3]) -> Result<Self> {
        let dn = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        let en = polarization.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let dot: C64 = (0..3).map(|k| polarization[k] * direction[k]).sum();
        if (dn - 1.0).abs() > 1e-12 || (en - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "photon mode",
                "direction and polarization must be unit vectors",
            ));
        }
        if dot.norm() > 1e-12 {
            return Err(Error::invalid(
                "photon mode",
                "polarization must be transverse to the direction",
            ));
        }
        Ok(Polarized {
            direction,
            polarization,
        })
    }

    /// Real linear polarization.
    pub fn linear(direction: [f64; 3], polarization: [f64; 3]) -> Result<Self> {
        Self::new(direction, polarization.map(|c| C64::new(c, 0.0)))
    }

    pub fn direction(&self) -> [f64; 3] {
        self.direction
    }

    pub fn polarization(&self) -> [C64; 3] {
        self.polarization
    }

    /// The two real linear polarizations transverse to `direction`.
    pub fn transverse_pair(direction: [f64; 3]) -> Result<[Polarized; 2]> {
        let n = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(Error::invalid("direction", "must be nonzero"));
        }
        let d = direction.map(|c| c / n);
        // pick the axis least aligned with d
        let axis = if d[0].abs() <= d[1].abs() && d[0].abs() <= d[2].abs() {
            [1.0, 0.0, 0.0]
        } else if d[1].abs() <= d[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        let e1 = normalize(cross(d, axis));
        let e2 = cross(d, e1);
        Ok([Polarized::linear(d, e1)?, Polarized::linear(d, normalize(e2))?])
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    a.map(|c| c / n)
}

fn dot(a: [f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Plane-wave source `e e^{i k.r_i}` on the `3N` dipole space.
fn source(config: &AtomicConfiguration, mode: &Polarized) -> Vec<C64> {
    let mut b = Vec::with_capacity(3 * config.n_atoms());
    for r in config.positions() {
        let phase = C64::from_polar(1.0, dot(mode.direction, r));
        b.extend(mode.polarization.iter().map(|e| e * phase));
    }
    b
}

/// Solves `(delta - M) X = B` column by column with one LU factorization and
/// checks the relative residual.
fn solve_resolvent(h: &EffectiveHamiltonian, delta: f64, rhs: &Mat<C64>) -> Result<Mat<C64>> {
    let n = h.dim();
    let m = h.matrix();
    let a = Mat::<C64>::from_fn(n, n, |i, j| {
        let d = if i == j {
            C64::new(delta, 0.0)
        } else {
            C64::new(0.0, 0.0)
        };
        d - m[(i, j)]
    });
    let x = a.partial_piv_lu().solve(rhs);
    let r = &a * &x - rhs;
    for j in 0..rhs.ncols() {
        let rn: f64 = (0..n).map(|i| r[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        let bn: f64 = (0..n).map(|i| rhs[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if !(rn <= SOLVE_RESIDUAL_TOL * bn.max(f64::MIN_POSITIVE)) {
            return Err(Error::NearSingular { delta });
        }
    }
    Ok(x)
}

fn amplitude_from_solution(config: &AtomicConfiguration, x: &[C64], outgoing: &Polarized) -> C64 {
    let mut f = C64::new(0.0, 0.0);
    for (i, r) in config.positions().iter().enumerate() {
        let phase = C64::from_polar(1.0, -dot(outgoing.direction, r));
        let proj: C64 = (0..3).map(|mu| outgoing.polarization[mu].conj() * x[3 * i + mu]).sum();
        f += phase * proj;
    }
    f * -0.75
}

/// Scattering amplitude `f(k_in, e -> k_out, e')` in `lambdabar`.
pub fn scattering_amplitude(
    h: &EffectiveHamiltonian,
    config: &AtomicConfiguration,
    delta: f64,
    incoming: &Polarized,
    outgoing: &Polarized,
) -> Result<C64> {
    check_pair(h, config)?;
    if config.n_atoms() == 0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let b = source(config, incoming);
    let rhs = Mat::<C64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = solve_resolvent(h, delta, &rhs)?;
    let x: Vec<C64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    Ok(amplitude_from_solution(config, &x, outgoing))
}

fn check_pair(h: &EffectiveHamiltonian, config: &AtomicConfiguration) -> Result<()> {
    if h.n_atoms() != config.n_atoms() {
        return Err(Error::invalid(
            "configuration",
            format!("{} atoms but the matrix has dimension {}", config.n_atoms(), h.dim()),
        ));
    }
    Ok(())
}

struct FarFieldLevel {
    rule: SphereRule,
    /// `e^{-i k_hat . r_i}`, nodes x atoms.
    phases: Mat<C64>,
}

/// Total cross sections of one configuration over many detunings.
///
/// Far-field phase matrices for each quadrature level are built once and
/// shared by all detunings.
pub struct CrossSectionSolver<'a> {
    h: &'a EffectiveHamiltonian,
    config: &'a AtomicConfiguration,
    base_order: usize,
    levels: Vec<OnceLock<FarFieldLevel>>,
}

impl<'a> CrossSectionSolver<'a> {
    pub fn new(h: &'a EffectiveHamiltonian, config: &'a AtomicConfiguration) -> Result<Self> {
        check_pair(h, config)?;
        // the integrand is band-limited to degree ~ 2 * extent
        let base_order = config.extent().ceil() as usize + 6;
        Ok(CrossSectionSolver {
            h,
            config,
            base_order,
            levels: (0..QUADRATURE_LEVELS).map(|_| OnceLock::new()).collect(),
        })
    }

    fn level(&self, k: usize) -> &FarFieldLevel {
        self.levels[k].get_or_init(|| {
            let rule = SphereRule::product(self.base_order + k * QUADRATURE_STEP);
            let pos = self.config.positions();
            let phases = Mat::<C64>::from_fn(rule.len(), pos.len(), |q, i| {
                C64::from_polar(1.0, -dot(rule.directions[q], &pos[i]))
            });
            FarFieldLevel { rule, phases }
        })
    }

    /// `X` for the two polarizations transverse to `direction`, `3N x 2`.
    fn excitations(&self, delta: f64, direction: [f64; 3]) -> Result<(Mat<C64>, [Polarized; 2])> {
        let modes = Polarized::transverse_pair(direction)?;
        let b: Vec<Vec<C64>> = modes.iter().map(|m| source(self.config, m)).collect();
        let rhs = Mat::<C64>::from_fn(3 * self.config.n_atoms(), 2, |i, j| b[j][i]);
        Ok((solve_resolvent(self.h, delta, &rhs)?, modes))
    }

    fn integrate(&self, level: &FarFieldLevel, x: &Mat<C64>) -> f64 {
        let n = self.config.n_atoms();
        let p = x.ncols();
        // rows: atoms, columns: (polarization, component)
        let xc = Mat::<C64>::from_fn(n, 3 * p, |i, c| x[(3 * i + c % 3, c / 3)]);
        let far = &level.phases * &xc;
        let mut total = 0.0;
        for (q, (dir, w)) in level.rule.directions.iter().zip(&level.rule.weights).enumerate() {
            let mut s = 0.0;
            for pol in 0..p {
                let f = [far[(q, 3 * pol)], far[(q, 3 * pol + 1)], far[(q, 3 * pol + 2)]];
                let long = f[0] * dir[0] + f[1] * dir[1] + f[2] * dir[2];
                s += f.iter().map(|c| c.norm_sqr()).sum::<f64>() - long.norm_sqr();
            }
            total += w * s;
        }
        total * 9.0 / 16.0 / p as f64
    }

    fn quadrature_from(&self, delta: f64, x: &Mat<C64>) -> Result<f64> {
        let mut prev = self.integrate(self.level(0), x);
        for k in 1..QUADRATURE_LEVELS {
            let q = self.integrate(self.level(k), x);
            if (q - prev).abs() <= QUADRATURE_TOL * q.abs() {
                return Ok(q);
            }
            prev = q;
        }
        Err(Error::NonConvergence {
            what: "angular quadrature of the scattered intensity",
            detail: format!(
                "delta = {delta}: relative change above {QUADRATURE_TOL} at order {}",
                self.base_order + (QUADRATURE_LEVELS - 1) * QUADRATURE_STEP
            ),
        })
    }

    /// Integrated scattered power for incidence along `direction`, averaged
    /// over the two incoming polarizations.
    pub fn quadrature_along(&self, delta: f64, direction: [f64; 3]) -> Result<f64> {
        if self.config.n_atoms() == 0 {
            return Ok(0.0);
        }
        let (x, _) = self.excitations(delta, direction)?;
        self.quadrature_from(delta, &x)
    }

    /// Quadrature route, incidence along `+z`.
    pub fn quadrature(&self, delta: f64) -> Result<f64> {
        self.quadrature_along(delta, [0.0, 0.0, 1.0])
    }

    /// `4 pi Im f(forward, e' = e)` averaged over the incoming polarizations.
    pub fn optical_theorem(&self, delta: f64) -> Result<f64> {
        Ok(self.both(delta)?.1)
    }

    /// Quadrature and optical-theorem values from a single linear solve.
    pub fn both(&self, delta: f64) -> Result<(f64, f64)> {
        if self.config.n_atoms() == 0 {
            return Ok((0.0, 0.0));
        }
        let direction = [0.0, 0.0, 1.0];
        let (x, modes) = self.excitations(delta, direction)?;
        let quad = self.quadrature_from(delta, &x)?;
        let mut forward = 0.0;
        for (p, mode) in modes.iter().enumerate() {
            let col: Vec<C64> = (0..x.nrows()).map(|i| x[(i, p)]).collect();
            forward += 4.0 * PI * amplitude_from_solution(self.config, &col, mode).im;
        }
        Ok((quad, forward / 2.0))
    }
}

/// Total cross section by angular integration of `sum_e' |f|^2`, incidence
/// along `+z`, averaged over the incoming polarizations.
pub fn total_cross_section(h: &EffectiveHamiltonian, config: &AtomicConfiguration, delta: f64) -> Result<f64> {
    CrossSectionSolver::new(h, config)?.quadrature(delta)
}

/// As [`total_cross_section`] for an arbitrary incidence direction.
pub fn total_cross_section_along(
    h: &EffectiveHamiltonian,
    config: &AtomicConfiguration,
    delta: f64,
    direction: [f64; 3],
) -> Result<f64> {
    CrossSectionSolver::new(h, config)?.quadrature_along(delta, direction)
}

/// Total cross section from the forward amplitude (optical theorem).
pub fn optical_theorem_cross_section(
    h: &EffectiveHamiltonian,
    config: &AtomicConfiguration,
    delta: f64,
) -> Result<f64> {
    CrossSectionSolver::new(h, config)?.optical_theorem(delta)
}

/// Quadrature cross sections of one configuration on a detuning grid.
pub fn microscopic_spectrum(
    h: &EffectiveHamiltonian,
    config: &AtomicConfiguration,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    let solver = CrossSectionSolver::new(h, config)?;
    deltas.par_iter().map(|&d| solver.quadrature(d)).collect()
}
