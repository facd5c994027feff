use faer::Mat;

use super::config::{distance, AtomicConfiguration};
use crate::error::{Error, Result};
use crate::C64;

/// Human-readable record of the sign and normalisation conventions of `M`.
pub const KERNEL_CONVENTION: &str = "M[i,i] = -i/2 I; M[i,j] = -(3/4) e^{ix} [(I - rr)/x + (I - 3rr)(i/x^2 - 1/x^3)], \
x = |r_i - r_j| / lambdabar; resolvent (delta - M)^{-1}; Cartesian dipole basis; rates in gamma";

/// Matrix part `M` of the inverse projected resolvent, `3N x 3N`, complex
/// symmetric. Row/column `3 i + mu` is atom `i`, Cartesian component `mu`.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    matrix: Mat<C64>,
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.dim() / 3
    }

    pub fn matrix(&self) -> faer::MatRef<'_, C64> {
        self.matrix.as_ref()
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|k| self.matrix[(k, k)]).sum()
    }

    /// `-2 Im M`: the (real symmetric, positive semidefinite) decay matrix.
    pub fn decay_matrix(&self) -> Mat<f64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| -2.0 * self.matrix[(i, j)].im)
    }
}

/// Errors with [`Error::ResourceCap`] when `3N` exceeds `max_dim`.
pub fn check_dimension(n_atoms: usize, max_dim: usize) -> Result<()> {
    let requested = 3 * n_atoms;
    if requested > max_dim {
        return Err(Error::ResourceCap {
            requested,
            limit: max_dim,
        });
    }
    Ok(())
}

/// 3x3 coupling block between two atoms separated by `d` (in `lambdabar`).
pub(crate) fn kernel_block(d: [f64; 3]) -> [[C64; 3]; 3] {
    let x = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let r = [d[0] / x, d[1] / x, d[2] / x];
    let phase = C64::from_polar(1.0, x) * -0.75;
    let near = C64::new(-1.0 / (x * x * x), 1.0 / (x * x));
    let mut block = [[C64::new(0.0, 0.0); 3]; 3];
    for mu in 0..3 {
        for nu in 0..3 {
            let id = if mu == nu { 1.0 } else { 0.0 };
            let rr = r[mu] * r[nu];
            block[mu][nu] = phase * ((id - rr) / x + near * (id - 3.0 * rr));
        }
    }
    block
}

/// Builds `M` for one configuration. Atoms closer than `1e-10 lambdabar`
/// are rejected as coincident.
pub fn build_effective_hamiltonian(config: &AtomicConfiguration) -> Result<EffectiveHamiltonian> {
    let pos = config.positions();
    let n = pos.len();
    let mut m = Mat::<C64>::zeros(3 * n, 3 * n);
    for i in 0..n {
        for mu in 0..3 {
            m[(3 * i + mu, 3 * i + mu)] = C64::new(0.0, -0.5);
        }
        for j in i + 1..n {
            let dist = distance(&pos[i], &pos[j]);
            if !(dist > 1e-10) {
                return Err(Error::CoincidentAtoms { i, j, distance: dist });
            }
            let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1], pos[i][2] - pos[j][2]];
            let block = kernel_block(d);
            for mu in 0..3 {
                for nu in 0..3 {
                    m[(3 * i + mu, 3 * j + nu)] = block[mu][nu];
                    m[(3 * j + nu, 3 * i + mu)] = block[mu][nu];
                }
            }
        }
    }
    Ok(EffectiveHamiltonian { matrix: m })
}
