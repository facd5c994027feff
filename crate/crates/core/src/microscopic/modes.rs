use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::Mat;
use serde::{Deserialize, Serialize};

use super::hamiltonian::EffectiveHamiltonian;
use crate::error::{Error, Result};
use crate::C64;

/// Collective eigenmodes `M v_n = lambda_n v_n`, sorted by increasing width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns, unit 2-norm, column-major.
    vectors: Vec<C64>,
    /// `max |V^{-1} V - I|` with `V^{-1}` from an LU factorization.
    biorthogonality_residual: f64,
}

impl ModeSet {
    pub(crate) fn from_parts(eigenvalues: Vec<C64>, vectors: Vec<C64>, biorthogonality_residual: f64) -> Self {
        ModeSet {
            eigenvalues,
            vectors,
            biorthogonality_residual,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    /// Shifts `Re lambda_n` in gamma.
    pub fn shifts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.re).collect()
    }

    /// Widths `Gamma_n = -2 Im lambda_n` in gamma.
    pub fn widths(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| -2.0 * l.im).collect()
    }

    pub fn vectors(&self) -> faer::MatRef<'_, C64> {
        faer::MatRef::from_column_major_slice(&self.vectors, self.dim(), self.dim())
    }

    pub(crate) fn raw_vectors(&self) -> &[C64] {
        &self.vectors
    }

    pub fn biorthogonality_residual(&self) -> f64 {
        self.biorthogonality_residual
    }

    /// Fraction of modes with `Gamma_n < threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        self.widths().iter().filter(|&&g| g < threshold).count() as f64 / self.dim() as f64
    }
}

fn dump_matrix(h: &EffectiveHamiltonian) -> String {
    let path = std::env::temp_dir().join(format!("coldscatter-failed-matrix-{}.txt", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        let m = h.matrix();
        writeln!(f, "{} {}", m.nrows(), m.ncols())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                writeln!(f, "{i} {j} {:.17e} {:.17e}", m[(i, j)].re, m[(i, j)].im)?;
            }
        }
        Ok(())
    };
    match write() {
        Ok(()) => path.display().to_string(),
        Err(e) => format!("<could not write matrix dump: {e}>"),
    }
}

/// Full dense non-Hermitian eigendecomposition.
pub fn eigenmodes(h: &EffectiveHamiltonian) -> Result<ModeSet> {
    let n = h.dim();
    if n == 0 {
        return Ok(ModeSet::from_parts(Vec::new(), Vec::new(), 0.0));
    }
    let evd = h.matrix().eigen().map_err(|e| Error::Eigen {
        detail: format!("{e:?}; matrix written to {}", dump_matrix(h)),
    })?;
    let s = evd.S();
    let u = evd.U();
    let lambda: Vec<C64> = (0..n).map(|k| s[k]).collect();
    if lambda.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::Eigen {
            detail: format!("non-finite eigenvalue; matrix written to {}", dump_matrix(h)),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (-lambda[a].im)
            .total_cmp(&-lambda[b].im)
            .then(lambda[a].re.total_cmp(&lambda[b].re))
            .then(a.cmp(&b))
    });
    let mut vectors = Vec::with_capacity(n * n);
    for &k in &order {
        let col = u.col(k);
        let norm = (0..n).map(|i| col[i].norm_sqr()).sum::<f64>().sqrt();
        vectors.extend((0..n).map(|i| col[i] / norm));
    }
    let eigenvalues: Vec<C64> = order.iter().map(|&k| lambda[k]).collect();

    let v = faer::MatRef::from_column_major_slice(&vectors, n, n);
    let inv = v.partial_piv_lu().solve(Mat::<C64>::identity(n, n));
    let prod = &inv * v;
    let mut residual = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            residual = residual.max((prod[(i, j)] - target).norm());
        }
    }
    if !residual.is_finite() {
        residual = f64::INFINITY;
    }
    Ok(ModeSet::from_parts(eigenvalues, vectors, residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microscopic::{build_effective_hamiltonian, AtomicConfiguration};

    #[test]
    fn single_atom_modes() {
        let c = AtomicConfiguration::from_positions(vec![[0.0, 0.0, 0.0]], 1.0).unwrap();
        let m = eigenmodes(&build_effective_hamiltonian(&c).unwrap()).unwrap();
        assert_eq!(m.dim(), 3);
        for l in m.eigenvalues() {
            assert!((l - C64::new(0.0, -0.5)).norm() < 1e-15);
        }
        assert!(m.biorthogonality_residual() < 1e-14);
    }

    #[test]
    fn reconstructs_matrix_action() {
        let c = AtomicConfiguration::from_positions(
            vec![[0.0, 0.0, 0.0], [0.4, 0.1, 0.0], [-0.2, 0.5, 0.3], [0.1, -0.6, 0.2]],
            1.0,
        )
        .unwrap();
        let h = build_effective_hamiltonian(&c).unwrap();
        let m = eigenmodes(&h).unwrap();
        let v = m.vectors();
        let mv = h.matrix() * v;
        for k in 0..m.dim() {
            for i in 0..m.dim() {
                assert!((mv[(i, k)] - v[(i, k)] * m.eigenvalues()[k]).norm() < 1e-12);
            }
        }
        let w = m.widths();
        assert!(w.windows(2).all(|p| p[0] <= p[1]));
        assert!(w[0] > 0.0);
    }
}
