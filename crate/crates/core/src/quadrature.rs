//! Gauss-Legendre nodes and a product rule on the unit sphere.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

/// Product rule: `n` Gauss nodes in `cos(theta)` times `2n` uniform nodes in `phi`.
/// Integrates spherical harmonics up to degree `2n - 1` exactly.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product(n: usize) -> Self {
        let (ct, wt) = gauss_legendre(n);
        let nphi = 2 * n;
        let dphi = 2.0 * PI / nphi as f64;
        let mut directions = Vec::with_capacity(n * nphi);
        let mut weights = Vec::with_capacity(n * nphi);
        for (&c, &w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for j in 0..nphi {
                let phi = (j as f64 + 0.5) * dphi;
                directions.push([s * phi.cos(), s * phi.sin(), c]);
                weights.push(w * dphi);
            }
        }
        SphereRule { directions, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
