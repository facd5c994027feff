//! Compensated summation and sample statistics whose results do not depend
//! on how the inputs were produced, only on their order.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = CompensatedSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// `None` for fewer than two samples.
    pub std: Option<f64>,
    pub stderr: Option<f64>,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let count = xs.len();
    if count == 0 {
        return Summary {
            count,
            mean: f64::NAN,
            std: None,
            stderr: None,
        };
    }
    let mean = compensated_sum(xs.iter().copied()) / count as f64;
    if count < 2 {
        return Summary {
            count,
            mean,
            std: None,
            stderr: None,
        };
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (count - 1) as f64;
    let std = var.sqrt();
    Summary {
        count,
        mean,
        std: Some(std),
        stderr: Some(std / (count as f64).sqrt()),
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxx = compensated_sum(x.iter().map(|v| (v - mx) * (v - mx)));
    if sxx == 0.0 {
        return None;
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn summary_basics() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s.stderr.unwrap() - s.std.unwrap() / 2.0).abs() < 1e-15);
        let one = summarize(&[7.0]);
        assert_eq!(one.mean, 7.0);
        assert_eq!(one.stderr, None);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.25 * v).collect();
        let (m, c) = linear_fit(&x, &y).unwrap();
        assert!((m + 0.25).abs() < 1e-14 && (c - 3.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    proptest! {
        #[test]
        fn mean_is_permutation_stable(mut xs in prop::collection::vec(-1e6f64..1e6, 2..50), seed in 0usize..1000) {
            let a = summarize(&xs).mean;
            let n = xs.len();
            xs.rotate_left(seed % n);
            let b = summarize(&xs).mean;
            prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0) * 4.0);
        }
    }
}
