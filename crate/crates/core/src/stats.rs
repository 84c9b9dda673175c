//! Order-stable reductions and Monte Carlo summaries.

use serde::Serialize;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<KahanSum>().total()
}

/// Sample mean with its standard error and a normal 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub ci95: (f64, f64),
}

impl MCEstimate {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientPaths { needed: 2, got: samples.len() });
        }
        let n = samples.len();
        let mean = compensated_sum(samples) / n as f64;
        let ss: KahanSum = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let sd = (ss.total() / (n - 1) as f64).sqrt();
        Ok(Self::new(mean, sd / (n as f64).sqrt(), n))
    }

    pub fn new(mean: f64, stderr: f64, n: usize) -> Self {
        Self { mean, stderr, n, ci95: (mean - 1.96 * stderr, mean + 1.96 * stderr) }
    }

    /// Studentized distance to `target`. A zero standard error gives zero
    /// when the mean hits the target exactly and infinity otherwise.
    pub fn z_against(&self, target: f64) -> f64 {
        studentize(self.mean - target, self.stderr)
    }
}

pub fn studentize(diff: f64, stderr: f64) -> f64 {
    if stderr > 0.0 {
        diff / stderr
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Sample variance together with its standard error, estimated from the
/// fourth central moment: Var(s²) ≈ (m4 − s⁴)/n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub variance: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn sample_variance(samples: &[f64]) -> Result<VarianceEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientPaths { needed: 2, got: n });
    }
    let mean = compensated_sum(samples) / n as f64;
    let m2: KahanSum = samples.iter().map(|x| (x - mean).powi(2)).collect();
    let m4: KahanSum = samples.iter().map(|x| (x - mean).powi(4)).collect();
    let variance = m2.total() / (n - 1) as f64;
    let fourth = m4.total() / n as f64;
    let stderr = ((fourth - variance * variance).max(0.0) / n as f64).sqrt();
    Ok(VarianceEstimate { variance, stderr, n })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
