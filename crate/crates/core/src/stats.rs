//! Accumulators and goodness-of-fit helpers for the Monte Carlo suites.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn merge(&mut self, other: &KahanSum) {
        self.add(other.sum);
        self.add(-other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum - self.comp
    }
}

/// Estimate with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// |mean - target| ≤ k·SE, with a tiny absolute floor for exact estimators.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + 1e-12 * target.abs().max(1.0)
    }
}

/// Running mean and variance from compensated power sums.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAcc {
    pub n: u64,
    s1: KahanSum,
    s2: KahanSum,
}

impl MeanAcc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.s1.add(x);
        self.s2.add(x * x);
    }

    pub fn merge(&mut self, o: &MeanAcc) {
        self.n += o.n;
        self.s1.merge(&o.s1);
        self.s2.merge(&o.s2);
    }

    pub fn mean(&self) -> f64 {
        self.s1.value() / self.n as f64
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.mean();
        ((self.s2.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn mean_se(&self) -> MeanSe {
        MeanSe { mean: self.mean(), se: (self.variance() / self.n as f64).sqrt() }
    }
}

/// Regression through the origin y ≈ b·x with a heteroskedasticity-robust
/// standard error.
#[derive(Debug, Clone, Copy, Default)]
pub struct OriginRegAcc {
    pub n: u64,
    xx: KahanSum,
    xy: KahanSum,
    x4: KahanSum,
    x3y: KahanSum,
    x2y2: KahanSum,
}

impl OriginRegAcc {
    pub fn push(&mut self, x: f64, y: f64) {
        let x2 = x * x;
        self.n += 1;
        self.xx.add(x2);
        self.xy.add(x * y);
        self.x4.add(x2 * x2);
        self.x3y.add(x2 * x * y);
        self.x2y2.add(x2 * y * y);
    }

    pub fn merge(&mut self, o: &OriginRegAcc) {
        self.n += o.n;
        self.xx.merge(&o.xx);
        self.xy.merge(&o.xy);
        self.x4.merge(&o.x4);
        self.x3y.merge(&o.x3y);
        self.x2y2.merge(&o.x2y2);
    }

    pub fn coefficient(&self) -> MeanSe {
        let sxx = self.xx.value();
        let b = self.xy.value() / sxx;
        // Σ x² (y - b x)²
        let meat = (self.x2y2.value() - 2.0 * b * self.x3y.value() + b * b * self.x4.value()).max(0.0);
        MeanSe { mean: b, se: meat.sqrt() / sxx }
    }

    /// Mean of x², the second moment of the regressor.
    pub fn mean_xx(&self) -> f64 {
        self.xx.value() / self.n as f64
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov–Smirnov statistic; sorts `xs` in place.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((hi - f).abs()).max((f - lo).abs());
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic; sorts both slices.
pub fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn kolmogorov_quantile(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// Critical value of the one-sample KS statistic at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_quantile(alpha) / (rn + 0.12 + 0.11 / rn)
}

pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    kolmogorov_quantile(alpha) * ((n + m) / (n * m)).sqrt()
}

/// Pearson chi-square statistic against equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Upper 1% point of the chi-square law with `df` degrees of freedom.
pub fn chi2_critical_99(df: usize) -> f64 {
    const TABLE: [f64; 10] = [6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209];
    if (1..=10).contains(&df) {
        return TABLE[df - 1];
    }
    // Wilson–Hilferty
    let k = df as f64;
    let z = 2.326_347_874_040_841;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

/// Ordinary least squares y ≈ a + b x; returns (b, a).
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Invalid("ols needs two or more paired points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("ols needs distinct x values".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Ok((b, my - b * mx))
}
