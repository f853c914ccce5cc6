//! The product-normal family PN(n, σ²): law of σ X_1 ⋯ X_n with X_i i.i.d.
//! standard normal.
//!
//! Densities for n ≤ 4 come from closed forms (n ≤ 2) or one-dimensional
//! Mellin convolutions evaluated on a logarithmic scale (n = 3, 4). Everything
//! is computed for σ = 1 and rescaled.

use std::f64::consts::{PI, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::quad::{integrate, integrate_with_breaks, QuadResult, Tol};
use crate::rng::{self, Rng};
use crate::specfun::{bessel_k, bessel_k_scaled, k0_tail_integral};
use crate::stats::{MeanAcc, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PNParams {
    pub n: u32,
    pub sigma: f64,
}

impl PNParams {
    pub fn new(n: u32, sigma: f64) -> Result<PNParams> {
        if n == 0 {
            return Err(Error::Invalid("PN order must be ≥ 1".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Invalid(format!("PN scale must be positive and finite, got {sigma}")));
        }
        Ok(PNParams { n, sigma })
    }

    /// Build from per-factor scales; only their product is kept.
    pub fn from_factor_scales(scales: &[f64]) -> Result<PNParams> {
        PNParams::new(scales.len() as u32, scales.iter().product::<f64>().abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfEvalConfig {
    pub quad_tol: f64,
    pub singularity_floor: f64,
    pub max_order_quadrature: u32,
}

impl Default for PdfEvalConfig {
    fn default() -> Self {
        PdfEvalConfig { quad_tol: 1e-10, singularity_floor: 1e-8, max_order_quadrature: 4 }
    }
}

impl PdfEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.quad_tol > 0.0 && self.quad_tol <= 1e-4) {
            return Err(Error::Invalid(format!("quad_tol must lie in (0, 1e-4], got {}", self.quad_tol)));
        }
        if !(self.singularity_floor > 0.0) {
            return Err(Error::Invalid("singularity_floor must be positive".into()));
        }
        if self.max_order_quadrature > 4 {
            return Err(Error::Invalid("densities are implemented for n ≤ 4 only".into()));
        }
        Ok(())
    }

    fn tol(&self) -> Tol {
        Tol::new(1e-300, self.quad_tol)
    }
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn phi(t: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * t * t).exp()
}

// Standardized density of |u| for the closed-form orders; u > 0.
fn p2_std(u: f64) -> f64 {
    if u > 745.0 {
        return 0.0;
    }
    bessel_k(0, u).expect("positive argument") / PI
}

// Arguments beyond which each standardized density underflows.
fn support_edge(n: u32) -> f64 {
    match n {
        1 => 40.0,
        2 => 800.0,
        3 => 12_000.0,
        _ => 150_000.0,
    }
}

// Standardized density for n ∈ {1..4}, u > 0.
fn pdf_std(n: u32, u: f64, tol: Tol) -> Result<f64> {
    match n {
        1 => Ok(phi(u)),
        2 => Ok(p2_std(u)),
        3 => {
            // p3(u) = 2 ∫ p2(u e^{-s}) φ(e^s) ds
            let lo = (u / 800.0).ln();
            let hi = 40f64.ln();
            if lo >= hi {
                return Ok(0.0);
            }
            let g = |s: f64| 2.0 * p2_std(u * (-s).exp()) * phi(s.exp());
            integrate_with_breaks(g, lo, hi, &[u.ln(), 0.0], tol).into_result()
        }
        4 => {
            // p4(u) = 2 ∫ p2(u e^{-s}) p2(e^s) ds (product of two PN(2) factors)
            let lo = (u / 800.0).ln();
            let hi = 800f64.ln();
            if lo >= hi {
                return Ok(0.0);
            }
            let g = |s: f64| 2.0 * p2_std(u * (-s).exp()) * p2_std(s.exp());
            integrate_with_breaks(g, lo, hi, &[u.ln(), 0.5 * u.ln(), 0.0], tol).into_result()
        }
        _ => Err(Error::UnsupportedOrder(n)),
    }
}

fn check_quad_order(params: &PNParams, cfg: &PdfEvalConfig) -> Result<()> {
    cfg.validate()?;
    if params.n > cfg.max_order_quadrature {
        return Err(Error::UnsupportedOrder(params.n));
    }
    Ok(())
}

/// Density of PN(n, σ²) at x.
pub fn pdf(params: &PNParams, x: f64, cfg: &PdfEvalConfig) -> Result<f64> {
    check_quad_order(params, cfg)?;
    let u = x.abs() / params.sigma;
    if params.n == 1 {
        return Ok(phi(u) / params.sigma);
    }
    if u < cfg.singularity_floor {
        return Err(Error::Singularity { x, what: format!("PN({}) density diverges at the origin", params.n) });
    }
    Ok(pdf_std(params.n, u, cfg.tol())? / params.sigma)
}

/// Density with the full near-zero log expansion substituted below the floor.
pub fn pdf_regularized(params: &PNParams, x: f64, cfg: &PdfEvalConfig) -> Result<f64> {
    let u = x.abs() / params.sigma;
    if params.n >= 2 && u < cfg.singularity_floor {
        if u == 0.0 {
            return Ok(f64::INFINITY);
        }
        return Ok(near_zero_std(params.n, u) / params.sigma);
    }
    pdf(params, x, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    NearZero,
    Tail,
}

fn near_zero_coeff(n: u32) -> f64 {
    let fact: f64 = (1..n).map(|i| i as f64).product();
    2f64.powf(n as f64 / 2.0 - 1.0) / (PI.powf(n as f64 / 2.0) * fact)
}

fn near_zero_leading(n: u32, u: f64) -> f64 {
    near_zero_coeff(n) * (-u.ln()).powi(n as i32 - 1)
}

// ζ(2..=8)
const ZETA: [f64; 7] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_3,
    1.082_323_233_711_138_2,
    1.036_927_755_143_369_9,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_4,
];

/// c_0..c_{n-1} with p_std(u) = Σ c_j (−ln u)^j + O(u² (−ln u)^{n−1}).
///
/// E|Z|^{s−1} = (2/s)^n exp(n L(s)), L(s) = (s−1)/2 ln 2 − ½ ln π + ln Γ(1 + s/2),
/// and a term a_k s^{−k} of the Laurent series at 0 is the Mellin image of
/// a_k (−ln u)^{k−1}/(k−1)! on (0, 1). Exact for n ≤ 8; beyond that only the
/// leading term is kept.
fn near_zero_poly(n: u32) -> Vec<f64> {
    let nu = n as usize;
    if n > 8 {
        let mut c = vec![0.0; nu];
        c[nu - 1] = near_zero_coeff(n);
        return c;
    }
    // A(s) = n (L(s) − L(0)) as a power series, then exp(A) by the usual recurrence
    let mut a = vec![0.0; nu];
    for (k, slot) in a.iter_mut().enumerate().skip(1) {
        let lgamma = if k == 1 {
            -crate::specfun::EULER_GAMMA / 2.0
        } else {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * ZETA[k - 2] * 0.5f64.powi(k as i32) / k as f64
        };
        let ln2 = if k == 1 { 0.5 * std::f64::consts::LN_2 } else { 0.0 };
        *slot = n as f64 * (ln2 + lgamma);
    }
    let mut e = vec![0.0; nu];
    e[0] = 1.0;
    for k in 1..nu {
        e[k] = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum::<f64>() / k as f64;
    }
    let scale = 2f64.powi(n as i32) * (2.0 * PI).powf(-(n as f64) / 2.0);
    let mut fact = 1.0;
    (1..=nu)
        .map(|k| {
            if k > 1 {
                fact *= (k - 1) as f64;
            }
            scale * e[nu - k] / (2.0 * fact)
        })
        .collect()
}

fn near_zero_std(n: u32, u: f64) -> f64 {
    let l = -u.ln();
    near_zero_poly(n).iter().rev().fold(0.0, |acc, c| acc * l + c)
}

/// Leading-order density as |x| → 0 or |x| → ∞.
pub fn pdf_asymptotic(params: &PNParams, x: f64, regime: Regime) -> Result<f64> {
    let n = params.n;
    let u = x.abs() / params.sigma;
    match regime {
        Regime::NearZero => {
            if !(u > 0.0 && u < 0.05) {
                return Err(Error::Regime("near-zero (0 < |x|/σ < 0.05)".into()));
            }
            Ok(near_zero_leading(n, u) / params.sigma)
        }
        Regime::Tail => {
            let nf = n as f64;
            if n > 1 && u <= 3.0 * nf.powf(nf / 2.0) {
                return Err(Error::Regime(format!("tail (|x|/σ > {})", 3.0 * nf.powf(nf / 2.0))));
            }
            let v = 2f64.powf(nf / 2.0 - 1.0) / (PI * nf).sqrt()
                * u.powf(1.0 / nf - 1.0)
                * (-0.5 * nf * u.powf(2.0 / nf)).exp();
            Ok(v / params.sigma)
        }
    }
}

/// Density of |X|^n sgn(X) for X ~ N(0, σ²).
pub fn power_normal_pdf(n: u32, sigma: f64, x: f64) -> Result<f64> {
    PNParams::new(n, sigma)?;
    let u = x.abs() / sigma;
    if n >= 2 && u == 0.0 {
        return Err(Error::Singularity { x, what: "power-normal density diverges at the origin".into() });
    }
    let nf = n as f64;
    Ok(u.powf(1.0 / nf - 1.0) * (-0.5 * u.powf(2.0 / nf)).exp() / (nf * sigma * (2.0 * PI).sqrt()))
}

// P(|Z| > u) for standardized Z.
fn upper_tail_std(n: u32, u: f64, tol: Tol) -> Result<f64> {
    let two_over_pi = 2.0 / PI;
    match n {
        1 => Ok(libm::erfc(u / SQRT_2)),
        2 => Ok(two_over_pi * k0_tail_integral(u)?),
        3 => {
            // E P(|Z2| > u/|X|)
            let hi = 40f64.ln();
            let lo = (u / 800.0).ln().min(hi - 1.0);
            let g = |s: f64| {
                let t = s.exp();
                2.0 * phi(t) * t * two_over_pi * k0_tail_integral(u / t).unwrap_or(0.0)
            };
            integrate_with_breaks(g, lo, hi, &[u.ln(), 0.0], tol).into_result()
        }
        4 => {
            // E P(|Z2| > u/|Z2'|)
            let hi = 800f64.ln();
            let lo = (u / 800.0).ln().max(-60.0).min(hi - 1.0);
            let g = |s: f64| {
                let t = s.exp();
                two_over_pi * bessel_k(0, t).unwrap_or(0.0) * t * two_over_pi * k0_tail_integral(u / t).unwrap_or(0.0)
            };
            let body = integrate_with_breaks(g, lo, hi, &[u.ln(), 0.5 * u.ln(), 0.0], tol).into_result()?;
            // below e^{lo} the inner probability is 0 to double precision
            Ok(body)
        }
        _ => Err(Error::UnsupportedOrder(n)),
    }
}

/// Distribution function of PN(n, σ²).
pub fn cdf(params: &PNParams, x: f64, cfg: &PdfEvalConfig) -> Result<f64> {
    check_quad_order(params, cfg)?;
    if x == 0.0 {
        return Ok(0.5);
    }
    let u = x.abs() / params.sigma;
    let tail = 0.5 * upper_tail_std(params.n, u, cfg.tol())?;
    Ok(if x > 0.0 { 1.0 - tail } else { tail })
}

/// E Z^k for Z ~ PN(n, σ²).
pub fn moment(params: &PNParams, k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    let dfact: f64 = (1..k).step_by(2).map(|i| i as f64).product();
    params.sigma.powi(k as i32) * dfact.powi(params.n as i32)
}

/// One draw σ X_1 ⋯ X_n.
pub fn draw(params: &PNParams, rng: &mut Rng) -> f64 {
    let mut z = params.sigma;
    for _ in 0..params.n {
        z *= rng::std_normal(rng);
    }
    z
}

/// `count` draws; chunk k of par::CHUNK values comes from stream k of `seed`.
pub fn sample(params: &PNParams, seed: u64, count: usize) -> Vec<f64> {
    let chunks = par::chunks(count);
    let parts = par::map_indexed(chunks.len(), |i| {
        let (k, len) = chunks[i];
        let mut r = rng::stream(seed, k as u64);
        (0..len).map(|_| draw(params, &mut r)).collect::<Vec<f64>>()
    });
    parts.concat()
}

/// Monte Carlo mean of g(Z) over `draws` draws, reproducible for a seed.
pub fn mc_mean(params: &PNParams, seed: u64, draws: usize, g: impl Fn(f64) -> f64 + Sync) -> MeanAcc {
    let chunks = par::chunks(draws);
    let parts = par::map_indexed(chunks.len(), |i| {
        let (k, len) = chunks[i];
        let mut r = rng::stream(seed, k as u64);
        let mut acc = MeanAcc::new();
        for _ in 0..len {
            acc.push(g(draw(params, &mut r)));
        }
        acc
    });
    parts.iter().fold(MeanAcc::new(), |mut a, b| {
        a.merge(b);
        a
    })
}

fn check_cf_order(n: u32) -> Result<()> {
    if (1..=4).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder(n))
    }
}

fn cf3(s2: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let z = 1.0 / (4.0 * s2 * t * t);
    let k0e = if z < 1e-300 {
        -(0.5 * z).ln() - crate::specfun::EULER_GAMMA
    } else {
        bessel_k_scaled(0, z).expect("positive argument")
    };
    k0e / (2.0 * PI * s2 * t * t).sqrt()
}

/// Characteristic function of PN(n, σ²), n ≤ 4.
pub fn cf(params: &PNParams, t: f64) -> Result<f64> {
    check_cf_order(params.n)?;
    let s2 = params.sigma * params.sigma;
    match params.n {
        1 => Ok((-0.5 * s2 * t * t).exp()),
        2 => Ok(1.0 / (1.0 + s2 * t * t).sqrt()),
        3 => Ok(cf3(s2, t)),
        _ => {
            if t == 0.0 {
                return Ok(1.0);
            }
            // φ4(t) = E φ2(t Z2'), Z2' ~ PN(2, 1): (2/π) ∫ K0(y) / √(1 + σ²t²y²) dy
            let g = |s: f64| {
                let y = s.exp();
                2.0 / PI * bessel_k(0, y).unwrap_or(0.0) * y / (1.0 + s2 * t * t * y * y).sqrt()
            };
            integrate_with_breaks(g, -60.0, 800f64.ln(), &[0.0], Tol::new(1e-300, 1e-12)).into_result()
        }
    }
}

// 8th-order central differences
const D1: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2: [f64; 4] = [8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];
const D2_CENTER: f64 = -205.0 / 72.0;

fn fd1(f: &impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    (1..=4).map(|j| D1[j - 1] * (f(t + j as f64 * h) - f(t - j as f64 * h))).sum::<f64>() / h
}

fn fd2(f: &impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
    let s: f64 = (1..=4).map(|j| D2[j - 1] * (f(t + j as f64 * h) + f(t - j as f64 * h))).sum();
    (s + D2_CENTER * f(t)) / (h * h)
}

/// σ² t (t d/dt + 1)^{n-1} φ_n(t) + φ_n'(t), derivatives by finite differences.
pub fn cf_ode_residual(params: &PNParams, t: f64) -> Result<f64> {
    if !(1..=3).contains(&params.n) {
        return Err(Error::UnsupportedOrder(params.n));
    }
    if t == 0.0 {
        return Err(Error::Invalid("ODE residual needs t ≠ 0".into()));
    }
    let s2 = params.sigma * params.sigma;
    let f = |s: f64| cf(params, s).expect("order checked");
    let h = 1e-3 * t.abs();
    let p = f(t);
    let d1 = fd1(&f, t, h);
    let inner = match params.n {
        1 => p,
        2 => t * d1 + p,
        _ => t * t * fd2(&f, t, h) + 3.0 * t * d1 + p,
    };
    Ok(s2 * t * inner + d1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpectMethod {
    Quadrature,
    MonteCarlo { seed: u64, draws: usize },
    /// Quadrature for n ≤ 2, Monte Carlo with 10⁶ draws otherwise.
    Auto { seed: u64 },
}

pub const DEFAULT_MC_DRAWS: usize = 1_000_000;

// Below this standardized |x| the quadrature is replaced by the near-zero
// asymptotic mass times h(0).
const EXPECT_CORE: f64 = 1e-30;

// ∫_0^ε (-log u)^k du
fn log_power_integral(k: u32, eps: f64) -> f64 {
    let l = -eps.ln();
    let mut sum = 0.0;
    let mut term = 1.0; // k!/j! L^j for j = k
    for j in (0..=k).rev() {
        if j < k {
            term *= (j + 1) as f64 / l;
        }
        sum += term;
    }
    eps * sum * l.powi(k as i32)
}

/// E h(Z) for Z ~ PN(n, σ²).
pub fn expectation(params: &PNParams, h: impl Fn(f64) -> f64 + Sync, method: ExpectMethod, cfg: &PdfEvalConfig) -> Result<MeanSe> {
    let method = match method {
        ExpectMethod::Auto { seed } => {
            if params.n <= 2 {
                ExpectMethod::Quadrature
            } else {
                ExpectMethod::MonteCarlo { seed, draws: DEFAULT_MC_DRAWS }
            }
        }
        m => m,
    };
    match method {
        ExpectMethod::MonteCarlo { seed, draws } => Ok(mc_mean(params, seed, draws, h).mean_se()),
        ExpectMethod::Quadrature => {
            check_quad_order(params, cfg)?;
            let n = params.n;
            let sigma = params.sigma;
            let tol = cfg.tol();
            // x = σ e^s folds both signs: ∫ (h(x) + h(-x)) p(x) dx over x > 0
            let g = |s: f64| {
                let u = s.exp();
                let x = sigma * u;
                let p = pdf_std(n, u, tol).unwrap_or(f64::NAN);
                (h(x) + h(-x)) * p * u
            };
            let hi = support_edge(n).ln();
            let lo = EXPECT_CORE.ln();
            let body: QuadResult = if n == 1 {
                integrate(|x| (h(sigma * x) + h(-sigma * x)) * phi(x), 0.0, support_edge(1), tol)
            } else {
                integrate_with_breaks(g, lo, hi, &[-5.0, 0.0, 2.0], tol)
            };
            let core = if n == 1 {
                0.0
            } else {
                let mass: f64 =
                    near_zero_poly(n).iter().enumerate().map(|(j, c)| c * log_power_integral(j as u32, EXPECT_CORE)).sum();
                2.0 * h(0.0) * mass
            };
            let v = body.into_result()?;
            Ok(MeanSe { mean: v + core, se: body.error })
        }
        ExpectMethod::Auto { .. } => unreachable!(),
    }
}
