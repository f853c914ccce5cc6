//! The operator T f = x f', the Stein operator A_n = x^{-1} T^n, its right
//! inverse G_n f(x) = x E f(x V_n), and the characterization residual
//! E[σ² A_n f(Z) - Z f(Z)].
//!
//! Polynomials are handled exactly; general functions go through the Stirling
//! form Σ_k {n,k} x^{k-1} f^{(k)}(x) with caller-supplied derivatives.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prodnormal::{self, PNParams};
use crate::quad::{integrate_to_inf, Tol};
use crate::rng;
use crate::specfun::stirling2;
use crate::stats::{MeanAcc, MeanSe};

pub const MAX_DEGREE: usize = 64;

/// Real polynomial Σ c_k x^k with trailing zeros stripped.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Poly> {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::Invalid(format!("polynomial degree {} exceeds {MAX_DEGREE}", coeffs.len() - 1)));
        }
        Ok(Poly { coeffs })
    }

    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn monomial(k: usize) -> Result<Poly> {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Poly::new(c)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree, with the zero polynomial reported as None.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        let c = self.coeffs.iter().enumerate().skip(1).map(|(k, &c)| k as f64 * c).collect();
        Poly::new(c).expect("degree only drops")
    }

    pub fn nth_derivative(&self, k: usize) -> Poly {
        (0..k).fold(self.clone(), |p, _| p.derivative())
    }

    fn shift_up(&self, by: usize) -> Result<Poly> {
        if self.coeffs.is_empty() {
            return Ok(Poly::zero());
        }
        let mut c = vec![0.0; by];
        c.extend_from_slice(&self.coeffs);
        Poly::new(c)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n).map(|k| self.coeff(k) + other.coeff(k)).collect();
        Poly::new(c).expect("degree does not grow")
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let c = (0..n).map(|k| self.coeff(k) - other.coeff(k)).collect();
        Poly::new(c).expect("degree does not grow")
    }

    /// Largest coefficient difference.
    pub fn max_coeff_diff(&self, other: &Poly) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n).map(|k| (self.coeff(k) - other.coeff(k)).abs()).fold(0.0, f64::max)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}x")?,
                _ => write!(f, "{c}x^{k}")?,
            }
        }
        Ok(())
    }
}

/// T p = x p'.
pub fn apply_t(p: &Poly) -> Poly {
    let c = p.coeffs.iter().enumerate().map(|(k, &c)| k as f64 * c).collect();
    Poly::new(c).expect("degree does not grow")
}

/// A_n p = x^{-1} T^n p, i.e. x^k ↦ k^n x^{k-1}.
pub fn apply_an(p: &Poly, n: u32) -> Poly {
    let c = p.coeffs.iter().enumerate().skip(1).map(|(k, &c)| (k as f64).powi(n as i32) * c).collect();
    Poly::new(c).expect("degree only drops")
}

/// A_n p through the Stirling expansion Σ_{k=1}^n {n,k} x^{k-1} p^{(k)}.
pub fn apply_an_stirling(p: &Poly, n: u32) -> Result<Poly> {
    let mut acc = Poly::zero();
    for k in 1..=n {
        let s = stirling2(n, k)? as f64;
        let d = p.nth_derivative(k as usize);
        let scaled = Poly::new(d.coeffs.iter().map(|c| c * s).collect())?;
        acc = acc.add(&scaled.shift_up(k as usize - 1)?);
    }
    Ok(acc)
}

/// G_n p = x E p(x V_n), i.e. x^k ↦ x^{k+1} / (k+1)^n.
pub fn apply_gn_poly(p: &Poly, n: u32) -> Result<Poly> {
    let scaled: Vec<f64> =
        p.coeffs.iter().enumerate().map(|(k, &c)| c / ((k + 1) as f64).powi(n as i32)).collect();
    Poly::new(scaled)?.shift_up(1)
}

type DerivFn = dyn Fn(f64, u32) -> f64 + Send + Sync;

/// A scalar function with derivatives up to a declared order.
#[derive(Clone)]
pub struct FnWithDerivs {
    eval: Arc<DerivFn>,
    pub order: u32,
}

impl fmt::Debug for FnWithDerivs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnWithDerivs {{ order: {} }}", self.order)
    }
}

impl FnWithDerivs {
    /// `eval(x, k)` must return the k-th derivative for k ≤ order.
    pub fn new(order: u32, eval: impl Fn(f64, u32) -> f64 + Send + Sync + 'static) -> Self {
        FnWithDerivs { eval: Arc::new(eval), order }
    }

    pub fn from_poly(p: &Poly) -> Self {
        let derivs: Vec<Poly> = (0..=MAX_DEGREE + 1).scan(p.clone(), |q, _| {
            let cur = q.clone();
            *q = q.derivative();
            Some(cur)
        })
        .collect();
        FnWithDerivs::new(MAX_DEGREE as u32 + 1, move |x, k| derivs[k as usize].eval(x))
    }

    pub fn exp() -> Self {
        FnWithDerivs::new(u32::MAX, |x, _| x.exp())
    }

    pub fn sin() -> Self {
        FnWithDerivs::new(u32::MAX, |x, k| match k % 4 {
            0 => x.sin(),
            1 => x.cos(),
            2 => -x.sin(),
            _ => -x.cos(),
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.eval)(x, 0)
    }

    pub fn deriv(&self, k: u32, x: f64) -> Result<f64> {
        if k > self.order {
            return Err(Error::Invalid(format!("derivative {k} requested, only {} declared", self.order)));
        }
        Ok((self.eval)(x, k))
    }

    /// Check declared derivatives against central differences of the next
    /// lower derivative on `probe`; returns the worst relative mismatch.
    pub fn check_derivatives(&self, probe: &[f64]) -> f64 {
        let top = self.order.min(4);
        let mut worst: f64 = 0.0;
        for &x in probe {
            for k in 1..=top {
                let h = 1e-3 * x.abs().max(1.0);
                let g = |t: f64| (self.eval)(t, k - 1);
                let fd = (-g(x + 2.0 * h) + 8.0 * g(x + h) - 8.0 * g(x - h) + g(x - 2.0 * h)) / (12.0 * h);
                let d = (self.eval)(x, k);
                worst = worst.max((fd - d).abs() / d.abs().max(1.0));
            }
        }
        worst
    }
}

/// Σ_{k=1}^n {n,k} x^{k-1} f^{(k)}(x).
pub fn apply_an_numeric(f: &FnWithDerivs, n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("operator order must be ≥ 1".into()));
    }
    if f.order < n {
        return Err(Error::Invalid(format!("A_{n} needs {n} derivatives, only {} declared", f.order)));
    }
    let mut acc = 0.0;
    let mut xp = 1.0;
    for k in 1..=n {
        acc += stirling2(n, k)? as f64 * xp * f.deriv(k, x)?;
        xp *= x;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GnMethod {
    NestedQuadrature,
    MonteCarlo { seed: u64, draws: usize },
}

pub const GN_MC_DRAWS: usize = 100_000;

/// G_n h(x) = x E h(x V_n), V_n a product of n standard uniforms.
pub fn apply_gn(h: impl Fn(f64) -> f64 + Sync, n: u32, x: f64, method: GnMethod) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("operator order must be ≥ 1".into()));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    match method {
        GnMethod::NestedQuadrature => {
            // -log V_n ~ Gamma(n, 1): E h(x V) = ∫_0^∞ h(x e^{-s}) s^{n-1} e^{-s} / (n-1)! ds
            let norm: f64 = (1..n).map(|i| i as f64).product();
            let g = |s: f64| {
                let w = (-s).exp();
                if w == 0.0 {
                    return 0.0;
                }
                h(x * w) * s.powi(n as i32 - 1) * w / norm
            };
            let r = integrate_to_inf(g, 0.0, Tol::new(1e-14, 1e-12)).into_result()?;
            Ok(x * r)
        }
        GnMethod::MonteCarlo { seed, draws } => {
            let mut r = rng::stream(seed, 0);
            let mut acc = MeanAcc::new();
            for _ in 0..draws {
                let v: f64 = (0..n).map(|_| rng::open01(&mut r)).product();
                acc.push(h(x * v));
            }
            Ok(x * acc.mean())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualMethod {
    ExactMoments,
    MonteCarlo { seed: u64, draws: usize },
}

pub const MAX_RESIDUAL_DEGREE: usize = 8;

/// E[σ² A_n f(Z) - Z f(Z)] for Z ~ PN(n, σ²). The Monte Carlo variant
/// reports the exact standard error of its mean.
pub fn characterization_residual(params: &PNParams, f: &Poly, method: ResidualMethod) -> Result<MeanSe> {
    if f.degree().unwrap_or(0) > MAX_RESIDUAL_DEGREE {
        return Err(Error::Invalid(format!("degree ≤ {MAX_RESIDUAL_DEGREE} required")));
    }
    let s2 = params.sigma * params.sigma;
    let af = apply_an(f, params.n);
    match method {
        ResidualMethod::ExactMoments => {
            let mut total = 0.0;
            for (k, &c) in af.coeffs().iter().enumerate() {
                total += s2 * c * prodnormal::moment(params, k as u32);
            }
            for (k, &c) in f.coeffs().iter().enumerate() {
                total -= c * prodnormal::moment(params, k as u32 + 1);
            }
            Ok(MeanSe { mean: total, se: 0.0 })
        }
        ResidualMethod::MonteCarlo { seed, draws } => {
            let acc = prodnormal::mc_mean(params, seed, draws, |z| s2 * af.eval(z) - z * f.eval(z));
            // g(Z) is heavy-tailed for n ≥ 3, where the sample SE can miss
            // the true one by orders of magnitude; its variance is a finite
            // combination of PN moments, so use that instead
            let scaled = Poly::new(af.coeffs().iter().map(|c| s2 * c).collect())?;
            let g = scaled.sub(&f.shift_up(1)?);
            let m = |k: usize| prodnormal::moment(params, k as u32);
            let gc = g.coeffs();
            let mut second = 0.0;
            for (i, a) in gc.iter().enumerate() {
                for (j, b) in gc.iter().enumerate() {
                    second += a * b * m(i + j);
                }
            }
            let first: f64 = gc.iter().enumerate().map(|(i, a)| a * m(i)).sum();
            let var = (second - first * first).max(0.0);
            Ok(MeanSe { mean: acc.mean(), se: (var / draws as f64).sqrt() })
        }
    }
}
