//! Modified Bessel functions of orders 0 and 1, their derivatives, repeated
//! integrals of I0, the K0 tail integral, the lower incomplete gamma function
//! of integer order and Stirling numbers of the second kind.
//!
//! Scaled variants return e^{-|x|} I(x) and e^{x} K(x), so products such as
//! I0(x) K0(x) can be formed without overflow for large x.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::quad::{integrate_to_inf, Tol};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this |x| the natural-mode series for I_ν is replaced by the scaled
/// asymptotic expansion.
pub const I_SERIES_MAX: f64 = 30.0;
/// K_ν uses the log-series up to here and Steed's continued fraction above.
pub const K_SERIES_MAX: f64 = 2.0;
/// Smallest argument accepted by K_ν.
pub const K_MIN_ARG: f64 = 1e-300;
/// Derivatives of K0 of order ≥ 2 refuse arguments below this.
pub const K_DERIV_MIN_ARG: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    Natural,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub x: f64,
    pub scale_mode: ScaleMode,
}

impl EvalPoint {
    pub fn natural(x: f64) -> Self {
        EvalPoint { x, scale_mode: ScaleMode::Natural }
    }
    pub fn scaled(x: f64) -> Self {
        EvalPoint { x, scale_mode: ScaleMode::Scaled }
    }
}

fn check_order(nu: u32) -> Result<()> {
    if nu > 1 {
        Err(Error::UnsupportedOrder(nu))
    } else {
        Ok(())
    }
}

// I_ν(x) for x ≥ 0 from the defining power series.
fn i_series(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if nu == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= q / (k * (k + nu as f64));
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

// e^{-x} I_ν(x) for large x > 0 from the Hankel asymptotic expansion.
fn i_asymptotic_scaled(nu: u32, x: f64) -> f64 {
    let mu = 4.0 * (nu * nu) as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let odd = 2.0 * k - 1.0;
        let next = term * (odd * odd - mu) / (8.0 * k * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

fn i_scaled_abs(nu: u32, ax: f64) -> f64 {
    if ax <= I_SERIES_MAX {
        i_series(nu, ax) * (-ax).exp()
    } else {
        i_asymptotic_scaled(nu, ax)
    }
}

fn odd_sign(nu: u32, x: f64) -> f64 {
    if nu == 1 && x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// I_ν(x) for ν ∈ {0, 1}.
pub fn bessel_i(nu: u32, x: f64) -> Result<f64> {
    check_order(nu)?;
    let ax = x.abs();
    if ax <= I_SERIES_MAX {
        return Ok(odd_sign(nu, x) * i_series(nu, ax));
    }
    let v = ax + i_asymptotic_scaled(nu, ax).ln();
    if v > f64::MAX.ln() {
        return Err(Error::Overflow(format!("I{nu}({x}) exceeds f64 range")));
    }
    Ok(odd_sign(nu, x) * v.exp())
}

/// e^{-|x|} I_ν(x).
pub fn bessel_i_scaled(nu: u32, x: f64) -> Result<f64> {
    check_order(nu)?;
    Ok(odd_sign(nu, x) * i_scaled_abs(nu, x.abs()))
}

pub fn bessel_i_at(nu: u32, p: EvalPoint) -> Result<f64> {
    match p.scale_mode {
        ScaleMode::Natural => bessel_i(nu, p.x),
        ScaleMode::Scaled => bessel_i_scaled(nu, p.x),
    }
}

// (K0, K1) for 0 < x ≤ 2 from the logarithmic series.
fn k_series(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let lg = (0.5 * x).ln();
    let i0 = i_series(0, x);
    let i1 = i_series(1, x);
    // K0: sum over k ≥ 1 of H_k q^k / (k!)^2
    let mut t0 = 1.0;
    let mut h = 0.0;
    let mut s0 = 0.0;
    // K1: sum over k ≥ 0 of (ψ(k+1) + ψ(k+2)) q^k / (k!(k+1)!)
    let mut t1 = 1.0;
    let mut s1 = (-EULER_GAMMA) + (1.0 - EULER_GAMMA);
    let mut k = 0.0;
    loop {
        k += 1.0;
        t0 *= q / (k * k);
        h += 1.0 / k;
        s0 += h * t0;
        t1 *= q / (k * (k + 1.0));
        let psi_sum = (h - EULER_GAMMA) + (h + 1.0 / (k + 1.0) - EULER_GAMMA);
        s1 += psi_sum * t1;
        if t0 * h <= 1e-17 * s0.abs() && t1 <= 1e-17 {
            break;
        }
    }
    let k0 = -(lg + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    (k0, k1)
}

// (e^x K0, e^x K1) for x > 2 by Steed's method (continued fraction CF2).
fn k_cf2_scaled(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

fn check_k_arg(x: f64) -> Result<()> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::Domain(format!("K requires x > 0, got {x}")));
    }
    if x < K_MIN_ARG {
        return Err(Error::Domain(format!("K argument {x} below {K_MIN_ARG}")));
    }
    Ok(())
}

/// (K0(x), K1(x)) together.
pub fn bessel_k01(x: f64) -> Result<(f64, f64)> {
    check_k_arg(x)?;
    if x <= K_SERIES_MAX {
        Ok(k_series(x))
    } else {
        let (a, b) = k_cf2_scaled(x);
        let e = (-x).exp();
        Ok((a * e, b * e))
    }
}

/// (e^x K0(x), e^x K1(x)) together.
pub fn bessel_k01_scaled(x: f64) -> Result<(f64, f64)> {
    check_k_arg(x)?;
    if x <= K_SERIES_MAX {
        let (a, b) = k_series(x);
        let e = x.exp();
        Ok((a * e, b * e))
    } else {
        Ok(k_cf2_scaled(x))
    }
}

/// K_ν(x) for ν ∈ {0, 1}, x > 0.
pub fn bessel_k(nu: u32, x: f64) -> Result<f64> {
    check_order(nu)?;
    let (k0, k1) = bessel_k01(x)?;
    Ok(if nu == 0 { k0 } else { k1 })
}

/// e^{x} K_ν(x).
pub fn bessel_k_scaled(nu: u32, x: f64) -> Result<f64> {
    check_order(nu)?;
    let (k0, k1) = bessel_k01_scaled(x)?;
    Ok(if nu == 0 { k0 } else { k1 })
}

pub fn bessel_k_at(nu: u32, p: EvalPoint) -> Result<f64> {
    match p.scale_mode {
        ScaleMode::Natural => bessel_k(nu, p.x),
        ScaleMode::Scaled => bessel_k_scaled(nu, p.x),
    }
}

fn check_deriv_order(k: u32) -> Result<()> {
    if k > 4 {
        Err(Error::Invalid(format!("derivative order {k} outside 0..=4")))
    } else {
        Ok(())
    }
}

// k-th derivative of I0 at x ≥ 0 by differentiating the series term-wise.
fn i0_deriv_series(k: u32, x: f64) -> f64 {
    // term j: x^{2j-k} (2j)!/(2j-k)! / (4^j j!^2)
    let mut sum = 0.0;
    let mut coef = 1.0; // 1 / (4^j j!^2)
    for j in 0..200u32 {
        if j > 0 {
            let fj = j as f64;
            coef /= 4.0 * fj * fj;
        }
        let p = 2 * j;
        if p < k {
            continue;
        }
        let mut fall = 1.0;
        for i in 0..k {
            fall *= (p - i) as f64;
        }
        let term = coef * fall * x.powi((p - k) as i32);
        sum += term;
        if p > k + 4 && term <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

// Closed forms, linear in (I0, I1), valid for x > 0.
fn i0_deriv_closed(k: u32, x: f64, i0: f64, i1: f64) -> f64 {
    match k {
        0 => i0,
        1 => i1,
        2 => i0 - i1 / x,
        3 => i1 - i0 / x + 2.0 * i1 / (x * x),
        _ => {
            let x2 = x * x;
            i0 * (1.0 + 3.0 / x2) - i1 * (2.0 / x + 6.0 / (x2 * x))
        }
    }
}

const I0_DERIV_SERIES_MAX: f64 = 2.0;

fn parity(k: u32, x: f64) -> f64 {
    if x < 0.0 && k % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// k-th derivative of I0 at x, k ∈ 0..=4.
pub fn i0_deriv(k: u32, x: f64) -> Result<f64> {
    check_deriv_order(k)?;
    let ax = x.abs();
    let v = if ax < I0_DERIV_SERIES_MAX {
        i0_deriv_series(k, ax)
    } else if ax <= I_SERIES_MAX {
        i0_deriv_closed(k, ax, i_series(0, ax), i_series(1, ax))
    } else {
        let s = i0_deriv_closed(k, ax, i_asymptotic_scaled(0, ax), i_asymptotic_scaled(1, ax));
        let l = ax + s.ln();
        if l > f64::MAX.ln() {
            return Err(Error::Overflow(format!("I0^({k})({x}) exceeds f64 range")));
        }
        l.exp()
    };
    Ok(parity(k, x) * v)
}

/// e^{-|x|} times the k-th derivative of I0.
pub fn i0_deriv_scaled(k: u32, x: f64) -> Result<f64> {
    check_deriv_order(k)?;
    let ax = x.abs();
    let v = if ax < I0_DERIV_SERIES_MAX {
        i0_deriv_series(k, ax) * (-ax).exp()
    } else {
        i0_deriv_closed(k, ax, i_scaled_abs(0, ax), i_scaled_abs(1, ax))
    };
    Ok(parity(k, x) * v)
}

fn k0_deriv_closed(k: u32, x: f64, k0: f64, k1: f64) -> f64 {
    match k {
        0 => k0,
        1 => -k1,
        2 => k0 + k1 / x,
        3 => -k1 - k0 / x - 2.0 * k1 / (x * x),
        _ => {
            let x2 = x * x;
            k0 * (1.0 + 3.0 / x2) + k1 * (2.0 / x + 6.0 / (x2 * x))
        }
    }
}

fn check_k_deriv(k: u32, x: f64) -> Result<()> {
    check_deriv_order(k)?;
    check_k_arg(x)?;
    if k >= 2 && x < K_DERIV_MIN_ARG {
        return Err(Error::Singularity { x, what: format!("K0^({k}) has a 1/x^{k} singularity") });
    }
    Ok(())
}

/// k-th derivative of K0 at x > 0, k ∈ 0..=4.
pub fn k0_deriv(k: u32, x: f64) -> Result<f64> {
    check_k_deriv(k, x)?;
    let (k0, k1) = bessel_k01(x)?;
    Ok(k0_deriv_closed(k, x, k0, k1))
}

/// e^{x} times the k-th derivative of K0.
pub fn k0_deriv_scaled(k: u32, x: f64) -> Result<f64> {
    check_k_deriv(k, x)?;
    let (k0, k1) = bessel_k01_scaled(x)?;
    Ok(k0_deriv_closed(k, x, k0, k1))
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

// ratio of consecutive series terms of I_(0,0,m)
fn rep_ratio(m: u32, k: f64, x2: f64) -> f64 {
    let m = m as f64;
    x2 / (4.0 * (k + 1.0) * (k + 1.0)) * (2.0 * k + 1.0) * (2.0 * k + 2.0)
        / ((2.0 * k + m + 1.0) * (2.0 * k + m + 2.0))
}

fn check_rep_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("repeated integral requires x ≥ 0, got {x}")));
    }
    Ok(())
}

fn rep_series(m: u32, x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x.powi(m as i32) / factorial(m);
    let mut sum = term;
    let mut k = 0.0;
    while term > 1e-17 * sum || k < 2.0 {
        term *= rep_ratio(m, k, x2);
        sum += term;
        k += 1.0;
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// I_(0,0,m)(x): the m-fold repeated integral of I0 from 0, for 0 ≤ x ≤ 30.
/// Larger x is only served in scaled form.
pub fn repeated_integral_i0(m: u32, x: f64) -> Result<f64> {
    check_rep_arg(x)?;
    if x > I_SERIES_MAX {
        return Err(Error::Overflow(format!(
            "I_(0,0,{m})({x}) natural form is limited to x ≤ {I_SERIES_MAX}; use the scaled form"
        )));
    }
    if x == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    Ok(rep_series(m, x))
}

/// e^{-x} I_(0,0,m)(x) for any x ≥ 0.
pub fn repeated_integral_i0_scaled(m: u32, x: f64) -> Result<f64> {
    check_rep_arg(x)?;
    if x == 0.0 {
        return Ok(if m == 0 { 1.0 } else { 0.0 });
    }
    if x <= I_SERIES_MAX {
        return Ok(rep_series(m, x) * (-x).exp());
    }
    // accumulate terms in log space with the e^{-x} factor folded in
    let x2 = x * x;
    let mut lt = m as f64 * x.ln() - ln_factorial(m) - x;
    let mut sum = lt.exp();
    let mut k = 0.0;
    loop {
        lt += rep_ratio(m, k, x2).ln();
        let t = lt.exp();
        sum += t;
        k += 1.0;
        if k > 0.5 * x && t <= 1e-17 * sum {
            break;
        }
    }
    Ok(sum)
}

pub fn repeated_integral_i0_at(m: u32, p: EvalPoint) -> Result<f64> {
    match p.scale_mode {
        ScaleMode::Natural => repeated_integral_i0(m, p.x),
        ScaleMode::Scaled => repeated_integral_i0_scaled(m, p.x),
    }
}

// ∫_0^x K0 for 0 ≤ x ≤ 2 by integrating the log-series term-wise.
fn k0_head_integral(x: f64) -> f64 {
    let lg = (0.5 * x).ln();
    let q = 0.25 * x * x;
    let mut pow = x; // x^{2k+1} / (4^k k!^2)
    let mut h = 0.0;
    let mut sum = 0.0;
    let mut k = 0.0f64;
    loop {
        let odd = 2.0 * k + 1.0;
        let term = pow / odd * (h - lg - EULER_GAMMA + 1.0 / odd);
        sum += term;
        if k > 2.0 && term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        k += 1.0;
        pow *= q / (k * k);
        h += 1.0 / k;
    }
    sum
}

// e^{x} ∫_x^∞ K0 for x ≥ 2.
fn k0_tail_scaled_quad(x: f64) -> f64 {
    let g = |s: f64| {
        let (k0e, _) = k_cf2_scaled(x + s);
        k0e * (-s).exp()
    };
    integrate_to_inf(g, 0.0, Tol::new(1e-300, 1e-14)).value
}

fn check_tail_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("K0 tail integral requires x ≥ 0, got {x}")));
    }
    Ok(())
}

/// ∫_x^∞ K0(y) dy for x ≥ 0.
pub fn k0_tail_integral(x: f64) -> Result<f64> {
    check_tail_arg(x)?;
    if x == 0.0 {
        return Ok(FRAC_PI_2);
    }
    if x < K_SERIES_MAX {
        return Ok(FRAC_PI_2 - k0_head_integral(x));
    }
    if x > 745.0 {
        return Ok(0.0);
    }
    Ok(k0_tail_scaled_quad(x) * (-x).exp())
}

/// e^{x} ∫_x^∞ K0(y) dy for x ≥ 0.
pub fn k0_tail_integral_scaled(x: f64) -> Result<f64> {
    check_tail_arg(x)?;
    if x < K_SERIES_MAX {
        return Ok(k0_tail_integral(x)? * x.exp());
    }
    Ok(k0_tail_scaled_quad(x))
}

/// Lower incomplete gamma γ(n, x) = ∫_0^x t^{n-1} e^{-t} dt for integer n ≥ 1.
pub fn lower_incomplete_gamma(n: u32, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("incomplete gamma order must be ≥ 1".into()));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("incomplete gamma requires x ≥ 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    if x.is_infinite() {
        return Ok(factorial(n - 1));
    }
    if x < nf + 1.0 {
        // x^n e^{-x} Σ_k x^k / (n (n+1) ... (n+k))
        let mut term = 1.0 / nf;
        let mut sum = term;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= x / (nf + k);
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
        }
        Ok((nf * x.ln() - x).exp() * sum)
    } else {
        // (n-1)! (1 - e^{-x} Σ_{k<n} x^k / k!)
        let lx = x.ln();
        let tail: f64 = (0..n).map(|k| (k as f64 * lx - x - ln_factorial(k)).exp()).sum();
        Ok(factorial(n - 1) * (1.0 - tail))
    }
}

/// Stirling number of the second kind {n, k}, 1 ≤ k ≤ n ≤ 20.
pub fn stirling2(n: u32, k: u32) -> Result<u64> {
    if n > 20 {
        return Err(Error::Overflow(format!("Stirling numbers are limited to n ≤ 20, got {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::Invalid(format!("need 1 ≤ k ≤ n, got n = {n}, k = {k}")));
    }
    let n = n as usize;
    let k = k as usize;
    let mut row = vec![0u64; n + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=i).rev() {
            row[j] = j as u64 * row[j] + row[j - 1];
        }
        row[0] = 0;
    }
    Ok(row[k])
}

/// The singular combinations of repeated integrals and K0 derivatives whose
/// 1/x poles cancel. Each is evaluated stably down to x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    /// 1/x − I_(0,0,1) K0''
    B2,
    /// 2/x² + I_(0,0,1) K0'''
    B3a,
    /// 1/x + I_(0,0,2) K0'''
    B3b,
    /// 6/x³ + 1/x − I_(0,0,1) K0''''
    B4a,
    /// 3/x² − I_(0,0,2) K0''''
    B4b,
    /// 1/x − I_(0,0,3) K0''''
    B4c,
}

impl Bracket {
    pub const ALL: [Bracket; 6] = [Bracket::B2, Bracket::B3a, Bracket::B3b, Bracket::B4a, Bracket::B4b, Bracket::B4c];

    // (m, k, sign of product, [(power, coefficient)] of the rational part)
    fn parts(self) -> (u32, u32, f64, &'static [(i32, f64)]) {
        match self {
            Bracket::B2 => (1, 2, -1.0, &[(-1, 1.0)]),
            Bracket::B3a => (1, 3, 1.0, &[(-2, 2.0)]),
            Bracket::B3b => (2, 3, 1.0, &[(-1, 1.0)]),
            Bracket::B4a => (1, 4, -1.0, &[(-3, 6.0), (-1, 1.0)]),
            Bracket::B4b => (2, 4, -1.0, &[(-2, 3.0)]),
            Bracket::B4c => (3, 4, -1.0, &[(-1, 1.0)]),
        }
    }
}

const BRACKET_SERIES_MAX: f64 = 0.5;
const LL_OFF: i32 = 6;
const LL_TOP: i32 = 40;

/// Σ (a_p + b_p L) x^p with L = ln(x/2) + γ, for p ∈ [−LL_OFF, LL_TOP].
#[derive(Clone)]
struct LogLaurent {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl LogLaurent {
    fn zero() -> Self {
        let n = (LL_OFF + LL_TOP + 1) as usize;
        LogLaurent { a: vec![0.0; n], b: vec![0.0; n] }
    }

    fn idx(p: i32) -> usize {
        (p + LL_OFF) as usize
    }

    fn k0() -> Self {
        let mut s = LogLaurent::zero();
        let (mut c, mut h) = (1.0, 0.0);
        let mut j = 0;
        while 2 * j <= LL_TOP {
            if j > 0 {
                let jf = j as f64;
                c /= 4.0 * jf * jf;
                h += 1.0 / jf;
            }
            s.a[Self::idx(2 * j)] = h * c;
            s.b[Self::idx(2 * j)] = -c;
            j += 1;
        }
        s
    }

    fn derivative(&self) -> Self {
        let mut d = LogLaurent::zero();
        for p in (-LL_OFF + 1)..=LL_TOP {
            let (a, b) = (self.a[Self::idx(p)], self.b[Self::idx(p)]);
            let pf = p as f64;
            d.a[Self::idx(p - 1)] = pf * a + b;
            d.b[Self::idx(p - 1)] = pf * b;
        }
        d
    }

    // product with a power series Σ c_q x^q, q ≥ 0
    fn mul_plain(&self, c: &[f64]) -> Self {
        let mut r = LogLaurent::zero();
        for p in -LL_OFF..=LL_TOP {
            let (a, b) = (self.a[Self::idx(p)], self.b[Self::idx(p)]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            for (q, &cq) in c.iter().enumerate() {
                let t = p + q as i32;
                if t > LL_TOP {
                    break;
                }
                r.a[Self::idx(t)] += a * cq;
                r.b[Self::idx(t)] += b * cq;
            }
        }
        r
    }

    fn eval(&self, x: f64) -> Result<f64> {
        for p in -LL_OFF..0 {
            let (a, b) = (self.a[Self::idx(p)], self.b[Self::idx(p)]);
            if a.abs() > 1e-9 || b.abs() > 1e-9 {
                return Err(Error::Invalid(format!("bracket series keeps a pole of order {}", -p)));
            }
        }
        if x == 0.0 {
            if self.b[Self::idx(0)].abs() > 1e-9 {
                return Err(Error::Singularity { x, what: "bracket has a logarithmic singularity".into() });
            }
            return Ok(self.a[Self::idx(0)]);
        }
        let l = (0.5 * x).ln() + EULER_GAMMA;
        let mut sum = 0.0;
        for p in (0..=LL_TOP).rev() {
            sum = sum * x + self.a[Self::idx(p)] + self.b[Self::idx(p)] * l;
        }
        Ok(sum)
    }
}

// Σ c_q x^q for I_(0,0,m)
fn rep_coeffs(m: u32) -> Vec<f64> {
    let mut c = vec![0.0; (LL_TOP + 1) as usize];
    let mut j = 0u32;
    let mut base = 1.0;
    while 2 * j + m <= LL_TOP as u32 {
        if j > 0 {
            base /= 4.0 * (j * j) as f64;
        }
        let denom: f64 = (1..=m).map(|i| (2 * j + i) as f64).product();
        c[(2 * j + m) as usize] = base / denom;
        j += 1;
    }
    c
}

fn bracket_series(br: Bracket) -> LogLaurent {
    let (m, k, sign, rational) = br.parts();
    let mut kd = LogLaurent::k0();
    for _ in 0..k {
        kd = kd.derivative();
    }
    let mut s = kd.mul_plain(&rep_coeffs(m));
    for v in s.a.iter_mut().chain(s.b.iter_mut()) {
        *v *= sign;
    }
    for &(p, c) in rational {
        s.a[LogLaurent::idx(p)] += c;
    }
    // poles cancel analytically; drop rounding residue after the check in eval
    s
}

/// Value of a bracket at x ≥ 0; x = 0 returns the limit.
pub fn bracket(br: Bracket, x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("bracket requires x ≥ 0, got {x}")));
    }
    if x < BRACKET_SERIES_MAX {
        return bracket_series(br).eval(x);
    }
    let (m, k, sign, rational) = br.parts();
    let prod = repeated_integral_i0_scaled(m, x)? * k0_deriv_scaled(k, x)?;
    Ok(rational.iter().map(|&(p, c)| c * x.powi(p)).sum::<f64>() + sign * prod)
}
