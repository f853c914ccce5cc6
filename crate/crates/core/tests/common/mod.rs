//! Independent reference computations. Nothing here calls the library's
//! special functions or quadrature unless a test says so explicitly.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// I_n(x) = (1/π) ∫_0^π e^{x cos θ} cos(nθ) dθ, trapezoid rule (spectrally
/// accurate for periodic analytic integrands).
pub fn bessel_i(n: u32, x: f64) -> f64 {
    let m = 400;
    let h = PI / m as f64;
    let f = |t: f64| (x * t.cos()).exp() * (n as f64 * t).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        s += f(i as f64 * h);
    }
    s * h / PI
}

/// K_n(x) = ∫_0^∞ e^{−x cosh t} cosh(nt) dt, trapezoid rule on an even,
/// doubly exponentially decaying integrand.
pub fn bessel_k(n: u32, x: f64) -> f64 {
    let h = 0.01;
    let t_max = (800.0 / x).acosh() + 1.0;
    let m = (t_max / h).ceil() as usize;
    let f = |t: f64| (-x * t.cosh()).exp() * (n as f64 * t).cosh();
    let mut s = 0.5 * f(0.0);
    for i in 1..=m {
        s += f(i as f64 * h);
    }
    s * h
}

/// Number of partitions of {1..n} into k blocks by enumerating restricted
/// growth strings.
pub fn stirling2_brute(n: usize, k: usize) -> u64 {
    fn rec(pos: usize, n: usize, k: usize, max: usize) -> u64 {
        if pos == n {
            return (max == k) as u64;
        }
        let mut c = 0;
        for b in 0..=max.min(k - 1) {
            c += rec(pos + 1, n, k, max.max(b + 1));
        }
        c
    }
    if k == 0 {
        return (n == 0) as u64;
    }
    rec(0, n, k, 0)
}

/// (2k − 1)!!
pub fn double_factorial_odd(k: u32) -> f64 {
    (1..=k).map(|j| (2 * j - 1) as f64).product()
}

/// E Z^p for Z ~ PN(n, 1): product of standard normal moments.
pub fn pn_moment(n: u32, p: u32) -> f64 {
    if p % 2 == 1 {
        0.0
    } else {
        double_factorial_odd(p / 2).powi(n as i32)
    }
}

/// ∫ g(y) dy over y ∈ (0, ∞) through y = e^s; g may have a log
/// singularity at 0 and must decay at least like e^{−y}.
pub fn int_log_sub(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    simpson(|s| g(s.exp()) * s.exp(), lo.ln(), hi.ln(), 40_000)
}

/// Two-sided solution of the PN(2, σ²) Stein equation from its defining
/// integral formula, with PN₂ centering also done by quadrature.
/// k0, i0 are passed in so the test decides which Bessel values to trust.
pub struct SteinOracle<'a> {
    pub h: &'a dyn Fn(f64) -> f64,
    pub sigma: f64,
    pub mean: f64,
    pub i0: &'a dyn Fn(f64) -> f64,
    pub k0: &'a dyn Fn(f64) -> f64,
}

impl<'a> SteinOracle<'a> {
    pub fn new(h: &'a dyn Fn(f64) -> f64, sigma: f64, i0: &'a dyn Fn(f64) -> f64, k0: &'a dyn Fn(f64) -> f64) -> Self {
        // E h(σ Y), Y ~ PN(2,1) with density K0(|y|)/π
        let pos = int_log_sub(|y| k0(y) * h(sigma * y), 1e-30, 800.0);
        let neg = int_log_sub(|y| k0(y) * h(-sigma * y), 1e-30, 800.0);
        SteinOracle { h, sigma, mean: (pos + neg) / PI, i0, k0 }
    }

    fn h_tilde(&self, y: f64) -> f64 {
        (self.h)(self.sigma * y) - self.mean
    }

    /// ∫_x^∞ K0(|y|) h̃(σy) dy for the σ = 1 problem.
    pub fn right_tail(&self, x: f64) -> f64 {
        let pos = |lo: f64| int_log_sub(|y| (self.k0)(y) * self.h_tilde(y), lo, 800.0);
        if x > 0.0 {
            pos(x)
        } else {
            let neg = int_log_sub(|y| (self.k0)(y) * self.h_tilde(-y), 1e-30, -x);
            pos(1e-30) + neg
        }
    }

    /// ∫_{−∞}^x K0(|y|) h̃(σy) dy.
    pub fn left_tail(&self, x: f64) -> f64 {
        let neg = |lo: f64| int_log_sub(|y| (self.k0)(y) * self.h_tilde(-y), lo, 800.0);
        if x < 0.0 {
            neg(-x)
        } else {
            let pos = int_log_sub(|y| (self.k0)(y) * self.h_tilde(y), 1e-30, x);
            neg(1e-30) + pos
        }
    }

    /// f(x) = (1/σ) ψ(x/σ), ψ(u) = −K0(|u|)∫_0^u I0 h̃_σ − I0(u)∫_u^∞ K0(|y|) h̃_σ.
    pub fn solve(&self, x: f64) -> f64 {
        let u = x / self.sigma;
        let inner = simpson(|y| (self.i0)(y) * self.h_tilde(y), 0.0, u, 4000);
        let psi = -(self.k0)(u.abs()) * inner - (self.i0)(u) * self.right_tail(u);
        psi / self.sigma
    }
}

/// Relative difference with an absolute floor.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (n - 1) as f64).exp()).collect()
}
