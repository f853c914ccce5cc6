//! Globally adaptive 21-point Gauss–Kronrod quadrature.
//!
//! Intervals live in a max-heap keyed on their error estimate; the worst one
//! is bisected until the summed error meets the tolerance. Semi-infinite
//! ranges are mapped onto [0, 1) with x = a + s/(1 - s).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { abs: 1e-13, rel: 1e-11, max_intervals: 4000 }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol { abs, rel, ..Tol::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::Quadrature { value: self.value, error: self.error })
        }
    }
}

/// One GK21 panel on [a, b]: (kronrod estimate, error estimate).
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[10];
    let mut resg = 0.0;
    for j in 0..5 {
        let jj = 2 * j + 1;
        let dx = h * XGK[jj];
        let s = f(c - dx) + f(c + dx);
        resg += WG[j] * s;
        resk += WGK[jj] * s;
    }
    for j in 0..5 {
        let jj = 2 * j;
        let dx = h * XGK[jj];
        resk += WGK[jj] * (f(c - dx) + f(c + dx));
    }
    let val = resk * h;
    let err = ((resk - resg) * h).abs();
    (val, err)
}

struct Panel {
    a: f64,
    b: f64,
    val: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrate f over [a, b] with breakpoints `breaks` (any order, points
/// outside (a, b) ignored).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, evals: 0, converged: true };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > lo && p < hi).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for w in pts.windows(2) {
        let (val, err) = gk21(&f, w[0], w[1]);
        evals += 21;
        heap.push(Panel { a: w[0], b: w[1], val, err });
    }
    loop {
        let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.val, e + p.err));
        let target = tol.abs.max(tol.rel * total.abs());
        if !total.is_finite() || !err.is_finite() {
            return QuadResult { value: sign * total, error: err, evals, converged: false };
        }
        if err <= target {
            return QuadResult { value: sign * total, error: err, evals, converged: true };
        }
        if heap.len() >= tol.max_intervals {
            return QuadResult { value: sign * total, error: err, evals, converged: false };
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            heap.push(Panel { err: 0.0, ..worst });
            let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.val, e + p.err));
            if err <= tol.abs.max(tol.rel * total.abs()) {
                continue;
            }
            return QuadResult { value: sign * total, error: err, evals, converged: false };
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        evals += 42;
        heap.push(Panel { a: worst.a, b: mid, val: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, val: v2, err: e2 });
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> QuadResult {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Integrate f over [a, ∞). The integrand must decay fast enough that
/// f(x)·(1 + x - a)² stays bounded.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tol) -> QuadResult {
    let g = |s: f64| {
        let one_minus = 1.0 - s;
        let x = a + s / one_minus;
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v / (one_minus * one_minus)
        }
    };
    integrate(g, 0.0, 1.0, tol)
}
