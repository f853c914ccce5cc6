//! Named test functions h with analytic derivatives to order 3 and their
//! supremum norms.

use std::fmt;

use crate::error::{Error, Result};
use crate::operators::FnWithDerivs;
use crate::prodnormal::{expectation, ExpectMethod, PNParams, PdfEvalConfig};

/// The five functions used by the bound suites and experiments.
pub const CATALOG: [&str; 5] = ["sin", "cos", "tanh-scaled", "gaussian-bump", "arctan"];

/// Every name accepted by [`TestFn::named`].
pub const ALL_NAMES: [&str; 8] = ["sin", "cos", "tanh-scaled", "gaussian-bump", "arctan", "lorentzian", "constant", "identity"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Odd,
    Even,
    None,
}

#[derive(Clone)]
pub struct TestFn {
    pub name: String,
    pub func: FnWithDerivs,
    /// Infimum and supremum of h over the real line.
    pub range: (f64, f64),
    /// ‖h'‖, ‖h''‖, ‖h'''‖.
    pub deriv_sups: [f64; 3],
    /// True when the norms were estimated on a grid rather than known exactly.
    pub norms_estimated: bool,
    pub symmetry: Symmetry,
}

impl fmt::Debug for TestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFn")
            .field("name", &self.name)
            .field("range", &self.range)
            .field("deriv_sups", &self.deriv_sups)
            .field("norms_estimated", &self.norms_estimated)
            .finish()
    }
}

fn tanh_derivs(x: f64, k: u32) -> f64 {
    // h(x) = tanh(x/2)
    let t = (0.5 * x).tanh();
    let s = 1.0 - t * t;
    match k {
        0 => t,
        1 => 0.5 * s,
        2 => -0.5 * t * s,
        _ => 0.125 * s * (6.0 * t * t - 2.0),
    }
}

fn bump_derivs(x: f64, k: u32) -> f64 {
    let g = (-x * x).exp();
    match k {
        0 => g,
        1 => -2.0 * x * g,
        2 => (4.0 * x * x - 2.0) * g,
        _ => (12.0 * x - 8.0 * x * x * x) * g,
    }
}

fn atan_derivs(x: f64, k: u32) -> f64 {
    let q = 1.0 + x * x;
    match k {
        0 => x.atan(),
        1 => 1.0 / q,
        2 => -2.0 * x / (q * q),
        _ => (6.0 * x * x - 2.0) / (q * q * q),
    }
}

fn lorentz_derivs(x: f64, k: u32) -> f64 {
    let q = 1.0 + x * x;
    match k {
        0 => 1.0 / q,
        1 => -2.0 * x / (q * q),
        2 => (6.0 * x * x - 2.0) / (q * q * q),
        _ => 24.0 * x * (1.0 - x * x) / (q * q * q * q),
    }
}

impl TestFn {
    pub fn named(name: &str) -> Result<TestFn> {
        let sqrt3 = 3f64.sqrt();
        let (func, range, deriv_sups, symmetry) = match name {
            "sin" => (FnWithDerivs::sin(), (-1.0, 1.0), [1.0, 1.0, 1.0], Symmetry::Odd),
            "cos" => (
                FnWithDerivs::new(3, |x, k| match k {
                    0 => x.cos(),
                    1 => -x.sin(),
                    2 => -x.cos(),
                    _ => x.sin(),
                }),
                (-1.0, 1.0),
                [1.0, 1.0, 1.0],
                Symmetry::Even,
            ),
            "tanh-scaled" => {
                // sup |t(1-t²)| at t = 1/√3
                let h2 = 0.5 * (1.0 / sqrt3) * (2.0 / 3.0);
                (FnWithDerivs::new(3, tanh_derivs), (-1.0, 1.0), [0.5, h2, 0.25], Symmetry::Odd)
            }
            "gaussian-bump" => {
                let h1 = 2f64.sqrt() * (-0.5f64).exp();
                let x3 = ((3.0 - 6f64.sqrt()) / 2.0).sqrt();
                let h3 = bump_derivs(x3, 3).abs();
                (FnWithDerivs::new(3, bump_derivs), (0.0, 1.0), [h1, 2.0, h3], Symmetry::Even)
            }
            "arctan" => {
                let h2 = 3.0 * sqrt3 / 8.0;
                let half_pi = std::f64::consts::FRAC_PI_2;
                (FnWithDerivs::new(3, atan_derivs), (-half_pi, half_pi), [1.0, h2, 2.0], Symmetry::Odd)
            }
            "lorentzian" => {
                let h1 = 3.0 * sqrt3 / 8.0;
                let x3 = (1.0 - 2.0 / 5f64.sqrt()).sqrt();
                let h3 = lorentz_derivs(x3, 3).abs();
                (FnWithDerivs::new(3, lorentz_derivs), (0.0, 1.0), [h1, 2.0, h3], Symmetry::Even)
            }
            "constant" => (FnWithDerivs::new(3, |_, k| if k == 0 { 1.0 } else { 0.0 }), (1.0, 1.0), [0.0; 3], Symmetry::Even),
            "identity" => (
                FnWithDerivs::new(3, |x, k| match k {
                    0 => x,
                    1 => 1.0,
                    _ => 0.0,
                }),
                (f64::NEG_INFINITY, f64::INFINITY),
                [1.0, 0.0, 0.0],
                Symmetry::Odd,
            ),
            other => {
                return Err(Error::Invalid(format!(
                    "unknown test function '{other}'; expected one of {}",
                    ALL_NAMES.join(", ")
                )))
            }
        };
        Ok(TestFn { name: name.to_string(), func, range, deriv_sups, norms_estimated: false, symmetry })
    }

    /// A user-supplied h with derivatives to order 3; norms are taken as grid
    /// maxima inflated by 5% and flagged as estimated.
    pub fn from_grid(name: &str, func: FnWithDerivs, grid: &[f64]) -> Result<TestFn> {
        if func.order < 3 {
            return Err(Error::Invalid("test functions need derivatives to order 3".into()));
        }
        if grid.is_empty() {
            return Err(Error::Invalid("empty grid".into()));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut d = [0.0f64; 3];
        for &x in grid {
            let v = func.value(x);
            lo = lo.min(v);
            hi = hi.max(v);
            for k in 1..=3 {
                d[k - 1] = d[k - 1].max(func.deriv(k as u32, x)?.abs());
            }
        }
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo) * 1.05;
        let range = (mid - half, mid + half);
        Ok(TestFn {
            name: name.to_string(),
            func,
            range,
            deriv_sups: d.map(|v| v * 1.05),
            norms_estimated: true,
            symmetry: Symmetry::None,
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.func.value(x)
    }

    /// k-th derivative, k ≤ 3.
    pub fn deriv(&self, k: u32, x: f64) -> f64 {
        self.func.deriv(k, x).expect("test functions carry three derivatives")
    }

    /// ‖h - c‖ over the real line.
    pub fn sup_centered(&self, c: f64) -> f64 {
        (self.range.1 - c).max(c - self.range.0)
    }

    /// ‖h^{(k)}‖ for k ∈ 1..=3.
    pub fn sup_deriv(&self, k: u32) -> f64 {
        self.deriv_sups[k as usize - 1]
    }

    pub fn is_bounded(&self) -> bool {
        self.range.0.is_finite() && self.range.1.is_finite()
    }

    /// PN(2, σ²) expectation of h, with the odd-function shortcut.
    pub fn pn2_expectation(&self, sigma: f64) -> Result<f64> {
        if self.symmetry == Symmetry::Odd {
            return Ok(0.0);
        }
        if self.range.0 == self.range.1 {
            return Ok(self.range.0);
        }
        let params = PNParams::new(2, sigma)?;
        let cfg = PdfEvalConfig { quad_tol: 1e-12, ..PdfEvalConfig::default() };
        Ok(expectation(&params, |x| self.value(x), ExpectMethod::Quadrature, &cfg)?.mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let probe: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.137).collect();
        for name in ALL_NAMES {
            let h = TestFn::named(name).unwrap();
            let err = h.func.check_derivatives(&probe);
            assert!(err < 1e-5, "{name}: {err}");
        }
    }

    #[test]
    fn norms_dominate_grid() {
        let grid: Vec<f64> = (-20_000..=20_000).map(|i| i as f64 * 1e-3).collect();
        for name in CATALOG.iter().chain(["lorentzian"].iter()) {
            let h = TestFn::named(name).unwrap();
            for k in 1..=3 {
                let m = grid.iter().map(|&x| h.deriv(k, x).abs()).fold(0.0, f64::max);
                assert!(m <= h.sup_deriv(k) * (1.0 + 1e-12), "{name} k={k}: {m} > {}", h.sup_deriv(k));
                assert!(m >= h.sup_deriv(k) * (1.0 - 1e-4), "{name} k={k}: {m} ≪ {}", h.sup_deriv(k));
            }
        }
    }

    #[test]
    fn expectations() {
        let cos = TestFn::named("cos").unwrap();
        assert!((cos.pn2_expectation(1.0).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-10);
        assert_eq!(TestFn::named("sin").unwrap().pn2_expectation(2.0).unwrap(), 0.0);
        assert_eq!(TestFn::named("constant").unwrap().pn2_expectation(2.0).unwrap(), 1.0);
        let c = cos.pn2_expectation(1.0).unwrap();
        assert!((cos.sup_centered(c) - (1.0 + c)).abs() < 1e-15);
    }

    #[test]
    fn unknown_name() {
        assert!(TestFn::named("nope").is_err());
    }

    #[test]
    fn grid_norms_are_flagged() {
        let h = TestFn::from_grid("sin-grid", FnWithDerivs::sin(), &[0.0, 1.0, 2.0]).unwrap();
        assert!(h.norms_estimated);
        assert!(h.sup_deriv(1) >= 1.0);
    }
}
