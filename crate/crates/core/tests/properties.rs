mod common;

use proptest::prelude::*;

use pnstein::experiments::rate_fit;
use pnstein::operators::*;
use pnstein::prodnormal::{self, PNParams, PdfEvalConfig};
use pnstein::specfun::{bessel_i, bessel_i_scaled, bessel_k, bessel_k_scaled};
use pnstein::stats::MeanSe;
use pnstein::stein2::SteinSol2;
use pnstein::testfns::TestFn;
use pnstein::zerobias::{zero_bias_cdf, zero_bias_n_samples, zero_bias_pdf, BaseDist, ZeroBiasSpec};

fn poly(max_deg: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_deg + 1).prop_map(|c| Poly::new(c).unwrap())
}

fn scale(p: &Poly) -> f64 {
    p.coeffs().iter().fold(1.0f64, |m, c| m.max(c.abs()))
}

// mean-zero two-point law a < 0 < b
fn two_point() -> impl Strategy<Value = (f64, f64)> {
    (0.1f64..3.0, 0.1f64..3.0).prop_map(|(a, b)| (-a, b))
}

fn two_point_law(a: f64, b: f64) -> BaseDist {
    let pa = b / (b - a);
    BaseDist::atoms(&[(a, pa), (b, 1.0 - pa)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn an_inverts_gn(p in poly(10), n in 1u32..=5) {
        let back = apply_an(&apply_gn_poly(&p, n).unwrap(), n);
        prop_assert!(back.max_coeff_diff(&p) <= 1e-12 * scale(&p));
    }

    #[test]
    fn gn_inverts_an_up_to_constant(p in poly(10), n in 1u32..=5) {
        let back = apply_gn_poly(&apply_an(&p, n), n).unwrap();
        let want = p.sub(&Poly::new(vec![p.coeff(0)]).unwrap());
        prop_assert!(back.max_coeff_diff(&want) <= 1e-12 * scale(&p));
    }

    #[test]
    fn an_paths_agree(p in poly(10), n in 1u32..=5) {
        let a = apply_an(&p, n);
        let b = apply_an_stirling(&p, n).unwrap();
        prop_assert!(a.max_coeff_diff(&b) <= 1e-12 * scale(&a));
        let f = FnWithDerivs::from_poly(&p);
        for x in [-1.3, 0.4, 1.1] {
            let v = apply_an_numeric(&f, n, x).unwrap();
            prop_assert!((v - a.eval(x)).abs() <= 1e-10 * a.eval(x).abs().max(scale(&a)));
        }
    }

    #[test]
    fn t_is_x_times_derivative(p in poly(10), x in -2.0f64..2.0) {
        let t = apply_t(&p).eval(x);
        prop_assert!((t - x * p.derivative().eval(x)).abs() <= 1e-10 * scale(&p) * 2f64.powi(11));
    }

    #[test]
    fn exact_characterization_residual(p in poly(8), n in 1u32..=4, sigma in 0.3f64..2.0) {
        let params = PNParams::new(n, sigma).unwrap();
        let r = characterization_residual(&params, &p, ResidualMethod::ExactMoments).unwrap();
        // size of the terms being cancelled
        let mag: f64 = p.coeffs().iter().enumerate().map(|(k, c)| {
            let k = k as u32;
            c.abs() * (prodnormal::moment(&params, k + 1 + (k % 2)).abs()
                + sigma * sigma * (k as f64).powi(n as i32) * prodnormal::moment(&params, k.saturating_sub(1) + (k % 2 == 0) as u32).abs())
        }).sum::<f64>().max(1.0);
        prop_assert!(r.mean.abs() <= 1e-12 * mag, "{} vs {}", r.mean, mag);
    }

    #[test]
    fn scaled_bessel_agrees(x in 1e-3f64..700.0) {
        for nu in 0..=1 {
            let (a, b) = (bessel_i(nu, x).unwrap(), bessel_i_scaled(nu, x).unwrap() * x.exp());
            prop_assert!(common::rel(a, b) < 1e-12);
            let k = bessel_k(nu, x).unwrap();
            if k > 1e-290 {
                prop_assert!(common::rel(k, bessel_k_scaled(nu, x).unwrap() * (-x).exp()) < 1e-12);
            }
        }
    }

    #[test]
    fn pdf_even_and_cdf_monotone(n in 1u32..=4, sigma in 0.2f64..5.0, x in 1e-3f64..20.0, dx in 1e-3f64..3.0) {
        let params = PNParams::new(n, sigma).unwrap();
        let cfg = PdfEvalConfig::default();
        prop_assert_eq!(prodnormal::pdf(&params, x, &cfg).unwrap(), prodnormal::pdf(&params, -x, &cfg).unwrap());
        prop_assert!(prodnormal::pdf(&params, x, &cfg).unwrap() >= 0.0);
        let (lo, hi) = (prodnormal::cdf(&params, x, &cfg).unwrap(), prodnormal::cdf(&params, x + dx, &cfg).unwrap());
        prop_assert!(hi >= lo - 1e-12);
        let neg = prodnormal::cdf(&params, -x, &cfg).unwrap();
        prop_assert!((neg + lo - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_bias_symmetry(h in 0.2f64..3.0, n in 1u32..=3, w in 0.01f64..3.0) {
        for base in [BaseDist::uniform(-h, h).unwrap(), BaseDist::atoms(&[(-h, 0.5), (h, 0.5)]).unwrap()] {
            let s = ZeroBiasSpec::new(base, n).unwrap();
            let e = zero_bias_cdf(&s, -w).unwrap() + zero_bias_cdf(&s, w).unwrap() - 1.0;
            prop_assert!(e.abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_bias_support_and_unimodality((a, b) in two_point(), n in 1u32..=3, seed in any::<u64>()) {
        let s = ZeroBiasSpec::new(two_point_law(a, b), n).unwrap();
        let xs = zero_bias_n_samples(&s, seed, 2000).unwrap();
        prop_assert!(xs.iter().all(|&x| a <= x && x <= b));
        let right: Vec<f64> = (1..20).map(|i| zero_bias_pdf(&s, b * i as f64 / 20.0).unwrap()).collect();
        let left: Vec<f64> = (1..20).map(|i| zero_bias_pdf(&s, a * i as f64 / 20.0).unwrap()).collect();
        prop_assert!(right.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        prop_assert!(left.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    }

    #[test]
    fn rate_fit_recovers_power(c in 0.01f64..10.0, p in -2.0f64..-0.1, m0 in 2.0f64..20.0, ratio in 2.0f64..5.0, k in 3usize..7) {
        let pts: Vec<(f64, MeanSe)> = (0..k).map(|i| {
            let m = m0 * ratio.powi(i as i32);
            (m, MeanSe { mean: c * m.powf(p), se: 0.0 })
        }).collect();
        let f = rate_fit(&pts).unwrap();
        prop_assert!((f.slope - p).abs() < 1e-10);
        prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stein_residual_vanishes(
        name in prop::sample::select(vec!["sin", "cos", "tanh-scaled", "gaussian-bump", "arctan", "lorentzian"]),
        sigma in 0.5f64..2.0,
        x in 1e-3f64..20.0,
        neg in any::<bool>(),
    ) {
        let sol = SteinSol2::new(TestFn::named(name).unwrap(), sigma).unwrap();
        let x = if neg { -x } else { x };
        let r = sol.residual(x).unwrap();
        prop_assert!(r.abs() <= 1e-6 * sol.h_tilde_sup().max(1.0), "{name} σ={sigma} x={x}: {r}");
    }
}
