use pnstein::experiments::*;
use pnstein::stats::MeanSe;
use pnstein::testfns::TestFn;
use pnstein::zerobias::BaseDist;

fn cfg(m: usize, base: BaseDist, h: &str, reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        m,
        n: m,
        base_x: base.clone(),
        base_y: base,
        h: TestFn::named(h).unwrap(),
        reps,
        seed: 20140917,
        pn_reference: PnReference::Quadrature,
    }
}

fn rad(m: usize, h: &str, reps: usize) -> ExperimentConfig {
    cfg(m, BaseDist::rademacher(), h, reps)
}

fn uniform3() -> BaseDist {
    BaseDist::uniform(-3f64.sqrt(), 3f64.sqrt()).unwrap()
}

// |Σ_{a,b} P(B₁=a)P(B₂=b) h((2a−m)(2b−m)/m) − ref| with binomial weights
fn rademacher_exact(m: usize, h: &dyn Fn(f64) -> f64, reference: f64) -> f64 {
    let mut w = vec![1.0f64];
    for _ in 0..m {
        let mut next = vec![0.0; w.len() + 1];
        for (i, p) in w.iter().enumerate() {
            next[i] += 0.5 * p;
            next[i + 1] += 0.5 * p;
        }
        w = next;
    }
    let mut s = 0.0;
    for (a, p) in w.iter().enumerate() {
        for (b, q) in w.iter().enumerate() {
            let x = (2 * a) as f64 - m as f64;
            let y = (2 * b) as f64 - m as f64;
            s += p * q * (h(x * y / m as f64) - reference);
        }
    }
    s.abs()
}

#[test]
fn cor42_rademacher() {
    let r = run_corollary_4_2(&rad(64, "sin", 1_000_000)).unwrap();
    assert_eq!(r.pn_reference.abs(), 0.0);
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.lhs.mean + 4.0 * r.lhs.se < r.bound_value);
    // E|X|³ = 1, ‖h'‖ = 1, ‖h − 0‖ = 1
    let want = 13.0 / 8.0 * (2.0 / 8.0) * (1.0 + 4.5);
    assert!((r.bound_value - want).abs() < 1e-14);
}

#[test]
fn cor42_bound_arithmetic() {
    let b = |m| bound_cor42(&rad(m, "sin", 10_000), 0.0).unwrap();
    assert!((b(16) / b(64) - 2.0).abs() < 1e-14);
    assert!((b(25) - 2.0 * 13.0 / 8.0 / 5.0 * 5.5).abs() < 1e-14);
    // uniform(−√3, √3): E|X|³ = 3√3/4
    let c = cfg(100, uniform3(), "cos", 10_000);
    let e3 = 3.0 * 3f64.sqrt() / 4.0;
    assert!((l1_bound(&c).unwrap() - 13.0 / 8.0 * 0.2 * e3 * e3).abs() < 1e-13);
}

#[test]
fn cor42_uniform_bases() {
    let r = run_corollary_4_2(&cfg(100, uniform3(), "cos", 200_000)).unwrap();
    assert_eq!(r.verdict, Verdict::Pass);
    assert!(r.exact_lhs.is_none());
}

#[test]
fn cor43_rademacher() {
    let c = rad(64, "cos", 1_000_000);
    let r = run_corollary_4_3(&c).unwrap();
    assert!((r.pn_reference - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
    assert_eq!(r.verdict, Verdict::Pass);
    let closed = pn_reference(&TestFn::named("cos").unwrap(), PnReference::ClosedForm).unwrap();
    assert_eq!(closed, std::f64::consts::FRAC_1_SQRT_2);
    // exact enumeration against a binomial oracle, MC against both
    let exact = rademacher_exact(64, &|x| x.cos(), r.pn_reference);
    assert!((r.exact_lhs.unwrap() - exact).abs() < 1e-12);
    assert!(r.lhs.within(exact, 4.0), "{:?} vs {exact}", r.lhs);
}

#[test]
fn constant_h_has_zero_lhs() {
    let r = run_corollary_4_3(&rad(16, "constant", 10_000)).unwrap();
    assert_eq!(r.lhs.mean, 0.0);
    assert_eq!(r.exact_lhs, Some(0.0));
    assert_eq!(r.verdict, Verdict::Pass);
}

#[test]
fn coupling_identities() {
    let r = estimate_coupling_terms(&rad(25, "cos", 1_000_000)).unwrap();
    let want = 2.0 / 25.0 - 1.0 / 625.0;
    assert!((r.conditional_expected - want).abs() < 1e-15);
    assert!(r.conditional_coefficient.within(want, 4.0), "{:?}", r.conditional_coefficient);
    assert_eq!(r.verdict, Verdict::Pass);

    let r = estimate_coupling_terms(&rad(4, "cos", 200_000)).unwrap();
    assert!((r.l2_bound - 7.0 * 0.5).abs() < 1e-15);
    assert!(r.coupling_l2.mean + 4.0 * r.coupling_l2.se < r.l2_bound);

    let r = estimate_coupling_terms(&rad(2, "cos", 10_000)).unwrap();
    for v in [r.coupling_l1.mean, r.coupling_l2.mean, r.conditional_term.mean, r.lhs.mean] {
        assert!(v.is_finite());
    }
}

#[test]
fn rate_fit_recovers_synthetic_slopes() {
    let exact = |p: f64| -> Vec<(f64, MeanSe)> {
        [16.0f64, 64.0, 256.0, 1024.0].iter().map(|&m| (m, MeanSe { mean: 0.3 * m.powf(p), se: 0.0 })).collect()
    };
    let f = rate_fit(&exact(-1.0)).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-12 && f.slope_se == 0.0);
    assert!((f.intercept - 0.3f64.ln()).abs() < 1e-12);
    assert!((rate_fit(&exact(-0.5)).unwrap().slope + 0.5).abs() < 1e-12);
    assert!(rate_fit(&exact(-1.0)[..2]).is_err());
    // relative errors of 10% at each end propagate to a nonzero slope SE
    let noisy: Vec<(f64, MeanSe)> = exact(-1.0).into_iter().map(|(m, l)| (m, MeanSe { se: 0.1 * l.mean, ..l })).collect();
    assert!(rate_fit(&noisy).unwrap().slope_se > 0.0);
}

#[test]
fn cor43_exact_rate() {
    // enumeration removes MC noise; the order m^{-1} shows up directly
    let pts: Vec<(f64, MeanSe)> = [16usize, 64, 256]
        .iter()
        .map(|&m| (m as f64, MeanSe { mean: rademacher_exact(m, &|x| x.cos(), std::f64::consts::FRAC_1_SQRT_2), se: 0.0 }))
        .collect();
    let f = rate_fit(&pts).unwrap();
    assert!((-1.3..=-0.6).contains(&f.slope), "{f:?}");
}

#[test]
fn ladders_share_seed_and_reproduce() {
    let c = rad(8, "cos", 20_000);
    let a = run_ladder(&c, &[4, 8], ExperimentKind::Cor43).unwrap();
    let b = run_ladder(&c, &[4, 8], ExperimentKind::Cor43).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(format!("{:?}", x.lhs), format!("{:?}", y.lhs));
        assert_eq!(x.coupling_l1, y.coupling_l1);
        assert_eq!(x.conditional_coefficient, y.conditional_coefficient);
    }
    let single = run_corollary_4_3(&ExperimentConfig { m: 8, n: 8, ..c.clone() }).unwrap();
    assert_eq!(single.lhs, a[1].lhs);
    let rows = coupling_rows(&c, 50).unwrap();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 51);
}

#[test]
fn invalid_configurations() {
    assert!(run_corollary_4_2(&rad(1, "cos", 10_000)).is_err());
    assert!(run_corollary_4_2(&rad(8, "cos", 9_999)).is_err());
    assert!(run_corollary_4_2(&cfg(8, BaseDist::gaussian(2.0).unwrap(), "cos", 10_000)).is_err());
    assert!(run_corollary_4_2(&rad(8, "identity", 10_000)).is_err());
    // unit variance but E X³ ≠ 0
    let s = 2f64.sqrt();
    let skew = BaseDist::atoms(&[(-1.0 / s, 2.0 / 3.0), (s, 1.0 / 3.0)]).unwrap();
    assert!(run_corollary_4_2(&cfg(8, skew.clone(), "cos", 10_000)).is_ok());
    assert!(run_corollary_4_3(&cfg(8, skew, "cos", 10_000)).is_err());
}

#[test]
fn verdict_policy() {
    let e = |mean, se| MeanSe { mean, se };
    assert_eq!(Verdict::judge(e(0.1, 0.01), 1.0), Verdict::Pass);
    assert_eq!(Verdict::judge(e(0.98, 0.01), 1.0), Verdict::Inconclusive);
    assert_eq!(Verdict::judge(e(1.5, 0.01), 1.0), Verdict::Fail);
    assert_eq!(Verdict::judge(e(1.0, 0.0), 1.0), Verdict::Pass);
}
