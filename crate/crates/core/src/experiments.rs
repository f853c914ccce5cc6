//! Monte Carlo checks of the product-statistic approximation bounds.
//!
//! W = W₁W₂/√(mn) with W₁ = X₁+…+X_m and W₂ = Y₁+…+Y_n. Each replication
//! draws (W, W*) from the product coupling, so one pass feeds the
//! distance estimate |E h(W) − PN₂¹h| and every coupling term.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, Rng};
use crate::stats::{ols, MeanAcc, MeanSe, OriginRegAcc};
use crate::testfns::TestFn;
use crate::zerobias::{
    product_zero_bias_coupling, rademacher_sum_coupling, sum_zero_bias_coupling, BaseDist, BaseKind,
    RADEMACHER_FAST_MAX,
};

/// Smallest accepted replication count.
pub const MIN_REPS: usize = 10_000;
// exact E h(W) is computed when the joint support is at most this large
const EXACT_MAX_ATOMS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PnReference {
    /// Quadrature against the K0 density.
    Quadrature,
    /// Closed forms where known (odd h, cos, constant), else quadrature.
    ClosedForm,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub base_x: BaseDist,
    pub base_y: BaseDist,
    pub h: TestFn,
    pub reps: usize,
    pub seed: u64,
    pub pn_reference: PnReference,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(Error::Invalid(format!("factor sizes must be at least 2, got m={} n={}", self.m, self.n)));
        }
        if self.reps < MIN_REPS {
            return Err(Error::Invalid(format!("reps must be at least {MIN_REPS}, got {}", self.reps)));
        }
        for b in [&self.base_x, &self.base_y] {
            if (b.variance() - 1.0).abs() > 1e-9 {
                return Err(Error::Invalid(format!("{b}: base laws must have unit variance, got {}", b.variance())));
            }
        }
        if !self.h.is_bounded() {
            return Err(Error::Invalid(format!("test function {} must be bounded", self.h.name)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Conclusive only when 4 SE is inside the gap between estimate and bound.
    pub fn judge(estimate: MeanSe, bound: f64) -> Verdict {
        let gap = bound - estimate.mean;
        // an exact (zero-variance) estimate on the bound is a pass
        if gap > 4.0 * estimate.se || (estimate.se == 0.0 && gap >= 0.0) {
            Verdict::Pass
        } else if -gap > 4.0 * estimate.se {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Cor42,
    Cor43,
    Coupling,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    pub m: usize,
    pub n: usize,
    pub base_x: String,
    pub base_y: String,
    pub h: String,
    pub reps: usize,
    pub seed: u64,
    pub pn_reference: f64,
    /// |E h(W) − PN₂¹h| with its MC standard error.
    pub lhs: MeanSe,
    /// The same distance from exact enumeration, for finite-support bases.
    pub exact_lhs: Option<f64>,
    /// E|W − W*|.
    pub coupling_l1: MeanSe,
    /// E(W − W*)².
    pub coupling_l2: MeanSe,
    /// Regression coefficient of W − W* on W.
    pub conditional_coefficient: MeanSe,
    /// √E[E(W − W* | W₁, W₂)²].
    pub conditional_term: MeanSe,
    /// 1/m + 1/n − 1/(mn).
    pub conditional_expected: f64,
    /// Bound right-hand side; for the coupling run, the bound on E|W − W*|.
    pub bound_value: f64,
    pub verdict: Verdict,
    pub pass: bool,
    /// 7(1/m + 1/n) E X⁴ E Y⁴, reported with the coupling terms.
    pub l2_bound: f64,
    #[serde(skip)]
    pub runtime_s: f64,
}

/// PN₂¹h under the chosen reference method.
pub fn pn_reference(h: &TestFn, method: PnReference) -> Result<f64> {
    if method == PnReference::ClosedForm {
        match h.name.as_str() {
            "cos" => return Ok(std::f64::consts::FRAC_1_SQRT_2),
            "sin" | "tanh-scaled" | "arctan" | "identity" => return Ok(0.0),
            "constant" => return Ok(1.0),
            _ => {}
        }
    }
    h.pn2_expectation(1.0)
}

fn is_rademacher(b: &BaseDist) -> bool {
    match b.kind() {
        BaseKind::Atoms(l) => {
            let v: Vec<(f64, f64)> = l.atoms().collect();
            v == [(-1.0, 0.5), (1.0, 0.5)]
        }
        _ => false,
    }
}

struct Sampler {
    fast_x: bool,
    fast_y: bool,
    xs: Vec<BaseDist>,
    ys: Vec<BaseDist>,
    m: usize,
    n: usize,
    norm: f64,
}

impl Sampler {
    fn new(cfg: &ExperimentConfig) -> Sampler {
        let fast_x = is_rademacher(&cfg.base_x) && cfg.m <= RADEMACHER_FAST_MAX;
        let fast_y = is_rademacher(&cfg.base_y) && cfg.n <= RADEMACHER_FAST_MAX;
        Sampler {
            fast_x,
            fast_y,
            xs: if fast_x { vec![] } else { vec![cfg.base_x.clone(); cfg.m] },
            ys: if fast_y { vec![] } else { vec![cfg.base_y.clone(); cfg.n] },
            m: cfg.m,
            n: cfg.n,
            norm: 1.0 / ((cfg.m * cfg.n) as f64).sqrt(),
        }
    }

    fn factor(fast: bool, size: usize, summands: &[BaseDist], rng: &mut Rng) -> Result<(f64, f64)> {
        if fast {
            let (w, ws, _) = rademacher_sum_coupling(size, rng);
            Ok((w, ws))
        } else {
            let d = sum_zero_bias_coupling(summands, rng)?;
            Ok((d.w, d.w_star))
        }
    }

    /// (W, W*) normalized by 1/√(mn).
    fn draw(&self, rng: &mut Rng) -> Result<(f64, f64)> {
        let (a, a_star) = Self::factor(self.fast_x, self.m, &self.xs, rng)?;
        let (b, b_star) = Self::factor(self.fast_y, self.n, &self.ys, rng)?;
        Ok((a * b * self.norm, a_star * b_star * self.norm))
    }
}

#[derive(Default, Clone, Copy)]
struct Accs {
    h: MeanAcc,
    l1: MeanAcc,
    l2: MeanAcc,
    reg: OriginRegAcc,
}

impl Accs {
    fn merge(&mut self, o: &Accs) {
        self.h.merge(&o.h);
        self.l1.merge(&o.l1);
        self.l2.merge(&o.l2);
        self.reg.merge(&o.reg);
    }
}

fn simulate(cfg: &ExperimentConfig, reference: f64) -> Result<Accs> {
    let sampler = Sampler::new(cfg);
    let chunks = par::chunks(cfg.reps);
    let parts = par::map_indexed(chunks.len(), |i| -> Result<Accs> {
        let (k, len) = chunks[i];
        let mut r = rng::stream(cfg.seed, k as u64);
        let mut a = Accs::default();
        for _ in 0..len {
            let (w, ws) = sampler.draw(&mut r)?;
            let d = w - ws;
            a.h.push(cfg.h.value(w) - reference);
            a.l1.push(d.abs());
            a.l2.push(d * d);
            a.reg.push(w, d);
        }
        Ok(a)
    });
    let mut total = Accs::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

/// |E h(W) − PN₂¹h| by enumerating both factor laws, when they are finite.
pub fn exact_lhs(cfg: &ExperimentConfig, reference: f64) -> Option<f64> {
    let wx = BaseDist::iid_sum(cfg.base_x.clone(), cfg.m, false).ok()?.as_atoms()?;
    let wy = BaseDist::iid_sum(cfg.base_y.clone(), cfg.n, false).ok()?.as_atoms()?;
    if wx.len() * wy.len() > EXACT_MAX_ATOMS {
        return None;
    }
    let norm = 1.0 / ((cfg.m * cfg.n) as f64).sqrt();
    let mut acc = crate::stats::KahanSum::new();
    for (a, p) in wx.atoms() {
        for (b, q) in wy.atoms() {
            acc.add(p * q * (cfg.h.value(a * b * norm) - reference));
        }
    }
    Some(acc.value().abs())
}

fn sup_tilde(h: &TestFn, reference: f64) -> f64 {
    h.sup_centered(reference)
}

/// (13/8)(1/√m + 1/√n) E|X|³ E|Y|³.
pub fn l1_bound(cfg: &ExperimentConfig) -> Result<f64> {
    let (m, n) = (cfg.m as f64, cfg.n as f64);
    Ok(13.0 / 8.0 * (1.0 / m.sqrt() + 1.0 / n.sqrt()) * cfg.base_x.abs_moment(3)? * cfg.base_y.abs_moment(3)?)
}

/// Right-hand side of the third-moment bound.
pub fn bound_cor42(cfg: &ExperimentConfig, reference: f64) -> Result<f64> {
    let coeff = cfg.h.sup_deriv(1) + 4.5 * sup_tilde(&cfg.h, reference);
    Ok(l1_bound(cfg)? * coeff)
}

/// Right-hand side of the fourth-moment bound.
pub fn bound_cor43(cfg: &ExperimentConfig, reference: f64) -> Result<f64> {
    let (m, n) = (cfg.m as f64, cfg.n as f64);
    let coeff = 3.5 * cfg.h.sup_deriv(2) + cfg.h.sup_deriv(1) + 30.75 * sup_tilde(&cfg.h, reference);
    Ok((1.0 / m + 1.0 / n) * coeff * cfg.base_x.moment(4)? * cfg.base_y.moment(4)?)
}

fn run(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport> {
    cfg.validate()?;
    if kind == ExperimentKind::Cor43 {
        for b in [&cfg.base_x, &cfg.base_y] {
            if b.moment(3)?.abs() > 1e-12 {
                return Err(Error::Invalid(format!("{b}: the fourth-moment bound needs E X³ = 0")));
            }
        }
    }
    let start = Instant::now();
    let reference = pn_reference(&cfg.h, cfg.pn_reference)?;
    let acc = simulate(cfg, reference)?;
    let h = acc.h.mean_se();
    let lhs = MeanSe { mean: h.mean.abs(), se: h.se };
    let coef = acc.reg.coefficient();
    let root = acc.reg.mean_xx().sqrt();
    let (m, n) = (cfg.m as f64, cfg.n as f64);
    let l1 = acc.l1.mean_se();
    let bound_value = match kind {
        ExperimentKind::Cor42 => bound_cor42(cfg, reference)?,
        ExperimentKind::Cor43 => bound_cor43(cfg, reference)?,
        ExperimentKind::Coupling => l1_bound(cfg)?,
    };
    let judged = if kind == ExperimentKind::Coupling { l1 } else { lhs };
    let verdict = Verdict::judge(judged, bound_value);
    Ok(ExperimentReport {
        kind,
        m: cfg.m,
        n: cfg.n,
        base_x: cfg.base_x.label().to_string(),
        base_y: cfg.base_y.label().to_string(),
        h: cfg.h.name.clone(),
        reps: cfg.reps,
        seed: cfg.seed,
        pn_reference: reference,
        lhs,
        exact_lhs: if kind == ExperimentKind::Coupling { None } else { exact_lhs(cfg, reference) },
        coupling_l1: l1,
        coupling_l2: acc.l2.mean_se(),
        conditional_coefficient: coef,
        conditional_term: MeanSe { mean: coef.mean * root, se: coef.se * root },
        conditional_expected: 1.0 / m + 1.0 / n - 1.0 / (m * n),
        bound_value,
        verdict,
        pass: verdict == Verdict::Pass,
        l2_bound: 7.0 * (1.0 / m + 1.0 / n) * cfg.base_x.moment(4)? * cfg.base_y.moment(4)?,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Third-moment bound check.
pub fn run_corollary_4_2(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, ExperimentKind::Cor42)
}

/// Fourth-moment bound check for symmetric bases.
pub fn run_corollary_4_3(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, ExperimentKind::Cor43)
}

/// Coupling terms alone; the verdict compares E|W − W*| with its bound.
pub fn estimate_coupling_terms(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run(cfg, ExperimentKind::Coupling)
}

/// The same experiment at m = n = each size, all on the configured seed so
/// the runs share random numbers.
pub fn run_ladder(cfg: &ExperimentConfig, sizes: &[usize], kind: ExperimentKind) -> Result<Vec<ExperimentReport>> {
    sizes
        .iter()
        .map(|&s| {
            let c = ExperimentConfig { m: s, n: s, ..cfg.clone() };
            run(&c, kind)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
}

/// OLS of log lhs on log m; the slope SE propagates each point's relative
/// MC error (se/lhs) through the linear slope weights.
pub fn rate_fit(points: &[(f64, MeanSe)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Invalid(format!("rate fit needs at least 3 sizes, got {}", points.len())));
    }
    if points.iter().any(|(m, l)| !(*m > 0.0) || !(l.mean > 0.0)) {
        return Err(Error::Invalid("rate fit needs positive sizes and estimates".into()));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.mean.ln()).collect();
    let (slope, intercept) = ols(&x, &y)?;
    let mx = x.iter().sum::<f64>() / x.len() as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let var: f64 = points.iter().zip(&x).map(|((_, l), xi)| ((xi - mx) / sxx).powi(2) * (l.se / l.mean).powi(2)).sum();
    Ok(RateFit { slope, slope_se: var.sqrt(), intercept })
}

/// The first `rows` replications as (w, w_star, h(w)); identical to the
/// draws inside the corresponding run.
pub fn coupling_rows(cfg: &ExperimentConfig, rows: usize) -> Result<Vec<(f64, f64, f64)>> {
    let sampler = Sampler::new(cfg);
    let chunks = par::chunks(rows.min(cfg.reps));
    let parts = par::map_indexed(chunks.len(), |i| -> Result<Vec<(f64, f64, f64)>> {
        let (k, len) = chunks[i];
        let mut r = rng::stream(cfg.seed, k as u64);
        (0..len)
            .map(|_| {
                let (w, ws) = sampler.draw(&mut r)?;
                Ok((w, ws, cfg.h.value(w)))
            })
            .collect()
    });
    Ok(parts.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

pub fn write_csv(rows: &[(f64, f64, f64)], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "w,w_star,h_w")?;
    for (w, ws, h) in rows {
        writeln!(out, "{w:e},{ws:e},{h:e}")?;
    }
    Ok(())
}

/// Generic-path coupling for factors given as summand lists; used when the
/// caller wants replacement metadata.
pub fn coupling_draw(factors: &[Vec<BaseDist>], rng: &mut Rng) -> Result<crate::zerobias::CouplingDraw> {
    product_zero_bias_coupling(factors, rng)
}
