//! Zero-bias transforms of order n.
//!
//! W^{*(n)} is the law with E W f(W) = σ² E A_n f(W^{*(n)}). It factors as
//! V_n · W^□ where V_n is a product of n independent uniforms and W^□ is the
//! square-bias (w²-tilted) law of W, which gives the samplers here. Closed
//! cdf/pdf formulas are expectations over W of incomplete-gamma and
//! log-power kernels.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::quad::{integrate, Tol};
use crate::rng::{self, Rng};
use crate::specfun::lower_incomplete_gamma;
use crate::stats::{ks_critical_two_sample, ks_two_sample};

/// Convolutions of finite laws stop here.
pub const MAX_ATOMS: usize = 1_000_000;
/// Relative tolerance of the quadratures behind cdf, pdf and expectations.
pub const QUAD_TOL: f64 = 1e-12;
// continuous laws are integrated over ±this many standard deviations
const GAUSS_SPAN: f64 = 40.0;

/// A finite law with cumulative tables for plain and w²-tilted draws.
#[derive(Debug, Clone)]
pub struct AtomLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
    sq_cum: Vec<f64>,
}

impl AtomLaw {
    /// Atoms (value, probability); equal values are merged.
    pub fn new(atoms: &[(f64, f64)]) -> Result<AtomLaw> {
        if atoms.is_empty() {
            return Err(Error::Invalid("a finite law needs at least one atom".into()));
        }
        let mut merged: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for &(v, p) in atoms {
            if !v.is_finite() || !(p >= 0.0) {
                return Err(Error::Invalid(format!("bad atom ({v}, {p})")));
            }
            // order-preserving key for finite floats
            let bits = v.to_bits();
            let key = if v < 0.0 { !bits } else { bits | (1 << 63) };
            merged.entry(key).or_insert((v, 0.0)).1 += p;
        }
        let total: f64 = merged.values().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        let (values, probs): (Vec<f64>, Vec<f64>) = merged.into_values().filter(|a| a.1 > 0.0).unzip();
        let second: f64 = values.iter().zip(&probs).map(|(v, p)| v * v * p).sum();
        let mut cum = Vec::with_capacity(values.len());
        let mut sq_cum = Vec::with_capacity(values.len());
        let (mut c, mut s) = (0.0, 0.0);
        for (v, p) in values.iter().zip(&probs) {
            c += p / total;
            s += v * v * p / second;
            cum.push(c);
            sq_cum.push(s);
        }
        Ok(AtomLaw { values, probs, cum, sq_cum })
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn pick(table: &[f64], u: f64) -> usize {
        table.partition_point(|&c| c < u).min(table.len() - 1)
    }

    fn draw(&self, rng: &mut Rng) -> f64 {
        self.values[Self::pick(&self.cum, rng::open01(rng))]
    }

    fn square_bias_draw(&self, rng: &mut Rng) -> f64 {
        self.values[Self::pick(&self.sq_cum, rng::open01(rng))]
    }

    /// Square-bias law as atoms.
    pub fn square_bias(&self) -> Result<AtomLaw> {
        let second: f64 = self.atoms().map(|(v, p)| v * v * p).sum();
        if second <= 0.0 {
            return Err(Error::Invalid("square bias needs a nonzero second moment".into()));
        }
        AtomLaw::new(&self.atoms().map(|(v, p)| (v, v * v * p / second)).collect::<Vec<_>>())
    }

    fn convolve(&self, other: &AtomLaw) -> Result<AtomLaw> {
        if self.len() * other.len() > MAX_ATOMS * 64 {
            return Err(Error::Invalid("convolution exceeds the atom budget".into()));
        }
        let mut out = Vec::with_capacity(self.len() * other.len());
        for (a, p) in self.atoms() {
            for (b, q) in other.atoms() {
                out.push((a + b, p * q));
            }
        }
        let law = AtomLaw::new(&out)?;
        if law.len() > MAX_ATOMS {
            return Err(Error::Invalid(format!("convolution has {} atoms, above {MAX_ATOMS}", law.len())));
        }
        Ok(law)
    }

    fn scaled(&self, c: f64) -> Result<AtomLaw> {
        AtomLaw::new(&self.atoms().map(|(v, p)| (c * v, p)).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone)]
pub enum BaseKind {
    Atoms(AtomLaw),
    Gaussian { sigma: f64 },
    /// U(−h, h); mean zero forces symmetry.
    Uniform { half_width: f64 },
    IidSum { inner: Box<BaseDist>, count: usize, standardize: bool, exact: Option<AtomLaw> },
    Product(Vec<BaseDist>),
    Scaled { inner: Box<BaseDist>, c: f64 },
}

/// A mean-zero law with finite nonzero variance.
#[derive(Debug, Clone)]
pub struct BaseDist {
    kind: BaseKind,
    variance: f64,
    label: String,
}

impl fmt::Display for BaseDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn double_factorial_odd(k: u32) -> f64 {
    // (k−1)!! for even k
    (1..k).step_by(2).map(|i| i as f64).product()
}

impl BaseDist {
    fn build(kind: BaseKind, label: String) -> Result<BaseDist> {
        let mut d = BaseDist { kind, variance: 0.0, label };
        let mean = d.moment(1)?;
        let var = d.moment(2)?;
        if !(var > 0.0 && var.is_finite()) {
            return Err(Error::Invalid(format!("{}: variance must be finite and positive, got {var}", d.label)));
        }
        if mean.abs() > 1e-9 * var.sqrt() {
            return Err(Error::Invalid(format!("{}: mean must be zero, got {mean}", d.label)));
        }
        d.variance = var;
        Ok(d)
    }

    pub fn atoms(atoms: &[(f64, f64)]) -> Result<BaseDist> {
        let law = AtomLaw::new(atoms)?;
        let label = format!(
            "atoms:{}",
            law.atoms().map(|(v, p)| format!("{v}@{p}")).collect::<Vec<_>>().join(",")
        );
        BaseDist::build(BaseKind::Atoms(law), label)
    }

    pub fn rademacher() -> BaseDist {
        let law = AtomLaw::new(&[(-1.0, 0.5), (1.0, 0.5)]).expect("valid atoms");
        BaseDist { kind: BaseKind::Atoms(law), variance: 1.0, label: "rademacher".into() }
    }

    pub fn gaussian(sigma: f64) -> Result<BaseDist> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Invalid(format!("gaussian scale must be positive, got {sigma}")));
        }
        BaseDist::build(BaseKind::Gaussian { sigma }, format!("gaussian:{sigma}"))
    }

    /// U(a, b); only a = −b is mean zero.
    pub fn uniform(a: f64, b: f64) -> Result<BaseDist> {
        if !(b > a) || (a + b).abs() > 1e-12 * (b - a) {
            return Err(Error::Invalid(format!("uniform({a}, {b}) is not a mean-zero law")));
        }
        let h = 0.5 * (b - a);
        BaseDist::build(BaseKind::Uniform { half_width: h }, format!("uniform:{h}"))
    }

    /// X_1 + … + X_m, divided by √(m·Var X) when `standardize`.
    pub fn iid_sum(inner: BaseDist, count: usize, standardize: bool) -> Result<BaseDist> {
        if count == 0 {
            return Err(Error::Invalid("iid sum needs at least one summand".into()));
        }
        let exact = match &inner.kind {
            BaseKind::Atoms(law) => {
                let mut acc = law.clone();
                let mut ok = true;
                for _ in 1..count {
                    match acc.convolve(law) {
                        Ok(next) => acc = next,
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && standardize {
                    Some(acc.scaled(1.0 / (count as f64 * inner.variance).sqrt())?)
                } else if ok {
                    Some(acc)
                } else {
                    None
                }
            }
            _ => None,
        };
        let label = format!("sum:{count}{}:{}", if standardize { "" } else { "raw" }, inner.label);
        BaseDist::build(BaseKind::IidSum { inner: Box::new(inner), count, standardize, exact }, label)
    }

    pub fn product(factors: Vec<BaseDist>) -> Result<BaseDist> {
        if factors.is_empty() {
            return Err(Error::Invalid("product needs at least one factor".into()));
        }
        let label = format!("product({})", factors.iter().map(|f| f.label.as_str()).collect::<Vec<_>>().join(";"));
        BaseDist::build(BaseKind::Product(factors), label)
    }

    /// The PN(n, σ²) law as a product of normals.
    pub fn product_normal(n: u32, sigma: f64) -> Result<BaseDist> {
        let mut f = vec![BaseDist::gaussian(sigma)?];
        f.extend((1..n).map(|_| BaseDist::gaussian(1.0).expect("unit gaussian")));
        let mut d = BaseDist::product(f)?;
        d.label = format!("pn:{n}:{sigma}");
        Ok(d)
    }

    /// Law of cW.
    pub fn scaled(&self, c: f64) -> Result<BaseDist> {
        if !(c != 0.0 && c.is_finite()) {
            return Err(Error::Invalid(format!("scale factor must be finite and nonzero, got {c}")));
        }
        BaseDist::build(BaseKind::Scaled { inner: Box::new(self.clone()), c }, format!("{c}*{}", self.label))
    }

    pub fn kind(&self) -> &BaseKind {
        &self.kind
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Exact finite-support form when one exists.
    pub fn as_atoms(&self) -> Option<AtomLaw> {
        match &self.kind {
            BaseKind::Atoms(l) => Some(l.clone()),
            BaseKind::IidSum { exact, .. } => exact.clone(),
            BaseKind::Scaled { inner, c } => inner.as_atoms().and_then(|l| l.scaled(*c).ok()),
            _ => None,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            BaseKind::Atoms(l) => {
                let v: Vec<(f64, f64)> = l.atoms().collect();
                v.iter().zip(v.iter().rev()).all(|(a, b)| (a.0 + b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12)
            }
            BaseKind::Gaussian { .. } | BaseKind::Uniform { .. } => true,
            BaseKind::IidSum { inner, .. } => inner.is_symmetric(),
            BaseKind::Product(f) => f.iter().any(|d| d.is_symmetric()),
            BaseKind::Scaled { inner, .. } => inner.is_symmetric(),
        }
    }

    /// E W^k.
    pub fn moment(&self, k: u32) -> Result<f64> {
        Ok(match &self.kind {
            BaseKind::Atoms(l) => l.atoms().map(|(v, p)| p * v.powi(k as i32)).sum(),
            BaseKind::Gaussian { sigma } => {
                if k % 2 == 1 {
                    0.0
                } else {
                    sigma.powi(k as i32) * double_factorial_odd(k)
                }
            }
            BaseKind::Uniform { half_width: h } => {
                if k % 2 == 1 {
                    0.0
                } else {
                    h.powi(k as i32) / (k + 1) as f64
                }
            }
            BaseKind::IidSum { inner, count, standardize, .. } => {
                let base: Vec<f64> = (0..=k).map(|j| inner.moment(j)).collect::<Result<_>>()?;
                let mut acc = base.clone();
                for _ in 1..*count {
                    acc = (0..=k as usize)
                        .map(|r| (0..=r).map(|j| binom(r as u32, j as u32) * acc[j] * base[r - j]).sum())
                        .collect();
                }
                let s = if *standardize { (*count as f64 * inner.moment(2)?).sqrt() } else { 1.0 };
                acc[k as usize] / s.powi(k as i32)
            }
            BaseKind::Product(f) => f.iter().map(|d| d.moment(k)).product::<Result<f64>>()?,
            BaseKind::Scaled { inner, c } => c.powi(k as i32) * inner.moment(k)?,
        })
    }

    /// E |W|^k.
    pub fn abs_moment(&self, k: u32) -> Result<f64> {
        if k % 2 == 0 {
            return self.moment(k);
        }
        Ok(match &self.kind {
            BaseKind::Atoms(l) => l.atoms().map(|(v, p)| p * v.abs().powi(k as i32)).sum(),
            BaseKind::Gaussian { sigma } => {
                // σ^k 2^{k/2} Γ((k+1)/2)/√π, with k odd so Γ((k+1)/2) = ((k−1)/2)!
                let half: f64 = (1..=(k - 1) / 2).map(|i| i as f64).product();
                sigma.powi(k as i32) * 2f64.powf(k as f64 / 2.0) * half / std::f64::consts::PI.sqrt()
            }
            BaseKind::Uniform { half_width: h } => h.powi(k as i32) / (k + 1) as f64,
            BaseKind::IidSum { exact: Some(l), .. } => l.atoms().map(|(v, p)| p * v.abs().powi(k as i32)).sum(),
            BaseKind::IidSum { .. } => {
                return Err(Error::Invalid("odd absolute moments of this sum have no closed form".into()))
            }
            BaseKind::Product(f) => f.iter().map(|d| d.abs_moment(k)).product::<Result<f64>>()?,
            BaseKind::Scaled { inner, c } => c.abs().powi(k as i32) * inner.abs_moment(k)?,
        })
    }

    pub fn draw(&self, rng: &mut Rng) -> f64 {
        match &self.kind {
            BaseKind::Atoms(l) => l.draw(rng),
            BaseKind::Gaussian { sigma } => sigma * rng::std_normal(rng),
            BaseKind::Uniform { half_width: h } => h * (2.0 * rng::open01(rng) - 1.0),
            BaseKind::IidSum { inner, count, standardize, .. } => {
                let s: f64 = (0..*count).map(|_| inner.draw(rng)).sum();
                if *standardize {
                    s / (*count as f64 * inner.variance).sqrt()
                } else {
                    s
                }
            }
            BaseKind::Product(f) => f.iter().map(|d| d.draw(rng)).product(),
            BaseKind::Scaled { inner, c } => c * inner.draw(rng),
        }
    }

    /// One draw of W^□, the law with density ∝ w² relative to W.
    pub fn square_bias_draw(&self, rng: &mut Rng) -> Result<f64> {
        Ok(match &self.kind {
            BaseKind::Atoms(l) => l.square_bias_draw(rng),
            BaseKind::Gaussian { sigma } => {
                // the w²-tilted normal is a chi(3) magnitude with a random sign
                let r = (0..3).map(|_| rng::std_normal(rng).powi(2)).sum::<f64>().sqrt();
                sigma * r * rng::rademacher(rng)
            }
            BaseKind::Uniform { half_width: h } => {
                // tilted cdf (w³ + h³)/(2h³)
                h * (2.0 * rng::open01(rng) - 1.0).cbrt()
            }
            BaseKind::IidSum { exact: Some(l), .. } => l.square_bias_draw(rng),
            BaseKind::IidSum { .. } => {
                return Err(Error::Invalid(format!(
                    "{}: square bias of an iid sum needs a finite-support summand within {MAX_ATOMS} atoms",
                    self.label
                )))
            }
            BaseKind::Product(f) => {
                let mut p = 1.0;
                for d in f {
                    p *= d.square_bias_draw(rng)?;
                }
                p
            }
            BaseKind::Scaled { inner, c } => c * inner.square_bias_draw(rng)?,
        })
    }

    /// Order-1 zero-bias draw U·W^□.
    pub fn zero_bias_draw(&self, rng: &mut Rng) -> Result<f64> {
        Ok(rng::open01(rng) * self.square_bias_draw(rng)?)
    }

    /// E[f(W); lo ≤ W ≤ hi].
    pub fn expect_on(&self, f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
        if let Some(l) = self.as_atoms() {
            return Ok(l.atoms().filter(|&(v, _)| v >= lo && v <= hi).map(|(v, p)| p * f(v)).sum());
        }
        let (dens, span): (Box<dyn Fn(f64) -> f64>, f64) = match &self.kind {
            BaseKind::Gaussian { sigma } => {
                let s = *sigma;
                let c = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
                (Box::new(move |x: f64| c * (-0.5 * (x / s).powi(2)).exp()), GAUSS_SPAN * s)
            }
            BaseKind::Uniform { half_width: h } => {
                let h = *h;
                (Box::new(move |_| 0.5 / h), h)
            }
            BaseKind::Scaled { inner, c } => {
                let c = *c;
                let (a, b) = if c > 0.0 { (lo / c, hi / c) } else { (hi / c, lo / c) };
                return inner.expect_on(&|w| f(c * w), a, b);
            }
            _ => {
                return Err(Error::Invalid(format!("{}: no exact expectation for this law; use sampling", self.label)))
            }
        };
        let (a, b) = (lo.max(-span), hi.min(span));
        if a >= b {
            return Ok(0.0);
        }
        integrate(|x| dens(x) * f(x), a, b, Tol::new(1e-15, QUAD_TOL)).into_result()
    }
}

/// Parse a base-law string.
///
/// Forms: `rademacher`, `gaussian[:σ]`, `uniform[:h]` for U(−h, h),
/// `atoms:v@p,v@p,...` or `atoms:v,p;v,p;...`, `sum:m:<law>` (standardized iid sum),
/// `pn:n[:σ]` (product of n normals), `scaled:c:<law>`.
pub fn parse_base(s: &str) -> Result<BaseDist> {
    let s = s.trim();
    let (head, rest) = match s.split_once(':') {
        Some((h, r)) => (h, Some(r)),
        None => (s, None),
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}' in '{s}'")));
    let int = |t: &str| t.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad count '{t}' in '{s}'")));
    match (head, rest) {
        ("rademacher", None) => Ok(BaseDist::rademacher()),
        ("gaussian" | "normal", None) => BaseDist::gaussian(1.0),
        ("gaussian" | "normal", Some(r)) => BaseDist::gaussian(num(r)?),
        ("uniform", None) => BaseDist::uniform(-1.0, 1.0),
        ("uniform", Some(r)) => {
            let h = num(r)?;
            BaseDist::uniform(-h, h)
        }
        ("atoms", Some(r)) => {
            // v@p,v@p,... or v,p;v,p;...
            let pairs: Vec<(&str, &str)> = if r.contains('@') {
                r.split(',').map(|a| a.split_once('@').ok_or_else(|| Error::Parse(format!("atom '{a}' is not value@prob")))).collect::<Result<_>>()?
            } else {
                r.split(';').map(|a| a.split_once(',').ok_or_else(|| Error::Parse(format!("atom '{a}' is not value,prob")))).collect::<Result<_>>()?
            };
            let atoms = pairs.into_iter().map(|(v, p)| Ok((num(v)?, num(p)?))).collect::<Result<Vec<_>>>()?;
            BaseDist::atoms(&atoms)
        }
        ("sum", Some(r)) => {
            let (m, inner) = r.split_once(':').ok_or_else(|| Error::Parse(format!("'{s}' should be sum:m:<law>")))?;
            BaseDist::iid_sum(parse_base(inner)?, int(m)?, true)
        }
        ("pn", Some(r)) => {
            let (n, sigma) = match r.split_once(':') {
                Some((n, sg)) => (int(n)?, num(sg)?),
                None => (int(r)?, 1.0),
            };
            BaseDist::product_normal(n as u32, sigma)
        }
        ("scaled", Some(r)) => {
            let (c, inner) = r.split_once(':').ok_or_else(|| Error::Parse(format!("'{s}' should be scaled:c:<law>")))?;
            parse_base(inner)?.scaled(num(c)?)
        }
        _ => Err(Error::Parse(format!(
            "unknown law '{s}'; expected rademacher, gaussian[:s], uniform[:h], atoms:v@p,..., sum:m:<law>, pn:n[:s], scaled:c:<law>"
        ))),
    }
}

/// W^{*(n)} for a base law.
#[derive(Debug, Clone)]
pub struct ZeroBiasSpec {
    pub base: BaseDist,
    pub order: u32,
}

impl ZeroBiasSpec {
    pub fn new(base: BaseDist, order: u32) -> Result<ZeroBiasSpec> {
        if order == 0 {
            return Err(Error::Invalid("zero-bias order must be at least 1".into()));
        }
        Ok(ZeroBiasSpec { base, order })
    }

    fn norm(&self) -> f64 {
        let fact: f64 = (1..self.order).map(|i| i as f64).product();
        fact * self.base.variance
    }
}

pub fn square_bias_sample(base: &BaseDist, rng: &mut Rng) -> Result<f64> {
    base.square_bias_draw(rng)
}

/// One draw V_n · W^□.
pub fn zero_bias_n_sample(spec: &ZeroBiasSpec, rng: &mut Rng) -> Result<f64> {
    let mut v = 1.0;
    for _ in 0..spec.order {
        v *= rng::open01(rng);
    }
    Ok(v * spec.base.square_bias_draw(rng)?)
}

/// `count` draws of W^{*(n)}; chunk k of par::CHUNK draws uses stream k of `seed`.
pub fn zero_bias_n_samples(spec: &ZeroBiasSpec, seed: u64, count: usize) -> Result<Vec<f64>> {
    let chunks = par::chunks(count);
    let parts = par::map_indexed(chunks.len(), |i| {
        let (k, len) = chunks[i];
        let mut r = rng::stream(seed, k as u64);
        (0..len).map(|_| zero_bias_n_sample(spec, &mut r)).collect::<Result<Vec<f64>>>()
    });
    Ok(parts.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// `count` draws of W^□.
pub fn square_bias_samples(base: &BaseDist, seed: u64, count: usize) -> Result<Vec<f64>> {
    let chunks = par::chunks(count);
    let parts = par::map_indexed(chunks.len(), |i| {
        let (k, len) = chunks[i];
        let mut r = rng::stream(seed, k as u64);
        (0..len).map(|_| base.square_bias_draw(&mut r)).collect::<Result<Vec<f64>>>()
    });
    Ok(parts.into_iter().collect::<Result<Vec<_>>>()?.concat())
}

/// Distribution function of W^{*(n)}.
///
/// w < 0: E[W² γ(n, log(W/w)); W ≤ w] / ((n−1)! σ²);
/// w ≥ 0: 1 − E[W² γ(n, log(W/w)); W ≥ w] / ((n−1)! σ²).
/// An atom exactly at w contributes γ(n, 0) = 0 either way, so the
/// indicator convention does not matter.
pub fn zero_bias_cdf(spec: &ZeroBiasSpec, w: f64) -> Result<f64> {
    if w.is_nan() {
        return Err(Error::Domain("cdf at NaN".into()));
    }
    let n = spec.order;
    let kernel = move |x: f64| {
        let l = if w == 0.0 { f64::INFINITY } else { (x / w).ln().max(0.0) };
        x * x * lower_incomplete_gamma(n, l).unwrap_or(0.0)
    };
    let v = if w < 0.0 {
        spec.base.expect_on(&kernel, f64::NEG_INFINITY, w)? / spec.norm()
    } else {
        1.0 - spec.base.expect_on(&kernel, w.max(f64::MIN_POSITIVE), f64::INFINITY)? / spec.norm()
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Density of W^{*(n)} at w ≠ 0:
/// ∓E[W (log(W/w))^{n−1}; W ≶ w] / ((n−1)! σ²).
pub fn zero_bias_pdf(spec: &ZeroBiasSpec, w: f64) -> Result<f64> {
    if w == 0.0 {
        if spec.order == 1 {
            return Ok(spec.base.expect_on(&|x| x, 0.0, f64::INFINITY)? / spec.norm());
        }
        return Err(Error::Singularity { x: 0.0, what: "zero-bias density of order ≥ 2 can diverge at 0".into() });
    }
    let p = spec.order as i32 - 1;
    let kernel = move |x: f64| x * (x / w).ln().max(0.0).powi(p);
    let v = if w < 0.0 {
        -spec.base.expect_on(&kernel, f64::NEG_INFINITY, w)?
    } else {
        spec.base.expect_on(&kernel, w, f64::INFINITY)?
    };
    Ok((v / spec.norm()).max(0.0))
}

/// E (W^{*(n)})^p = E W^{p+2} / (σ² (p+1)^n), or the absolute version.
pub fn zero_bias_moment(spec: &ZeroBiasSpec, p: u32, absolute: bool) -> Result<f64> {
    let m = if absolute { spec.base.abs_moment(p + 2)? } else { spec.base.moment(p + 2)? };
    Ok(m / (spec.base.variance * ((p + 1) as f64).powi(spec.order as i32)))
}

/// A joint draw of W and a zero-biased partner on one probability space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDraw {
    pub w: f64,
    pub w_star: f64,
    /// Replaced summand index, one per factor.
    pub replaced_indices: Vec<usize>,
}

/// W = Σ X_i with one summand, chosen with probability σ_i²/σ², replaced by
/// an independent draw from its order-1 zero-bias law.
pub fn sum_zero_bias_coupling(summands: &[BaseDist], rng: &mut Rng) -> Result<CouplingDraw> {
    if summands.is_empty() {
        return Err(Error::Invalid("coupling needs at least one summand".into()));
    }
    let xs: Vec<f64> = summands.iter().map(|d| d.draw(rng)).collect();
    let total: f64 = summands.iter().map(|d| d.variance).sum();
    let u = rng::open01(rng) * total;
    let mut acc = 0.0;
    let mut idx = summands.len() - 1;
    for (i, d) in summands.iter().enumerate() {
        acc += d.variance;
        if u < acc {
            idx = i;
            break;
        }
    }
    let x_star = summands[idx].zero_bias_draw(rng)?;
    let w: f64 = xs.iter().sum();
    Ok(CouplingDraw { w, w_star: w - xs[idx] + x_star, replaced_indices: vec![idx] })
}

/// W = Π W_k, W* = Π W_k^* with each factor coupled by
/// [`sum_zero_bias_coupling`]. No normalization is applied.
pub fn product_zero_bias_coupling(factors: &[Vec<BaseDist>], rng: &mut Rng) -> Result<CouplingDraw> {
    if factors.is_empty() {
        return Err(Error::Invalid("coupling needs at least one factor".into()));
    }
    let mut out = CouplingDraw { w: 1.0, w_star: 1.0, replaced_indices: Vec::with_capacity(factors.len()) };
    for f in factors {
        let d = sum_zero_bias_coupling(f, rng)?;
        out.w *= d.w;
        out.w_star *= d.w_star;
        out.replaced_indices.push(d.replaced_indices[0]);
    }
    Ok(out)
}

/// Fast path for a sum of m Rademacher signs: the signs are bits of random
/// words, the replaced summand is uniform, and its zero-bias draw is U(−1, 1).
/// Returns (Σ X_i, Σ X_i − X_I + X_I^*, I).
///
/// Panics unless 1 ≤ m ≤ [`RADEMACHER_FAST_MAX`].
pub fn rademacher_sum_coupling(m: usize, rng: &mut Rng) -> (f64, f64, usize) {
    use rand::Rng as _;
    assert!((1..=RADEMACHER_FAST_MAX).contains(&m), "rademacher fast path needs 1 ≤ m ≤ {RADEMACHER_FAST_MAX}");
    let mut ones = 0u32;
    let mut words = [0u64; 16];
    let nw = m.div_ceil(64);
    for (j, slot) in words.iter_mut().enumerate().take(nw) {
        let mut word: u64 = rng.random();
        let bits = (m - 64 * j).min(64);
        if bits < 64 {
            word &= (1u64 << bits) - 1;
        }
        *slot = word;
        ones += word.count_ones();
    }
    let w = 2.0 * ones as f64 - m as f64;
    let idx = ((rng::open01(rng) * m as f64) as usize).min(m - 1);
    let xi = if (words[idx / 64] >> (idx % 64)) & 1 == 1 { 1.0 } else { -1.0 };
    let star = 2.0 * rng::open01(rng) - 1.0;
    (w, w - xi + star, idx)
}

/// Largest m accepted by [`rademacher_sum_coupling`].
pub const RADEMACHER_FAST_MAX: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct ScaleCheck {
    pub c: f64,
    pub draws: usize,
    pub ks: f64,
    pub critical: f64,
    pub pass: bool,
}

/// Compare c·W^{*(n)} with (cW)^{*(n)} by a two-sample KS test at 1%.
/// The second sample runs on the seed XOR a fixed odd constant.
pub fn scale_transform_check(spec: &ZeroBiasSpec, c: f64, seed: u64, draws: usize) -> Result<ScaleCheck> {
    let scaled = ZeroBiasSpec::new(spec.base.scaled(c)?, spec.order)?;
    let mut a: Vec<f64> = zero_bias_n_samples(spec, seed, draws)?.into_iter().map(|x| c * x).collect();
    let mut b = zero_bias_n_samples(&scaled, seed ^ 0x9E37_79B9_7F4A_7C15, draws)?;
    let ks = ks_two_sample(&mut a, &mut b);
    let critical = ks_critical_two_sample(draws, draws, 0.01);
    Ok(ScaleCheck { c, draws, ks, critical, pass: ks < critical })
}
