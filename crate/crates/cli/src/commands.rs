use std::fs::File;
use std::io::{BufWriter, Write};

use pnstein::experiments::{
    self, rate_fit, ExperimentConfig, ExperimentKind, ExperimentReport, PnReference, Verdict,
};
use pnstein::prodnormal::{self, ExpectMethod, PNParams, PdfEvalConfig};
use pnstein::stats::MeanSe;
use pnstein::stein2::{self, BoundReport, SteinSol2};
use pnstein::testfns::{TestFn, CATALOG};
use pnstein::zerobias::{self, parse_base, ZeroBiasSpec};
use pnstein::rng;
use serde_json::{json, Value};

use crate::report::{to_value, Report, Table};
use crate::{Cmd, CliError, ExpKind, ExpectMethodArg, PnRefArg, Suite, ZbWhat};

type Res = Result<Report, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn dispatch(cmd: &Cmd, seed: u64) -> Res {
    match cmd {
        Cmd::Pdf { pn, x, regularized, quad_tol } => pdf(pn.n, pn.sigma, x, *regularized, *quad_tol),
        Cmd::Cdf { pn, x, quad_tol } => cdf(pn.n, pn.sigma, x, *quad_tol),
        Cmd::Cf { pn, t, ode_residual } => cf(pn.n, pn.sigma, t, *ode_residual),
        Cmd::Sample { pn, count, .. } => sample(pn.n, pn.sigma, *count, seed),
        Cmd::Expectation { pn, h, method, draws } => expectation(pn.n, pn.sigma, h, *method, *draws, seed),
        Cmd::Zerobias { dist, order, what, w, p, absolute, count, m } => {
            zero_bias(dist, *order, *what, w, p, *absolute, *count, *m, seed)
        }
        Cmd::SteinSolve { sigma, h, x } => stein_solve(*sigma, h, x),
        Cmd::VerifyBounds { suite, h, sigma, grid_points } => verify_bounds(*suite, h, sigma, *grid_points),
        Cmd::Experiment { kind, m, n, dist_x, dist_y, h, reps, pn_reference, ladder, csv, csv_rows } => {
            let cfg = ExperimentConfig {
                m: *m,
                n: *n,
                base_x: parse_base(dist_x)?,
                base_y: parse_base(dist_y)?,
                h: TestFn::named(h)?,
                reps: *reps,
                seed,
                pn_reference: match pn_reference {
                    PnRefArg::Quadrature => PnReference::Quadrature,
                    PnRefArg::ClosedForm => PnReference::ClosedForm,
                },
            };
            experiment(&cfg, *kind, ladder, csv.as_deref(), *csv_rows)
        }
    }
}

fn pn_meta(r: &mut Report, n: u32, sigma: f64) -> Result<PNParams, CliError> {
    let p = PNParams::new(n, sigma)?;
    r.set("n", n);
    r.set("sigma", sigma);
    Ok(p)
}

fn eval_cfg(quad_tol: f64) -> Result<PdfEvalConfig, CliError> {
    let cfg = PdfEvalConfig { quad_tol, ..PdfEvalConfig::default() };
    cfg.validate()?;
    Ok(cfg)
}

fn pdf(n: u32, sigma: f64, xs: &[f64], regularized: bool, quad_tol: f64) -> Res {
    let mut r = Report::new();
    let p = pn_meta(&mut r, n, sigma)?;
    let cfg = eval_cfg(quad_tol)?;
    r.set("method", if n <= 2 { "closed form" } else { "quadrature" });
    r.set("quad_tol", quad_tol);
    r.set("singularity_floor", cfg.singularity_floor);
    r.set("regularized", regularized);
    let mut t = Table::new(&["x", "pdf"]);
    for &x in xs {
        let v = if regularized { prodnormal::pdf_regularized(&p, x, &cfg)? } else { prodnormal::pdf(&p, x, &cfg)? };
        t.push(vec![json!(x), json!(v)]);
    }
    Ok(r.with_table(t))
}

fn cdf(n: u32, sigma: f64, xs: &[f64], quad_tol: f64) -> Res {
    let mut r = Report::new();
    let p = pn_meta(&mut r, n, sigma)?;
    let cfg = eval_cfg(quad_tol)?;
    r.set("method", if n == 1 { "closed form" } else { "quadrature" });
    r.set("quad_tol", quad_tol);
    let mut t = Table::new(&["x", "cdf"]);
    for &x in xs {
        t.push(vec![json!(x), json!(prodnormal::cdf(&p, x, &cfg)?)]);
    }
    Ok(r.with_table(t))
}

fn cf(n: u32, sigma: f64, ts: &[f64], ode: bool) -> Res {
    let mut r = Report::new();
    let p = pn_meta(&mut r, n, sigma)?;
    let (method, tol) = match n {
        1 | 2 => ("closed form", f64::EPSILON),
        3 => ("closed form (K0)", 1e-14),
        _ => ("quadrature", 1e-12),
    };
    r.set("method", method);
    r.set("tolerance_rel", tol);
    let mut t = if ode { Table::new(&["t", "cf", "ode_residual"]) } else { Table::new(&["t", "cf"]) };
    for &tt in ts {
        let mut row = vec![json!(tt), json!(prodnormal::cf(&p, tt)?)];
        if ode {
            row.push(json!(prodnormal::cf_ode_residual(&p, tt)?));
        }
        t.push(row);
    }
    Ok(r.with_table(t))
}

fn sample(n: u32, sigma: f64, count: usize, seed: u64) -> Res {
    let mut r = Report::new();
    let p = pn_meta(&mut r, n, sigma)?;
    let xs = prodnormal::sample(&p, seed, count);
    r.set("count", count);
    r.set("values", &xs);
    let mut t = Table::new(&["x"]);
    for x in xs {
        t.push(vec![json!(x)]);
    }
    r.table_in_json = false;
    Ok(r.with_table(t))
}

pub fn sample_binary(n: u32, sigma: f64, count: usize, seed: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let p = PNParams::new(n, sigma)?;
    for x in prodnormal::sample(&p, seed, count) {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn expectation(n: u32, sigma: f64, h: &str, method: ExpectMethodArg, draws: usize, seed: u64) -> Res {
    let mut r = Report::new();
    let p = pn_meta(&mut r, n, sigma)?;
    let f = TestFn::named(h)?;
    let method = match method {
        ExpectMethodArg::Quadrature => ExpectMethod::Quadrature,
        ExpectMethodArg::MonteCarlo => ExpectMethod::MonteCarlo { seed, draws },
        ExpectMethodArg::Auto if n <= 2 => ExpectMethod::Quadrature,
        ExpectMethodArg::Auto => ExpectMethod::MonteCarlo { seed, draws },
    };
    let cfg = PdfEvalConfig::default();
    let v = prodnormal::expectation(&p, |x| f.value(x), method, &cfg)?;
    r.set("h", h);
    r.set("value", v.mean);
    match method {
        ExpectMethod::MonteCarlo { draws, .. } => {
            r.set("method", "monte-carlo");
            r.set("se", v.se);
            r.set("draws", draws);
        }
        _ => {
            r.set("method", "quadrature");
            r.set("error_estimate", v.se);
            r.set("quad_tol", cfg.quad_tol);
        }
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
fn zero_bias(
    dist: &str,
    order: u32,
    what: ZbWhat,
    ws: &[f64],
    ps: &[u32],
    absolute: bool,
    count: usize,
    m: usize,
    seed: u64,
) -> Res {
    let base = parse_base(dist)?;
    let spec = ZeroBiasSpec::new(base.clone(), order)?;
    let mut r = Report::new();
    r.set("dist", base.label());
    r.set("variance", base.variance());
    r.set("order", order);
    let exact = base.as_atoms().is_some();
    let need_w = || if ws.is_empty() { Err(usage("--w is required for cdf and pdf")) } else { Ok(()) };
    match what {
        ZbWhat::Cdf | ZbWhat::Pdf => {
            need_w()?;
            let cdf = what == ZbWhat::Cdf;
            r.set("method", if exact { "exact sum over atoms" } else { "quadrature" });
            r.set("quad_tol", if exact { 0.0 } else { zerobias::QUAD_TOL });
            let mut t = Table::new(&["w", if cdf { "cdf" } else { "pdf" }]);
            for &w in ws {
                let v = if cdf { zerobias::zero_bias_cdf(&spec, w)? } else { zerobias::zero_bias_pdf(&spec, w)? };
                t.push(vec![json!(w), json!(v)]);
            }
            Ok(r.with_table(t))
        }
        ZbWhat::Moment => {
            if ps.is_empty() {
                return Err(usage("--p is required for moment"));
            }
            r.set("absolute", absolute);
            r.set("method", "base moments");
            let mut t = Table::new(&["p", "moment"]);
            for &p in ps {
                t.push(vec![json!(p), json!(zerobias::zero_bias_moment(&spec, p, absolute)?)]);
            }
            Ok(r.with_table(t))
        }
        ZbWhat::Sample | ZbWhat::SquareBias => {
            let xs = if what == ZbWhat::Sample {
                zerobias::zero_bias_n_samples(&spec, seed, count)?
            } else {
                r.set("transform", "square-bias");
                zerobias::square_bias_samples(&base, seed, count)?
            };
            r.set("count", count);
            r.set("values", &xs);
            let mut t = Table::new(&["value"]);
            for x in xs {
                t.push(vec![json!(x)]);
            }
            r.table_in_json = false;
            Ok(r.with_table(t))
        }
        ZbWhat::Coupling => {
            if m == 0 {
                return Err(usage("--m must be at least 1"));
            }
            // W is the plain sum of m copies; W* replaces one summand
            let summands = vec![base; m];
            let mut g = rng::stream(seed, 0);
            r.set("m", m);
            r.set("count", count);
            let mut t = Table::new(&["w", "w_star", "replaced_index"]);
            for _ in 0..count {
                let d = zerobias::sum_zero_bias_coupling(&summands, &mut g)?;
                t.push(vec![json!(d.w), json!(d.w_star), json!(d.replaced_indices[0])]);
            }
            Ok(r.with_table(t))
        }
    }
}

fn stein_solve(sigma: f64, h: &str, xs: &[f64]) -> Res {
    let sol = SteinSol2::new(TestFn::named(h)?, sigma)?;
    let mut r = Report::new();
    r.set("h", h);
    r.set("sigma", sigma);
    r.set("pn2_expectation", sol.expectation());
    r.set("h_tilde_sup", sol.h_tilde_sup());
    r.set("quad_tol", stein2::QUAD_REL);
    let mut t = Table::new(&["x", "f", "f1", "f2", "f3", "f4", "residual"]);
    for &x in xs {
        let d = sol.derivs(x)?;
        let mut row: Vec<Value> = vec![json!(x)];
        row.extend(d.iter().map(|v| json!(v)));
        row.push(json!(sol.residual(x)?));
        t.push(row);
    }
    Ok(r.with_table(t))
}

fn bound_rows(t: &mut Table, rep: &BoundReport) {
    for c in &rep.checks {
        t.push(vec![
            json!(rep.h.as_deref().unwrap_or("")),
            rep.sigma.map_or(json!(""), |s| json!(s)),
            json!(c.id),
            json!(c.lhs_sup),
            json!(c.rhs),
            json!(c.margin),
            json!(c.worst_x),
            json!(c.pass),
            json!(c.informational),
        ]);
    }
}

fn verify_bounds(suite: Suite, hs: &[String], sigmas: &[f64], grid_points: usize) -> Res {
    let mut t = Table::new(&["h", "sigma", "id", "lhs_sup", "rhs", "margin", "worst_x", "pass", "informational"]);
    let mut r = Report::new();
    let reports: Vec<BoundReport> = match suite {
        Suite::AppendixC => {
            if grid_points < 2 {
                return Err(usage("--grid-points must be at least 2"));
            }
            let rep = stein2::appendix_c_suite(&stein2::appendix_c_grid(grid_points))?;
            let passing = stein2::appendix_c_passing(&rep).len();
            r.set("suite", "appendix-c");
            r.set("inequalities_passing", passing);
            r.set("inequalities_total", stein2::APPENDIX_C_COUNT);
            vec![rep]
        }
        Suite::Thm | Suite::Arflem => {
            r.set("suite", if suite == Suite::Thm { "thm" } else { "arflem" });
            let names: Vec<String> =
                if hs.is_empty() { CATALOG.iter().map(|s| s.to_string()).collect() } else { hs.to_vec() };
            let mut out = Vec::new();
            for name in &names {
                for &s in sigmas {
                    let sol = SteinSol2::new(TestFn::named(name)?, s)?;
                    let grid = stein2::thm_grid(s);
                    out.push(if suite == Suite::Thm {
                        stein2::verify_thm_bounds(&sol, &grid)?
                    } else {
                        stein2::verify_arflem(&sol, &[1, 2], &grid)?
                    });
                }
            }
            out
        }
    };
    let all_pass = reports.iter().all(BoundReport::all_pass);
    let violations: usize = reports.iter().map(|x| x.violations().len()).sum();
    for rep in &reports {
        bound_rows(&mut t, rep);
    }
    r.set("all_pass", all_pass);
    r.set("violations", violations);
    r.set("reports", &reports);
    r.table_in_json = false;
    r.violation = !all_pass;
    Ok(r.with_table(t))
}

fn report_row(t: &mut Table, e: &ExperimentReport) {
    t.push(vec![
        json!(e.m),
        json!(e.n),
        json!(e.lhs.mean),
        json!(e.lhs.se),
        json!(e.exact_lhs),
        json!(e.bound_value),
        to_value(e.verdict),
        json!(e.conditional_coefficient.mean),
        json!(e.conditional_coefficient.se),
        json!(e.conditional_expected),
        json!(e.coupling_l1.mean),
        json!(e.coupling_l1.se),
    ]);
}

fn experiment(
    cfg: &ExperimentConfig,
    kind: ExpKind,
    ladder: &[usize],
    csv: Option<&std::path::Path>,
    csv_rows: usize,
) -> Res {
    let kind = match kind {
        ExpKind::Cor42 => ExperimentKind::Cor42,
        ExpKind::Cor43 => ExperimentKind::Cor43,
        ExpKind::Coupling => ExperimentKind::Coupling,
    };
    cfg.validate()?;
    let mut t = Table::new(&[
        "m",
        "n",
        "lhs",
        "lhs_se",
        "exact_lhs",
        "bound",
        "verdict",
        "coefficient",
        "coefficient_se",
        "coefficient_expected",
        "coupling_l1",
        "coupling_l1_se",
    ]);
    let mut r = Report::new();
    let reports = if ladder.is_empty() {
        vec![match kind {
            ExperimentKind::Cor42 => experiments::run_corollary_4_2(cfg)?,
            ExperimentKind::Cor43 => experiments::run_corollary_4_3(cfg)?,
            ExperimentKind::Coupling => experiments::estimate_coupling_terms(cfg)?,
        }]
    } else {
        experiments::run_ladder(cfg, ladder, kind)?
    };
    for e in &reports {
        report_row(&mut t, e);
    }
    r.violation = reports.iter().any(|e| e.verdict == Verdict::Fail);
    if ladder.is_empty() {
        if let Value::Object(mut fields) = to_value(&reports[0]) {
            fields.remove("seed");
            r.meta.extend(fields);
        }
    } else {
        r.set("kind", kind);
        r.set("sizes", ladder);
        let mc: Vec<(f64, MeanSe)> = reports.iter().map(|e| (e.m as f64, e.lhs)).collect();
        r.set("rate_fit", rate_fit(&mc).ok());
        let exact: Option<Vec<(f64, MeanSe)>> =
            reports.iter().map(|e| e.exact_lhs.map(|v| (e.m as f64, MeanSe { mean: v, se: 0.0 }))).collect();
        r.set("exact_rate_fit", exact.and_then(|p| rate_fit(&p).ok()));
        r.set("reports", &reports);
        r.table_in_json = false;
    }
    if let Some(path) = csv {
        let rows = experiments::coupling_rows(cfg, csv_rows)?;
        let mut f = BufWriter::new(File::create(path)?);
        experiments::write_csv(&rows, &mut f)?;
        f.flush()?;
        r.set("csv", path.display().to_string());
        r.set("csv_rows", rows.len());
    }
    Ok(r.with_table(t))
}
