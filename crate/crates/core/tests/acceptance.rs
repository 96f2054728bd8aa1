//! Acceptance gate: one PASS/FAIL line per criterion, with the measured
//! values, the tolerance and the wall time against its budget.
//!
//! Run all criteria with `cargo test --test acceptance`, or a subset by
//! number, e.g. `cargo test --test acceptance -- 1 4 10`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use refraction::config::SweepConfig;
use refraction::fundamental::{closed_form_fundamentals, max_relative_gap, solve_phi, solve_psi, GRID_DX};
use refraction::model::{prepare, CoefficientSpec, ModelSpec};
use refraction::optimizer::{solve, Numerics, Regime, Solution};
use refraction::resolvent::affine_resolvent;
use refraction::simulate::{
    barrier_tournament, first_passage_down, first_passage_up, simulate_refraction, transversality_check, SimConfig,
};
use refraction::specfun::{kummer_m, parabolic_cylinder_d, specfun_derivative, tricomi_u, Which};
use refraction::sweep::run_sweep;

const Q: f64 = 0.33;

fn sigma_families() -> [(&'static str, CoefficientSpec); 3] {
    [
        ("sigma constant", CoefficientSpec::Constant { s0: 0.3 }),
        ("sigma affine", CoefficientSpec::Affine { c0: 0.3, c1: 0.5 }),
        ("sigma^2 affine", CoefficientSpec::SqrtAffine { s0: 0.3, s1: 0.5 }),
    ]
}

fn fig1(sigma: CoefficientSpec, bound: (f64, f64)) -> ModelSpec {
    ModelSpec::affine((0.09, 0.21), sigma, bound, Q)
}

fn logistic(m0: f64, m1: f64, k: f64, bound: (f64, f64)) -> ModelSpec {
    ModelSpec {
        mu: CoefficientSpec::Logistic { m0, m1, k },
        sigma: CoefficientSpec::SqrtAffine { s0: 0.75, s1: 0.5 },
        bound: CoefficientSpec::Affine { c0: bound.0, c1: bound.1 },
        q: Q,
    }
}

/// Every model with a positive barrier used below.
fn positive_models() -> Vec<(String, ModelSpec)> {
    let mut v: Vec<(String, ModelSpec)> =
        sigma_families().into_iter().map(|(n, s)| (format!("fig1 {n}"), fig1(s, (0.3, 0.3)))).collect();
    v.push(("logistic K=10".into(), logistic(0.15, 0.21, 10.0, (0.3, 0.3))));
    v.push(("logistic K=5".into(), logistic(0.25, 0.3, 5.0, (0.15, 0.25))));
    v
}

fn solved(spec: &ModelSpec) -> Result<Solution, String> {
    solve(spec, &Numerics::default()).map_err(|e| e.to_string())
}

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

/// `(worst value, where)` accumulator.
#[derive(Default)]
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn see(&mut self, v: f64, at: impl FnOnce() -> String) {
        if !(v <= self.value) {
            self.value = v;
            self.at = at();
        }
    }
}

fn closed_form_vs_ode() -> Result<Verdict, String> {
    let mut worst = Worst::default();
    let mut short = Vec::new();
    for (name, sigma) in sigma_families() {
        let m = Arc::new(prepare(&fig1(sigma, (0.3, 0.3)), None).map_err(|e| e.to_string())?);
        let x_hi = m.x_hi();
        let psi = solve_psi(&m, x_hi, 1e-12, GRID_DX).map_err(|e| e.to_string())?;
        let phi = solve_phi(&m, x_hi, 1e-12, GRID_DX).map_err(|e| e.to_string())?;
        let (cpsi, cphi) = closed_form_fundamentals(&m, x_hi).map_err(|e| e.to_string())?;
        for (label, a, b) in [("psi", &psi, &cpsi), ("phi", &phi, &cphi)] {
            let end = 20.0_f64.min(a.domain().1);
            if end < 20.0 {
                short.push(format!("{name} {label} ends at {end}"));
            }
            let g = max_relative_gap(a, b, 0.0, end, 0.01).map_err(|e| e.to_string())?;
            worst.see(g, || format!("{name} {label}"));
        }
    }
    Ok(Verdict::new(
        worst.value <= 1e-7 && short.is_empty(),
        format!("max relative gap {:.2e} ({}) <= 1e-7{}", worst.value, worst.at, short.iter().map(|s| format!("; {s}")).collect::<String>()),
    ))
}

fn affine_sanity() -> Result<Verdict, String> {
    let mut constant = Worst::default();
    let mut affine = Worst::default();
    for (name, sigma) in sigma_families() {
        for f0 in [0.1, 0.3, 1.0] {
            let s = solved(&fig1(sigma.clone(), (f0, 0.0)))?;
            let r = &s.resolvent.if_curve;
            let g = r.values().iter().map(|v| (v - f0 / Q).abs()).fold(0.0, f64::max);
            constant.see(g, || format!("{name}, F0 = {f0}"));
        }
        for f in [(0.3, 0.3), (0.5, 0.1), (0.1, 0.8)] {
            let s = solved(&fig1(sigma.clone(), f))?;
            let r = &s.resolvent.if_curve;
            let g = r
                .nodes()
                .iter()
                .zip(r.values())
                .map(|(&x, v)| (v - affine_resolvent((0.09, 0.21), f, Q, x)).abs())
                .fold(0.0, f64::max);
            affine.see(g, || format!("{name}, F = {f:?}"));
        }
    }
    Ok(Verdict::new(
        constant.value <= 1e-10 && affine.value <= 1e-9,
        format!(
            "constant F: {:.2e} ({}) <= 1e-10; affine F: {:.2e} ({}) <= 1e-9",
            constant.value, constant.at, affine.value, affine.at
        ),
    ))
}

fn resolvent_properties() -> Result<Verdict, String> {
    let mut models = positive_models();
    for (name, sigma) in sigma_families() {
        models.push((format!("fig1 {name} constant F"), fig1(sigma, (0.4, 0.0))));
    }
    models.push(("logistic K=10 F=(1,1)".into(), logistic(0.15, 0.21, 10.0, (1.0, 1.0))));
    models.push((
        "tabulated bound".into(),
        ModelSpec {
            bound: CoefficientSpec::Custom { table: vec![[0.0, 0.2, 0.4], [1.0, 0.5, 0.2], [3.0, 0.8, 0.05]] },
            ..fig1(CoefficientSpec::Constant { s0: 0.3 }, (0.0, 0.0))
        },
    ));
    let (mut slope_lo, mut slope_hi, mut conc, mut env, mut res) =
        (Worst { value: f64::NEG_INFINITY, ..Default::default() }, Worst::default(), Worst::default(), Worst::default(), Worst::default());
    slope_hi.value = f64::NEG_INFINITY;
    conc.value = f64::NEG_INFINITY;
    env.value = f64::NEG_INFINITY;
    for (name, spec) in &models {
        let c = solved(spec)?.resolvent.checks;
        slope_lo.see(-c.slope_min, || name.clone());
        slope_hi.see(c.slope_max, || name.clone());
        conc.see(c.concavity_defect, || name.clone());
        env.see(c.envelope_excess, || name.clone());
        res.see(c.ode_residual, || name.clone());
    }
    let pass = -slope_lo.value >= -1e-9
        && slope_hi.value <= 1.0 + 1e-9
        && conc.value <= 1e-7
        && env.value <= 1e-9
        && res.value <= 1e-7;
    Ok(Verdict::new(
        pass,
        format!(
            "{} models; I_F' in [{:.3}, {:.3}]; concavity {:.1e}; envelope {:.1e}; residual {:.1e} ({})",
            models.len(),
            -slope_lo.value,
            slope_hi.value,
            conc.value,
            env.value,
            res.value,
            res.at
        ),
    ))
}

fn smooth_fit_and_hjb() -> Result<Verdict, String> {
    let mut lines = Vec::new();
    let mut pass = true;
    for (name, spec) in positive_models() {
        let t = Instant::now();
        let s = solved(&spec)?;
        let el = t.elapsed();
        let d = &s.diagnostics;
        let ok = s.regime == Regime::BarrierPositive
            && d.smooth_fit_gap <= 1e-8
            && d.c2_gap <= 1e-6
            && d.hjb_residual_max <= 1e-6
            && d.region_ok
            && el < Duration::from_secs(10);
        pass &= ok;
        lines.push(format!(
            "{name}: b*={:.6} fit {:.1e} c2 {:.1e} hjb {:.1e} region {} {:.2}s",
            s.b_star,
            d.smooth_fit_gap,
            d.c2_gap,
            d.hjb_residual_max,
            d.region_ok,
            el.as_secs_f64()
        ));
    }
    Ok(Verdict::new(pass, lines.join("; ")))
}

fn dominance() -> Result<Verdict, String> {
    let mut worst = Worst { value: f64::NEG_INFINITY, ..Default::default() };
    for (name, spec) in positive_models() {
        let s = solved(&spec)?;
        worst.see(-s.diagnostics.dominance_margin, || name);
    }
    let s = solved(&fig1(CoefficientSpec::Constant { s0: 0.3 }, (0.3, 0.3)))?;
    let b = s.b_star;
    let grid = [0.0, 0.25 * b, 0.5 * b, b, 2.0 * b, 4.0 * b];
    let cfg = SimConfig { n_paths: 10_000, dt: 1e-3, ..Default::default() };
    let (est, best) = barrier_tournament(&s.model, &grid, &cfg).map_err(|e| e.to_string())?;
    let means: Vec<String> = est.iter().map(|e| format!("{:.4}", e.mean)).collect();
    Ok(Verdict::new(
        -worst.value >= -1e-9 && (2..=4).contains(&best),
        format!(
            "analytic margin {:.1e} ({}) >= -1e-9; tournament at x0=1 picks b={:.4} (index {best}, b* is 3) from [{}]",
            -worst.value,
            worst.at,
            grid[best],
            means.join(", ")
        ),
    ))
}

fn mc_agreement() -> Result<Verdict, String> {
    let s = solved(&fig1(CoefficientSpec::Constant { s0: 0.3 }, (0.3, 0.3)))?;
    let mut parts = Vec::new();
    let mut pass = true;
    for x0 in [0.5, 1.0, 2.0] {
        let cfg = SimConfig { n_paths: 100_000, dt: 1e-3, x0, ..Default::default() };
        let e = simulate_refraction(&s.model, s.b_star, &cfg).map_err(|e| e.to_string())?;
        let v = s.performance_at(s.b_star, x0).map_err(|e| e.to_string())?;
        let z = e.z_score(v);
        pass &= z.abs() <= 3.0;
        parts.push(format!("x0={x0}: mc {:.5}±{:.5} vs {:.5} z={z:+.2}", e.mean, e.std_error, v));
    }
    let e = simulate_refraction(&s.model, s.b_star, &SimConfig { n_paths: 1000, x0: 0.0, ..Default::default() })
        .map_err(|e| e.to_string())?;
    pass &= e.mean == 0.0 && e.std_error == 0.0;
    parts.push(format!("x0=0: {}", e.mean));
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn sweep_structure() -> Result<Verdict, String> {
    let mut cases: Vec<(String, ModelSpec)> =
        sigma_families().into_iter().map(|(n, s)| (format!("fig1 {n}"), fig1(s, (0.0, 0.0)))).collect();
    cases.push(("logistic K=10".into(), logistic(0.15, 0.21, 10.0, (0.0, 0.0))));
    let sw = SweepConfig { f0_range: [0.0, 1.0], f1_range: [0.0, 1.0], resolution: 20 };
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, base) in cases {
        let t = Instant::now();
        let h = run_sweep(&base, &sw, &Numerics::default()).map_err(|e| e.to_string())?;
        let el = t.elapsed();
        let (connected, total) = h.zero_region();
        let decrease = h.worst_decrease();
        let above_hat = h.cells.iter().filter(|c| c.b_star.is_some_and(|b| b > c.b_hat)).count();
        let ok = h.failures() == 0
            && total > 0
            && connected == total
            && decrease <= 1e-9
            && above_hat == 0
            && el < Duration::from_secs(300);
        pass &= ok;
        let max_b = h.cells.iter().filter_map(|c| c.b_star).fold(0.0, f64::max);
        parts.push(format!(
            "{name}: {} failed, zero region {connected}/{total} connected, worst decrease {decrease:.1e}, {above_hat} above b̂, max b* {max_b:.3}, {:.0}s",
            h.failures(),
            el.as_secs_f64()
        ));
    }
    Ok(Verdict::new(pass, parts.join("; ")))
}

fn first_passage() -> Result<Verdict, String> {
    let s = solved(&fig1(CoefficientSpec::Constant { s0: 0.3 }, (0.3, 0.3)))?;
    let e = |e: refraction::fundamental::FundamentalError| e.to_string();
    let up_ref = s.psi.value(0.5).map_err(e)? / s.psi.value(1.0).map_err(e)?;
    let down_ref = (s.phi.log_eval(2.0).map_err(e)?.0 - s.phi.log_eval(1.0).map_err(e)?.0).exp();
    let cfg = |x0| SimConfig { n_paths: 100_000, dt: 1e-3, x0, ..Default::default() };
    let up = first_passage_up(&s.model, 1.0, &cfg(0.5)).map_err(|e| e.to_string())?;
    let down = first_passage_down(&s.model, 1.0, &cfg(2.0)).map_err(|e| e.to_string())?;
    let (zu, zd) = (up.z_score(up_ref), down.z_score(down_ref));
    Ok(Verdict::new(
        zu.abs() <= 3.0 && zd.abs() <= 3.0,
        format!(
            "psi(0.5)/psi(1) = {up_ref:.5}, mc {:.5} z={zu:+.2}; phi(2)/phi(1) = {down_ref:.5}, mc {:.5} z={zd:+.2}",
            up.mean, down.mean
        ),
    ))
}

fn transversality() -> Result<Verdict, String> {
    let s = solved(&fig1(CoefficientSpec::Constant { s0: 0.3 }, (0.3, 0.3)))?;
    let cfg = SimConfig { n_paths: 20_000, dt: 1e-3, x0: 1.0, ..Default::default() };
    let t = transversality_check(&s.model, &cfg, &[5.0, 10.0, 20.0, 40.0]).map_err(|e| e.to_string())?;
    let floor = Q - 0.21 - 0.02;
    let pts: Vec<String> = t.points.iter().map(|p| format!("T={}: {:.3e}", p.0, p.1)).collect();
    Ok(Verdict::new(t.rate >= floor, format!("fitted rate {:.4} >= {floor:.2} [{}]", t.rate, pts.join(", "))))
}

fn special_functions() -> Result<Verdict, String> {
    let tol = 1e-13;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let err = |e: refraction::specfun::SpecFunError| e.to_string();
    let mut ident = Worst::default();
    for z in [-30.0, -5.0, -1.0, 0.0, 0.5, 2.0, 10.0, 30.0, 60.0] {
        ident.see(rel(kummer_m(1.0, 1.0, z, tol).map_err(err)?.value, f64::exp(z)), || format!("M(1,1;{z})"));
    }
    for (a, b) in [(0.5, 1.5), (2.0, 0.3), (-1.5, 2.5), (7.0, 3.0)] {
        ident.see((kummer_m(a, b, 0.0, tol).map_err(err)?.value - 1.0).abs(), || format!("M({a},{b};0)"));
    }
    for z in [0.05, 0.5, 1.0, 3.0, 10.0, 50.0] {
        ident.see(rel(tricomi_u(1.0, 2.0, z, tol).map_err(err)?.value, 1.0 / z), || format!("U(1,2;{z})"));
    }
    ident.see(rel(parabolic_cylinder_d(1.0, 0.0, tol).map_err(err)?.value, (PI / 2.0).sqrt()), || "D_-1(0)".into());

    let mut deriv = Worst::default();
    let fd = |f: &dyn Fn(f64) -> Result<f64, String>, z: f64| -> Result<f64, String> {
        let h = 1e-5 * z.abs().max(1.0);
        Ok((f(z + h)? - f(z - h)?) / (2.0 * h))
    };
    for (a, b) in [(0.5, 1.5), (1.0, 2.0), (2.3, 0.7)] {
        let f = |z: f64| kummer_m(a, b, z, tol).map(|r| r.value).map_err(err);
        for z in [-5.0, -1.0, 0.3, 2.0, 8.0] {
            deriv.see(rel(specfun_derivative(Which::M { a, b }, z).map_err(err)?, fd(&f, z)?), || format!("M'({a},{b};{z})"));
        }
    }
    for (a, b) in [(0.5, 1.5), (1.0, 2.0), (2.3, 0.7), (1.2, -0.4)] {
        let f = |z: f64| tricomi_u(a, b, z, tol).map(|r| r.value).map_err(err);
        for z in [0.2, 1.0, 3.0, 10.0] {
            deriv.see(rel(specfun_derivative(Which::U { a, b }, z).map_err(err)?, fd(&f, z)?), || format!("U'({a},{b};{z})"));
        }
    }
    for lambda in [0.3, 1.0, 2.5, 10.0] {
        let f = |z: f64| parabolic_cylinder_d(lambda, z, tol).map(|r| r.value).map_err(err);
        for z in [-3.0, -1.0, 0.0, 1.0, 4.0] {
            deriv.see(rel(specfun_derivative(Which::D { lambda }, z).map_err(err)?, fd(&f, z)?), || format!("D'_-{lambda}({z})"));
        }
    }
    Ok(Verdict::new(
        ident.value <= 1e-10 && deriv.value <= 1e-6,
        format!("identities {:.1e} ({}) <= 1e-10; derivatives {:.1e} ({}) <= 1e-6", ident.value, ident.at, deriv.value, deriv.at),
    ))
}

type Check = fn() -> Result<Verdict, String>;

const CRITERIA: [(u32, &str, u64, Check); 10] = [
    (1, "closed form vs ODE fundamentals", 10, closed_form_vs_ode),
    (2, "affine resolvent sanity", 5, affine_sanity),
    (3, "resolvent property suite", 30, resolvent_properties),
    (4, "smooth fit and HJB", 50, smooth_fit_and_hjb),
    (5, "dominance", 120, dominance),
    (6, "Monte Carlo agreement", 300, mc_agreement),
    (7, "sweep structure", 1200, sweep_structure),
    (8, "first-passage identities", 180, first_passage),
    (9, "transversality", 120, transversality),
    (10, "special functions", 5, special_functions),
];

fn main() -> ExitCode {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, title, budget, check) in CRITERIA {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let el = t.elapsed().as_secs_f64();
        let pass = verdict.pass && el <= budget as f64;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] criterion {id:>2} {title}: {} ({el:.1}s of {budget}s)",
            if pass { "PASS" } else { "FAIL" },
            verdict.detail
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
