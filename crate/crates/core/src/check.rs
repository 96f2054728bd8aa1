//! The full invariant suite for one configuration, as pass/fail lines.

use std::sync::Arc;

use serde::Serialize;

use crate::config::RunConfig;
use crate::curve::uniform_nodes;
use crate::fundamental::{closed_form_fundamentals, inflection_sign_changes, max_relative_gap, Backing, FundamentalSolution, Kind};
use crate::model::{prepare, validate_model, ExtendedModel};
use crate::optimizer::{solve, CheckLine, Regime, Solution};
use crate::resolvent::{affine_resolvent, envelope_bounds, ENVELOPE_POINTS};
use crate::simulate::{
    barrier_tournament, discounted_integral, first_passage_down, first_passage_up, simulate_policy,
    simulate_refraction, step_halving, transversality_check, PayoffEstimate, Policy, SimConfig,
};

/// Closed form against tabulation, on `[0, CROSS_CHECK_END]`.
pub const CROSS_CHECK_END: f64 = 20.0;
/// Horizons for the transversality fit.
pub const TRANSVERSALITY_HORIZONS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
/// Largest tolerated `|z|` for Monte Carlo comparisons.
pub const Z_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    ValidationError,
    NumericalFailure,
    DiagnosticsFailure,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::ValidationError => 1,
            Outcome::NumericalFailure => 2,
            Outcome::DiagnosticsFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub outcome: Outcome,
    pub regime: Option<Regime>,
    pub b_star: Option<f64>,
    pub lines: Vec<CheckLine>,
    pub warnings: Vec<String>,
    /// Set when a stage could not run.
    pub error: Option<String>,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn failures(&self) -> Vec<&CheckLine> {
        self.lines.iter().filter(|l| !l.pass).collect()
    }

    fn stop(mut self, outcome: Outcome, error: String) -> Self {
        self.outcome = outcome;
        self.error = Some(error);
        self
    }
}

pub fn run_checks(cfg: &RunConfig) -> CheckReport {
    let mut r = CheckReport { outcome: Outcome::Pass, regime: None, b_star: None, lines: Vec::new(), warnings: Vec::new(), error: None };
    if let Err(e) = cfg.validate() {
        r.lines.push(CheckLine::flag("config.valid", false));
        return r.stop(Outcome::ValidationError, e.to_string());
    }
    if let Err(e) = validate_model(&cfg.model) {
        r.lines.push(CheckLine::flag("model.valid", false));
        return r.stop(Outcome::ValidationError, e.to_string());
    }
    r.lines.push(CheckLine::flag("model.valid", true));
    let m = match prepare(&cfg.model, cfg.numerics.x_hi) {
        Ok(m) => Arc::new(m),
        Err(e) => return r.stop(Outcome::ValidationError, e.to_string()),
    };
    model_lines(&m, &mut r.lines);

    let sol = match solve(&cfg.model, &cfg.numerics) {
        Ok(s) => s,
        Err(e) => return r.stop(Outcome::NumericalFailure, e.to_string()),
    };
    r.regime = Some(sol.regime);
    r.b_star = Some(sol.b_star);
    r.warnings.extend(sol.warnings.iter().cloned());
    if let Err(e) = fundamental_lines(&sol, &mut r.lines) {
        return r.stop(Outcome::NumericalFailure, e);
    }
    resolvent_lines(&sol, &mut r.lines);
    optimizer_lines(&sol, cfg, &mut r.lines);
    if cfg.check.monte_carlo {
        let mut sim = cfg.sim.config.clone();
        sim.n_paths = cfg.check.n_paths;
        if let Err(e) = monte_carlo_lines(&sol, &sim, &mut r.lines) {
            return r.stop(Outcome::NumericalFailure, e);
        }
    }
    if r.lines.iter().any(|l| !l.pass) {
        r.outcome = Outcome::DiagnosticsFailure;
    }
    r
}

fn model_lines(m: &ExtendedModel, out: &mut Vec<CheckLine>) {
    let h = 0.01;
    let xs = uniform_nodes(0.0, m.x_hi(), h);
    let f: Vec<f64> = xs.iter().map(|&x| m.bound(x)).collect();
    let mu: Vec<f64> = xs.iter().map(|&x| m.mu(x)).collect();
    let min_step = f.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let second = |v: &[f64]| v.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckLine::at_least("model.bound_at_zero", f[0], 0.0));
    out.push(CheckLine::at_least("model.bound_nondecreasing", min_step, 0.0));
    out.push(CheckLine::at_most("model.drift_second_difference", second(&mu), 1e-9));
    out.push(CheckLine::at_most("model.bound_second_difference", second(&f), 1e-9));
    let c = m.coeffs(0.0);
    let value_gap = (m.mu_neg.0 - c.mu).abs().max((m.f_neg.0 - c.f).abs()).max((m.sigma_neg - c.sigma).abs());
    let slope_gap = (m.mu_neg.1 - c.mu_prime).abs().max((m.f_neg.1 - c.f_prime).abs());
    out.push(CheckLine::at_most("model.extension_value_gap", value_gap, 0.0));
    out.push(CheckLine::at_most("model.extension_slope_gap", slope_gap, 0.0));
}

/// `max |½σ²u'' + b u' − q u| / (q + |b u'/u| + ½σ²|u''/u|)` with `u''/u`
/// from a central difference of `u'/u`, sampled at the midpoints of `xs`.
fn fundamental_residual(u: &FundamentalSolution, xs: &[f64]) -> Result<f64, String> {
    let m = u.model();
    let q = m.q();
    let mut worst = 0.0_f64;
    for w in xs.windows(2) {
        let x = 0.5 * (w[0] + w[1]);
        // u'/u varies on the scale |x| near the origin
        let h = 1e-4 * x.abs().clamp(0.01, 1.0);
        let dlog = |y: f64| u.log_eval(y).map(|t| t.2).map_err(|e| e.to_string());
        let v = dlog(x)?;
        let dv = (dlog(x + h)? - dlog(x - h)?) / (2.0 * h);
        let b = match u.kind() {
            Kind::Psi => m.mu(x),
            Kind::Phi | Kind::PhiTilde => m.mu(x) - m.bound(x),
        };
        let s2 = 0.5 * m.sigma(x).powi(2);
        let curv = dv + v * v;
        let res = s2 * curv + b * v - q;
        worst = worst.max(res.abs() / (q + (b * v).abs() + (s2 * curv).abs()));
    }
    Ok(worst)
}

fn fundamental_lines(sol: &Solution, out: &mut Vec<CheckLine>) -> Result<(), String> {
    let err = |e: crate::fundamental::FundamentalError| e.to_string();
    let (psi, phi) = (&sol.psi, &sol.phi);
    let psi_nodes = psi.nodes();
    let mut min_slope = f64::INFINITY;
    for &x in &psi_nodes {
        min_slope = min_slope.min(psi.deriv(x).map_err(err)?);
    }
    out.push(CheckLine::at_least("fundamental.psi_min_slope", min_slope, f64::MIN_POSITIVE));
    let flips = inflection_sign_changes(psi).map_err(err)?.len() as f64;
    out.push(CheckLine::at_most("fundamental.psi_inflections", flips, 1.0));
    out.push(CheckLine::at_least("fundamental.psi_inflections_present", flips, 1.0));

    let (mut min_sign, mut max_dlog, mut min_curv) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for &x in &phi.nodes() {
        let (_, sign, v) = phi.log_eval(x).map_err(err)?;
        min_sign = min_sign.min(sign);
        max_dlog = max_dlog.max(v);
        min_curv = min_curv.min(phi.second_from_ode(x, 1.0, v));
    }
    out.push(CheckLine::at_least("fundamental.phi_positive", min_sign, 1.0));
    out.push(CheckLine::at_most("fundamental.phi_max_log_slope", max_dlog, -f64::MIN_POSITIVE));
    out.push(CheckLine::at_least("fundamental.phi_min_curvature", min_curv, f64::MIN_POSITIVE));

    let end = (sol.x_hi() - 1.0).min(sol.psi.domain().1 - 1.0);
    let grid = uniform_nodes(0.05, end, 0.05);
    out.push(CheckLine::at_most("fundamental.psi_ode_residual", fundamental_residual(psi, &grid)?, 1e-6));
    out.push(CheckLine::at_most("fundamental.phi_ode_residual", fundamental_residual(phi, &grid)?, 1e-6));
    let lo = sol.phi_tilde.domain().0;
    let neg = uniform_nodes(lo + 0.05, -0.05, 0.05);
    out.push(CheckLine::at_most("fundamental.phi_tilde_ode_residual", fundamental_residual(&sol.phi_tilde, &neg)?, 1e-6));

    if let Ok((cpsi, cphi)) = closed_form_fundamentals(&sol.model, sol.x_hi()) {
        let end = CROSS_CHECK_END.min(psi.domain().1);
        out.push(CheckLine::at_most("fundamental.psi_closed_form_gap", max_relative_gap(psi, &cpsi, 0.0, end, 0.05).map_err(err)?, 1e-7));
        out.push(CheckLine::at_most("fundamental.phi_closed_form_gap", max_relative_gap(phi, &cphi, 0.0, end, 0.05).map_err(err)?, 1e-7));
        if let Backing::ClosedForm(k) = cphi.backing() {
            let tab = phi.log_eval(0.0).map_err(err)?.2;
            out.push(CheckLine::at_most("fundamental.phi_slope_at_origin", (k.slope_at_origin() - tab).abs(), 1e-9));
        }
    }
    Ok(())
}

fn resolvent_lines(sol: &Solution, out: &mut Vec<CheckLine>) {
    let r = &sol.resolvent;
    let c = &r.checks;
    out.push(CheckLine::at_least("resolvent.slope_min", c.slope_min, -1e-9));
    out.push(CheckLine::at_most("resolvent.slope_max", c.slope_max, 1.0 + 1e-9));
    out.push(CheckLine::at_most("resolvent.concavity_defect", c.concavity_defect, 1e-7));
    out.push(CheckLine::at_most("resolvent.envelope_excess", c.envelope_excess, 1e-9));
    out.push(CheckLine::at_most("resolvent.ode_residual", c.ode_residual, 1e-7));
    out.push(CheckLine::at_most("resolvent.c2_gap_at_zero", c.c2_gap_at_zero, 1e-6));

    let m = &sol.model;
    let betas: Vec<f64> = ENVELOPE_POINTS.iter().map(|&xi| envelope_bounds(m, xi).beta).collect();
    let rise = betas.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    out.push(CheckLine::at_most("resolvent.envelope_slope_rise", rise, 0.0));

    let spec = m.spec();
    if let (Some(mu), Some(f)) = (spec.mu.as_affine(), spec.bound.as_affine()) {
        let gap = r
            .if_curve
            .nodes()
            .iter()
            .zip(r.if_curve.values())
            .map(|(&x, &v)| (v - affine_resolvent(mu, f, m.q(), x)).abs())
            .fold(0.0, f64::max);
        out.push(CheckLine::at_most("resolvent.affine_closed_form_gap", gap, 1e-9));
    }
}

fn optimizer_lines(sol: &Solution, cfg: &RunConfig, out: &mut Vec<CheckLine>) {
    for mut l in sol.diagnostics.lines(sol.regime, &cfg.thresholds) {
        l.name = format!("optimizer.{}", l.name);
        out.push(l);
    }
    out.push(CheckLine::at_most("optimizer.barrier_below_inflection", sol.b_star - sol.b_hat, 0.0));
    if sol.regime == Regime::BarrierPositive {
        out.push(CheckLine::at_least("optimizer.barrier_positive", sol.b_star, f64::MIN_POSITIVE));
    }
}

fn z_line(name: &str, est: &PayoffEstimate, reference: f64) -> CheckLine {
    CheckLine::at_most(name, est.z_score(reference).abs(), Z_MAX)
}

fn monte_carlo_lines(sol: &Solution, sim: &SimConfig, out: &mut Vec<CheckLine>) -> Result<(), String> {
    let m: &ExtendedModel = &sol.model;
    let e = |e: crate::simulate::SimError| e.to_string();
    let o = |e: crate::optimizer::OptimizerError| e.to_string();
    let b = sol.b_star;
    let x0 = sim.x0;
    let at = |x: f64| SimConfig { x0: x, ..sim.clone() };

    let v0 = sol.performance_at(b, x0).map_err(o)?;
    out.push(z_line("mc.refraction_z", &simulate_refraction(m, b, sim).map_err(e)?, v0));
    let zero = simulate_refraction(m, b, &at(0.0)).map_err(e)?;
    out.push(CheckLine::at_most("mc.refraction_at_zero", zero.mean.abs() + zero.std_error, 0.0));

    out.push(z_line("mc.first_passage_up_z", &first_passage_up(m, 1.0, &at(0.5)).map_err(e)?, sol.psi.value(0.5).map_err(|e| e.to_string())? / sol.psi.value(1.0).map_err(|e| e.to_string())?));
    let (l2, _, _) = sol.phi.log_eval(2.0).map_err(|e| e.to_string())?;
    let (l1, _, _) = sol.phi.log_eval(1.0).map_err(|e| e.to_string())?;
    out.push(z_line("mc.first_passage_down_z", &first_passage_down(m, 1.0, &at(2.0)).map_err(e)?, (l2 - l1).exp()));

    let half = Policy::new("half rate", {
        let m = sol.model.clone();
        move |x| 0.5 * m.bound(x)
    });
    let late = Policy::new("doubled barrier", {
        let m = sol.model.clone();
        move |x| if x >= 2.0 * b { m.bound(x) } else { 0.0 }
    });
    for (name, p) in [("mc.half_rate_excess", half), ("mc.doubled_barrier_excess", late)] {
        let est = simulate_policy(m, &p, sim).map_err(e)?;
        out.push(CheckLine::at_most(name, (est.mean - v0) / est.std_error.max(f64::MIN_POSITIVE), Z_MAX));
    }

    if b > 0.0 {
        let grid = [0.0, 0.25 * b, 0.5 * b, b, 2.0 * b, 4.0 * b];
        let (_, best) = barrier_tournament(m, &grid, sim).map_err(e)?;
        out.push(CheckLine::at_most("mc.tournament_distance", (best as f64 - 3.0).abs(), 1.0));
    }

    let halving = step_halving(m, b, sim).map_err(e)?;
    out.push(CheckLine::at_most("mc.step_halving_shift", halving.shift.abs() / halving.coarse.std_error.max(f64::MIN_POSITIVE), 1.0));

    let tr = transversality_check(m, &at(1.0), &TRANSVERSALITY_HORIZONS).map_err(e)?;
    let floor = m.q() - m.coeffs(0.0).mu_prime - 0.02;
    out.push(CheckLine::at_least("mc.transversality_rate", tr.rate, floor));

    let r = &sol.resolvent;
    for x in [0.0, 1.0] {
        let est = discounted_integral(m, |y| m.mu(y) - m.q() * y, &at(x)).map_err(e)?;
        out.push(z_line(&format!("mc.dynkin_z_at_{x}"), &est, r.if_curve.value(x) - x));
    }
    out.push(z_line("mc.full_withdrawal_z", &simulate_refraction(m, 0.0, sim).map_err(e)?, r.j0.value(x0)));
    Ok(())
}
