//! Regime decision, the optimal barrier `b*`, refraction performances `J_b`
//! and the value function with its HJB diagnostics.
//!
//! Every formula is written in terms of `J_0` rather than `I_F`: since
//! `I_F = J_0 + I_F(0)φ` and `φ'/φ = v`, the `I_F(0)` terms cancel from both
//! the barrier equation and `J_b`, which leaves
//!
//! ```text
//! Δ(b)  = 1/v − ψ/ψ' − (J_0'/v − J_0)
//! J_b   = ψ(x) (J_0' − vJ_0)/(ψ' − ψv)                       x ≤ b
//!       = J_0(x) + φ(x)/φ(b) (J_0'ψ − J_0ψ')/(ψ' − ψv)        x ≥ b
//! ```
//!
//! with `v, ψ, J_0` and derivatives taken at `b`. The `I_F` forms are still
//! evaluated alongside as a consistency check.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{uniform_nodes, Curve, CurveError};
use crate::fundamental::{inflection_point, solve_phi, solve_phi_tilde, solve_psi, FundamentalError, FundamentalSolution, GRID_DX};
use crate::model::{prepare, ExtendedModel, ModelError, ModelSpec};
use crate::resolvent::{solve_resolvent, ResolventBundle, ResolventError};

/// `|J_0'(0+) − 1|` below which the regime counts as borderline.
pub const BORDERLINE: f64 = 1e-9;
/// Nodes of the sign scan for `Δ` on `[0, b̂]`.
pub const SCAN_NODES: usize = 1000;
/// Bisection width for `b*`.
pub const ROOT_TOL: f64 = 1e-10;
/// Width of the right end excluded from the HJB residual.
pub const HJB_BUFFER: f64 = 5.0;
/// Number of barriers in the dominance test.
pub const DOMINANCE_BARRIERS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fundamental(#[from] FundamentalError),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("no sign change of the barrier function on (0, {b_hat}] (Δ(b̂) = {delta_end:e})")]
    NoRoot { b_hat: f64, delta_end: f64 },
    #[error("ψ'(b) − ψ(b)φ'(b)/φ(b) = {value:e} at b = {b} is not positive")]
    DenominatorVanishes { b: f64, value: f64 },
    #[error("barrier {b} outside [0, {limit}]")]
    BarrierOutOfRange { b: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BarrierZero,
    BarrierPositive,
}

/// Numerical settings of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Right end of the working domain; `None` picks it from the model.
    pub x_hi: Option<f64>,
    /// Relative tolerance of the ODE solves.
    pub tol: f64,
    /// Node spacing.
    pub grid_dx: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics { x_hi: None, tol: 1e-12, grid_dx: GRID_DX }
    }
}

/// Pass thresholds for [`Diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub smooth_fit: f64,
    pub c2_gap: f64,
    pub hjb_residual: f64,
    pub dominance: f64,
    pub concavity: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { smooth_fit: 1e-8, c2_gap: 1e-6, hjb_residual: 1e-6, dominance: 1e-9, concavity: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `|V'(b*) − 1|`; 0 when `b* = 0`.
    pub smooth_fit_gap: f64,
    /// `|V''(b*−) − V''(b*+)|`; 0 when `b* = 0`.
    pub c2_gap: f64,
    /// Largest `|(𝓛 − q)V + max(0, F(1 − V'))| / (1 + F)` on `[0, x_hi − 5]`,
    /// nodes and cell midpoints.
    pub hjb_residual_max: f64,
    /// `min_b min_x (V − J_b)` over the barrier grid.
    pub dominance_margin: f64,
    pub concavity_defect: f64,
    /// `{V' ≥ 1}` equals `[0, b*]` up to one cell.
    pub region_ok: bool,
    /// `V(0)`
    pub value_at_zero: f64,
    /// Smallest `V'` on the grid.
    pub min_slope: f64,
    /// `|J_0'(0+) − (I_F'(0+) − I_F(0)φ'(0+))|`
    pub regime_forms_gap: f64,
    /// Largest gap between the `J_0` and `I_F` forms of `Δ` over the scan.
    pub delta_forms_gap: f64,
    /// Sign changes of `Δ` on `(0, b̂]`.
    pub sign_changes: usize,
}

/// One named pass/fail line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckLine {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        CheckLine { name: name.into(), value, threshold, pass: value <= threshold }
    }

    pub fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        CheckLine { name: name.into(), value, threshold, pass: value >= threshold }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        CheckLine { name: name.into(), value: if ok { 1.0 } else { 0.0 }, threshold: 1.0, pass: ok }
    }
}

impl Diagnostics {
    pub fn lines(&self, regime: Regime, t: &Thresholds) -> Vec<CheckLine> {
        let mut out = vec![
            CheckLine::at_most("smooth_fit_gap", self.smooth_fit_gap, t.smooth_fit),
            CheckLine::at_most("c2_gap", self.c2_gap, t.c2_gap),
            CheckLine::at_most("hjb_residual_max", self.hjb_residual_max, t.hjb_residual),
            CheckLine::at_least("dominance_margin", self.dominance_margin, -t.dominance),
            CheckLine::flag("region_identity", self.region_ok),
            CheckLine::at_most("value_at_zero", self.value_at_zero.abs(), 1e-12),
            CheckLine::at_least("value_nondecreasing", self.min_slope, -1e-9),
            CheckLine::at_most("regime_forms_gap", self.regime_forms_gap, 1e-9),
        ];
        if regime == Regime::BarrierPositive {
            out.push(CheckLine::at_most("concavity_defect", self.concavity_defect, t.concavity));
        }
        out
    }

    pub fn pass(&self, regime: Regime, t: &Thresholds) -> bool {
        self.lines(regime, t).iter().all(|l| l.pass)
    }
}

/// The pieces shared by every `J_b`.
struct Pieces<'a> {
    m: &'a ExtendedModel,
    psi: &'a FundamentalSolution,
    phi: &'a FundamentalSolution,
    j0: &'a Curve,
    if_curve: &'a Curve,
}

/// `J_b` coefficients at a barrier.
#[derive(Debug, Clone, Copy)]
struct Barrier {
    b: f64,
    /// `J_b = c ψ` below `b`.
    c: f64,
    /// `J_b = J_0 + k φ/φ(b)` above `b`.
    k: f64,
    ln_phi_b: f64,
}

impl Pieces<'_> {
    /// `[J_0, J_0', J_0'']` with the second derivative from the equation.
    fn j0(&self, x: f64) -> [f64; 3] {
        let r = self.j0.eval(x);
        let c = self.m.coeffs(x);
        let d2 = 2.0 * (self.m.q() * r[0] - (c.mu - c.f) * r[1] - c.f) / (c.sigma * c.sigma);
        [r[0], r[1], d2]
    }

    /// `(ln φ, φ'/φ, φ''/φ)`
    fn phi(&self, x: f64) -> Result<(f64, f64, f64), FundamentalError> {
        let (l, _, v) = self.phi.log_eval(x)?;
        let c = self.m.coeffs(x);
        Ok((l, v, 2.0 * (self.m.q() - (c.mu - c.f) * v) / (c.sigma * c.sigma)))
    }

    /// `Δ(b)` in the `J_0` form and in the `I_F` form.
    fn delta(&self, b: f64) -> Result<(f64, f64), FundamentalError> {
        let [p, dp, _] = self.psi.eval(b)?;
        let (_, v, _) = self.phi(b)?;
        let [j, dj, _] = self.j0(b);
        let g = 1.0 / v - p / dp;
        let d_j = g - (dj / v - j);
        let [i, di, _] = self.if_curve.eval(b);
        let d_i = g - (di / v - i);
        Ok((d_j, d_i))
    }

    fn barrier(&self, b: f64) -> Result<Barrier, OptimizerError> {
        let [p, dp, _] = self.psi.eval(b)?;
        let (l, v, _) = self.phi(b)?;
        let [j, dj, _] = self.j0(b);
        let den = dp - p * v;
        if !(den > 0.0) {
            return Err(OptimizerError::DenominatorVanishes { b, value: den });
        }
        Ok(Barrier { b, c: (dj - v * j) / den, k: (dj * p - j * dp) / den, ln_phi_b: l })
    }

    /// `[J_b, J_b', J_b'']` at `x`; at `x = b` the right piece.
    fn eval(&self, br: &Barrier, x: f64) -> Result<[f64; 3], FundamentalError> {
        if x < br.b {
            let [p, dp, d2p] = self.psi.eval(x)?;
            Ok([br.c * p, br.c * dp, br.c * d2p])
        } else {
            let [j, dj, d2j] = self.j0(x);
            let (l, v, w) = self.phi(x)?;
            let e = br.k * (l - br.ln_phi_b).exp();
            Ok([j + e, dj + v * e, d2j + w * e])
        }
    }

    /// `J_b''(b−)`
    fn second_left(&self, br: &Barrier) -> Result<f64, FundamentalError> {
        Ok(br.c * self.psi.eval(br.b)?[2])
    }

    fn curve(&self, br: &Barrier, base: &[f64]) -> Result<Curve, OptimizerError> {
        let xs = insert_node(base, br.b);
        let mut v = Vec::with_capacity(xs.len());
        let mut d1 = Vec::with_capacity(xs.len());
        let mut d2 = Vec::with_capacity(xs.len());
        for &x in &xs {
            let r = self.eval(br, x)?;
            v.push(r[0]);
            d1.push(r[1]);
            d2.push(r[2]);
        }
        Ok(Curve::new(xs, v, d1, d2)?)
    }
}

/// `xs` with `b` added, dropping any node closer than `1e-9` to it.
fn insert_node(xs: &[f64], b: f64) -> Vec<f64> {
    let mut out: Vec<f64> = xs.iter().copied().filter(|&x| (x - b).abs() > 1e-9).collect();
    let i = out.partition_point(|&x| x < b);
    out.insert(i, b);
    out
}

/// The solved control problem.
#[derive(Debug, Clone)]
pub struct Solution {
    pub regime: Regime,
    pub b_star: f64,
    pub b_hat: f64,
    /// `V` on `[0, x_hi]`, with `b*` as a node.
    pub value: Curve,
    pub psi: FundamentalSolution,
    pub phi: FundamentalSolution,
    pub phi_tilde: FundamentalSolution,
    pub resolvent: ResolventBundle,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
    pub model: Arc<ExtendedModel>,
}

impl Solution {
    fn pieces(&self) -> Pieces<'_> {
        Pieces { m: &self.model, psi: &self.psi, phi: &self.phi, j0: &self.resolvent.j0, if_curve: &self.resolvent.if_curve }
    }

    /// Largest barrier for which `J_b` can be formed.
    pub fn barrier_limit(&self) -> f64 {
        self.psi.domain().1.min(self.phi.domain().1)
    }

    /// `J_b` on the value grid with `b` inserted.
    pub fn performance(&self, b: f64) -> Result<Curve, OptimizerError> {
        performance_jb(self, b)
    }

    /// `J_b(x)` for a single point.
    pub fn performance_at(&self, b: f64, x: f64) -> Result<f64, OptimizerError> {
        let p = self.pieces();
        let br = p.barrier(b)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        Ok(p.eval(&br, x)?[0])
    }

    pub fn x_hi(&self) -> f64 {
        self.value.domain().1
    }
}

/// `J_b` for `b ∈ [0, x_hi)` on the value grid of `sol`.
pub fn performance_jb(sol: &Solution, b: f64) -> Result<Curve, OptimizerError> {
    let limit = sol.barrier_limit();
    if !(b >= 0.0 && b < limit) {
        return Err(OptimizerError::BarrierOutOfRange { b, limit });
    }
    let p = sol.pieces();
    let br = p.barrier(b)?;
    p.curve(&br, sol.resolvent.j0.nodes())
}

/// Regime from `J_0'(0+)`; a borderline value counts as `BarrierZero`.
pub fn regime(j0_prime0: f64) -> (Regime, bool) {
    let borderline = (j0_prime0 - 1.0).abs() < BORDERLINE;
    if j0_prime0 > 1.0 && !borderline {
        (Regime::BarrierPositive, false)
    } else {
        (Regime::BarrierZero, borderline)
    }
}

/// Result of the barrier search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSearch {
    pub b_star: f64,
    pub sign_changes: usize,
    pub forms_gap: f64,
}

/// Smallest root of `Δ` in `(0, b̂]`: sign scan on 1000 cells and bisection.
fn find_bstar(p: &Pieces<'_>, b_hat: f64) -> Result<RootSearch, OptimizerError> {
    let nodes = uniform_nodes(0.0, b_hat, b_hat / SCAN_NODES as f64);
    let mut vals = Vec::with_capacity(nodes.len());
    let mut forms_gap = 0.0_f64;
    for &b in &nodes {
        let (dj, di) = p.delta(b)?;
        forms_gap = forms_gap.max((dj - di).abs() / (1.0 + dj.abs()));
        vals.push(dj);
    }
    let s0 = vals[0].signum();
    let mut changes = 0;
    let mut first = None;
    let mut prev = s0;
    for (i, &d) in vals.iter().enumerate().skip(1) {
        let s = d.signum();
        if s != 0.0 && s != prev {
            changes += 1;
            if first.is_none() {
                first = Some(i);
            }
            prev = s;
        } else if s == 0.0 && first.is_none() {
            return Ok(RootSearch { b_star: nodes[i], sign_changes: changes + 1, forms_gap });
        }
    }
    let Some(i) = first else {
        return Err(OptimizerError::NoRoot { b_hat, delta_end: *vals.last().unwrap() });
    };
    let (mut lo, mut hi) = (nodes[i - 1], nodes[i]);
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let d = p.delta(mid)?.0;
        if d == 0.0 {
            lo = mid;
            hi = mid;
        } else if d.signum() == s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(RootSearch { b_star: 0.5 * (lo + hi), sign_changes: changes, forms_gap })
}

fn hjb_point(m: &ExtendedModel, x: f64, r: [f64; 3]) -> f64 {
    let c = m.coeffs(x);
    let lv = 0.5 * c.sigma * c.sigma * r[2] + c.mu * r[1] - m.q() * r[0];
    let res = lv + (c.f * (1.0 - r[1])).max(0.0);
    res.abs() / (1.0 + c.f.abs())
}

/// `max |(𝓛 − q)V + sup_{c ∈ [0, F]} c(1 − V')|`, scaled, on `[0, x_end]`.
pub fn hjb_residual(m: &ExtendedModel, value: &Curve, x_end: f64) -> f64 {
    let xs = value.nodes();
    let mut worst = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        if x > x_end {
            break;
        }
        if x > 0.0 {
            worst = worst.max(hjb_point(m, x, [value.values()[i], value.derivs()[i], value.second_derivs()[i]]));
        }
        if i + 1 < xs.len() {
            let mid = 0.5 * (x + xs[i + 1]);
            worst = worst.max(hjb_point(m, mid, value.eval(mid)));
        }
    }
    worst
}

/// `{V' ≥ 1}` is `[0, b*]` up to one cell.
fn region_identity(value: &Curve, b_star: f64, dx: f64) -> bool {
    value.nodes().iter().zip(value.derivs()).all(|(&x, &d)| {
        if x < b_star - dx {
            d >= 1.0
        } else if x > b_star + dx {
            d < 1.0
        } else {
            true
        }
    })
}

/// Everything up to and including `b̂`, reusable across bounds `F` since
/// neither `ψ` nor `b̂` depends on `F`.
#[derive(Debug, Clone)]
pub struct PsiData {
    pub psi: FundamentalSolution,
    pub b_hat: f64,
}

pub fn solve_psi_data(m: &Arc<ExtendedModel>, numerics: &Numerics) -> Result<PsiData, OptimizerError> {
    let psi = solve_psi(m, m.x_hi(), numerics.tol, numerics.grid_dx)?;
    let b_hat = inflection_point(&psi)?;
    Ok(PsiData { psi, b_hat })
}

/// Full solve of a model.
pub fn solve(spec: &ModelSpec, numerics: &Numerics) -> Result<Solution, OptimizerError> {
    let m = Arc::new(prepare(spec, numerics.x_hi)?);
    let psi = solve_psi_data(&m, numerics)?;
    solve_with_psi(&m, &psi, numerics)
}

/// Solve with a precomputed `ψ` and `b̂`.
pub fn solve_with_psi(m: &Arc<ExtendedModel>, psi_data: &PsiData, numerics: &Numerics) -> Result<Solution, OptimizerError> {
    let PsiData { psi, b_hat } = psi_data;
    let b_hat = *b_hat;
    let phi = solve_phi(m, m.x_hi(), numerics.tol, numerics.grid_dx)?;
    let phi_tilde = solve_phi_tilde(m, m.x_lo())?;
    let resolvent = solve_resolvent(m, &phi, &phi_tilde, numerics.tol, numerics.grid_dx)?;
    let mut warnings = Vec::new();

    let jp0 = resolvent.j0_prime0();
    let if_form = resolvent.if_curve.deriv(0.0) - resolvent.if0 * phi.deriv(0.0)?;
    let regime_forms_gap = (jp0 - if_form).abs();
    let (regime, borderline) = regime(jp0);
    if borderline {
        warnings.push(format!("borderline regime: J_0'(0+) = {jp0:.12}, treated as b* = 0"));
    }

    let pieces = Pieces { m, psi, phi: &phi, j0: &resolvent.j0, if_curve: &resolvent.if_curve };
    let (b_star, sign_changes, delta_forms_gap) = match regime {
        Regime::BarrierZero => (0.0, 0, 0.0),
        Regime::BarrierPositive => {
            let r = find_bstar(&pieces, b_hat)?;
            if r.sign_changes > 1 {
                warnings.push(format!("barrier function changes sign {} times on (0, b̂]; smallest root taken", r.sign_changes));
            }
            (r.b_star, r.sign_changes, r.forms_gap)
        }
    };
    if delta_forms_gap > 1e-10 {
        warnings.push(format!("J_0 and I_F forms of the barrier equation differ by {delta_forms_gap:e}"));
    }

    let br = pieces.barrier(b_star)?;
    let value = pieces.curve(&br, resolvent.j0.nodes())?;
    let (smooth_fit_gap, c2_gap) = if b_star > 0.0 {
        let r = pieces.eval(&br, b_star)?;
        let left = pieces.second_left(&br)?;
        ((r[1] - 1.0).abs(), (r[2] - left).abs())
    } else {
        (0.0, 0.0)
    };
    let x_hi = m.x_hi();
    let hjb_residual_max = hjb_residual(m, &value, x_hi - HJB_BUFFER);

    let b_top = (2.0 * b_hat.max(b_star)).min(0.999 * psi.domain().1.min(x_hi));
    let mut dominance_margin = f64::INFINITY;
    for k in 0..DOMINANCE_BARRIERS {
        let b = b_top * k as f64 / (DOMINANCE_BARRIERS - 1) as f64;
        let bk = pieces.barrier(b)?;
        for (i, &x) in value.nodes().iter().enumerate() {
            let jb = pieces.eval(&bk, x)?[0];
            dominance_margin = dominance_margin.min(value.values()[i] - jb);
        }
    }

    let diagnostics = Diagnostics {
        smooth_fit_gap,
        c2_gap,
        hjb_residual_max,
        dominance_margin,
        concavity_defect: value.concavity_defect(),
        region_ok: region_identity(&value, b_star, numerics.grid_dx),
        value_at_zero: value.value(0.0),
        min_slope: value.derivs().iter().copied().fold(f64::INFINITY, f64::min),
        regime_forms_gap,
        delta_forms_gap,
        sign_changes,
    };
    Ok(Solution {
        regime,
        b_star,
        b_hat,
        value,
        psi: psi.clone(),
        phi,
        phi_tilde,
        resolvent,
        diagnostics,
        warnings,
        model: m.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoefficientSpec;

    fn fig1(bound: (f64, f64)) -> ModelSpec {
        ModelSpec::affine((0.09, 0.21), CoefficientSpec::Constant { s0: 0.3 }, bound, 0.33)
    }

    #[test]
    fn positive_regime_on_the_reference_model() {
        let sol = solve(&fig1((0.3, 0.3)), &Numerics::default()).unwrap();
        assert_eq!(sol.regime, Regime::BarrierPositive);
        assert!(sol.b_star > 0.0 && sol.b_star <= sol.b_hat);
        let d = sol.diagnostics;
        assert!(d.pass(sol.regime, &Thresholds::default()), "{d:?}");
        assert!(sol.warnings.is_empty(), "{:?}", sol.warnings);
        // V'(b*) = 1 and V = ψ/ψ'(b*) below b*
        let dpsi = sol.psi.deriv(sol.b_star).unwrap();
        for x in [0.1, 0.5 * sol.b_star] {
            assert!((sol.value.value(x) - sol.psi.value(x).unwrap() / dpsi).abs() < 1e-9);
        }
        assert!((sol.value.deriv(sol.b_star) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn value_above_the_barrier_has_the_plus_sign() {
        let sol = solve(&fig1((0.3, 0.3)), &Numerics::default()).unwrap();
        let b = sol.b_star;
        let ifc = &sol.resolvent.if_curve;
        let (dphi_b, dif_b) = (sol.phi.deriv(b).unwrap(), ifc.deriv(b));
        for x in [b + 0.5, 3.0, 10.0] {
            let plus = ifc.value(x) + sol.phi.value(x).unwrap() * (1.0 - dif_b) / dphi_b;
            let j0 = sol.resolvent.j0.value(x) + sol.phi.value(x).unwrap() * (1.0 - sol.resolvent.j0.deriv(b)) / dphi_b;
            assert!((sol.value.value(x) - plus).abs() < 1e-9);
            assert!((sol.value.value(x) - j0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_bound_gives_zero_value() {
        let sol = solve(&fig1((0.0, 0.0)), &Numerics::default()).unwrap();
        assert_eq!(sol.regime, Regime::BarrierZero);
        assert_eq!(sol.b_star, 0.0);
        assert!(sol.value.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn small_constant_bound_is_barrier_zero() {
        let sol = solve(&fig1((0.02, 0.0)), &Numerics::default()).unwrap();
        assert_eq!(sol.regime, Regime::BarrierZero);
        assert!(sol.resolvent.j0_prime0() < 1.0);
        // V = J_0
        let j0 = &sol.resolvent.j0;
        for (i, &x) in sol.value.nodes().iter().enumerate().step_by(37) {
            assert!((sol.value.values()[i] - j0.value(x)).abs() < 1e-14);
        }
        assert!(sol.diagnostics.pass(sol.regime, &Thresholds::default()), "{:?}", sol.diagnostics);
    }

    #[test]
    fn performance_pieces() {
        let sol = solve(&fig1((0.3, 0.3)), &Numerics::default()).unwrap();
        let b = 0.5 * sol.b_star;
        let jb = sol.performance(b).unwrap();
        // proportional to ψ below b
        let r1 = jb.value(0.2 * b) / sol.psi.value(0.2 * b).unwrap();
        let r2 = jb.value(0.9 * b) / sol.psi.value(0.9 * b).unwrap();
        assert!((r1 - r2).abs() < 1e-12 * r1.abs());
        // C¹ at b
        let left = jb.eval(b - 1e-7);
        let right = jb.eval(b);
        assert!((left[1] - right[1]).abs() < 1e-6);
        // J_0 at b = 0
        let j0 = sol.performance(0.0).unwrap();
        for x in [0.5, 2.0, 7.0] {
            assert!((j0.value(x) - sol.resolvent.j0.value(x)).abs() < 1e-14);
        }
        // both neighbours lose at b*
        for b in [0.5 * sol.b_star, 2.0 * sol.b_star] {
            assert!(sol.performance_at(b, sol.b_star).unwrap() < sol.value.value(sol.b_star));
        }
    }

    #[test]
    fn logistic_models_pass_the_diagnostics() {
        let specs = [
            ModelSpec {
                mu: CoefficientSpec::Logistic { m0: 0.15, m1: 0.21, k: 10.0 },
                sigma: CoefficientSpec::SqrtAffine { s0: 0.75, s1: 0.5 },
                bound: CoefficientSpec::Affine { c0: 0.3, c1: 0.3 },
                q: 0.33,
            },
            ModelSpec {
                mu: CoefficientSpec::Logistic { m0: 0.25, m1: 0.3, k: 5.0 },
                sigma: CoefficientSpec::SqrtAffine { s0: 0.75, s1: 0.75 },
                bound: CoefficientSpec::Affine { c0: 0.15, c1: 0.25 },
                q: 0.33,
            },
        ];
        for spec in specs {
            let sol = solve(&spec, &Numerics::default()).unwrap();
            assert!(sol.diagnostics.pass(sol.regime, &Thresholds::default()), "{:?} {:?}", sol.regime, sol.diagnostics);
            assert!(sol.b_star <= sol.b_hat);
        }
    }

    #[test]
    fn node_insertion() {
        assert_eq!(insert_node(&[0.0, 1.0, 2.0], 1.5), vec![0.0, 1.0, 1.5, 2.0]);
        assert_eq!(insert_node(&[0.0, 1.0, 2.0], 1.0 + 1e-12), vec![0.0, 1.0 + 1e-12, 2.0]);
        assert_eq!(insert_node(&[0.0, 1.0], 0.0), vec![0.0, 1.0]);
    }
}
