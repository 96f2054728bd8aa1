//! The resolvent functional `I_F`, the always-withdraw performance `J_0`
//! and the envelope constants `(α_ξ, β_ξ)`.
//!
//! `J_0` solves `(𝓛_F − q)J = −F` with `J(0) = 0` and affine growth. With
//! `v = φ'/φ` the equation factorises as `J' = vJ + s`, where the source
//! field `s` solves a first-order linear equation that is stable when
//! integrated from the right. Its far value comes from the envelope slope:
//! asymptotically `I_F ≈ α + βx`, and `s = I_F' − vI_F` for every solution of
//! the form `I_F − cφ`. `J_0` itself is then integrated forward from 0,
//! which is again the stable direction.
//!
//! On the negative half-line the coefficients are affine and `I_F` equals the
//! affine particular solution plus a multiple of `φ̃`; `I_F(0)` is fixed by
//! matching first derivatives at 0.

use serde::Serialize;

use crate::curve::{uniform_nodes, Curve, CurveError};
use crate::fundamental::riccati::{self, SweepError};
use crate::fundamental::{FundamentalError, FundamentalSolution, Kind};
use crate::model::ExtendedModel;
use crate::ode::{integrate_nodes, OdeError, OdeOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolventError {
    #[error("matching denominator φ̃'(0) − φ'(0) = {0} is not positive")]
    MatchingDegenerate(f64),
    #[error("I_F matching residual {what} = {value:e} exceeds tolerance")]
    MatchingResidualTooLarge { what: &'static str, value: f64 },
    #[error("expected {expected:?}, got {got:?}")]
    WrongKind { expected: Kind, got: Kind },
    #[error("Riccati equation has no negative root at x = {0}")]
    RootMissing(f64),
    #[error(transparent)]
    Fundamental(#[from] FundamentalError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

impl From<SweepError> for ResolventError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::RootMissing { x } => ResolventError::RootMissing(x),
            SweepError::Ode(o) => ResolventError::Ode(o),
        }
    }
}

/// Affine upper bound `I_F(x) ≤ α + βx`, tangent to `I_F`-like growth at `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub alpha: f64,
    pub beta: f64,
    /// `F'(ξ) = 0`: the bound is the constant `F(ξ)/q`.
    pub degenerate: bool,
}

/// `(α_ξ, β_ξ)`; for `ξ < 0` the values at 0.
pub fn envelope_bounds(m: &ExtendedModel, xi: f64) -> Envelope {
    let q = m.q();
    let c = m.coeffs(xi.max(0.0));
    if c.f_prime <= 0.0 {
        return Envelope { alpha: c.f / q, beta: 0.0, degenerate: true };
    }
    let xi = xi.max(0.0);
    let beta = c.f_prime / (q - c.mu_prime + c.f_prime);
    let alpha = beta / q * (-q * xi + c.mu + (q - c.mu_prime) * c.f / c.f_prime);
    Envelope { alpha, beta, degenerate: false }
}

/// `I_F` for affine drift and bound: `F0/q + F1 (q x + c0)/(q (q − c1))`.
pub fn affine_resolvent(mu: (f64, f64), bound: (f64, f64), q: f64, x: f64) -> f64 {
    let (c0, c1) = (mu.0 - bound.0, mu.1 - bound.1);
    bound.0 / q + bound.1 * (q * x + c0) / (q * (q - c1))
}

/// `J_0` on the nodes of `φ`, together with the fields used to build it.
#[derive(Debug, Clone)]
pub struct J0Solution {
    pub j0: Curve,
    /// `v = φ'/φ` from the sweep, with two derivatives.
    pub v: Curve,
    /// Source field with two derivatives.
    pub s: Curve,
}

fn ode_options(tol: f64) -> OdeOptions {
    OdeOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() }
}

/// `J_0` on the nodes of the tabulated `φ` (or a uniform grid of spacing
/// `dx` on its domain when `φ` is closed-form).
pub fn solve_j0(m: &ExtendedModel, phi: &FundamentalSolution, tol: f64, dx: f64) -> Result<J0Solution, ResolventError> {
    if phi.kind() != Kind::Phi {
        return Err(ResolventError::WrongKind { expected: Kind::Phi, got: phi.kind() });
    }
    let xs = match phi.curve() {
        Some(c) => c.nodes().to_vec(),
        None => uniform_nodes(0.0, phi.domain().1, dx),
    };
    let x_hi = *xs.last().unwrap();
    let opts = ode_options(tol);
    let x_far = riccati::far_point(m, x_hi, 1e3, true);
    let env = envelope_bounds(m, x_far);
    let v_far = riccati::v_far(m, x_far)?;
    let s_far = env.beta - v_far * (env.alpha + env.beta * x_far);
    let sw = riccati::sweep(m, &xs, x_far, s_far, &opts)?;
    let v = Curve::new(xs.clone(), sw.v.clone(), sw.dv.clone(), sw.d2v.clone())?;
    let s = Curve::new(xs.clone(), sw.s.clone(), sw.ds.clone(), sw.d2s.clone())?;

    let sol = integrate_nodes(
        |x, y: &[f64; 1]| {
            let vx = v.value(x);
            let sx = s.value(x);
            [vx * y[0] + sx]
        },
        &xs,
        [0.0],
        &opts,
    )?;
    let j: Vec<f64> = sol.values.iter().map(|y| y[0]).collect();
    let d1: Vec<f64> = (0..xs.len()).map(|i| sw.v[i] * j[i] + sw.s[i]).collect();
    let d2: Vec<f64> = (0..xs.len()).map(|i| sw.dv[i] * j[i] + sw.v[i] * d1[i] + sw.ds[i]).collect();
    Ok(J0Solution { j0: Curve::new(xs, j, d1, d2)?, v, s })
}

/// `I_F(0)` from first-derivative matching at 0:
/// `(J_0'(0) − β₀ + α₀ φ̃'(0)) / (φ̃'(0) − φ'(0))`.
pub fn compute_if0(
    j0: &Curve,
    phi: &FundamentalSolution,
    phi_tilde: &FundamentalSolution,
    alpha0: f64,
    beta0: f64,
) -> Result<f64, ResolventError> {
    let rt = phi_tilde.deriv(0.0)?;
    let v0 = phi.deriv(0.0)?;
    let den = rt - v0;
    if !(den > 0.0) {
        return Err(ResolventError::MatchingDegenerate(den));
    }
    Ok((j0.deriv(0.0) - beta0 + alpha0 * rt) / den)
}

/// Measured properties of an assembled `I_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventChecks {
    /// Smallest and largest `I_F'` on the grid.
    pub slope_min: f64,
    pub slope_max: f64,
    /// Largest scaled second difference (positive means convex somewhere).
    pub concavity_defect: f64,
    /// `max |(𝓛_F − q)I_F + F| / (1 + |F|)` over nodes and cell midpoints,
    /// with the interpolant's own second derivative at midpoints.
    pub ode_residual: f64,
    /// `max I_F(x) − α_ξ − β_ξ x` over the grid and the test points `ξ`.
    pub envelope_excess: f64,
    /// `|I_F''(0−) − I_F''(0+)|`
    pub c2_gap_at_zero: f64,
    /// `max` over cells of `|ΔJ_0 − ∫ J_0'|`, the Hermite quadrature of the
    /// stored derivative against the stored values.
    pub j0_consistency: f64,
}

/// Everything the optimiser needs from the resolvent.
#[derive(Debug, Clone)]
pub struct ResolventBundle {
    pub j0: Curve,
    pub if_curve: Curve,
    pub if0: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub checks: ResolventChecks,
}

impl ResolventBundle {
    /// `J_0'(0+)`
    pub fn j0_prime0(&self) -> f64 {
        self.j0.deriv(0.0)
    }
}

fn ode_residual(m: &ExtendedModel, x: f64, r: [f64; 3]) -> f64 {
    let c = m.coeffs(x);
    let res = 0.5 * c.sigma * c.sigma * r[2] + (c.mu - c.f) * r[1] - m.q() * r[0] + c.f;
    res.abs() / (1.0 + c.f.abs())
}

/// Envelope test points.
pub const ENVELOPE_POINTS: [f64; 6] = [-1.0, 0.0, 0.5, 1.0, 2.0, 5.0];

/// `I_F` on `[x_lo, x_hi]`: `α₀ + β₀x + (I_F(0) − α₀)φ̃` below 0 and
/// `J_0 + I_F(0)φ` above.
pub fn assemble_if(
    m: &ExtendedModel,
    j0: &Curve,
    phi: &FundamentalSolution,
    phi_tilde: &FundamentalSolution,
    if0: f64,
    env0: Envelope,
    dx: f64,
) -> Result<(Curve, ResolventChecks), ResolventError> {
    let (alpha0, beta0) = (env0.alpha, env0.beta);
    let xl = uniform_nodes(phi_tilde.domain().0, 0.0, dx);
    let mut lv = Vec::with_capacity(xl.len());
    let mut l1 = Vec::with_capacity(xl.len());
    let mut l2 = Vec::with_capacity(xl.len());
    for &x in &xl {
        let [u, du, d2u] = phi_tilde.eval(x)?;
        lv.push(alpha0 + beta0 * x + (if0 - alpha0) * u);
        l1.push(beta0 + (if0 - alpha0) * du);
        l2.push((if0 - alpha0) * d2u);
    }
    let xr = j0.nodes().to_vec();
    let mut rv = Vec::with_capacity(xr.len());
    let mut r1 = Vec::with_capacity(xr.len());
    let mut r2 = Vec::with_capacity(xr.len());
    for (i, &x) in xr.iter().enumerate() {
        let [u, du, d2u] = phi.eval(x)?;
        rv.push(j0.values()[i] + if0 * u);
        r1.push(j0.derivs()[i] + if0 * du);
        r2.push(j0.second_derivs()[i] + if0 * d2u);
    }
    let left = Curve::new(xl, lv, l1, l2)?;
    let right = Curve::new(xr, rv, r1, r2)?;
    let c0_gap = (left.value(0.0) - right.value(0.0)).abs();
    let c1_gap = (left.deriv(0.0) - right.deriv(0.0)).abs();
    let c2_gap = (left.eval(0.0)[2] - right.eval(0.0)[2]).abs();
    if c0_gap > 1e-7 * (1.0 + if0.abs()) {
        return Err(ResolventError::MatchingResidualTooLarge { what: "value gap at 0", value: c0_gap });
    }
    if c1_gap > 1e-7 {
        return Err(ResolventError::MatchingResidualTooLarge { what: "slope gap at 0", value: c1_gap });
    }
    let curve = Curve::join(&left, &right)?;

    let xs = curve.nodes();
    let mut slope_min = f64::INFINITY;
    let mut slope_max = f64::NEG_INFINITY;
    let mut res = 0.0_f64;
    for (i, &x) in xs.iter().enumerate() {
        let r = [curve.values()[i], curve.derivs()[i], curve.second_derivs()[i]];
        slope_min = slope_min.min(r[1]);
        slope_max = slope_max.max(r[1]);
        res = res.max(ode_residual(m, x, r));
        if i + 1 < xs.len() {
            let mid = 0.5 * (x + xs[i + 1]);
            // The cell that straddles 0 mixes two formulas; skip it.
            if !(x < 0.0 && xs[i + 1] > 0.0) {
                res = res.max(ode_residual(m, mid, curve.eval(mid)));
            }
        }
    }
    let mut excess = f64::NEG_INFINITY;
    for &xi in &ENVELOPE_POINTS {
        let e = envelope_bounds(m, xi);
        if m.coeffs(xi.max(0.0)).f_prime <= 0.0 {
            continue;
        }
        for (i, &x) in xs.iter().enumerate() {
            excess = excess.max(curve.values()[i] - e.alpha - e.beta * x);
        }
    }
    let j0_consistency = hermite_consistency(j0);
    let checks = ResolventChecks {
        slope_min,
        slope_max,
        concavity_defect: curve.concavity_defect(),
        ode_residual: res,
        envelope_excess: excess,
        c2_gap_at_zero: c2_gap,
        j0_consistency,
    };
    Ok((curve, checks))
}

/// `max_i |u_{i+1} − u_i − ∫ u'|` with the integral of the quintic Hermite
/// interpolant of `u'` (which needs `u'''`; the cubic rule is used instead).
fn hermite_consistency(c: &Curve) -> f64 {
    let (x, v, d1, d2) = (c.nodes(), c.values(), c.derivs(), c.second_derivs());
    (1..x.len())
        .map(|i| {
            let h = x[i] - x[i - 1];
            let quad = 0.5 * h * (d1[i - 1] + d1[i]) + h * h / 12.0 * (d2[i - 1] - d2[i]);
            (v[i] - v[i - 1] - quad).abs()
        })
        .fold(0.0, f64::max)
}

/// The full resolvent pipeline for given `φ` and `φ̃`.
pub fn solve_resolvent(
    m: &ExtendedModel,
    phi: &FundamentalSolution,
    phi_tilde: &FundamentalSolution,
    tol: f64,
    dx: f64,
) -> Result<ResolventBundle, ResolventError> {
    let j = solve_j0(m, phi, tol, dx)?;
    let env0 = envelope_bounds(m, 0.0);
    let if0 = compute_if0(&j.j0, phi, phi_tilde, env0.alpha, env0.beta)?;
    let (if_curve, checks) = assemble_if(m, &j.j0, phi, phi_tilde, if0, env0, dx)?;
    Ok(ResolventBundle { j0: j.j0, if_curve, if0, alpha0: env0.alpha, beta0: env0.beta, checks })
}
