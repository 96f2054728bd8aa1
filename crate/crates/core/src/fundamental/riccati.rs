//! Backward sweep of the logarithmic derivative of the decreasing solution.
//!
//! With `v = φ'/φ` the equation `(𝓛_F − q)φ = 0` becomes the Riccati
//! equation `v' = 2(q − b v)/σ² − v²` with `b = μ − F`. The decreasing
//! solution is the stable direction of this equation when integrated from the
//! right, so the sweep starts at a far point where `v` is replaced by a
//! corrected frozen-coefficient root and runs down to 0. Along the way it
//! carries the source field `s` of the factorised
//! inhomogeneous equation `J' = v J + s`, `s' = (p − v)s + g` with
//! `p = −2b/σ²`, `g = −2F/σ²`.

use crate::model::{Coeffs, ExtendedModel};
use crate::ode::{integrate_nodes, OdeError, OdeOptions};

/// Decay (in e-folds) that the start-up error must undergo before `x_hi`.
const FAR_DECAY: f64 = 40.0;

/// Bound on `∫ (v₊ − v₋)` over the extension, which sets the number of
/// explicit steps needed there.
const STIFFNESS_BUDGET: f64 = 1e5;

/// Fixed-point corrections applied to the frozen-coefficient start value.
const START_CORRECTIONS: u32 = 4;

/// The Riccati data on the working nodes, ascending.
#[derive(Debug, Clone)]
pub(crate) struct Sweep {
    pub xs: Vec<f64>,
    pub v: Vec<f64>,
    pub dv: Vec<f64>,
    pub d2v: Vec<f64>,
    /// `L(x) = ∫_0^x v`, so that `φ = e^L`.
    pub lam: Vec<f64>,
    pub s: Vec<f64>,
    pub ds: Vec<f64>,
    pub d2s: Vec<f64>,
}

/// Negative root of `σ²/2 v² + b v − r = 0` with the coefficients at `x`.
fn negative_root(c: &Coeffs, r: f64) -> Option<f64> {
    let b = c.mu - c.f;
    let s2 = c.sigma * c.sigma;
    let disc = b * b + 2.0 * r * s2;
    if !(disc > 0.0 && s2 > 0.0 && disc.is_finite()) {
        return None;
    }
    let d = disc.sqrt();
    // The two forms avoid cancellation on either sign of b.
    Some(if b >= 0.0 { -(b + d) / s2 } else { -2.0 * r / (d - b) })
}

/// Start value at `x`: the frozen root corrected `n` times by solving
/// `σ²/2 (v² + w') + b v − q = 0` with `w` the previous approximation.
fn start_value(m: &ExtendedModel, x: f64, n: u32) -> Option<f64> {
    let c = m.coeffs(x);
    if n == 0 {
        return negative_root(&c, m.q());
    }
    let h = 0.01 * x.max(1.0);
    let w = |t: f64| start_value(m, t, n - 1);
    let dw = (w(x - 2.0 * h)? - 8.0 * w(x - h)? + 8.0 * w(x + h)? - w(x + 2.0 * h)?) / (12.0 * h);
    let r = m.q() - 0.5 * c.sigma * c.sigma * dw;
    if r > 0.0 {
        negative_root(&c, r)
    } else {
        negative_root(&c, m.q())
    }
}

/// `(v₊ − v₋, v₊)` for the frozen coefficients at `x`: the backward decay
/// rates of perturbations of `v` and of `s`.
fn decay_rates(c: &Coeffs, q: f64) -> (f64, f64) {
    let b = c.mu - c.f;
    let s2 = c.sigma * c.sigma;
    let d = (b * b + 2.0 * q * s2).sqrt();
    let vp = if b > 0.0 { 2.0 * q / (b + d) } else { (d - b) / s2 };
    (2.0 * d / s2, vp)
}

/// Start point of the sweep: far enough right of `x_hi` that the start-up
/// error has decayed by `e^-40` when it reaches `x_hi`, capped at
/// `limit · x_hi`. With `source` the slower decay of the source field is
/// used. The extension stops early where the coefficients stop being usable
/// or the equation becomes too stiff to integrate cheaply.
pub(crate) fn far_point(m: &ExtendedModel, x_hi: f64, limit: f64, source: bool) -> f64 {
    let q = m.q();
    let cap = limit * x_hi.max(1.0);
    let mut x = x_hi;
    let mut acc = 0.0;
    let mut stiffness = 0.0;
    while acc < FAR_DECAY && stiffness < STIFFNESS_BUDGET {
        let h = 0.25 + 0.01 * x;
        if x + h > cap {
            break;
        }
        let c = m.coeffs(x + h);
        if !(c.sigma > 1e-6 && c.mu.is_finite() && c.f.is_finite()) {
            break;
        }
        let (rv, rs) = decay_rates(&c, q);
        acc += h * if source { rs.min(rv) } else { rv };
        stiffness += h * rv;
        x += h;
    }
    x
}

#[inline]
fn rhs(m: &ExtendedModel, x: f64, y: &[f64; 2]) -> [f64; 2] {
    let c = m.coeffs(x);
    let q = m.q();
    let s2 = c.sigma * c.sigma;
    let b = c.mu - c.f;
    let v = y[0];
    let dv = 2.0 * (q - b * v) / s2 - v * v;
    let ds = (-2.0 * b / s2 - v) * y[1] - 2.0 * c.f / s2;
    [dv, ds]
}

/// `(v', v'', s', s'')` at a node from the equations and the coefficient
/// derivatives.
fn derivatives(m: &ExtendedModel, x: f64, v: f64, s: f64) -> [f64; 4] {
    let c = m.coeffs(x);
    let q = m.q();
    let (sg, dsg) = (c.sigma, c.sigma_prime);
    let s2 = sg * sg;
    let s3 = s2 * sg;
    let b = c.mu - c.f;
    let db = c.mu_prime - c.f_prime;
    let dv = 2.0 * (q - b * v) / s2 - v * v;
    let r_x = -2.0 * db * v / s2 - 4.0 * (q - b * v) * dsg / s3;
    let r_v = -2.0 * b / s2 - 2.0 * v;
    let d2v = r_x + r_v * dv;
    let p = -2.0 * b / s2;
    let dp = -2.0 * db / s2 + 4.0 * b * dsg / s3;
    let g = -2.0 * c.f / s2;
    let dg = -2.0 * c.f_prime / s2 + 4.0 * c.f * dsg / s3;
    let ds = (p - v) * s + g;
    let d2s = (dp - dv) * s + (p - v) * ds + dg;
    [dv, d2v, ds, d2s]
}

/// Start value of `v` at `x_far`.
///
/// The corrections converge geometrically, with alternating sign for slowly
/// varying coefficients, so the last three are combined by Aitken's Δ².
pub(crate) fn v_far(m: &ExtendedModel, x_far: f64) -> Result<f64, SweepError> {
    let n = START_CORRECTIONS;
    let missing = SweepError::RootMissing { x: x_far };
    let a = start_value(m, x_far, n - 2).ok_or(missing.clone())?;
    let b = start_value(m, x_far, n - 1).ok_or(missing.clone())?;
    let c = start_value(m, x_far, n).ok_or(missing)?;
    let dd = c - 2.0 * b + a;
    let acc = c - (c - b) * (c - b) / dd;
    // Fall back to the last iterate when the extrapolation is not a refinement.
    Ok(if dd != 0.0 && acc.is_finite() && acc < 0.0 && (acc - c).abs() <= (c - b).abs() { acc } else { c })
}

/// Sweep from `x_far` down to the ascending working nodes `xs`, which must
/// start at 0 and end at or below `x_far`. `s_far` is the source field at
/// `x_far`; pass 0 when only the homogeneous data is needed.
pub(crate) fn sweep(m: &ExtendedModel, xs: &[f64], x_far: f64, s_far: f64, opts: &OdeOptions) -> Result<Sweep, SweepError> {
    let x_top = *xs.last().expect("nonempty nodes");
    let mut y = [v_far(m, x_far)?, s_far];
    if x_far > x_top {
        let far_opts = OdeOptions { h_max: f64::INFINITY, ..*opts };
        let sol = integrate_nodes(|x, y: &[f64; 2]| rhs(m, x, y), &[x_far, x_top], y, &far_opts)?;
        y = sol.values[1];
    }
    let nodes: Vec<f64> = xs.iter().rev().copied().collect();
    let sol = integrate_nodes(|x, y: &[f64; 2]| rhs(m, x, y), &nodes, y, opts)?;
    let n = xs.len();
    let mut out = Sweep {
        xs: xs.to_vec(),
        v: vec![0.0; n],
        dv: vec![0.0; n],
        d2v: vec![0.0; n],
        lam: vec![0.0; n],
        s: vec![0.0; n],
        ds: vec![0.0; n],
        d2s: vec![0.0; n],
    };
    for (k, y) in sol.values.iter().enumerate() {
        let i = n - 1 - k;
        let [dv, d2v, ds, d2s] = derivatives(m, xs[i], y[0], y[1]);
        out.v[i] = y[0];
        out.s[i] = y[1];
        out.dv[i] = dv;
        out.d2v[i] = d2v;
        out.ds[i] = ds;
        out.d2s[i] = d2s;
    }
    // ∫ v over each cell from the quintic Hermite interpolant, compensated.
    let (mut acc, mut comp) = (0.0_f64, 0.0_f64);
    for i in 1..n {
        let h = xs[i] - xs[i - 1];
        let cell = 0.5 * h * (out.v[i - 1] + out.v[i]) + h * h / 10.0 * (out.dv[i - 1] - out.dv[i])
            + h * h * h / 120.0 * (out.d2v[i - 1] + out.d2v[i]);
        let y = cell - comp;
        let t = acc + y;
        comp = (t - acc) - y;
        acc = t;
        out.lam[i] = acc;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub(crate) enum SweepError {
    #[error("Riccati equation has no negative root at x = {x}")]
    RootMissing { x: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::uniform_nodes;
    use crate::model::{prepare, CoefficientSpec, ModelSpec};

    #[test]
    fn constant_coefficients_stay_at_the_root() {
        let spec = ModelSpec::affine((0.2, 0.0), CoefficientSpec::Constant { s0: 0.4 }, (0.1, 0.0), 0.3);
        let m = prepare(&spec, Some(20.0)).unwrap();
        let xs = uniform_nodes(0.0, 20.0, 0.1);
        let sw = sweep(&m, &xs, far_point(&m, 20.0, 1e3, false), 0.0, &OdeOptions::default()).unwrap();
        let theta = ((0.01f64 + 2.0 * 0.3 * 0.16).sqrt() + 0.1) / 0.16;
        for i in 0..xs.len() {
            assert!((sw.v[i] + theta).abs() < 1e-13);
            assert!(sw.dv[i].abs() < 1e-12 && sw.d2v[i].abs() < 1e-12);
        }
        assert!((sw.lam[50] + theta * 5.0).abs() < 1e-12);
    }

    #[test]
    fn stored_derivatives_match_the_table() {
        let spec = ModelSpec::affine((0.09, 0.21), CoefficientSpec::SqrtAffine { s0: 0.3, s1: 0.5 }, (0.3, 0.3), 0.33);
        let m = prepare(&spec, Some(30.0)).unwrap();
        let xs = uniform_nodes(0.0, 30.0, 0.01);
        let sw = sweep(&m, &xs, far_point(&m, 30.0, 1e3, false), 0.0, &OdeOptions::default()).unwrap();
        for i in (100..2900).step_by(97) {
            let fd = (sw.v[i + 1] - sw.v[i - 1]) / 0.02;
            assert!((fd - sw.dv[i]).abs() < 1e-4 * (1.0 + sw.dv[i].abs()));
            let fd2 = (sw.dv[i + 1] - sw.dv[i - 1]) / 0.02;
            assert!((fd2 - sw.d2v[i]).abs() < 1e-4 * (1.0 + sw.d2v[i].abs()));
        }
    }
}
