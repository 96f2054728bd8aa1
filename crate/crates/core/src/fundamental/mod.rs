//! Fundamental solutions of the homogeneous equations.
//!
//! * `ψ`: increasing solution of `(𝓛 − q)u = 0` with `u(0) = 0`, `u'(0) = 1`.
//! * `φ`: decreasing solution of `(𝓛_F − q)u = 0` with `u(0) = 1`, `u(∞) = 0`.
//! * `φ̃`: increasing solution of `(𝓛_F − q)u = 0` on the negative half-line
//!   for the extended coefficients, with `u(0) = 1`, `u(−∞) = 0`.
//!
//! Second derivatives are always taken from the equation itself.

pub mod kernel;
pub(crate) mod riccati;

use std::sync::Arc;

use serde::Serialize;

use crate::curve::{uniform_nodes, Curve, CurveError};
use crate::model::ExtendedModel;
use crate::ode::{integrate_nodes, OdeError, OdeOptions};
use crate::specfun::SpecFunError;
pub use kernel::{ClosedFormKernel, Diffusion, Family, KernelError};
use riccati::SweepError;

/// Default node spacing of tabulated solutions.
pub const GRID_DX: f64 = 0.01;
/// `ψ` integration stops once `|ψ|` or `|ψ'|` passes this size.
pub const PSI_LIMIT: f64 = 1e200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Psi,
    Phi,
    PhiTilde,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backing {
    ClosedForm(ClosedFormKernel),
    /// Value, first and second derivative.
    Tabulated(Curve),
    /// `ln u`, `u'/u` and its derivative.
    LogTabulated(Curve),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FundamentalError {
    #[error("Riccati equation has no negative root at x = {x}")]
    RiccatiRootMissing { x: f64 },
    #[error("right end {x_hi} too short: doubling the start-up buffer moves φ by {sensitivity:e}")]
    DomainTooShort { x_hi: f64, sensitivity: f64 },
    #[error("{kind:?} fails {what} at x = {x}")]
    ShapeViolated { kind: Kind, what: &'static str, x: f64 },
    #[error("g = qψ − μψ' has no sign change on (0, {x_end}]; g(x_end) has sign {sign}")]
    NoSignChange { x_end: f64, sign: f64 },
    #[error("x = {x} outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

impl From<SweepError> for FundamentalError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::RootMissing { x } => FundamentalError::RiccatiRootMissing { x },
            SweepError::Ode(o) => FundamentalError::Ode(o),
        }
    }
}

/// An evaluable fundamental solution.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    kind: Kind,
    backing: Backing,
    domain: (f64, f64),
    model: Arc<ExtendedModel>,
}

impl FundamentalSolution {
    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn backing(&self) -> &Backing {
        &self.backing
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn model(&self) -> &ExtendedModel {
        &self.model
    }

    /// Drift of the equation the solution satisfies.
    fn drift(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Psi => self.model.mu(x),
            Kind::Phi | Kind::PhiTilde => self.model.mu(x) - self.model.bound(x),
        }
    }

    /// `u''` from `σ²/2 u'' + b u' − q u = 0`.
    pub fn second_from_ode(&self, x: f64, u: f64, du: f64) -> f64 {
        let s = self.model.sigma(x);
        2.0 * (self.model.q() * u - self.drift(x) * du) / (s * s)
    }

    fn check(&self, x: f64) -> Result<(), FundamentalError> {
        let (lo, hi) = self.domain;
        if x >= lo && x <= hi {
            Ok(())
        } else {
            Err(FundamentalError::OutOfDomain { x, lo, hi })
        }
    }

    /// `[u, u', u'']` at `x`.
    pub fn eval(&self, x: f64) -> Result<[f64; 3], FundamentalError> {
        self.check(x)?;
        let [u, du] = match &self.backing {
            Backing::ClosedForm(k) => k.eval(x)?,
            Backing::Tabulated(c) => {
                let r = c.eval(x);
                [r[0], r[1]]
            }
            Backing::LogTabulated(c) => {
                let r = c.eval(x);
                let u = r[0].exp();
                [u, u * r[1]]
            }
        };
        Ok([u, du, self.second_from_ode(x, u, du)])
    }

    /// `(ln|u|, sign u, u'/u)` at `x`.
    pub fn log_eval(&self, x: f64) -> Result<(f64, f64, f64), FundamentalError> {
        self.check(x)?;
        match &self.backing {
            Backing::ClosedForm(k) => Ok(k.log_eval(x)?),
            Backing::Tabulated(c) => {
                let r = c.eval(x);
                Ok((r[0].abs().ln(), r[0].signum(), r[1] / r[0]))
            }
            Backing::LogTabulated(c) => {
                let r = c.eval(x);
                Ok((r[0], 1.0, r[1]))
            }
        }
    }

    pub fn value(&self, x: f64) -> Result<f64, FundamentalError> {
        Ok(self.eval(x)?[0])
    }

    pub fn deriv(&self, x: f64) -> Result<f64, FundamentalError> {
        Ok(self.eval(x)?[1])
    }

    pub fn second_deriv(&self, x: f64) -> Result<f64, FundamentalError> {
        Ok(self.eval(x)?[2])
    }

    /// Nodes of a tabulated backing, or a uniform grid for a closed form.
    pub fn nodes(&self) -> Vec<f64> {
        match &self.backing {
            Backing::Tabulated(c) | Backing::LogTabulated(c) => c.nodes().to_vec(),
            Backing::ClosedForm(_) => uniform_nodes(self.domain.0, self.domain.1, GRID_DX),
        }
    }

    /// The underlying table, if any.
    pub fn curve(&self) -> Option<&Curve> {
        match &self.backing {
            Backing::Tabulated(c) | Backing::LogTabulated(c) => Some(c),
            Backing::ClosedForm(_) => None,
        }
    }
}

fn ode_options(tol: f64) -> OdeOptions {
    OdeOptions { rtol: tol, atol: tol * 1e-2, ..Default::default() }
}

/// Largest `h · |ψ''/ψ'|` a cell may have; the quintic interpolant of an
/// exponential loses accuracy like the sixth power of this product.
const PSI_CELL_GROWTH: f64 = 0.1;

/// `ψ` by forward integration on a grid of spacing at most `dx`, refined
/// where `ψ` grows fast. The table ends early if `ψ` outgrows [`PSI_LIMIT`].
pub fn solve_psi(m: &Arc<ExtendedModel>, x_hi: f64, tol: f64, dx: f64) -> Result<FundamentalSolution, FundamentalError> {
    let coarse = integrate_psi(m, &uniform_nodes(0.0, x_hi, dx), tol)?;
    let rate: Vec<f64> = coarse.derivs().iter().zip(coarse.second_derivs()).map(|(d1, d2)| (d2 / d1).abs()).collect();
    let xs = coarse.nodes();
    let mut nodes = vec![xs[0]];
    for i in 1..xs.len() {
        let h = xs[i] - xs[i - 1];
        let pieces = (h * rate[i - 1].max(rate[i]) / PSI_CELL_GROWTH).ceil().max(1.0) as usize;
        nodes.extend((1..=pieces).map(|k| if k == pieces { xs[i] } else { xs[i - 1] + h * k as f64 / pieces as f64 }));
    }
    let fine = if nodes.len() == xs.len() {
        coarse
    } else {
        // Continue past the coarse end so the table still reaches PSI_LIMIT.
        let last = *nodes.last().unwrap();
        if last < x_hi {
            nodes.extend(uniform_nodes(last, x_hi, dx).into_iter().skip(1));
        }
        integrate_psi(m, &nodes, tol)?
    };
    if let Some(i) = (1..fine.len()).find(|&i| !(fine.derivs()[i] > 0.0)) {
        return Err(FundamentalError::ShapeViolated { kind: Kind::Psi, what: "monotonicity", x: fine.nodes()[i] });
    }
    let domain = fine.domain();
    Ok(FundamentalSolution { kind: Kind::Psi, backing: Backing::Tabulated(fine), domain, model: m.clone() })
}

fn integrate_psi(m: &ExtendedModel, nodes: &[f64], tol: f64) -> Result<Curve, FundamentalError> {
    let opts = OdeOptions { y_limit: PSI_LIMIT, ..ode_options(tol) };
    let q = m.q();
    let rhs = |x: f64, y: &[f64; 2]| {
        let s = m.sigma(x);
        2.0 * (q * y[0] - m.mu(x) * y[1]) / (s * s)
    };
    let sol = integrate_nodes(|x, y: &[f64; 2]| [y[1], rhs(x, y)], nodes, [0.0, 1.0], &opts)?;
    let n = sol.values.len();
    let xs = nodes[..n].to_vec();
    let v = sol.values.iter().map(|y| y[0]).collect();
    let d1 = sol.values.iter().map(|y| y[1]).collect();
    let d2 = xs.iter().zip(&sol.values).map(|(&x, y)| rhs(x, y)).collect();
    Ok(Curve::new(xs, v, d1, d2)?)
}

/// `φ` by the backward Riccati sweep, stored in log form.
///
/// The sweep is repeated from a start point twice as far out; if the two
/// tables differ by more than `1e3 · tol` in `ln φ` the domain is reported
/// as too short.
pub fn solve_phi(m: &Arc<ExtendedModel>, x_hi: f64, tol: f64, dx: f64) -> Result<FundamentalSolution, FundamentalError> {
    let xs = uniform_nodes(0.0, x_hi, dx);
    let opts = ode_options(tol);
    let x_far = riccati::far_point(m, x_hi, 1e3, false);
    let sw = riccati::sweep(m, &xs, x_far, 0.0, &opts)?;
    let x_far2 = riccati::far_point(m, x_hi, 2e3, false).max(x_far + (x_far - x_hi));
    let check = riccati::sweep(m, &xs, x_far2, 0.0, &opts)?;
    let sensitivity = sw.lam.iter().zip(&check.lam).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if !(sensitivity <= 1e3 * tol) {
        return Err(FundamentalError::DomainTooShort { x_hi, sensitivity });
    }
    phi_from_sweep(m, &sw)
}

fn phi_from_sweep(m: &Arc<ExtendedModel>, sw: &riccati::Sweep) -> Result<FundamentalSolution, FundamentalError> {
    let q = m.q();
    for (i, &x) in sw.xs.iter().enumerate() {
        if !(sw.v[i] < 0.0) {
            return Err(FundamentalError::ShapeViolated { kind: Kind::Phi, what: "monotonicity", x });
        }
        let c = m.coeffs(x);
        if !(q - (c.mu - c.f) * sw.v[i] > 0.0) {
            return Err(FundamentalError::ShapeViolated { kind: Kind::Phi, what: "convexity", x });
        }
    }
    let domain = (0.0, *sw.xs.last().unwrap());
    let curve = Curve::new(sw.xs.clone(), sw.lam.clone(), sw.v.clone(), sw.dv.clone())?;
    Ok(FundamentalSolution { kind: Kind::Phi, backing: Backing::LogTabulated(curve), domain, model: m.clone() })
}

/// `φ̃` on `[x_lo, 0]` from the closed form for the Ornstein-Uhlenbeck
/// coefficients of the extension.
pub fn solve_phi_tilde(m: &Arc<ExtendedModel>, x_lo: f64) -> Result<FundamentalSolution, FundamentalError> {
    let c0 = m.mu_neg.0 - m.f_neg.0;
    let c1 = m.mu_neg.1 - m.f_neg.1;
    let k = kernel::phi_tilde_kernel(m.sigma_neg, c0, c1, m.q())?;
    Ok(FundamentalSolution { kind: Kind::PhiTilde, backing: Backing::ClosedForm(k), domain: (x_lo, 0.0), model: m.clone() })
}

/// Closed-form `ψ` and `φ` on `[0, x_hi]` for affine drift and bound.
pub fn closed_form_fundamentals(
    m: &Arc<ExtendedModel>,
    x_hi: f64,
) -> Result<(FundamentalSolution, FundamentalSolution), FundamentalError> {
    let spec = m.spec();
    let unsupported = |what: &str| FundamentalError::Kernel(KernelError::UnsupportedFamily(what.into()));
    let (m0, m1) = spec.mu.as_affine().ok_or_else(|| unsupported("drift is not affine"))?;
    let (f0, f1) = spec.bound.as_affine().ok_or_else(|| unsupported("bound is not affine"))?;
    let d = Diffusion::from_spec(&spec.sigma).ok_or_else(|| unsupported("diffusion has no closed form"))?;
    let q = m.q();
    let psi = kernel::psi_kernel(d, m0, m1, q)?;
    let phi = kernel::phi_kernel(d, m0 - f0, m1 - f1, q)?;
    Ok((
        FundamentalSolution { kind: Kind::Psi, backing: Backing::ClosedForm(psi), domain: (0.0, x_hi), model: m.clone() },
        FundamentalSolution { kind: Kind::Phi, backing: Backing::ClosedForm(phi), domain: (0.0, x_hi), model: m.clone() },
    ))
}

/// Largest relative gap in value and in logarithmic derivative between two
/// solutions on `(lo, hi]`, sampled every `step`.
pub fn max_relative_gap(
    a: &FundamentalSolution,
    b: &FundamentalSolution,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<f64, FundamentalError> {
    let mut worst = 0.0_f64;
    for x in uniform_nodes(lo, hi, step).into_iter().skip(1) {
        let (la, _, da) = a.log_eval(x)?;
        let (lb, _, db) = b.log_eval(x)?;
        worst = worst.max(((la - lb).exp() - 1.0).abs().max((da - db).abs() / db.abs().max(1e-300)));
    }
    Ok(worst)
}

/// `g(x) = qψ(x) − μ(x)ψ'(x)`; its sign is the sign of `ψ''`.
fn inflection_indicator(psi: &FundamentalSolution, x: f64) -> Result<f64, FundamentalError> {
    let [u, du, _] = psi.eval(x)?;
    let m = psi.model();
    Ok(m.q() * u - m.mu(x) * du)
}

/// Nodes of `ψ` at which `ψ''` changes sign.
pub fn inflection_sign_changes(psi: &FundamentalSolution) -> Result<Vec<f64>, FundamentalError> {
    let xs = psi.nodes();
    let mut out = Vec::new();
    let mut prev = inflection_indicator(psi, xs[1])?.signum();
    for &x in &xs[2..] {
        let s = inflection_indicator(psi, x)?.signum();
        if s != 0.0 && s != prev {
            out.push(x);
            prev = s;
        }
    }
    Ok(out)
}

/// `b̂`, the inflection point of `ψ`: the first zero of `qψ − μψ'`, found by
/// a node scan and bisection to `1e-10`.
pub fn inflection_point(psi: &FundamentalSolution) -> Result<f64, FundamentalError> {
    let xs = psi.nodes();
    let mut lo = xs[0];
    let mut hi = None;
    for &x in &xs[1..] {
        if inflection_indicator(psi, x)? > 0.0 {
            hi = Some(x);
            break;
        }
        lo = x;
    }
    let Some(mut hi) = hi else {
        let x_end = *xs.last().unwrap();
        return Err(FundamentalError::NoSignChange { x_end, sign: inflection_indicator(psi, x_end)?.signum() });
    };
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if inflection_indicator(psi, mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
