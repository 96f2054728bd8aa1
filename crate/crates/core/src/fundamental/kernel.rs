//! Closed-form fundamental solutions for affine drift and bound with a
//! constant, affine, or square-root-affine diffusion coefficient.
//!
//! Every solution is a product of an elementary prefactor and a confluent
//! special function. Values are handled in log form and normalised at `x = 0`.

use serde::Serialize;

use crate::model::CoefficientSpec;
use crate::specfun::{self, Scaled, SpecFunError};

/// Slopes below this magnitude use the exponential (constant-coefficient)
/// branches.
pub const SLOPE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `σ(x) = σ`
    SigmaConst,
    /// `σ(x) = σ0 + σ1 x`
    SigmaAffine,
    /// `σ(x)² = σ0 + σ1 x`
    Sigma2Affine,
}

/// Diffusion data of a closed-form family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diffusion {
    Const { sigma: f64 },
    Affine { s0: f64, s1: f64 },
    SquaredAffine { s0: f64, s1: f64 },
}

impl Diffusion {
    /// Recognise a closed-form diffusion coefficient.
    pub fn from_spec(sigma: &CoefficientSpec) -> Option<Diffusion> {
        match *sigma {
            CoefficientSpec::Constant { s0 } => Some(Diffusion::Const { sigma: s0 }),
            CoefficientSpec::Affine { c0, c1: 0.0 } => Some(Diffusion::Const { sigma: c0 }),
            CoefficientSpec::Affine { c0, c1 } if c0 > 0.0 && c1 > 0.0 => Some(Diffusion::Affine { s0: c0, s1: c1 }),
            CoefficientSpec::SqrtAffine { s0, s1 } if s1 == 0.0 && s0 > 0.0 => Some(Diffusion::Const { sigma: s0.sqrt() }),
            CoefficientSpec::SqrtAffine { s0, s1 } if s0 > 0.0 && s1 > 0.0 => {
                Some(Diffusion::SquaredAffine { s0, s1 })
            }
            _ => None,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Diffusion::Const { .. } => Family::SigmaConst,
            Diffusion::Affine { .. } => Family::SigmaAffine,
            Diffusion::SquaredAffine { .. } => Family::Sigma2Affine,
        }
    }

    pub fn variance(&self, x: f64) -> f64 {
        match *self {
            Diffusion::Const { sigma } => sigma * sigma,
            Diffusion::Affine { s0, s1 } => (s0 + s1 * x) * (s0 + s1 * x),
            Diffusion::SquaredAffine { s0, s1 } => s0 + s1 * x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("no closed form for this model: {0}")]
    UnsupportedFamily(String),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Special {
    M,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Arg {
    /// `w = γ s`
    Linear(f64),
    /// `w = α / s`
    Reciprocal(f64),
}

/// One solution of a homogeneous equation, not yet normalised.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Branch {
    /// `exp(rate x)`
    Exp { rate: f64 },
    /// `exp(-x(2c0 + c1 x)/(2σ²)) D_{-λ}(kz (c0 + c1 x))`
    Weber { c0: f64, c1: f64, sigma: f64, lambda: f64, kz: f64 },
    /// `exp(-x(2c0 + c1 x)/(2σ²)) y1(a; kz (c0 + c1 x))` with
    /// `y1(a; z) = exp(-z²/4) M(a/2 + 1/4, 1/2; z²/2)`
    WeberEven { c0: f64, c1: f64, sigma: f64, a: f64, kz: f64 },
    /// `exp(r x) s^e K(A, B; w)` with `s = s0 + s1 x`
    Confluent { r: f64, s0: f64, s1: f64, e: f64, a: f64, b: f64, special: Special, arg: Arg },
}

/// `(ln|u|, sign u, u'/u)`
type LogPoint = (f64, f64, f64);

fn special(kind: Special, a: f64, b: f64, w: f64) -> Result<(Scaled, Scaled), SpecFunError> {
    match kind {
        Special::M => Ok((specfun::kummer_m_scaled(a, b, w)?, specfun::kummer_m_prime_scaled(a, b, w)?)),
        Special::U => Ok((specfun::tricomi_u_scaled(a, b, w)?, specfun::tricomi_u_prime_scaled(a, b, w)?)),
    }
}

impl Branch {
    fn log_eval(&self, x: f64) -> Result<LogPoint, SpecFunError> {
        match *self {
            Branch::Exp { rate } => Ok((rate * x, 1.0, rate)),
            Branch::Weber { c0, c1, sigma, lambda, kz } => {
                let s2 = sigma * sigma;
                let z = kz * (c0 + c1 * x);
                let d = specfun::parabolic_cylinder_d_scaled(lambda, z)?;
                let dp = specfun::parabolic_cylinder_d_prime_scaled(lambda, z)?;
                let ln = -x * (2.0 * c0 + c1 * x) / (2.0 * s2) + d.ln_abs;
                Ok((ln, d.sign, -(c0 + c1 * x) / s2 + kz * c1 * dp.ratio(&d)))
            }
            Branch::WeberEven { c0, c1, sigma, a, kz } => {
                let s2 = sigma * sigma;
                let z = kz * (c0 + c1 * x);
                let (ka, kb) = (0.5 * a + 0.25, 0.5);
                let m = specfun::kummer_m_scaled(ka, kb, 0.5 * z * z)?;
                let mp = specfun::kummer_m_prime_scaled(ka, kb, 0.5 * z * z)?;
                let ln = -x * (2.0 * c0 + c1 * x) / (2.0 * s2) - 0.25 * z * z + m.ln_abs;
                // d/dz ln y1 = -z/2 + z M'/M
                let dlny1 = -0.5 * z + z * mp.ratio(&m);
                Ok((ln, m.sign, -(c0 + c1 * x) / s2 + kz * c1 * dlny1))
            }
            Branch::Confluent { r, s0, s1, e, a, b, special: kind, arg } => {
                let s = s0 + s1 * x;
                let (w, dw) = match arg {
                    Arg::Linear(g) => (g * s, g * s1),
                    Arg::Reciprocal(al) => (al / s, -al * s1 / (s * s)),
                };
                let (k, kp) = special(kind, a, b, w)?;
                let ln = r * x + e * s.ln() + k.ln_abs;
                let dk = if kp.sign == 0.0 { 0.0 } else { kp.ratio(&k) };
                Ok((ln, k.sign, r + e * s1 / s + dw * dk))
            }
        }
    }
}

/// A branch divided by its value at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Normalized {
    branch: Branch,
    ln0: f64,
    sign0: f64,
    dlog0: f64,
}

impl Normalized {
    fn new(branch: Branch) -> Result<Self, KernelError> {
        let (ln0, sign0, dlog0) = branch.log_eval(0.0)?;
        if sign0 == 0.0 || !ln0.is_finite() || !dlog0.is_finite() {
            return Err(KernelError::UnsupportedFamily("kernel vanishes at the origin".into()));
        }
        Ok(Normalized { branch, ln0, sign0, dlog0 })
    }

    /// `(ln|u(x)/u(0)|, sign, u'/u)`
    fn log_eval(&self, x: f64) -> Result<LogPoint, SpecFunError> {
        let (ln, sign, dlog) = self.branch.log_eval(x)?;
        Ok((ln - self.ln0, sign * self.sign0, dlog))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `u(x)/u(0)` of a single branch.
    Single(Normalized),
    /// `x ↦ u(-x)/u(0)`
    Mirrored(Normalized),
    /// `κ (g(x)/g(0) - φ0(x))`
    Increasing { g: Normalized, phi0: Normalized, kappa: f64 },
}

/// A closed-form fundamental solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormKernel {
    pub family: Family,
    shape: Shape,
}

impl ClosedFormKernel {
    /// `(value, derivative)` at `x`.
    pub fn eval(&self, x: f64) -> Result<[f64; 2], SpecFunError> {
        match &self.shape {
            Shape::Single(n) => {
                let (ln, sign, dlog) = n.log_eval(x)?;
                let v = sign * ln.exp();
                Ok([v, v * dlog])
            }
            Shape::Mirrored(n) => {
                let (ln, sign, dlog) = n.log_eval(-x)?;
                let v = sign * ln.exp();
                Ok([v, -v * dlog])
            }
            Shape::Increasing { g, phi0, kappa } => {
                let (lg, sg, dg) = g.log_eval(x)?;
                let (lp, sp, dp) = phi0.log_eval(x)?;
                let gv = sg * lg.exp();
                let pv = sp * lp.exp();
                Ok([kappa * (gv - pv), kappa * (gv * dg - pv * dp)])
            }
        }
    }

    /// `(ln|u|, sign, u'/u)` at `x`; only for the single-branch shapes.
    pub fn log_eval(&self, x: f64) -> Result<(f64, f64, f64), SpecFunError> {
        match &self.shape {
            Shape::Single(n) => n.log_eval(x),
            Shape::Mirrored(n) => {
                let (ln, sign, dlog) = n.log_eval(-x)?;
                Ok((ln, sign, -dlog))
            }
            Shape::Increasing { .. } => {
                let [v, d] = self.eval(x)?;
                Ok((v.abs().ln(), v.signum(), d / v))
            }
        }
    }

    /// `u'(0)/u(0)` for the single-branch shapes, `u'(0)` for `ψ`.
    pub fn slope_at_origin(&self) -> f64 {
        match &self.shape {
            Shape::Single(n) => n.dlog0,
            Shape::Mirrored(n) => -n.dlog0,
            Shape::Increasing { g, phi0, kappa } => kappa * (g.dlog0 - phi0.dlog0),
        }
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

fn unsupported(msg: impl Into<String>) -> KernelError {
    KernelError::UnsupportedFamily(msg.into())
}

/// The decreasing solution of `σ²/2 u'' + (c0 + c1 x) u' - q u = 0`.
fn decreasing_branch(d: Diffusion, c0: f64, c1: f64, q: f64) -> Result<Branch, KernelError> {
    match d {
        Diffusion::Const { sigma } => {
            if c1.abs() <= SLOPE_EPS {
                let s2 = sigma * sigma;
                return Ok(Branch::Exp { rate: -((c0 * c0 + 2.0 * q * s2).sqrt() + c0) / s2 });
            }
            let a_f = q / c1.abs() + 0.5 * sgn(c1);
            Ok(Branch::Weber { c0, c1, sigma, lambda: a_f + 0.5, kz: sgn(c1) * (2.0 / c1.abs()).sqrt() / sigma })
        }
        Diffusion::Affine { s0, s1 } => {
            let s12 = s1 * s1;
            let delta = ((s12 - 2.0 * c1).powi(2) + 8.0 * q * s12).sqrt();
            let a = (delta - s12 + 2.0 * c1) / (2.0 * s12);
            let b = 1.0 + delta / s12;
            let alpha = 2.0 * (c0 * s1 - c1 * s0) / s12;
            Ok(Branch::Confluent { r: 0.0, s0, s1, e: -a, a, b, special: Special::M, arg: Arg::Reciprocal(alpha) })
        }
        Diffusion::SquaredAffine { s0, s1 } => {
            if c1.abs() <= SLOPE_EPS {
                return Err(unsupported("square-root diffusion with zero slope (Bessel case)"));
            }
            let s12 = s1 * s1;
            let a = q / c1.abs();
            let b = 1.0 + 2.0 * (c1 * s0 - c0 * s1) / s12;
            if c1 > 0.0 {
                Ok(Branch::Confluent {
                    r: -2.0 * c1 / s1,
                    s0,
                    s1,
                    e: b,
                    a: 1.0 + a,
                    b: 1.0 + b,
                    special: Special::U,
                    arg: Arg::Linear(2.0 * c1 / s12),
                })
            } else {
                Ok(Branch::Confluent {
                    r: 0.0,
                    s0,
                    s1,
                    e: 0.0,
                    a,
                    b: 1.0 - b,
                    special: Special::U,
                    arg: Arg::Linear(-2.0 * c1 / s12),
                })
            }
        }
    }
}

/// A solution of `σ²/2 u'' + (μ0 + μ1 x) u' - q u = 0` independent of the
/// decreasing one.
fn second_branch(d: Diffusion, m0: f64, m1: f64, q: f64) -> Result<Branch, KernelError> {
    match d {
        Diffusion::Const { sigma } => {
            if m1.abs() <= SLOPE_EPS {
                let s2 = sigma * sigma;
                return Ok(Branch::Exp { rate: ((m0 * m0 + 2.0 * q * s2).sqrt() - m0) / s2 });
            }
            let a0 = q / m1.abs() + 0.5 * sgn(m1);
            Ok(Branch::WeberEven { c0: m0, c1: m1, sigma, a: a0, kz: (2.0 / m1.abs()).sqrt() / sigma })
        }
        Diffusion::Affine { s0, s1 } => {
            let s12 = s1 * s1;
            let delta = ((s12 - 2.0 * m1).powi(2) + 8.0 * q * s12).sqrt();
            let a = (delta - s12 + 2.0 * m1) / (2.0 * s12);
            let b = 1.0 + delta / s12;
            let alpha = 2.0 * (m0 * s1 - m1 * s0) / s12;
            if is_nonpositive_integer(2.0 - b) {
                return Err(unsupported("second Kummer solution has a parameter pole"));
            }
            Ok(Branch::Confluent {
                r: 0.0,
                s0,
                s1,
                e: -a + b - 1.0,
                a: 1.0 + a - b,
                b: 2.0 - b,
                special: Special::M,
                arg: Arg::Reciprocal(alpha),
            })
        }
        Diffusion::SquaredAffine { s0, s1 } => {
            if m1.abs() <= SLOPE_EPS {
                return Err(unsupported("square-root diffusion with zero drift slope (Bessel case)"));
            }
            let s12 = s1 * s1;
            let a = q / m1.abs();
            let b = 1.0 + 2.0 * (m1 * s0 - m0 * s1) / s12;
            let gamma = 2.0 * m1.abs() / s12;
            let branch = if m1 > 0.0 {
                if !is_nonpositive_integer(1.0 + b) {
                    Branch::Confluent { r: -2.0 * m1 / s1, s0, s1, e: b, a: 1.0 + a, b: 1.0 + b, special: Special::M, arg: Arg::Linear(gamma) }
                } else {
                    Branch::Confluent { r: 0.0, s0, s1, e: 0.0, a: -a, b: 1.0 - b, special: Special::M, arg: Arg::Linear(-gamma) }
                }
            } else if !is_nonpositive_integer(1.0 - b) {
                Branch::Confluent { r: 0.0, s0, s1, e: 0.0, a, b: 1.0 - b, special: Special::M, arg: Arg::Linear(gamma) }
            } else {
                Branch::Confluent { r: 0.0, s0, s1, e: b, a: a + b, b: 1.0 + b, special: Special::M, arg: Arg::Linear(gamma) }
            };
            Ok(branch)
        }
    }
}

/// `φ`: decreasing solution with drift `c0 + c1 x`, equal to 1 at the origin.
pub fn phi_kernel(d: Diffusion, c0: f64, c1: f64, q: f64) -> Result<ClosedFormKernel, KernelError> {
    let n = Normalized::new(decreasing_branch(d, c0, c1, q)?)?;
    Ok(ClosedFormKernel { family: d.family(), shape: Shape::Single(n) })
}

/// `ψ`: increasing solution with drift `μ0 + μ1 x`, `ψ(0) = 0`, `ψ'(0) = 1`.
pub fn psi_kernel(d: Diffusion, m0: f64, m1: f64, q: f64) -> Result<ClosedFormKernel, KernelError> {
    let g = Normalized::new(second_branch(d, m0, m1, q)?)?;
    let phi0 = Normalized::new(decreasing_branch(d, m0, m1, q)?)?;
    let w = g.dlog0 - phi0.dlog0;
    if !(w.is_finite() && w.abs() > 1e-300) {
        return Err(unsupported("solutions are not independent at the origin"));
    }
    Ok(ClosedFormKernel { family: d.family(), shape: Shape::Increasing { g, phi0, kappa: 1.0 / w } })
}

/// `φ̃`: the solution increasing on the negative axis for constant `σ` and
/// drift `c0 + c1 x`, equal to 1 at the origin.
pub fn phi_tilde_kernel(sigma: f64, c0: f64, c1: f64, q: f64) -> Result<ClosedFormKernel, KernelError> {
    // u(x) = w(-x) where w is decreasing for the drift -c0 + c1 y.
    let n = Normalized::new(decreasing_branch(Diffusion::Const { sigma }, -c0, c1, q)?)?;
    Ok(ClosedFormKernel { family: Family::SigmaConst, shape: Shape::Mirrored(n) })
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: f64 = 0.33;

    fn residual(k: &ClosedFormKernel, d: Diffusion, c0: f64, c1: f64, x: f64) -> f64 {
        // second derivative from a 5-point stencil
        let h = 1e-3;
        let v = |t: f64| k.eval(t).unwrap()[0];
        let [u, du] = k.eval(x).unwrap();
        let d2 = (-v(x + 2.0 * h) + 16.0 * v(x + h) - 30.0 * u + 16.0 * v(x - h) - v(x - 2.0 * h)) / (12.0 * h * h);
        let terms = [0.5 * d.variance(x) * d2, (c0 + c1 * x) * du, -Q * u];
        terms.iter().sum::<f64>() / terms.iter().map(|t| t.abs()).sum::<f64>()
    }

    fn families() -> [Diffusion; 3] {
        [
            Diffusion::Const { sigma: 0.3 },
            Diffusion::Affine { s0: 0.3, s1: 0.5 },
            Diffusion::SquaredAffine { s0: 0.3, s1: 0.5 },
        ]
    }

    #[test]
    fn kernels_solve_their_equations() {
        for d in families() {
            for &(c0, c1) in &[(-0.21, -0.09), (0.09, 0.21), (0.2, 0.1), (-0.1, -0.4)] {
                let phi = phi_kernel(d, c0, c1, Q).unwrap();
                let psi = psi_kernel(d, c0, c1, Q).unwrap();
                assert_eq!(phi.eval(0.0).unwrap()[0], 1.0);
                let p0 = psi.eval(0.0).unwrap();
                assert!(p0[0].abs() < 1e-15 && (p0[1] - 1.0).abs() < 1e-12, "{d:?} {p0:?}");
                for &x in &[0.01, 0.3, 1.0, 2.5, 6.0] {
                    let rp = residual(&phi, d, c0, c1, x);
                    let rs = residual(&psi, d, c0, c1, x);
                    assert!(rp.abs() < 1e-7, "phi {d:?} c=({c0},{c1}) x={x}: {rp}");
                    assert!(rs.abs() < 1e-7, "psi {d:?} c=({c0},{c1}) x={x}: {rs}");
                }
                let [v, dv] = phi.eval(5.0).unwrap();
                assert!(v > 0.0 && v < 1.0 && dv < 0.0);
            }
        }
    }

    #[test]
    fn exponential_branches() {
        let d = Diffusion::Const { sigma: 0.4 };
        let phi = phi_kernel(d, 0.1, 0.0, Q).unwrap();
        let theta = ((0.01 + 2.0 * Q * 0.16f64).sqrt() + 0.1) / 0.16;
        assert!((phi.eval(2.0).unwrap()[0] - (-theta * 2.0f64).exp()).abs() < 1e-15);
        // μ ≡ 0: ψ = σ/√(2q) sinh(√(2q) x / σ)
        let psi = psi_kernel(d, 0.0, 0.0, Q).unwrap();
        let k = (2.0 * Q).sqrt() / 0.4;
        for &x in &[0.1, 1.0, 3.0] {
            let exact = (x * k).sinh() / k;
            assert!((psi.eval(x).unwrap()[0] - exact).abs() < 1e-13 * exact);
        }
    }

    #[test]
    fn phi_tilde_is_increasing_to_zero() {
        let k = phi_tilde_kernel(0.3, 0.09 - 0.3, 0.21 - 0.3, Q).unwrap();
        assert_eq!(k.eval(0.0).unwrap()[0], 1.0);
        let x_lo = -10.0 * 0.3 / Q.sqrt();
        let mut prev = 0.0;
        for i in 0..=50 {
            let x = x_lo * (1.0 - i as f64 / 50.0);
            let [v, dv] = k.eval(x).unwrap();
            assert!(v > prev && dv > 0.0);
            prev = v;
        }
        assert!(k.eval(x_lo).unwrap()[0] < 1e-3);
        // c1 = 0: exp(η x)
        let e = phi_tilde_kernel(0.3, 0.05, 0.0, Q).unwrap();
        let eta = ((0.0025 + 2.0 * Q * 0.09f64).sqrt() - 0.05) / 0.09;
        assert!((e.eval(-1.0).unwrap()[0] - (-eta).exp()).abs() < 1e-15);
    }

    #[test]
    fn bessel_cases_are_unsupported() {
        let d = Diffusion::SquaredAffine { s0: 0.3, s1: 0.5 };
        assert!(matches!(phi_kernel(d, 0.1, 0.0, Q), Err(KernelError::UnsupportedFamily(_))));
        assert!(matches!(psi_kernel(d, 0.1, 0.0, Q), Err(KernelError::UnsupportedFamily(_))));
    }

    // Explicit slopes at the origin, written out from the parameters.

    #[test]
    fn slope_at_origin_sigma_const() {
        let (sigma, c0, c1): (f64, f64, f64) = (0.3, -0.21, -0.09);
        let a_f = Q / c1.abs() - 0.5;
        let z0 = sgn(c1) * 2f64.sqrt() * c0 / (c1.abs().sqrt() * sigma);
        let lam = a_f + 0.5;
        let d = specfun::parabolic_cylinder_d(lam, z0, 1e-12).unwrap().value;
        let dp = specfun::specfun_derivative(specfun::Which::D { lambda: lam }, z0).unwrap();
        let expected = -c0 / (sigma * sigma) + (2.0 * c1.abs()).sqrt() / sigma * dp / d;
        let k = phi_kernel(Diffusion::Const { sigma }, c0, c1, Q).unwrap();
        assert!((k.slope_at_origin() - expected).abs() < 1e-9);
    }

    #[test]
    fn slope_at_origin_sigma_affine() {
        let (s0, s1, c0, c1): (f64, f64, f64, f64) = (0.3, 0.5, -0.21, -0.09);
        let s12 = s1 * s1;
        let delta = ((s12 - 2.0 * c1).powi(2) + 8.0 * Q * s12).sqrt();
        let a = (delta - s12 + 2.0 * c1) / (2.0 * s12);
        let b = 1.0 + delta / s12;
        let z0 = 2.0 * (c0 * s1 - c1 * s0) / (s12 * s0);
        let m = |a, b| specfun::kummer_m(a, b, z0, 1e-12).unwrap().value;
        let expected = -a * s1 / s0 + 2.0 * (c1 * s0 - c0 * s1) * a / (s1 * s0 * s0 * b) * m(1.0 + a, 1.0 + b) / m(a, b);
        let k = phi_kernel(Diffusion::Affine { s0, s1 }, c0, c1, Q).unwrap();
        assert!((k.slope_at_origin() - expected).abs() < 1e-9, "{} vs {expected}", k.slope_at_origin());
    }

    #[test]
    fn slope_at_origin_sigma2_affine_both_signs() {
        let (s0, s1) = (0.3, 0.5);
        let s12 = s1 * s1;
        let u = |a, b, z| specfun::tricomi_u(a, b, z, 1e-12).unwrap().value;
        // c1 > 0
        let (c0, c1) = (0.2, 0.1);
        let a = Q / c1;
        let b = 1.0 + 2.0 * (c1 * s0 - c0 * s1) / s12;
        let z0 = 2.0 * c1 * s0 / s12;
        let expected = (s1 - 2.0 * c0) / s0 - 2.0 * (c1 + Q) / s1 * u(2.0 + a, 2.0 + b, z0) / u(1.0 + a, 1.0 + b, z0);
        let k = phi_kernel(Diffusion::SquaredAffine { s0, s1 }, c0, c1, Q).unwrap();
        assert!((k.slope_at_origin() - expected).abs() < 1e-9);
        // c1 < 0
        let (c0, c1): (f64, f64) = (-0.21, -0.09);
        let a = Q / c1.abs();
        let b = 1.0 + 2.0 * (c1 * s0 - c0 * s1) / s12;
        let z0 = -2.0 * c1 * s0 / s12;
        let expected = -2.0 * Q / s1 * u(1.0 + a, 2.0 - b, z0) / u(a, 1.0 - b, z0);
        let k = phi_kernel(Diffusion::SquaredAffine { s0, s1 }, c0, c1, Q).unwrap();
        assert!((k.slope_at_origin() - expected).abs() < 1e-9, "{} vs {expected}", k.slope_at_origin());
    }
}
