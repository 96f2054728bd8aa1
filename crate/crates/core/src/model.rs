//! Problem datum: drift, diffusion, withdrawal bound and discount rate.
//!
//! A [`ModelSpec`] is checked once by [`validate_model`] and then extended to
//! the whole real line by [`extend_to_real_line`]. Below zero the drift and the
//! bound continue as their tangent lines at `0+` and the diffusion is frozen
//! at `σ(0)`, which turns the full-withdrawal process into an
//! Ornstein-Uhlenbeck process on the negative half-line.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Default concavity tolerance for discrete second differences.
pub const CONCAVITY_TOL: f64 = 1e-9;
/// Default lower bound on the diffusion coefficient.
pub const SIGMA_EPS: f64 = 1e-6;
/// Default right end of the working domain.
pub const X_MAX: f64 = 50.0;

/// What a coefficient is used for. Validation rules depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Drift,
    Diffusion,
    Bound,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Drift => f.write_str("drift"),
            Role::Diffusion => f.write_str("diffusion"),
            Role::Bound => f.write_str("bound"),
        }
    }
}

/// One coefficient function on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    /// `c0 + c1 x`
    Affine { c0: f64, c1: f64 },
    /// `m0 + m1 x (1 - x / k)`; drift only.
    Logistic { m0: f64, m1: f64, k: f64 },
    /// `sqrt(s0 + s1 x)`; diffusion only.
    SqrtAffine { s0: f64, s1: f64 },
    /// `s0`
    Constant { s0: f64 },
    /// Samples `(x, value, derivative)` joined by cubic Hermite pieces and
    /// continued linearly past the last sample.
    Custom { table: Vec<[f64; 3]> },
}

impl CoefficientSpec {
    /// Value and first derivative at `x >= 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match self {
            CoefficientSpec::Affine { c0, c1 } => (c0 + c1 * x, *c1),
            CoefficientSpec::Logistic { m0, m1, k } => {
                (m0 + m1 * x * (1.0 - x / k), m1 * (1.0 - 2.0 * x / k))
            }
            CoefficientSpec::SqrtAffine { s0, s1 } => {
                let v = (s0 + s1 * x).sqrt();
                (v, 0.5 * s1 / v)
            }
            CoefficientSpec::Constant { s0 } => (*s0, 0.0),
            CoefficientSpec::Custom { table } => eval_table(table, x),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    fn check_shape(&self, role: Role, out: &mut Vec<Violation>) {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        let ok = match self {
            CoefficientSpec::Affine { c0, c1 } => finite(&[*c0, *c1]),
            CoefficientSpec::Logistic { m0, m1, k } => {
                if role != Role::Drift {
                    out.push(Violation::KindNotAllowed { role, kind: "logistic" });
                }
                finite(&[*m0, *m1, *k]) && *k > 0.0
            }
            CoefficientSpec::SqrtAffine { s0, s1 } => {
                if role != Role::Diffusion {
                    out.push(Violation::KindNotAllowed { role, kind: "sqrt_affine" });
                }
                finite(&[*s0, *s1])
            }
            CoefficientSpec::Constant { s0 } => finite(&[*s0]),
            CoefficientSpec::Custom { table } => {
                if table.len() < 2 {
                    out.push(Violation::BadTable { role, reason: "fewer than two samples".into() });
                }
                if table.first().map(|r| r[0] > 0.0).unwrap_or(false) {
                    out.push(Violation::BadTable { role, reason: "first abscissa must be 0".into() });
                }
                if table.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    out.push(Violation::BadTable {
                        role,
                        reason: "abscissae not strictly increasing".into(),
                    });
                }
                table.iter().all(|r| finite(r))
            }
        };
        if !ok {
            out.push(Violation::NonFinite { role });
        }
    }

    /// Affine data `(value, slope)` when the coefficient is affine on `[0, ∞)`.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match self {
            CoefficientSpec::Affine { c0, c1 } => Some((*c0, *c1)),
            CoefficientSpec::Constant { s0 } => Some((*s0, 0.0)),
            _ => None,
        }
    }
}

fn eval_table(table: &[[f64; 3]], x: f64) -> (f64, f64) {
    let n = table.len();
    let last = table[n - 1];
    if x >= last[0] {
        return (last[1] + last[2] * (x - last[0]), last[2]);
    }
    if x <= table[0][0] {
        let first = table[0];
        return (first[1] + first[2] * (x - first[0]), first[2]);
    }
    let i = table.partition_point(|r| r[0] <= x) - 1;
    let [x0, y0, d0] = table[i];
    let [x1, y1, d1] = table[i + 1];
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let y = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dy = ((6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * h * d0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * h * d1)
        / h;
    (y, dy)
}

/// The problem datum `(μ, σ, F, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub mu: CoefficientSpec,
    pub sigma: CoefficientSpec,
    pub bound: CoefficientSpec,
    pub q: f64,
}

impl ModelSpec {
    /// Affine drift, affine bound and the given diffusion.
    pub fn affine(mu: (f64, f64), sigma: CoefficientSpec, bound: (f64, f64), q: f64) -> Self {
        ModelSpec {
            mu: CoefficientSpec::Affine { c0: mu.0, c1: mu.1 },
            sigma,
            bound: CoefficientSpec::Affine { c0: bound.0, c1: bound.1 },
            q,
        }
    }

    /// Same model with a different bound function.
    pub fn with_bound(&self, bound: CoefficientSpec) -> Self {
        ModelSpec { bound, ..self.clone() }
    }

    /// Default right end of the working domain.
    pub fn default_x_hi(&self) -> f64 {
        let scale = self.mu.value(0.0) + self.bound.value(1.0).abs();
        X_MAX.max(10.0 * scale / self.q)
    }
}

/// A single failed standing assumption.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DriftAtZeroNonpositive { mu0: f64 },
    DiscountTooSmall { mu_prime0: f64, q: f64 },
    DiscountNonpositive { q: f64 },
    DiffusionDegenerate { x: f64, sigma: f64 },
    DiffusionNotLipschitz { x: f64 },
    BoundNegativeAtZero { f0: f64 },
    BoundNotMonotone { x: f64 },
    NotConcave { role: Role, x: f64 },
    KindNotAllowed { role: Role, kind: &'static str },
    BadTable { role: Role, reason: String },
    NonFinite { role: Role },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DriftAtZeroNonpositive { mu0 } => {
                write!(f, "drift at zero must be positive (mu(0) = {mu0})")
            }
            Violation::DiscountTooSmall { mu_prime0, q } => {
                write!(f, "discount rate must exceed mu'(0+) (mu'(0+) = {mu_prime0}, q = {q})")
            }
            Violation::DiscountNonpositive { q } => write!(f, "discount rate must be positive (q = {q})"),
            Violation::DiffusionDegenerate { x, sigma } => {
                write!(f, "diffusion not bounded away from zero (sigma({x}) = {sigma})")
            }
            Violation::DiffusionNotLipschitz { x } => write!(f, "diffusion not Lipschitz near x = {x}"),
            Violation::BoundNegativeAtZero { f0 } => write!(f, "bound must satisfy F(0) >= 0 (F(0) = {f0})"),
            Violation::BoundNotMonotone { x } => write!(f, "bound decreases near x = {x}"),
            Violation::NotConcave { role, x } => write!(f, "{role} is not concave near x = {x}"),
            Violation::KindNotAllowed { role, kind } => write!(f, "kind `{kind}` is not allowed for the {role}"),
            Violation::BadTable { role, reason } => write!(f, "{role} table: {reason}"),
            Violation::NonFinite { role } => write!(f, "{role} has non-finite or invalid parameters"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("model violates the standing assumptions: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("x = {x} lies outside the working domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// A model that passed [`validate_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    spec: ModelSpec,
    x_hi: f64,
}

impl ValidatedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }
}

/// Check every standing assumption on a uniform grid over `[0, x_hi]`.
pub fn validate_model(spec: &ModelSpec) -> Result<ValidatedModel, ModelError> {
    validate_model_on(spec, spec.default_x_hi())
}

pub fn validate_model_on(spec: &ModelSpec, x_hi: f64) -> Result<ValidatedModel, ModelError> {
    let mut out = Vec::new();
    spec.mu.check_shape(Role::Drift, &mut out);
    spec.sigma.check_shape(Role::Diffusion, &mut out);
    spec.bound.check_shape(Role::Bound, &mut out);
    if !out.is_empty() {
        return Err(ModelError::Invalid(out));
    }
    let q = spec.q;
    if !(q > 0.0 && q.is_finite()) {
        out.push(Violation::DiscountNonpositive { q });
    }
    let (mu0, dmu0) = spec.mu.eval(0.0);
    if !(mu0 > 0.0) {
        out.push(Violation::DriftAtZeroNonpositive { mu0 });
    }
    if !(dmu0 < q) {
        out.push(Violation::DiscountTooSmall { mu_prime0: dmu0, q });
    }
    let f0 = spec.bound.value(0.0);
    if !(f0 >= 0.0) {
        out.push(Violation::BoundNegativeAtZero { f0 });
    }

    // σ must stay away from zero on all of [0, ∞): closed families are
    // checked asymptotically, everything on the grid.
    match spec.sigma {
        CoefficientSpec::Affine { c1, .. } | CoefficientSpec::SqrtAffine { s1: c1, .. } if c1 < 0.0 => {
            out.push(Violation::DiffusionDegenerate {
                x: f64::INFINITY,
                sigma: f64::NEG_INFINITY,
            });
        }
        _ => {}
    }

    let n = 5000usize;
    let h = x_hi / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let mu: Vec<f64> = xs.iter().map(|&x| spec.mu.value(x)).collect();
    let fb: Vec<f64> = xs.iter().map(|&x| spec.bound.value(x)).collect();
    let sg: Vec<f64> = xs.iter().map(|&x| spec.sigma.value(x)).collect();

    if let Some(i) = sg.iter().position(|s| !(*s >= SIGMA_EPS)) {
        out.push(Violation::DiffusionDegenerate { x: xs[i], sigma: sg[i] });
    }
    if let CoefficientSpec::Custom { table } = &spec.sigma {
        // Lipschitz: bounded difference quotients between samples.
        let worst = table
            .windows(2)
            .map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).abs())
            .fold(0.0_f64, f64::max);
        if !worst.is_finite() || worst > 1e6 {
            out.push(Violation::DiffusionNotLipschitz { x: 0.0 });
        }
    }
    let mono_tol = 1e-12 * (1.0 + fb.iter().fold(0.0_f64, |a, b| a.max(b.abs())));
    if let Some(i) = (1..=n).find(|&i| fb[i] < fb[i - 1] - mono_tol) {
        out.push(Violation::BoundNotMonotone { x: xs[i] });
    }
    for (role, vals) in [(Role::Drift, &mu), (Role::Bound, &fb)] {
        if let Some(x) = first_convex_point(&xs, vals, CONCAVITY_TOL) {
            out.push(Violation::NotConcave { role, x });
        }
    }
    if out.is_empty() {
        Ok(ValidatedModel { spec: spec.clone(), x_hi })
    } else {
        Err(ModelError::Invalid(out))
    }
}

fn first_convex_point(xs: &[f64], v: &[f64], tol: f64) -> Option<f64> {
    let scale = 1.0 + v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    (1..v.len() - 1)
        .find(|&i| v[i + 1] - 2.0 * v[i] + v[i - 1] > tol * scale)
        .map(|i| xs[i])
}

/// Coefficients at a point, with the one-sided derivatives of `μ` and `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub mu: f64,
    pub sigma: f64,
    pub f: f64,
    pub mu_prime: f64,
    pub f_prime: f64,
    pub sigma_prime: f64,
}

/// A validated model defined on the whole real line.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedModel {
    base: ValidatedModel,
    /// `(μ(0), μ'(0+))`
    pub mu_neg: (f64, f64),
    /// `(F(0), F'(0+))`
    pub f_neg: (f64, f64),
    /// `σ(0)`
    pub sigma_neg: f64,
    x_lo: f64,
}

pub fn extend_to_real_line(m: &ValidatedModel) -> ExtendedModel {
    let spec = &m.spec;
    let mu_neg = spec.mu.eval(0.0);
    let f_neg = spec.bound.eval(0.0);
    let sigma_neg = spec.sigma.value(0.0);
    let x_lo = -10.0 * sigma_neg / spec.q.sqrt();
    ExtendedModel { base: m.clone(), mu_neg, f_neg, sigma_neg, x_lo }
}

impl ExtendedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.base.spec
    }

    pub fn validated(&self) -> &ValidatedModel {
        &self.base
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.base.spec.q
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.base.x_hi
    }

    /// All coefficients at any real `x`; the extension is used below zero.
    #[inline]
    pub fn coeffs(&self, x: f64) -> Coeffs {
        if x < 0.0 {
            Coeffs {
                mu: self.mu_neg.0 + self.mu_neg.1 * x,
                sigma: self.sigma_neg,
                f: self.f_neg.0 + self.f_neg.1 * x,
                mu_prime: self.mu_neg.1,
                f_prime: self.f_neg.1,
                sigma_prime: 0.0,
            }
        } else {
            let s = &self.base.spec;
            let (mu, mu_prime) = s.mu.eval(x);
            let (f, f_prime) = s.bound.eval(x);
            let (sigma, sigma_prime) = s.sigma.eval(x);
            Coeffs { mu, sigma, f, mu_prime, f_prime, sigma_prime }
        }
    }

    /// Checked form of [`ExtendedModel::coeffs`] on the working domain.
    pub fn eval_coeffs(&self, x: f64) -> Result<Coeffs, ModelError> {
        let (lo, hi) = (self.x_lo, self.x_hi());
        if !(x >= lo && x <= hi) {
            return Err(ModelError::OutOfDomain { x, lo, hi });
        }
        Ok(self.coeffs(x))
    }

    #[inline]
    pub fn mu(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.mu_neg.0 + self.mu_neg.1 * x
        } else {
            self.base.spec.mu.value(x)
        }
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.sigma_neg
        } else {
            self.base.spec.sigma.value(x)
        }
    }

    #[inline]
    pub fn bound(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.f_neg.0 + self.f_neg.1 * x
        } else {
            self.base.spec.bound.value(x)
        }
    }

    /// Same diffusion with a different bound function, revalidated.
    pub fn with_bound(&self, bound: CoefficientSpec) -> Result<ExtendedModel, ModelError> {
        let spec = self.spec().with_bound(bound);
        let v = validate_model_on(&spec, self.x_hi())?;
        Ok(extend_to_real_line(&v))
    }
}

/// Validate and extend in one go.
pub fn prepare(spec: &ModelSpec, x_hi: Option<f64>) -> Result<ExtendedModel, ModelError> {
    let v = match x_hi {
        Some(x) => validate_model_on(spec, x)?,
        None => validate_model(spec)?,
    };
    Ok(extend_to_real_line(&v))
}
