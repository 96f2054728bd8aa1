//! Euler–Maruyama Monte Carlo for the controlled diffusion.
//!
//! Every path owns its own ChaCha8 stream (seed, path index), and results are
//! summed in path order, so estimates are bitwise reproducible for any
//! number of worker threads. The same path index sees the same normals under
//! every policy, which gives common random numbers across barriers.
//!
//! Absorption at a level is detected at step ends and, by default, also
//! inside steps through the Brownian-bridge crossing probability
//! `exp(−2(x_k − ℓ)(x_{k+1} − ℓ)/(σ²(x_k) dt))`, which removes the `O(√dt)`
//! bias of endpoint monitoring.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ExtendedModel;

/// `q · t_max` needed for the discounted tail to fall below `1e-6`.
pub const TAIL_EXPONENT: f64 = 13.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Absorption {
    /// Sign of the state at step ends only.
    Endpoint,
    /// Step ends plus the Brownian-bridge crossing probability.
    #[default]
    Bridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: usize,
    /// Horizon; `None` means `ceil(13.8 / q)`.
    pub t_max: Option<f64>,
    pub seed: u64,
    pub x0: f64,
    pub absorption: Absorption,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-3, n_paths: 100_000, t_max: None, seed: 0, x0: 1.0, absorption: Absorption::Bridge }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
}

impl SimConfig {
    pub fn horizon(&self, q: f64) -> f64 {
        self.t_max.unwrap_or_else(|| (TAIL_EXPONENT / q).ceil())
    }

    pub fn validate(&self, q: f64) -> Result<(), SimError> {
        let bad = |s: String| Err(SimError::ConfigInvalid(s));
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return bad(format!("dt = {} must lie in (0, 0.01]", self.dt));
        }
        if self.n_paths < 2 {
            return bad(format!("n_paths = {} must be at least 2", self.n_paths));
        }
        if !self.x0.is_finite() {
            return bad("x0 must be finite".into());
        }
        let t = self.horizon(q);
        if !(q * t >= TAIL_EXPONENT - 1e-12) {
            return bad(format!("q·t_max = {} is below {TAIL_EXPONENT}", q * t));
        }
        Ok(())
    }

    fn steps(&self, horizon: f64) -> usize {
        (horizon / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Fraction of paths stopped at a boundary before the horizon.
    pub absorbed_fraction: f64,
    /// Mean stopping time over stopped paths (0 if none).
    pub mean_absorption_time: f64,
    /// Bound on the discounted payoff beyond the horizon.
    pub tail_bound: f64,
    /// Policy evaluations that had to be clamped into `[0, F(x)]`.
    pub violations: u64,
}

impl PayoffEstimate {
    /// `(mean − reference) / std_error`, 0 when both are exact.
    pub fn z_score(&self, reference: f64) -> f64 {
        let d = self.mean - reference;
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }
}

/// A withdrawal policy `x ↦ c(x)`, clamped into `[0, F(x)]` when used.
pub struct Policy {
    pub name: String,
    rate: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Policy").field("name", &self.name).finish()
    }
}

impl Policy {
    pub fn new(name: &str, rate: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Policy { name: name.into(), rate: Box::new(rate) }
    }

    pub fn rate(&self, x: f64) -> f64 {
        (self.rate)(x)
    }
}

/// A stopping level with the payoff `e^{−qt} · terminal` on contact.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Level {
    at: f64,
    terminal: f64,
}

/// One batch of paths of `dX = (μ − c)dt + σ dW`, accruing `e^{−qt} r(X) dt`
/// until a level is touched or the horizon is reached.
struct Run<'a, C, R> {
    m: &'a ExtendedModel,
    cfg: &'a SimConfig,
    horizon: f64,
    rate: C,
    reward: R,
    lower: Option<Level>,
    upper: Option<Level>,
    /// Build each normal from two draws, `(z₁ + z₂)/√2`, so that the path
    /// is the one a run with half the step sees.
    paired: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct PathResult {
    payoff: f64,
    stopped_at: Option<f64>,
}

impl<C, R> Run<'_, C, R>
where
    C: Fn(f64) -> f64 + Sync,
    R: Fn(f64) -> f64 + Sync,
{
    fn path(&self, index: u64) -> PathResult {
        let m = self.m;
        let (dt, q) = (self.cfg.dt, m.q());
        let sq = dt.sqrt();
        let decay = (-q * dt).exp();
        let bridge = self.cfg.absorption == Absorption::Bridge;
        let mut x = self.cfg.x0;
        if let Some(l) = self.lower {
            if x <= l.at {
                return PathResult { payoff: l.terminal, stopped_at: Some(0.0) };
            }
        }
        if let Some(u) = self.upper {
            if x >= u.at {
                return PathResult { payoff: u.terminal, stopped_at: Some(0.0) };
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index);
        let mut disc = 1.0;
        let mut acc = 0.0;
        let n = self.cfg.steps(self.horizon);
        for k in 0..n {
            let mut z: f64 = rng.sample(StandardNormal);
            let u: f64 = if bridge { rng.random() } else { 0.0 };
            if self.paired {
                let z2: f64 = rng.sample(StandardNormal);
                if bridge {
                    let _: f64 = rng.random();
                }
                z = (z + z2) * std::f64::consts::FRAC_1_SQRT_2;
            }
            let s = m.sigma(x);
            acc += disc * (self.reward)(x) * dt;
            let next = x + (m.mu(x) - (self.rate)(x)) * dt + s * sq * z;
            disc *= decay;
            let t = (k + 1) as f64 * dt;
            let var = s * s * dt;
            let mut p_low = 0.0;
            if let Some(l) = self.lower {
                if next <= l.at {
                    return PathResult { payoff: acc + disc * l.terminal, stopped_at: Some(t) };
                }
                if bridge {
                    p_low = (-2.0 * (x - l.at) * (next - l.at) / var).exp();
                }
            }
            let mut p_up = 0.0;
            if let Some(h) = self.upper {
                if next >= h.at {
                    return PathResult { payoff: acc + disc * h.terminal, stopped_at: Some(t) };
                }
                if bridge {
                    p_up = (-2.0 * (h.at - x) * (h.at - next) / var).exp();
                }
            }
            if bridge {
                if u < p_low {
                    let l = self.lower.unwrap();
                    return PathResult { payoff: acc + disc * l.terminal, stopped_at: Some(t) };
                }
                if u < p_low + p_up {
                    let h = self.upper.unwrap();
                    return PathResult { payoff: acc + disc * h.terminal, stopped_at: Some(t) };
                }
            }
            x = next;
        }
        PathResult { payoff: acc, stopped_at: None }
    }

    fn results(&self) -> Vec<PathResult> {
        (0..self.cfg.n_paths as u64).into_par_iter().map(|i| self.path(i)).collect()
    }

    fn estimate(&self, tail_bound: f64, violations: u64) -> PayoffEstimate {
        summarize(&self.results(), tail_bound, violations)
    }
}

/// Neumaier-compensated sum in slice order.
fn compensated_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for x in it {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

fn summarize(r: &[PathResult], tail_bound: f64, violations: u64) -> PayoffEstimate {
    let n = r.len();
    let nf = n as f64;
    let mean = compensated_sum(r.iter().map(|p| p.payoff)) / nf;
    let var = compensated_sum(r.iter().map(|p| (p.payoff - mean).powi(2))) / (nf - 1.0);
    let stopped: Vec<f64> = r.iter().filter_map(|p| p.stopped_at).collect();
    let mean_time = if stopped.is_empty() { 0.0 } else { compensated_sum(stopped.iter().copied()) / stopped.len() as f64 };
    PayoffEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        n_paths: n,
        absorbed_fraction: stopped.len() as f64 / nf,
        mean_absorption_time: mean_time,
        tail_bound,
        violations,
    }
}

/// `sup F / q · e^{−q t_max}` with the supremum over the working grid.
fn tail_bound(m: &ExtendedModel, horizon: f64) -> f64 {
    let (_, hi) = (0.0, m.x_hi());
    let n = 200;
    let sup = (0..=n).map(|i| m.bound(hi * i as f64 / n as f64)).fold(0.0, f64::max);
    sup / m.q() * (-m.q() * horizon).exp()
}

/// `J_b(x0)` for the refraction strategy at level `b`.
pub fn simulate_refraction(m: &ExtendedModel, b: f64, cfg: &SimConfig) -> Result<PayoffEstimate, SimError> {
    cfg.validate(m.q())?;
    if !(b >= 0.0) {
        return Err(SimError::ConfigInvalid(format!("barrier {b} must be nonnegative")));
    }
    let horizon = cfg.horizon(m.q());
    let withdraw = |x: f64| if x >= b { m.bound(x) } else { 0.0 };
    let run = Run {
        m,
        cfg,
        horizon,
        rate: withdraw,
        reward: withdraw,
        lower: Some(Level { at: 0.0, terminal: 0.0 }),
        upper: None,
        paired: false,
    };
    Ok(run.estimate(tail_bound(m, horizon), 0))
}

/// Payoff of an arbitrary policy; evaluations outside `[0, F(x)]` are
/// clamped and counted.
pub fn simulate_policy(m: &ExtendedModel, p: &Policy, cfg: &SimConfig) -> Result<PayoffEstimate, SimError> {
    cfg.validate(m.q())?;
    let horizon = cfg.horizon(m.q());
    let violations = AtomicU64::new(0);
    let clamp = |x: f64| {
        let f = m.bound(x).max(0.0);
        let c = p.rate(x);
        if c >= 0.0 && c <= f {
            c
        } else {
            violations.fetch_add(1, Ordering::Relaxed);
            if c.is_nan() { 0.0 } else { c.clamp(0.0, f) }
        }
    };
    let run = Run { m, cfg, horizon, rate: &clamp, reward: &clamp, lower: Some(Level { at: 0.0, terminal: 0.0 }), upper: None, paired: false };
    Ok(summarize(&run.results(), tail_bound(m, horizon), violations.load(Ordering::Relaxed)))
}

/// `E_x[e^{−qκ_b}; κ_b < κ_0]` for the uncontrolled diffusion, `0 < x < b`.
pub fn first_passage_up(m: &ExtendedModel, b: f64, cfg: &SimConfig) -> Result<PayoffEstimate, SimError> {
    cfg.validate(m.q())?;
    let horizon = cfg.horizon(m.q());
    let run = Run {
        m,
        cfg,
        horizon,
        rate: |_| 0.0,
        reward: |_| 0.0,
        lower: Some(Level { at: 0.0, terminal: 0.0 }),
        upper: Some(Level { at: b, terminal: 1.0 }),
        paired: false,
    };
    Ok(run.estimate((-m.q() * horizon).exp(), 0))
}

/// `E_x[e^{−qτ_b}]` for the full-withdrawal diffusion, `x > b`.
pub fn first_passage_down(m: &ExtendedModel, b: f64, cfg: &SimConfig) -> Result<PayoffEstimate, SimError> {
    cfg.validate(m.q())?;
    let horizon = cfg.horizon(m.q());
    let run = Run {
        m,
        cfg,
        horizon,
        rate: |x| m.bound(x),
        reward: |_| 0.0,
        lower: Some(Level { at: b, terminal: 1.0 }),
        upper: None,
        paired: false,
    };
    Ok(run.estimate((-m.q() * horizon).exp(), 0))
}

/// `E_x ∫_0^∞ e^{−qt} r(X_t) dt` for the full-withdrawal diffusion on the
/// whole line (no absorption), truncated at the horizon.
pub fn discounted_integral(m: &ExtendedModel, reward: impl Fn(f64) -> f64 + Sync, cfg: &SimConfig) -> Result<PayoffEstimate, SimError> {
    cfg.validate(m.q())?;
    let horizon = cfg.horizon(m.q());
    let run = Run { m, cfg, horizon, rate: |x| m.bound(x), reward, lower: None, upper: None, paired: false };
    Ok(run.estimate(f64::NAN, 0))
}

/// Estimates of `e^{−qT} E|X_T|` at the horizons and the fitted decay rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transversality {
    /// `(T, estimate, std_error)`
    pub points: Vec<(f64, f64, f64)>,
    /// `−slope` of the least-squares line through `(T, ln estimate)`.
    pub rate: f64,
}

/// Discounted first absolute moment of the full-withdrawal diffusion (no
/// absorption) at each horizon, from one set of paths.
pub fn transversality_check(m: &ExtendedModel, cfg: &SimConfig, horizons: &[f64]) -> Result<Transversality, SimError> {
    if !(cfg.dt > 0.0 && cfg.dt <= 1e-2) || cfg.n_paths < 2 || horizons.len() < 2 {
        return Err(SimError::ConfigInvalid("need dt in (0, 0.01], n_paths ≥ 2 and two horizons".into()));
    }
    let mut hs = horizons.to_vec();
    hs.sort_by(f64::total_cmp);
    let (dt, q) = (cfg.dt, m.q());
    let marks: Vec<usize> = hs.iter().map(|&h| cfg.steps(h)).collect();
    let n = *marks.last().unwrap();
    let sq = dt.sqrt();
    let samples: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i);
            let mut x = cfg.x0;
            let mut out = Vec::with_capacity(marks.len());
            let mut next_mark = 0;
            for k in 1..=n {
                let z: f64 = rng.sample(StandardNormal);
                x += (m.mu(x) - m.bound(x)) * dt + m.sigma(x) * sq * z;
                if k == marks[next_mark] {
                    out.push(x.abs());
                    next_mark += 1;
                }
            }
            out
        })
        .collect();
    let nf = cfg.n_paths as f64;
    let mut points = Vec::with_capacity(hs.len());
    for (j, &h) in hs.iter().enumerate() {
        let mean = compensated_sum(samples.iter().map(|s| s[j])) / nf;
        let var = compensated_sum(samples.iter().map(|s| (s[j] - mean).powi(2))) / (nf - 1.0);
        let d = (-q * h).exp();
        points.push((h, d * mean, d * (var / nf).sqrt()));
    }
    let k = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(Transversality { points, rate: -sxy / sxx })
}

/// The refraction payoff at `dt` and at `dt/2` on the same Brownian paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepHalving {
    pub coarse: PayoffEstimate,
    pub fine: PayoffEstimate,
    /// `fine − coarse`, and its standard error from the paired differences.
    pub shift: f64,
    pub shift_std_error: f64,
}

pub fn step_halving(m: &ExtendedModel, b: f64, cfg: &SimConfig) -> Result<StepHalving, SimError> {
    cfg.validate(m.q())?;
    let fine_cfg = SimConfig { dt: 0.5 * cfg.dt, ..cfg.clone() };
    let horizon = cfg.horizon(m.q());
    let withdraw = |x: f64| if x >= b { m.bound(x) } else { 0.0 };
    let lower = Some(Level { at: 0.0, terminal: 0.0 });
    let coarse = Run { m, cfg, horizon, rate: withdraw, reward: withdraw, lower, upper: None, paired: true }.results();
    let fine = Run { m, cfg: &fine_cfg, horizon, rate: withdraw, reward: withdraw, lower, upper: None, paired: false }.results();
    let tb = tail_bound(m, horizon);
    let d: Vec<PathResult> =
        coarse.iter().zip(&fine).map(|(c, f)| PathResult { payoff: f.payoff - c.payoff, stopped_at: None }).collect();
    let ds = summarize(&d, tb, 0);
    Ok(StepHalving { coarse: summarize(&coarse, tb, 0), fine: summarize(&fine, tb, 0), shift: ds.mean, shift_std_error: ds.std_error })
}

/// Refraction payoffs at several barriers with common random numbers, and
/// the index of the largest.
pub fn barrier_tournament(m: &ExtendedModel, barriers: &[f64], cfg: &SimConfig) -> Result<(Vec<PayoffEstimate>, usize), SimError> {
    let est: Vec<PayoffEstimate> = barriers.iter().map(|&b| simulate_refraction(m, b, cfg)).collect::<Result<_, _>>()?;
    let best = (0..est.len()).max_by(|&i, &j| est[i].mean.total_cmp(&est[j].mean)).unwrap_or(0);
    Ok((est, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{prepare, CoefficientSpec, ModelSpec};

    fn fig1(bound: (f64, f64)) -> ExtendedModel {
        prepare(&ModelSpec::affine((0.09, 0.21), CoefficientSpec::Constant { s0: 0.3 }, bound, 0.33), None).unwrap()
    }

    fn small(x0: f64) -> SimConfig {
        SimConfig { dt: 1e-2, n_paths: 200, x0, seed: 7, ..Default::default() }
    }

    #[test]
    fn trivial_payoffs() {
        let m = fig1((0.3, 0.3));
        let e = simulate_refraction(&m, 0.5, &small(0.0)).unwrap();
        assert_eq!((e.mean, e.std_error, e.absorbed_fraction), (0.0, 0.0, 1.0));
        assert_eq!(e.z_score(0.0), 0.0);
        let z = fig1((0.0, 0.0));
        assert_eq!(simulate_refraction(&z, 0.0, &small(1.0)).unwrap().mean, 0.0);
        let nothing = Policy::new("none", |_| 0.0);
        assert_eq!(simulate_policy(&m, &nothing, &small(1.0)).unwrap().mean, 0.0);
    }

    #[test]
    fn full_rate_policy_matches_barrier_zero() {
        let m = fig1((0.3, 0.3));
        let mm = fig1((0.3, 0.3));
        let full = Policy::new("full", move |x| mm.bound(x));
        for absorption in [Absorption::Bridge, Absorption::Endpoint] {
            let cfg = SimConfig { absorption, ..small(1.0) };
            let a = simulate_refraction(&m, 0.0, &cfg).unwrap();
            let b = simulate_policy(&m, &full, &cfg).unwrap();
            assert_eq!(a.mean.to_bits(), b.mean.to_bits());
            assert_eq!(b.violations, 0);
        }
    }

    #[test]
    fn clamping_counts_violations() {
        let m = fig1((0.3, 0.3));
        let greedy = Policy::new("greedy", |_| 10.0);
        let e = simulate_policy(&m, &greedy, &small(1.0)).unwrap();
        assert!(e.violations > 0);
        let full = simulate_refraction(&m, 0.0, &small(1.0)).unwrap();
        assert_eq!(e.mean.to_bits(), full.mean.to_bits());
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let m = fig1((0.3, 0.3));
        let cfg = small(1.0);
        let a = simulate_refraction(&m, 0.4, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| simulate_refraction(&m, 0.4, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dt: 0.1, ..small(1.0) }.validate(0.33).is_err());
        assert!(SimConfig { t_max: Some(10.0), ..small(1.0) }.validate(0.33).is_err());
        assert!(SimConfig { n_paths: 1, ..small(1.0) }.validate(0.33).is_err());
        assert_eq!(small(1.0).horizon(0.33), 42.0);
        assert!(small(1.0).validate(0.33).is_ok());
    }

    #[test]
    fn constant_drift_transversality_is_deterministic_mean() {
        // σ is tiny relative to the drift, so E|X_T| ≈ x0 + (μ0 − F0)T.
        let spec = ModelSpec::affine((0.5, 0.0), CoefficientSpec::Constant { s0: 1e-3 }, (0.1, 0.0), 0.33);
        let m = prepare(&spec, None).unwrap();
        let cfg = SimConfig { dt: 1e-2, n_paths: 20, x0: 1.0, ..Default::default() };
        let t = transversality_check(&m, &cfg, &[5.0, 10.0]).unwrap();
        for &(h, e, _) in &t.points {
            let exact = (1.0 + 0.4 * h) * (-0.33 * h).exp();
            assert!((e - exact).abs() < 1e-3 * exact, "{h} {e} {exact}");
        }
    }
}
