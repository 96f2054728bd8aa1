//! `b*` over a grid of affine bounds `F(x) = F0 + F1 x`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::SweepConfig;
use crate::model::{prepare, CoefficientSpec, ModelSpec};
use crate::optimizer::{solve_psi_data, solve_with_psi, Numerics, OptimizerError, Regime};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub f0: f64,
    pub f1: f64,
    pub b_star: Option<f64>,
    pub b_hat: f64,
    pub regime: Option<Regime>,
    pub j0_prime0: Option<f64>,
    pub sign_changes: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    /// Row-major in `f0`: cell `(i, j)` is at `i · f1.len() + j`.
    pub cells: Vec<SweepCell>,
}

impl Heatmap {
    pub fn cell(&self, i: usize, j: usize) -> &SweepCell {
        &self.cells[i * self.f1.len() + j]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("f0,f1,b_star,b_hat,regime,j0_prime0,sign_changes,error\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let regime = match c.regime {
                Some(Regime::BarrierZero) => "zero",
                Some(Regime::BarrierPositive) => "positive",
                None => "",
            };
            let err = c.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.f0,
                c.f1,
                opt(c.b_star),
                c.b_hat,
                regime,
                opt(c.j0_prime0),
                c.sign_changes,
                err
            ));
        }
        s
    }

    /// `(i, j)` cells with `b* = 0` that are 4-connected to `(0, 0)`, and
    /// the total number of `b* = 0` cells.
    pub fn zero_region(&self) -> (usize, usize) {
        let (n0, n1) = (self.f0.len(), self.f1.len());
        let zero = |i: usize, j: usize| self.cell(i, j).b_star == Some(0.0);
        let total = (0..n0).flat_map(|i| (0..n1).map(move |j| (i, j))).filter(|&(i, j)| zero(i, j)).count();
        if !zero(0, 0) {
            return (0, total);
        }
        let mut seen = vec![false; n0 * n1];
        let mut stack = vec![(0, 0)];
        seen[0] = true;
        let mut count = 0;
        while let Some((i, j)) = stack.pop() {
            count += 1;
            let mut push = |a: usize, b: usize| {
                if zero(a, b) && !seen[a * n1 + b] {
                    seen[a * n1 + b] = true;
                    stack.push((a, b));
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < n0 {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < n1 {
                push(i, j + 1);
            }
        }
        (count, total)
    }

    /// Largest decrease of `b*` between neighbours along either axis.
    pub fn worst_decrease(&self) -> f64 {
        let (n0, n1) = (self.f0.len(), self.f1.len());
        let mut worst = 0.0_f64;
        for i in 0..n0 {
            for j in 0..n1 {
                let Some(b) = self.cell(i, j).b_star else { continue };
                if i + 1 < n0 {
                    if let Some(n) = self.cell(i + 1, j).b_star {
                        worst = worst.max(b - n);
                    }
                }
                if j + 1 < n1 {
                    if let Some(n) = self.cell(i, j + 1).b_star {
                        worst = worst.max(b - n);
                    }
                }
            }
        }
        worst
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }
}

/// Solve every cell, in parallel. `ψ` and `b̂` depend only on the drift and
/// diffusion, so they are computed once; all cells share one `x_hi`.
pub fn run_sweep(base: &ModelSpec, sweep: &SweepConfig, numerics: &Numerics) -> Result<Heatmap, OptimizerError> {
    let f0 = sweep.f0_values();
    let f1 = sweep.f1_values();
    let bound = |a: f64, b: f64| CoefficientSpec::Affine { c0: a, c1: b };
    let x_hi = numerics.x_hi.unwrap_or_else(|| {
        [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(i, j)| base.with_bound(bound(sweep.f0_range[i], sweep.f1_range[j])).default_x_hi())
            .fold(0.0, f64::max)
    });
    let numerics = Numerics { x_hi: Some(x_hi), ..*numerics };
    let anchor = Arc::new(prepare(&base.with_bound(bound(sweep.f0_range[0], sweep.f1_range[0])), Some(x_hi))?);
    let psi = solve_psi_data(&anchor, &numerics)?;
    let jobs: Vec<(f64, f64)> = f0.iter().flat_map(|&a| f1.iter().map(move |&b| (a, b))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(a, b)| {
            let spec = base.with_bound(bound(a, b));
            let res = prepare(&spec, Some(x_hi)).map_err(OptimizerError::from).and_then(|m| solve_with_psi(&Arc::new(m), &psi, &numerics));
            match res {
                Ok(sol) => SweepCell {
                    f0: a,
                    f1: b,
                    b_star: Some(sol.b_star),
                    b_hat: psi.b_hat,
                    regime: Some(sol.regime),
                    j0_prime0: Some(sol.resolvent.j0_prime0()),
                    sign_changes: sol.diagnostics.sign_changes,
                    error: None,
                },
                Err(e) => SweepCell {
                    f0: a,
                    f1: b,
                    b_star: None,
                    b_hat: psi.b_hat,
                    regime: None,
                    j0_prime0: None,
                    sign_changes: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(Heatmap { f0, f1, cells })
}
