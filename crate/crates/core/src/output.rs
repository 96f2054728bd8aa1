//! CSV tables and JSON summaries of a solution.
//!
//! Numbers are written in the shortest form that reads back exactly, with a
//! `.` decimal point; cells outside a function's domain are left empty.

use serde::Serialize;

use crate::curve::uniform_nodes;
use crate::fundamental::FundamentalSolution;
use crate::model::ModelSpec;
use crate::optimizer::{CheckLine, Diagnostics, Regime, Solution, Thresholds};

/// Rows of optional numbers under a header.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<Option<f64>>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("ASCII output")
}

/// `x, V, V', V''` on the nodes of the value curve.
pub fn value_csv(sol: &Solution) -> String {
    let v = &sol.value;
    let rows = (0..v.len()).map(|i| vec![Some(v.nodes()[i]), Some(v.values()[i]), Some(v.derivs()[i]), Some(v.second_derivs()[i])]);
    csv_table(&["x", "V", "V'", "V''"], rows)
}

fn triple(u: &FundamentalSolution, x: f64) -> [Option<f64>; 3] {
    let (lo, hi) = u.domain();
    match u.eval(x) {
        Ok(r) if x >= lo && x <= hi => r.map(Some),
        _ => [None; 3],
    }
}

/// `ψ, φ, φ̃` and their first two derivatives every `dx` over the working
/// domain.
pub fn fundamentals_csv(sol: &Solution, dx: f64) -> String {
    let (lo, hi) = (sol.phi_tilde.domain().0, sol.x_hi());
    let rows = uniform_nodes(lo, hi, dx).into_iter().map(|x| {
        let mut row = vec![Some(x)];
        for u in [&sol.psi, &sol.phi, &sol.phi_tilde] {
            row.extend(triple(u, x));
        }
        row
    });
    csv_table(&["x", "psi", "psi'", "psi''", "phi", "phi'", "phi''", "phi_tilde", "phi_tilde'", "phi_tilde''"], rows)
}

/// `J_0, J_0'` and `I_F, I_F', I_F''` every `dx` over the working domain.
pub fn resolvent_csv(sol: &Solution, dx: f64) -> String {
    let r = &sol.resolvent;
    let (lo, hi) = r.if_curve.domain();
    let rows = uniform_nodes(lo, hi, dx).into_iter().map(|x| {
        let j = r.j0.try_eval(x);
        let i = r.if_curve.eval(x);
        vec![Some(x), j.map(|j| j[0]), j.map(|j| j[1]), Some(i[0]), Some(i[1]), Some(i[2])]
    });
    csv_table(&["x", "J0", "J0'", "IF", "IF'", "IF''"], rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary<'a> {
    pub model: &'a ModelSpec,
    pub regime: Regime,
    pub b_star: f64,
    pub b_hat: f64,
    pub x_hi: f64,
    pub j0_prime0: f64,
    pub if_at_zero: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub diagnostics: Diagnostics,
    pub checks: Vec<CheckLine>,
    pub pass: bool,
    pub warnings: &'a [String],
}

impl<'a> SolutionSummary<'a> {
    pub fn new(sol: &'a Solution, thresholds: &Thresholds) -> Self {
        let r = &sol.resolvent;
        SolutionSummary {
            model: sol.model.spec(),
            regime: sol.regime,
            b_star: sol.b_star,
            b_hat: sol.b_hat,
            x_hi: sol.x_hi(),
            j0_prime0: r.j0_prime0(),
            if_at_zero: r.if0,
            alpha0: r.alpha0,
            beta0: r.beta0,
            diagnostics: sol.diagnostics,
            checks: sol.diagnostics.lines(sol.regime, thresholds),
            pass: sol.diagnostics.pass(sol.regime, thresholds),
            warnings: &sol.warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises") + "\n"
    }
}
