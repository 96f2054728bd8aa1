//! Tabulated functions with stored first and second derivatives.

use serde::Serialize;

/// A function tabulated on a strictly increasing grid together with its
/// first and second derivatives, interpolated by quintic Hermite polynomials
/// on each cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    xs: Vec<f64>,
    v: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("grid and data lengths differ or fewer than two nodes")]
    Shape,
    #[error("grid is not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("non-finite entry at x = {0}")]
    NonFinite(f64),
}

/// Evenly spaced nodes from `a` to `b` (inclusive) with spacing at most `dx`.
pub fn uniform_nodes(a: f64, b: f64, dx: f64) -> Vec<f64> {
    let n = ((b - a) / dx).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let mut xs: Vec<f64> = (0..=n).map(|i| a + h * i as f64).collect();
    xs[n] = b;
    xs
}

impl Curve {
    pub fn new(xs: Vec<f64>, v: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Result<Self, CurveError> {
        let n = xs.len();
        if n < 2 || v.len() != n || d1.len() != n || d2.len() != n {
            return Err(CurveError::Shape);
        }
        if let Some(i) = (1..n).find(|&i| !(xs[i] > xs[i - 1])) {
            return Err(CurveError::NotIncreasing(i));
        }
        if let Some(i) = (0..n).find(|&i| !(xs[i].is_finite() && v[i].is_finite() && d1[i].is_finite() && d2[i].is_finite())) {
            return Err(CurveError::NonFinite(xs[i]));
        }
        Ok(Curve { xs, v, d1, d2 })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = self.domain();
        x >= a && x <= b
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn derivs(&self) -> &[f64] {
        &self.d1
    }

    pub fn second_derivs(&self) -> &[f64] {
        &self.d2
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `[value, first, second]` at `x`, or `None` outside the grid.
    pub fn try_eval(&self, x: f64) -> Option<[f64; 3]> {
        if !self.contains(x) {
            return None;
        }
        let n = self.xs.len();
        let i = self.xs.partition_point(|&t| t <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        if x == x0 {
            return Some([self.v[i], self.d1[i], self.d2[i]]);
        }
        if x == x1 {
            return Some([self.v[i + 1], self.d1[i + 1], self.d2[i + 1]]);
        }
        let h = x1 - x0;
        let t = (x - x0) / h;
        let a0 = self.v[i];
        let a1 = h * self.d1[i];
        let a2 = 0.5 * h * h * self.d2[i];
        let vv = self.v[i + 1] - a0 - a1 - a2;
        let dd = h * self.d1[i + 1] - a1 - 2.0 * a2;
        let ss = h * h * self.d2[i + 1] - 2.0 * a2;
        let a3 = 10.0 * vv - 4.0 * dd + 0.5 * ss;
        let a4 = -15.0 * vv + 7.0 * dd - ss;
        let a5 = 6.0 * vv - 3.0 * dd + 0.5 * ss;
        let p = a0 + t * (a1 + t * (a2 + t * (a3 + t * (a4 + t * a5))));
        let dp = a1 + t * (2.0 * a2 + t * (3.0 * a3 + t * (4.0 * a4 + t * 5.0 * a5)));
        let ddp = 2.0 * a2 + t * (6.0 * a3 + t * (12.0 * a4 + t * 20.0 * a5));
        Some([p, dp / h, ddp / (h * h)])
    }

    /// `[value, first, second]` at `x`.
    ///
    /// # Panics
    /// If `x` lies outside the grid.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        self.try_eval(x).unwrap_or_else(|| {
            let (a, b) = self.domain();
            panic!("curve evaluated at {x} outside [{a}, {b}]")
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.eval(x)[1]
    }

    /// Restriction to the nodes inside `[a, b]`.
    pub fn restrict(&self, a: f64, b: f64) -> Option<Curve> {
        let idx: Vec<usize> = (0..self.xs.len()).filter(|&i| self.xs[i] >= a && self.xs[i] <= b).collect();
        let pick = |s: &[f64]| idx.iter().map(|&i| s[i]).collect::<Vec<_>>();
        Curve::new(pick(&self.xs), pick(&self.v), pick(&self.d1), pick(&self.d2)).ok()
    }

    /// Concatenate two curves that share their junction node; the junction
    /// data of `right` is kept.
    pub fn join(left: &Curve, right: &Curve) -> Result<Curve, CurveError> {
        let n = left.xs.len() - 1;
        let mut xs = left.xs[..n].to_vec();
        let mut v = left.v[..n].to_vec();
        let mut d1 = left.d1[..n].to_vec();
        let mut d2 = left.d2[..n].to_vec();
        xs.extend_from_slice(&right.xs);
        v.extend_from_slice(&right.v);
        d1.extend_from_slice(&right.d1);
        d2.extend_from_slice(&right.d2);
        Curve::new(xs, v, d1, d2)
    }

    /// Largest scaled second difference of the node values, a discrete
    /// measure of convexity (nonpositive for a concave function).
    pub fn concavity_defect(&self) -> f64 {
        let scale = 1.0 + self.v.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let mut worst = f64::NEG_INFINITY;
        for i in 1..self.xs.len() - 1 {
            let (h0, h1) = (self.xs[i] - self.xs[i - 1], self.xs[i + 1] - self.xs[i]);
            let slope1 = (self.v[i + 1] - self.v[i]) / h1;
            let slope0 = (self.v[i] - self.v[i - 1]) / h0;
            let dd = (slope1 - slope0) * 0.5 * (h0 + h1);
            worst = worst.max(dd / scale);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(f: impl Fn(f64) -> [f64; 3], xs: Vec<f64>) -> Curve {
        let d: Vec<[f64; 3]> = xs.iter().map(|&x| f(x)).collect();
        Curve::new(xs, d.iter().map(|r| r[0]).collect(), d.iter().map(|r| r[1]).collect(), d.iter().map(|r| r[2]).collect())
            .unwrap()
    }

    #[test]
    fn reproduces_quintics_exactly() {
        let f = |x: f64| {
            [
                1.0 - 2.0 * x + 0.5 * x.powi(3) - 0.1 * x.powi(5),
                -2.0 + 1.5 * x * x - 0.5 * x.powi(4),
                3.0 * x - 2.0 * x.powi(3),
            ]
        };
        let c = sample(f, vec![-1.0, -0.2, 0.7, 2.0]);
        for &x in &[-0.9, -0.5, 0.1, 0.69, 1.3, 1.99] {
            let e = f(x);
            let g = c.eval(x);
            for k in 0..3 {
                assert!((g[k] - e[k]).abs() < 1e-12, "x = {x}, k = {k}");
            }
        }
    }

    #[test]
    fn sixth_order_accuracy_for_exponential() {
        let f = |x: f64| [x.exp(), x.exp(), x.exp()];
        let c = sample(f, uniform_nodes(0.0, 1.0, 0.01));
        let err = (0..997).map(|k| 0.0005 + k as f64 * 0.001).map(|x| (c.value(x) - x.exp()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-15 * 10.0, "{err}");
    }

    #[test]
    fn rejects_bad_grids_and_outside_points() {
        assert_eq!(Curve::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]), Err(CurveError::NotIncreasing(1)));
        assert_eq!(Curve::new(vec![0.0], vec![0.0], vec![0.0], vec![0.0]), Err(CurveError::Shape));
        let c = sample(|x| [x, 1.0, 0.0], vec![0.0, 1.0]);
        assert!(c.try_eval(1.0 + 1e-12).is_none());
        assert_eq!(c.eval(1.0), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn uniform_nodes_hit_both_ends() {
        let xs = uniform_nodes(-5.2, 0.0, 0.01);
        assert_eq!(xs[0], -5.2);
        assert_eq!(*xs.last().unwrap(), 0.0);
        assert!(xs.windows(2).all(|w| w[1] - w[0] <= 0.01 + 1e-15));
    }

    #[test]
    fn join_and_concavity() {
        let l = sample(|x| [-x * x, -2.0 * x, -2.0], uniform_nodes(-1.0, 0.0, 0.1));
        let r = sample(|x| [-x * x, -2.0 * x, -2.0], uniform_nodes(0.0, 1.0, 0.1));
        let c = Curve::join(&l, &r).unwrap();
        assert_eq!(c.len(), 21);
        assert!(c.concavity_defect() < 0.0);
    }
}
