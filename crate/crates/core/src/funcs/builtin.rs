//! Built-in functions with analytic horizontal gradients.

use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::group::{HPoint, HorizontalVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// `‖x‖² + ‖y‖²`.
    Sqnorm,
    /// `‖x‖² + ‖y‖² + t²`.
    SqnormT,
    /// `zᵀAz` with `z = (x, y)` and `A` symmetric positive semidefinite.
    Quad { a: Vec<Vec<f64>> },
    /// Wang's convex function of `(x, y)` on H¹, constant in `t`.
    Wang,
}

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::Sqnorm => "sqnorm",
            Builtin::SqnormT => "sqnorm_t",
            Builtin::Quad { .. } => "quad",
            Builtin::Wang => "wang",
        }
    }

    /// Checks parameters against the dimension `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Builtin::Wang if n != 1 => Err(HeisError::InvalidParameter(format!(
                "wang is defined on H^1 only, got n = {n}"
            ))),
            Builtin::Quad { a } => {
                let m = 2 * n;
                if a.len() != m || a.iter().any(|row| row.len() != m) {
                    return Err(HeisError::InvalidParameter(format!(
                        "quad matrix must be {m}x{m} for n = {n}"
                    )));
                }
                if a.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(HeisError::InvalidParameter("quad matrix has non-finite entries".into()));
                }
                for i in 0..m {
                    for j in 0..i {
                        if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                            return Err(HeisError::InvalidParameter("quad matrix must be symmetric".into()));
                        }
                    }
                }
                if !is_psd(a) {
                    return Err(HeisError::InvalidParameter(
                        "quad matrix must be positive semidefinite".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p: &HPoint) -> f64 {
        match self {
            Builtin::Sqnorm => sqnorm(p),
            Builtin::SqnormT => sqnorm(p) + p.t * p.t,
            Builtin::Quad { a } => {
                let z = p.proj();
                let m = a.len();
                let mut acc = 0.0;
                for i in 0..m {
                    let mut row = 0.0;
                    for j in 0..m {
                        row += a[i][j] * z.get(j);
                    }
                    acc += z.get(i) * row;
                }
                acc
            }
            Builtin::Wang => wang(p.x[0], p.y[0]),
        }
    }

    /// `(X₁f, …, Xₙf, Y₁f, …, Yₙf)` with `X_j = ∂x_j + 2y_j∂t`,
    /// `Y_j = ∂y_j − 2x_j∂t`.
    pub fn gradient(&self, p: &HPoint) -> HorizontalVector {
        match self {
            Builtin::Sqnorm => p.proj().scale(2.0),
            Builtin::SqnormT => {
                let n = p.dim();
                let mut g = HorizontalVector::zeros(n);
                for j in 0..n {
                    g.a[j] = 2.0 * p.x[j] + 4.0 * p.y[j] * p.t;
                    g.b[j] = 2.0 * p.y[j] - 4.0 * p.x[j] * p.t;
                }
                g
            }
            Builtin::Quad { a } => {
                let z = p.proj();
                let m = a.len();
                let mut g = HorizontalVector::zeros(p.dim());
                for i in 0..m {
                    let mut row = 0.0;
                    for j in 0..m {
                        row += (a[i][j] + a[j][i]) * z.get(j);
                    }
                    g.set(i, row);
                }
                g
            }
            Builtin::Wang => {
                let (gx, gy) = wang_grad(p.x[0], p.y[0]);
                HorizontalVector::h1(gx, gy)
            }
        }
    }
}

fn sqnorm(p: &HPoint) -> f64 {
    p.x.iter().chain(p.y.iter()).map(|c| c * c).sum()
}

fn wang_inner(x: f64, y: f64) -> bool {
    x != 0.0 && y.abs() <= x.abs().powi(3)
}

pub fn wang(x: f64, y: f64) -> f64 {
    if wang_inner(x, y) {
        x.powi(4) + 1.5 * y * y / (x * x)
    } else {
        let ay = y.abs();
        0.5 * x * x * ay.powf(2.0 / 3.0) + 2.0 * ay.powf(4.0 / 3.0)
    }
}

pub fn wang_grad(x: f64, y: f64) -> (f64, f64) {
    if wang_inner(x, y) {
        let x2 = x * x;
        (4.0 * x2 * x - 3.0 * y * y / (x2 * x), 3.0 * y / x2)
    } else if y == 0.0 {
        (0.0, 0.0)
    } else {
        let ay = y.abs();
        let c = ay.cbrt();
        (x * c * c, y.signum() * (x * x / (3.0 * c) + 8.0 / 3.0 * c))
    }
}

/// Positive semidefiniteness by a pivoted LDLᵀ sweep with a small relative
/// tolerance.
fn is_psd(a: &[Vec<f64>]) -> bool {
    let m = a.len();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let mut w: Vec<Vec<f64>> = a.to_vec();
    let mut active: Vec<usize> = (0..m).collect();
    while !active.is_empty() {
        let (pos, &k) = active
            .iter()
            .enumerate()
            .max_by(|x, y| w[*x.1][*x.1].total_cmp(&w[*y.1][*y.1]))
            .unwrap();
        let d = w[k][k];
        if d < -tol {
            return false;
        }
        active.swap_remove(pos);
        if d <= tol {
            // zero pivot: its row must vanish
            if active.iter().any(|&j| w[k][j].abs() > 1e-9 * scale) {
                return false;
            }
            continue;
        }
        for &i in &active {
            for &j in &active {
                w[i][j] -= w[i][k] * w[k][j] / d;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(Builtin::Sqnorm.eval(&HPoint::h1(3.0, 4.0, 7.0)), 25.0);
        assert_eq!(Builtin::SqnormT.eval(&HPoint::h1(1.0, 1.0, 1.0)), 3.0);
        let r: f64 = 2.7;
        assert!((Builtin::Wang.eval(&HPoint::h1(0.0, r, 9.0)) - 2.0 * r.powf(4.0 / 3.0)).abs() < 1e-12);
        assert!((Builtin::Wang.eval(&HPoint::h1(r, 0.0, -3.0)) - r.powi(4)).abs() < 1e-12);
        assert_eq!(Builtin::Wang.eval(&HPoint::h1(0.0, 0.0, 0.0)), 0.0);
        let q = Builtin::Quad { a: vec![vec![1.0, 0.0], vec![0.0, 4.0]] };
        assert_eq!(q.eval(&HPoint::h1(1.0, 1.0, 5.0)), 5.0);
    }

    #[test]
    fn gradients() {
        let g = Builtin::SqnormT.gradient(&HPoint::h1(1.0, 1.0, 1.0));
        assert_eq!((g.a[0], g.b[0]), (6.0, -2.0));
        let g = Builtin::Sqnorm.gradient(&HPoint::h1(0.5, -1.0, 3.0));
        assert_eq!((g.a[0], g.b[0]), (1.0, -2.0));
        assert_eq!(wang_grad(0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn wang_is_continuous_across_branches() {
        for &x in &[0.3f64, 1.0, -1.7, 2.5] {
            let y: f64 = x.abs().powi(3);
            let inside = x.powi(4) + 1.5 * y * y / (x * x);
            let ay = y * (1.0 + 1e-15);
            let outside = 0.5 * x * x * ay.powf(2.0 / 3.0) + 2.0 * ay.powf(4.0 / 3.0);
            assert!((inside - outside).abs() <= 1e-9 * inside.max(1.0));
            assert!((inside - 2.5 * x.powi(4)).abs() < 1e-9 * inside);
        }
    }

    #[test]
    fn quad_validation() {
        let ok = Builtin::Quad { a: vec![vec![2.0, 1.0], vec![1.0, 2.0]] };
        assert!(ok.validate(1).is_ok());
        let semi = Builtin::Quad { a: vec![vec![1.0, 1.0], vec![1.0, 1.0]] };
        assert!(semi.validate(1).is_ok());
        let bad = Builtin::Quad { a: vec![vec![1.0, 2.0], vec![2.0, 1.0]] };
        assert!(bad.validate(1).is_err());
        let asym = Builtin::Quad { a: vec![vec![1.0, 0.5], vec![0.0, 1.0]] };
        assert!(asym.validate(1).is_err());
        assert!(ok.validate(2).is_err());
        assert!(Builtin::Wang.validate(2).is_err());
    }
}
