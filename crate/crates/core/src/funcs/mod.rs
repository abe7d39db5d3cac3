//! Functions on Hⁿ: built-ins, parsed expressions, horizontal gradients and
//! a sampled H-convexity check.

pub mod builtin;
pub mod expr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::group::{HPoint, HorizontalVector};
use crate::sampling::{gauge_ball_point, rng_for, unit_vector};

pub use builtin::Builtin;
pub use expr::{parse_expr, Expr};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnSpec {
    Builtin(Builtin),
    Expr { text: String, ast: Expr },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference { h: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HConvexFn {
    pub spec: FnSpec,
    pub n: usize,
    pub gradient_mode: GradientMode,
}

impl HConvexFn {
    pub fn builtin(b: Builtin, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(HeisError::InvalidParameter("dimension n must be >= 1".into()));
        }
        b.validate(n)?;
        Ok(HConvexFn {
            spec: FnSpec::Builtin(b),
            n,
            gradient_mode: GradientMode::Analytic,
        })
    }

    pub fn sqnorm(n: usize) -> Self {
        HConvexFn::builtin(Builtin::Sqnorm, n).expect("sqnorm is valid for n >= 1")
    }

    pub fn sqnorm_t(n: usize) -> Self {
        HConvexFn::builtin(Builtin::SqnormT, n).expect("sqnorm_t is valid for n >= 1")
    }

    pub fn wang() -> Self {
        HConvexFn::builtin(Builtin::Wang, 1).expect("wang is valid on H^1")
    }

    /// `zᵀAz` on H^{n}, with `A` of size `2n × 2n`.
    pub fn quad(a: Vec<Vec<f64>>) -> Result<Self> {
        if a.is_empty() || !a.len().is_multiple_of(2) {
            return Err(HeisError::InvalidParameter("quad matrix must be 2n x 2n".into()));
        }
        let n = a.len() / 2;
        HConvexFn::builtin(Builtin::Quad { a }, n)
    }

    /// Parsed expression with finite-difference gradients.
    pub fn from_expr(text: &str, n: usize) -> Result<Self> {
        let ast = parse_expr(text, n)?;
        Ok(HConvexFn {
            spec: FnSpec::Expr { text: text.to_string(), ast },
            n,
            gradient_mode: GradientMode::FiniteDifference { h: DEFAULT_FD_STEP },
        })
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Result<Self> {
        match mode {
            GradientMode::FiniteDifference { h } if !(h > 0.0 && h.is_finite()) => Err(
                HeisError::InvalidParameter(format!("finite-difference step must be positive, got {h}")),
            ),
            GradientMode::Analytic if matches!(self.spec, FnSpec::Expr { .. }) => Err(
                HeisError::InvalidParameter("parsed expressions have no analytic gradient".into()),
            ),
            _ => {
                self.gradient_mode = mode;
                Ok(self)
            }
        }
    }

    pub fn label(&self) -> String {
        match &self.spec {
            FnSpec::Builtin(b) => b.name().to_string(),
            FnSpec::Expr { text, .. } => text.clone(),
        }
    }

    fn check_dim(&self, p: &HPoint) -> Result<()> {
        if p.dim() != self.n {
            return Err(HeisError::DimensionMismatch { expected: self.n, got: p.dim() });
        }
        Ok(())
    }

    /// Value without dimension or finiteness checks.
    #[inline]
    pub fn value(&self, p: &HPoint) -> f64 {
        match &self.spec {
            FnSpec::Builtin(b) => b.eval(p),
            FnSpec::Expr { ast, .. } => ast.eval(p),
        }
    }

    pub fn eval(&self, p: &HPoint) -> Result<f64> {
        self.check_dim(p)?;
        let v = self.value(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HeisError::NonFinite(format!("{} at {:?} is {v}", self.label(), p.to_flat())))
        }
    }

    /// Horizontal gradient without checks.
    pub fn gradient(&self, p: &HPoint) -> HorizontalVector {
        match (&self.spec, self.gradient_mode) {
            (FnSpec::Builtin(b), GradientMode::Analytic) => b.gradient(p),
            (_, GradientMode::FiniteDifference { h }) => self.fd_gradient(p, h),
            (FnSpec::Expr { .. }, GradientMode::Analytic) => self.fd_gradient(p, DEFAULT_FD_STEP),
        }
    }

    /// Central differences of `α ↦ f(p ∘ exp(α e_k))` at `α = 0`.
    pub fn fd_gradient(&self, p: &HPoint, h: f64) -> HorizontalVector {
        let mut g = HorizontalVector::zeros(self.n);
        for k in 0..2 * self.n {
            let e = HorizontalVector::basis(self.n, k);
            let fp = self.value(&p.exp_h(&e.scale(h)));
            let fm = self.value(&p.exp_h(&e.scale(-h)));
            g.set(k, (fp - fm) / (2.0 * h));
        }
        g
    }

    pub fn horizontal_gradient(&self, p: &HPoint) -> Result<HorizontalVector> {
        self.check_dim(p)?;
        let g = self.gradient(p);
        if g.a.iter().chain(g.b.iter()).all(|c| c.is_finite()) {
            Ok(g)
        } else {
            Err(HeisError::NonFinite(format!(
                "horizontal gradient of {} at {:?}",
                self.label(),
                p.to_flat()
            )))
        }
    }

    /// `α ↦ f(p ∘ exp(αv))`.
    pub fn restrict_to_line(&self, p: &HPoint, v: &HorizontalVector) -> Result<LineRestriction<'_>> {
        self.check_dim(p)?;
        if v.dim() != self.n {
            return Err(HeisError::DimensionMismatch { expected: self.n, got: v.dim() });
        }
        if v.norm_sq() == 0.0 {
            return Err(HeisError::InvalidParameter("line direction must be nonzero".into()));
        }
        Ok(LineRestriction { f: self, p: p.clone(), v: v.clone() })
    }
}

/// The one-variable function `α ↦ f(p ∘ exp(αv))`.
pub struct LineRestriction<'a> {
    f: &'a HConvexFn,
    p: HPoint,
    v: HorizontalVector,
}

impl LineRestriction<'_> {
    pub fn at(&self, alpha: f64) -> f64 {
        self.f.value(&self.p.exp_h(&self.v.scale(alpha)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityViolation {
    pub xi: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: f64,
    pub defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub violations: Vec<ConvexityViolation>,
    pub max_defect: f64,
}

/// Radius of the gauge ball the convexity check samples base points from.
pub const CONVEXITY_BOX: f64 = 3.0;
const TRIPLES_PER_LINE: usize = 4;

/// Samples base points `ξ`, horizontal directions `v` and pairs on the line
/// `ξ ∘ exp(αv)`, and records positive defects of
/// `φ(ξ₁ ∘ δ_λ(ξ₁⁻¹ ∘ ξ₂)) ≤ (1 − λ)φ(ξ₁) + λφ(ξ₂)` beyond `1e−9` (relative
/// to the magnitude of the values).
pub fn check_h_convexity(f: &HConvexFn, n_points: usize, n_dirs: usize, seed: u64) -> ConvexityReport {
    let per_point: Vec<(usize, Vec<ConvexityViolation>, f64)> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let xi = gauge_ball_point(&mut rng, f.n, CONVEXITY_BOX);
            let mut found = Vec::new();
            let mut max_defect = 0.0f64;
            let mut count = 0;
            for _ in 0..n_dirs {
                let v = unit_vector(&mut rng, f.n);
                for _ in 0..TRIPLES_PER_LINE {
                    let a1 = rng.gen_range(-CONVEXITY_BOX..CONVEXITY_BOX);
                    let a2 = rng.gen_range(-CONVEXITY_BOX..CONVEXITY_BOX);
                    let lambda: f64 = rng.gen_range(0.0..1.0);
                    let at = |a: f64| f.value(&xi.exp_h(&v.scale(a)));
                    let (f1, f2) = (at(a1), at(a2));
                    let fm = at((1.0 - lambda) * a1 + lambda * a2);
                    let defect = fm - ((1.0 - lambda) * f1 + lambda * f2);
                    count += 1;
                    let tol = 1e-9 * (1.0 + f1.abs() + f2.abs());
                    if !defect.is_finite() || defect > tol {
                        max_defect = max_defect.max(if defect.is_finite() { defect } else { f64::INFINITY });
                        let p1 = xi.exp_h(&v.scale(a1));
                        found.push(ConvexityViolation {
                            xi: p1.to_flat(),
                            v: v.scale(a2 - a1).to_flat(),
                            lambda,
                            defect,
                        });
                    }
                }
            }
            (count, found, max_defect)
        })
        .collect();
    let mut report = ConvexityReport { samples: 0, violations: Vec::new(), max_defect: 0.0 };
    for (c, v, m) in per_point {
        report.samples += c;
        report.violations.extend(v);
        report.max_defect = report.max_defect.max(m);
    }
    report
}
