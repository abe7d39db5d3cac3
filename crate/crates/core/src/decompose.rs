//! Three-segment horizontal decompositions and tilde balls.
//!
//! Every point of Hⁿ is a product `exp(v₁) ∘ exp(v₂) ∘ exp(v₃)` of three
//! horizontal exponentials. The tilde ball `B̃(ξ, r)` collects the points
//! reachable from `ξ` with `‖vᵢ‖ ≤ r`; the tilde norm of `ξ` is the least such
//! `r` for `e → ξ`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::group::{HPoint, HorizontalVector};
use crate::optim::{bisect_root, golden_min};
use crate::sampling::{gauge_ball_point, rng_for};
use crate::threehop::{search, NormCost, SearchBudget, SearchProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition3 {
    pub v1: HorizontalVector,
    pub v2: HorizontalVector,
    pub v3: HorizontalVector,
    pub max_norm: f64,
}

impl Decomposition3 {
    fn from_hops(v1: HorizontalVector, v2: HorizontalVector, v3: HorizontalVector) -> Self {
        let max_norm = v1.norm().max(v2.norm()).max(v3.norm());
        Decomposition3 { v1, v2, v3, max_norm }
    }

    /// `exp(v₁) ∘ exp(v₂) ∘ exp(v₃)`.
    pub fn recompose(&self) -> HPoint {
        HPoint::identity(self.v1.dim()).exp_h(&self.v1).exp_h(&self.v2).exp_h(&self.v3)
    }

    /// Largest coordinate error of the recomposition against `target`.
    pub fn recomposition_error(&self, target: &HPoint) -> f64 {
        self.recompose()
            .to_flat()
            .iter()
            .zip(target.to_flat())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Coordinate,
    Minmax,
}

/// Equal-norm hops at angles `0, θ, 2θ` in the `(x_k, y_k)` coordinate
/// plane, `θ = ∓2π/3`, closing up to a pure vertical displacement `t`.
fn equilateral(n: usize, k: usize, t: f64) -> Decomposition3 {
    let r = (t.abs() / 3f64.sqrt()).sqrt();
    let th = if t > 0.0 { -2.0 * PI / 3.0 } else { 2.0 * PI / 3.0 };
    let hop = |ang: f64| {
        let mut v = HorizontalVector::zeros(n);
        v.a[k] = r * ang.cos();
        v.b[k] = r * ang.sin();
        v
    };
    Decomposition3::from_hops(hop(0.0), hop(th), hop(2.0 * th))
}

/// The coordinate family: `v₁ = a·e_{x_k}`, `v₂ = b·e_{y_k}`, `v₃` the
/// horizontal remainder, with `a = X_k − d` and `b` chosen so the vertical
/// coordinate comes out right. `d ≠ 0` is the free parameter.
fn coordinate_with(target: &HPoint, k: usize, d: f64) -> Decomposition3 {
    let n = target.dim();
    let (xk, yk, t) = (target.x[k], target.y[k], target.t);
    let a = xk - d;
    let b = (t + 2.0 * a * yk) / (2.0 * d);
    let mut v1 = HorizontalVector::zeros(n);
    v1.a[k] = a;
    let mut v2 = HorizontalVector::zeros(n);
    v2.b[k] = b;
    let v3 = target.proj().sub(&v1).sub(&v2);
    Decomposition3::from_hops(v1, v2, v3)
}

fn dominant_coordinate(target: &HPoint) -> usize {
    (0..target.dim())
        .max_by(|&i, &j| {
            let wi = target.x[i].powi(2) + target.y[i].powi(2);
            let wj = target.x[j].powi(2) + target.y[j].powi(2);
            wi.total_cmp(&wj)
        })
        .unwrap_or(0)
}

fn coordinate(target: &HPoint) -> Decomposition3 {
    let n = target.dim();
    let rho = target.proj().norm();
    if target.t == 0.0 {
        let z = HorizontalVector::zeros(n);
        return Decomposition3::from_hops(target.proj(), z.clone(), z);
    }
    if rho == 0.0 {
        return equilateral(n, 0, target.t);
    }
    let k = dominant_coordinate(target);
    coordinate_with(target, k, (target.t.abs() / 2.0).sqrt() + rho)
}

/// Best member of the coordinate family over the free parameter.
pub(crate) fn coordinate_optimized(target: &HPoint) -> Decomposition3 {
    let base = coordinate(target);
    if target.t == 0.0 || target.proj().norm() == 0.0 {
        return base;
    }
    let k = dominant_coordinate(target);
    let scale = target.proj().norm() + target.t.abs().sqrt();
    let norm_at = |u: f64, sign: f64| coordinate_with(target, k, sign * u.exp()).max_norm;
    let (lo, hi) = ((1e-6 * scale).ln(), (1e6 * scale).ln());
    let mut best = base;
    for sign in [1.0, -1.0] {
        // coarse scan, then golden-section around the best sample
        let m = 64;
        let h = (hi - lo) / m as f64;
        let (mut bu, mut bv) = (lo, f64::INFINITY);
        for i in 0..=m {
            let u = lo + h * i as f64;
            let v = norm_at(u, sign);
            if v < bv {
                bu = u;
                bv = v;
            }
        }
        let (u, _) = golden_min(|u| norm_at(u, sign), bu - h, bu + h, 1e-12, 200);
        let cand = coordinate_with(target, k, sign * u.exp());
        if cand.max_norm < best.max_norm {
            best = cand;
        }
    }
    best
}

/// Splits `target` as `exp(v₁) ∘ exp(v₂) ∘ exp(v₃)` (from the identity).
///
/// `Coordinate` uses the closed coordinate family; `Minmax` optimizes its
/// free parameter and then runs the three-hop search to reduce `max ‖vᵢ‖`
/// further.
pub fn decompose3(target: &HPoint, strategy: Strategy) -> Decomposition3 {
    decompose3_with(target, strategy, &SearchBudget::default())
}

pub fn decompose3_with(target: &HPoint, strategy: Strategy, budget: &SearchBudget) -> Decomposition3 {
    let n = target.dim();
    if *target == HPoint::identity(n) {
        let z = HorizontalVector::zeros(n);
        return Decomposition3::from_hops(z.clone(), z.clone(), z);
    }
    match strategy {
        Strategy::Coordinate => coordinate(target),
        Strategy::Minmax => {
            let fam = coordinate_optimized(target);
            let r = fam.max_norm;
            if !(r > 0.0) {
                return fam;
            }
            let e = HPoint::identity(n);
            let cost = NormCost { r };
            let reach = move |_: &HorizontalVector| r;
            let pb = SearchProblem {
                cost: &cost,
                xi0: &e,
                target,
                reach: &reach,
                seeds: vec![fam.v1.clone()],
            };
            let out = search(&pb, budget, 0.0);
            match out.best {
                Some(p) => {
                    let d = Decomposition3::from_hops(p.v1, p.v2, p.v3);
                    if d.max_norm < fam.max_norm && d.recomposition_error(target) <= 1e-9 * (1.0 + target.magnitude()) {
                        d
                    } else {
                        fam
                    }
                }
                None => fam,
            }
        }
    }
}

/// Largest `|t|` in the closed tilde ball `B̃(e, r)` of H¹ at horizontal
/// distance `ρ`, or `None` when `ρ > 3r`.
pub fn tilde_t_max(r: f64, rho: f64) -> Option<f64> {
    if rho > 3.0 * r {
        return None;
    }
    let rad = (3.0 * r * r + 2.0 * rho * r - rho * rho).max(0.0);
    Some(rad.sqrt() * (r + rho))
}

/// Tilde norm of `(ρ, t)` in H¹: the least `r` with the point in `B̃(e, r)`.
pub fn tilde_norm_h1(rho: f64, t: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return rho / 3.0;
    }
    if rho == 0.0 {
        return (t / 3f64.sqrt()).sqrt();
    }
    let lo = rho / 3.0;
    let hi = rho.max((t / 3f64.sqrt()).sqrt());
    let g = |r: f64| tilde_t_max(r, rho).unwrap_or(0.0) - t;
    bisect_root(g, lo, hi, 1e-15, 200).unwrap_or(hi)
}

/// Tilde norm of `center⁻¹ ∘ p`; closed form for `n = 1`, min-max search
/// otherwise (an upper bound at the search resolution).
pub fn tilde_norm(center: &HPoint, p: &HPoint) -> Result<f64> {
    if center.dim() != p.dim() {
        return Err(HeisError::DimensionMismatch { expected: center.dim(), got: p.dim() });
    }
    let q = center.inverse().compose(p);
    if q.dim() == 1 {
        Ok(tilde_norm_h1(q.proj().norm(), q.t))
    } else {
        Ok(decompose3(&q, Strategy::Minmax).max_norm)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(HeisError::InvalidParameter(format!("radius must be positive, got {r}")))
    }
}

/// Membership in the closed tilde ball `B̃(center, r)`.
pub fn tilde_ball_contains(center: &HPoint, r: f64, p: &HPoint) -> Result<bool> {
    check_radius(r)?;
    if center.dim() != p.dim() {
        return Err(HeisError::DimensionMismatch { expected: center.dim(), got: p.dim() });
    }
    let q = center.inverse().compose(p);
    if q.dim() == 1 {
        let tol = 1e-9 * (1.0 + r * r);
        let rho = q.proj().norm();
        let rho_c = if rho > 3.0 * r && rho <= 3.0 * r + tol { 3.0 * r } else { rho };
        return Ok(match tilde_t_max(r, rho_c) {
            Some(tm) => q.t.abs() <= tm + tol,
            None => false,
        });
    }
    tilde_ball_contains_search(center, r, p, &SearchBudget::default())
}

/// Search-only membership: `true` is certified by an explicit decomposition,
/// `false` means none was found at this budget.
pub fn tilde_ball_contains_search(center: &HPoint, r: f64, p: &HPoint, budget: &SearchBudget) -> Result<bool> {
    check_radius(r)?;
    if center.dim() != p.dim() {
        return Err(HeisError::DimensionMismatch { expected: center.dim(), got: p.dim() });
    }
    let cost = NormCost { r };
    let reach = move |_: &HorizontalVector| r;
    let pb = SearchProblem { cost: &cost, xi0: center, target: p, reach: &reach, seeds: vec![] };
    let out = search(&pb, budget, 1.0 + 1e-9);
    Ok(out.phi <= 1.0 + 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FollandSteinEstimate {
    pub c_hat: f64,
    pub samples: usize,
    pub worst_point: Vec<f64>,
}

/// `Ĉ = max (min-max hop norm) / N(ξ)` over random `ξ` in the unit gauge
/// ball of Hⁿ.
pub fn folland_stein_estimate(n: usize, samples: usize, seed: u64, budget: &SearchBudget) -> FollandSteinEstimate {
    let results: Vec<(f64, Vec<f64>)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let xi = gauge_ball_point(&mut rng, n, 1.0);
            let g = xi.gauge();
            if g == 0.0 {
                return (0.0, xi.to_flat());
            }
            let d = if n == 1 {
                tilde_norm_h1(xi.proj().norm(), xi.t)
            } else {
                decompose3_with(&xi, Strategy::Minmax, budget).max_norm
            };
            (d / g, xi.to_flat())
        })
        .collect();
    let (c_hat, worst_point) = results
        .into_iter()
        .fold((0.0, Vec::new()), |acc, x| if x.0 > acc.0 { x } else { acc });
    FollandSteinEstimate { c_hat, samples, worst_point }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_horizontal_targets() {
        let d = decompose3(&HPoint::identity(2), Strategy::Minmax);
        assert_eq!(d.max_norm, 0.0);
        let t = HPoint::h1(2.0, 0.0, 0.0);
        let d = decompose3(&t, Strategy::Coordinate);
        assert_eq!(d.v1, HorizontalVector::h1(2.0, 0.0));
        assert_eq!(d.v2.norm(), 0.0);
        assert_eq!(d.v3.norm(), 0.0);
        assert_eq!(d.recompose(), t);
    }

    #[test]
    fn vertical_target_uses_equilateral_hops() {
        let t = HPoint::h1(0.0, 0.0, 3f64.sqrt());
        let d = decompose3(&t, Strategy::Coordinate);
        assert!((d.max_norm - 1.0).abs() < 1e-12);
        assert!(d.recomposition_error(&t) < 1e-12);
        let m = decompose3(&t, Strategy::Minmax);
        assert!(m.max_norm <= 1.0 + 1e-6);
        let t = HPoint::h1(0.0, 0.0, -2.0);
        assert!(decompose3(&t, Strategy::Coordinate).recomposition_error(&t) < 1e-12);
    }

    #[test]
    fn coordinate_family_recomposes() {
        let t = HPoint::new(&[0.3, -1.2], &[0.8, 0.1], -2.5).unwrap();
        let d = decompose3(&t, Strategy::Coordinate);
        assert!(d.recomposition_error(&t) < 1e-12);
        let m = decompose3(&t, Strategy::Minmax);
        assert!(m.recomposition_error(&t) < 1e-9);
        assert!(m.max_norm <= d.max_norm);
    }

    #[test]
    fn minmax_reaches_the_tilde_norm_in_h1() {
        for &(x, y, t) in &[(3.0f64, 0.0f64, 0.0f64), (1.0, 0.5, 2.0), (0.2, -0.1, -1.0), (2.0, 0.0, 3.0 * 3f64.sqrt())] {
            let p = HPoint::h1(x, y, t);
            let exact = tilde_norm_h1((x * x + y * y).sqrt(), t);
            let m = decompose3(&p, Strategy::Minmax);
            assert!(m.max_norm >= exact * (1.0 - 1e-9), "{p:?}: {} < {exact}", m.max_norm);
            assert!(m.max_norm <= exact * (1.0 + 1e-4), "{p:?}: {} vs {exact}", m.max_norm);
        }
    }

    #[test]
    fn closed_form_tilde_ball() {
        let e = HPoint::identity(1);
        assert!(tilde_ball_contains(&e, 1.0, &HPoint::h1(3.0, 0.0, 0.0)).unwrap());
        assert!(!tilde_ball_contains(&e, 1.0, &HPoint::h1(3.01, 0.0, 0.0)).unwrap());
        assert!(tilde_ball_contains(&e, 1.0, &HPoint::h1(0.0, 0.0, 3f64.sqrt())).unwrap());
        assert!(!tilde_ball_contains(&e, 1.0, &HPoint::h1(0.0, 0.0, 1.8)).unwrap());
        assert!(tilde_ball_contains(&e, 0.0, &e).is_err());
        assert!((tilde_norm_h1(3.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((tilde_norm_h1(2.0, 3.0 * 3f64.sqrt()) - 1.0).abs() < 1e-12);
        assert!((tilde_norm_h1(0.0, 3f64.sqrt()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn search_membership_agrees_with_closed_form_away_from_the_boundary() {
        let e = HPoint::identity(1);
        let b = SearchBudget::quick();
        for &(x, t, inside) in &[(0.0, 1.6, true), (0.0, 1.9, false), (2.0, 5.0, true), (2.0, 5.4, false), (2.9, 0.1, true)] {
            let p = HPoint::h1(x, 0.0, t);
            assert_eq!(tilde_ball_contains_search(&e, 1.0, &p, &b).unwrap(), inside, "{p:?}");
        }
    }

    #[test]
    fn folland_stein_constant_is_finite() {
        let est = folland_stein_estimate(1, 200, 3, &SearchBudget::quick());
        assert!(est.c_hat.is_finite() && est.c_hat > 0.0);
    }
}
