//! H-sections inside horizontal planes, the slope functionals `m` and `M`,
//! and the constants built from them.
//!
//! The H-section of `f` at `ξ₀` and height `s` is
//! `{ξ₀ ∘ exp(v) : f(ξ₀ ∘ exp v) − f(ξ₀) − p·v < s}` with `p = ∇_H f(ξ₀)`.
//! Along each ray the excess is convex and starts flat at 0, so the section
//! is star-shaped and stored as one radius per direction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engulfing::estimate_kpp;
use crate::error::{HeisError, Result};
use crate::funcs::HConvexFn;
use crate::group::{HPoint, HorizontalVector};
use crate::optim::{compass_min, golden_max, golden_min};
use crate::sampling::{gauge_ball_point, rng_for, sphere_directions};

/// Radius beyond which a section is declared unbounded.
pub const UNBOUNDED_CAP: f64 = 1e9;
pub const RADIUS_REL_TOL: f64 = 1e-12;

/// Directions used for sphere sweeps: an angular grid for `n = 1`, a
/// low-discrepancy set otherwise.
pub fn default_sweep_dirs(n: usize) -> usize {
    if n == 1 {
        720
    } else {
        2000
    }
}

fn plane_tol(a: &HPoint, b: &HPoint) -> f64 {
    let s = 1.0 + a.magnitude() + b.magnitude();
    1e-9 * s * s
}

/// `f(q) − f(center) − p·(Pr₁ q − Pr₁ center)` for `q ∈ H_center`.
pub fn excess(f: &HConvexFn, center: &HPoint, p: &HorizontalVector, q: &HPoint) -> Result<f64> {
    let defect = q.plane_defect(center);
    if defect.abs() > plane_tol(center, q) {
        return Err(HeisError::OffPlane { defect });
    }
    let v = q.proj().sub(&center.proj());
    Ok(f.eval(q)? - f.eval(center)? - p.dot(&v))
}

/// Excess at `center ∘ exp(v)` (no checks).
#[inline]
pub fn excess_at(f: &HConvexFn, center: &HPoint, f0: f64, p: &HorizontalVector, v: &HorizontalVector) -> f64 {
    f.value(&center.exp_h(v)) - f0 - p.dot(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSectionSpec {
    pub center: HPoint,
    pub p: HorizontalVector,
    pub s: f64,
}

impl HSectionSpec {
    /// Section of `f` at `center` with the horizontal gradient as slope.
    pub fn new(f: &HConvexFn, center: &HPoint, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(HeisError::InvalidParameter(format!("height must be positive, got {s}")));
        }
        let p = f.horizontal_gradient(center)?;
        f.eval(center)?;
        Ok(HSectionSpec { center: center.clone(), p, s })
    }

    /// Whether `center ∘ exp(v)` lies in the (open) section.
    pub fn contains(&self, f: &HConvexFn, v: &HorizontalVector) -> bool {
        excess_at(f, &self.center, f.value(&self.center), &self.p, v) < self.s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionRadius {
    Finite(f64),
    Unbounded,
}

impl SectionRadius {
    pub fn value(self) -> f64 {
        match self {
            SectionRadius::Finite(r) => r,
            SectionRadius::Unbounded => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            SectionRadius::Finite(r) => Some(r),
            SectionRadius::Unbounded => None,
        }
    }
}

/// Radius of the section along the unit direction `u`: the root of
/// `ρ ↦ excess(ξ₀ ∘ exp(ρu)) − s`, bracketed by doubling and bisected.
pub fn h_section_radius(f: &HConvexFn, spec: &HSectionSpec, u: &HorizontalVector) -> Result<SectionRadius> {
    if (u.norm() - 1.0).abs() > 1e-9 {
        return Err(HeisError::InvalidParameter("direction must be a unit vector".into()));
    }
    let f0 = f.value(&spec.center);
    radius_along(f, &spec.center, f0, &spec.p, spec.s, u)
}

pub(crate) fn radius_along(
    f: &HConvexFn,
    center: &HPoint,
    f0: f64,
    p: &HorizontalVector,
    s: f64,
    u: &HorizontalVector,
) -> Result<SectionRadius> {
    let g = |rho: f64| excess_at(f, center, f0, p, &u.scale(rho));
    let slack = 1e-9 * (s + f0.abs());
    let nonconvex = |rho: f64, val: f64| {
        HeisError::NonConvex(format!(
            "excess {val:e} at radius {rho:e} in direction {:?} from {:?}",
            u.to_flat(),
            center.to_flat()
        ))
    };
    let (mut lo, mut glo) = (0.0, 0.0);
    let mut hi = 1.0;
    let mut ghi = g(hi);
    while !(ghi >= s) {
        if ghi.is_nan() {
            return Err(HeisError::NonFinite(format!("excess at radius {hi:e}")));
        }
        if ghi < glo - slack || ghi < -slack {
            return Err(nonconvex(hi, ghi));
        }
        if hi >= UNBOUNDED_CAP {
            return Ok(SectionRadius::Unbounded);
        }
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        ghi = g(hi);
    }
    // shrink the upper end when the section is small
    if lo == 0.0 {
        while hi > 1e-150 {
            let mid = 0.5 * hi;
            let gm = g(mid);
            if gm >= s {
                hi = mid;
            } else {
                if gm < -slack {
                    return Err(nonconvex(mid, gm));
                }
                lo = mid;
                break;
            }
        }
    }
    while hi - lo > RADIUS_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm.is_nan() {
            return Err(HeisError::NonFinite(format!("excess at radius {mid:e}")));
        }
        if gm >= s {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SectionRadius::Finite(0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialBoundary {
    pub directions: Vec<HorizontalVector>,
    pub radii: Vec<SectionRadius>,
}

impl RadialBoundary {
    pub fn finite_radii(&self) -> Option<Vec<f64>> {
        self.radii.iter().map(|r| r.finite()).collect()
    }

    /// CSV with columns `dir_1..dir_2n, radius` (unbounded radii as `inf`).
    pub fn to_csv(&self) -> String {
        let n = self.directions.first().map_or(1, |d| d.dim());
        let mut header: Vec<String> = (1..=2 * n).map(|k| format!("dir_{k}")).collect();
        header.push("radius".into());
        let rows = self.directions.iter().zip(&self.radii).map(|(d, r)| {
            let mut row = d.to_flat();
            row.push(r.value());
            row
        });
        crate::report::csv_table(&header, rows)
    }
}

/// Radii of the section over a quasi-uniform direction set.
pub fn h_section_boundary(f: &HConvexFn, spec: &HSectionSpec, n_dirs: usize) -> Result<RadialBoundary> {
    if n_dirs < 4 {
        return Err(HeisError::InvalidParameter("need at least 4 directions".into()));
    }
    let dirs = sphere_directions(f.n, n_dirs);
    let f0 = f.value(&spec.center);
    let radii = dirs
        .par_iter()
        .map(|u| radius_along(f, &spec.center, f0, &spec.p, spec.s, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(RadialBoundary { directions: dirs, radii })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub xi: HPoint,
    pub r: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub argmin: HorizontalVector,
    pub argmax: HorizontalVector,
}

/// Extremes of a function on the unit sphere of R²ⁿ: grid sweep plus local
/// refinement. Returns `(min, argmin, max, argmax)`.
fn sphere_extremes<F: Fn(&HorizontalVector) -> f64>(
    g: F,
    n: usize,
    n_dirs: usize,
    refine_iters: usize,
) -> (f64, HorizontalVector, f64, HorizontalVector) {
    let dirs = sphere_directions(n, n_dirs);
    let vals: Vec<f64> = dirs.iter().map(&g).collect();
    let imin = (0..vals.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let imax = (0..vals.len()).max_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let (mut lo, mut lo_dir) = (vals[imin], dirs[imin].clone());
    let (mut hi, mut hi_dir) = (vals[imax], dirs[imax].clone());
    if refine_iters == 0 {
        return (lo, lo_dir, hi, hi_dir);
    }
    if n == 1 {
        let h = 2.0 * std::f64::consts::PI / n_dirs as f64;
        let at = |th: f64| HorizontalVector::h1(th.cos(), th.sin());
        let th0 = lo_dir.b[0].atan2(lo_dir.a[0]);
        let (th, v) = golden_min(|th| g(&at(th)), th0 - h, th0 + h, 1e-13, refine_iters);
        if v < lo {
            lo = v;
            lo_dir = at(th);
        }
        let th0 = hi_dir.b[0].atan2(hi_dir.a[0]);
        let (th, v) = golden_max(|th| g(&at(th)), th0 - h, th0 + h, 1e-13, refine_iters);
        if v > hi {
            hi = v;
            hi_dir = at(th);
        }
    } else {
        let step = 0.5 * (n_dirs as f64).powf(-1.0 / (2 * n - 1) as f64);
        let on_sphere = |x: &[f64]| HorizontalVector::from_flat(x).ok().and_then(|v| v.normalized());
        let (x, v) = compass_min(
            |x| on_sphere(x).map_or(f64::INFINITY, |u| g(&u)),
            &lo_dir.to_flat(),
            step,
            1e-10,
            refine_iters * 4 * n,
            f64::NEG_INFINITY,
        );
        if v < lo {
            lo = v;
            lo_dir = on_sphere(&x).unwrap();
        }
        let (x, v) = compass_min(
            |x| on_sphere(x).map_or(f64::INFINITY, |u| -g(&u)),
            &hi_dir.to_flat(),
            step,
            1e-10,
            refine_iters * 4 * n,
            f64::NEG_INFINITY,
        );
        if -v > hi {
            hi = -v;
            hi_dir = on_sphere(&x).unwrap();
        }
    }
    (lo, lo_dir, hi, hi_dir)
}

/// `m(ξ, r)` and `M(ξ, r)`: min and max of the excess over `{‖v‖ = r}` in
/// `H_ξ`.
pub fn m_big_m(f: &HConvexFn, xi: &HPoint, r: f64, n_dirs: usize, refine_iters: usize) -> Result<SlopeProfile> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(HeisError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let f0 = f.eval(xi)?;
    let p = f.horizontal_gradient(xi)?;
    let g = |u: &HorizontalVector| excess_at(f, xi, f0, &p, &u.scale(r));
    let (m, argmin, big_m, argmax) = sphere_extremes(g, f.n, n_dirs.max(4), refine_iters);
    if !(m.is_finite() && big_m.is_finite()) {
        return Err(HeisError::NonFinite(format!("excess on the sphere of radius {r} at {:?}", xi.to_flat())));
    }
    Ok(SlopeProfile {
        xi: xi.clone(),
        r,
        m,
        big_m,
        argmin: argmin.scale(r),
        argmax: argmax.scale(r),
    })
}

/// `m_M` with the default sweep (720 angles or 2000 directions, 60 refinement
/// iterations).
pub fn m_big_m_default(f: &HConvexFn, xi: &HPoint, r: f64) -> Result<SlopeProfile> {
    m_big_m(f, xi, r, default_sweep_dirs(f.n), 60)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundConstants {
    pub r_in: f64,
    pub r_out: f64,
    pub ratio: f64,
}

/// Inner and outer radii of the section `S^H(ξ, s)`; any `K₀ ≤ ratio` is
/// valid for this section.
pub fn round_constants(f: &HConvexFn, xi: &HPoint, s: f64) -> Result<RoundConstants> {
    let spec = HSectionSpec::new(f, xi, s)?;
    let f0 = f.value(xi);
    let radius = |u: &HorizontalVector| radius_along(f, xi, f0, &spec.p, s, u).map(|r| r.value());
    let dirs = sphere_directions(f.n, default_sweep_dirs(f.n));
    let radii: Vec<f64> = dirs.par_iter().map(radius).collect::<Result<Vec<_>>>()?;
    if let Some(i) = radii.iter().position(|r| !r.is_finite()) {
        return Err(HeisError::Unbounded { direction: dirs[i].to_flat() });
    }
    let imin = (0..radii.len()).min_by(|&i, &j| radii[i].total_cmp(&radii[j])).unwrap();
    let imax = (0..radii.len()).max_by(|&i, &j| radii[i].total_cmp(&radii[j])).unwrap();
    let (mut r_in, mut r_out) = (radii[imin], radii[imax]);
    if f.n == 1 {
        let g = |th: f64| radius(&HorizontalVector::h1(th.cos(), th.sin())).unwrap_or(f64::INFINITY);
        let h = 2.0 * std::f64::consts::PI / dirs.len() as f64;
        let angle = |u: &HorizontalVector| u.b[0].atan2(u.a[0]);
        let t = angle(&dirs[imin]);
        r_in = r_in.min(golden_min(g, t - h, t + h, 1e-12, 60).1);
        let t = angle(&dirs[imax]);
        r_out = r_out.max(golden_max(g, t - h, t + h, 1e-12, 60).1);
    }
    Ok(RoundConstants { r_in, r_out, ratio: r_in / r_out })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeSample {
    pub xi: Vec<f64>,
    pub r: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub ratio: f64,
}

fn slope_ratio(p: &SlopeProfile) -> Result<f64> {
    if !(p.m > 1e-12 * p.big_m.abs()) || p.m <= 0.0 {
        return Err(HeisError::ZeroDenominator(format!(
            "m = {:e} at {:?}, r = {}",
            p.m,
            p.xi.to_flat(),
            p.r
        )));
    }
    Ok(p.big_m / p.m)
}

/// `M/m` at a fixed point over a radius grid.
pub fn slope_profile(f: &HConvexFn, xi: &HPoint, r_grid: &[f64]) -> Result<Vec<SlopeSample>> {
    r_grid
        .iter()
        .map(|&r| {
            let p = m_big_m_default(f, xi, r)?;
            let ratio = slope_ratio(&p)?;
            Ok(SlopeSample { xi: xi.to_flat(), r, m: p.m, big_m: p.big_m, ratio })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub k1_est: f64,
    pub samples: usize,
    pub worst: SlopeSample,
}

/// Sampling box for slope and doubling estimates (gauge radius).
pub const SLOPE_BOX: f64 = 3.0;

fn sample_centers(n: usize, count: usize, seed: u64, radius: f64) -> Vec<HPoint> {
    let mut out = vec![HPoint::identity(n)];
    for i in 1..count.max(1) {
        let mut rng = rng_for(seed, i as u64);
        out.push(gauge_ball_point(&mut rng, n, radius));
    }
    out
}

/// `K₁` estimate: the largest sampled `M(ξ, r)/m(ξ, r)` over the origin plus
/// `n_samples − 1` random centers and every radius of `r_grid`.
pub fn slope_constant(f: &HConvexFn, n_samples: usize, r_grid: &[f64], seed: u64) -> Result<SlopeReport> {
    let centers = sample_centers(f.n, n_samples, seed, SLOPE_BOX);
    let all: Vec<Vec<SlopeSample>> = centers
        .par_iter()
        .map(|xi| slope_profile(f, xi, r_grid))
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<SlopeSample> = all.into_iter().flatten().collect();
    let worst = flat
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .cloned()
        .ok_or_else(|| HeisError::InvalidParameter("empty radius grid".into()))?;
    Ok(SlopeReport { k1_est: worst.ratio, samples: flat.len(), worst })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    #[serde(rename = "B1_est")]
    pub b1_est: f64,
    #[serde(rename = "B2_est")]
    pub b2_est: f64,
    #[serde(rename = "B4_est")]
    pub b4_est: f64,
    pub gamma_est: u32,
    pub kpp_prescreen: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublingSamples {
    pub centers: usize,
    pub r_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for DoublingSamples {
    fn default() -> Self {
        DoublingSamples { centers: 8, r_grid: vec![0.25, 0.5, 1.0, 2.0], seed: 0 }
    }
}

const GAMMA_CAP: u32 = 30;

/// Doubling ratios of `m` and `M` and the least `γ ≥ 1` with
/// `M(ξ, r) ≤ m(ξ, 2^γ r)` on the sample.
pub fn doubling_report(f: &HConvexFn, samples: &DoublingSamples) -> Result<DoublingReport> {
    let kpp = estimate_kpp(f, 2000, samples.seed, crate::engulfing::ENGULF_BOX)?;
    let centers = sample_centers(f.n, samples.centers, samples.seed, SLOPE_BOX);
    let rows: Vec<(f64, f64, f64, u32)> = centers
        .par_iter()
        .flat_map(|xi| samples.r_grid.par_iter().map(move |&r| (xi.clone(), r)))
        .map(|(xi, r)| {
            let p1 = m_big_m_default(f, &xi, r)?;
            let p2 = m_big_m_default(f, &xi, 2.0 * r)?;
            for p in [&p1, &p2] {
                slope_ratio(p)?;
            }
            let mut gamma = 1;
            loop {
                let m_far = m_big_m_default(f, &xi, r * 2f64.powi(gamma as i32))?.m;
                if p1.big_m <= m_far {
                    break;
                }
                gamma += 1;
                if gamma > GAMMA_CAP {
                    return Err(HeisError::BracketCap(format!(
                        "no gamma <= {GAMMA_CAP} with M(r) <= m(2^gamma r) at {:?}, r = {r}",
                        xi.to_flat()
                    )));
                }
            }
            Ok((p2.big_m / p1.big_m, p2.m / p1.m, p2.m / p1.m, gamma))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = DoublingReport {
        b1_est: f64::NEG_INFINITY,
        b2_est: f64::NEG_INFINITY,
        b4_est: f64::INFINITY,
        gamma_est: 1,
        kpp_prescreen: kpp.kpp_est,
        samples: rows.len(),
    };
    for (b1, b2, b4, g) in rows {
        rep.b1_est = rep.b1_est.max(b1);
        rep.b2_est = rep.b2_est.max(b2);
        rep.b4_est = rep.b4_est.min(b4);
        rep.gamma_est = rep.gamma_est.max(g);
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub monotone: bool,
    pub values: Vec<(f64, f64)>,
    /// Consecutive grid pairs `(r_i, r_{i+1})` where `m` failed to increase.
    pub defects: Vec<(f64, f64)>,
}

/// Checks that `r ↦ m(ξ, r)` increases along an increasing grid.
pub fn verify_m_monotone(f: &HConvexFn, xi: &HPoint, r_grid: &[f64]) -> Result<MonotoneReport> {
    let values: Vec<(f64, f64)> = r_grid
        .iter()
        .map(|&r| m_big_m_default(f, xi, r).map(|p| (r, p.m)))
        .collect::<Result<Vec<_>>>()?;
    let defects: Vec<(f64, f64)> = values
        .windows(2)
        .filter(|w| w[1].1 - w[0].1 < -1e-12 * w[0].1.abs().max(1.0))
        .map(|w| (w[0].0, w[1].0))
        .collect();
    Ok(MonotoneReport { monotone: defects.is_empty(), values, defects })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excess_examples() {
        let f = HConvexFn::sqnorm(1);
        let e = HPoint::identity(1);
        let p = f.horizontal_gradient(&e).unwrap();
        assert_eq!(excess(&f, &e, &p, &e).unwrap(), 0.0);
        let v = HorizontalVector::h1(0.6, -0.8);
        assert!((excess(&f, &e, &p, &e.exp_h(&v)).unwrap() - 1.0).abs() < 1e-12);
        let xi = HPoint::h1(1.5, -2.0, 7.0);
        let p = f.horizontal_gradient(&xi).unwrap();
        assert!((excess(&f, &xi, &p, &xi.exp_h(&v)).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(excess(&f, &e, &p, &HPoint::h1(0.0, 0.0, 1.0)), Err(HeisError::OffPlane { .. })));
    }

    #[test]
    fn radius_examples() {
        let f = HConvexFn::sqnorm(1);
        let spec = HSectionSpec::new(&f, &HPoint::h1(0.3, 0.2, -1.0), 4.0).unwrap();
        let u = HorizontalVector::h1(0.6, 0.8);
        assert!((h_section_radius(&f, &spec, &u).unwrap().value() - 2.0).abs() < 1e-10);
        let g = HConvexFn::sqnorm_t(1);
        let spec = HSectionSpec::new(&g, &HPoint::identity(1), 1.0).unwrap();
        assert!((h_section_radius(&g, &spec, &u).unwrap().value() - 1.0).abs() < 1e-10);
        let affine = HConvexFn::from_expr("x1", 1).unwrap();
        let spec = HSectionSpec::new(&affine, &HPoint::identity(1), 1.0).unwrap();
        let left = HorizontalVector::h1(-1.0, 0.0);
        assert_eq!(h_section_radius(&affine, &spec, &left).unwrap(), SectionRadius::Unbounded);
        let concave = HConvexFn::from_expr("-(x1^2)", 1).unwrap();
        let spec = HSectionSpec::new(&concave, &HPoint::identity(1), 1.0).unwrap();
        assert!(matches!(h_section_radius(&concave, &spec, &left), Err(HeisError::NonConvex(_))));
    }

    #[test]
    fn tiny_and_large_sections() {
        let f = HConvexFn::sqnorm(1);
        let u = HorizontalVector::h1(1.0, 0.0);
        for s in [1e-8, 1e-3, 1e3, 1e8] {
            let spec = HSectionSpec::new(&f, &HPoint::identity(1), s).unwrap();
            let r = h_section_radius(&f, &spec, &u).unwrap().value();
            assert!((r - s.sqrt()).abs() <= 1e-10 * s.sqrt());
        }
    }

    #[test]
    fn boundaries() {
        let f = HConvexFn::sqnorm(1);
        let spec = HSectionSpec::new(&f, &HPoint::identity(1), 1.0).unwrap();
        let b = h_section_boundary(&f, &spec, 720).unwrap();
        assert!(b.finite_radii().unwrap().iter().all(|r| (r - 1.0).abs() < 1e-9));
        let w = HConvexFn::wang();
        let spec = HSectionSpec::new(&w, &HPoint::identity(1), 1.0).unwrap();
        let r = h_section_boundary(&w, &spec, 360).unwrap().finite_radii().unwrap();
        let (lo, hi) = r.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo > 1.0);
    }

    #[test]
    fn slope_examples() {
        let f = HConvexFn::sqnorm(1);
        let p = m_big_m_default(&f, &HPoint::h1(1.0, 2.0, 3.0), 1.5).unwrap();
        assert!((p.m - 2.25).abs() < 1e-12 && (p.big_m - 2.25).abs() < 1e-12);
        let w = HConvexFn::wang();
        let p = m_big_m_default(&w, &HPoint::identity(1), 10.0).unwrap();
        assert!(p.m <= 2.0 * 10f64.powf(4.0 / 3.0));
        assert!(p.big_m >= 1e4);
        let q = HConvexFn::quad(vec![vec![1.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let rep = slope_constant(&q, 4, &[0.5, 1.0, 2.0], 1).unwrap();
        assert!((rep.k1_est - 4.0).abs() < 1e-9);
    }

    #[test]
    fn round_constants_examples() {
        let f = HConvexFn::sqnorm(1);
        let rc = round_constants(&f, &HPoint::h1(0.5, 0.5, 1.0), 2.0).unwrap();
        assert!((rc.ratio - 1.0).abs() < 1e-9);
        let w = HConvexFn::wang();
        let small = round_constants(&w, &HPoint::identity(1), 1.0).unwrap().ratio;
        let large = round_constants(&w, &HPoint::identity(1), 1e4).unwrap().ratio;
        assert!(small < 1.0 && large < small);
    }

    #[test]
    fn monotone_m() {
        let grid = [0.5, 1.0, 2.0, 4.0, 8.0];
        let f = HConvexFn::sqnorm(1);
        assert!(verify_m_monotone(&f, &HPoint::identity(1), &grid).unwrap().monotone);
        assert!(verify_m_monotone(&HConvexFn::wang(), &HPoint::identity(1), &grid).unwrap().monotone);
        let g = HConvexFn::sqnorm_t(1);
        assert!(verify_m_monotone(&g, &HPoint::h1(5.0, 5.0, 5.0), &grid).unwrap().monotone);
    }
}
