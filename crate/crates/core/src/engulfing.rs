//! Engulfing for H-sections: the gradient-ratio characterization, the
//! inclusion property E(H, K), the point-swap condition and H-monotonicity.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::funcs::HConvexFn;
use crate::group::{plane_trace, HPoint, HorizontalVector, TraceKind};
use crate::sampling::{gauge_ball_point, log_uniform, rng_for, unit_vector, SampleRng};
use crate::sections::{radius_along, SectionRadius};

/// Default gauge radius of the sampling box.
pub const ENGULF_BOX: f64 = 10.0;
/// Relative slack on memberships before a violation is recorded.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;
const MIN_EXCESS: f64 = 1e-12;
/// Ray length used when a section is unbounded in the sampled direction.
const OPEN_RAY: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub xi: HPoint,
    pub xi2: HPoint,
    pub r: f64,
}

fn on_plane(center: &HPoint, q: &HPoint) -> Result<()> {
    let d = q.plane_defect(center);
    let s = 1.0 + center.magnitude() + q.magnitude();
    if d.abs() > 1e-9 * s * s {
        return Err(HeisError::OffPlane { defect: d });
    }
    Ok(())
}

/// `(q − p)·Δ / (f(ξ′) − f(ξ) − p·Δ)` with `p, q` the gradients at `ξ, ξ′`
/// and `Δ = Pr₁ ξ′ − Pr₁ ξ`.
pub fn ratio_iii(f: &HConvexFn, xi: &HPoint, xi2: &HPoint) -> Result<f64> {
    on_plane(xi, xi2)?;
    let p = f.horizontal_gradient(xi)?;
    let q = f.horizontal_gradient(xi2)?;
    let d = xi2.proj().sub(&xi.proj());
    let den = f.eval(xi2)? - f.eval(xi)? - p.dot(&d);
    if !(den > 0.0) {
        return Err(HeisError::ZeroDenominator(format!("excess {den:e} between {:?} and {:?}", xi.to_flat(), xi2.to_flat())));
    }
    Ok(q.sub(&p).dot(&d) / den)
}

fn horizontal_pair(rng: &mut SampleRng, n: usize, radius: f64) -> (HPoint, HPoint) {
    let xi = gauge_ball_point(rng, n, radius);
    let u = unit_vector(rng, n);
    let len = log_uniform(rng, 1e-3 * radius, radius);
    let xi2 = xi.exp_h(&u.scale(len));
    (xi, xi2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KppEstimate {
    pub kpp_est: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
}

impl KppEstimate {
    /// The engulfing constant `2K″(K″ + 1)` implied by the estimate.
    pub fn k_derived(&self) -> f64 {
        2.0 * self.kpp_est * (self.kpp_est + 1.0)
    }
}

/// Least `K″` with `1 + 1/K″ ≤ R ≤ 1 + K″` on a sample of horizontal pairs.
pub fn estimate_kpp(f: &HConvexFn, n_pairs: usize, seed: u64, radius: f64) -> Result<KppEstimate> {
    let rows: Vec<Option<f64>> = (0..n_pairs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let (xi, xi2) = horizontal_pair(&mut rng, f.n, radius);
            let p = f.horizontal_gradient(&xi)?;
            let q = f.horizontal_gradient(&xi2)?;
            let d = xi2.proj().sub(&xi.proj());
            let fx = f.eval(&xi)?;
            let den = f.eval(&xi2)? - fx - p.dot(&d);
            if den < -1e-9 * (1.0 + fx.abs()) {
                return Err(HeisError::NonConvex(format!(
                    "negative excess {den:e} from {:?} to {:?}",
                    xi.to_flat(),
                    xi2.to_flat()
                )));
            }
            if den < MIN_EXCESS {
                return Ok(None);
            }
            Ok(Some(q.sub(&p).dot(&d) / den))
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<f64> = rows.iter().flatten().copied().collect();
    let r_min = used.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = used.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if used.is_empty() || !(r_min > 1.0 + 1e-9) || !r_max.is_finite() {
        return Err(HeisError::NotEngulfing { inf_ratio: r_min });
    }
    Ok(KppEstimate {
        kpp_est: (r_max - 1.0).max(1.0 / (r_min - 1.0)),
        r_min,
        r_max,
        pairs_used: used.len(),
        pairs_skipped: rows.len() - used.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngulfSamples {
    pub pairs: usize,
    /// Trace points tested per pair.
    pub probes: usize,
    pub seed: u64,
    pub radius: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl Default for EngulfSamples {
    fn default() -> Self {
        EngulfSamples { pairs: 400, probes: 16, seed: 0, radius: ENGULF_BOX, s_min: 1e-3, s_max: 1e3 }
    }
}

/// A sampled center, its section height, and a point inside that section.
#[derive(Clone, Debug)]
struct SectionPair {
    xi: HPoint,
    p: HorizontalVector,
    f_xi: f64,
    s: f64,
    xi2: HPoint,
    q: HorizontalVector,
    f_xi2: f64,
}

fn section_pair(f: &HConvexFn, samples: &EngulfSamples, i: u64) -> Result<(SectionPair, SampleRng)> {
    let mut rng = rng_for(samples.seed, i);
    let xi = gauge_ball_point(&mut rng, f.n, samples.radius);
    let s = log_uniform(&mut rng, samples.s_min, samples.s_max);
    let u = unit_vector(&mut rng, f.n);
    let f_xi = f.eval(&xi)?;
    let p = f.horizontal_gradient(&xi)?;
    let reach = match radius_along(f, &xi, f_xi, &p, s, &u)? {
        SectionRadius::Finite(r) => r,
        SectionRadius::Unbounded => OPEN_RAY,
    };
    let frac: f64 = rng.gen_range(0.0..1.0);
    let xi2 = xi.exp_h(&u.scale(frac * reach));
    let q = f.horizontal_gradient(&xi2)?;
    let f_xi2 = f.eval(&xi2)?;
    Ok((SectionPair { xi, p, f_xi, s, xi2, q, f_xi2 }, rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub xi: Vec<f64>,
    pub s: f64,
    pub xi2: Vec<f64>,
    pub witness: Vec<f64>,
    /// `excess(ξ′ → witness)/(K s) − 1`.
    pub defect: f64,
}

fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| {
        a.xi.partial_cmp(&b.xi)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.s.total_cmp(&b.s))
            .then(a.witness.partial_cmp(&b.witness).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// CSV with columns `xi_*, s, xi2_*, w_*, defect`.
pub fn violations_csv(n: usize, v: &[Violation]) -> String {
    let coords = |prefix: &str| -> Vec<String> {
        (1..=n)
            .map(|k| format!("{prefix}_x{k}"))
            .chain((1..=n).map(|k| format!("{prefix}_y{k}")))
            .chain(std::iter::once(format!("{prefix}_t")))
            .collect()
    };
    let mut header = coords("xi");
    header.push("s".into());
    header.extend(coords("xi2"));
    header.extend(coords("w"));
    header.push("defect".into());
    let rows = v.iter().map(|r| {
        let mut row = r.xi.clone();
        row.push(r.s);
        row.extend(&r.xi2);
        row.extend(&r.witness);
        row.push(r.defect);
        row
    });
    crate::report::csv_table(&header, rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngulfingReport {
    pub k: f64,
    #[serde(rename = "Kpp_est")]
    pub kpp_est: Option<f64>,
    #[serde(rename = "K_derived")]
    pub k_derived: Option<f64>,
    pub violations: Vec<Violation>,
    pub pairs: usize,
    pub probes: usize,
}

impl EngulfingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Largest `λ` with `excess(ξ → ξ′ ∘ exp(λw)) < s`, found by doubling then
/// bisection. The excess is convex in `λ` because the trace is a horizontal
/// line (or hyperplane) through `ξ′`.
fn trace_extent(g: &dyn Fn(f64) -> f64, s: f64, scale: f64) -> f64 {
    let mut lo = 0.0;
    let mut hi = scale.max(1e-12);
    while g(hi) < s {
        lo = hi;
        hi *= 2.0;
        if hi > OPEN_RAY * scale.max(1.0) {
            return hi;
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Samples `(ξ, s)` and `ξ′ ∈ S^H(ξ, s)`, then tests points `ζ` of
/// `S^H(ξ, s) ∩ H_{ξ′}` for membership in `S^H(ξ′, q, Ks)`. The center
/// `ξ` itself is always one of the probes.
pub fn check_ehk(f: &HConvexFn, k: f64, samples: &EngulfSamples) -> Result<EngulfingReport> {
    if !(k > 1.0) {
        return Err(HeisError::InvalidParameter(format!("K must exceed 1, got {k}")));
    }
    let per_pair: Vec<Vec<Violation>> = (0..samples.pairs as u64)
        .into_par_iter()
        .map(|i| {
            let (sp, mut rng) = section_pair(f, samples, i)?;
            let excess_from = |z: &HPoint, base: &HPoint, fb: f64, g: &HorizontalVector| {
                f.value(z) - fb - g.dot(&z.proj().sub(&base.proj()))
            };
            let bound = k * sp.s;
            let mut out = Vec::new();
            let mut test = |z: &HPoint| {
                if excess_from(z, &sp.xi, sp.f_xi, &sp.p) >= sp.s {
                    return;
                }
                let e2 = excess_from(z, &sp.xi2, sp.f_xi2, &sp.q);
                if e2 >= bound * (1.0 + MEMBERSHIP_SLACK) {
                    out.push(Violation {
                        xi: sp.xi.to_flat(),
                        s: sp.s,
                        xi2: sp.xi2.to_flat(),
                        witness: z.to_flat(),
                        defect: e2 / bound - 1.0,
                    });
                }
            };
            test(&sp.xi);
            let trace = plane_trace(&sp.xi2, &sp.xi)?;
            let dirs = match trace.kind {
                TraceKind::Proper => trace.tangent_basis(),
                // ξ′ = ξ up to the vertical: the whole plane is the trace
                _ => (0..2 * f.n).map(|k| HorizontalVector::basis(f.n, k)).collect(),
            };
            let scale = sp.s.sqrt().max((sp.xi2.proj().sub(&sp.xi.proj())).norm());
            for j in 0..samples.probes {
                let mut w = HorizontalVector::zeros(f.n);
                for d in &dirs {
                    w = w.axpy(rng.gen_range(-1.0..1.0), d);
                }
                let Some(w) = w.normalized() else { continue };
                let g = |lam: f64| excess_from(&sp.xi2.exp_h(&w.scale(lam)), &sp.xi, sp.f_xi, &sp.p);
                let ext = trace_extent(&g, sp.s, scale);
                // alternate between the far end of the chord and the interior
                let frac = if j % 2 == 0 { 1.0 - rng.gen_range(0.0..1e-6) } else { rng.gen_range(0.0..1.0) };
                test(&sp.xi2.exp_h(&w.scale(frac * ext)));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut violations: Vec<Violation> = per_pair.into_iter().flatten().collect();
    sort_violations(&mut violations);
    let kpp = estimate_kpp(f, samples.pairs, samples.seed, samples.radius).ok();
    Ok(EngulfingReport {
        k,
        kpp_est: kpp.as_ref().map(|e| e.kpp_est),
        k_derived: kpp.as_ref().map(|e| e.k_derived()),
        violations,
        pairs: samples.pairs,
        probes: samples.probes + 1,
    })
}

/// Point-swap condition: for sampled `ξ′ ∈ S^H(ξ, s)`, `ξ ∈ S^H(ξ′, Ks)`.
pub fn check_diamond(f: &HConvexFn, k: f64, samples: &EngulfSamples) -> Result<Vec<Violation>> {
    if !(k > 1.0) {
        return Err(HeisError::InvalidParameter(format!("K must exceed 1, got {k}")));
    }
    let rows: Vec<Option<Violation>> = (0..samples.pairs as u64)
        .into_par_iter()
        .map(|i| {
            let (sp, _) = section_pair(f, samples, i)?;
            let back = sp.f_xi - sp.f_xi2 - sp.q.dot(&sp.xi.proj().sub(&sp.xi2.proj()));
            let bound = k * sp.s;
            Ok((back >= bound * (1.0 + MEMBERSHIP_SLACK)).then(|| Violation {
                xi: sp.xi.to_flat(),
                s: sp.s,
                xi2: sp.xi2.to_flat(),
                witness: sp.xi.to_flat(),
                defect: back / bound - 1.0,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut v: Vec<Violation> = rows.into_iter().flatten().collect();
    sort_violations(&mut v);
    Ok(v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneDefect {
    /// Smallest sampled `(q − p)·Δ`.
    pub min_value: f64,
    pub xi: Vec<f64>,
    pub xi2: Vec<f64>,
}

/// Smallest `(q − p)·(Pr₁ ξ′ − Pr₁ ξ)` over sampled horizontal pairs.
pub fn check_h_monotone(f: &HConvexFn, n_pairs: usize, seed: u64, radius: f64) -> Result<MonotoneDefect> {
    let rows = (0..n_pairs.max(1) as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let (xi, xi2) = horizontal_pair(&mut rng, f.n, radius);
            let p = f.horizontal_gradient(&xi)?;
            let q = f.horizontal_gradient(&xi2)?;
            let val = q.sub(&p).dot(&xi2.proj().sub(&xi.proj()));
            Ok(MonotoneDefect { min_value: val, xi: xi.to_flat(), xi2: xi2.to_flat() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().min_by(|a, b| a.min_value.total_cmp(&b.min_value)).unwrap())
}
