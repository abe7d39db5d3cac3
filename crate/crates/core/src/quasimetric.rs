//! The quasi-distance `d_φ(ξ, ξ′) = inf{s : ξ ∈ 𝒮(ξ′, s), ξ′ ∈ 𝒮(ξ, s)}`,
//! its quasi-triangle constant and its balls.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HeisError, Result};
use crate::funcs::HConvexFn;
use crate::group::{dilate, HPoint};
use crate::hnsections::{exact_hn_membership, hn_contains, hn_search, random_member, Witness};
use crate::sampling::{gauge_ball_point, log_uniform, rng_for};
use crate::threehop::SearchBudget;

pub const DEFAULT_REL_TOL: f64 = 1e-3;
/// Largest height tried while bracketing.
pub const HEIGHT_CAP: f64 = 1e12;
/// Gauge radius of the quasi-triangle sampling box.
pub const TRIANGLE_BOX: f64 = 5.0;
/// Witness-driven steps before falling back to plain bisection.
const ACCEL_STEPS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiDistance {
    /// Certified upper end `s_hi` of the bracket.
    pub value: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// Witnesses of `ξ′ ∈ 𝒮(ξ, s_hi)` and `ξ ∈ 𝒮(ξ′, s_hi)`.
    pub witnesses: Option<(Witness, Witness)>,
    pub queries: usize,
}

/// Both memberships at height `s` with near-cheapest witnesses, or `None`
/// when either direction is OUT at resolution.
fn mutual(f: &HConvexFn, a: &HPoint, b: &HPoint, s: f64, budget: &SearchBudget) -> Result<Option<(Witness, Witness)>> {
    let fwd = hn_search(f, a, s, b, budget, true)?;
    let Some(w1) = fwd.witness().cloned() else { return Ok(None) };
    let bwd = hn_search(f, b, s, a, budget, true)?;
    Ok(bwd.witness().map(|w2| (w1, w2.clone())))
}

fn canonical<'a>(a: &'a HPoint, b: &'a HPoint) -> (&'a HPoint, &'a HPoint, bool) {
    match a.to_flat().partial_cmp(&b.to_flat()) {
        Some(std::cmp::Ordering::Greater) => (b, a, true),
        _ => (a, b, false),
    }
}

/// Bisection on `s` of the mutual-membership predicate, started by doubling
/// from `s = 1`. After each IN the upper end drops to the witnesses' largest
/// hop excess; the next query sits just below it.
pub fn d_phi(f: &HConvexFn, xi: &HPoint, xi2: &HPoint, rel_tol: f64, budget: &SearchBudget) -> Result<QuasiDistance> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(HeisError::InvalidParameter(format!("rel_tol must lie in (0, 1), got {rel_tol}")));
    }
    if xi == xi2 {
        return Ok(QuasiDistance { value: 0.0, s_lo: 0.0, s_hi: 0.0, witnesses: None, queries: 0 });
    }
    let (a, b, swapped) = canonical(xi, xi2);
    let mut queries = 0;
    let mut query = |s: f64| {
        queries += 1;
        mutual(f, a, b, s, budget)
    };
    let top = |w: &(Witness, Witness)| w.0.max_excess().max(w.1.max_excess()).next_up();
    let (mut lo, mut hi, mut wit);
    let mut s = 1.0;
    match query(s)? {
        Some(w) => {
            lo = 0.0;
            hi = top(&w).min(s);
            wit = w;
        }
        None => {
            lo = s;
            loop {
                s *= 2.0;
                if s > HEIGHT_CAP {
                    return Err(HeisError::BracketCap(format!("no mutual membership below height {HEIGHT_CAP:e}")));
                }
                if let Some(w) = query(s)? {
                    hi = top(&w).min(s);
                    wit = w;
                    break;
                }
                lo = s;
            }
        }
    }
    let mut accel = 0;
    while hi - lo > rel_tol * hi {
        let q = if accel < ACCEL_STEPS {
            accel += 1;
            (hi * (1.0 - rel_tol)).max(0.5 * (lo + hi))
        } else if lo > 0.0 {
            0.5 * (lo + hi)
        } else {
            0.5 * hi
        };
        match query(q)? {
            Some(w) => {
                hi = top(&w).min(q);
                wit = w;
            }
            None => lo = q,
        }
        if hi <= lo {
            lo = 0.0;
        }
    }
    let witnesses = if swapped { (wit.1, wit.0) } else { wit };
    Ok(QuasiDistance { value: hi, s_lo: lo, s_hi: hi, witnesses: Some(witnesses), queries })
}

/// `ξ′ ∈ B_φ(ξ, r)`: mutual membership at height `r` certified by witnesses
/// whose hop excesses all stay below `r`.
pub fn ball_contains(f: &HConvexFn, xi: &HPoint, r: f64, xi2: &HPoint, budget: &SearchBudget) -> Result<bool> {
    if !(r > 0.0) {
        return Err(HeisError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if xi == xi2 {
        return Ok(true);
    }
    let (a, b, _) = canonical(xi, xi2);
    Ok(hn_contains(f, a, r, b, budget)?.is_in() && hn_contains(f, b, r, a, budget)?.is_in())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiTriangle {
    #[serde(rename = "H_est")]
    pub h_est: f64,
    pub triples: usize,
    pub skipped: usize,
    pub worst: Option<[Vec<f64>; 3]>,
}

/// Triple number `i`: a center in the box and two more points at
/// log-uniform gauge spreads from it.
fn triple(n: usize, seed: u64, i: u64, radius: f64) -> [HPoint; 3] {
    let mut rng = rng_for(seed, i);
    let xi = gauge_ball_point(&mut rng, n, radius);
    let near = |rng: &mut crate::sampling::SampleRng| {
        let u = gauge_ball_point(rng, n, 1.0);
        let lam = log_uniform(rng, 1e-2, radius);
        xi.compose(&dilate(lam, &u).expect("positive dilation"))
    };
    let eta = near(&mut rng);
    let zeta = if rng.gen_bool(0.5) { near(&mut rng) } else { eta.compose(&gauge_ball_point(&mut rng, n, 1.0)) };
    [xi, eta, zeta]
}

/// `max d(ξ, ζ) / (d(ξ, η) + d(η, ζ))` over sampled triples. Triple `i`
/// depends only on `(seed, i)`, so more triples can only raise the value.
pub fn quasi_triangle_constant(f: &HConvexFn, n_triples: usize, seed: u64, radius: f64, rel_tol: f64, budget: &SearchBudget) -> Result<QuasiTriangle> {
    if n_triples == 0 {
        return Err(HeisError::InvalidParameter("need at least one triple".into()));
    }
    let rows: Vec<Option<(f64, [Vec<f64>; 3])>> = (0..n_triples as u64)
        .into_par_iter()
        .map(|i| {
            let [xi, eta, zeta] = triple(f.n, seed, i, radius);
            if xi == eta || eta == zeta || xi == zeta {
                return Ok(None);
            }
            let d_xz = d_phi(f, &xi, &zeta, rel_tol, budget)?.value;
            let d_xy = d_phi(f, &xi, &eta, rel_tol, budget)?.value;
            let d_yz = d_phi(f, &eta, &zeta, rel_tol, budget)?.value;
            Ok(Some((d_xz / (d_xy + d_yz), [xi.to_flat(), eta.to_flat(), zeta.to_flat()])))
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = rows.iter().filter(|r| r.is_none()).count();
    let best = rows.into_iter().flatten().max_by(|a, b| a.0.total_cmp(&b.0));
    Ok(QuasiTriangle {
        h_est: best.as_ref().map_or(0.0, |b| b.0),
        triples: n_triples - skipped,
        skipped,
        worst: best.map(|b| b.1),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub r: f64,
    #[serde(rename = "H_est")]
    pub h_est: f64,
    /// Points of `𝒮(ξ, r/2H)` not found in `B_φ(ξ, r)`, confirmed by a closed
    /// form where one exists.
    pub left_defects: Vec<Vec<f64>>,
    /// Points of `B_φ(ξ, r)` not found in `𝒮(ξ, r)`.
    pub right_defects: Vec<Vec<f64>>,
    /// Search misses that no closed form could decide.
    pub inconclusive: Vec<Vec<f64>>,
    pub probes: usize,
}

impl SandwichReport {
    pub fn passed(&self) -> bool {
        self.left_defects.is_empty() && self.right_defects.is_empty()
    }
}

/// `𝒮(ξ, r/2H) ⊂ B_φ(ξ, r) ⊂ 𝒮(ξ, r)` on certified probes.
pub fn ball_sandwich_check(f: &HConvexFn, xi: &HPoint, r: f64, h_est: f64, probes: usize, seed: u64, budget: &SearchBudget) -> Result<SandwichReport> {
    if !(r > 0.0 && h_est > 0.0) {
        return Err(HeisError::InvalidParameter("radius and H must be positive".into()));
    }
    let inner = r / (2.0 * h_est);
    // the ball itself has d = max of both directions; for the closed form
    // both directions are decided by the same membership
    let oracle_in_ball = |z: &HPoint| exact_hn_membership(f, xi, r, z);
    let rows: Vec<[Option<Vec<f64>>; 3]> = (0..probes as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let (z, _) = random_member(f, xi, inner, &mut rng)?;
            let mut row = [None, None, None];
            if !ball_contains(f, xi, r, &z, budget)? {
                match oracle_in_ball(&z) {
                    Some(false) => row[0] = Some(z.to_flat()),
                    _ => row[2] = Some(z.to_flat()),
                }
            }
            let (w, _) = random_member(f, xi, r, &mut rng)?;
            if ball_contains(f, xi, r, &w, budget)? && !hn_contains(f, xi, r, &w, budget)?.is_in() {
                row[1] = Some(w.to_flat());
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = SandwichReport { r, h_est, left_defects: vec![], right_defects: vec![], inconclusive: vec![], probes };
    for [a, b, c] in rows {
        rep.left_defects.extend(a);
        rep.right_defects.extend(b);
        rep.inconclusive.extend(c);
    }
    Ok(rep)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub row: usize,
    pub col: usize,
    pub d: QuasiDistance,
}

/// Upper-triangle distance matrix (the diagonal is zero, the rest symmetric).
pub fn distance_matrix(f: &HConvexFn, points: &[HPoint], rel_tol: f64, budget: &SearchBudget) -> Result<Vec<MatrixEntry>> {
    let pairs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (i + 1..points.len()).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .map(|&(row, col)| Ok(MatrixEntry { row, col, d: d_phi(f, &points[row], &points[col], rel_tol, budget)? }))
        .collect()
}

/// CSV with columns `row, col, value, s_lo, s_hi`.
pub fn matrix_csv(entries: &[MatrixEntry]) -> String {
    let header: Vec<String> = ["row", "col", "value", "s_lo", "s_hi"].iter().map(|s| s.to_string()).collect();
    crate::report::csv_table(
        &header,
        entries.iter().map(|e| vec![e.row as f64, e.col as f64, e.d.value, e.d.s_lo, e.d.s_hi]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> HConvexFn {
        HConvexFn::sqnorm(1)
    }

    #[test]
    fn distance_checkpoints() {
        let b = SearchBudget::default();
        let e = HPoint::identity(1);
        assert_eq!(d_phi(&sq(), &e, &e, 1e-3, &b).unwrap().value, 0.0);
        for p in [HPoint::h1(3.0, 0.0, 0.0), HPoint::h1(0.0, 0.0, 3f64.sqrt())] {
            let d = d_phi(&sq(), &e, &p, 1e-3, &b).unwrap();
            assert!((d.value - 1.0).abs() < 1e-3, "{d:?}");
            assert!(d.s_lo <= d.value && d.value == d.s_hi);
            let back = d_phi(&sq(), &p, &e, 1e-3, &b).unwrap();
            assert_eq!(back.value, d.value);
        }
    }

    #[test]
    fn balls() {
        let b = SearchBudget::default();
        let e = HPoint::identity(1);
        let p = HPoint::h1(3.0, 0.0, 0.0);
        assert!(ball_contains(&sq(), &e, 1.05, &p, &b).unwrap());
        assert!(!ball_contains(&sq(), &e, 0.95, &p, &b).unwrap());
        assert!(ball_contains(&sq(), &e, 1e-6, &e, &b).unwrap());
    }

    #[test]
    fn collinear_triple_is_additive_enough() {
        let b = SearchBudget::quick();
        let (x, y, z) = (HPoint::h1(-1.0, 0.0, 0.0), HPoint::h1(0.0, 0.0, 0.0), HPoint::h1(1.0, 0.0, 0.0));
        let d = |p: &HPoint, q: &HPoint| d_phi(&sq(), p, q, 1e-3, &b).unwrap().value;
        assert!(d(&x, &z) / (d(&x, &y) + d(&y, &z)) <= 2.0 + 1e-2);
    }

    #[test]
    fn sandwich_sensitivity() {
        let b = SearchBudget::quick();
        let e = HPoint::identity(1);
        let good = ball_sandwich_check(&sq(), &e, 1.0, 1.0, 6, 2, &b).unwrap();
        assert!(good.passed(), "{good:?}");
        let bad = ball_sandwich_check(&sq(), &e, 1.0, 0.1, 6, 2, &b).unwrap();
        assert!(!bad.left_defects.is_empty());
    }
}
