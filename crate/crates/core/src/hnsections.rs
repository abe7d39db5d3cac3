//! Three-hop Hⁿ-sections.
//!
//! `ξ′ ∈ 𝒮(ξ₀, s)` when there are `ξ₁ ∈ H_{ξ₀}`, `ξ₂ ∈ H_{ξ₁}` with
//! `ξ′ ∈ H_{ξ₂}` and each of the three hop excesses below `s`. Membership
//! is one-sided: IN always carries a checked witness, OUT only means no path
//! was found at the given budget.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decompose::{coordinate_optimized, decompose3, tilde_ball_contains, tilde_norm, Strategy};
use crate::error::{HeisError, Result};
use crate::funcs::{Builtin, FnSpec, HConvexFn};
use crate::group::{HPoint, HorizontalVector};
use crate::sampling::{gauge_ball_point, log_uniform, rng_for, unit_vector, SampleRng};
use crate::sections::{m_big_m_default, radius_along, SectionRadius};
use crate::threehop::{search, ExcessCost, SearchBudget, SearchProblem};

/// Hop-1 reach used when a section is unbounded along a direction.
const OPEN_REACH: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub xi1: HPoint,
    pub xi2: HPoint,
    pub hop_excesses: [f64; 3],
}

impl Witness {
    pub fn trivial(xi0: &HPoint) -> Self {
        Witness { xi1: xi0.clone(), xi2: xi0.clone(), hop_excesses: [0.0; 3] }
    }

    pub fn max_excess(&self) -> f64 {
        self.hop_excesses.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum Verdict {
    In { witness: Box<Witness> },
    /// No path found; `best` is the smallest largest-hop-excess seen.
    OutAtResolution { best: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HnMembership {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub budget_used: u64,
}

impl HnMembership {
    pub fn is_in(&self) -> bool {
        matches!(self.verdict, Verdict::In { .. })
    }

    pub fn witness(&self) -> Option<&Witness> {
        match &self.verdict {
            Verdict::In { witness } => Some(witness.as_ref()),
            Verdict::OutAtResolution { .. } => None,
        }
    }
}

fn plane_ok(base: &HPoint, q: &HPoint) -> bool {
    let s = 1.0 + base.magnitude() + q.magnitude();
    q.plane_defect(base).abs() <= 1e-9 * s * s
}

fn hop_excess(f: &HConvexFn, from: &HPoint, to: &HPoint) -> f64 {
    let p = f.gradient(from);
    f.value(to) - f.value(from) - p.dot(&to.proj().sub(&from.proj()))
}

fn hop_excesses(f: &HConvexFn, xi0: &HPoint, w: &Witness, target: &HPoint) -> [f64; 3] {
    [hop_excess(f, xi0, &w.xi1), hop_excess(f, &w.xi1, &w.xi2), hop_excess(f, &w.xi2, target)]
}

/// Recomputes the plane memberships and the three hop excesses from scratch.
pub fn verify_witness(f: &HConvexFn, xi0: &HPoint, s: f64, target: &HPoint, w: &Witness) -> bool {
    let dims = [w.xi1.dim(), w.xi2.dim(), target.dim()];
    if dims.iter().any(|&d| d != xi0.dim() || d != f.n) {
        return false;
    }
    if !(plane_ok(xi0, &w.xi1) && plane_ok(&w.xi1, &w.xi2) && plane_ok(&w.xi2, target)) {
        return false;
    }
    hop_excesses(f, xi0, w, target).iter().all(|e| e.is_finite() && *e < s)
}

/// Searches for a three-hop witness of `target ∈ 𝒮(ξ₀, s)`, stopping at the
/// first one found.
pub fn hn_contains(f: &HConvexFn, xi0: &HPoint, s: f64, target: &HPoint, budget: &SearchBudget) -> Result<HnMembership> {
    hn_search(f, xi0, s, target, budget, false)
}

/// Like [`hn_contains`]; with `minimize` the whole budget is spent lowering
/// the largest hop excess, so an IN witness is close to the cheapest path.
pub fn hn_search(f: &HConvexFn, xi0: &HPoint, s: f64, target: &HPoint, budget: &SearchBudget, minimize: bool) -> Result<HnMembership> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(HeisError::InvalidParameter(format!("height must be positive, got {s}")));
    }
    for p in [xi0, target] {
        if p.dim() != f.n {
            return Err(HeisError::DimensionMismatch { expected: f.n, got: p.dim() });
        }
    }
    if xi0 == target {
        return Ok(HnMembership { verdict: Verdict::In { witness: Box::new(Witness::trivial(xi0)) }, budget_used: 0 });
    }
    let f0 = f.eval(xi0)?;
    let p0 = f.horizontal_gradient(xi0)?;
    let reach = |u: &HorizontalVector| match radius_along(f, xi0, f0, &p0, s, u) {
        Ok(SectionRadius::Finite(r)) => r,
        _ => OPEN_REACH,
    };
    let rel = xi0.inverse().compose(target);
    let seeds = vec![coordinate_optimized(&rel).v1, decompose3(&rel, Strategy::Coordinate).v1];
    let cost = ExcessCost { f, s };
    let pb = SearchProblem { cost: &cost, xi0, target, reach: &reach, seeds };
    let out = search(&pb, budget, if minimize { 0.0 } else { 1.0 });
    let verdict = match out.best {
        Some(path) if out.phi < 1.0 => {
            let mut w = Witness { xi1: path.xi1, xi2: path.xi2, hop_excesses: [0.0; 3] };
            w.hop_excesses = hop_excesses(f, xi0, &w, target);
            if verify_witness(f, xi0, s, target, &w) {
                Verdict::In { witness: Box::new(w) }
            } else {
                Verdict::OutAtResolution { best: w.max_excess() }
            }
        }
        _ => Verdict::OutAtResolution { best: out.phi * s },
    };
    Ok(HnMembership { verdict, budget_used: out.evals })
}

/// Closed-form membership where one is known (`sqnorm` on H¹, whose sections
/// are open tilde balls of radius `√s`).
pub fn exact_hn_membership(f: &HConvexFn, xi0: &HPoint, s: f64, target: &HPoint) -> Option<bool> {
    match (&f.spec, f.n) {
        (FnSpec::Builtin(Builtin::Sqnorm), 1) => tilde_norm(xi0, target).ok().map(|r| r < s.sqrt()),
        _ => None,
    }
}

/// Reversed chain `ξ′ → ξ₂ → ξ₁ → ξ₀` witnessing `ξ₀ ∈ 𝒮(ξ′, K′s)`.
pub fn reverse_witness(f: &HConvexFn, xi0: &HPoint, s: f64, target: &HPoint, w: &Witness, k_prime: f64) -> Result<Witness> {
    if !verify_witness(f, xi0, s, target, w) {
        return Err(HeisError::InvalidParameter("witness does not verify".into()));
    }
    let rev = Witness { xi1: w.xi2.clone(), xi2: w.xi1.clone(), hop_excesses: [0.0; 3] };
    let ex = hop_excesses(f, target, &rev, xi0);
    let bound = k_prime * s;
    for &e in &ex {
        if !(e < bound) {
            return Err(HeisError::DiamondViolated { excess: e, bound });
        }
    }
    Ok(Witness { hop_excesses: ex, ..rev })
}

/// Random point of `S^H(base, s)`: uniform direction, radius fraction with
/// density of a uniform ball.
fn random_hop(f: &HConvexFn, base: &HPoint, s: f64, rng: &mut SampleRng) -> Result<HorizontalVector> {
    let u = unit_vector(rng, f.n);
    let f0 = f.eval(base)?;
    let p = f.horizontal_gradient(base)?;
    let r = match radius_along(f, base, f0, &p, s, &u)? {
        SectionRadius::Finite(r) => r,
        SectionRadius::Unbounded => OPEN_REACH,
    };
    let frac: f64 = rng.gen_range(0.0f64..1.0).powf(1.0 / (2 * f.n) as f64);
    Ok(u.scale(frac * r))
}

/// A certified point of `𝒮(ξ₀, s)` reached by three random hops.
pub(crate) fn random_member(f: &HConvexFn, xi0: &HPoint, s: f64, rng: &mut SampleRng) -> Result<(HPoint, Witness)> {
    let xi1 = xi0.exp_h(&random_hop(f, xi0, s, rng)?);
    let xi2 = xi1.exp_h(&random_hop(f, &xi1, s, rng)?);
    let target = xi2.exp_h(&random_hop(f, &xi2, s, rng)?);
    let mut w = Witness { xi1, xi2, hop_excesses: [0.0; 3] };
    w.hop_excesses = hop_excesses(f, xi0, &w, &target);
    Ok((target, w))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnSamples {
    pub pairs: usize,
    pub probes: usize,
    pub seed: u64,
    pub radius: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub budget: SearchBudget,
}

impl Default for HnSamples {
    fn default() -> Self {
        HnSamples { pairs: 16, probes: 8, seed: 0, radius: 3.0, s_min: 1e-2, s_max: 1e2, budget: SearchBudget::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HnProbe {
    pub xi: Vec<f64>,
    pub s: f64,
    pub xi2: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Best largest-hop excess from `ξ′` to `ζ`, relative to `Ks`.
    pub best_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HnEngulfReport {
    pub k: f64,
    pub violations: Vec<HnProbe>,
    /// OUT at resolution where no oracle decides the probe.
    pub inconclusive: Vec<HnProbe>,
    pub probes_tested: usize,
    pub pairs: usize,
}

impl HnEngulfReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples `ξ′, ζ ∈ 𝒮(ξ, s)` (certified by construction) and checks
/// `ζ ∈ 𝒮(ξ′, Ks)`. An OUT counts as a violation only when a closed form
/// confirms it.
pub fn check_e_hnk(f: &HConvexFn, k: f64, samples: &HnSamples) -> Result<HnEngulfReport> {
    if !(k > 1.0) {
        return Err(HeisError::InvalidParameter(format!("K must exceed 1, got {k}")));
    }
    let jobs: Vec<(u64, usize)> = (0..samples.pairs as u64).flat_map(|i| (0..samples.probes).map(move |j| (i, j))).collect();
    type Row = (Option<HnProbe>, Option<HnProbe>);
    let rows: Vec<Row> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<Row> {
            let mut rng = rng_for(samples.seed, i);
            let xi = gauge_ball_point(&mut rng, f.n, samples.radius);
            let s = log_uniform(&mut rng, samples.s_min, samples.s_max);
            let (xi2, _) = random_member(f, &xi, s, &mut rng)?;
            let mut prng = rng_for(samples.seed ^ 0x9e37_79b9_7f4a_7c15, i * 1_000_003 + j as u64);
            // the first probe of each pair is the center itself
            let zeta = if j == 0 { xi.clone() } else { random_member(f, &xi, s, &mut prng)?.0 };
            let m = hn_contains(f, &xi2, k * s, &zeta, &samples.budget)?;
            let Verdict::OutAtResolution { best } = m.verdict else { return Ok((None, None)) };
            let probe = HnProbe { xi: xi.to_flat(), s, xi2: xi2.to_flat(), zeta: zeta.to_flat(), best_ratio: best / (k * s) };
            Ok(match exact_hn_membership(f, &xi2, k * s, &zeta) {
                Some(false) => (Some(probe), None),
                _ => (None, Some(probe)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut violations, mut inconclusive) = (Vec::new(), Vec::new());
    for (v, u) in rows {
        violations.extend(v);
        inconclusive.extend(u);
    }
    Ok(HnEngulfReport { k, violations, inconclusive, probes_tested: jobs.len(), pairs: samples.pairs })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripleUnionReport {
    pub r: f64,
    /// Three-hop points with hops in `S^H(·, m(·, r))` that left `B̃(ξ, r)`.
    pub inner_defects: Vec<Vec<f64>>,
    /// Points of `B̃(ξ, r)` whose decomposition needed a hop above
    /// `M(·, r)`.
    pub outer_defects: Vec<Vec<f64>>,
    /// Points whose min-max decomposition exceeded `r` at the search
    /// resolution.
    pub outer_inconclusive: usize,
    pub samples: usize,
}

/// Both inclusions between the tilde ball `B̃(ξ, r)` and three-hop unions
/// of H-sections at heights `m(·, r)` and `M(·, r)`.
pub fn triple_union_inclusion(f: &HConvexFn, xi: &HPoint, r: f64, samples: usize, seed: u64) -> Result<TripleUnionReport> {
    if !(r > 0.0) {
        return Err(HeisError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    // (inner defect, outer defect, outer inconclusive) per sample
    type Row = (Option<Vec<f64>>, Option<Vec<f64>>, bool);
    let rows: Vec<Row> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let mut rng = rng_for(seed, i);
            // (a) hops inside the sections at height m(·, r)
            let mut cur = xi.clone();
            for _ in 0..3 {
                let m = m_big_m_default(f, &cur, r)?.m;
                let v = random_hop(f, &cur, m, &mut rng)?;
                cur = cur.exp_h(&v);
            }
            let inner = (!tilde_ball_contains(xi, r, &cur)?).then(|| cur.to_flat());
            // (b) a point of the tilde ball, decomposed into short hops
            let mut z = xi.clone();
            for _ in 0..3 {
                let u = unit_vector(&mut rng, f.n);
                let len = r * rng.gen_range(0.0f64..1.0).powf(1.0 / (2 * f.n) as f64);
                z = z.exp_h(&u.scale(len));
            }
            let d = decompose3(&xi.inverse().compose(&z), Strategy::Minmax);
            if d.max_norm > r {
                return Ok((inner, None, true));
            }
            let mut base = xi.clone();
            let mut outer = None;
            for v in [&d.v1, &d.v2, &d.v3] {
                let big_m = m_big_m_default(f, &base, r)?.big_m;
                let next = base.exp_h(v);
                if hop_excess(f, &base, &next) >= big_m * (1.0 + 1e-9) {
                    outer = Some(z.to_flat());
                }
                base = next;
            }
            Ok((inner, outer, false))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = TripleUnionReport { r, inner_defects: vec![], outer_defects: vec![], outer_inconclusive: 0, samples };
    for (a, b, inc) in rows {
        rep.inner_defects.extend(a);
        rep.outer_defects.extend(b);
        rep.outer_inconclusive += inc as usize;
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub rho: f64,
    pub t_sup: f64,
}

/// `t_sup(ρ)`: the IN/OUT switch of `hn_contains` along `ξ₀ ∘ (ρ, 0, ±t)`
/// (`negative` selects `t ≤ 0`, reported as a magnitude). H¹ only.
pub fn hn_boundary_profile(
    f: &HConvexFn,
    xi0: &HPoint,
    s: f64,
    rho_grid: &[f64],
    negative: bool,
    budget: &SearchBudget,
) -> Result<Vec<ProfileRow>> {
    if f.n != 1 {
        return Err(HeisError::InvalidParameter("boundary profiles are defined on H^1".into()));
    }
    let sign = if negative { -1.0 } else { 1.0 };
    rho_grid
        .par_iter()
        .map(|&rho| {
            let inside = |t: f64| -> Result<bool> {
                let q = xi0.compose(&HPoint::h1(rho, 0.0, sign * t));
                Ok(hn_contains(f, xi0, s, &q, budget)?.is_in())
            };
            if !inside(0.0)? {
                return Ok(ProfileRow { rho, t_sup: 0.0 });
            }
            let mut lo = 0.0;
            let mut hi = s.max(1e-300);
            while inside(hi)? {
                lo = hi;
                hi *= 2.0;
                if hi > 1e12 * s {
                    return Err(HeisError::BracketCap(format!("profile at rho = {rho} exceeds t = {hi:e}")));
                }
            }
            while hi - lo > 1e-6 * s {
                let mid = 0.5 * (lo + hi);
                if inside(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(ProfileRow { rho, t_sup: 0.5 * (lo + hi) })
        })
        .collect()
}

/// CSV with columns `rho, t_sup`.
pub fn profile_csv(rows: &[ProfileRow]) -> String {
    crate::report::csv_table(&["rho".into(), "t_sup".into()], rows.iter().map(|r| vec![r.rho, r.t_sup]))
}
