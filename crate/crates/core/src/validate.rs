//! Closed-form oracle for the squared-norm example on H¹, grid agreement
//! campaigns, and the chain of implications run end to end.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::decompose::tilde_norm_h1;
use crate::engulfing::{check_diamond, check_ehk, estimate_kpp, EngulfSamples, ENGULF_BOX};
use crate::error::{HeisError, Result};
use crate::funcs::{check_h_convexity, HConvexFn};
use crate::group::{HPoint, HorizontalVector};
use crate::hnsections::{check_e_hnk, hn_contains, HnSamples};
use crate::quasimetric::{d_phi, quasi_triangle_constant, DEFAULT_REL_TOL, TRIANGLE_BOX};
use crate::report::{Quantity, Report, Stage, Status};
use crate::sampling::{gauge_ball_point, rng_for};
use crate::sections::{round_constants, slope_constant};
use crate::threehop::SearchBudget;

/// Largest `|t|` of the closed three-hop section of `x² + y²` at `e` and
/// height `r`, at horizontal distance `ρ`.
pub fn closed_form_t_max(r: f64, rho: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(HeisError::InvalidParameter(format!("height must be positive, got {r}")));
    }
    let sr = r.sqrt();
    if !(0.0..=3.0 * sr * (1.0 + 1e-12)).contains(&rho) {
        return Err(HeisError::InvalidParameter(format!("rho = {rho} outside [0, {}]", 3.0 * sr)));
    }
    Ok((3.0 * r + 2.0 * rho * sr - rho * rho).max(0.0).sqrt() * (sr + rho))
}

/// Whether `(ρ, 0, t)` lies in the open section (strict inequalities).
pub fn closed_form_inside(r: f64, rho: f64, t: f64) -> bool {
    rho < 3.0 * r.sqrt() && closed_form_t_max(r, rho).is_ok_and(|tm| t.abs() < tm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub theta: f64,
    /// `exp(v₁) ∘ exp(v₂) ∘ exp(v₃)` with equal hops turning by `θ`.
    pub point: HPoint,
    pub d: f64,
    pub t: f64,
}

/// Boundary point `η^θ` built from three hops of length `√r` at angles
/// `0, θ, 2θ`, with the closed forms `d = √r(1 + 2cos θ)` and
/// `t = 4r|sin θ|(1 + cos θ)`.
pub fn eta(r: f64, theta: f64) -> Result<ProfilePoint> {
    if !(r > 0.0) {
        return Err(HeisError::InvalidParameter(format!("r must be positive, got {r}")));
    }
    if !(-2.0 * PI / 3.0 - 1e-12..=1e-12).contains(&theta) {
        return Err(HeisError::InvalidParameter(format!("theta = {theta} outside [-2pi/3, 0]")));
    }
    let sr = r.sqrt();
    let hop = |a: f64| HorizontalVector::h1(sr * a.cos(), sr * a.sin());
    let point = HPoint::identity(1).exp_h(&hop(0.0)).exp_h(&hop(theta)).exp_h(&hop(2.0 * theta));
    let c = theta.cos();
    Ok(ProfilePoint { theta, point, d: sr * (1.0 + 2.0 * c), t: 4.0 * r * theta.sin().abs() * (1.0 + c) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// `[0, 3.2√s] × [0, 5.5s]`.
    All,
    /// `|t| ≤ 0.5·t_max(ρ)`.
    Interior,
    /// `|t| ≥ 1.5·t_max(ρ)`, `ρ ≤ 3√s`.
    Exterior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_rho: usize,
    pub n_t: usize,
    pub s: f64,
    pub kind: GridKind,
    /// Half-width of the excluded band, relative to the boundary's tilde
    /// radius.
    pub band: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_rho: 101, n_t: 101, s: 1.0, kind: GridKind::All, band: 1e-2 }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<(f64, f64)> {
        let sr = self.s.sqrt();
        let step = |k: usize, n: usize| if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
        let mut out = Vec::with_capacity(self.n_rho * self.n_t);
        for i in 0..self.n_rho {
            for j in 0..self.n_t {
                let (a, b) = (step(i, self.n_rho), step(j, self.n_t));
                out.push(match self.kind {
                    GridKind::All => (3.2 * sr * a, 5.5 * self.s * b),
                    GridKind::Interior => {
                        let rho = 3.0 * sr * a;
                        (rho, 0.5 * closed_form_t_max(self.s, rho).unwrap_or(0.0) * b)
                    }
                    GridKind::Exterior => {
                        let rho = 3.0 * sr * a;
                        let tm = closed_form_t_max(self.s, rho).unwrap_or(0.0);
                        (rho, 1.5 * tm + 5.5 * self.s * b)
                    }
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub rho: f64,
    pub t: f64,
    pub closed_form: bool,
    pub search: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub grid: GridSpec,
    pub total: usize,
    pub compared: usize,
    pub band_excluded: usize,
    pub agreement: f64,
    pub closed_in: usize,
    pub search_in: usize,
    pub disagreements: Vec<Disagreement>,
}

/// Classifies every grid point `(ρ, 0, t)` by the closed form and by
/// `hn_contains` for `x² + y²` at `e`.
pub fn example_agreement(grid: &GridSpec, budget: &SearchBudget) -> Result<AgreementReport> {
    if !(grid.s > 0.0) {
        return Err(HeisError::InvalidParameter("height must be positive".into()));
    }
    let f = HConvexFn::sqnorm(1);
    let e = HPoint::identity(1);
    let pts = grid.points();
    let rows: Vec<Option<(bool, bool, f64, f64)>> = pts
        .par_iter()
        .map(|&(rho, t)| {
            let rel = tilde_norm_h1(rho, t) / grid.s.sqrt();
            if (rel - 1.0).abs() <= grid.band {
                return Ok(None);
            }
            let exact = closed_form_inside(grid.s, rho, t);
            let found = hn_contains(&f, &e, grid.s, &HPoint::h1(rho, 0.0, t), budget)?.is_in();
            Ok(Some((exact, found, rho, t)))
        })
        .collect::<Result<Vec<_>>>()?;
    let compared: Vec<_> = rows.iter().flatten().collect();
    let disagreements: Vec<Disagreement> = compared
        .iter()
        .filter(|r| r.0 != r.1)
        .map(|&&(closed_form, search, rho, t)| Disagreement { rho, t, closed_form, search })
        .collect();
    let n = compared.len();
    Ok(AgreementReport {
        grid: grid.clone(),
        total: pts.len(),
        compared: n,
        band_excluded: pts.len() - n,
        agreement: if n == 0 { 1.0 } else { (n - disagreements.len()) as f64 / n as f64 },
        closed_in: compared.iter().filter(|r| r.0).count(),
        search_in: compared.iter().filter(|r| r.1).count(),
        disagreements,
    })
}

/// Gnuplot commands drawing the `(ρ, t_sup)` profile from `csv_path`,
/// mirrored to `t < 0` and `ρ < 0`, over the closed form at height `s`.
pub fn profile_plot_script(csv_path: &str, s: f64) -> String {
    let sr = s.sqrt();
    format!(
        "set datafile separator ','\n\
         set key top right\n\
         set xlabel 'x'\n\
         set ylabel 't'\n\
         set size ratio -1\n\
         f(z) = sqrt(max(0, 3*{s} + 2*abs(z)*{sr} - z*z)) * ({sr} + abs(z))\n\
         max(a, b) = a > b ? a : b\n\
         set samples 400\n\
         plot [-{x}:{x}] \\\n\
         \x20 '{csv_path}' using 1:2 with points pt 7 ps 0.5 title 'search', \\\n\
         \x20 '{csv_path}' using (-$1):2 with points pt 7 ps 0.5 notitle, \\\n\
         \x20 '{csv_path}' using 1:(-$2) with points pt 7 ps 0.5 notitle, \\\n\
         \x20 '{csv_path}' using (-$1):(-$2) with points pt 7 ps 0.5 notitle, \\\n\
         \x20 (abs(x) <= 3*{sr} ? f(x) : 1/0) with lines title 'closed form', \\\n\
         \x20 (abs(x) <= 3*{sr} ? -f(x) : 1/0) with lines notitle\n",
        x = 3.3 * sr
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub seed: u64,
    pub budget: SearchBudget,
    pub convexity_points: usize,
    pub convexity_dirs: usize,
    pub round_centers: usize,
    pub round_heights: Vec<f64>,
    /// A section counts as round when `R_in/R_out` stays above this.
    pub round_floor: f64,
    pub slope_centers: usize,
    pub slope_r_grid: Vec<f64>,
    /// Slope is controlled when `K₁` stays below this.
    pub slope_ceiling: f64,
    pub kpp_pairs: usize,
    pub engulf: EngulfSamples,
    pub hn: HnSamples,
    pub hn_k: f64,
    pub distance_pairs: usize,
    pub triangle_triples: usize,
    pub timing: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            seed: 0,
            budget: SearchBudget::default(),
            convexity_points: 200,
            convexity_dirs: 8,
            round_centers: 4,
            round_heights: vec![1e-2, 1.0, 1e2, 1e4],
            round_floor: 0.1,
            slope_centers: 4,
            slope_r_grid: vec![1.0, 2.0, 4.0, 8.0, 10.0],
            slope_ceiling: 100.0,
            kpp_pairs: 2000,
            engulf: EngulfSamples::default(),
            hn: HnSamples { pairs: 8, probes: 6, ..HnSamples::default() },
            hn_k: 16.0,
            distance_pairs: 6,
            triangle_triples: 24,
            timing: false,
        }
    }
}

impl ChainConfig {
    /// Same config with every sampler keyed by `seed` and searches at
    /// `budget`.
    pub fn with(mut self, seed: u64, budget: SearchBudget) -> Self {
        self.seed = seed;
        self.budget = budget.clone();
        self.engulf.seed = seed;
        self.hn.seed = seed;
        self.hn.budget = budget;
        self
    }
}

fn stage_error(name: &str, e: &HeisError) -> Stage {
    Stage::new(name, Status::Error).note(format!("{name}: {e}"))
}

fn pass(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Runs convexity, round sections, controlled slope, H-engulfing,
/// Hⁿ-engulfing, distance spot checks and the quasi-triangle constant, in
/// that order. The Hⁿ stages are skipped when sections are not round, since
/// nothing downstream is implied then; everything is skipped after a failed
/// convexity check.
pub fn chain_suite(f: &HConvexFn, cfg: &ChainConfig) -> Report {
    let mut report = Report::new(json!({
        "function": f.label(),
        "n": f.n,
        "seed": cfg.seed,
        "budget": cfg.budget,
    }));
    let mut run = |name: &str, body: &mut dyn FnMut() -> Stage| {
        let t0 = Instant::now();
        let mut st = body();
        st.name = name.into();
        if cfg.timing {
            st.seconds = Some(t0.elapsed().as_secs_f64());
        }
        report.stages.push(st);
    };
    let skipped = |name: &str, why: &str| Stage::new(name, Status::Skipped).note(why.to_string());

    let conv = check_h_convexity(f, cfg.convexity_points, cfg.convexity_dirs, cfg.seed);
    let convex = conv.violations.is_empty();
    run("convexity", &mut || {
        let mut st = Stage::new("", pass(convex)).with("max_defect", Quantity::est(conv.max_defect, conv.samples));
        st.violations = conv.violations.iter().take(32).map(|v| json!(v)).collect();
        st
    });
    let names = ["round", "slope", "engulfing", "hn_engulfing", "distance", "quasi_triangle"];
    if !convex {
        for n in names {
            run(n, &mut || skipped(n, "input is not H-convex"));
        }
        return report;
    }

    let mut round_ok = false;
    run("round", &mut || {
        let mut centers = vec![HPoint::identity(f.n)];
        centers.extend((1..cfg.round_centers).map(|i| gauge_ball_point(&mut rng_for(cfg.seed, i as u64), f.n, 2.0)));
        let mut worst = f64::INFINITY;
        let mut count = 0;
        for c in &centers {
            for &s in &cfg.round_heights {
                match round_constants(f, c, s) {
                    Ok(rc) => {
                        worst = worst.min(rc.ratio);
                        count += 1;
                    }
                    Err(e) => return stage_error("round", &e),
                }
            }
        }
        round_ok = worst >= cfg.round_floor;
        Stage::new("", pass(round_ok)).with("K0_est", Quantity::est(worst, count))
    });

    run("slope", &mut || match slope_constant(f, cfg.slope_centers, &cfg.slope_r_grid, cfg.seed) {
        Ok(rep) => {
            let mut st = Stage::new("", pass(rep.k1_est <= cfg.slope_ceiling)).with("K1_est", Quantity::est(rep.k1_est, rep.samples));
            st.violations = vec![json!(rep.worst)];
            st
        }
        Err(e) => stage_error("slope", &e),
    });

    run("engulfing", &mut || {
        let kpp = match estimate_kpp(f, cfg.kpp_pairs, cfg.seed, ENGULF_BOX) {
            Ok(k) => k,
            Err(e) => return stage_error("engulfing", &e),
        };
        let k = kpp.k_derived();
        let ehk = match check_ehk(f, k, &cfg.engulf) {
            Ok(r) => r,
            Err(e) => return stage_error("engulfing", &e),
        };
        let diamond = match check_diamond(f, k, &cfg.engulf) {
            Ok(v) => v,
            Err(e) => return stage_error("engulfing", &e),
        };
        let mut st = Stage::new("", pass(ehk.passed() && diamond.is_empty()))
            .with("Kpp_est", Quantity::est(kpp.kpp_est, kpp.pairs_used))
            .with("K", Quantity::est(k, kpp.pairs_used))
            .with("diamond_violations", Quantity::exact(diamond.len() as f64));
        st.violations = ehk.violations.iter().take(32).map(|v| json!(v)).collect();
        st
    });

    let hn_names = &names[3..];
    if !round_ok {
        for n in hn_names {
            run(n, &mut || skipped(n, "sections are not round; no Hn conclusion is implied"));
        }
        return report;
    }

    run("hn_engulfing", &mut || match check_e_hnk(f, cfg.hn_k, &cfg.hn) {
        Ok(rep) => {
            let mut st = Stage::new("", pass(rep.passed()))
                .with("K", Quantity::exact(cfg.hn_k))
                .with("probes", Quantity::exact(rep.probes_tested as f64))
                .with("inconclusive", Quantity::exact(rep.inconclusive.len() as f64));
            st.violations = rep.violations.iter().map(|v| json!(v)).collect();
            st
        }
        Err(e) => stage_error("hn_engulfing", &e),
    });

    run("distance", &mut || {
        let mut bad = Vec::new();
        let mut largest = 0.0f64;
        for i in 0..cfg.distance_pairs as u64 {
            let mut rng = rng_for(cfg.seed ^ 0xd1_57a9, i);
            let a = gauge_ball_point(&mut rng, f.n, 2.0);
            let b = gauge_ball_point(&mut rng, f.n, 2.0);
            let (ab, ba, aa) = match (
                d_phi(f, &a, &b, DEFAULT_REL_TOL, &cfg.budget),
                d_phi(f, &b, &a, DEFAULT_REL_TOL, &cfg.budget),
                d_phi(f, &a, &a, DEFAULT_REL_TOL, &cfg.budget),
            ) {
                (Ok(x), Ok(y), Ok(z)) => (x, y, z),
                (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => return stage_error("distance", &e),
            };
            largest = largest.max(ab.value);
            if ab.value != ba.value || !(ab.value > 0.0) || aa.value != 0.0 || !(ab.s_lo <= ab.value) {
                bad.push(json!({ "a": a.to_flat(), "b": b.to_flat(), "d_ab": ab.value, "d_ba": ba.value, "d_aa": aa.value }));
            }
        }
        let mut st = Stage::new("", pass(bad.is_empty())).with("max_distance", Quantity::est(largest, cfg.distance_pairs));
        st.violations = bad;
        st
    });

    run("quasi_triangle", &mut || {
        match quasi_triangle_constant(f, cfg.triangle_triples, cfg.seed, TRIANGLE_BOX, DEFAULT_REL_TOL, &cfg.budget) {
            Ok(q) => Stage::new("", pass(q.h_est.is_finite() && q.h_est > 0.0)).with("H_est", Quantity::est(q.h_est, q.triples)),
            Err(e) => stage_error("quasi_triangle", &e),
        }
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_checkpoints() {
        let s3 = 3f64.sqrt();
        assert!((closed_form_t_max(1.0, 0.0).unwrap() - s3).abs() < 1e-15);
        assert_eq!(closed_form_t_max(1.0, 3.0).unwrap(), 0.0);
        assert!((closed_form_t_max(1.0, 2.0).unwrap() - 3.0 * s3).abs() < 1e-14);
        assert!(closed_form_t_max(1.0, 3.1).is_err());
        assert!(closed_form_t_max(1.0, -0.1).is_err());
    }

    #[test]
    fn eta_checkpoints() {
        let p = eta(1.0, 0.0).unwrap();
        assert_eq!((p.point.x[0], p.point.y[0], p.point.t), (3.0, 0.0, 0.0));
        assert_eq!((p.d, p.t), (3.0, 0.0));
        let p = eta(1.0, -2.0 * PI / 3.0).unwrap();
        assert!(p.point.proj().norm() < 1e-14 && (p.point.t - 3f64.sqrt()).abs() < 1e-14);
        let p = eta(1.0, -PI / 3.0).unwrap();
        assert!((p.t - 3.0 * 3f64.sqrt()).abs() < 1e-14 && (p.d - 2.0).abs() < 1e-14);
        assert!(eta(1.0, 0.1).is_err());
    }

    #[test]
    fn small_agreement_grids() {
        let b = SearchBudget::quick();
        for kind in [GridKind::Interior, GridKind::Exterior] {
            let g = GridSpec { n_rho: 7, n_t: 7, kind, ..Default::default() };
            let rep = example_agreement(&g, &b).unwrap();
            assert_eq!(rep.agreement, 1.0, "{kind:?}: {:?}", rep.disagreements);
        }
    }

    #[test]
    fn concave_input_stops_the_chain() {
        let f = HConvexFn::from_expr("-x1^2", 1).unwrap();
        let rep = chain_suite(&f, &ChainConfig::default());
        assert_eq!(rep.stages[0].status, Status::Fail);
        assert!(rep.stages[1..].iter().all(|s| s.status == Status::Skipped));
    }
}
