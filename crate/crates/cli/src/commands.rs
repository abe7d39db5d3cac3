use std::f64::consts::PI;

use heis_core::decompose::{decompose3_with, tilde_norm, Strategy};
use heis_core::engulfing::{check_diamond, check_ehk, estimate_kpp, violations_csv, ENGULF_BOX};
use heis_core::funcs::check_h_convexity;
use heis_core::hnsections::{exact_hn_membership, hn_boundary_profile, hn_contains, profile_csv};
use heis_core::quasimetric::{distance_matrix, matrix_csv, quasi_triangle_constant, TRIANGLE_BOX};
use heis_core::report::{csv_table, Quantity, Report, Stage, Status};
use heis_core::sections::{
    default_sweep_dirs, doubling_report, h_section_boundary, m_big_m_default, verify_m_monotone, DoublingSamples,
    HSectionSpec,
};
use heis_core::threehop::SearchBudget;
use heis_core::validate::{chain_suite, closed_form_t_max, eta, example_agreement, profile_plot_script};
use heis_core::{HConvexFn, HPoint, HeisError, Result};
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Everything a subcommand needs after flags and config are merged.
pub struct Ctx {
    pub cfg: RunConfig,
    pub seed: u64,
    pub budget: SearchBudget,
    pub timing: bool,
    /// Path the CSV will be written to, for scripts that reference it.
    pub csv_path: Option<String>,
}

pub struct Outcome {
    pub report: Report,
    pub csv: Option<String>,
    /// Extra files as `(path, contents)`.
    pub extra: Vec<(String, String)>,
}

impl Ctx {
    fn function(&self) -> Result<HConvexFn> {
        self.cfg.function.build()
    }

    fn report(&self, f: &HConvexFn) -> Report {
        let mut cfg = serde_json::to_value(&self.cfg).expect("config serializes");
        cfg["seed"] = json!(self.seed);
        cfg["budgets"] = json!(self.budget);
        cfg["function"]["label"] = json!(f.label());
        cfg["function"]["n"] = json!(f.n);
        Report::new(cfg)
    }
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn to_values<T: serde::Serialize>(items: &[T]) -> Vec<Value> {
    items.iter().map(|v| serde_json::to_value(v).expect("serializable")).collect()
}

fn coord_header(prefix: &str, n: usize, with_t: bool) -> Vec<String> {
    let mut h: Vec<String> = (1..=n)
        .map(|k| format!("{prefix}x{k}"))
        .chain((1..=n).map(|k| format!("{prefix}y{k}")))
        .collect();
    if with_t {
        h.push(format!("{prefix}t"));
    }
    h
}

pub fn convexity(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let points = ctx.cfg.samples.points.unwrap_or(200);
    let dirs = ctx.cfg.samples.dirs.unwrap_or(8);
    let rep = check_h_convexity(&f, points, dirs, ctx.seed);
    let mut st = Stage::new("convexity", status(rep.violations.is_empty()))
        .with("max_defect", Quantity::est(rep.max_defect, rep.samples));
    st.violations = to_values(&rep.violations);
    let mut header = coord_header("xi_", f.n, true);
    header.extend(coord_header("v_", f.n, false));
    header.push("lambda".into());
    header.push("defect".into());
    let csv = csv_table(
        &header,
        rep.violations.iter().map(|v| {
            let mut row = v.xi.clone();
            row.extend(&v.v);
            row.push(v.lambda);
            row.push(v.defect);
            row
        }),
    );
    let mut report = ctx.report(&f);
    report.stages.push(st);
    Ok(Outcome { report, csv: Some(csv), extra: Vec::new() })
}

pub fn section_h(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let center = ctx.cfg.center(&f)?;
    let s = ctx.cfg.height()?;
    let n_dirs = ctx.cfg.n_dirs.unwrap_or_else(|| default_sweep_dirs(f.n));
    let spec = HSectionSpec::new(&f, &center, s)?;
    let b = h_section_boundary(&f, &spec, n_dirs)?;
    let radii: Vec<f64> = b.radii.iter().map(|r| r.value()).collect();
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = radii.iter().copied().fold(0.0, f64::max);
    let mut st = Stage::new("section_h", Status::Pass)
        .with("r_in", Quantity::est(r_min, radii.len()))
        .with("r_out", Quantity::est(r_max, radii.len()));
    if r_max.is_finite() {
        st = st.with("ratio", Quantity::est(r_min / r_max, radii.len()));
    } else {
        st = st.note("section is unbounded along some directions (radius reported as inf)");
    }
    let mut report = ctx.report(&f);
    report.stages.push(st);
    Ok(Outcome { report, csv: Some(b.to_csv()), extra: Vec::new() })
}

pub fn section_hn(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let center = ctx.cfg.center(&f)?;
    let s = ctx.cfg.height()?;
    let targets = ctx.cfg.targets(&f)?;
    let mut report = ctx.report(&f);
    if targets.is_empty() {
        // No targets: trace the boundary profile t_sup(ρ) instead.
        let sr = s.sqrt();
        let grid = ctx.cfg.rho_grid.clone().unwrap_or_else(|| (0..=12).map(|k| 0.25 * k as f64 * sr).collect());
        let rows = hn_boundary_profile(&f, &center, s, &grid, false, &ctx.budget)?;
        let half = 0.5e-6 * s;
        let mut st = Stage::new("section_hn_profile", Status::Pass);
        for r in &rows {
            st = st.with(&format!("t_sup(rho={})", r.rho), Quantity::bracket(r.t_sup, r.t_sup - half, r.t_sup + half));
        }
        report.stages.push(st);
        return Ok(Outcome { report, csv: Some(profile_csv(&rows)), extra: Vec::new() });
    }
    let mut rows = Vec::new();
    let mut disagreements = Vec::new();
    let mut inside = 0;
    for q in &targets {
        let m = hn_contains(&f, &center, s, q, &ctx.budget)?;
        let found = m.is_in();
        inside += found as usize;
        if let Some(exact) = exact_hn_membership(&f, &center, s, q) {
            if exact != found {
                disagreements.push(json!({ "target": q.to_flat(), "search": found, "exact": exact }));
            }
        }
        let mut row = q.to_flat();
        row.push(found as u8 as f64);
        row.push(m.witness().map_or(f64::NAN, |w| w.max_excess()));
        rows.push(row);
    }
    let mut st = Stage::new("section_hn", status(disagreements.is_empty()))
        .with("inside", Quantity::exact(inside as f64))
        .with("targets", Quantity::exact(targets.len() as f64));
    st.violations = disagreements;
    report.stages.push(st);
    let mut header = coord_header("", f.n, true);
    header.push("inside".into());
    header.push("max_hop_excess".into());
    Ok(Outcome { report, csv: Some(csv_table(&header, rows)), extra: Vec::new() })
}

pub fn m_big_m(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let xi = ctx.cfg.center(&f)?;
    let grid = ctx.cfg.r_grid.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 8.0]);
    let mut rows = Vec::new();
    let mut st_m = Stage::new("m_M", Status::Pass);
    for &r in &grid {
        let p = m_big_m_default(&f, &xi, r)?;
        st_m = st_m.with(&format!("m(r={r})"), Quantity::est(p.m, 1)).with(&format!("M(r={r})"), Quantity::est(p.big_m, 1));
        rows.push(vec![r, p.m, p.big_m, p.big_m / p.m]);
    }
    let mono = verify_m_monotone(&f, &xi, &grid)?;
    st_m.status = status(mono.monotone);
    st_m.violations = mono.defects.iter().map(|(a, b)| json!({ "r": a, "r_next": b })).collect();
    let mut report = ctx.report(&f);
    report.stages.push(st_m);
    if let Some(centers) = ctx.cfg.samples.points {
        let d = doubling_report(&f, &DoublingSamples { centers, seed: ctx.seed, ..DoublingSamples::default() })?;
        report.stages.push(
            Stage::new("doubling", status(d.b1_est.is_finite() && d.b2_est.is_finite() && d.b4_est.is_finite()))
                .with("B1_est", Quantity::est(d.b1_est, d.samples))
                .with("B2_est", Quantity::est(d.b2_est, d.samples))
                .with("B4_est", Quantity::est(d.b4_est, d.samples))
                .with("gamma_est", Quantity::est(d.gamma_est as f64, d.samples)),
        );
    }
    let header: Vec<String> = ["r", "m", "M", "ratio"].iter().map(|s| s.to_string()).collect();
    Ok(Outcome { report, csv: Some(csv_table(&header, rows)), extra: Vec::new() })
}

pub fn engulfing(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let radius = ctx.cfg.samples.radius.unwrap_or(ENGULF_BOX);
    let kpp = estimate_kpp(&f, 2000, ctx.seed, radius)?;
    let k = ctx.cfg.k.unwrap_or_else(|| kpp.k_derived());
    let samples = ctx.cfg.engulf_samples(ctx.seed);
    let ehk = check_ehk(&f, k, &samples)?;
    let diamond = check_diamond(&f, k, &samples)?;
    let k_q = if ctx.cfg.k.is_some() { Quantity::exact(k) } else { Quantity::est(k, kpp.pairs_used) };
    let mut st = Stage::new("engulfing", status(ehk.passed()))
        .with("K", k_q.clone())
        .with("Kpp_est", Quantity::est(kpp.kpp_est, kpp.pairs_used))
        .with("K_derived", Quantity::est(kpp.k_derived(), kpp.pairs_used));
    st.violations = to_values(&ehk.violations);
    let mut sd = Stage::new("diamond", status(diamond.is_empty())).with("K", k_q);
    sd.violations = to_values(&diamond);
    let mut all = ehk.violations.clone();
    all.extend(diamond);
    let mut report = ctx.report(&f);
    report.stages.push(st);
    report.stages.push(sd);
    Ok(Outcome { report, csv: Some(violations_csv(f.n, &all)), extra: Vec::new() })
}

pub fn quasimetric(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let mut points = ctx.cfg.targets(&f)?;
    if points.len() == 1 || ctx.cfg.center.is_some() {
        points.insert(0, ctx.cfg.center(&f)?);
    }
    let entries = distance_matrix(&f, &points, ctx.cfg.rel_tol(), &ctx.budget)?;
    let mut st = Stage::new("distance", status(entries.iter().all(|e| e.d.value.is_finite())));
    for e in &entries {
        st = st.with(&format!("d[{},{}]", e.row, e.col), Quantity::bracket(e.d.value, e.d.s_lo, e.d.s_hi));
    }
    let mut report = ctx.report(&f);
    report.stages.push(st);
    if let Some(n) = ctx.cfg.samples.triples {
        let radius = ctx.cfg.samples.radius.unwrap_or(TRIANGLE_BOX);
        let q = quasi_triangle_constant(&f, n, ctx.seed, radius, ctx.cfg.rel_tol(), &ctx.budget)?;
        report.stages.push(
            Stage::new("quasi_triangle", status(q.h_est.is_finite())).with("H_est", Quantity::est(q.h_est, q.triples)),
        );
    }
    Ok(Outcome { report, csv: Some(matrix_csv(&entries)), extra: Vec::new() })
}

pub fn decompose(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let target = match &ctx.cfg.target {
        Some(t) => ctx.cfg.point(&f, Some(t), "target")?,
        None => return Err(HeisError::InvalidParameter("decompose needs a \"target\"".into())),
    };
    let strategy = ctx.cfg.strategy.unwrap_or(Strategy::Coordinate);
    let d = decompose3_with(&target, strategy, &ctx.budget);
    let err = d.recomposition_error(&target);
    let tol = 1e-9 * (1.0 + target.magnitude());
    let gauge = target.gauge();
    let mut st = Stage::new("decompose", status(err <= tol))
        .with("max_norm", Quantity::est(d.max_norm, 1))
        .with("gauge", Quantity::exact(gauge))
        .with("recomposition_error", Quantity::exact(err));
    if gauge > 0.0 {
        st = st.with("max_norm_over_gauge", Quantity::est(d.max_norm / gauge, 1));
    }
    if f.n == 1 {
        st = st.with("tilde_norm", Quantity::exact(tilde_norm(&HPoint::identity(1), &target)?));
    }
    let mut header = vec!["hop".to_string()];
    header.extend(coord_header("", f.n, false));
    header.push("norm".into());
    let rows = [&d.v1, &d.v2, &d.v3].into_iter().enumerate().map(|(i, v)| {
        let mut row = vec![(i + 1) as f64];
        row.extend(v.to_flat());
        row.push(v.norm());
        row
    });
    let mut report = ctx.report(&f);
    report.stages.push(st);
    Ok(Outcome { report, csv: Some(csv_table(&header, rows)), extra: Vec::new() })
}

const CURVE_POINTS: usize = 1000;

/// Grid agreement against the closed form, profile checkpoints and the
/// parametric boundary curve, all for `x² + y²` on H¹.
pub fn example_verify(ctx: &Ctx) -> Result<Outcome> {
    let f = HConvexFn::sqnorm(1);
    let e = HPoint::identity(1);
    let grid = &ctx.cfg.grid;
    let s = grid.s;
    let mut report = ctx.report(&f);
    report.config["function"] = json!({ "builtin": "sqnorm", "label": "sqnorm", "n": 1 });

    let ag = example_agreement(grid, &ctx.budget)?;
    let mut st = Stage::new("grid_agreement", status(ag.agreement >= 0.99))
        .with("agreement", Quantity::est(ag.agreement, ag.compared))
        .with("compared", Quantity::exact(ag.compared as f64))
        .with("band_excluded", Quantity::exact(ag.band_excluded as f64));
    st.violations = to_values(&ag.disagreements);
    report.stages.push(st);

    let sr = s.sqrt();
    let rho_grid = ctx.cfg.rho_grid.clone().unwrap_or_else(|| (0..=12).map(|k| 0.25 * k as f64 * sr).collect());
    let rows = hn_boundary_profile(&f, &e, s, &rho_grid, false, &ctx.budget)?;
    let tol = 1e-3 * s;
    let mut st = Stage::new("profile", Status::Pass);
    let mut csv_rows = Vec::new();
    for r in &rows {
        let exact = if r.rho >= 3.0 * sr { 0.0 } else { closed_form_t_max(s, r.rho)? };
        let err = (r.t_sup - exact).abs();
        if err > tol {
            st.violations.push(json!({ "rho": r.rho, "t_sup": r.t_sup, "closed_form": exact }));
        }
        st = st.with(&format!("t_sup(rho={})", r.rho), Quantity::bracket(r.t_sup, r.t_sup - 0.5e-6 * s, r.t_sup + 0.5e-6 * s));
        csv_rows.push(vec![r.rho, r.t_sup, exact]);
    }
    st.status = status(st.violations.is_empty());
    report.stages.push(st);

    let mut worst = 0.0f64;
    for i in 0..CURVE_POINTS {
        let theta = -2.0 * PI / 3.0 * i as f64 / (CURVE_POINTS - 1) as f64;
        let p = eta(s, theta)?;
        let c = p.point.to_flat();
        let rho = c[0].hypot(c[1]);
        worst = worst
            .max((rho - p.d.abs()).abs())
            .max((c[2].abs() - p.t).abs())
            .max((closed_form_t_max(s, p.d.abs())? - p.t).abs());
    }
    report.stages.push(
        Stage::new("curve", status(worst <= 1e-9 * s.max(1.0))).with("max_error", Quantity::est(worst, CURVE_POINTS)),
    );

    let header: Vec<String> = ["rho", "t_sup", "t_closed"].iter().map(|s| s.to_string()).collect();
    let mut extra = Vec::new();
    if let Some(path) = &ctx.csv_path {
        let gp = std::path::Path::new(path).with_extension("gp");
        extra.push((gp.to_string_lossy().into_owned(), profile_plot_script(path, s)));
    }
    Ok(Outcome { report, csv: Some(csv_table(&header, csv_rows)), extra })
}

pub fn chain(ctx: &Ctx) -> Result<Outcome> {
    let f = ctx.function()?;
    let mut cfg = ctx.cfg.chain.clone().unwrap_or_default().with(ctx.seed, ctx.budget.clone());
    cfg.timing = ctx.timing;
    if let Some(k) = ctx.cfg.k {
        cfg.hn_k = k;
    }
    let mut report = chain_suite(&f, &cfg);
    report.config = ctx.report(&f).config;
    report.config["chain"] = json!(cfg);
    Ok(Outcome { report, csv: None, extra: Vec::new() })
}
