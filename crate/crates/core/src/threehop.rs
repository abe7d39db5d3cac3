//! Three-hop path search.
//!
//! Given a start `ξ₀` and a target `ξ′`, look for `v₁, v₂` such that with
//! `ξ₁ = ξ₀ ∘ exp v₁` and `ξ₂ = ξ₁ ∘ exp v₂` the target lies on `H_{ξ₂}`, and
//! the largest of the three hop costs is as small as possible. The third hop
//! is forced: `v₃ = Pr₁(ξ′) − Pr₁(ξ₂)`.
//!
//! The same engine decides Hⁿ-section membership (cost = excess / s), tilde
//! balls and min-max decompositions (cost = ‖v‖ / r).
//!
//! Strategy: a direction × radius grid over `v₁` (radii are fractions of a
//! caller-supplied reach), then local refinement of the best cells. For each
//! `ξ₁` the admissible `ξ₂` form the trace `H_{ξ₁} ∩ H_{ξ′}` (a line when
//! `n = 1`, a hyperplane of `H_{ξ₁}` otherwise), searched by sampling plus
//! golden-section or compass refinement.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::funcs::HConvexFn;
use crate::group::{HPoint, HorizontalVector};
use crate::optim::{compass_min, golden_min};
use crate::sampling::{halton_point, sphere_directions};

/// Cost of a single horizontal hop.
pub trait HopCost: Sync {
    type Anchor: Clone + Send;

    /// Per-point data reused by every hop that starts or ends at `p`.
    fn anchor(&self, p: &HPoint) -> Self::Anchor;

    /// Cost of the hop `from ∘ exp(v) = to`.
    fn cost(&self, from: &Self::Anchor, v: &HorizontalVector, to: &Self::Anchor) -> f64;
}

#[derive(Clone, Debug)]
pub struct FnAnchor {
    pub value: f64,
    pub grad: HorizontalVector,
}

/// `(f(to) − f(from) − ∇_H f(from)·v) / s`.
pub struct ExcessCost<'a> {
    pub f: &'a HConvexFn,
    pub s: f64,
}

impl HopCost for ExcessCost<'_> {
    type Anchor = FnAnchor;

    fn anchor(&self, p: &HPoint) -> FnAnchor {
        FnAnchor {
            value: self.f.value(p),
            grad: self.f.gradient(p),
        }
    }

    #[inline]
    fn cost(&self, from: &FnAnchor, v: &HorizontalVector, to: &FnAnchor) -> f64 {
        let c = (to.value - from.value - from.grad.dot(v)) / self.s;
        if c.is_nan() {
            f64::INFINITY
        } else {
            c
        }
    }
}

/// `‖v‖ / r`.
pub struct NormCost {
    pub r: f64,
}

impl HopCost for NormCost {
    type Anchor = ();

    fn anchor(&self, _p: &HPoint) {}

    #[inline]
    fn cost(&self, _from: &(), v: &HorizontalVector, _to: &()) -> f64 {
        v.norm() / self.r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    /// Hop-1 directions.
    pub dirs: usize,
    /// Hop-1 radii per direction, as fractions of the reach.
    pub radii: usize,
    /// Samples along the hop-2 trace (the coarse grid phase uses an eighth).
    pub trace_samples: usize,
    /// Grid cells refined locally.
    pub refine_rounds: usize,
}

impl SearchBudget {
    pub fn quick() -> Self {
        SearchBudget { dirs: 32, radii: 8, trace_samples: 64, refine_rounds: 2 }
    }

    pub fn thorough() -> Self {
        SearchBudget::default().scaled(8)
    }

    /// Multiplies the sample counts by `k` (refinement rounds stay).
    pub fn scaled(&self, k: usize) -> Self {
        SearchBudget {
            dirs: self.dirs * k,
            radii: self.radii * k,
            trace_samples: self.trace_samples * k,
            refine_rounds: self.refine_rounds,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "quick" => Some(SearchBudget::quick()),
            "default" => Some(SearchBudget::default()),
            "thorough" => Some(SearchBudget::thorough()),
            _ => None,
        }
    }

    fn coarse_samples(&self) -> usize {
        (self.trace_samples / 8).max(8)
    }
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { dirs: 64, radii: 16, trace_samples: 128, refine_rounds: 3 }
    }
}

/// A concrete three-hop path with its hop costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopPath {
    pub v1: HorizontalVector,
    pub v2: HorizontalVector,
    pub v3: HorizontalVector,
    pub xi1: HPoint,
    pub xi2: HPoint,
    pub costs: [f64; 3],
}

impl HopPath {
    pub fn phi(&self) -> f64 {
        self.costs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The zero path, valid when the target equals the start.
    pub fn trivial(xi0: &HPoint) -> Self {
        let z = HorizontalVector::zeros(xi0.dim());
        HopPath {
            v1: z.clone(),
            v2: z.clone(),
            v3: z,
            xi1: xi0.clone(),
            xi2: xi0.clone(),
            costs: [0.0; 3],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// Best path found, if any hop-2 trace was nonempty.
    pub best: Option<HopPath>,
    /// `max` hop cost of `best` (`+∞` when none).
    pub phi: f64,
    /// Number of hop-cost evaluations.
    pub evals: u64,
}

pub struct SearchProblem<'a, C: HopCost> {
    pub cost: &'a C,
    pub xi0: &'a HPoint,
    pub target: &'a HPoint,
    /// Natural hop-1 length in a unit direction (for sections: the section
    /// radius at the current height).
    pub reach: &'a (dyn Fn(&HorizontalVector) -> f64 + Sync),
    /// Extra hop-1 candidates tried before the grid.
    pub seeds: Vec<HorizontalVector>,
}

struct Engine<'p, 'a, C: HopCost> {
    pb: &'p SearchProblem<'a, C>,
    a0: C::Anchor,
    at: C::Anchor,
    stop_below: f64,
    best: Option<HopPath>,
    phi: f64,
    evals: u64,
    scale: f64,
}

/// Minimizes the largest hop cost over three-hop paths from `ξ₀` to `ξ′`.
///
/// Returns as soon as a path with `phi < stop_below` is found; pass
/// `stop_below = 0` to spend the whole budget.
pub fn search<C: HopCost>(pb: &SearchProblem<'_, C>, budget: &SearchBudget, stop_below: f64) -> SearchOutcome {
    let scale = 1.0 + pb.xi0.magnitude().max(pb.target.magnitude());
    let mut eng = Engine {
        pb,
        a0: pb.cost.anchor(pb.xi0),
        at: pb.cost.anchor(pb.target),
        stop_below,
        best: None,
        phi: f64::INFINITY,
        evals: 0,
        scale,
    };
    if pb.xi0 == pb.target {
        eng.best = Some(HopPath::trivial(pb.xi0));
        eng.phi = 0.0;
    } else {
        eng.run(budget);
    }
    SearchOutcome { best: eng.best, phi: eng.phi, evals: eng.evals }
}

impl<C: HopCost> Engine<'_, '_, C> {
    fn done(&self) -> bool {
        self.phi < self.stop_below
    }

    fn offer(&mut self, path: HopPath) {
        let phi = path.phi();
        if phi < self.phi {
            self.phi = phi;
            self.best = Some(path);
        }
    }

    /// Best `phi` over hop-2 choices for the hop-1 vector `v1`.
    fn eval_v1(&mut self, v1: &HorizontalVector, samples: usize) -> f64 {
        if self.done() {
            return self.phi;
        }
        let xi1 = self.pb.xi0.exp_h(v1);
        let a1 = self.pb.cost.anchor(&xi1);
        let c1 = self.pb.cost.cost(&self.a0, v1, &a1);
        self.evals += 1;
        if !(c1 < self.phi) {
            return c1.max(self.phi);
        }
        let inner = if xi1.dim() == 1 {
            self.inner_line(v1, &xi1, &a1, c1, samples)
        } else {
            self.inner_hyperplane(v1, &xi1, &a1, c1, samples)
        };
        c1.max(inner)
    }

    /// Evaluates hop 2 = `v2` and the forced hop 3; offers the path.
    fn eval_v2(&mut self, v1: &HorizontalVector, xi1: &HPoint, a1: &C::Anchor, c1: f64, d: &HorizontalVector, v2: &HorizontalVector) -> f64 {
        let xi2 = xi1.exp_h(v2);
        let a2 = self.pb.cost.anchor(&xi2);
        let c2 = self.pb.cost.cost(a1, v2, &a2);
        let v3 = d.sub(v2);
        let c3 = self.pb.cost.cost(&a2, &v3, &self.at);
        self.evals += 2;
        let g = c2.max(c3);
        if c1.max(g) < self.phi {
            self.offer(HopPath {
                v1: v1.clone(),
                v2: v2.clone(),
                v3,
                xi1: xi1.clone(),
                xi2,
                costs: [c1, c2, c3],
            });
        }
        g
    }

    /// Horizontal offset `D = Pr₁(ξ′) − Pr₁(ξ₁)`, the hop-2 trace foot, and
    /// whether the trace is usable. `None` means empty.
    fn trace(&self, xi1: &HPoint) -> Option<(HorizontalVector, HorizontalVector, f64)> {
        let rel = xi1.inverse().compose(self.pb.target);
        let d = rel.proj();
        let rho2 = d.norm_sq();
        let tiny = 1e-14 * self.scale;
        if rho2.sqrt() <= tiny {
            if rel.t.abs() <= 1e-12 * self.scale * self.scale {
                return Some((d, HorizontalVector::zeros(xi1.dim()), 0.0));
            }
            return None;
        }
        let normal = d.rotate_j();
        let foot = normal.scale(-0.5 * rel.t / rho2);
        Some((d, foot, rho2.sqrt()))
    }

    fn inner_line(&mut self, v1: &HorizontalVector, xi1: &HPoint, a1: &C::Anchor, c1: f64, samples: usize) -> f64 {
        let Some((d, foot, rho)) = self.trace(xi1) else {
            return f64::INFINITY;
        };
        if rho == 0.0 {
            return self.eval_v2(v1, xi1, a1, c1, &d, &foot);
        }
        let dir = d.scale(1.0 / rho);
        let margin = 0.25 * rho + 1e-3 * self.scale;
        let (mut lo, mut hi) = (-margin, rho + margin);
        let n = samples.max(3);
        let mut best = (f64::INFINITY, 0.0);
        for _attempt in 0..6 {
            let h = (hi - lo) / (n - 1) as f64;
            let mut idx = 0;
            best = (f64::INFINITY, 0.0);
            for i in 0..n {
                let lam = lo + h * i as f64;
                let g = self.eval_v2(v1, xi1, a1, c1, &d, &foot.axpy(lam, &dir));
                if g < best.0 {
                    best = (g, lam);
                    idx = i;
                }
            }
            if self.done() {
                return best.0;
            }
            // Expand when the minimum sits on the edge of the window.
            if idx == 0 && best.0.is_finite() {
                lo -= 2.0 * (hi - lo);
            } else if idx == n - 1 && best.0.is_finite() {
                hi += 2.0 * (hi - lo);
            } else {
                let (a, b) = (best.1 - h, best.1 + h);
                let tol = 1e-12 * self.scale;
                let (lam, g) = golden_min(
                    |lam| self.eval_v2(v1, xi1, a1, c1, &d, &foot.axpy(lam, &dir)),
                    a,
                    b,
                    tol,
                    40,
                );
                if g < best.0 {
                    best = (g, lam);
                }
                break;
            }
        }
        best.0
    }

    fn inner_hyperplane(&mut self, v1: &HorizontalVector, xi1: &HPoint, a1: &C::Anchor, c1: f64, samples: usize) -> f64 {
        let Some((d, foot, rho)) = self.trace(xi1) else {
            return f64::INFINITY;
        };
        if rho == 0.0 {
            return self.eval_v2(v1, xi1, a1, c1, &d, &foot);
        }
        // Orthonormal frame of the trace: D̂ first, then the rest.
        let n = xi1.dim();
        let dhat = d.scale(1.0 / rho);
        let nhat = d.rotate_j().scale(1.0 / rho);
        let mut frame = vec![dhat];
        for k in 0..2 * n {
            let mut w = HorizontalVector::basis(n, k);
            for _ in 0..2 {
                w = w.axpy(-w.dot(&nhat), &nhat);
                for b in &frame {
                    w = w.axpy(-w.dot(b), b);
                }
            }
            if w.norm() > 1e-6 {
                frame.push(w.normalized().unwrap());
            }
            if frame.len() == 2 * n - 1 {
                break;
            }
        }
        let point = |mu: &[f64]| {
            let mut v = foot.clone();
            for (m, b) in mu.iter().zip(&frame) {
                v = v.axpy(*m, b);
            }
            v
        };
        let margin = 0.25 * rho + 1e-3 * self.scale;
        let lateral = 0.5 * (rho + foot.norm());
        let dim = frame.len();
        let mut best_mu = vec![0.0; dim];
        let mut best_g = f64::INFINITY;
        for i in 0..samples.max(4) {
            let u = halton_point(i as u64, dim);
            let mut mu = vec![0.0; dim];
            mu[0] = -margin + u[0] * (rho + 2.0 * margin);
            for k in 1..dim {
                mu[k] = if i == 0 { 0.0 } else { lateral * (2.0 * u[k] - 1.0) };
            }
            let g = self.eval_v2(v1, xi1, a1, c1, &d, &point(&mu));
            if g < best_g {
                best_g = g;
                best_mu = mu;
            }
            if self.done() {
                return best_g;
            }
        }
        let step = (rho + 2.0 * margin) / samples.max(4) as f64 * 2.0;
        let min_step = 1e-10 * self.scale;
        let stop = self.stop_below;
        let (_, g) = compass_min(
            |mu| self.eval_v2(v1, xi1, a1, c1, &d, &point(mu)),
            &best_mu,
            step,
            min_step,
            60 * dim,
            stop,
        );
        best_g.min(g)
    }

    fn run(&mut self, budget: &SearchBudget) {
        let coarse = budget.coarse_samples();
        let zero = HorizontalVector::zeros(self.pb.xi0.dim());
        self.eval_v1(&zero, budget.trace_samples);
        for s in self.pb.seeds.clone() {
            self.eval_v1(&s, budget.trace_samples);
        }
        if self.done() {
            return;
        }
        if self.pb.xi0.dim() == 1 {
            self.run_plane(budget, coarse);
        } else {
            self.run_general(budget, coarse);
        }
    }

    fn fractions(radii: usize) -> Vec<f64> {
        (0..radii).map(|k| (k as f64 + 0.5) / radii as f64).collect()
    }

    fn run_plane(&mut self, budget: &SearchBudget, coarse: usize) {
        let m = budget.dirs.max(4);
        let fr = Self::fractions(budget.radii.max(1));
        let dtheta = 2.0 * PI / m as f64;
        let dfrac = 1.0 / fr.len() as f64;
        let mut cells = Vec::with_capacity(m * fr.len());
        for j in 0..m {
            let th = dtheta * j as f64;
            let u = HorizontalVector::h1(th.cos(), th.sin());
            let reach = (self.pb.reach)(&u);
            for &f in &fr {
                let phi = self.eval_v1(&u.scale(f * reach), coarse);
                if self.done() {
                    return;
                }
                cells.push((phi, th, f));
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut picked: Vec<(f64, f64)> = Vec::new();
        for &(phi, th, f) in &cells {
            if picked.len() >= budget.refine_rounds || !phi.is_finite() {
                break;
            }
            if picked.iter().any(|&(t0, _)| angle_gap(t0, th) < 1.5 * dtheta) {
                continue;
            }
            picked.push((th, f));
        }
        for (th, f) in picked {
            self.refine_plane(th, f, dtheta, dfrac, coarse, 20);
            if self.done() {
                return;
            }
        }
        // Polish around the best path with full hop-2 sampling.
        if let Some(best) = self.best.clone() {
            let v1 = &best.v1;
            let r = v1.norm();
            if r > 0.0 {
                let th = v1.b[0].atan2(v1.a[0]);
                let reach = (self.pb.reach)(&v1.scale(1.0 / r));
                if reach.is_finite() && reach > 0.0 {
                    let f = (r / reach).min(1.0);
                    self.refine_plane(th, f, dtheta / 8.0, dfrac / 8.0, budget.trace_samples, 25);
                }
            }
        }
    }

    fn refine_plane(&mut self, th0: f64, f0: f64, dth: f64, df: f64, samples: usize, iters: usize) {
        let flo = (f0 - df).max(0.0);
        let fhi = (f0 + df).min(1.0);
        let reach = self.pb.reach;
        golden_min(
            |th| {
                if self.done() {
                    return self.phi;
                }
                let u = HorizontalVector::h1(th.cos(), th.sin());
                let r = reach(&u);
                golden_min(|f| self.eval_v1(&u.scale(f * r), samples), flo, fhi, 1e-9, iters).1
            },
            th0 - dth,
            th0 + dth,
            1e-9,
            iters,
        );
    }

    fn run_general(&mut self, budget: &SearchBudget, coarse: usize) {
        let n = self.pb.xi0.dim();
        let dirs = sphere_directions(n, budget.dirs.max(4));
        let fr = Self::fractions(budget.radii.max(1));
        let mut cells = Vec::with_capacity(dirs.len() * fr.len());
        for u in &dirs {
            let reach = (self.pb.reach)(u);
            for &f in &fr {
                let v1 = u.scale(f * reach);
                let phi = self.eval_v1(&v1, coarse);
                if self.done() {
                    return;
                }
                cells.push((phi, v1, reach));
            }
        }
        cells.sort_by(|a, b| a.0.total_cmp(&b.0));
        let stop = self.stop_below;
        for (phi, v1, reach) in cells.into_iter().take(budget.refine_rounds) {
            if !phi.is_finite() {
                break;
            }
            let step = reach / fr.len() as f64;
            compass_min(
                |x| match HorizontalVector::from_flat(x) {
                    Ok(v) => self.eval_v1(&v, coarse),
                    Err(_) => f64::INFINITY,
                },
                &v1.to_flat(),
                step,
                1e-9 * reach,
                400 * n,
                stop,
            );
            if self.done() {
                return;
            }
        }
    }
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_reach(_: &HorizontalVector) -> f64 {
        1.0
    }

    fn norm_search(target: HPoint, budget: &SearchBudget, stop: f64) -> SearchOutcome {
        let e = HPoint::identity(target.dim());
        let cost = NormCost { r: 1.0 };
        let pb = SearchProblem { cost: &cost, xi0: &e, target: &target, reach: &unit_reach, seeds: vec![] };
        search(&pb, budget, stop)
    }

    fn recomposes(xi0: &HPoint, target: &HPoint, p: &HopPath) -> bool {
        let end = xi0.exp_h(&p.v1).exp_h(&p.v2).exp_h(&p.v3);
        end.to_flat().iter().zip(target.to_flat()).all(|(a, b)| (a - b).abs() < 1e-9)
    }

    #[test]
    fn horizontal_target_is_one_hop() {
        let t = HPoint::h1(0.5, 0.0, 0.0);
        let out = norm_search(t.clone(), &SearchBudget::quick(), 0.0);
        assert!(out.phi <= 0.5 / 3.0 + 1e-6, "phi {}", out.phi);
        assert!(recomposes(&HPoint::identity(1), &t, out.best.as_ref().unwrap()));
    }

    #[test]
    fn vertical_target_needs_equilateral_hops() {
        let t = HPoint::h1(0.0, 0.0, 3f64.sqrt());
        let out = norm_search(t.clone(), &SearchBudget::default(), 0.0);
        assert!((out.phi - 1.0).abs() < 1e-4, "phi {}", out.phi);
        assert!(recomposes(&HPoint::identity(1), &t, out.best.as_ref().unwrap()));
    }

    #[test]
    fn early_exit_stops_below_threshold() {
        let t = HPoint::h1(0.3, 0.2, 0.1);
        let out = norm_search(t, &SearchBudget::default(), 1.0);
        assert!(out.phi < 1.0);
    }

    #[test]
    fn higher_dimensional_targets_are_reached() {
        let t = HPoint::new(&[0.4, -0.2], &[0.1, 0.3], 0.5).unwrap();
        let out = norm_search(t.clone(), &SearchBudget::quick(), 0.0);
        let p = out.best.unwrap();
        assert!(recomposes(&HPoint::identity(2), &t, &p));
        assert!(out.phi < 1.0);
    }

    #[test]
    fn excess_cost_matches_norm_squared_for_sqnorm() {
        let f = HConvexFn::sqnorm(1);
        let cost = ExcessCost { f: &f, s: 1.0 };
        let xi = HPoint::h1(0.7, -1.1, 2.0);
        let v = HorizontalVector::h1(0.3, 0.4);
        let (a, b) = (cost.anchor(&xi), cost.anchor(&xi.exp_h(&v)));
        assert!((cost.cost(&a, &v, &b) - 0.25).abs() < 1e-12);
    }
}
