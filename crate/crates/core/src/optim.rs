//! Small derivative-free 1-D tools: golden-section minimization, root
//! bisection and monotone-predicate bisection.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes a unimodal `f` on `[a, b]`; returns `(argmin, min)`.
///
/// Stops after `max_iter` iterations or when the bracket shrinks below
/// `tol`. The endpoints are never evaluated.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Maximizes a unimodal `f` on `[a, b]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64) {
    let (x, v) = golden_min(|s| -f(s), a, b, tol, max_iter);
    (x, -v)
}

/// Root of `f` in `[lo, hi]` where `f(lo)` and `f(hi)` have opposite signs
/// (or one is zero). Returns `None` without a sign change.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64, max_iter: usize) -> Option<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= rel_tol * mid.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Shrinks `[lo, hi]` around the switch of a predicate that is false at
/// `lo` and true at `hi`. Returns the final `(lo, hi)`.
pub fn bisect_predicate<F: FnMut(f64) -> bool>(mut pred: F, lo: f64, hi: f64, abs_tol: f64, max_iter: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..max_iter {
        if hi - lo <= abs_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Compass (coordinate pattern) search minimizing `f` from `x0`.
///
/// Polls `±step·e_k`, moves to the best improving poll point and halves the
/// step when no poll improves. Stops when the step drops below `min_step`,
/// after `max_evals` evaluations, or when the value drops below `stop_below`.
pub fn compass_min<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step0: f64,
    min_step: f64,
    max_evals: usize,
    stop_below: f64,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut evals = 1;
    let mut step = step0;
    let mut trial = x.clone();
    while step > min_step && evals < max_evals && fx >= stop_below {
        let mut best: Option<(usize, f64, f64)> = None;
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                trial.copy_from_slice(&x);
                trial[k] += sign * step;
                let v = f(&trial);
                evals += 1;
                if v < fx && best.is_none_or(|b| v < b.2) {
                    best = Some((k, sign, v));
                }
            }
        }
        match best {
            Some((k, sign, v)) => {
                x[k] += sign * step;
                fx = v;
            }
            None => step *= 0.5,
        }
    }
    (x, fx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let (x, v) = golden_min(|s| (s - 1.3).powi(2) + 2.0, -4.0, 5.0, 1e-12, 200);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 2.0).abs() < 1e-12);
        let (x, _) = golden_max(|s| -(s + 0.25).abs(), -1.0, 1.0, 1e-12, 200);
        assert!((x + 0.25).abs() < 1e-9);
    }

    #[test]
    fn bisection_root_and_predicate() {
        let r = bisect_root(|s| s * s - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(bisect_root(|s| s * s + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
        let (lo, hi) = bisect_predicate(|s| s >= 0.7, 0.0, 1.0, 1e-10, 200);
        assert!(lo < 0.7 && hi >= 0.7 && hi - lo <= 1e-10);
    }

    #[test]
    fn compass_finds_quadratic_bowl() {
        let (x, v) = compass_min(|z| (z[0] - 1.0).powi(2) + 3.0 * (z[1] + 0.5).powi(2), &[0.0, 0.0], 1.0, 1e-9, 10_000, f64::NEG_INFINITY);
        assert!((x[0] - 1.0).abs() < 1e-8 && (x[1] + 0.5).abs() < 1e-8);
        assert!(v < 1e-15);
    }
}
