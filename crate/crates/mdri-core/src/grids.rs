//! Grid construction and the one-dimensional refinement pass used by every
//! "sup over a continuous parameter" operation.

use crate::error::{MdriError, Result};

/// `n` equally spaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Geometric grid from `lo` down to `hi` (or up), `n` points.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > 0.0);
    let ratio = (hi / lo).powf(1.0 / (n - 1) as f64);
    let mut v = Vec::with_capacity(n);
    let mut x = lo;
    for i in 0..n {
        v.push(if i == n - 1 { hi } else { x });
        x *= ratio;
    }
    v
}

/// Validates a strictly increasing axis.
pub fn check_strictly_increasing(axis: &[f64], what: &str) -> Result<()> {
    if axis.is_empty() {
        return Err(MdriError::Usage(format!("{what}: empty grid")));
    }
    if !axis.iter().all(|x| x.is_finite()) {
        return Err(MdriError::Usage(format!("{what}: non-finite grid point")));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MdriError::Usage(format!("{what}: grid not strictly increasing")));
    }
    Ok(())
}

/// Index of the maximum value, breaking exact ties toward the smallest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

const INV_GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of `f` on `[lo, hi]`.
///
/// Used as the single local-refinement pass after a grid sweep: the bracket is
/// the two grid cells around the discrete arg-max. Returns `(x, f(x))`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let mut a = hi - INV_GOLDEN * (hi - lo);
    let mut b = lo + INV_GOLDEN * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INV_GOLDEN * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INV_GOLDEN * (hi - lo);
            fa = f(a);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fmid = f(mid);
    if fa >= fb && fa >= fmid {
        (a, fa)
    } else if fb >= fmid {
        (b, fb)
    } else {
        (mid, fmid)
    }
}

/// Grid sweep plus golden-section refinement around the arg-max.
///
/// Non-finite values of `f` are treated as absent (skipped in the sweep,
/// excluded from the bracket). Returns `(x_star, max)` or `None` if `f` was
/// non-finite on the whole grid.
pub fn grid_max_refined(f: impl Fn(f64) -> f64, grid: &[f64]) -> Option<(f64, f64)> {
    let values: Vec<f64> = grid
        .iter()
        .map(|&x| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::NAN
            }
        })
        .collect();
    let i = argmax(&values)?;
    if !values[i].is_finite() {
        return None;
    }
    // Bracket: nearest finite neighbours, clamped to the grid boundary.
    let lo = if i > 0 && values[i - 1].is_finite() { grid[i - 1] } else { grid[i] };
    let hi = if i + 1 < grid.len() && values[i + 1].is_finite() { grid[i + 1] } else { grid[i] };
    let mut best = (grid[i], values[i]);
    if hi > lo {
        let safe = |x: f64| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::NEG_INFINITY
            }
        };
        let (x, v) = golden_max(safe, lo, hi, 80);
        if v > best.1 {
            best = (x, v);
        }
    }
    Some(best)
}

/// Trapezoid rule over an increasing grid with matching values.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Discrete midpoint-convexity check along a 1-d sequence of (x, f(x)) pairs:
/// f(x_mid) must not exceed the chord through its neighbours by more than `tol`.
pub fn midpoint_convex(xs: &[f64], ys: &[f64], tol: f64) -> bool {
    for i in 1..xs.len().saturating_sub(1) {
        let t = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
        let chord = ys[i - 1] + t * (ys[i + 1] - ys[i - 1]);
        if ys[i] > chord + tol {
            return false;
        }
    }
    true
}
