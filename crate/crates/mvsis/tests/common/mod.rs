//! Brute-force oracles shared by the integration tests and the acceptance run.

#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;

/// `a + b x + c x^2 + d (y - x)^{3/2}`.
pub fn f_power(a: f64, b: f64, c: f64, d: f64, y: f64, x: f64) -> f64 {
    let z = (y - x).max(0.0);
    a + b * x + c * x * x + d * z * z.sqrt()
}

/// Maximum of `f` over `[0, y]` on a uniform grid of `points` points,
/// followed by a golden-section polish around the best grid point.
pub fn grid_max(f: impl Fn(f64) -> f64, y: f64, points: usize) -> f64 {
    let dx = y / (points - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for i in 0..points {
        let v = f(i as f64 * dx);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let centre = best_i as f64 * dx;
    let (mut lo, mut hi) = ((centre - dx).max(0.0), (centre + dx).min(y));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

/// Smallest zero of `f` on `(0, y]` located by a grid sign scan and bisection.
pub fn grid_smallest_zero(f: impl Fn(f64) -> f64, y: f64, points: usize) -> Option<f64> {
    let dx = y / (points - 1) as f64;
    let mut prev = f(0.0);
    for i in 1..points {
        let x = i as f64 * dx;
        let v = f(x);
        if v == 0.0 {
            return Some(x);
        }
        if (prev > 0.0) != (v > 0.0) {
            let (mut lo, mut hi) = (x - dx, x);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) > 0.0) == (prev > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = v;
    }
    None
}

/// Random coefficient in `[-10, 10]`.
pub fn coef(rng: &mut StdRng) -> f64 {
    rng.random_range(-10.0..=10.0)
}

/// Random right end point in `(0, 10]`.
pub fn right_end(rng: &mut StdRng) -> f64 {
    10.0 - rng.random_range(0.0..10.0)
}

/// Wasserstein distance of two equal-size empirical measures by exhaustive
/// search over all permutations.
pub fn wasserstein_permutations(a: &[f64], b: &[f64], p: f64) -> f64 {
    let n = a.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut idx, 0, &mut |perm| {
        let cost: f64 = (0..n).map(|i| (a[i] - b[perm[i]]).abs().powf(p)).sum();
        best = best.min(cost);
    });
    (best / n as f64).powf(1.0 / p)
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}
