//! Uniform empirical measures on the real line.
//!
//! An [`EmpiricalMeasure`] stores its atoms sorted, which makes the monotone
//! coupling available directly: in one dimension the optimal transport plan
//! between two uniform measures with equally many atoms pairs the order
//! statistics. Means are computed with a correctly rounded summation
//! ([`ExactSum`]) so that they do not depend on the order in which atoms are
//! visited.

use crate::error::{invalid, Error, Result};

/// Correctly rounded floating-point accumulator (Shewchuk partials).
///
/// The value returned by [`ExactSum::value`] is the exact sum of all added
/// numbers rounded once to the nearest double, so it is independent of the
/// order of additions and of how the inputs were split into partial sums.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self {
            partials: Vec::with_capacity(8),
        }
    }

    /// Adds one finite number.
    #[inline]
    pub fn add(&mut self, value: f64) {
        let mut x = value;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    /// Adds every partial of another accumulator, so that the result
    /// represents the exact sum of both input sets.
    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Correctly rounded value of the accumulated sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            let y = p[n - 1];
            n -= 1;
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Correctly rounded sum of a slice.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut acc = ExactSum::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}

/// Uniform probability measure on finitely many atoms, stored sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    samples: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Builds a measure from arbitrary atoms; the input order is discarded.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return invalid("empirical measure needs at least one atom");
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("atom {bad}")));
        }
        let mut samples = values.to_vec();
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    /// Sorted atoms.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false: a measure has at least one atom.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Convenience wrapper around [`EmpiricalMeasure::from_samples`].
pub fn from_samples(values: &[f64]) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::from_samples(values)
}

/// Clamps `x` to `[0, y]`, the map whose pushforward the extended drift uses.
#[inline]
pub fn clip(x: f64, y: f64) -> f64 {
    x.max(0.0).min(y)
}

/// Pushforward of `mu` under `x -> min(max(x, 0), y)`.
pub fn clip_pushforward(mu: &EmpiricalMeasure, y: f64) -> Result<EmpiricalMeasure> {
    if !(y >= 0.0) {
        return invalid(format!("clipping level must be nonnegative, got {y}"));
    }
    // Clamping is monotone, so the sorted order is preserved.
    Ok(EmpiricalMeasure {
        samples: mu.samples.iter().map(|&x| clip(x, y)).collect(),
    })
}

/// Absolute moment `(1/n) sum |x_i|^p`.
pub fn moment(mu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid(format!("moment order must be at least 1, got {p}"));
    }
    let mut acc = ExactSum::new();
    for &x in &mu.samples {
        acc.add(x.abs().powf(p));
    }
    Ok(acc.value() / mu.len() as f64)
}

/// Signed mean `(1/n) sum x_i`, correctly rounded before the division.
pub fn mean(mu: &EmpiricalMeasure) -> f64 {
    exact_sum(&mu.samples) / mu.len() as f64
}

fn check_order(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        invalid(format!("Wasserstein order must be finite and at least 1, got {p}"))
    }
}

/// Wasserstein-p distance between two measures with equally many atoms,
/// via the sorted coupling.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_order(p)?;
    if mu.len() != nu.len() {
        return invalid(format!(
            "atom counts differ ({} vs {}); use wasserstein_quantile",
            mu.len(),
            nu.len()
        ));
    }
    let mut acc = ExactSum::new();
    for (x, y) in mu.samples.iter().zip(&nu.samples) {
        acc.add((x - y).abs().powf(p));
    }
    Ok((acc.value() / mu.len() as f64).powf(1.0 / p))
}

/// Wasserstein-p distance for arbitrary atom counts.
///
/// Both quantile functions are piecewise constant; they are compared on the
/// merged set of jump points `i/n` and `j/m`, which is exact.
pub fn wasserstein_quantile(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_order(p)?;
    let (n, m) = (mu.len(), nu.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut acc = ExactSum::new();
    // Work with integer positions on the common denominator n*m.
    let mut pos: u128 = 0;
    let total = n as u128 * m as u128;
    while pos < total {
        let next_mu = (i as u128 + 1) * m as u128;
        let next_nu = (j as u128 + 1) * n as u128;
        let next = next_mu.min(next_nu);
        let width = (next - pos) as f64 / total as f64;
        acc.add(width * (mu.samples[i] - nu.samples[j]).abs().powf(p));
        pos = next;
        if next == next_mu {
            i += 1;
        }
        if next == next_nu {
            j += 1;
        }
    }
    Ok(acc.value().powf(1.0 / p))
}

/// Exhaustive-permutation Wasserstein-p distance for at most 8 atoms each.
pub fn wasserstein_oracle(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, p: f64) -> Result<f64> {
    check_order(p)?;
    let n = mu.len();
    if n != nu.len() {
        return invalid("oracle needs equal atom counts");
    }
    if n > 8 {
        return invalid(format!("oracle limited to 8 atoms, got {n}"));
    }
    let xs = mu.samples();
    let ys = nu.samples();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    // Heap's algorithm enumerates all n! pairings.
    let mut c = vec![0usize; n];
    let cost = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(i, &k)| (xs[i] - ys[k]).abs().powf(p))
            .sum::<f64>()
    };
    best = best.min(cost(&perm));
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best / n as f64).powf(1.0 / p))
}
