//! Long-time behaviour of the representative SIS family.
//!
//! The module provides closed-form maxima and zeros of functions of the form
//! `a + b x + c x^2 + d (y - x)^{3/2}` on `[0, y]`, the transformed function
//! `h` whose long-run behaviour governs the pathwise growth rate of the
//! infected population, and extinction and persistence diagnostics built from
//! limits of the model coefficients ([`LimitData`]).

use std::fmt;

use crate::error::{invalid, Error, Result};
use crate::model::{GeneralModel, MeasureStats, RepresentativeParams, SimulatedModelParams};

/// Maximum of `a + b x + c x^2` over `[0, y]` and a maximiser.
pub fn max_quadratic(a: f64, b: f64, c: f64, y: f64) -> (f64, f64) {
    if c < 0.0 && b < -2.0 * c * y {
        if b > 0.0 {
            (a - b * b / (4.0 * c), -b / (2.0 * c))
        } else {
            (a, 0.0)
        }
    } else {
        let gain = (b + c * y) * y;
        if gain > 0.0 {
            (a + gain, y)
        } else {
            (a, 0.0)
        }
    }
}

/// Maximum of `a + b x + d (y - x)^{3/2}` over `[0, y]` and a maximiser.
pub fn max_power32(a: f64, b: f64, d: f64, y: f64) -> (f64, f64) {
    if d < 0.0 && b < 0.0 {
        let shift = 4.0 / 9.0 * (b / d).powi(2);
        if y > shift {
            return (a + b * y - 4.0 / 27.0 * b.powi(3) / (d * d), y - shift);
        }
    }
    let root = y.sqrt();
    if b >= d * root {
        (a + b * y, y)
    } else {
        (a + d * root * y, 0.0)
    }
}

/// Maximum of `a + b x + c x^2 + d (y - x)^{3/2}` over `[0, y]` for `c < 0`.
///
/// Substituting `z = (y - x)^{1/2}` turns the function into a quartic in `z`
/// whose interior critical point is `z_+ = -(3d/2 + e^{1/2}) / (4c)` with
/// `e = 9d^2/4 + 8c(b + 2cy)`.
pub fn max_quartic_power(a: f64, b: f64, c: f64, d: f64, y: f64) -> Result<(f64, f64)> {
    if !(c < 0.0) {
        return invalid(format!(
            "max_quartic_power needs c < 0 (got {c}); use max_quadratic or max_power32"
        ));
    }
    let endpoints = || {
        let at_y = (b + c * y) * y;
        let at_zero = d * y.sqrt() * y;
        if at_y >= at_zero {
            (a + at_y, y)
        } else {
            (a + at_zero, 0.0)
        }
    };
    let bb = b + 2.0 * c * y;
    let e = 2.25 * d * d + 8.0 * c * bb;
    if ((bb >= 0.0 && d > 0.0) || bb < 0.0) && e > 0.0 {
        let root_e = e.sqrt();
        // Conjugate form avoids cancellation when 3d/2 and sqrt(e) nearly cancel.
        let z = if d >= 0.0 {
            -(1.5 * d + root_e) / (4.0 * c)
        } else {
            2.0 * bb / (1.5 * d - root_e)
        };
        if z > 0.0 && z < y.sqrt() {
            let inner = c * z + 0.5 * d;
            let base = a + b * y + c * y * y;
            return Ok(if inner < 0.0 {
                (base - z.powi(3) * inner, y - z * z)
            } else {
                (base, y)
            });
        }
    }
    Ok(endpoints())
}

/// Which zero [`zero_of_f`] should return.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroMode {
    /// Smallest zero in `(0, y]`, requiring `f(0) > 0`.
    Smallest,
    /// Largest zero in `[0, y)`, requiring `f(0) >= 0 > f(y)`.
    Largest,
}

fn eval_f(a: f64, b: f64, c: f64, d: f64, y: f64, x: f64) -> f64 {
    let z = (y - x).max(0.0);
    a + b * x + c * x * x + d * z * z.sqrt()
}

/// Real roots of `c x^2 + b x + a` in increasing order, computed stably.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if c.abs() < 1e-14 * a.abs().max(b.abs()).max(1.0) {
        return if b != 0.0 { vec![-a / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let q = if q == 0.0 { -0.5 * disc.sqrt() } else { q };
    let mut roots = vec![q / c];
    if q != 0.0 {
        roots.push(a / q);
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Zero of `f(x) = a + b x + c x^2 + d (y - x)^{3/2}` on `[0, y]`.
///
/// In [`ZeroMode::Smallest`] the hypotheses of the unique-zero result are
/// validated: `f(0) > 0` and either `d = 0` with `f(y) <= 0`, or `c <= 0`,
/// `d != 0` and `f(y) < 0`. For `d = 0` the zero is given in closed form,
/// otherwise it is bracketed on a refined grid and bisected to `1e-12`.
pub fn zero_of_f(a: f64, b: f64, c: f64, d: f64, y: f64, mode: ZeroMode) -> Result<f64> {
    if !(y > 0.0) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
        return invalid("zero_of_f needs finite coefficients and y > 0");
    }
    let f0 = a + d * y * y.sqrt();
    let fy = a + b * y + c * y * y;
    match mode {
        ZeroMode::Smallest => {
            if !(f0 > 0.0) {
                return Err(Error::Inconclusive(format!("f(0) = {f0} is not positive")));
            }
            if d == 0.0 {
                if fy > 0.0 {
                    return Err(Error::Inconclusive(format!("f(y) = {fy} is positive")));
                }
                if c.abs() < 1e-14 * a.abs().max(b.abs()).max(1.0) {
                    return Ok(-a / b);
                }
                let root = (b * b - 4.0 * a * c).max(0.0).sqrt();
                // Multiply by the conjugate when -b and the root have equal signs.
                return Ok(if b <= 0.0 {
                    2.0 * a / (-b + root)
                } else {
                    (-b - root) / (2.0 * c)
                });
            }
            if !(c <= 0.0 && fy < 0.0) {
                return Err(Error::Inconclusive(format!(
                    "unique-zero conditions fail: c = {c}, f(y) = {fy}"
                )));
            }
            bracket_and_bisect(a, b, c, d, y, mode)
        }
        ZeroMode::Largest => {
            if !(f0 >= 0.0) || !(fy < 0.0) {
                return Err(Error::Inconclusive(format!(
                    "largest zero needs f(0) >= 0 > f(y), got f(0) = {f0}, f(y) = {fy}"
                )));
            }
            if d == 0.0 {
                return quadratic_roots(a, b, c)
                    .into_iter()
                    .filter(|r| *r >= 0.0 && *r < y)
                    .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |m| m.max(r))))
                    .ok_or_else(|| Error::Inconclusive("no zero in [0, y)".into()));
            }
            bracket_and_bisect(a, b, c, d, y, mode)
        }
    }
}

fn bracket_and_bisect(a: f64, b: f64, c: f64, d: f64, y: f64, mode: ZeroMode) -> Result<f64> {
    let f = |x: f64| eval_f(a, b, c, d, y, x);
    // Uniform grid refined geometrically towards both endpoints.
    let mut pts: Vec<f64> = (0..=4096).map(|i| y * i as f64 / 4096.0).collect();
    for j in 13..60 {
        let s = y * 0.5f64.powi(j);
        pts.push(s);
        pts.push(y - s);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let vals: Vec<f64> = pts.iter().map(|&x| f(x)).collect();
    let pair = match mode {
        ZeroMode::Smallest => (1..pts.len()).find(|&k| vals[k] <= 0.0).map(|k| (k - 1, k)),
        ZeroMode::Largest => (0..pts.len() - 1).rev().find(|&k| vals[k] >= 0.0).map(|k| (k, k + 1)),
    };
    let (i, j) = pair.ok_or_else(|| Error::Inconclusive("no sign change found".into()))?;
    let (mut lo, mut hi) = (pts[i], pts[j]);
    if vals[j] == 0.0 && mode == ZeroMode::Smallest {
        return Ok(hi);
    }
    if vals[i] == 0.0 && mode == ZeroMode::Largest {
        return Ok(lo);
    }
    // Invariant: f(lo) > 0 (resp. >= 0) and f(hi) < 0 (resp. <= 0).
    while hi - lo > 1e-12 * y.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        let go_right = match mode {
            ZeroMode::Smallest => v > 0.0,
            ZeroMode::Largest => v >= 0.0,
        };
        if go_right {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Decomposition of `h` for the representative family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HParts {
    /// Constant drift coefficient `b_0`.
    pub b0: f64,
    /// Constant part `h_1`.
    pub h1: f64,
    /// Linear coefficient `h_2`.
    pub h2: f64,
    /// Quadratic coefficient `h_3`.
    pub h3: f64,
    /// Coefficient of `-(y - x)^{3/2}`, that is `g_11 g_12 1{eta0 = 1/2}`.
    pub d: f64,
}

/// Value of the transformed function `h` together with its decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HEval {
    /// `h(t, x, y, nu)`.
    pub value: f64,
    /// Closed-form decomposition for the representative family.
    pub parts: Option<HParts>,
}

fn indicator(flag: bool) -> f64 {
    if flag {
        1.0
    } else {
        0.0
    }
}

/// Noise aggregates of the representative family: `(G, S)` with
/// `G = (g11 + g12 1{eta0=1})^2 + g21^2 1{eta0=1}` and
/// `S = (g12^2 + g21^2) 1{eta0=1/2} / 2`.
fn noise_aggregates(g11: f64, g12: f64, g21: f64, eta0: f64) -> (f64, f64) {
    let one = indicator(eta0 == 1.0);
    let half = indicator(eta0 == 0.5);
    let g = (g11 + g12 * one).powi(2) + g21 * g21 * one;
    let s = 0.5 * (g12 * g12 + g21 * g21) * half;
    (g, s)
}

/// `h` decomposition for representative coefficients at `(t, y, mean)`.
pub fn h_parts(p: &RepresentativeParams, t: f64, y: f64, mean: f64) -> HParts {
    let [b0, b1, b2, b3] = p.drift_coefficients(t, y, mean);
    let (g11, g12, g21) = (p.g11.eval(t), p.g12.eval(t), p.g21.eval(t));
    let (g, s) = noise_aggregates(g11, g12, g21, p.eta0);
    HParts {
        b0,
        h1: b1 - s * y - 0.5 * g * y * y,
        h2: b2 + s + g * y,
        h3: b3 - 0.5 * g,
        d: g11 * g12 * indicator(p.eta0 == 0.5),
    }
}

/// Evaluates `h(t, x, y, nu) = sum_i b_i x^{i-1} - |f(t, x, y - x)|^2 / (2 x^2)`.
///
/// For the representative family the closed form is used, `x = 0` is
/// allowed when `beta_0(t) = 0`, and `h(t, y, y, nu) = -(mu + gamma)(t)`.
/// Other models use the defining formula and need `0 < x <= y`.
pub fn h_eval(model: &GeneralModel, t: f64, x: f64, y: f64, stats: &MeasureStats) -> Result<HEval> {
    if !(x >= 0.0 && x <= y) {
        return invalid(format!("h needs 0 <= x <= y, got x = {x}, y = {y}"));
    }
    if let Some(p) = model.representative_params() {
        let parts = h_parts(p, t, y, stats.mean);
        if x == y && y > 0.0 {
            return Ok(HEval {
                value: -(p.mu.eval(t) + p.gamma.eval(t)),
                parts: Some(parts),
            });
        }
        let first = if x > 0.0 {
            parts.b0 / x
        } else if parts.b0 == 0.0 && p.beta0.eval(t) == 0.0 {
            0.0
        } else {
            return invalid("h at x = 0 needs beta_0 = 0");
        };
        let z = y - x;
        let value = first + parts.h1 + parts.h2 * x - parts.d * z * z.sqrt() + parts.h3 * x * x;
        return Ok(HEval {
            value,
            parts: Some(parts),
        });
    }
    h_general(model, t, x, y, stats).map(|value| HEval { value, parts: None })
}

/// Defining formula of `h`, valid for every model and `0 < x <= y`.
pub fn h_general(model: &GeneralModel, t: f64, x: f64, y: f64, stats: &MeasureStats) -> Result<f64> {
    if !(x > 0.0 && x <= y) {
        return invalid(format!("general h needs 0 < x <= y, got x = {x}, y = {y}"));
    }
    let b = model.drift_coefficients_at(t, y, stats)?;
    let poly: f64 = b.iter().enumerate().map(|(i, bi)| bi * x.powi(i as i32 - 1)).sum();
    let rows = model.diffusion_spec().eval(t, x, y - x);
    let sq: f64 = rows.iter().map(|r| r * r).sum();
    Ok(poly - sq / (2.0 * x * x))
}

/// Limits of the representative coefficients as `t` tends to infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitData {
    /// Limit of the population size.
    pub n_inf: f64,
    /// Limit of `mu + gamma`.
    pub mu_gamma_inf: f64,
    /// Limit of `beta`.
    pub beta_inf: f64,
    /// Limit of `beta_1`.
    pub beta1_inf: f64,
    /// Limit of `c_12`.
    pub c12: f64,
    /// Limit of `c_21`.
    pub c21: f64,
    /// Limit of `c_22`.
    pub c22: f64,
    /// Limit of `g_11`.
    pub g11: f64,
    /// Limit of `g_12`.
    pub g12: f64,
    /// Limit of `g_21`.
    pub g21: f64,
    /// Exponent `eta0` of the family.
    pub eta0: f64,
    /// Lower bound for `liminf beta_1^+ N - beta_1 E[I]` (defaults to 0).
    pub u_i: f64,
    /// Lower bound for `liminf beta_1 E[I] + beta_1^- N` (defaults to 0).
    pub v_i: f64,
    /// Limit of `beta_1 E[I]`, for instance estimated from a simulation.
    pub m_inf: Option<f64>,
}

impl LimitData {
    /// Limits declared by the coefficient functions (exact for constants).
    pub fn from_params(p: &RepresentativeParams) -> Result<Self> {
        let lim = |name: &str, f: &crate::model::TimeFunction| {
            f.limit().ok_or_else(|| {
                Error::InvalidInput(format!("missing limit for {name}; supply LimitData explicitly"))
            })
        };
        if lim("beta0", &p.beta0)? != 0.0 {
            return invalid("asymptotic analysis needs beta_0 to vanish in the limit");
        }
        Ok(Self {
            n_inf: lim("N", &p.population.n)?,
            mu_gamma_inf: lim("mu", &p.mu)? + lim("gamma", &p.gamma)?,
            beta_inf: lim("beta", &p.beta)?,
            beta1_inf: lim("beta1", &p.beta1)?,
            c12: lim("c12", &p.c12)?,
            c21: lim("c21", &p.c21)?,
            c22: lim("c22", &p.c22)?,
            g11: lim("g11", &p.g11)?,
            g12: lim("g12", &p.g12)?,
            g21: lim("g21", &p.g21)?,
            eta0: p.eta0,
            u_i: 0.0,
            v_i: 0.0,
            m_inf: None,
        })
    }

    /// Limits of the simulated stochastic SIS model.
    pub fn simulated(p: &SimulatedModelParams) -> Self {
        Self {
            n_inf: p.n,
            mu_gamma_inf: p.mu + p.gamma,
            beta_inf: p.beta,
            beta1_inf: p.alpha * p.beta,
            c12: 0.0,
            c21: 0.0,
            c22: 0.0,
            g11: p.sigma,
            g12: 0.0,
            g21: 0.0,
            eta0: 0.5,
            u_i: 0.0,
            v_i: 0.0,
            m_inf: None,
        }
    }

    /// Sets the limit of `beta_1 E[I]`.
    pub fn with_m_inf(mut self, m: f64) -> Self {
        self.m_inf = Some(m);
        self
    }

    /// Sets the limit of `beta_1 E[I]` from the limit of `alpha E[I]` in the
    /// simulated model, where `beta_1 = alpha beta`.
    pub fn with_alpha_mean_limit(self, alpha_mean: f64) -> Self {
        let m = self.beta_inf * alpha_mean;
        self.with_m_inf(m)
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.n_inf,
            self.mu_gamma_inf,
            self.beta_inf,
            self.beta1_inf,
            self.c12,
            self.c21,
            self.c22,
            self.g11,
            self.g12,
            self.g21,
            self.u_i,
            self.v_i,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("limit data".into()));
        }
        if self.eta0 != 0.5 && self.eta0 != 1.0 {
            return invalid(format!("eta0 must be 1/2 or 1, got {}", self.eta0));
        }
        if self.n_inf < 0.0 || self.mu_gamma_inf < 0.0 || self.u_i < 0.0 || self.v_i < 0.0 {
            return invalid("N_inf, mu_inf + gamma_inf, u_I and v_I must be nonnegative");
        }
        if let Some(m) = self.m_inf {
            if !m.is_finite() {
                return Err(Error::NonFinite("m_inf".into()));
            }
            if self.n_inf > 0.0 {
                let r = m / self.n_inf;
                let tol = 1e-12 * (1.0 + self.beta1_inf.abs());
                if r < -(-self.beta1_inf).max(0.0) - tol || r > self.beta1_inf.max(0.0) + tol {
                    return invalid(format!(
                        "m_inf / N_inf = {r} must lie in [-beta1_inf^-, beta1_inf^+]"
                    ));
                }
            }
        }
        Ok(())
    }

    fn aggregates(&self) -> (f64, f64) {
        noise_aggregates(self.g11, self.g12, self.g21, self.eta0)
    }

    fn ind_half(&self) -> f64 {
        indicator(self.eta0 == 0.5)
    }
}

/// Verdict of an asymptotic analysis.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Exponential extinction with rate `rho`; `h_inf` is the pathwise
    /// Lyapunov limit when the limit of `h` at zero exists.
    Extinct {
        /// Rate exponent (always 1 here).
        rho: f64,
        /// Limit of `h` as `x -> 0`.
        h_inf: Option<f64>,
    },
    /// Persistence above `x0`; `y0` is the upper level when available.
    PersistAbove {
        /// Lower persistence level.
        x0: f64,
        /// Upper level with `liminf I <= y0`.
        y0: Option<f64>,
    },
    /// Persistence around `x0`.
    PersistAround {
        /// Common level.
        x0: f64,
    },
    /// No conclusion; the reason names the failing inequality.
    Inconclusive {
        /// Failing hypothesis.
        reason: String,
    },
}

impl Verdict {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Extinct { .. } => "extinct",
            Verdict::PersistAbove { .. } => "persist_above",
            Verdict::PersistAround { .. } => "persist_around",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }

    /// Lower persistence level, if any.
    pub fn level(&self) -> Option<f64> {
        match self {
            Verdict::PersistAbove { x0, .. } | Verdict::PersistAround { x0 } => Some(*x0),
            _ => None,
        }
    }
}

/// Result of [`extinction_report`] or [`persistence_levels`].
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticReport {
    /// Model family analysed.
    pub family: crate::model::Family,
    /// Verdict.
    pub verdict: Verdict,
    /// Ratio `(h_{0,inf} + beta1_inf^+ N_inf) / (mu_inf + gamma_inf)`.
    pub reproduction_ratio: Option<f64>,
    /// Limit of `h` at zero.
    pub h_inf: Option<f64>,
    /// Intermediate quantities as ordered key-value pairs.
    pub entries: Vec<(String, String)>,
}

impl AsymptoticReport {
    /// Looks up an entry by key.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Numeric entry by key.
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }
}

impl fmt::Display for AsymptoticReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family = {}", self.family.name())?;
        writeln!(f, "verdict = {}", self.verdict.name())?;
        match &self.verdict {
            Verdict::Extinct { rho, .. } => writeln!(f, "rho = {rho}")?,
            Verdict::PersistAbove { x0, y0 } => {
                writeln!(f, "x0 = {x0}")?;
                if let Some(y0) = y0 {
                    writeln!(f, "y0 = {y0}")?;
                }
            }
            Verdict::PersistAround { x0 } => writeln!(f, "x0 = {x0}")?,
            Verdict::Inconclusive { reason } => writeln!(f, "reason = {reason}")?,
        }
        if let Some(h) = self.h_inf {
            writeln!(f, "h_inf = {h}")?;
        }
        if let Some(r) = self.reproduction_ratio {
            writeln!(f, "reproduction_ratio = {r}")?;
        }
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

struct Entries(Vec<(String, String)>);

impl Entries {
    fn num(&mut self, k: &str, v: f64) {
        self.0.push((k.to_string(), format!("{v}")));
    }
    fn flag(&mut self, k: &str, v: bool) {
        self.0.push((k.to_string(), v.to_string()));
    }
    fn text(&mut self, k: &str, v: &str) {
        self.0.push((k.to_string(), v.to_string()));
    }
}

/// Extinction diagnostics for the representative family.
///
/// The governing constant is the smallest applicable upper bound `u` for
/// the limiting `h` over `x in (0, N_inf]`:
///
/// * `sup_h`: the exact supremum of the limiting `h` when the interaction
///   term `beta_1 E[I] (1 - x/N)` is bounded by `(beta_1^+ N - u_I)(1 - x/N)`,
///   computed with the closed-form maximisers;
/// * `u_quadratic_penalty`: the quadratic-penalty constant, when the cubic coefficient
///   condition holds and the `(y - x)^{3/2}` term is absent;
/// * `u_power_term`: `(u1 + u3 N - u2 N^{1/2}) N - (mu + gamma)` for `eta0 = 1/2`
///   under one of its four scenarios;
/// * `u_linear_bound`: `(u1 + u2 N)^+ N - (mu + gamma + u_I)` when the cubic
///   coefficient condition fails.
///
/// The verdict is `Extinct` when the governing constant is negative.
pub fn extinction_report(lim: &LimitData, family: crate::model::Family) -> Result<AsymptoticReport> {
    if !family.is_representative() {
        return invalid(format!("extinction analysis needs a representative family, got {}", family.name()));
    }
    lim.validate()?;
    let n = lim.n_inf;
    let mg = lim.mu_gamma_inf;
    let (beta, b1) = (lim.beta_inf, lim.beta1_inf);
    let (b1p, b1m) = (b1.max(0.0), (-b1).max(0.0));
    let (c12, c21, c22) = (lim.c12, lim.c21, lim.c22);
    let (g, s) = lim.aggregates();
    let half = lim.ind_half();
    let g1112 = lim.g11 * lim.g12;
    let rn = n.sqrt();
    let mut e = Entries(Vec::new());

    let h_inf = -mg + beta * n + c12 * n * n - s * n - 0.5 * g * n * n - g1112 * half * n * rn;
    let h0 = h_inf + mg;
    let ratio = if mg > 0.0 { Some((h0 + b1p * n) / mg) } else { None };
    e.num("h0_inf", h0);
    e.flag("criterion_h0", h0 + b1p * n < mg);

    // Exact supremum of the limiting h with the interaction bound.
    let a_s = -mg + beta * n + c12 * n * n - s * n - 0.5 * g * n * n + (b1p * n - lim.u_i);
    let b_s = -beta + c21 * n + c22 * n * n + s + g * n - if n > 0.0 { b1p - lim.u_i / n } else { 0.0 };
    let c_s = -c12 - c21 - c22 * n - 0.5 * g;
    let d_s = -g1112 * half;
    let (sup_h, arg) = if c_s < 0.0 {
        max_quartic_power(a_s, b_s, c_s, d_s, n)?
    } else if d_s == 0.0 {
        max_quadratic(a_s, b_s, c_s, n)
    } else if c_s == 0.0 {
        max_power32(a_s, b_s, d_s, n)
    } else {
        max_power32(a_s, b_s + c_s * n, d_s, n)
    };
    e.num("sup_h", sup_h);
    e.num("sup_h_argmax", arg);
    let mut candidates = vec![("sup_h", sup_h)];

    let a2 = c12 + c21 + c22 * n > -0.5 * g;
    e.flag("cubic_condition", a2);
    let no_power_term = lim.eta0 == 1.0 || g1112 == 0.0;
    let u1 = beta + b1p - s;

    if a2 && no_power_term {
        let u2 = b1m - beta + s;
        let u3 = g;
        let u4 = c12 + c21 + c22 * n + 0.5 * u3;
        let u = if u2 >= (2.0 * c12 + c21) * n + c22 * n * n {
            -mg
        } else {
            let lift = (u2 + (c21 + u3) * n + c22 * n * n).max(0.0);
            -(mg + lim.u_i) + u1 * n + (c12 - 0.5 * u3) * n * n + 0.25 * lift * lift / u4
        };
        e.num("u_quadratic_penalty", u);
        candidates.push(("u_quadratic_penalty", u));
    }

    if lim.eta0 == 0.5 {
        let sq = 0.5 * (lim.g12.powi(2) + lim.g21.powi(2));
        let base = beta + b1p + (2.0 * c12 + c21) * n + c22 * n * n;
        let s1 = sq >= base && g1112 >= 0.0;
        let s2 = -1.5 * g1112 >= 4.0 * (c12 + c21 + c22 * n + 0.5 * lim.g11.powi(2)) * rn;
        let s3 = sq <= beta - b1m - (1.5 * g1112 + (c21 + lim.g11.powi(2)) * rn + c22 * n * rn) * rn;
        let s4 = if lim.g11 > 0.0 {
            let den = 0.5 * lim.g11.powi(2) + c12 + c21 + c22 * n;
            den > 0.0 && sq >= base + 0.5 * 0.5625 * g1112 * g1112 / den
        } else {
            true
        };
        let alternative = c12 == 0.0 && c21 == 0.0 && c22 == 0.0 && lim.g11 == 0.0;
        e.flag("scenario_i", s1);
        e.flag("scenario_ii", s2);
        e.flag("scenario_iii", s3);
        e.flag("scenario_iv", s4);
        e.flag("scenario_alternative", alternative);
        let applicable = alternative || (a2 && (s1 || s2 || s3 || s4));
        let v1 = beta + b1p - sq;
        let v2 = g1112;
        let v3 = c12 - 0.5 * lim.g11.powi(2);
        let u = (v1 + v3 * n - v2 * rn) * n - mg;
        e.num("u_power_term", u);
        e.flag("power_term_applicable", applicable && mg > 0.0);
        if applicable && mg > 0.0 {
            candidates.push(("u_power_term", u));
        }
    }

    if !a2 && no_power_term {
        let u2 = c12 - 0.5 * g;
        let u = (u1 + u2 * n).max(0.0) * n - (mg + lim.u_i);
        e.num("u_linear_bound", u);
        candidates.push(("u_linear_bound", u));
    }

    let (name, u) = candidates
        .iter()
        .copied()
        .fold(("", f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    e.text("governing", name);
    e.num("u", u);
    let verdict = if u < 0.0 {
        Verdict::Extinct {
            rho: 1.0,
            h_inf: Some(h_inf),
        }
    } else {
        Verdict::Inconclusive {
            reason: format!("governing constant {name} = {u} is not negative"),
        }
    };
    Ok(AsymptoticReport {
        family,
        verdict,
        reproduction_ratio: ratio,
        h_inf: Some(h_inf),
        entries: e.0,
    })
}

/// Coefficients of the auxiliary functions `f_inf` and `g_inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PersistenceCoefficients {
    /// `a_inf, b_inf, c_inf, d_inf` of `f_inf`.
    pub lower: [f64; 4],
    /// `â_inf, b̂_inf, ĉ_inf, d̂_inf` of `g_inf`.
    pub upper: [f64; 4],
}

/// Coefficients of `f_inf(x) = a + b x + c x^2 - d (N - x)^{3/2}` and of
/// `g_inf` for interaction levels `x` and `y`.
pub fn persistence_coefficients(lim: &LimitData, x: f64, y: f64) -> Result<PersistenceCoefficients> {
    lim.validate()?;
    let n = lim.n_inf;
    if !(n > 0.0) {
        return invalid("persistence analysis needs N_inf > 0");
    }
    let b1 = lim.beta1_inf;
    let (b1p, b1m) = (b1.max(0.0), (-b1).max(0.0));
    let tol = 1e-12 * (1.0 + b1.abs());
    if x > b1p + tol || y < -b1m - tol {
        return invalid(format!("need x <= beta1^+ = {b1p} and y >= -beta1^- = {}", -b1m));
    }
    if let Some(m) = lim.m_inf {
        let level = m / n;
        let tol = 1e-9 * (1.0 + level.abs());
        if x < level - tol || y > level + tol {
            return invalid(format!("need x >= m_I = {level} and y <= n_I = {level}"));
        }
    }
    let u_i = n * (b1p - x);
    let v_i = n * (b1m + y);
    let (g, s) = lim.aggregates();
    let half = lim.ind_half();
    let u1 = lim.beta_inf + b1p - s;
    let v1 = lim.beta_inf - b1m - s;
    let v2 = lim.c12 - 0.5 * g;
    let v3 = lim.c21 + g;
    let d = lim.g11 * lim.g12 * half;
    let mg = lim.mu_gamma_inf;
    let a = -mg + v_i + v1 * n + v2 * n * n;
    let b = -u1 + u_i / n + v3 * n + lim.c22 * n * n;
    let c = -v2 - v3 - lim.c22 * n;
    let a_hat = a - u_i - v_i + (u1 - v1) * n;
    let b_hat = b + u1 - v1 - (u_i + v_i) / n;
    Ok(PersistenceCoefficients {
        lower: [a, b, c, d],
        upper: [a_hat, b_hat, c, d],
    })
}

/// Persistence levels for interaction levels `x` and `y`.
///
/// Without an estimate of `lim beta_1 E[I]` the defaults are
/// `x = beta1_inf^+` and `y = -beta1_inf^-`; with `m_inf` set, the natural
/// choice is `x = y = m_inf / N_inf` (see [`persistence_levels_default`]).
pub fn persistence_levels(
    lim: &LimitData,
    family: crate::model::Family,
    x: f64,
    y: f64,
) -> Result<AsymptoticReport> {
    if !family.is_representative() {
        return invalid(format!("persistence analysis needs a representative family, got {}", family.name()));
    }
    let coeffs = persistence_coefficients(lim, x, y)?;
    let n = lim.n_inf;
    let mg = lim.mu_gamma_inf;
    let [a, b, c, d] = coeffs.lower;
    let [ah, bh, ch, dh] = coeffs.upper;
    let n32 = n * n.sqrt();
    let mut e = Entries(Vec::new());
    e.num("x", x);
    e.num("y", y);
    for (k, v) in [("a_inf", a), ("b_inf", b), ("c_inf", c), ("d_inf", d)] {
        e.num(k, v);
    }
    for (k, v) in [("a_hat", ah), ("b_hat", bh), ("c_hat", ch), ("d_hat", dh)] {
        e.num(k, v);
    }

    let lower = if a > d * n32 {
        match zero_of_f(a, b, c, -d, n, ZeroMode::Smallest) {
            Ok(x0) => Ok(x0),
            Err(err) => Err(err.to_string()),
        }
    } else {
        Err(format!("a_inf = {a} <= d_inf N_inf^(3/2) = {}", d * n32))
    };
    let upper = if ah >= dh * n32 && ah + bh * n + ch * n * n < 0.0 {
        zero_of_f(ah, bh, ch, -dh, n, ZeroMode::Largest).ok()
    } else {
        None
    };
    if let Some(y0) = upper {
        e.num("y0", y0);
    }
    let verdict = match lower {
        Ok(x0) => {
            e.num("x0", x0);
            match upper {
                Some(y0) if x == y && mg > 0.0 && (x0 - y0).abs() <= 1e-9 * n.max(1.0) => {
                    Verdict::PersistAround { x0 }
                }
                other => Verdict::PersistAbove { x0, y0: other },
            }
        }
        Err(reason) => Verdict::Inconclusive { reason },
    };
    Ok(AsymptoticReport {
        family,
        verdict,
        reproduction_ratio: None,
        h_inf: None,
        entries: e.0,
    })
}

/// Persistence levels with the default interaction levels: `x = y =
/// m_inf / N_inf` when `m_inf` is set, otherwise `x = beta1^+`, `y = -beta1^-`.
pub fn persistence_levels_default(lim: &LimitData, family: crate::model::Family) -> Result<AsymptoticReport> {
    let b1 = lim.beta1_inf;
    let (x, y) = match lim.m_inf {
        Some(m) if lim.n_inf > 0.0 => (m / lim.n_inf, m / lim.n_inf),
        _ => (b1.max(0.0), -(-b1).max(0.0)),
    };
    persistence_levels(lim, family, x, y)
}
