//! Explicit moment, comparison, Euler-Maruyama and strong error bounds.
//!
//! Every bound is expressed through a [`HatTrack`], which yields the
//! coefficient bounds ([`HatCoeffs`]) at any time `t` and population level
//! `y`, together with the population function `N`. Time integrals are
//! evaluated with adaptive Simpson quadrature at tolerance `1e-10`.

use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::engine::Partition;
use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::{GeneralModel, PopulationFunction, RepresentativeParams};
use crate::quadrature::{integrate, DEFAULT_TOLERANCE};

/// Coefficient bounds of a model with `k = 3` at one point `(t, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HatCoeffs {
    /// Population level the bounds refer to.
    pub y: f64,
    /// Signed bounds `b̂_0..b̂_3` with `b_i <= b̂_i` over all measures.
    pub bhat: [f64; 4],
    /// Absolute bounds with `|b_i| <= bhat_abs[i]` over all measures.
    pub bhat_abs: [f64; 4],
    /// Partial Lipschitz coefficient in the state, `b̂_{k+1}`.
    pub bhat4: f64,
    /// Affine growth coefficient `b̂_{k+2}`.
    pub bhat5: f64,
    /// Lipschitz coefficient in the measure, `λ̂_{k+1}`.
    pub lamhat4: f64,
    /// Linear growth coefficient `l` of the diffusion.
    pub l: Option<f64>,
    /// Lipschitz coefficient `λ` of the diffusion.
    pub lam: Option<f64>,
}

impl HatCoeffs {
    /// Constant bounds for a model without measure dependence.
    ///
    /// `b_abs` holds `|b_0|..|b_3|` and `l` serves as both diffusion constants.
    pub fn constant(y: f64, bhat: [f64; 4], b_abs: [f64; 4], bhat4: f64, bhat5: f64, l: f64) -> Self {
        Self {
            y,
            bhat,
            bhat_abs: b_abs,
            bhat4,
            bhat5,
            lamhat4: 0.0,
            l: Some(l),
            lam: Some(l),
        }
    }

    /// Growth envelope `b̂_{k+3} = sum_{i>=1} |b_i| y^{i-1}`.
    pub fn growth(&self) -> f64 {
        self.bhat_abs[1] + self.bhat_abs[2] * self.y + self.bhat_abs[3] * self.y * self.y
    }

    /// Slope envelope `sum_{i>=1} i |b_i| z^{i-1}`, which bounds the state
    /// derivative of the drift polynomial on `[0, z]`.
    pub fn slope_envelope(&self, z: f64) -> f64 {
        self.bhat_abs[1] + 2.0 * self.bhat_abs[2] * z + 3.0 * self.bhat_abs[3] * z * z
    }

    fn l_or_err(&self) -> Result<f64> {
        self.l.ok_or_else(|| Error::Unavailable("linear growth coefficient l of the diffusion".into()))
    }

    fn lam_or_err(&self) -> Result<f64> {
        self.lam.ok_or_else(|| Error::Unavailable("Lipschitz coefficient of the diffusion".into()))
    }
}

type HatFn = Arc<dyn Fn(f64, f64) -> Result<HatCoeffs> + Send + Sync>;

/// Coefficient bounds as a function of `(t, y)` plus the population `N`.
#[derive(Clone)]
pub struct HatTrack {
    hats: HatFn,
    population: PopulationFunction,
    d: usize,
}

impl std::fmt::Debug for HatTrack {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HatTrack").field("d", &self.d).finish_non_exhaustive()
    }
}

impl HatTrack {
    /// Track built from a user-supplied function and population.
    pub fn new(
        hats: impl Fn(f64, f64) -> Result<HatCoeffs> + Send + Sync + 'static,
        population: PopulationFunction,
        d: usize,
    ) -> Self {
        Self {
            hats: Arc::new(hats),
            population,
            d,
        }
    }

    /// Track of a representative-family model.
    pub fn from_model(model: &GeneralModel) -> Result<Self> {
        if model.representative_params().is_none() {
            return Err(Error::Unavailable("hat coefficients need a representative-family model".into()));
        }
        let m = model.clone();
        let d = model.diffusion_spec().d();
        Ok(Self::new(
            move |t, y| crate::model::hat_coefficients_at(&m, t, y),
            model.population().clone(),
            d,
        ))
    }

    /// Time-independent bounds at a constant population `hc.y`.
    pub fn constant(hc: HatCoeffs, d: usize) -> Self {
        let n = hc.y;
        Self::new(move |_, _| Ok(hc.clone()), PopulationFunction::constant(n), d)
    }

    /// Bounds at `(t, N(t))`.
    pub fn at(&self, t: f64) -> Result<HatCoeffs> {
        (self.hats)(t, self.population.at(t))
    }

    /// Bounds at `(t, y)`.
    pub fn at_level(&self, t: f64, y: f64) -> Result<HatCoeffs> {
        (self.hats)(t, y)
    }

    /// Population function.
    pub fn population(&self) -> &PopulationFunction {
        &self.population
    }

    /// Dimension of the driving Brownian motion.
    pub fn d(&self) -> usize {
        self.d
    }
}

/// Hölder constants `b̄_0..b̄_k` of the drift coefficients and `λ_0` of the
/// diffusion. Both default to zero and are supplied by the user.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HolderConstants {
    /// `b̄_i` with `|b_i(s,y,ν) - b_i(s̃,ỹ,ν)| <= b̄_i (|s-s̃|^{1/2} + |y-ỹ|)`.
    pub drift: Vec<f64>,
    /// `λ_0` with `|f(s,x,z) - f(s̃,x,z)| <= λ_0 |s-s̃|^{1/2}`.
    pub lambda0: f64,
}

impl HolderConstants {
    /// `b̄_{k+1}(y) = sum_i b̄_i y^i`.
    pub fn drift_envelope(&self, y: f64) -> f64 {
        self.drift.iter().rev().fold(0.0, |acc, b| acc * y + b)
    }

    fn validate(&self) -> Result<()> {
        if self.drift.iter().chain([&self.lambda0]).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("Hölder constants must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Estimates Hölder constants for a representative-family model on
/// `t in [0, t_max]` and population levels in `[y_min, y_max]`.
///
/// The state part uses the exact Lipschitz moduli of `b_0..b_3` in `y` for a
/// fixed measure (the clipped mean is 1-Lipschitz in `y`); the time part is
/// the largest difference quotient `|g(s) - g(s̃)| / |s - s̃|^{1/2}` over 201
/// sample times. For constant coefficients the time part vanishes exactly.
pub fn representative_holder_constants(
    p: &RepresentativeParams,
    t_max: f64,
    y_min: f64,
    y_max: f64,
) -> Result<HolderConstants> {
    if !(t_max >= 0.0 && y_min >= 0.0 && y_max >= y_min) {
        return invalid("need t_max >= 0 and 0 <= y_min <= y_max");
    }
    let times: Vec<f64> = (0..=200).map(|i| t_max * i as f64 / 200.0).collect();
    let sup = |f: &crate::model::TimeFunction| times.iter().map(|&t| f.eval(t).abs()).fold(0.0, f64::max);
    let holder = |f: &crate::model::TimeFunction| {
        if f.as_constant().is_some() {
            return 0.0;
        }
        let v: Vec<f64> = times.iter().map(|&t| f.eval(t)).collect();
        let mut best = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                best = best.max((v[i] - v[j]).abs() / (times[j] - times[i]).sqrt());
            }
        }
        best
    };
    let beta0 = sup(&p.beta0);
    let beta = sup(&p.beta);
    let beta1 = sup(&p.beta1);
    let diff = p.beta1.zip(&p.beta0, |a, b| a - b);
    let mg = p.mu.zip(&p.gamma, |a, b| a + b);
    let (c12, c21, c22) = (sup(&p.c12), sup(&p.c21), sup(&p.c22));
    let y = y_max;

    let ratio_lip = if beta1 == 0.0 {
        0.0
    } else if y_min > 0.0 {
        1.0 / y_min
    } else {
        return Err(Error::Unavailable("b_2 is not Lipschitz in y near 0 when beta_1 != 0".into()));
    };
    let state = [
        2.0 * beta0 * y,
        sup(&diff) + beta + 2.0 * c12 * y,
        beta1 * ratio_lip + c21 + 2.0 * c22 * y,
        c22,
    ];
    let time = [
        holder(&p.beta0) * y * y,
        holder(&mg) + holder(&diff) * y + holder(&p.beta) * y + holder(&p.c12) * y * y,
        holder(&p.beta1) + holder(&p.beta) + holder(&p.c21) * y + holder(&p.c22) * y * y,
        holder(&p.c12) + holder(&p.c21) + holder(&p.c22) * y,
    ];
    // Rows of the diffusion are g11 x z + g12 x z^eta0 and g21 x z^eta0 on [0, n]^2.
    let n = y.ceil();
    let row1 = holder(&p.g11) * n * n + holder(&p.g12) * n * n.powf(p.eta0);
    let row2 = holder(&p.g21) * n * n.powf(p.eta0);
    let lambda0 = row1.hypot(row2);
    Ok(HolderConstants {
        drift: (0..4).map(|i| state[i].max(time[i])).collect(),
        lambda0,
    })
}

fn integrate_checked<F: FnMut(f64) -> Result<f64>>(mut f: F, a: f64, b: f64) -> Result<f64> {
    let mut first_err: Option<Error> = None;
    let value = integrate(
        |s| match f(s) {
            Ok(v) => v,
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
                f64::NAN
            }
        },
        a,
        b,
        DEFAULT_TOLERANCE,
    );
    if let Some(e) = first_err {
        return Err(e);
    }
    value
}

/// `e^{∫_0^t r} x0 + ∫_0^t e^{∫_s^t r} src(s) ds` for rate `r` and source `src`.
fn linear_growth_bound(
    rate: impl Fn(f64) -> Result<f64> + Copy,
    source: impl Fn(f64) -> Result<f64> + Copy,
    t: f64,
    x0: f64,
) -> Result<f64> {
    if !(t >= 0.0) || !x0.is_finite() {
        return invalid("bounds need t >= 0 and a finite initial moment");
    }
    if t == 0.0 {
        return Ok(x0);
    }
    let total = integrate_checked(rate, 0.0, t)?;
    let forced = integrate_checked(
        |s| {
            let src = source(s)?;
            if src == 0.0 {
                return Ok(0.0);
            }
            let tail = integrate_checked(rate, s, t)?;
            Ok((tail).exp() * src)
        },
        0.0,
        t,
    )?;
    ensure_finite(total.exp() * x0 + forced, "moment bound")
}

/// First-moment growth bound
/// `e^{∫_0^t b̂_{k+2}} E[ξ_0] + ∫_0^t e^{∫_s^t b̂_{k+2}} b̂_0 ds`.
pub fn first_moment_bound(track: &HatTrack, t: f64, e_xi0: f64) -> Result<f64> {
    linear_growth_bound(|s| Ok(track.at(s)?.bhat5), |s| Ok(track.at(s)?.bhat[0]), t, e_xi0)
}

/// `c_p = (p - 1) / 2`.
pub fn c_p(p: f64) -> f64 {
    0.5 * (p - 1.0)
}

/// `p`th moment growth bound with rate
/// `l̄_p = (p - 1) b̂_0 + p (b̂_{k+2} + c_p l^2)`, for `p >= 2`.
pub fn pth_moment_bound(track: &HatTrack, p: f64, t: f64, e_xi0_p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return invalid(format!("pth moment bound needs p >= 2, got {p}"));
    }
    let cp = c_p(p);
    let rate = |s: f64| -> Result<f64> {
        let h = track.at(s)?;
        let l = h.l_or_err()?;
        Ok((p - 1.0) * h.bhat[0] + p * (h.bhat5 + cp * l * l))
    };
    linear_growth_bound(rate, |s| Ok(track.at(s)?.bhat[0]), t, e_xi0_p)
}

/// Comparison bound for two solutions with initial gap `E|Δ_0|^p`:
/// `e^{∫(b̂_{k+1} + λ̂_{k+1})} E|Δ_0|` for `p = 1` and
/// `e^{∫ p(b̂_{k+1} + λ̂_{k+1} + c_p λ^2)} E|Δ_0|^p` for `p >= 2`.
pub fn comparison_bound(track: &HatTrack, p: f64, t: f64, e_delta0: f64) -> Result<f64> {
    if !(p == 1.0 || p >= 2.0) {
        return invalid(format!("comparison bound needs p = 1 or p >= 2, got {p}"));
    }
    if !(t >= 0.0) || !(e_delta0 >= 0.0) {
        return invalid("comparison bound needs t >= 0 and a nonnegative initial gap");
    }
    if e_delta0 == 0.0 {
        return Ok(0.0);
    }
    let cp = c_p(p);
    let rate = |s: f64| -> Result<f64> {
        let h = track.at(s)?;
        if p == 1.0 {
            Ok(h.bhat4 + h.lamhat4)
        } else {
            let lam = h.lam_or_err()?;
            Ok(p * (h.bhat4 + h.lamhat4 + cp * lam * lam))
        }
    };
    let total = integrate_checked(rate, 0.0, t)?;
    ensure_finite(total.exp() * e_delta0, "comparison bound")
}

/// Chi-norm factor `E[(Z_1^2 + ... + Z_d^2)^{p/2}]^{1/p}` for independent
/// standard normals, `(2^{p/2} Γ((d+p)/2) / Γ(d/2))^{1/p}`.
pub fn chi_factor(d: usize, p: f64) -> Result<f64> {
    if d == 0 || !(p > 0.0) {
        return invalid("chi factor needs d >= 1 and p > 0");
    }
    let dd = d as f64;
    let log = 0.5 * p * std::f64::consts::LN_2 + ln_gamma(0.5 * (dd + p)) - ln_gamma(0.5 * dd);
    Ok((log / p).exp())
}

fn node_hats(track: &HatTrack, grid: &Partition, j: usize) -> Result<Vec<HatCoeffs>> {
    let times = grid.times();
    if j + 1 >= times.len() {
        return invalid(format!("step index {j} out of range for {} steps", times.len() - 1));
    }
    times[..=j].iter().map(|&t| track.at(t)).collect()
}

/// Euler-Maruyama moment bound
/// `e^{k_{p,j} t} E[ξ_0^p] + e^{l_{p,j} t} t max_{i<=j} b̂_0(t_i, N(t_i))`
/// for `t in [t_j, t_{j+1}]`, with the envelope `b̂_{k+3}` from [`HatCoeffs::growth`].
pub fn em_moment_bound(track: &HatTrack, grid: &Partition, p: f64, j: usize, t: f64, e_xi0_p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return invalid(format!("EM moment bound needs p >= 1, got {p}"));
    }
    let hats = node_hats(track, grid, j)?;
    let times = grid.times();
    let tol = 1e-12 * grid.end().max(1.0);
    if !(t >= times[j] - tol && t <= times[j + 1] + tol) {
        return invalid(format!("t = {t} is not in [t_{j}, t_{}]", j + 1));
    }
    let cp = c_p(p);
    let (mut k, mut l, mut b0) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    for h in &hats {
        let lg = h.l_or_err()?;
        let b0_abs = h.bhat_abs[0];
        let growth = h.growth();
        k = k.max((p - 1.0) * b0_abs + p * (growth + cp * lg * lg));
        l = l.max(2.0 * (p - 1.0) * (b0_abs + cp * lg * lg) + (2.0 * p - 1.0) * growth);
        b0 = b0.max(b0_abs);
    }
    ensure_finite((k * t).exp() * e_xi0_p + (l * t).exp() * t * b0, "EM moment bound")
}

fn increment_constant(h: &HatCoeffs, n: f64, horizon: f64, chi: f64) -> Result<f64> {
    let l = h.l_or_err()?;
    Ok(horizon.sqrt() * (h.bhat_abs[0] + h.growth() * n) + chi * l * n)
}

/// Increment constant `m_{p,j}` with
/// `E[|Î_t - I_{t_j}|^p]^{1/p} <= m_{p,j} (t - t_j)^{1/2}`.
pub fn em_increment_bound(track: &HatTrack, grid: &Partition, p: f64, j: usize) -> Result<f64> {
    let times = grid.times();
    if j + 1 >= times.len() {
        return invalid(format!("step index {j} out of range"));
    }
    let tj = times[j];
    let h = track.at(tj)?;
    let chi = chi_factor(track.d(), p)?;
    increment_constant(&h, track.population.at(tj), grid.end(), chi)
}

/// Parameters of [`strong_error_bound`].
#[derive(Clone, Debug, PartialEq)]
pub struct StrongErrorParams {
    /// Moment order `p >= 2`.
    pub p: f64,
    /// Auxiliary order `q > 2p` of the empirical-measure estimate.
    pub q: f64,
    /// Number of particles `M`.
    pub particles: usize,
    /// Constant `c_{p,q}` of the empirical-measure estimate; no default.
    pub c_pq: Option<f64>,
    /// Hölder constants of the coefficients.
    pub holder: HolderConstants,
    /// `(α, ĉ_α)` when `N` is `α`-Hölder with constant `ĉ_α`, enabling the rate form.
    pub n_holder: Option<(f64, f64)>,
}

/// Constants of the mesh-rate form of the strong error bound.
#[derive(Clone, Debug, PartialEq)]
pub struct RateForm {
    /// Hölder exponent `α` of `N`.
    pub alpha: f64,
    /// `ĉ_p = exp((1/p) ∫_0^T λ̂_{p,k-1})`.
    pub c_p: f64,
    /// `ĉ_{p,0} = ∫_0^T λ̂_{k+1} N^p`.
    pub c_p0: f64,
    /// `ĉ_0 = M |T_n|^{2αp}`.
    pub c_0: f64,
    /// `ĉ_{α,0}`, the sampled supremum of `δ̂ / |T_n|^{αp}`.
    pub c_alpha0: f64,
    /// `ĉ_{p,q,α}`.
    pub c_pqa: f64,
    /// `ĉ_{p,q,α} |T_n|^α`.
    pub value: f64,
}

/// Result of [`strong_error_bound`].
#[derive(Clone, Debug, PartialEq)]
pub struct StrongErrorBound {
    /// Bound on `max_ℓ E[|Î_t - I_t|^p]`.
    pub pth: f64,
    /// `pth^{1/p}`.
    pub root: f64,
    /// Mesh-rate form, when the Hölder data of `N` are supplied.
    pub rate: Option<RateForm>,
}

struct ErrorTerms<'a> {
    track: &'a HatTrack,
    times: &'a [f64],
    p: f64,
    cp: f64,
    holder: &'a HolderConstants,
    n_nodes: Vec<f64>,
    m_nodes: Vec<f64>,
}

impl ErrorTerms<'_> {
    /// `λ_{p,i}(s)` for the node level `n_i`.
    fn lambda_pi(&self, s: f64, h: &HatCoeffs, n_i: f64) -> Result<f64> {
        let (p, cp) = (self.p, self.cp);
        let ns = h.y;
        let bbar1 = self.holder.drift_envelope(n_i);
        let bbar2 = h.slope_envelope(ns.max(n_i));
        let bhat_k4 = h.slope_envelope(ns);
        let lam = self.track.at_level(s, ns.max(n_i))?.lam_or_err()?;
        let l0 = self.holder.lambda0;
        Ok((p - 1.0) * (2.0 * bbar1 + bbar2)
            + (2.0 * p - 1.0) * bhat_k4
            + 3.0 * (p - 2.0) * cp * l0 * l0
            + 13.0 * (p - 1.0) * cp * lam * lam)
    }

    /// `λ̂_{p,j}(s) = max_{i<=j} λ_{p,i}(s) + (3p - 2) λ̂_{k+1}(s, N(s))`.
    fn lambda_hat(&self, s: f64, levels: &[f64]) -> Result<f64> {
        let h = self.track.at(s)?;
        let mut best = f64::NEG_INFINITY;
        for &n_i in levels {
            best = best.max(self.lambda_pi(s, &h, n_i)?);
        }
        Ok(best + (3.0 * self.p - 2.0) * h.lamhat4)
    }

    /// `δ̂(s)` on `[t_i, t_{i+1}]`.
    fn delta_hat(&self, s: f64, i: usize) -> Result<f64> {
        let (p, cp) = (self.p, self.cp);
        let h = self.track.at(s)?;
        let ns = h.y;
        let n_i = self.n_nodes[i];
        let bbar1 = self.holder.drift_envelope(n_i);
        let lam = self.track.at_level(s, ns.max(n_i))?.lam_or_err()?;
        let l0 = self.holder.lambda0;
        let d1 = bbar1 + 6.0 * cp * l0 * l0;
        let d2 = bbar1 + h.slope_envelope(ns.max(n_i)) + 1.5 * cp * lam * lam;
        let d3 = h.slope_envelope(ns) + 12.0 * cp * lam * lam;
        let mp = self.m_nodes[i].powf(p);
        let dt = (s - self.times[i]).max(0.0).powf(0.5 * p);
        Ok((d1 + d3 * mp) * dt + d2 * (ns - n_i).abs().powf(p) + h.lamhat4 * mp * dt)
    }
}

fn distinct_levels(levels: &[f64]) -> Vec<f64> {
    let mut v = levels.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Strong `L^p` error bound for the interpolated particle scheme at time `t`:
///
/// `e^{∫_0^t λ̂_{p,j}} ∫_0^t (δ̂_{p,j}(s) + 2 c_{p,q} λ̂_{k+1}(s,N(s)) N(s)^p M^{-1/2}) ds`
///
/// where `t in [t_j, t_{j+1}]`. The function `δ̂_{p,j}` is assembled
/// interval by interval from `δ_{p,i}` and the measure-Lipschitz term on
/// `[t_i, t_{i+1}]`, and `λ̂_{p,j}` takes the maximum of `λ_{p,i}` over the
/// node levels `N(t_i)`, `i <= j`.
pub fn strong_error_bound(
    track: &HatTrack,
    grid: &Partition,
    params: &StrongErrorParams,
    t: f64,
) -> Result<StrongErrorBound> {
    let p = params.p;
    if !(p >= 2.0) {
        return invalid(format!("strong error bound needs p >= 2, got {p}"));
    }
    if !(params.q > 2.0 * p) {
        return invalid(format!("strong error bound needs q > 2p, got q = {}", params.q));
    }
    let c_pq = params
        .c_pq
        .ok_or_else(|| Error::InvalidInput("c_pq must be supplied; it has no default".into()))?;
    if !(c_pq >= 0.0 && c_pq.is_finite()) {
        return invalid("c_pq must be finite and nonnegative");
    }
    if params.particles == 0 {
        return invalid("need at least one particle");
    }
    params.holder.validate()?;
    let times = grid.times();
    let k = times.len() - 1;
    let horizon = grid.end();
    if !(t >= 0.0 && t <= horizon * (1.0 + 1e-12)) {
        return invalid(format!("t = {t} outside [0, {horizon}]"));
    }
    let j = match times.iter().rposition(|&ti| ti <= t) {
        Some(i) => i.min(k - 1),
        None => 0,
    };
    let chi = chi_factor(track.d(), p)?;
    let n_nodes: Vec<f64> = times.iter().map(|&ti| track.population.at(ti)).collect();
    let mut m_nodes = Vec::with_capacity(k);
    for i in 0..k {
        m_nodes.push(increment_constant(&track.at(times[i])?, n_nodes[i], horizon, chi)?);
    }
    let terms = ErrorTerms {
        track,
        times,
        p,
        cp: c_p(p),
        holder: &params.holder,
        n_nodes,
        m_nodes,
    };
    let inv_sqrt_m = 1.0 / (params.particles as f64).sqrt();
    let interaction = |s: f64| -> Result<f64> {
        let h = track.at(s)?;
        Ok(h.lamhat4 * h.y.powf(p))
    };

    // Integrates a per-interval integrand over [0, upto] on the grid.
    let piecewise = |upto: f64, f: &dyn Fn(f64, usize) -> Result<f64>| -> Result<f64> {
        let mut acc = 0.0;
        for i in 0..k {
            let a = times[i];
            if a >= upto {
                break;
            }
            let b = times[i + 1].min(upto);
            acc += integrate_checked(|s| f(s, i), a, b)?;
        }
        Ok(acc)
    };

    let levels_j = distinct_levels(&terms.n_nodes[..=j]);
    let lam_int = piecewise(t, &|s, _| terms.lambda_hat(s, &levels_j))?;
    let delta_int = piecewise(t, &|s, i| terms.delta_hat(s, i))?;
    let inter_int = piecewise(t, &|s, _| interaction(s))?;
    let pth = ensure_finite(
        lam_int.exp() * (delta_int + 2.0 * c_pq * inter_int * inv_sqrt_m),
        "strong error bound",
    )?
    .max(0.0);

    let rate = match params.n_holder {
        None => None,
        Some((alpha, c_alpha)) => {
            if !(alpha > 0.0 && alpha <= 0.5) || !(c_alpha >= 0.0) {
                return invalid("rate form needs alpha in (0, 1/2] and c_alpha >= 0");
            }
            for w in times.windows(2) {
                let gap = (track.population.at(w[1]) - track.population.at(w[0])).abs();
                if gap > c_alpha * (w[1] - w[0]).powf(alpha) * (1.0 + 1e-9) + 1e-12 {
                    return invalid("N violates the supplied Hölder condition on the grid");
                }
            }
            let mesh = grid.mesh();
            let levels_all = distinct_levels(&terms.n_nodes[..k]);
            let lam_total = piecewise(horizon, &|s, _| terms.lambda_hat(s, &levels_all))?;
            let c_p_hat = (lam_total / p).exp();
            let c_p0 = piecewise(horizon, &|s, _| interaction(s))?;
            let c_0 = params.particles as f64 * mesh.powf(2.0 * alpha * p);
            let mut sup_delta = 0.0f64;
            for i in 0..k {
                for r in 0..=8 {
                    let s = times[i] + (times[i + 1] - times[i]) * r as f64 / 8.0;
                    sup_delta = sup_delta.max(terms.delta_hat(s, i)?);
                }
            }
            let c_alpha0 = sup_delta / mesh.powf(alpha * p);
            let c_pqa = c_p_hat * (c_alpha0 * horizon + 2.0 * c_pq * c_0.powf(-0.5) * c_p0).powf(1.0 / p);
            Some(RateForm {
                alpha,
                c_p: c_p_hat,
                c_p0,
                c_0,
                c_alpha0,
                c_pqa,
                value: c_pqa * mesh.powf(alpha),
            })
        }
    };
    Ok(StrongErrorBound {
        pth,
        root: pth.powf(1.0 / p),
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_factor_small_cases() {
        assert!((chi_factor(1, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((chi_factor(2, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn drift_envelope_is_polynomial() {
        let h = HolderConstants {
            drift: vec![1.0, 2.0, 3.0],
            lambda0: 0.0,
        };
        assert_eq!(h.drift_envelope(2.0), 1.0 + 4.0 + 12.0);
    }
}
