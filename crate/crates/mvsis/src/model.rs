//! Model definitions.
//!
//! A [`GeneralModel`] describes the one-dimensional McKean-Vlasov SDE
//!
//! ```text
//! dI_t = sum_{i=0}^{k} b_i(t, N(t), L(I_t)) I_t^i dt + f(t, I_t, N(t) - I_t) dW_t
//! ```
//!
//! with drift coefficients that depend on the law of the solution only
//! through a few statistics ([`MeasureStats`]) and a diffusion given as a sum
//! of power functions ([`PowerSumDiffusion`]). The tractable class and the
//! representative SIS family are built on top of it, together with the
//! Wang-Cai-Ding-Gui, Cai-Cai-Mao and Bernardi-Lanconelli presets and the
//! simulated stochastic SIS model.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::asymptotics::max_quadratic;
use crate::bounds::HatCoeffs;
use crate::engine::Partition;
use crate::error::{ensure_finite, invalid, Error, Result};

/// Shared scalar function of time.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Drift coefficient functional `(t, y, stats) -> b_i(t, y, nu)`.
pub type DriftCoeffFn = Arc<dyn Fn(f64, f64, &MeasureStats) -> f64 + Send + Sync>;

/// Function `(t, x) -> phi(t, x)` whose expectation enters the drift.
pub type PhiFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A real function of time with optional declared metadata.
///
/// Besides the closure itself a time function may carry its constant value
/// (enabling exact fast paths), its limit as `t` tends to infinity (used by
/// the asymptotic analysis) and a declared bound on the simulation horizon.
#[derive(Clone)]
pub struct TimeFunction {
    f: ScalarFn,
    constant: Option<f64>,
    limit: Option<f64>,
    bound: Option<f64>,
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "TimeFunction::constant({c})"),
            None => write!(f, "TimeFunction(limit = {:?}, bound = {:?})", self.limit, self.bound),
        }
    }
}

impl TimeFunction {
    /// Constant function; its limit is the constant itself.
    pub fn constant(c: f64) -> Self {
        Self {
            f: Arc::new(move |_| c),
            constant: Some(c),
            limit: Some(c),
            bound: Some(c.abs()),
        }
    }

    /// Arbitrary closure without declared metadata.
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            constant: None,
            limit: None,
            bound: None,
        }
    }

    /// Declares the limit as `t` tends to infinity.
    pub fn with_limit(mut self, limit: f64) -> Self {
        self.limit = Some(limit);
        self
    }

    /// Declares a bound on `|f|` over the simulation horizon.
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    /// Evaluates the function.
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self.constant {
            Some(c) => c,
            None => (self.f)(t),
        }
    }

    /// The constant value, if the function was built as a constant.
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    /// Declared limit at infinity.
    pub fn limit(&self) -> Option<f64> {
        self.limit
    }

    /// Declared bound on the horizon.
    pub fn bound(&self) -> Option<f64> {
        self.bound
    }

    /// Pointwise map; constants and limits are carried through `op`.
    pub fn map(&self, op: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static) -> Self {
        if let Some(c) = self.constant {
            return Self::constant(op(c));
        }
        let f = self.f.clone();
        let op2 = op.clone();
        Self {
            f: Arc::new(move |t| op2(f(t))),
            constant: None,
            limit: self.limit.map(&op),
            bound: None,
        }
    }

    /// Pointwise combination of two functions.
    pub fn zip(
        &self,
        other: &TimeFunction,
        op: impl Fn(f64, f64) -> f64 + Send + Sync + Clone + 'static,
    ) -> Self {
        if let (Some(a), Some(b)) = (self.constant, other.constant) {
            return Self::constant(op(a, b));
        }
        let (f, g) = (self.f.clone(), other.f.clone());
        let op2 = op.clone();
        Self {
            f: Arc::new(move |t| op2(f(t), g(t))),
            constant: None,
            limit: match (self.limit, other.limit) {
                (Some(a), Some(b)) => Some(op(a, b)),
                _ => None,
            },
            bound: None,
        }
    }

    /// Checks finiteness and the declared bound at the given times and
    /// returns the first offending time otherwise.
    pub fn check_on(&self, times: &[f64], name: &str) -> Result<()> {
        for &t in times {
            let v = self.eval(t);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name}({t}) = {v}")));
            }
            if let Some(b) = self.bound {
                if v.abs() > b * (1.0 + 1e-12) + 1e-300 {
                    return invalid(format!("{name}({t}) = {v} exceeds declared bound {b}"));
                }
            }
        }
        Ok(())
    }
}

/// Population size `N` together with its derivative.
#[derive(Clone, Debug)]
pub struct PopulationFunction {
    /// Population size (millions).
    pub n: TimeFunction,
    /// Derivative of the population size (millions per day).
    pub dn: TimeFunction,
}

impl PopulationFunction {
    /// Constant population; the derivative is identically zero.
    pub fn constant(n: f64) -> Self {
        Self {
            n: TimeFunction::constant(n),
            dn: TimeFunction::constant(0.0),
        }
    }

    /// Time-dependent population with an analytic derivative.
    pub fn new(n: TimeFunction, dn: TimeFunction) -> Self {
        Self { n, dn }
    }

    /// Population size at `t`.
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.n.eval(t)
    }

    /// Derivative at `t`.
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        self.dn.eval(t)
    }

    /// Returns the constant population size, if any.
    pub fn as_constant(&self) -> Option<f64> {
        match (self.n.as_constant(), self.dn.as_constant()) {
            (Some(n), Some(0.0)) => Some(n),
            _ => None,
        }
    }

    /// Checks positivity and consistency of the derivative at the given times
    /// by comparing central difference quotients against `dN`.
    pub fn check_on(&self, times: &[f64]) -> Result<()> {
        for &t in times {
            let n = ensure_finite(self.at(t), "N(t)")?;
            if n <= 0.0 {
                return invalid(format!("population N({t}) = {n} is not positive"));
            }
            if self.as_constant().is_some() {
                continue;
            }
            let dn = ensure_finite(self.derivative(t), "dN(t)")?;
            let h = 1e-5 * t.abs().max(1.0);
            let lo = (t - h).max(0.0);
            let hi = t + h;
            let quotient = (self.at(hi) - self.at(lo)) / (hi - lo);
            let scale = dn.abs().max(quotient.abs()).max(n * 1e-3).max(1e-8);
            if (quotient - dn).abs() > 1e-3 * scale {
                return invalid(format!(
                    "dN({t}) = {dn} disagrees with the difference quotient {quotient}"
                ));
            }
        }
        Ok(())
    }
}

/// Statistics of a (clipped) measure on which the drift depends.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasureStats {
    /// Mean of the clipped measure.
    pub mean: f64,
    /// Expectations of the model's phi functions, in declaration order.
    pub phi_means: Vec<f64>,
}

impl MeasureStats {
    /// Statistics carrying only a mean.
    pub fn from_mean(mean: f64) -> Self {
        Self {
            mean,
            phi_means: Vec::new(),
        }
    }
}

#[inline]
pub(crate) fn pow_exp(v: f64, e: f64) -> f64 {
    if e == 1.0 {
        v
    } else if e == 0.5 {
        v.sqrt()
    } else if e == 2.0 {
        v * v
    } else if e == 0.0 {
        1.0
    } else {
        v.powf(e)
    }
}

/// Diffusion `f_i(s, x, y) = sum_j g_ij(s) x^zeta_ij y^eta_ij`.
#[derive(Clone, Debug)]
pub struct PowerSumDiffusion {
    d: usize,
    m: usize,
    g: Vec<TimeFunction>,
    zeta: Vec<f64>,
    eta: Vec<f64>,
}

impl PowerSumDiffusion {
    /// Builds the diffusion from row-major `d x m` grids.
    pub fn new(d: usize, m: usize, g: Vec<TimeFunction>, zeta: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        if d == 0 || m == 0 {
            return invalid("diffusion needs at least one row and one term");
        }
        if g.len() != d * m || zeta.len() != d * m || eta.len() != d * m {
            return invalid(format!("diffusion grids must have {} entries", d * m));
        }
        for (name, grid) in [("zeta", &zeta), ("eta", &eta)] {
            if let Some(e) = grid.iter().find(|e| !(**e >= 0.5) || !e.is_finite()) {
                return invalid(format!("exponent {name} = {e} is below 1/2"));
            }
        }
        Ok(Self { d, m, g, zeta, eta })
    }

    /// Identically vanishing one-dimensional diffusion.
    pub fn zero() -> Self {
        Self {
            d: 1,
            m: 1,
            g: vec![TimeFunction::constant(0.0)],
            zeta: vec![1.0],
            eta: vec![1.0],
        }
    }

    /// Number of Brownian coordinates.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of terms per row.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Coefficient `g_ij`.
    pub fn g(&self, i: usize, j: usize) -> &TimeFunction {
        &self.g[i * self.m + j]
    }

    /// Exponent `zeta_ij`.
    pub fn zeta(&self, i: usize, j: usize) -> f64 {
        self.zeta[i * self.m + j]
    }

    /// Exponent `eta_ij`.
    pub fn eta(&self, i: usize, j: usize) -> f64 {
        self.eta[i * self.m + j]
    }

    /// True when every term with a coefficient that is not constantly zero
    /// has both exponents at least one, the Lipschitz regime.
    pub fn is_lipschitz(&self) -> bool {
        (0..self.g.len())
            .filter(|&k| self.g[k].as_constant() != Some(0.0))
            .all(|k| self.zeta[k] >= 1.0 && self.eta[k] >= 1.0)
    }

    /// Evaluates row `i` at `(t, x, z)` with positive parts of `x` and `z`.
    pub fn row(&self, i: usize, t: f64, x: f64, z: f64) -> f64 {
        let (xp, zp) = (x.max(0.0), z.max(0.0));
        (0..self.m)
            .map(|j| {
                let k = i * self.m + j;
                self.g[k].eval(t) * pow_exp(xp, self.zeta[k]) * pow_exp(zp, self.eta[k])
            })
            .sum()
    }

    /// All rows at `(t, x, z)`.
    pub fn eval(&self, t: f64, x: f64, z: f64) -> Vec<f64> {
        (0..self.d).map(|i| self.row(i, t, x, z)).collect()
    }
}

/// Model families with named presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Wang, Cai, Ding and Gui (M.1).
    Wang,
    /// Cai, Cai and Mao (M.2).
    Cai,
    /// Bernardi and Lanconelli (M.3).
    Bernardi,
    /// Stochastic SIS model used in the numerical experiments.
    Gghmp,
    /// Representative SIS family with user-supplied coefficients.
    Representative,
    /// Tractable class with affine or user-supplied phi functions.
    Tractable,
    /// Raw coefficient functionals.
    General,
}

impl Family {
    /// Configuration name of the family.
    pub fn name(&self) -> &'static str {
        match self {
            Family::Wang => "wang",
            Family::Cai => "cai",
            Family::Bernardi => "bernardi",
            Family::Gghmp => "gghmp",
            Family::Representative => "representative",
            Family::Tractable => "tractable",
            Family::General => "general",
        }
    }

    /// True for families whose coefficients have the representative form.
    pub fn is_representative(&self) -> bool {
        matches!(
            self,
            Family::Wang | Family::Cai | Family::Bernardi | Family::Gghmp | Family::Representative
        )
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wang" => Family::Wang,
            "cai" => Family::Cai,
            "bernardi" => Family::Bernardi,
            "gghmp" => Family::Gghmp,
            "representative" => Family::Representative,
            "tractable" => Family::Tractable,
            "general" => Family::General,
            other => return Err(Error::Config(format!("unknown model preset '{other}'"))),
        })
    }
}

/// Coefficients of the representative SIS family.
#[derive(Clone, Debug)]
pub struct RepresentativeParams {
    /// Transmission through the mean of the infected (nonnegative).
    pub beta0: TimeFunction,
    /// Baseline transmission rate (nonnegative).
    pub beta: TimeFunction,
    /// Recovery rate (nonnegative).
    pub gamma: TimeFunction,
    /// Death rate (nonnegative).
    pub mu: TimeFunction,
    /// Signed interaction rate multiplying `E[I]/N`.
    pub beta1: TimeFunction,
    /// Cubic drift coefficient `c_12`.
    pub c12: TimeFunction,
    /// Cubic drift coefficient `c_21`.
    pub c21: TimeFunction,
    /// Cubic drift coefficient `c_22`.
    pub c22: TimeFunction,
    /// Diffusion coefficient with exponent one.
    pub g11: TimeFunction,
    /// Diffusion coefficient with exponent `eta0` in the first row.
    pub g12: TimeFunction,
    /// Diffusion coefficient with exponent `eta0` in the second row.
    pub g21: TimeFunction,
    /// Common exponent of `g12` and `g21`, either 1/2 or 1.
    pub eta0: f64,
    /// Population size.
    pub population: PopulationFunction,
    /// Horizon on which nonnegativity of the rates is sampled.
    pub sample_horizon: f64,
}

impl RepresentativeParams {
    /// All coefficients zero with constant population `n` and `eta0 = 1`.
    pub fn zero(n: f64) -> Self {
        let z = TimeFunction::constant(0.0);
        Self {
            beta0: z.clone(),
            beta: z.clone(),
            gamma: z.clone(),
            mu: z.clone(),
            beta1: z.clone(),
            c12: z.clone(),
            c21: z.clone(),
            c22: z.clone(),
            g11: z.clone(),
            g12: z.clone(),
            g21: z,
            eta0: 1.0,
            population: PopulationFunction::constant(n),
            sample_horizon: 100.0,
        }
    }

    fn sample_times(&self) -> Vec<f64> {
        let h = self.sample_horizon.max(0.0);
        (0..=1000).map(|i| h * i as f64 / 1000.0).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.eta0 != 0.5 && self.eta0 != 1.0 {
            return invalid(format!("eta0 must be 1/2 or 1, got {}", self.eta0));
        }
        let times = self.sample_times();
        for (name, f) in [
            ("beta0", &self.beta0),
            ("beta", &self.beta),
            ("gamma", &self.gamma),
            ("mu", &self.mu),
        ] {
            for &t in &times {
                let v = f.eval(t);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("{name}({t}) = {v}")));
                }
                if v < 0.0 {
                    return invalid(format!("negative rate {name}({t}) = {v}"));
                }
                if f.as_constant().is_some() {
                    break;
                }
            }
        }
        for (name, f) in [
            ("beta1", &self.beta1),
            ("c12", &self.c12),
            ("c21", &self.c21),
            ("c22", &self.c22),
            ("g11", &self.g11),
            ("g12", &self.g12),
            ("g21", &self.g21),
        ] {
            f.check_on(&times, name)?;
        }
        self.population.check_on(&times)
    }

    /// Drift coefficients `b_0..b_3` at `(t, y)` for clipped mean `e`.
    pub fn drift_coefficients(&self, t: f64, y: f64, e: f64) -> [f64; 4] {
        let beta0 = self.beta0.eval(t);
        let beta = self.beta.eval(t);
        let beta1 = self.beta1.eval(t);
        let mg = self.mu.eval(t) + self.gamma.eval(t);
        let (c12, c21, c22) = (self.c12.eval(t), self.c21.eval(t), self.c22.eval(t));
        let ratio = if y > 0.0 { e / y } else { 0.0 };
        [
            beta0 * y * e,
            -mg + (beta1 - beta0) * e + beta * y + c12 * y * y,
            -beta1 * ratio - beta + c21 * y + c22 * y * y,
            -(c12 + c21 + c22 * y),
        ]
    }
}

/// Parameters of the stochastic SIS model used in the experiments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulatedModelParams {
    /// Population size (millions).
    pub n: f64,
    /// Transmission rate.
    pub beta: f64,
    /// Recovery rate.
    pub gamma: f64,
    /// Death rate.
    pub mu: f64,
    /// Noise intensity.
    pub sigma: f64,
    /// Relative strength of the mean-field interaction, `beta_1 = alpha beta`.
    pub alpha: f64,
    /// Initial number of infected (millions).
    pub i0: f64,
}

impl SimulatedModelParams {
    /// Extinction regime: `N = 100`, `beta = 0.5`, `gamma = 25`, `mu = 20`,
    /// `sigma = 0.08`.
    pub fn extinction_regime(alpha: f64) -> Self {
        Self {
            n: 100.0,
            beta: 0.5,
            gamma: 25.0,
            mu: 20.0,
            sigma: 0.08,
            alpha,
            i0: 50.0,
        }
    }

    /// Persistence regime: `N = 100`, `beta = 0.5`, `gamma = 25`, `mu = 20`,
    /// `sigma = 0.01`.
    pub fn persistence_regime(alpha: f64) -> Self {
        Self {
            sigma: 0.01,
            ..Self::extinction_regime(alpha)
        }
    }

    /// Validates the documented ranges.
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.n > 0.0) {
            return invalid(format!("N must be positive, got {}", p.n));
        }
        for (name, v) in [("beta", p.beta), ("gamma", p.gamma), ("mu", p.mu), ("sigma", p.sigma)] {
            if !(v >= 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !(p.alpha >= -1.0) || !p.alpha.is_finite() {
            return invalid(format!("alpha must be at least -1, got {}", p.alpha));
        }
        if !(p.i0 > 0.0 && p.i0 < p.n) {
            return invalid(format!("i0 must lie in (0, N), got {}", p.i0));
        }
        Ok(())
    }

    /// Representative coefficients: the Cai-Cai-Mao case `a = (1, 0, 1)`,
    /// `sigma_1 = sigma`, `sigma_2 = 0`.
    pub fn representative(&self) -> RepresentativeParams {
        CaiParams {
            beta: TimeFunction::constant(self.beta),
            beta1: TimeFunction::constant(self.alpha * self.beta),
            a: [
                TimeFunction::constant(1.0),
                TimeFunction::constant(0.0),
                TimeFunction::constant(1.0),
            ],
            sigma1: TimeFunction::constant(self.sigma),
            sigma2: TimeFunction::constant(0.0),
            mu: TimeFunction::constant(self.mu),
            gamma: TimeFunction::constant(self.gamma),
            population: PopulationFunction::constant(self.n),
        }
        .representative()
    }
}

/// Coefficients of the Wang-Cai-Ding-Gui model (M.1).
#[derive(Clone, Debug)]
pub struct WangParams {
    /// Initial transmission rate of the mean-reverting transmission.
    pub beta_init: f64,
    /// Equilibrium transmission rate.
    pub beta_e: f64,
    /// Mean-reversion speed (positive).
    pub theta: f64,
    /// Volatility of the transmission rate (positive).
    pub xi: f64,
    /// Interaction rate.
    pub beta1: TimeFunction,
    /// Death rate.
    pub mu: TimeFunction,
    /// Recovery rate.
    pub gamma: TimeFunction,
    /// Population size.
    pub population: PopulationFunction,
}

impl WangParams {
    /// Representative coefficients of the model.
    pub fn representative(&self) -> Result<RepresentativeParams> {
        if !(self.theta > 0.0) || !(self.xi > 0.0) {
            return invalid("theta and xi must be positive");
        }
        if !(self.beta_init >= 0.0) || !(self.beta_e >= 0.0) {
            return invalid("transmission rates must be nonnegative");
        }
        let (b0, be, theta, xi) = (self.beta_init, self.beta_e, self.theta, self.xi);
        let beta = TimeFunction::new(move |t| be + (b0 - be) * (-theta * t).exp())
            .with_limit(be)
            .with_bound(b0.max(be));
        let scale = xi / (2.0 * theta).sqrt();
        let g11 = TimeFunction::new(move |t| scale * (1.0 - (-2.0 * theta * t).exp()).sqrt())
            .with_limit(scale)
            .with_bound(scale);
        let mut p = RepresentativeParams::zero(1.0);
        p.beta = beta;
        p.beta1 = self.beta1.clone();
        p.mu = self.mu.clone();
        p.gamma = self.gamma.clone();
        p.g11 = g11;
        p.eta0 = 1.0;
        p.population = self.population.clone();
        Ok(p)
    }
}

/// Coefficients of the Cai-Cai-Mao model (M.2).
#[derive(Clone, Debug)]
pub struct CaiParams {
    /// Transmission rate.
    pub beta: TimeFunction,
    /// Interaction rate.
    pub beta1: TimeFunction,
    /// Correlation weights `a_1, a_2, a_3` with `a_1, a_3 >= 0`.
    pub a: [TimeFunction; 3],
    /// Noise intensity of the first Brownian motion.
    pub sigma1: TimeFunction,
    /// Noise intensity of the second Brownian motion.
    pub sigma2: TimeFunction,
    /// Death rate.
    pub mu: TimeFunction,
    /// Recovery rate.
    pub gamma: TimeFunction,
    /// Population size.
    pub population: PopulationFunction,
}

impl CaiParams {
    /// Representative coefficients of the model.
    pub fn representative(&self) -> RepresentativeParams {
        let mut p = RepresentativeParams::zero(1.0);
        p.beta = self.beta.clone();
        p.beta1 = self.beta1.clone();
        p.mu = self.mu.clone();
        p.gamma = self.gamma.clone();
        p.g11 = self.a[0].zip(&self.sigma1, |a, s| a * s);
        p.g12 = self.a[1].zip(&self.sigma2, |a, s| -a * s);
        p.g21 = self.a[2].zip(&self.sigma2, |a, s| -a * s);
        p.eta0 = 0.5;
        p.population = self.population.clone();
        p
    }
}

/// Coefficients of the Bernardi-Lanconelli model (M.3).
#[derive(Clone, Debug)]
pub struct BernardiParams {
    /// Transmission rate.
    pub beta: TimeFunction,
    /// Interaction rate.
    pub beta1: TimeFunction,
    /// Noise intensity.
    pub sigma: TimeFunction,
    /// Death rate.
    pub mu: TimeFunction,
    /// Recovery rate.
    pub gamma: TimeFunction,
    /// Population size.
    pub population: PopulationFunction,
}

impl BernardiParams {
    /// Representative coefficients of the model.
    pub fn representative(&self) -> RepresentativeParams {
        let mut p = RepresentativeParams::zero(1.0);
        p.beta = self.beta.clone();
        p.beta1 = self.beta1.clone();
        p.mu = self.mu.clone();
        p.gamma = self.gamma.clone();
        p.c12 = self.sigma.map(|s| 0.5 * s * s);
        p.c21 = self.sigma.map(|s| -1.5 * s * s);
        p.g11 = self.sigma.clone();
        p.eta0 = 1.0;
        p.population = self.population.clone();
        p
    }
}

/// Coefficients of the tractable class.
#[derive(Clone)]
pub struct TractableParams {
    /// Constant term `c_0 >= 0`.
    pub c0: TimeFunction,
    /// Coefficient `c_11`.
    pub c11: TimeFunction,
    /// Coefficient `c_12`.
    pub c12: TimeFunction,
    /// Coefficient `c_21`.
    pub c21: TimeFunction,
    /// Coefficient `c_22`.
    pub c22: TimeFunction,
    /// Functions `phi_0, phi_1, phi_2` whose expectations enter the drift.
    pub phi: [PhiFn; 3],
    /// Declared Lipschitz moduli `L_0, L_1, L_2` of the phi functions.
    pub lipschitz: [f64; 3],
    /// Diffusion coefficients `g_ij`, row-major 2 x 2.
    pub g: [TimeFunction; 4],
    /// Row exponents `zeta_1, zeta_2 >= 1`.
    pub zeta: [f64; 2],
    /// Exponents `eta_ij >= 1/2`, row-major 2 x 2.
    pub eta: [f64; 4],
    /// Population size.
    pub population: PopulationFunction,
}

impl fmt::Debug for TractableParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TractableParams")
            .field("lipschitz", &self.lipschitz)
            .field("zeta", &self.zeta)
            .field("eta", &self.eta)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
enum Structure {
    General,
    Tractable(Arc<TractableParams>),
    Representative(Arc<RepresentativeParams>),
}

/// Polynomial-drift McKean-Vlasov model.
#[derive(Clone)]
pub struct GeneralModel {
    id: String,
    family: Family,
    drift_coeffs: Vec<DriftCoeffFn>,
    phis: Vec<PhiFn>,
    diffusion: PowerSumDiffusion,
    population: PopulationFunction,
    structure: Structure,
}

impl fmt::Debug for GeneralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralModel")
            .field("id", &self.id)
            .field("family", &self.family)
            .field("k", &self.k())
            .field("diffusion", &self.diffusion)
            .finish_non_exhaustive()
    }
}

impl GeneralModel {
    /// Model from raw drift coefficient functionals `b_0..b_k` (`k >= 1`).
    ///
    /// The functionals receive `(t, N(t), stats)` where `stats` holds the
    /// clipped mean and the expectations of `phis` under the clipped measure.
    pub fn new(
        id: impl Into<String>,
        drift_coeffs: Vec<DriftCoeffFn>,
        phis: Vec<PhiFn>,
        diffusion: PowerSumDiffusion,
        population: PopulationFunction,
    ) -> Result<Self> {
        if drift_coeffs.len() < 2 {
            return invalid("drift degree k must be at least 1");
        }
        Ok(Self {
            id: id.into(),
            family: Family::General,
            drift_coeffs,
            phis,
            diffusion,
            population,
            structure: Structure::General,
        })
    }

    /// Identifier used in output metadata.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Replaces the identifier.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Model family.
    pub fn family(&self) -> Family {
        self.family
    }

    /// Drift degree `k`.
    pub fn k(&self) -> usize {
        self.drift_coeffs.len() - 1
    }

    /// Diffusion description.
    pub fn diffusion_spec(&self) -> &PowerSumDiffusion {
        &self.diffusion
    }

    /// Population function.
    pub fn population(&self) -> &PopulationFunction {
        &self.population
    }

    /// Functions whose means are collected in [`MeasureStats::phi_means`].
    pub fn phis(&self) -> &[PhiFn] {
        &self.phis
    }

    /// Representative coefficients, if the model belongs to that family.
    pub fn representative_params(&self) -> Option<&RepresentativeParams> {
        match &self.structure {
            Structure::Representative(p) => Some(p),
            _ => None,
        }
    }

    /// Tractable-class coefficients, if the model was built from them.
    pub fn tractable_params(&self) -> Option<&TractableParams> {
        match &self.structure {
            Structure::Tractable(p) => Some(p),
            _ => None,
        }
    }

    /// Statistics of the Dirac measure at `x` (clipped to `[0, N(t)]`).
    pub fn dirac_stats(&self, t: f64, x: f64) -> MeasureStats {
        let xc = x.max(0.0).min(self.population.at(t));
        MeasureStats {
            mean: xc,
            phi_means: self.phis.iter().map(|phi| phi(t, xc)).collect(),
        }
    }

    /// Drift coefficients `b_i(t, y, stats)` for `i = 0..=k`.
    pub fn drift_coefficients_at(&self, t: f64, y: f64, stats: &MeasureStats) -> Result<Vec<f64>> {
        self.drift_coeffs
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let v = b(t, y, stats);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!("drift coefficient b_{i}({t}) = {v}")))
                }
            })
            .collect()
    }

    /// Drift coefficients at `(t, N(t), stats)`.
    pub fn drift_coefficients(&self, t: f64, stats: &MeasureStats) -> Result<Vec<f64>> {
        self.drift_coefficients_at(t, self.population.at(t), stats)
    }
}

/// Builds the representative SIS model from its coefficients.
pub fn build_representative(params: RepresentativeParams) -> Result<GeneralModel> {
    build_representative_as(params, Family::Representative)
}

fn build_representative_as(params: RepresentativeParams, family: Family) -> Result<GeneralModel> {
    params.validate()?;
    let p = Arc::new(params);
    let coeff = |i: usize| -> DriftCoeffFn {
        let p = p.clone();
        Arc::new(move |t, y, s: &MeasureStats| p.drift_coefficients(t, y, s.mean)[i])
    };
    let drift_coeffs = (0..4).map(coeff).collect();
    let diffusion = PowerSumDiffusion::new(
        2,
        2,
        vec![
            p.g11.clone(),
            p.g12.clone(),
            p.g21.clone(),
            TimeFunction::constant(0.0),
        ],
        vec![1.0; 4],
        vec![1.0, p.eta0, p.eta0, 1.0],
    )?;
    Ok(GeneralModel {
        id: family.name().to_string(),
        family,
        drift_coeffs,
        phis: Vec::new(),
        diffusion,
        population: p.population.clone(),
        structure: Structure::Representative(p),
    })
}

/// Stochastic SIS model of the experiments (Cai-Cai-Mao with `a = (1,0,1)`
/// and `sigma_2 = 0`).
pub fn gghmp(params: &SimulatedModelParams) -> Result<GeneralModel> {
    params.validate()?;
    build_representative_as(params.representative(), Family::Gghmp)
}

/// Wang-Cai-Ding-Gui preset (M.1).
pub fn wang(params: &WangParams) -> Result<GeneralModel> {
    build_representative_as(params.representative()?, Family::Wang)
}

/// Cai-Cai-Mao preset (M.2).
pub fn cai(params: &CaiParams) -> Result<GeneralModel> {
    build_representative_as(params.representative(), Family::Cai)
}

/// Bernardi-Lanconelli preset (M.3).
pub fn bernardi(params: &BernardiParams) -> Result<GeneralModel> {
    build_representative_as(params.representative(), Family::Bernardi)
}

/// Builds a model of the tractable class.
pub fn build_tractable(params: TractableParams) -> Result<GeneralModel> {
    if params.zeta.iter().any(|&z| !(z >= 1.0)) {
        return invalid("tractable class needs zeta >= 1");
    }
    if params.lipschitz.iter().any(|&l| !(l >= 0.0)) {
        return invalid("Lipschitz moduli must be nonnegative");
    }
    let p = Arc::new(params);
    let mut zeta = Vec::with_capacity(4);
    for row in 0..2 {
        zeta.extend([p.zeta[row], p.zeta[row]]);
    }
    let diffusion = PowerSumDiffusion::new(2, 2, p.g.to_vec(), zeta, p.eta.to_vec())?;
    let (q0, q1, q2, q3) = (p.clone(), p.clone(), p.clone(), p.clone());
    let drift_coeffs: Vec<DriftCoeffFn> = vec![
        Arc::new(move |t, y, s: &MeasureStats| q0.c0.eval(t) + y * s.phi_means[0]),
        Arc::new(move |t, y, s: &MeasureStats| {
            s.phi_means[1] + q1.c11.eval(t) * y + q1.c12.eval(t) * y * y
        }),
        Arc::new(move |t, y, s: &MeasureStats| {
            let first = if y > 0.0 { s.phi_means[2] / y } else { 0.0 };
            first - q2.c11.eval(t) + q2.c21.eval(t) * y + q2.c22.eval(t) * y * y
        }),
        Arc::new(move |t, y, _s: &MeasureStats| {
            -(q3.c12.eval(t) + q3.c21.eval(t) + q3.c22.eval(t) * y)
        }),
    ];
    Ok(GeneralModel {
        id: Family::Tractable.name().to_string(),
        family: Family::Tractable,
        drift_coeffs,
        phis: p.phi.to_vec(),
        diffusion,
        population: p.population.clone(),
        structure: Structure::Tractable(p),
    })
}

/// Evaluates the clipped drift polynomial from precomputed coefficients.
#[inline]
pub fn eval_drift_poly(coeffs: &[f64], x: f64, n: f64) -> f64 {
    let xc = x.max(0.0).min(n);
    coeffs.iter().rev().fold(0.0, |acc, &b| acc * xc + b)
}

/// Drift `sum_i b_i(t, N(t), stats) (x^+ ∧ N(t))^i`.
pub fn drift(model: &GeneralModel, t: f64, x: f64, stats: &MeasureStats) -> Result<f64> {
    let n = model.population.at(t);
    let coeffs = model.drift_coefficients_at(t, n, stats)?;
    ensure_finite(eval_drift_poly(&coeffs, x, n), "drift")
}

/// Diffusion rows at `(t, x)` with `y = N(t) - x`, using positive parts.
pub fn diffusion(model: &GeneralModel, t: f64, x: f64) -> Result<Vec<f64>> {
    let n = model.population.at(t);
    let rows = model.diffusion.eval(t, x, n - x);
    for v in &rows {
        ensure_finite(*v, "diffusion")?;
    }
    Ok(rows)
}

/// Outcome of one sampled structural check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    /// Whether the condition held at every sample.
    pub holds: bool,
    /// First grid time at which the condition failed.
    pub first_violation: Option<f64>,
    /// Short description of the check or the failure.
    pub detail: String,
}

impl Check {
    fn pass(detail: &str) -> Self {
        Self {
            holds: true,
            first_violation: None,
            detail: detail.to_string(),
        }
    }

    fn fail(t: Option<f64>, detail: String) -> Self {
        Self {
            holds: false,
            first_violation: t,
            detail,
        }
    }
}

/// Results of the sampled structural checks.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    /// All exponents are at least 1/2.
    pub exponents_in_range: Check,
    /// All exponents are at least one (Lipschitz regime).
    pub lipschitz_regime: Check,
    /// The diffusion vanishes at `x = 0` and `x = N`.
    pub boundary_vanishing: Check,
    /// `dN >= c_0 + (phi_0 + phi_1 + phi_2)(x) N` on `[0, N]`; for the
    /// representative family this is `dN >= -(mu + gamma) N`.
    pub value_condition: Check,
    /// The strict value condition with the diffusion correction terms.
    pub strict_value_condition: Check,
    /// Both inequalities of the power-sum sufficient condition for
    /// interior solutions, checked over Dirac measures.
    pub power_sum_condition: Check,
}

impl ConditionReport {
    /// Named checks in a fixed order.
    pub fn entries(&self) -> [(&'static str, &Check); 6] {
        [
            ("exponents_in_range", &self.exponents_in_range),
            ("lipschitz_regime", &self.lipschitz_regime),
            ("boundary_vanishing", &self.boundary_vanishing),
            ("value_condition", &self.value_condition),
            ("strict_value_condition", &self.strict_value_condition),
            ("power_sum_condition", &self.power_sum_condition),
        ]
    }
}

const STATE_SAMPLES: usize = 101;
const CHECK_TOL: f64 = 1e-9;

fn state_grid(n: f64) -> impl Iterator<Item = f64> {
    (0..STATE_SAMPLES).map(move |i| n * i as f64 / (STATE_SAMPLES - 1) as f64)
}

fn phi_sum_at(model: &GeneralModel, t: f64, x: f64) -> Option<(f64, f64)> {
    match &model.structure {
        Structure::Representative(p) => Some((0.0, -(p.mu.eval(t) + p.gamma.eval(t)))),
        Structure::Tractable(p) => {
            let s: f64 = p.phi.iter().map(|phi| phi(t, x)).sum();
            Some((p.c0.eval(t), s))
        }
        Structure::General => None,
    }
}

/// Samples the structural conditions on the grid.
pub fn check_conditions(model: &GeneralModel, grid: &Partition) -> ConditionReport {
    let diff = &model.diffusion;
    let (d, m) = (diff.d(), diff.m());
    let exponents_in_range = Check::pass("all exponents >= 1/2");
    let lipschitz_regime = if diff.is_lipschitz() {
        Check::pass("all exponents >= 1")
    } else {
        Check::fail(None, "some exponent lies in [1/2, 1)".to_string())
    };

    let mut boundary = Check::pass("f(t, 0, N) = f(t, N, 0) = 0");
    let mut value = Check::pass("dN >= c0 + (phi0 + phi1 + phi2)(x) N");
    let mut strict = Check::pass("strict value condition");
    let mut power = Check::pass("power-sum condition");
    for &t in grid.times() {
        let n = model.population.at(t);
        let dn = model.population.derivative(t);
        if boundary.holds {
            let at_zero = diff.eval(t, 0.0, n);
            let at_n = diff.eval(t, n, 0.0);
            if at_zero.iter().chain(&at_n).any(|v| *v != 0.0) {
                boundary = Check::fail(Some(t), format!("diffusion does not vanish at t = {t}"));
            }
        }
        // Left-hand sides of the power-sum condition. The second one is also
        // the correction term of the strict value condition.
        let mut lhs_zero = 0.0;
        let mut lhs_n = 0.0;
        for i in 0..d {
            for j1 in 0..m {
                for j2 in 0..m {
                    let gp = (diff.g(i, j1).eval(t) * diff.g(i, j2).eval(t)).max(0.0);
                    let zs = diff.zeta(i, j1) + diff.zeta(i, j2);
                    let es = diff.eta(i, j1) + diff.eta(i, j2);
                    if zs < 2.0 {
                        lhs_zero += 0.5 * gp * n.powf(es);
                    }
                    if es < 2.0 {
                        lhs_n += 0.5 * gp * n.powf(zs);
                    }
                }
            }
        }
        let strict_extra = lhs_n;
        if phi_sum_at(model, t, 0.0).is_some() {
            for x in state_grid(n) {
                let (c0, s) = phi_sum_at(model, t, x).unwrap_or((0.0, 0.0));
                let rhs = c0 + s * n;
                let tol = CHECK_TOL * (1.0 + rhs.abs() + dn.abs());
                if value.holds && dn < rhs - tol {
                    value = Check::fail(Some(t), format!("dN = {dn} < {rhs} at t = {t}, x = {x}"));
                }
                if strict.holds && dn < rhs + strict_extra - tol {
                    strict = Check::fail(
                        Some(t),
                        format!("dN = {dn} < {} at t = {t}, x = {x}", rhs + strict_extra),
                    );
                }
            }
        } else if value.holds || strict.holds {
            value = Check::fail(None, "value condition needs tractable or representative structure".into());
            strict = value.clone();
        }
        if power.holds {
            for x in state_grid(n) {
                let stats = model.dirac_stats(t, x);
                let Ok(b) = model.drift_coefficients_at(t, n, &stats) else {
                    power = Check::fail(Some(t), format!("non-finite drift at t = {t}"));
                    break;
                };
                let b0 = b[0];
                let at_n: f64 = b.iter().rev().fold(0.0, |acc, &c| acc * n + c);
                let tol = CHECK_TOL * (1.0 + b0.abs() + at_n.abs() + dn.abs());
                if lhs_zero > b0 + tol || lhs_n > dn - at_n + tol {
                    power = Check::fail(
                        Some(t),
                        format!("power-sum condition fails at t = {t} for the Dirac measure at {x}"),
                    );
                    break;
                }
            }
        }
    }
    ConditionReport {
        exponents_in_range,
        lipschitz_regime,
        boundary_vanishing: boundary,
        value_condition: value,
        strict_value_condition: strict,
        power_sum_condition: power,
    }
}

/// Hat coefficients of a representative-family model at `(t, N(t))`.
pub fn hat_coefficients(model: &GeneralModel, t: f64) -> Result<HatCoeffs> {
    hat_coefficients_at(model, t, model.population.at(t))
}

/// Hat coefficients of a representative-family model at `(t, y)`.
///
/// The signed bounds `b̂_0..b̂_3` majorise the drift coefficients over all
/// measures supported in `[0, y]`; the absolute envelopes majorise their
/// moduli. The diffusion coefficients `l` and `λ` are available when all
/// nonzero diffusion terms share one exponent of at least one.
pub fn hat_coefficients_at(model: &GeneralModel, t: f64, y: f64) -> Result<HatCoeffs> {
    let p = model.representative_params().ok_or_else(|| {
        Error::Unavailable("hat coefficients need a representative-family model".into())
    })?;
    let beta0 = p.beta0.eval(t);
    let beta = p.beta.eval(t);
    let beta1 = p.beta1.eval(t);
    let mg = p.mu.eval(t) + p.gamma.eval(t);
    let (c12, c21, c22) = (p.c12.eval(t), p.c21.eval(t), p.c22.eval(t));
    let pos = |v: f64| v.max(0.0);
    let neg = |v: f64| (-v).max(0.0);

    let bhat0 = beta0 * y * y;
    let bhat1 = -mg + pos(beta1 - beta0) * y + beta * y + c12 * y * y;
    let bhat2 = neg(beta1) - beta + c21 * y + c22 * y * y;
    let bhat3 = -(c12 + c21 + c22 * y);

    let a1 = -mg + beta * y + c12 * y * y;
    let abs1 = a1.abs().max((a1 + (beta1 - beta0) * y).abs());
    let a2 = -beta + c21 * y + c22 * y * y;
    let abs2 = a2.abs().max((a2 - beta1).abs());
    let bhat_abs = [bhat0.abs(), abs1, abs2, bhat3.abs()];

    // Generic choices from the signed hats, valid without sign assumptions.
    let (generic4, _) = max_quadratic(bhat1, 2.0 * bhat2, 3.0 * bhat3, y);
    let (generic5, _) = max_quadratic(bhat1, bhat2, bhat3, y);
    let (bhat4, bhat5) = if c22 <= 0.0 && c12 + c21 <= 0.0 {
        let special4 = bhat1
            + neg(pos(beta1 - beta0) - neg(beta0 + beta1) + 2.0 * beta + (3.0 * c12 + c21) * y + c22 * y * y) * y;
        let special5 = bhat1 + neg(pos(beta1 - beta0) - neg(beta0) + beta + c12 * y) * y;
        (special4.min(generic4), special5.min(generic5))
    } else {
        (generic4, generic5)
    };
    let lamhat4 = (beta0.abs() + (beta1 - beta0).abs() + beta1.abs()) * y;

    let (g11, g12, g21) = (p.g11.eval(t), p.g12.eval(t), p.g21.eval(t));
    let exps: Vec<f64> = [(g11, 1.0), (g12, p.eta0), (g21, p.eta0)]
        .iter()
        .filter(|(g, _)| *g != 0.0)
        .map(|(_, e)| *e)
        .collect();
    let lam = if exps.is_empty() {
        Some(0.0)
    } else if exps.iter().all(|&e| e == exps[0]) && exps[0] >= 1.0 {
        Some(((g11 + g12).powi(2) + g21 * g21).sqrt() * y.powf(exps[0]))
    } else {
        None
    };

    let hc = HatCoeffs {
        y,
        bhat: [bhat0, bhat1, bhat2, bhat3],
        bhat_abs,
        bhat4,
        bhat5,
        lamhat4,
        l: lam,
        lam,
    };
    for v in hc.bhat.iter().chain(&hc.bhat_abs).chain([&hc.bhat4, &hc.bhat5, &hc.lamhat4]) {
        ensure_finite(*v, "hat coefficient")?;
    }
    Ok(hc)
}
