//! Interacting-particle Euler-Maruyama scheme.
//!
//! Particles advance on a [`Partition`] of `[0, T]`. At each node the clipped
//! empirical measure of all particles is reduced once to [`MeasureStats`],
//! the drift coefficients are frozen, and every particle takes one explicit
//! step driven by increments of a counter-based [`BrownianDriver`].
//!
//! Increments are a pure function of `(seed, particle, coordinate, step)`,
//! and empirical means are computed with exact summation, so outputs are
//! bit-identical for any worker count and identical noise can be shared by
//! several models ([`coupled_sweep`]).

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::measures::{clip, ExactSum};
use crate::model::{eval_drift_poly, pow_exp, GeneralModel, MeasureStats};

/// Time partition `0 = t_0 < t_1 < ... < t_k = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    times: Vec<f64>,
    mesh: f64,
    step: Option<f64>,
}

/// Equidistant partition of `[0, t_end]` with `steps` steps and mesh exactly `t_end / steps`.
pub fn make_partition(t_end: f64, steps: usize) -> Result<Partition> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return invalid(format!("partition needs T > 0, got {t_end}"));
    }
    if steps == 0 {
        return invalid("partition needs at least one step");
    }
    let h = t_end / steps as f64;
    let mut times: Vec<f64> = (0..steps).map(|j| j as f64 * h).collect();
    times.push(t_end);
    Ok(Partition {
        times,
        mesh: h,
        step: Some(h),
    })
}

impl Partition {
    /// Partition from explicit nodes, which must start at 0 and increase strictly.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times[0] != 0.0 {
            return invalid("partition nodes must start at 0 and contain at least two nodes");
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("partition nodes must be finite and strictly increasing");
        }
        let mesh = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        Ok(Self {
            times,
            mesh,
            step: None,
        })
    }

    /// Nodes `t_0..t_k`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Largest step.
    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    /// Number of steps `k`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Final time `T`.
    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Length of step `j`; the stored exact step for equidistant partitions.
    pub fn step_len(&self, j: usize) -> f64 {
        match self.step {
            Some(h) => h,
            None => self.times[j + 1] - self.times[j],
        }
    }

    /// Index `j` with `t in [t_j, t_{j+1})`, or `k` when `t = T`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0 && t <= self.end()) {
            return None;
        }
        Some(self.times.partition_point(|&s| s <= t) - 1)
    }
}

const MAIN_TAG: u8 = 0;
const BRIDGE_TAG: u8 = 1;

/// Counter-based Brownian driver.
///
/// The standard normal `Z(ℓ, i, n)` for particle `ℓ`, coordinate `i` and fine
/// step `n` is produced by ChaCha8 keyed with the seed, on stream `ℓ`, at
/// word position `4 (n d + i)`, through the cosine branch of the Box-Muller
/// transform. A second key yields the bridge normals used by the
/// interpolated scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BrownianDriver {
    seed: u64,
    particles: usize,
    d: usize,
}

fn stream(seed: u64, tag: u8, particle: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = tag;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(particle as u64);
    rng
}

#[inline]
fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl BrownianDriver {
    /// Driver for `particles` particles with `d` coordinates.
    pub fn new(seed: u64, particles: usize, d: usize) -> Self {
        Self { seed, particles, d }
    }

    /// Seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of particles.
    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Number of Brownian coordinates.
    pub fn d(&self) -> usize {
        self.d
    }

    fn at(&self, tag: u8, particle: usize, coord: usize, fine: usize) -> f64 {
        let mut rng = stream(self.seed, tag, particle);
        rng.set_word_pos(4 * (fine as u128 * self.d as u128 + coord as u128));
        box_muller(&mut rng)
    }

    /// Standard normal `Z(ℓ, i, n)` of fine step `n`.
    pub fn normal(&self, particle: usize, coord: usize, fine: usize) -> f64 {
        self.at(MAIN_TAG, particle, coord, fine)
    }

    /// Independent standard normal of the bridge sub-stream.
    pub fn bridge_normal(&self, particle: usize, coord: usize, fine: usize) -> f64 {
        self.at(BRIDGE_TAG, particle, coord, fine)
    }

    /// Sequential generator of particle `ℓ`, positioned at fine step 0.
    pub fn particle_stream(&self, particle: usize) -> ChaCha8Rng {
        stream(self.seed, MAIN_TAG, particle)
    }

    /// Increment `W_{t_{j+1}} - W_{t_j}` for a step of length `h` split
    /// into `substeps` fine steps: `sqrt(h / r) * sum_s Z(ℓ, i, j r + s)`.
    pub fn increment(&self, particle: usize, coord: usize, j: usize, h: f64, substeps: usize) -> f64 {
        let mut sum = 0.0;
        for s in 0..substeps {
            sum += self.normal(particle, coord, j * substeps + s);
        }
        (h / substeps as f64).sqrt() * sum
    }

    /// `W_{t_j + θh} - W_{t_j}` consistent with [`BrownianDriver::increment`]:
    /// complete fine steps are summed and the Brownian bridge is sampled
    /// inside the fine step containing `t_j + θh`.
    pub fn partial_increment(&self, particle: usize, coord: usize, j: usize, h: f64, substeps: usize, theta: f64) -> f64 {
        let r = substeps as f64;
        let hf = h / r;
        let u = (theta * r).clamp(0.0, r);
        let s = (u.floor() as usize).min(substeps);
        if s == substeps {
            return self.increment(particle, coord, j, h, substeps);
        }
        let local = u - s as f64;
        let mut full = 0.0;
        for q in 0..s {
            full += self.normal(particle, coord, j * substeps + q);
        }
        let fine = j * substeps + s;
        let z = self.normal(particle, coord, fine);
        let zb = self.bridge_normal(particle, coord, fine);
        hf.sqrt() * full + local * hf.sqrt() * z + (local * (1.0 - local) * hf).sqrt() * zb
    }
}

/// Law of the initial values.
#[derive(Clone)]
pub enum InitialLaw {
    /// Every particle starts at the same value.
    Constant(f64),
    /// Particle `ℓ` starts at `f(ℓ)`.
    PerParticle(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl fmt::Debug for InitialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialLaw::Constant(c) => write!(f, "Constant({c})"),
            InitialLaw::PerParticle(_) => write!(f, "PerParticle(..)"),
        }
    }
}

impl InitialLaw {
    /// Initial value of particle `ℓ`.
    pub fn value(&self, particle: usize) -> f64 {
        match self {
            InitialLaw::Constant(c) => *c,
            InitialLaw::PerParticle(f) => f(particle),
        }
    }
}

/// Which particle paths are stored.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum Recording {
    /// Every particle.
    #[default]
    All,
    /// The listed particle indices.
    Subset(Vec<usize>),
    /// No paths; only means, statistics and the final state.
    None,
}

/// Simulation options.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimOptions {
    /// Paths to record.
    pub record: Recording,
    /// Number of fine driver steps per grid step.
    pub substeps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record: Recording::All,
            substeps: 1,
        }
    }
}

/// One model with its initial law, simulated against shared noise.
#[derive(Clone, Debug)]
pub struct RunSpec {
    /// Model.
    pub model: GeneralModel,
    /// Initial law.
    pub init: InitialLaw,
}

/// Output of one particle simulation.
#[derive(Clone, Debug)]
pub struct SimulationOutput {
    /// Time grid.
    pub grid: Partition,
    /// Identifier of the simulated model.
    pub model_id: String,
    /// Seed of the driver.
    pub seed: u64,
    /// Number of particles `M`.
    pub particles: usize,
    /// Dimension of the noise.
    pub d: usize,
    /// Fine driver steps per grid step.
    pub substeps: usize,
    /// Indices of the recorded particles, increasing.
    pub recorded: Vec<usize>,
    /// Recorded paths, one vector of `k + 1` values per recorded particle.
    pub paths: Vec<Vec<f64>>,
    /// Mean of the clipped particles at every node.
    pub empirical_means: Vec<f64>,
    /// Statistics of the clipped empirical measure at every node.
    pub stats: Vec<MeasureStats>,
    /// `N(t_j)` at every node.
    pub n_values: Vec<f64>,
    /// All particles at `T`.
    pub final_state: Vec<f64>,
    /// Number of particles that left `[0, N]` at some node.
    pub excursions: usize,
    /// Wall-clock duration of the run (shared by coupled runs).
    pub wall_time: Duration,
}

impl SimulationOutput {
    /// Recorded path of particle `ℓ`.
    pub fn path(&self, particle: usize) -> Option<&[f64]> {
        self.recorded
            .binary_search(&particle)
            .ok()
            .map(|r| self.paths[r].as_slice())
    }

    /// Driver that generated the noise.
    pub fn driver(&self) -> BrownianDriver {
        BrownianDriver::new(self.seed, self.particles, self.d)
    }
}

/// Simulates `M` particles of `model` on `grid`, recording every path.
pub fn simulate_particles(
    model: &GeneralModel,
    grid: &Partition,
    particles: usize,
    seed: u64,
    init: &InitialLaw,
) -> Result<SimulationOutput> {
    simulate_with(model, grid, particles, seed, init, &SimOptions::default())
}

/// Simulates one model with explicit options.
pub fn simulate_with(
    model: &GeneralModel,
    grid: &Partition,
    particles: usize,
    seed: u64,
    init: &InitialLaw,
    opts: &SimOptions,
) -> Result<SimulationOutput> {
    let runs = [RunSpec {
        model: model.clone(),
        init: init.clone(),
    }];
    Ok(simulate_runs(&runs, grid, particles, seed, opts)?.remove(0))
}

/// Simulates several models against bit-identical increments.
pub fn coupled_sweep(
    models: &[GeneralModel],
    grid: &Partition,
    particles: usize,
    seed: u64,
    init: &InitialLaw,
    opts: &SimOptions,
) -> Result<Vec<SimulationOutput>> {
    let runs: Vec<RunSpec> = models
        .iter()
        .map(|m| RunSpec {
            model: m.clone(),
            init: init.clone(),
        })
        .collect();
    simulate_runs(&runs, grid, particles, seed, opts)
}

/// Per-step frozen coefficients of one run.
struct Frozen {
    coeffs: Vec<f64>,
    n: f64,
    g: Vec<f64>,
}

struct RunShape {
    d: usize,
    m: usize,
    zeta: Vec<f64>,
    eta: Vec<f64>,
}

impl RunShape {
    fn new(model: &GeneralModel) -> Self {
        let spec = model.diffusion_spec();
        let (d, m) = (spec.d(), spec.m());
        let mut zeta = Vec::with_capacity(d * m);
        let mut eta = Vec::with_capacity(d * m);
        for i in 0..d {
            for j in 0..m {
                zeta.push(spec.zeta(i, j));
                eta.push(spec.eta(i, j));
            }
        }
        Self { d, m, zeta, eta }
    }

    fn freeze(&self, model: &GeneralModel, t: f64, stats: &MeasureStats) -> Result<Frozen> {
        let spec = model.diffusion_spec();
        let mut g = Vec::with_capacity(self.d * self.m);
        for i in 0..self.d {
            for j in 0..self.m {
                g.push(ensure_finite(spec.g(i, j).eval(t), "diffusion coefficient")?);
            }
        }
        Ok(Frozen {
            coeffs: model.drift_coefficients(t, stats)?,
            n: ensure_finite(model.population().at(t), "population")?,
            g,
        })
    }

    #[inline]
    fn step(&self, fr: &Frozen, x: f64, h: f64, dw: &[f64]) -> f64 {
        let mut next = x + eval_drift_poly(&fr.coeffs, x, fr.n) * h;
        let (xp, zp) = (x.max(0.0), (fr.n - x).max(0.0));
        for i in 0..self.d {
            let mut row = 0.0;
            for j in 0..self.m {
                let k = i * self.m + j;
                let g = fr.g[k];
                if g != 0.0 {
                    row += g * pow_exp(xp, self.zeta[k]) * pow_exp(zp, self.eta[k]);
                }
            }
            next += row * dw[i];
        }
        next
    }
}

const CHUNK: usize = 256;

/// Partial reductions of one chunk for every run.
struct ChunkSums {
    mean: Vec<ExactSum>,
    phi: Vec<Vec<ExactSum>>,
    first_bad: Option<usize>,
}

fn reduce_chunk(
    runs: &[RunSpec],
    states: &[f64],
    first_particle: usize,
    t: f64,
    n_values: &[f64],
) -> ChunkSums {
    let k = runs.len();
    let mut mean = vec![ExactSum::new(); k];
    let mut phi: Vec<Vec<ExactSum>> = runs.iter().map(|r| vec![ExactSum::new(); r.model.phis().len()]).collect();
    let mut first_bad = None;
    for (p, xs) in states.chunks(k).enumerate() {
        for (r, &x) in xs.iter().enumerate() {
            if !x.is_finite() {
                first_bad.get_or_insert(first_particle + p);
                continue;
            }
            let xc = clip(x, n_values[r]);
            mean[r].add(xc);
            for (q, f) in runs[r].model.phis().iter().enumerate() {
                phi[r][q].add(f(t, xc));
            }
        }
    }
    ChunkSums { mean, phi, first_bad }
}

fn node_stats(
    runs: &[RunSpec],
    states: &[f64],
    particles: usize,
    t: f64,
    n_values: &[f64],
    step: usize,
) -> Result<Vec<MeasureStats>> {
    let k = runs.len();
    let partial: Vec<ChunkSums> = states
        .par_chunks(CHUNK * k)
        .enumerate()
        .map(|(c, chunk)| reduce_chunk(runs, chunk, c * CHUNK, t, n_values))
        .collect();
    if let Some(bad) = partial.iter().filter_map(|c| c.first_bad).min() {
        return Err(Error::NumericAbort {
            step,
            particle: bad,
            detail: "particle state is not finite".into(),
        });
    }
    let mut out = Vec::with_capacity(k);
    for r in 0..k {
        let mut mean = ExactSum::new();
        let mut phis = vec![ExactSum::new(); runs[r].model.phis().len()];
        for c in &partial {
            mean.merge(&c.mean[r]);
            for (q, s) in c.phi[r].iter().enumerate() {
                phis[q].merge(s);
            }
        }
        let m = particles as f64;
        out.push(MeasureStats {
            mean: mean.value() / m,
            phi_means: phis.iter().map(|s| s.value() / m).collect(),
        });
    }
    Ok(out)
}

/// Simulates several (model, initial law) pairs against shared noise.
///
/// All runs use the increments of one [`BrownianDriver`] with the given
/// seed, so their differences are purely model-induced. Particles are not
/// clipped; only the drift argument is clipped to `[0, N]` and the diffusion
/// factors use positive parts.
pub fn simulate_runs(
    runs: &[RunSpec],
    grid: &Partition,
    particles: usize,
    seed: u64,
    opts: &SimOptions,
) -> Result<Vec<SimulationOutput>> {
    let start = Instant::now();
    if runs.is_empty() {
        return invalid("no model to simulate");
    }
    if particles == 0 {
        return invalid("need at least one particle");
    }
    if opts.substeps == 0 {
        return invalid("substeps must be at least 1");
    }
    let d = runs[0].model.diffusion_spec().d();
    if runs.iter().any(|r| r.model.diffusion_spec().d() != d) {
        return invalid("coupled runs need the same noise dimension");
    }
    let recorded: Vec<usize> = match &opts.record {
        Recording::All => (0..particles).collect(),
        Recording::None => Vec::new(),
        Recording::Subset(v) => {
            let mut v = v.clone();
            v.sort_unstable();
            v.dedup();
            if v.last().is_some_and(|&l| l >= particles) {
                return invalid("recorded particle index out of range");
            }
            v
        }
    };
    let k = runs.len();
    let shapes: Vec<RunShape> = runs.iter().map(|r| RunShape::new(&r.model)).collect();
    let driver = BrownianDriver::new(seed, particles, d);
    let times = grid.times();
    let steps = grid.steps();
    let r = opts.substeps;

    // State layout is particle-major: states[ℓ * k + run].
    let mut states = vec![0.0; particles * k];
    for l in 0..particles {
        for (q, run) in runs.iter().enumerate() {
            let v = run.init.value(l);
            if !v.is_finite() {
                return invalid(format!("initial value of particle {l} is not finite"));
            }
            states[l * k + q] = v;
        }
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..particles).map(|l| driver.particle_stream(l)).collect();
    let mut outside = vec![false; particles * k];

    let mut n_values: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); k];
    let mut stats: Vec<Vec<MeasureStats>> = vec![Vec::with_capacity(steps + 1); k];
    let mut paths: Vec<Vec<Vec<f64>>> = vec![vec![Vec::with_capacity(steps + 1); recorded.len()]; k];

    for j in 0..=steps {
        let t = times[j];
        let nj: Vec<f64> = runs
            .iter()
            .map(|run| ensure_finite(run.model.population().at(t), "population"))
            .collect::<Result<_>>()?;
        let st = node_stats(runs, &states, particles, t, &nj, j)?;
        for q in 0..k {
            n_values[q].push(nj[q]);
            for (ri, &l) in recorded.iter().enumerate() {
                paths[q][ri].push(states[l * k + q]);
            }
        }
        outside
            .par_chunks_mut(CHUNK * k)
            .zip(states.par_chunks(CHUNK * k))
            .for_each(|(flags, xs)| {
                for (i, (f, &x)) in flags.iter_mut().zip(xs).enumerate() {
                    if x < 0.0 || x > nj[i % k] {
                        *f = true;
                    }
                }
            });
        if j == steps {
            for q in 0..k {
                stats[q].push(st[q].clone());
            }
            break;
        }
        let frozen: Vec<Frozen> = runs
            .iter()
            .zip(&shapes)
            .zip(&st)
            .map(|((run, shape), s)| shape.freeze(&run.model, t, s))
            .collect::<Result<_>>()?;
        for q in 0..k {
            stats[q].push(st[q].clone());
        }
        let h = grid.step_len(j);
        let scale = (h / r as f64).sqrt();
        states
            .par_chunks_mut(CHUNK * k)
            .zip(rngs.par_chunks_mut(CHUNK))
            .for_each(|(xs, gens)| {
                let mut dw = vec![0.0; d];
                for (xp, rng) in xs.chunks_mut(k).zip(gens.iter_mut()) {
                    dw.iter_mut().for_each(|w| *w = 0.0);
                    for _ in 0..r {
                        for w in dw.iter_mut() {
                            *w += box_muller(rng);
                        }
                    }
                    for w in dw.iter_mut() {
                        *w *= scale;
                    }
                    for (q, x) in xp.iter_mut().enumerate() {
                        *x = shapes[q].step(&frozen[q], *x, h, &dw);
                    }
                }
            });
    }

    let wall = start.elapsed();
    let mut outputs = Vec::with_capacity(k);
    for (q, ((run, st), (nv, ps))) in runs
        .iter()
        .zip(stats)
        .zip(n_values.into_iter().zip(paths))
        .enumerate()
    {
        let final_state: Vec<f64> = (0..particles).map(|l| states[l * k + q]).collect();
        let excursions = (0..particles).filter(|&l| outside[l * k + q]).count();
        outputs.push(SimulationOutput {
            grid: grid.clone(),
            model_id: run.model.id().to_string(),
            seed,
            particles,
            d,
            substeps: r,
            recorded: recorded.clone(),
            paths: ps,
            empirical_means: st.iter().map(|s| s.mean).collect(),
            stats: st,
            n_values: nv,
            final_state,
            excursions,
            wall_time: wall,
        });
    }
    Ok(outputs)
}

/// Value of the interpolated scheme for particle `ℓ` at time `t`:
/// `I_{t_j} + b(t_j, I_{t_j}, L_j)(t - t_j) + f(t_j, I_{t_j})(W_t - W_{t_j})`.
///
/// The Brownian increment inside the step is replayed from the driver, so
/// the particle's path must have been recorded. At nodes the grid value is
/// returned exactly.
pub fn interpolated_value(output: &SimulationOutput, model: &GeneralModel, particle: usize, t: f64) -> Result<f64> {
    let grid = &output.grid;
    let j = grid
        .locate(t)
        .ok_or_else(|| Error::InvalidInput(format!("t = {t} outside [0, {}]", grid.end())))?;
    if particle >= output.particles {
        return invalid(format!("particle {particle} out of range"));
    }
    let path = output
        .path(particle)
        .ok_or_else(|| Error::Unavailable(format!("path of particle {particle} was not recorded")))?;
    let tj = grid.times()[j];
    if t == tj {
        return Ok(path[j]);
    }
    let x = path[j];
    let h = grid.step_len(j);
    let theta = (t - tj) / h;
    let shape = RunShape::new(model);
    let fr = shape.freeze(model, tj, &output.stats[j])?;
    let driver = output.driver();
    let dw: Vec<f64> = (0..output.d)
        .map(|i| driver.partial_increment(particle, i, j, h, output.substeps, theta))
        .collect();
    ensure_finite(shape.step(&fr, x, t - tj, &dw), "interpolated value")
}
