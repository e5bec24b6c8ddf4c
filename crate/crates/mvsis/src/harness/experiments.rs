//! Experiment runners, the convergence study and Lyapunov estimation.

use std::path::{Path, PathBuf};

use crate::asymptotics::{extinction_report, persistence_levels_default, AsymptoticReport, LimitData};
use crate::bounds::{em_increment_bound, em_moment_bound, first_moment_bound, pth_moment_bound, HatTrack};
use crate::engine::{make_partition, simulate_runs, InitialLaw, Recording, RunSpec, SimOptions, SimulationOutput};
use crate::error::{invalid, Error, Result};
use crate::harness::config::{ExperimentConfig, ExperimentId};
use crate::harness::csv::{emit_csv, Report, Table};
use crate::model::Family;

/// Upper bound on the number of particle series in `paths.csv`.
pub const MAX_PATH_SERIES: usize = 199;
/// Row budget of `paths.csv` when no stride is configured.
pub const DEFAULT_PATH_ROWS: usize = 1000;

/// Least-squares fit of `log error = intercept + slope log mesh`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    /// Tested meshes, strictly decreasing.
    pub meshes: Vec<f64>,
    /// Strong `L^p` errors against the reference, one per mesh.
    pub errors: Vec<f64>,
    /// Fitted slope.
    pub slope: f64,
    /// Fitted intercept.
    pub intercept: f64,
}

impl RateFit {
    /// Fits the log-log regression line.
    pub fn fit(meshes: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if meshes.len() != errors.len() || meshes.len() < 2 {
            return invalid("rate fit needs at least two (mesh, error) pairs");
        }
        if meshes.windows(2).any(|w| !(w[1] < w[0])) || !(meshes[meshes.len() - 1] > 0.0) {
            return invalid("meshes must be positive and strictly decreasing");
        }
        if errors.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::Inconclusive("strong errors must be positive and finite".into()));
        }
        let xs: Vec<f64> = meshes.iter().map(|m| m.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        let (slope, intercept) = least_squares(&xs, &ys);
        Ok(Self {
            meshes,
            errors,
            slope,
            intercept,
        })
    }

    /// Table with columns `mesh` and `error`.
    pub fn table(&self) -> Table {
        let mut t = Table::new("mesh", self.meshes.clone());
        t.push("error", self.errors.clone());
        t
    }
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    let slope = sxy / sxx;
    (slope, ym - slope * xm)
}

fn strong_error(coarse: &[f64], fine: &[f64], p: f64) -> f64 {
    let sum: f64 = coarse.iter().zip(fine).map(|(a, b)| (a - b).abs().powf(p)).sum();
    (sum / coarse.len() as f64).powf(1.0 / p)
}

/// Strong convergence study on the dyadic meshes `2^{-k} T`,
/// `k = levels.0 ..= levels.1`, against a self-coupled reference with mesh
/// `2^{-reference_level} T`.
///
/// Every coarse run consumes the same normal draws as the reference, summed
/// over the fine steps inside each coarse step, so all runs share one
/// Brownian path per particle. Uses the first sweep entry and first initial
/// value of `cfg`.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<RateFit> {
    let (lo, hi) = cfg.levels;
    let r = cfg.reference_level;
    if lo > hi || r < hi + 3 || r > 30 {
        return Err(Error::Config(format!(
            "convergence levels {lo}..={hi} with reference {r} do not form a dyadic chain with an 8x finer reference"
        )));
    }
    let alpha = cfg.sweep()[0];
    let i0 = cfg.i0s[0];
    let model = cfg.model.build(alpha, i0)?;
    let init = InitialLaw::Constant(i0);
    let run = |level: u32| -> Result<Vec<f64>> {
        let grid = make_partition(cfg.t_end, 1usize << level)?;
        let opts = SimOptions {
            record: Recording::None,
            substeps: 1usize << (r - level),
        };
        let runs = [RunSpec {
            model: model.clone(),
            init: init.clone(),
        }];
        Ok(simulate_runs(&runs, &grid, cfg.particles, cfg.seed, &opts)?.remove(0).final_state)
    };
    let reference = run(r)?;
    let mut meshes = Vec::new();
    let mut errors = Vec::new();
    for level in lo..=hi {
        let coarse = run(level)?;
        meshes.push(cfg.t_end / (1u64 << level) as f64);
        errors.push(strong_error(&coarse, &reference, cfg.p));
    }
    RateFit::fit(meshes, errors)
}

/// Per-particle Lyapunov slopes and their median.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEstimate {
    /// Indices of the fitted particles.
    pub particles: Vec<usize>,
    /// Least-squares slope of `log I_t` over the window, per fitted particle.
    pub slopes: Vec<f64>,
    /// Particles excluded because they left `(0, N]` on the window.
    pub excluded: usize,
    /// Median of the slopes.
    pub median: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lyapunov slopes of explicit paths sampled at `times`, with population
/// values `n_values` at the same times. `paths[i]` belongs to particle
/// `labels[i]`.
pub fn estimate_lyapunov_paths(
    times: &[f64],
    n_values: &[f64],
    paths: &[&[f64]],
    labels: &[usize],
    window: (f64, f64),
) -> Result<LyapunovEstimate> {
    let (ta, tb) = window;
    if !(ta < tb) {
        return invalid(format!("window [{ta}, {tb}] is empty"));
    }
    if n_values.len() != times.len() || labels.len() != paths.len() {
        return invalid("times, population values and labels must match the paths");
    }
    let tol = 1e-12 * tb.abs().max(1.0);
    let idx: Vec<usize> = (0..times.len())
        .filter(|&j| times[j] >= ta - tol && times[j] <= tb + tol)
        .collect();
    if idx.len() < 2 {
        return invalid("the window contains fewer than two grid times");
    }
    let xs: Vec<f64> = idx.iter().map(|&j| times[j]).collect();
    let mut particles = Vec::new();
    let mut slopes = Vec::new();
    let mut excluded = 0;
    let mut ys = vec![0.0; idx.len()];
    for (path, &label) in paths.iter().zip(labels) {
        if path.len() != times.len() {
            return invalid(format!("path of particle {label} has the wrong length"));
        }
        let inside = idx.iter().all(|&j| path[j] > 0.0 && path[j] <= n_values[j]);
        if !inside {
            excluded += 1;
            continue;
        }
        for (y, &j) in ys.iter_mut().zip(&idx) {
            *y = path[j].ln();
        }
        particles.push(label);
        slopes.push(least_squares(&xs, &ys).0);
    }
    if slopes.is_empty() {
        return Err(Error::Inconclusive("every path leaves (0, N] on the window".into()));
    }
    let median = median(&slopes);
    Ok(LyapunovEstimate {
        particles,
        slopes,
        excluded,
        median,
    })
}

/// Lyapunov slopes of the recorded particles of `output` over `window`.
pub fn estimate_lyapunov(output: &SimulationOutput, window: (f64, f64)) -> Result<LyapunovEstimate> {
    let paths: Vec<&[f64]> = output.paths.iter().map(Vec::as_slice).collect();
    estimate_lyapunov_paths(output.grid.times(), &output.n_values, &paths, &output.recorded, window)
}

/// Files and report produced by [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    /// Written files in creation order.
    pub files: Vec<PathBuf>,
    /// Contents of `report.txt`.
    pub report: Report,
}

struct Sweep {
    labels: Vec<String>,
    entries: Vec<(Option<f64>, f64)>,
    runs: Vec<RunSpec>,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn build_sweep(cfg: &ExperimentConfig) -> Result<Sweep> {
    let alphas = cfg.sweep();
    let mut labels = Vec::new();
    let mut entries = Vec::new();
    let mut runs = Vec::new();
    for &a in &alphas {
        for &i0 in &cfg.i0s {
            let mut parts = Vec::new();
            if let Some(a) = a {
                if alphas.len() > 1 || cfg.i0s.len() == 1 {
                    parts.push(format!("alpha={}", fmt_num(a)));
                }
            }
            if cfg.i0s.len() > 1 {
                parts.push(format!("i0={}", fmt_num(i0)));
            }
            labels.push(if parts.is_empty() { "base".to_string() } else { parts.join(";") });
            entries.push((a, i0));
            runs.push(RunSpec {
                model: cfg.model.build(a, i0)?,
                init: InitialLaw::Constant(i0),
            });
        }
    }
    Ok(Sweep { labels, entries, runs })
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn write_table(cfg: &ExperimentConfig, name: &str, table: &Table, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = out_path(cfg, name);
    emit_csv(table, &path)?;
    files.push(path);
    Ok(())
}

fn header(cfg: &ExperimentConfig, report: &mut Report) {
    report.push("experiment", cfg.experiment.name());
    report.push("model", cfg.model.preset.name());
    if cfg.model.preset == Family::Gghmp {
        report.push("params", cfg.model.regime);
    }
    for (k, v) in &cfg.model.values {
        report.push(format!("model.{k}"), fmt_num(*v));
    }
    report.push("T", fmt_num(cfg.t_end));
    report.push("steps", cfg.steps);
    report.push("M", cfg.particles);
    report.push("seed", cfg.seed);
}

fn recorded_count(cfg: &ExperimentConfig, runs: usize) -> usize {
    cfg.sample_paths.min(cfg.particles).min(MAX_PATH_SERIES / runs.max(1))
}

/// Row stride of `paths.csv`.
pub fn path_stride(cfg: &ExperimentConfig) -> usize {
    cfg.paths_every.unwrap_or_else(|| cfg.steps.div_ceil(DEFAULT_PATH_ROWS).max(1))
}

fn means_table(labels: &[String], outputs: &[SimulationOutput]) -> Table {
    let mut t = Table::new("time", outputs[0].grid.times().to_vec());
    for (label, out) in labels.iter().zip(outputs) {
        t.push(label.clone(), out.empirical_means.clone());
    }
    t
}

fn paths_table(cfg: &ExperimentConfig, labels: &[String], outputs: &[SimulationOutput]) -> Table {
    let stride = path_stride(cfg);
    let steps = outputs[0].grid.steps();
    let mut rows: Vec<usize> = (0..=steps).step_by(stride).collect();
    if rows.last() != Some(&steps) {
        rows.push(steps);
    }
    let times = outputs[0].grid.times();
    let mut t = Table::new("time", rows.iter().map(|&j| times[j]).collect());
    for (label, out) in labels.iter().zip(outputs) {
        for (path, &l) in out.paths.iter().zip(&out.recorded) {
            t.push(format!("{label}:particle={l}"), rows.iter().map(|&j| path[j]).collect());
        }
    }
    t
}

fn push_asymptotic(report: &mut Report, prefix: &str, what: &str, res: Result<AsymptoticReport>) {
    match res {
        Ok(a) => {
            report.push(format!("{prefix}.{what}.verdict"), a.verdict.name());
            if let Some(level) = a.verdict.level() {
                report.push(format!("{prefix}.{what}.level"), fmt_num(level));
            }
            if let Some(h) = a.h_inf {
                report.push(format!("{prefix}.{what}.h_inf"), fmt_num(h));
            }
            if let Some(r) = a.reproduction_ratio {
                report.push(format!("{prefix}.{what}.reproduction_ratio"), fmt_num(r));
            }
            for (k, v) in &a.entries {
                report.push(format!("{prefix}.{what}.{k}"), v);
            }
        }
        Err(e) => {
            report.push(format!("{prefix}.{what}.verdict"), "unavailable");
            report.push(format!("{prefix}.{what}.reason"), e);
        }
    }
}

fn push_analysis(cfg: &ExperimentConfig, report: &mut Report, prefix: &str, alpha: Option<f64>, i0: f64) -> Result<()> {
    let family = cfg.model.preset;
    match cfg.model.limits(alpha, i0)? {
        Some(lim) => {
            push_asymptotic(report, prefix, "extinction", extinction_report(&lim, family));
            push_asymptotic(report, prefix, "persistence", persistence_levels_default(&lim, family));
        }
        None => {
            report.push(format!("{prefix}.analysis"), "unavailable for the tractable class");
        }
    }
    Ok(())
}

fn persistence_from_mean(lim: LimitData, alpha: f64, mean: f64, family: Family) -> Result<AsymptoticReport> {
    persistence_levels_default(&lim.with_alpha_mean_limit(alpha * mean), family)
}

/// Fraction of grid steps at which the empirical means are nondecreasing
/// in alpha.
pub fn ordered_fraction(alphas: &[f64], means: &[&[f64]]) -> f64 {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[a].total_cmp(&alphas[b]));
    let steps = means[0].len();
    let ok = (0..steps)
        .filter(|&j| order.windows(2).all(|w| means[w[0]][j] <= means[w[1]][j]))
        .count();
    ok as f64 / steps as f64
}

fn run_paths_experiment(cfg: &ExperimentConfig, report: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let sweep = build_sweep(cfg)?;
    let grid = make_partition(cfg.t_end, cfg.steps)?;
    let per_run = recorded_count(cfg, sweep.runs.len());
    let opts = SimOptions {
        record: Recording::Subset((0..per_run).collect()),
        substeps: 1,
    };
    let outputs = simulate_runs(&sweep.runs, &grid, cfg.particles, cfg.seed, &opts)?;
    write_table(cfg, "means.csv", &means_table(&sweep.labels, &outputs), files)?;
    write_table(cfg, "paths.csv", &paths_table(cfg, &sweep.labels, &outputs), files)?;
    report.push("mesh", fmt_num(grid.mesh()));
    report.push("paths_every", path_stride(cfg));
    report.push("runs", sweep.runs.len());
    let tail_start = grid.steps() / 2;
    for (q, ((label, &(alpha, i0)), out)) in sweep.labels.iter().zip(&sweep.entries).zip(&outputs).enumerate() {
        let prefix = format!("run{q}");
        report.push(format!("{prefix}.label"), label);
        if let Some(a) = alpha {
            report.push(format!("{prefix}.alpha"), fmt_num(a));
        }
        report.push(format!("{prefix}.i0"), fmt_num(i0));
        report.push_f64(format!("{prefix}.final_mean"), *out.empirical_means.last().expect("nonempty"));
        report.push(format!("{prefix}.excursions"), out.excursions);
        match cfg.experiment {
            ExperimentId::Transition => {}
            _ => push_analysis(cfg, report, &prefix, alpha, i0)?,
        }
        if cfg.experiment == ExperimentId::Persistence {
            let tail = &out.empirical_means[tail_start..];
            let mean = tail.iter().sum::<f64>() / tail.len() as f64;
            report.push_f64(format!("{prefix}.tail_mean"), mean);
            if let (Some(a), Some(lim)) = (alpha, cfg.model.limits(alpha, i0)?) {
                report.push_f64(format!("{prefix}.alpha_mean_limit"), a * mean);
                let res = persistence_from_mean(lim, a, mean, cfg.model.preset);
                push_asymptotic(report, &prefix, "simulated_level", res);
            }
        }
    }
    if cfg.experiment == ExperimentId::Transition {
        report.push("verdict", "not assessed");
    }
    if cfg.alphas.len() > 1 && cfg.i0s.len() == 1 {
        let means: Vec<&[f64]> = outputs.iter().map(|o| o.empirical_means.as_slice()).collect();
        report.push_f64("ordered_fraction", ordered_fraction(&cfg.alphas, &means));
    }
    Ok(())
}

fn run_converge(cfg: &ExperimentConfig, report: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let fit = run_convergence_study(cfg)?;
    write_table(cfg, "ratefit.csv", &fit.table(), files)?;
    report.push("p", fmt_num(cfg.p));
    report.push("levels", format!("{}..{}", cfg.levels.0, cfg.levels.1));
    report.push("reference_level", cfg.reference_level);
    report.push_f64("reference_mesh", cfg.t_end / (1u64 << cfg.reference_level) as f64);
    report.push_f64("slope", fit.slope);
    report.push_f64("intercept", fit.intercept);
    Ok(())
}

fn run_lyapunov(cfg: &ExperimentConfig, report: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let sweep = build_sweep(cfg)?;
    let grid = make_partition(cfg.t_end, cfg.steps)?;
    let opts = SimOptions::default();
    let outputs = simulate_runs(&sweep.runs, &grid, cfg.particles, cfg.seed, &opts)?;
    write_table(cfg, "means.csv", &means_table(&sweep.labels, &outputs), files)?;
    report.push("window_start", fmt_num(cfg.window_start));
    report.push("window_end", fmt_num(cfg.t_end));
    for (q, ((label, &(alpha, i0)), out)) in sweep.labels.iter().zip(&sweep.entries).zip(&outputs).enumerate() {
        let prefix = format!("run{q}");
        report.push(format!("{prefix}.label"), label);
        let est = estimate_lyapunov(out, (cfg.window_start, cfg.t_end))?;
        report.push_f64(format!("{prefix}.median_slope"), est.median);
        report.push(format!("{prefix}.fitted"), est.slopes.len());
        report.push(format!("{prefix}.excluded"), est.excluded);
        if let Some(lim) = cfg.model.limits(alpha, i0)? {
            if let Ok(r) = extinction_report(&lim, cfg.model.preset) {
                if let Some(h) = r.h_inf {
                    report.push(format!("{prefix}.h_inf"), fmt_num(h));
                }
            }
        }
    }
    Ok(())
}

fn run_bounds(cfg: &ExperimentConfig, report: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let sweep = build_sweep(cfg)?;
    let grid = make_partition(cfg.t_end, cfg.steps)?;
    let outputs = simulate_runs(&sweep.runs, &grid, cfg.particles, cfg.seed, &SimOptions::default())?;
    let times = grid.times();
    let m = cfg.particles as f64;
    let mut audit = Table::new("time", times.to_vec());
    let mut incs = Table::new("time", times[..grid.steps()].to_vec());
    let mut all_ok = true;
    for (q, ((label, run), out)) in sweep.labels.iter().zip(&sweep.runs).zip(&outputs).enumerate() {
        let track = HatTrack::from_model(&run.model)?;
        let i0 = sweep.entries[q].1;
        let mut cols: [Vec<f64>; 7] = Default::default();
        let mut ok = true;
        for (j, &t) in times.iter().enumerate() {
            let (mut s1, mut s1q, mut s2, mut s2q) = (0.0, 0.0, 0.0, 0.0);
            for path in &out.paths {
                let x = path[j];
                let (a1, a2) = (x.abs(), x * x);
                s1 += a1;
                s1q += a1 * a1;
                s2 += a2;
                s2q += a2 * a2;
            }
            let (m1, m2) = (s1 / m, s2 / m);
            let se = |mean: f64, sq: f64| ((sq / m - mean * mean).max(0.0) / m).sqrt();
            let (se1, se2) = (se(m1, s1q), se(m2, s2q));
            let b1 = first_moment_bound(&track, t, i0)?;
            let b2 = pth_moment_bound(&track, 2.0, t, i0 * i0)?;
            let jj = j.min(grid.steps() - 1);
            let em2 = em_moment_bound(&track, &grid, 2.0, jj, t, i0 * i0)?;
            ok &= m1 - 3.0 * se1 <= b1 && m2 - 3.0 * se2 <= b2;
            for (c, v) in cols.iter_mut().zip([m1, se1, b1, m2, se2, b2, em2]) {
                c.push(v);
            }
        }
        let names = ["mc_m1", "se_m1", "bound_m1", "mc_m2", "se_m2", "bound_m2", "em_bound_m2"];
        for (name, c) in names.iter().zip(cols) {
            audit.push(format!("{label}:{name}"), c);
        }
        let mut inc_cols: [Vec<f64>; 4] = Default::default();
        let mut inc_ok = true;
        for j in 0..grid.steps() {
            let h = grid.step_len(j);
            for (k, p) in [1.0f64, 2.0].into_iter().enumerate() {
                let mut s = 0.0;
                let mut sq = 0.0;
                for path in &out.paths {
                    let v = (path[j + 1] - path[j]).abs().powf(p);
                    s += v;
                    sq += v * v;
                }
                let mc = s / m;
                let se = ((sq / m - mc * mc).max(0.0) / m).sqrt();
                let bound = em_increment_bound(&track, &grid, p, j)?.powf(p) * h.powf(0.5 * p);
                inc_ok &= mc - 3.0 * se <= bound;
                inc_cols[2 * k].push(mc);
                inc_cols[2 * k + 1].push(bound);
            }
        }
        let inc_names = ["mc_inc1", "bound_inc1", "mc_inc2", "bound_inc2"];
        for (name, c) in inc_names.iter().zip(inc_cols) {
            incs.push(format!("{label}:{name}"), c);
        }
        report.push(format!("run{q}.label"), label);
        report.push(format!("run{q}.moments_within_bounds"), ok);
        report.push(format!("run{q}.increments_within_bounds"), inc_ok);
        all_ok &= ok && inc_ok;
    }
    write_table(cfg, "audit.csv", &audit, files)?;
    write_table(cfg, "increments.csv", &incs, files)?;
    report.push("all_within_bounds", all_ok);
    Ok(())
}

fn run_analyze(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let i0 = cfg.i0s[0];
    for (q, alpha) in cfg.sweep().into_iter().enumerate() {
        let prefix = format!("run{q}");
        if let Some(a) = alpha {
            report.push(format!("{prefix}.alpha"), fmt_num(a));
        }
        push_analysis(cfg, report, &prefix, alpha, i0)?;
        if let (Some(a), Some(&am)) = (alpha, cfg.alpha_mean_limits.get(q)) {
            if let Some(lim) = cfg.model.limits(alpha, i0)? {
                report.push(format!("{prefix}.alpha_mean_limit"), fmt_num(am));
                let res = if a == 0.0 {
                    persistence_levels_default(&lim, cfg.model.preset)
                } else {
                    persistence_levels_default(&lim.with_alpha_mean_limit(am), cfg.model.preset)
                };
                push_asymptotic(report, &prefix, "simulated_level", res);
            }
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })
}

/// Runs one experiment and writes its files into `cfg.out_dir`.
///
/// `report.txt` is always written last. Simulation experiments write
/// `means.csv` and `paths.csv`, the convergence study writes
/// `ratefit.csv`, and the bounds audit writes `audit.csv` and
/// `increments.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    create_dir(&cfg.out_dir)?;
    let mut report = Report::default();
    let mut files = Vec::new();
    header(cfg, &mut report);
    match cfg.experiment {
        ExperimentId::Extinction | ExperimentId::Persistence | ExperimentId::Transition => {
            run_paths_experiment(cfg, &mut report, &mut files)?
        }
        ExperimentId::Converge => run_converge(cfg, &mut report, &mut files)?,
        ExperimentId::Lyapunov => run_lyapunov(cfg, &mut report, &mut files)?,
        ExperimentId::Bounds => run_bounds(cfg, &mut report, &mut files)?,
        ExperimentId::Analyze => run_analyze(cfg, &mut report)?,
    }
    let path = out_path(cfg, "report.txt");
    report.write(&path)?;
    files.push(path);
    Ok(ExperimentOutput { files, report })
}
