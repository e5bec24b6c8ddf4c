//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The process exits with a nonzero status when a criterion fails that is
//! not listed in `KNOWN_DEVIATIONS`.

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{coef, f_power, grid_max, grid_smallest_zero, right_end, wasserstein_permutations};
use mvsis::asymptotics::*;
use mvsis::harness::*;
use mvsis::measures::{from_samples, wasserstein};
use mvsis::model::{Family, SimulatedModelParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Criteria whose failure is expected and explained in the README.
const KNOWN_DEVIATIONS: &[u32] = &[6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn level(alpha: f64, alpha_mean: Option<f64>) -> f64 {
    let mut lim = LimitData::simulated(&SimulatedModelParams::persistence_regime(alpha));
    if let Some(am) = alpha_mean {
        lim = lim.with_alpha_mean_limit(am);
    }
    let r = persistence_levels_default(&lim, Family::Gghmp).expect("persistence analysis");
    r.verdict.level().unwrap_or(f64::NAN)
}

fn criterion1() -> Outcome {
    let want = [(-0.08, 1.0203), (0.0, 9.1751), (0.5, 6.0786), (1.0, 4.5444)];
    let got: Vec<f64> = want.iter().map(|&(a, _)| level(a, None)).collect();
    let pass = want.iter().zip(&got).all(|(&(_, w), g)| (g - w).abs() <= 5e-5);
    outcome(pass, format!("levels {got:.7?}"))
}

fn criterion2() -> Outcome {
    let want = [(-0.08, -0.6840, 8.5379), (0.5, 8.0154, 16.0257), (1.0, 30.8548, 30.8561)];
    let got: Vec<f64> = want.iter().map(|&(a, m, _)| level(a, Some(m))).collect();
    let pass = want.iter().zip(&got).all(|(&(_, _, w), g)| (g - w).abs() <= 5e-5);
    outcome(pass, format!("levels {got:.7?}"))
}

fn criterion3() -> Outcome {
    let mut verdicts = Vec::new();
    let mut pass = true;
    for (alpha, extinct) in [(0.53, true), (0.54, false), (0.55, false)] {
        let lim = LimitData::simulated(&SimulatedModelParams::extinction_regime(alpha));
        let r = extinction_report(&lim, Family::Gghmp).expect("extinction analysis");
        pass &= matches!(r.verdict, Verdict::Extinct { .. }) == extinct;
        verdicts.push(format!("{alpha}:{}", r.verdict.name()));
    }
    let lim = LimitData::simulated(&SimulatedModelParams::extinction_regime(0.0));
    let r = extinction_report(&lim, Family::Gghmp).expect("extinction analysis");
    let h = r.h_inf.unwrap_or(f64::NAN);
    pass &= h == -27.0 && matches!(r.verdict, Verdict::Extinct { .. });
    outcome(pass, format!("{} h_inf(0) = {h}", verdicts.join(" ")))
}

fn criterion4() -> Outcome {
    const GRID: usize = 1_000_000;
    const INSTANCES: usize = 1000;
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst = [0.0f64; 4];
    for _ in 0..INSTANCES {
        let (a, b, c, d, y) = (coef(&mut rng), coef(&mut rng), coef(&mut rng), coef(&mut rng), right_end(&mut rng));
        let v = max_quadratic(a, b, c, y).0;
        worst[0] = worst[0].max((v - grid_max(|x| f_power(a, b, c, 0.0, y, x), y, GRID)).abs());
        let v = max_power32(a, b, d, y).0;
        worst[1] = worst[1].max((v - grid_max(|x| f_power(a, b, 0.0, d, y, x), y, GRID)).abs());
        let cn = -c.abs().max(1e-3);
        let v = max_quartic_power(a, b, cn, d, y).map(|r| r.0).unwrap_or(f64::NAN);
        let err = (v - grid_max(|x| f_power(a, b, cn, d, y, x), y, GRID)).abs();
        worst[2] = worst[2].max(if err.is_nan() { f64::INFINITY } else { err });
    }
    let mut zeros = 0;
    while zeros < INSTANCES {
        let (a, b, d, y) = (coef(&mut rng), coef(&mut rng), coef(&mut rng), right_end(&mut rng));
        let c = if rng.random::<bool>() { -rng.random_range(0.0..10.0) } else { 0.0 };
        let Ok(z) = zero_of_f(a, b, c, d, y, ZeroMode::Smallest) else { continue };
        zeros += 1;
        let err = match grid_smallest_zero(|x| f_power(a, b, c, d, y, x), y, GRID) {
            Some(o) => (z - o).abs(),
            None => f64::INFINITY,
        };
        worst[3] = worst[3].max(err);
    }
    let pass = worst.iter().all(|&w| w <= 1e-9);
    outcome(
        pass,
        format!(
            "max |closed - grid|: quadratic {:.1e}, power32 {:.1e}, quartic {:.1e}, zero {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=7);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (ma, mb) = (from_samples(&a).unwrap(), from_samples(&b).unwrap());
        for p in [1.0, 2.0, 3.0] {
            let w = wasserstein(&ma, &mb, p).unwrap();
            worst = worst.max((w - wasserstein_permutations(&a, &b, p)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |sorted - permutations| = {worst:.1e}"))
}

fn criterion6() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentId::Converge);
    let fit = run_convergence_study(&cfg).expect("convergence study");
    let errors: Vec<String> = fit.errors.iter().map(|e| format!("{e:.3}")).collect();
    outcome(
        (0.35..=0.65).contains(&fit.slope),
        format!("slope {:.3} on levels 4..9, errors [{}]", fit.slope, errors.join(", ")),
    )
}

fn supplementary_rate() -> String {
    let text = "T = 0.1\nlevels = [6, 10]\nreference_level = 14\nM = 1024";
    let cfg = ExperimentConfig::parse(ExperimentId::Converge, text).expect("config");
    match run_convergence_study(&cfg) {
        Ok(fit) => format!("slope {:.3} with T = 0.1, levels 6..10, reference level 14, M = 1024", fit.slope),
        Err(e) => format!("failed: {e}"),
    }
}

fn run_in(id: ExperimentId, text: &str, dir: &Path) -> Report {
    let mut cfg = ExperimentConfig::parse(id, text).expect("config");
    cfg.out_dir = dir.to_path_buf();
    run_experiment(&cfg).expect("experiment").report
}

fn criterion7(dir: &Path) -> Outcome {
    let r = run_in(ExperimentId::Lyapunov, "", dir);
    let m = r.get_f64("run0.median_slope").unwrap_or(f64::NAN);
    outcome(
        (-35.0..=-19.0).contains(&m),
        format!(
            "median slope {m:.3} ({} fitted, {} excluded), target -27",
            r.get("run0.fitted").unwrap_or("?"),
            r.get("run0.excluded").unwrap_or("?")
        ),
    )
}

fn criterion8(dir: &Path) -> Outcome {
    let r = run_in(ExperimentId::Bounds, "", dir);
    let moments = r.get("run0.moments_within_bounds") == Some("true");
    let incs = r.get("run0.increments_within_bounds") == Some("true");
    outcome(
        moments && incs && r.get("all_within_bounds") == Some("true"),
        format!("moments within bounds: {moments}, increments within bounds: {incs}"),
    )
}

fn criterion9(dir: &Path) -> Outcome {
    let r = run_in(ExperimentId::Persistence, "", dir);
    let f = r.get_f64("ordered_fraction").unwrap_or(f64::NAN);
    outcome(f >= 0.99, format!("ordered fraction {f:.4}"))
}

fn criterion10(dir: &Path) -> Outcome {
    let configs = [
        (ExperimentId::Extinction, "T = 0.2\nsteps = 200\nM = 200"),
        (ExperimentId::Persistence, "T = 0.5\nsteps = 500\nM = 200"),
        (ExperimentId::Transition, "T = 0.5\nsteps = 500\nM = 100"),
        (ExperimentId::Converge, "M = 32\nlevels = [2, 5]\nreference_level = 8"),
        (ExperimentId::Lyapunov, "T = 0.5\nsteps = 500\nM = 200\nwindow_start = 0.1"),
        (ExperimentId::Bounds, "M = 500"),
        (ExperimentId::Analyze, ""),
    ];
    let mut compared = 0;
    for (id, text) in configs {
        let a = dir.join(format!("{}-a", id.name()));
        let b = dir.join(format!("{}-b", id.name()));
        run_in(id, text, &a);
        run_in(id, text, &b);
        let mut names: Vec<_> = std::fs::read_dir(&a)
            .expect("output directory")
            .map(|e| e.expect("entry").file_name())
            .collect();
        names.sort();
        for name in names {
            let (x, y) = (std::fs::read(a.join(&name)), std::fs::read(b.join(&name)));
            match (x, y) {
                (Ok(x), Ok(y)) if x == y => compared += 1,
                _ => return outcome(false, format!("{} differs for {}", name.to_string_lossy(), id.name())),
            }
        }
    }
    outcome(true, format!("{compared} files byte-identical across re-runs of all 7 experiments"))
}

fn fmt_time(d: Duration) -> String {
    if d.as_secs_f64() < 1.0 {
        format!("{:.3} ms", d.as_secs_f64() * 1e3)
    } else {
        format!("{:.1} s", d.as_secs_f64())
    }
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temporary directory");
    let dir = work.path();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(u32, &str, Check)> = vec![
        (1, "persistence levels (closed form)", Box::new(criterion1)),
        (2, "mean-limit persistence levels", Box::new(criterion2)),
        (3, "extinction threshold", Box::new(criterion3)),
        (4, "maximisation and zero oracle suite", Box::new(criterion4)),
        (5, "Wasserstein oracle suite", Box::new(criterion5)),
        (6, "strong convergence rate", Box::new(criterion6)),
        (7, "Lyapunov extinction check", Box::new(|| criterion7(&dir.join("lyapunov")))),
        (8, "moment-bound audits", Box::new(|| criterion8(&dir.join("bounds")))),
        (9, "coupled monotonicity in alpha", Box::new(|| criterion9(&dir.join("persistence")))),
        (10, "determinism", Box::new(|| criterion10(&dir.join("determinism")))),
    ];
    let (mut passed, mut known, mut unexpected) = (0, 0, 0);
    for (id, name, run) in &criteria {
        let start = Instant::now();
        let o = run();
        let elapsed = fmt_time(start.elapsed());
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {id}: {name}: {} [{elapsed}]", o.detail);
        if o.pass {
            passed += 1;
        } else if KNOWN_DEVIATIONS.contains(id) {
            known += 1;
            println!("      known deviation, see README (convergence rate)");
            if *id == 6 {
                let start = Instant::now();
                let info = supplementary_rate();
                println!("INFO criterion 6 supplementary: {info} [{}]", fmt_time(start.elapsed()));
            }
        } else {
            unexpected += 1;
        }
    }
    println!(
        "SUMMARY: {passed} passed, {} failed ({known} known deviation, {unexpected} unexpected)",
        known + unexpected
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
