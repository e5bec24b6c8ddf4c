use mvsis::bounds::*;
use mvsis::engine::*;
use mvsis::model::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn params1_model() -> GeneralModel {
    gghmp(&SimulatedModelParams::extinction_regime(0.0)).unwrap()
}

fn params1_track() -> HatTrack {
    HatTrack::from_model(&params1_model()).unwrap()
}

fn constant_track(b0: f64, growth: f64, bhat4: f64, l: f64) -> HatTrack {
    HatTrack::constant(
        HatCoeffs::constant(10.0, [b0, growth, 0.0, 0.0], [b0.abs(), growth.abs(), 0.0, 0.0], bhat4, growth, l),
        1,
    )
}

fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

fn error_params(particles: usize, c_pq: Option<f64>) -> StrongErrorParams {
    StrongErrorParams {
        p: 2.0,
        q: 5.0,
        particles,
        c_pq,
        holder: HolderConstants::default(),
        n_holder: None,
    }
}

#[test]
fn first_moment_examples() {
    let zero = constant_track(0.0, 0.0, 0.0, 0.0);
    assert_eq!(first_moment_bound(&zero, 3.0, 7.0).unwrap(), 7.0);
    let (a, c, t, x0) = (2.0, 0.7, 1.3, 4.0);
    let got = first_moment_bound(&constant_track(a, c, 0.0, 0.0), t, x0).unwrap();
    let want = (c * t).exp() * x0 + a * ((c * t).exp() - 1.0) / c;
    assert!(close_rel(got, want, 1e-9), "{got} vs {want}");
    let hats = params1_track().at(0.0).unwrap();
    assert_eq!(hats.bhat5, 5.0);
    assert_eq!(hats.bhat[0], 0.0);
    let got = first_moment_bound(&params1_track(), 1.0, 50.0).unwrap();
    assert!(close_rel(got, 50.0 * 5f64.exp(), 1e-9));
}

#[test]
fn pth_moment_examples() {
    let track = params1_track();
    assert_eq!(track.at(0.0).unwrap().l, Some(8.0));
    for t in [0.01, 0.05, 0.1] {
        let got = pth_moment_bound(&track, 2.0, t, 2500.0).unwrap();
        assert!(close_rel(got, (74.0 * t).exp() * 2500.0, 1e-9));
    }
    // Without diffusion the rate is (p - 1) b0 + p c.
    let (a, c, t, x0) = (1.5, 0.4, 2.0, 3.0);
    let got = pth_moment_bound(&constant_track(a, c, 0.0, 0.0), 2.0, t, x0).unwrap();
    let r = a + 2.0 * c;
    let want = (r * t).exp() * x0 + a * ((r * t).exp() - 1.0) / r;
    assert!(close_rel(got, want, 1e-9));
    assert!(pth_moment_bound(&track, 1.5, 1.0, 1.0).is_err());
}

#[test]
fn comparison_examples() {
    let track = constant_track(1.0, 0.5, 0.8, 0.3);
    assert_eq!(comparison_bound(&track, 1.0, 2.0, 0.0).unwrap(), 0.0);
    let got = comparison_bound(&track, 1.0, 2.0, 0.5).unwrap();
    assert!(close_rel(got, (0.8f64 * 2.0).exp() * 0.5, 1e-9));
    let got = comparison_bound(&track, 2.0, 2.0, 0.5).unwrap();
    let want = (2.0 * (0.8 + 0.5 * 0.09) * 2.0f64).exp() * 0.5;
    assert!(close_rel(got, want, 1e-9));
    assert!(comparison_bound(&track, 1.5, 1.0, 1.0).is_err());
}

#[test]
fn comparison_bound_dominates_coupled_gap() {
    let model = params1_model();
    let grid = make_partition(0.1, 100).unwrap();
    let opts = SimOptions {
        record: Recording::None,
        substeps: 1,
    };
    let particles = 10_000;
    let a = simulate_with(&model, &grid, particles, 4, &InitialLaw::Constant(50.0), &opts).unwrap();
    let b = simulate_with(&model, &grid, particles, 4, &InitialLaw::Constant(51.0), &opts).unwrap();
    let gaps: Vec<f64> = a
        .final_state
        .iter()
        .zip(&b.final_state)
        .map(|(x, y)| (x.clamp(0.0, 100.0) - y.clamp(0.0, 100.0)).abs())
        .collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let bound = comparison_bound(&params1_track(), 1.0, 0.1, 1.0).unwrap();
    assert!(mean - 3.0 * (var / n).sqrt() <= bound, "gap {mean} vs bound {bound}");
}

#[test]
fn chi_factor_examples() {
    assert!((chi_factor(1, 2.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((chi_factor(2, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    // E|Z| = sqrt(2 / pi).
    assert!((chi_factor(1, 1.0).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    assert!(chi_factor(0, 2.0).is_err());
    assert!(chi_factor(1, 0.0).is_err());
}

#[test]
fn chi_factor_matches_monte_carlo() {
    let mut rng = StdRng::seed_from_u64(30);
    let samples = 2_000_000;
    for (d, p) in [(2usize, 2.0), (2, 3.0), (3, 4.0)] {
        let mut acc = 0.0;
        for _ in 0..samples {
            let mut sq = 0.0;
            for _ in 0..d {
                let (u1, u2): (f64, f64) = (rng.random(), rng.random());
                let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                sq += z * z;
            }
            acc += sq.powf(0.5 * p);
        }
        let mc = (acc / samples as f64).powf(1.0 / p);
        let exact = chi_factor(d, p).unwrap();
        assert!((mc / exact - 1.0).abs() < 5e-3, "d = {d}, p = {p}: {mc} vs {exact}");
    }
}

#[test]
fn em_moment_bound_examples() {
    let grid = make_partition(1.0, 10).unwrap();
    let zero = constant_track(0.0, 0.0, 0.0, 0.0);
    assert_eq!(em_moment_bound(&zero, &grid, 2.0, 3, 0.35, 9.0).unwrap(), 9.0);
    let track = constant_track(0.5, 0.2, 0.0, 0.1);
    let early = em_moment_bound(&track, &grid, 2.0, 0, 0.1, 9.0).unwrap();
    let late = em_moment_bound(&track, &grid, 2.0, 9, 1.0, 9.0).unwrap();
    assert!(late >= early);
    assert!(em_moment_bound(&track, &grid, 2.0, 3, 0.9, 9.0).is_err());
    assert!(em_moment_bound(&track, &grid, 2.0, 10, 1.0, 9.0).is_err());
}

#[test]
fn increments_stay_below_bound() {
    let model = params1_model();
    let grid = make_partition(0.05, 50).unwrap();
    let out = simulate_particles(&model, &grid, 4000, 6, &InitialLaw::Constant(50.0)).unwrap();
    let track = params1_track();
    let h = grid.mesh();
    for p in [1.0, 2.0] {
        let mut worst = 0.0f64;
        for j in 0..grid.steps() {
            let m = out.paths.iter().map(|x| (x[j + 1] - x[j]).abs().powf(p)).sum::<f64>() / out.paths.len() as f64;
            let bound = em_increment_bound(&track, &grid, p, j).unwrap().powf(p) * h.powf(0.5 * p);
            worst = worst.max(m / bound);
        }
        assert!(worst <= 1.0, "p = {p}: ratio {worst}");
    }
}

#[test]
fn bounds_are_nonnegative_and_monotone_for_nonnegative_rates() {
    let track = params1_track();
    let mut prev = [0.0f64; 3];
    for i in 0..=20 {
        let t = 0.05 * i as f64;
        let cur = [
            first_moment_bound(&track, t, 50.0).unwrap(),
            pth_moment_bound(&track, 2.0, t, 2500.0).unwrap(),
            comparison_bound(&track, 1.0, t, 1.0).unwrap(),
        ];
        for k in 0..3 {
            assert!(cur[k] >= 0.0);
            assert!(cur[k] >= prev[k] * (1.0 - 1e-12), "bound {k} decreased at t = {t}");
        }
        prev = cur;
    }
}

#[test]
fn strong_error_bound_requires_explicit_constants() {
    let grid = make_partition(0.1, 10).unwrap();
    let track = params1_track();
    assert!(strong_error_bound(&track, &grid, &error_params(100, None), 0.1).is_err());
    let mut bad = error_params(100, Some(1.0));
    bad.p = 1.0;
    assert!(strong_error_bound(&track, &grid, &bad, 0.1).is_err());
    let mut bad = error_params(100, Some(1.0));
    bad.q = 3.0;
    assert!(strong_error_bound(&track, &grid, &bad, 0.1).is_err());
    assert!(strong_error_bound(&track, &grid, &error_params(0, Some(1.0)), 0.1).is_err());
    assert!(strong_error_bound(&track, &grid, &error_params(10, Some(1.0)), 0.2).is_err());
}

#[test]
fn strong_error_bound_ignores_particles_without_measure_dependence() {
    let grid = make_partition(0.1, 10).unwrap();
    let track = params1_track();
    assert_eq!(track.at(0.0).unwrap().lamhat4, 0.0);
    let a = strong_error_bound(&track, &grid, &error_params(10, Some(3.0)), 0.1).unwrap();
    let b = strong_error_bound(&track, &grid, &error_params(10_000, Some(3.0)), 0.1).unwrap();
    assert_eq!(a.pth, b.pth);
    assert!(a.pth > 0.0);
    assert!((a.root - a.pth.sqrt()).abs() <= 1e-12 * a.root);
}

#[test]
fn strong_error_bound_is_monotone_in_particles_and_mesh() {
    let model = gghmp(&SimulatedModelParams::extinction_regime(0.5)).unwrap();
    let track = HatTrack::from_model(&model).unwrap();
    assert!(track.at(0.0).unwrap().lamhat4 > 0.0);
    let t = 0.05;
    let mut by_mesh = Vec::new();
    for steps in [5usize, 10, 20, 40] {
        let grid = make_partition(t, steps).unwrap();
        let mut by_m = Vec::new();
        for m in [10usize, 100, 1000, 10_000] {
            by_m.push(strong_error_bound(&track, &grid, &error_params(m, Some(2.0)), t).unwrap().pth);
        }
        assert!(by_m.windows(2).all(|w| w[1] <= w[0]), "not nonincreasing in M: {by_m:?}");
        by_mesh.push(by_m[0]);
    }
    assert!(by_mesh.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "not nondecreasing in mesh: {by_mesh:?}");
}

#[test]
fn rate_form_with_constant_population() {
    let grid = make_partition(0.1, 16).unwrap();
    let mut params = error_params(256, Some(2.0));
    params.n_holder = Some((0.5, 0.0));
    let bound = strong_error_bound(&params1_track(), &grid, &params, 0.1).unwrap();
    let rate = bound.rate.unwrap();
    assert_eq!(rate.alpha, 0.5);
    assert!(rate.value.is_finite() && rate.value > 0.0);
    assert!((rate.value - rate.c_pqa * grid.mesh().sqrt()).abs() <= 1e-12 * rate.value);
    params.n_holder = Some((0.7, 0.0));
    assert!(strong_error_bound(&params1_track(), &grid, &params, 0.1).is_err());
}

#[test]
fn simulated_error_stays_below_strong_bound() {
    let model = params1_model();
    let t = 0.05;
    let fine = make_partition(t, 512).unwrap();
    let coarse = make_partition(t, 16).unwrap();
    let init = InitialLaw::Constant(50.0);
    let none = |substeps| SimOptions {
        record: Recording::None,
        substeps,
    };
    let reference = simulate_with(&model, &fine, 256, 0, &init, &none(1)).unwrap();
    let approx = simulate_with(&model, &coarse, 256, 0, &init, &none(32)).unwrap();
    let err = reference
        .final_state
        .iter()
        .zip(&approx.final_state)
        .map(|(a, b)| (a.clamp(0.0, 100.0) - b.clamp(0.0, 100.0)).powi(2))
        .sum::<f64>()
        / 256.0;
    let bound = strong_error_bound(&params1_track(), &coarse, &error_params(256, Some(10.0)), t).unwrap();
    assert!(err <= bound.pth, "{err} vs {}", bound.pth);
}
