use std::sync::Arc;

use mvsis::engine::make_partition;
use mvsis::model::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

fn params1(alpha: f64) -> GeneralModel {
    gghmp(&SimulatedModelParams::extinction_regime(alpha)).unwrap()
}

/// Closed-form representative drift at the clipped state.
#[allow(clippy::too_many_arguments)]
fn oracle_drift(
    beta0: f64,
    beta: f64,
    beta1: f64,
    mg: f64,
    c12: f64,
    c21: f64,
    c22: f64,
    n: f64,
    e: f64,
    x: f64,
) -> f64 {
    let x = x.max(0.0).min(n);
    (beta0 * e + (beta + beta1 * e / n) * x) * (n - x) - mg * x + c12 * n * n * x + (c21 + c22 * n) * n * x * x
        - (c12 + c21 + c22 * n) * x * x * x
}

/// Closed-form representative diffusion rows with positive parts.
fn oracle_diffusion(g11: f64, g12: f64, g21: f64, eta0: f64, n: f64, x: f64) -> [f64; 2] {
    let xp = x.max(0.0);
    let z = (n - x).max(0.0);
    [xp * (g11 * z + g12 * z.powf(eta0)), xp * g21 * z.powf(eta0)]
}

#[test]
fn simulated_drift_and_diffusion_at_fifty() {
    let m = params1(0.0);
    let stats = MeasureStats::from_mean(30.0);
    assert!(close(drift(&m, 0.0, 50.0, &stats).unwrap(), -1000.0, 1e-14));
    let f = diffusion(&m, 0.0, 50.0).unwrap();
    assert!(close(f.iter().map(|v| v * v).sum::<f64>().sqrt(), 200.0, 1e-14));
}

#[test]
fn simulated_drift_is_quadratic_logistic() {
    let m = params1(0.0);
    let stats = MeasureStats::from_mean(10.0);
    for &x in &[0.0, 1.0, 12.5, 37.0, 99.0, 100.0] {
        let want = 0.5 * x * (100.0 - x) - 45.0 * x;
        assert!(close(drift(&m, 0.3, x, &stats).unwrap(), want, 1e-13), "x = {x}");
        let f = diffusion(&m, 0.3, x).unwrap();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(close(norm, 0.08 * x * (100.0 - x), 1e-13));
    }
}

#[test]
fn drift_clips_outside_population() {
    let m = params1(0.0);
    let stats = MeasureStats::from_mean(0.0);
    assert_eq!(drift(&m, 0.0, -5.0, &stats).unwrap(), 0.0);
    assert!(close(drift(&m, 0.0, 120.0, &stats).unwrap(), -4500.0, 1e-14));
}

#[test]
fn zero_rates_give_zero_coefficients() {
    let p = RepresentativeParams::zero(100.0);
    let m = build_representative(p).unwrap();
    let stats = MeasureStats::from_mean(20.0);
    for &x in &[0.0, 3.0, 50.0, 100.0] {
        assert_eq!(drift(&m, 1.0, x, &stats).unwrap(), 0.0);
        assert!(diffusion(&m, 1.0, x).unwrap().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn effective_transmission_with_interaction() {
    // beta (1 + alpha E/N) = 0.5 (1 + 0.5) = 0.75, so the drift at x is
    // 0.75 x (N - x) - 45 x.
    let m = params1(1.0);
    let stats = MeasureStats::from_mean(50.0);
    let x = 20.0;
    let want = 0.75 * x * (100.0 - x) - 45.0 * x;
    assert!(close(drift(&m, 0.0, x, &stats).unwrap(), want, 1e-14));
}

#[test]
fn diffusion_vanishes_on_boundary() {
    let models = [
        params1(0.0),
        cai(&CaiParams {
            beta: TimeFunction::constant(0.4),
            beta1: TimeFunction::constant(0.1),
            a: [
                TimeFunction::constant(0.3),
                TimeFunction::constant(0.7),
                TimeFunction::constant(0.2),
            ],
            sigma1: TimeFunction::constant(0.05),
            sigma2: TimeFunction::constant(0.02),
            mu: TimeFunction::constant(1.0),
            gamma: TimeFunction::constant(2.0),
            population: PopulationFunction::constant(60.0),
        })
        .unwrap(),
    ];
    for m in &models {
        let n = m.population().at(0.0);
        for t in [0.0, 0.5, 3.0] {
            assert!(diffusion(m, t, 0.0).unwrap().iter().all(|v| *v == 0.0));
            assert!(diffusion(m, t, n).unwrap().iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn drift_is_invariant_under_clipping() {
    let mut rng = StdRng::seed_from_u64(7);
    let m = params1(0.4);
    for _ in 0..200 {
        let x: f64 = rng.random_range(-50.0..150.0);
        let stats = MeasureStats::from_mean(rng.random_range(0.0..100.0));
        let t = rng.random_range(0.0..5.0);
        let clipped = x.clamp(0.0, 100.0);
        assert_eq!(drift(&m, t, x, &stats).unwrap(), drift(&m, t, clipped, &stats).unwrap());
    }
}

#[test]
fn representative_matches_closed_form() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let v: Vec<f64> = (0..11).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (beta0, beta, mu, gamma) = (v[0].abs(), v[1].abs(), v[2].abs(), v[3].abs());
        let eta0 = if rng.random::<bool>() { 1.0 } else { 0.5 };
        let n = rng.random_range(1.0..50.0);
        let mut p = RepresentativeParams::zero(n);
        p.beta0 = TimeFunction::constant(beta0);
        p.beta = TimeFunction::constant(beta);
        p.mu = TimeFunction::constant(mu);
        p.gamma = TimeFunction::constant(gamma);
        p.beta1 = TimeFunction::constant(v[4]);
        p.c12 = TimeFunction::constant(v[5] * 1e-2);
        p.c21 = TimeFunction::constant(v[6] * 1e-2);
        p.c22 = TimeFunction::constant(v[7] * 1e-3);
        p.g11 = TimeFunction::constant(v[8] * 0.1);
        p.g12 = TimeFunction::constant(v[9] * 0.1);
        p.g21 = TimeFunction::constant(v[10] * 0.1);
        p.eta0 = eta0;
        let m = build_representative(p).unwrap();
        for _ in 0..10 {
            let x: f64 = rng.random_range(-0.2 * n..1.2 * n);
            let e = rng.random_range(0.0..n);
            let got = drift(&m, 0.0, x, &MeasureStats::from_mean(e)).unwrap();
            let want = oracle_drift(beta0, beta, v[4], mu + gamma, v[5] * 1e-2, v[6] * 1e-2, v[7] * 1e-3, n, e, x);
            assert!(close(got, want, 1e-11), "{got} vs {want}");
            let f = diffusion(&m, 0.0, x).unwrap();
            let w = oracle_diffusion(v[8] * 0.1, v[9] * 0.1, v[10] * 0.1, eta0, n, x);
            assert!(close(f[0], w[0], 1e-12) && close(f[1], w[1], 1e-12));
        }
    }
}

#[test]
fn presets_match_representative_constructor() {
    let mut rng = StdRng::seed_from_u64(5);
    let n = 80.0;
    let pop = PopulationFunction::constant(n);
    let c = TimeFunction::constant;
    let (beta_init, beta_e, theta, xi) = (0.7, 0.4, 1.3, 0.05);
    let wang_model = wang(&WangParams {
        beta_init,
        beta_e,
        theta,
        xi,
        beta1: c(-0.1),
        mu: c(2.0),
        gamma: c(3.0),
        population: pop.clone(),
    })
    .unwrap();
    let cai_model = cai(&CaiParams {
        beta: c(0.3),
        beta1: c(0.2),
        a: [c(0.6), c(0.8), c(0.5)],
        sigma1: c(0.04),
        sigma2: c(0.03),
        mu: c(1.0),
        gamma: c(1.5),
        population: pop.clone(),
    })
    .unwrap();
    let bernardi_model = bernardi(&BernardiParams {
        beta: c(0.35),
        beta1: c(0.05),
        sigma: c(0.02),
        mu: c(1.2),
        gamma: c(0.8),
        population: pop.clone(),
    })
    .unwrap();
    for _ in 0..100 {
        let t = rng.random_range(0.0..10.0);
        let x = rng.random_range(0.0..n);
        let e = rng.random_range(0.0..n);
        let stats = MeasureStats::from_mean(e);

        // Wang-Cai-Ding-Gui: mean-reverting transmission, g11 from its variance.
        let b = beta_e + (beta_init - beta_e) * (-theta * t).exp();
        let g11 = xi / (2.0 * theta).sqrt() * (1.0 - (-2.0 * theta * t).exp()).sqrt();
        let want = oracle_drift(0.0, b, -0.1, 5.0, 0.0, 0.0, 0.0, n, e, x);
        assert!(close(drift(&wang_model, t, x, &stats).unwrap(), want, 1e-12));
        let f = diffusion(&wang_model, t, x).unwrap();
        let w = oracle_diffusion(g11, 0.0, 0.0, 1.0, n, x);
        assert!(close(f[0], w[0], 1e-12) && close(f[1], w[1], 1e-12));

        // Cai-Cai-Mao: g11 = a1 sigma1, g12 = -a2 sigma2, g21 = -a3 sigma2, eta0 = 1/2.
        let want = oracle_drift(0.0, 0.3, 0.2, 2.5, 0.0, 0.0, 0.0, n, e, x);
        assert!(close(drift(&cai_model, t, x, &stats).unwrap(), want, 1e-12));
        let f = diffusion(&cai_model, t, x).unwrap();
        let w = oracle_diffusion(0.6 * 0.04, -0.8 * 0.03, -0.5 * 0.03, 0.5, n, x);
        assert!(close(f[0], w[0], 1e-12) && close(f[1], w[1], 1e-12));

        // Bernardi-Lanconelli: c12 = s^2/2, c21 = -3 s^2/2, g11 = s, eta0 = 1.
        let s2 = 0.02f64 * 0.02;
        let want = oracle_drift(0.0, 0.35, 0.05, 2.0, 0.5 * s2, -1.5 * s2, 0.0, n, e, x);
        assert!(close(drift(&bernardi_model, t, x, &stats).unwrap(), want, 1e-12));
        let f = diffusion(&bernardi_model, t, x).unwrap();
        let w = oracle_diffusion(0.02, 0.0, 0.0, 1.0, n, x);
        assert!(close(f[0], w[0], 1e-12) && close(f[1], w[1], 1e-12));
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = SimulatedModelParams::extinction_regime(0.0);
    p.alpha = -1.5;
    assert!(gghmp(&p).is_err());
    let mut p = SimulatedModelParams::extinction_regime(0.0);
    p.i0 = 100.0;
    assert!(gghmp(&p).is_err());
    let mut r = RepresentativeParams::zero(10.0);
    r.eta0 = 0.7;
    assert!(build_representative(r).is_err());
    let mut r = RepresentativeParams::zero(10.0);
    r.mu = TimeFunction::new(|t| 1.0 - t);
    r.sample_horizon = 5.0;
    assert!(build_representative(r).is_err());
}

#[test]
fn value_condition_holds_for_simulated_model() {
    let grid = make_partition(1.0, 100).unwrap();
    let report = check_conditions(&params1(0.0), &grid);
    assert!(report.value_condition.holds);
    assert!(report.exponents_in_range.holds);
    assert!(report.boundary_vanishing.holds);
    assert!(report.lipschitz_regime.holds);
}

#[test]
fn strict_value_condition_fails_for_strong_second_noise() {
    // mu + gamma = 1 < (a2^2 + a3^2) sigma2^2 N / 2 = 2 * 0.01 * 100 / 2 = 1.
    // Use sigma2 = 0.2 so the right-hand side is 4.
    let c = TimeFunction::constant;
    let m = cai(&CaiParams {
        beta: c(0.01),
        beta1: c(0.0),
        a: [c(0.0), c(1.0), c(1.0)],
        sigma1: c(0.0),
        sigma2: c(0.2),
        mu: c(0.5),
        gamma: c(0.5),
        population: PopulationFunction::constant(100.0),
    })
    .unwrap();
    let grid = make_partition(1.0, 10).unwrap();
    let report = check_conditions(&m, &grid);
    assert!(!report.strict_value_condition.holds);
    assert_eq!(report.strict_value_condition.first_violation, Some(0.0));

    let ok = cai(&CaiParams {
        beta: c(0.01),
        beta1: c(0.0),
        a: [c(0.0), c(1.0), c(1.0)],
        sigma1: c(0.0),
        sigma2: c(0.2),
        mu: c(3.0),
        gamma: c(2.0),
        population: PopulationFunction::constant(100.0),
    })
    .unwrap();
    assert!(check_conditions(&ok, &grid).strict_value_condition.holds);
}

#[test]
fn power_sum_condition_with_unit_exponents() {
    let grid = make_partition(1.0, 10).unwrap();
    assert!(check_conditions(&params1(0.0), &grid).power_sum_condition.holds);
}

#[test]
fn exponents_below_half_are_rejected() {
    let g = vec![TimeFunction::constant(1.0)];
    assert!(PowerSumDiffusion::new(1, 1, g.clone(), vec![0.4], vec![1.0]).is_err());
    assert!(PowerSumDiffusion::new(1, 1, g.clone(), vec![1.0], vec![0.3]).is_err());
    let half = PowerSumDiffusion::new(1, 1, g, vec![1.0], vec![0.5]).unwrap();
    assert!(!half.is_lipschitz());
}

#[test]
fn hat_coefficients_for_simulated_model() {
    let hc = hat_coefficients(&params1(0.0), 0.0).unwrap();
    assert!(close(hc.l.unwrap(), 8.0, 1e-14));
    assert!(close(hc.lam.unwrap(), 8.0, 1e-14));
    assert!(close(hc.bhat5, 5.0, 1e-14));
    assert_eq!(hc.lamhat4, 0.0);
    assert_eq!(hc.bhat[0], 0.0);
}

#[test]
fn hat_coefficients_dominate_drift_coefficients() {
    let mut rng = StdRng::seed_from_u64(21);
    let mut p = RepresentativeParams::zero(40.0);
    p.beta0 = TimeFunction::new(|t| 0.01 * (1.0 + t.sin().abs()));
    p.beta = TimeFunction::constant(0.2);
    p.beta1 = TimeFunction::new(|t| 0.3 * t.cos());
    p.mu = TimeFunction::constant(1.0);
    p.gamma = TimeFunction::constant(2.0);
    p.c12 = TimeFunction::constant(1e-3);
    p.c21 = TimeFunction::constant(-2e-3);
    let m = build_representative(p).unwrap();
    for _ in 0..100 {
        let t = rng.random_range(0.0..10.0);
        let n = m.population().at(t);
        let hc = hat_coefficients(&m, t).unwrap();
        for _ in 0..20 {
            let atoms: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..n)).collect();
            let stats = MeasureStats::from_mean(atoms.iter().sum::<f64>() / 5.0);
            let b = m.drift_coefficients(t, &stats).unwrap();
            for i in 0..4 {
                assert!(b[i] <= hc.bhat[i] + 1e-12, "b{i} = {} > {}", b[i], hc.bhat[i]);
                assert!(b[i].abs() <= hc.bhat_abs[i] + 1e-12);
            }
        }
    }
}

#[test]
fn tractable_class_uses_phi_means() {
    let c = TimeFunction::constant;
    let phi: [PhiFn; 3] = [
        Arc::new(|_t, x| 0.1 * x),
        Arc::new(|_t, x| -0.2 * x),
        Arc::new(|_t, _x| 0.0),
    ];
    let m = build_tractable(TractableParams {
        c0: c(0.0),
        c11: c(-1.0),
        c12: c(0.5),
        c21: c(0.0),
        c22: c(0.0),
        phi,
        lipschitz: [0.1, 0.2, 0.0],
        g: [c(0.1), c(0.0), c(0.0), c(0.0)],
        zeta: [1.0, 1.0],
        eta: [1.0, 1.0, 1.0, 1.0],
        population: PopulationFunction::constant(10.0),
    })
    .unwrap();
    assert_eq!(m.family(), Family::Tractable);
    let dirac = m.dirac_stats(0.0, 4.0);
    assert!(close(dirac.mean, 4.0, 0.0));
    assert!(close(dirac.phi_means[0], 0.4, 1e-15));
    assert!(close(dirac.phi_means[1], -0.8, 1e-15));
    assert!(drift(&m, 0.0, 0.0, &dirac).unwrap().is_finite());
    assert!(diffusion(&m, 0.0, 0.0).unwrap().iter().all(|v| *v == 0.0));
    assert!(diffusion(&m, 0.0, 10.0).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn population_function_derivative() {
    let n = PopulationFunction::new(TimeFunction::new(|t| 100.0 + 2.0 * t), TimeFunction::constant(2.0));
    assert_eq!(n.at(3.0), 106.0);
    assert_eq!(n.derivative(1.0), 2.0);
    let times: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
    assert!(n.check_on(&times).is_ok());
    let wrong = PopulationFunction::new(TimeFunction::new(|t| 100.0 + 2.0 * t), TimeFunction::constant(5.0));
    assert!(wrong.check_on(&times).is_err());
    assert_eq!(PopulationFunction::constant(7.0).derivative(4.0), 0.0);
}

#[test]
fn family_names_round_trip() {
    for name in ["gghmp", "wang", "cai", "bernardi", "representative", "tractable"] {
        let f: Family = name.parse().unwrap();
        assert_eq!(f.name(), name);
    }
    assert!("sir".parse::<Family>().is_err());
}
