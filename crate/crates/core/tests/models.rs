mod common;

use common::*;
use sfde_core::model::{diffusion, drift, probe_model};
use sfde_core::models::{ahmp_model, ahmp_variation_closed, bs_model, kp_model, LinearFunctional};
use sfde_core::*;

fn averaging_model() -> models::GeometricModel<f64> {
    let mu = LinearFunctional { constant: 0.05, lagged: 1e-3, average: 2e-4 };
    let sigma = LinearFunctional { constant: 0.15, lagged: 0.0, average: 5e-4 };
    LinearFunctional::model(mu, sigma, R, TimeFn::Constant(KAPPA)).unwrap()
}

fn probe_points(state: &Segment<f64>, g: &Grid<f64>) -> Vec<(f64, Segment<f64>)> {
    (0..4)
        .map(|i| {
            let d = state.dim();
            let bump = Segment::from_fn(g, d, |u| (0..d).map(|c| 0.05 * (u * (i + 1) as f64 + c as f64).sin()).collect());
            (0.2 * i as f64, state.add_scaled(&bump, 1.0).unwrap())
        })
        .collect()
}

fn probe_dirs(d: usize, g: &Grid<f64>) -> Vec<Segment<f64>> {
    let mut dirs: Vec<Segment<f64>> =
        direction_dictionary(DirectionKind::Canonical, d, g.n_delay(), g.step()).into_iter().map(|x| x.segment).collect();
    dirs.push(Segment::from_fn(g, d, |u| (0..d).map(|c| (5.0 * u + c as f64).cos()).collect()));
    dirs
}

#[test]
fn probe_suite_passes_for_every_model() {
    let g = grid(6);
    let kp = kp();
    let models: Vec<(Box<dyn Model<f64>>, Segment<f64>)> = vec![
        (Box::new(bs()), eta_flat(&g)),
        (Box::new(kp.clone()), kp.embed(&eta_kp(&g)).unwrap()),
        (Box::new(ahmp()), eta_ahmp(&g)),
        (Box::new(averaging_model()), eta_ahmp(&g)),
    ];
    for (model, state) in models {
        let rep = probe_model(model.as_ref(), &probe_points(&state, &g), &probe_dirs(state.dim(), &g), 1e-6).unwrap();
        assert!(rep.right_inverse <= 1e-12, "{}: {rep:?}", model.name());
        assert!(rep.linearity <= 1e-12, "{}: {rep:?}", model.name());
        assert!(rep.fd_consistency <= 1e-6, "{}: {rep:?}", model.name());
        if model.dim() == model.noise_dim() {
            assert!(rep.identity.unwrap() <= 1e-12, "{}: {rep:?}", model.name());
        } else {
            assert!(rep.identity.is_none());
        }
    }
}

#[test]
fn kp_coefficients_follow_from_ito_on_the_price_map() {
    let (a1, a2, a3, mu, sigma) = (1.5, 0.8, 0.3, 0.4, 0.25);
    let model = kp_model(a1, a2, a3, mu, sigma, R, TimeFn::Constant(KAPPA)).unwrap();
    assert_eq!(model.c1(), a2 * mu);
    assert!((model.c2() - (a3 + 0.5 * a2 * a2 * sigma * sigma)).abs() < 1e-15);
    assert_eq!(model.c3(), a2 * sigma);
    let g = grid(5);
    let eta_y = InitialShape::Linear { at_zero: 0.3, slope: 1.0 }.sample(&g);
    let state = model.embed(&eta_y).unwrap();
    let y_lag = eta_y.rho(-R).unwrap()[0];
    let f = drift(&model, 0.0, state.view());
    let s = state.v()[0];
    // dS = S[α₂dY + α₃dt + ½α₂²σ²dt]
    let expected = s * (a2 * (-mu * y_lag) + a3 + 0.5 * a2 * a2 * sigma * sigma);
    assert!((f[0] - expected).abs() < 1e-12 * expected.abs());
    assert!((f[1] + mu * y_lag).abs() < 1e-15);
    let gm = diffusion(&model, 0.0, state.view());
    assert!((gm[0] - s * a2 * sigma).abs() < 1e-12 * s);
    assert_eq!(gm[1], sigma);
    // the embedded S history is the price map of the Y history
    for k in 0..g.n_delay() {
        let u = -((g.n_delay() - k) as f64) * g.step();
        assert!((state.phi(k)[0] - a1 * (a2 * eta_y.phi(k)[0] + a3 * u).exp()).abs() < 1e-12);
    }
}

#[test]
fn kp_market_price_of_risk_and_its_derivative() {
    let model = kp();
    let g = grid(5);
    let eta_y = InitialShape::Linear { at_zero: S0.ln(), slope: 0.2 }.sample(&g);
    let state = model.embed(&eta_y).unwrap();
    let y_lag = eta_y.rho(-R).unwrap()[0];
    let theta = market_price_of_risk(&model, 0.0, state.view()).unwrap();
    let expected = (model.c2() - model.c1() * y_lag - KAPPA) / model.c3();
    assert!((theta - expected).abs() < 1e-12);
    let psi = Segment::scalar_fn(&g, |u| 1.0 + u * u);
    let psi_state = model.embed_direction(&eta_y, &psi).unwrap();
    let dth = dtheta(&model, 0.0, state.view(), psi_state.view()).unwrap();
    let psi_lag = 1.0 + R * R;
    assert!((dth + model.c1() * psi_lag / model.c3()).abs() < 1e-12);
}

#[test]
fn kp_variation_on_the_first_delay_interval() {
    let model = kp();
    let g = grid(7);
    let eta_y = InitialShape::Sine { level: S0.ln(), amplitude: 0.1, frequency: 1.0 }.sample(&g);
    let state = model.embed(&eta_y).unwrap();
    let psi = Segment::scalar_fn(&g, |u| 0.5 + u);
    let psi_state = model.embed_direction(&eta_y, &psi).unwrap();
    let noise = generate_noise(6, 0, g.n_steps(), 1, g.step());
    let traj = simulate(&model, &state.view(), &g, &noise, Stepping::LogEuler).unwrap();
    let alpha = variation_flow(&model, &traj, &noise, &psi_state).unwrap().alpha;
    // α_Y(t) = ψ(0) − μ∫₀ᵗψ(u−r)du and α_S(t) = S(t)α₂α_Y(t) for t ≤ r (left-point sums)
    let mut acc = psi.v()[0];
    for k in 0..=g.n_delay() {
        let a = alpha.at(k);
        assert!((a[1] - acc).abs() < 1e-12 * acc.abs().max(1.0), "step {k}");
        let s = traj.path.at(k)[0];
        assert!((a[0] - s * model.alpha2 * acc).abs() < 1e-12 * s, "step {k}");
        if k < g.n_delay() {
            acc -= model.mu * psi.phi(k)[0] * g.step();
        }
    }
}

#[test]
fn ahmp_without_memory_drift_is_black_scholes() {
    let g = grid(6);
    let a = ahmp_model(TimeFn::Constant(0.0), TimeFn::Constant(SIGMA), R, TimeFn::Constant(KAPPA)).unwrap();
    let b = bs_model(0.0, SIGMA, TimeFn::Constant(KAPPA)).unwrap();
    let noise = generate_noise(1, 1, g.n_steps(), 1, g.step());
    let pa = euler_solve(&a, &eta_ahmp(&g).view(), &g, &noise, Stepping::LogEuler).unwrap();
    let pb = euler_solve(&b, &eta_ahmp(&g).view(), &g, &noise, Stepping::LogEuler).unwrap();
    assert_eq!(pa.values(), pb.values());
}

#[test]
fn ahmp_piecewise_volatility_is_applied_by_time() {
    let sigma = TimeFn::piecewise(vec![0.5], vec![0.2, 0.4]).unwrap();
    let model = ahmp_model(TimeFn::Constant(0.01), sigma, R, TimeFn::Constant(KAPPA)).unwrap();
    let g = grid(4);
    let seg = eta_ahmp(&g);
    assert_eq!(diffusion(&model, 0.25, seg.view())[0], 0.2 * S0);
    assert_eq!(diffusion(&model, 0.5, seg.view())[0], 0.4 * S0);
    let lagged = seg.rho(-R).unwrap()[0];
    assert!((drift(&model, 0.0, seg.view())[0] - 0.01 * lagged * S0).abs() < 1e-12);
}

#[test]
fn ahmp_closed_variation_matches_the_flow() {
    let model = ahmp();
    let mut worst = Vec::new();
    for p in [6, 7, 8] {
        let g = grid(p);
        let eta = eta_ahmp(&g);
        let psi = Segment::scalar_fn(&g, |u| 1.0 - 2.0 * u);
        let k = g.n_delay();
        let mut err_direct = 0.0f64;
        for path in 0..20 {
            let noise = generate_noise(31, path, g.n_steps(), 1, g.step());
            for stepping in [Stepping::LogEuler, Stepping::Direct] {
                let traj = simulate(&model, &eta.view(), &g, &noise, stepping).unwrap();
                let alpha = variation_flow(&model, &traj, &noise, &psi).unwrap().alpha;
                let x: Vec<f64> = (0..=k).map(|j| traj.path.at(j)[0]).collect();
                let closed = ahmp_variation_closed(&model, &eta, &psi, &g, &x).unwrap();
                for j in 0..=k {
                    let rel = (alpha.at(j)[0] - closed[j]).abs() / closed[j].abs();
                    match stepping {
                        Stepping::LogEuler => assert!(rel < 1e-12, "log-Euler step {j}: {rel}"),
                        Stepping::Direct => err_direct = err_direct.max(rel),
                    }
                }
            }
        }
        assert!(err_direct <= g.step(), "h = {}: {err_direct}", g.step());
        worst.push(err_direct);
    }
    assert!(worst[2] < worst[0], "{worst:?}");
}

#[test]
fn invalid_parameters_are_rejected() {
    let k = TimeFn::Constant(KAPPA);
    assert!(bs_model(0.1, 0.0, k.clone()).is_err());
    assert!(kp_model(0.0, 1.0, 0.0, 0.1, 0.2, R, k.clone()).is_err());
    assert!(kp_model(1.0, 0.0, 0.0, 0.1, 0.2, R, k.clone()).is_err());
    assert!(ahmp_model(TimeFn::Constant(0.0), TimeFn::Constant(-0.1), R, k.clone()).is_err());
    assert!(ahmp_model(TimeFn::Constant(0.0), TimeFn::Constant(0.1), 0.0, k.clone()).is_err());
    let lagged_vol = LinearFunctional { constant: 0.2, lagged: 0.1, average: 0.0 };
    assert!(LinearFunctional::model::<f64>(LinearFunctional::default(), lagged_vol, R, k).is_err());
}
