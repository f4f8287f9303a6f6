mod common;

use entroprod::dynamics::*;
use entroprod::entropy::{entropy_production_rate, entropy_rate, irr_rev_split, wigner_entropy};
use entroprod::model::{critical_coupling_drift, preset, thermal_occupation, Preset, Setup};
use nalgebra::Vector4;
use rand::Rng;

fn solve(p: &entroprod::SystemParams) -> (DriftMatrix, DiffusionMatrix, CovarianceMatrix) {
    let (a, d) = (drift_matrix(p), diffusion_matrix(p));
    let s = steady_state_covariance(&a, &d).unwrap();
    (a, d, s)
}

fn bec_at(ratio_sq: f64) -> entroprod::SystemParams {
    let p = preset(Preset::CavityBec);
    p.with_g_ab(ratio_sq.sqrt() * critical_coupling_drift(&p).unwrap())
}

#[test]
fn random_draws_satisfy_lyapunov_and_are_positive_definite() {
    for (setup, seed) in [(Setup::OptomechBrownian, 1), (Setup::CavityBECMarkovian, 2)] {
        let mut rng = common::rng(seed);
        for _ in 0..1000 {
            let p = common::random_stable(setup, &mut rng);
            let (a, d, s) = solve(&p);
            assert!(
                lyapunov_residual(&a, &d, &s) <= 1e-9 * d.diag.amax(),
                "{p:?}"
            );
            assert!(s.min_eigenvalue() > 0.0, "{p:?}");
            assert!(s.is_symmetric(0.0));
        }
    }
}

#[test]
fn reversible_part_is_odd_under_time_reversal() {
    let e = nalgebra::Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, 1.0, -1.0));
    let mut rng = common::rng(3);
    for setup in [Setup::OptomechBrownian, Setup::CavityBECMarkovian] {
        for _ in 0..50 {
            let a = drift_matrix(&common::random_stable(setup, &mut rng));
            let (irr, rev) = irr_rev_split(&a);
            assert_eq!(rev, -(e * rev * e));
            assert_eq!(irr + rev, a.a);
        }
    }
}

#[test]
fn diffusion_uses_the_thermal_occupation() {
    let p = preset(Preset::CavityBec);
    let d = diffusion_matrix(&p);
    let n = thermal_occupation(p.omega_b, p.t_b).unwrap();
    assert!((d.diag[0] / p.gamma_b - (2.0 * n + 1.0)).abs() < 1e-14);
    assert_eq!(d.diag[0], d.diag[1]);
}

#[test]
fn stability_of_presets() {
    let om = preset(Preset::Optomechanics);
    assert!(is_stable(&drift_matrix(&om.with_g_ab(2.29 * om.kappa_a))).is_stable());
    let bec = preset(Preset::CavityBec);
    let edge = coupling_stability_boundary(&bec, 1e8).unwrap();
    assert!(!is_stable(&drift_matrix(&bec.with_g_ab(1.2 * edge))).is_stable());
    assert!(is_stable(&drift_matrix(&bec.with_g_ab(0.99 * edge))).is_stable());
}

#[test]
fn sideband_cooling_lowers_momentum_variance() {
    let p = preset(Preset::Optomechanics);
    let (_, _, s) = solve(&p.with_g_ab(0.49 * p.kappa_a));
    assert!(s.sigma[(1, 1)] < p.n_thermal() + 0.5);
}

#[test]
fn cavity_is_nearly_empty_next_to_the_atoms() {
    let (_, _, s) = solve(&bec_at(0.93));
    let o = occupations(&s);
    assert!(o.n_b > 100.0 * o.n_a, "{o:?}");
}

#[test]
fn steady_state_is_a_fixed_point_of_the_evolution() {
    let p = bec_at(0.5);
    let (a, d, s) = solve(&p);
    let t = 100.0 / p.kappa_a;
    let ev = evolve_covariance(&a, &d, &s, &[0.0, 0.5 * t, t]).unwrap();
    for st in &ev.states {
        assert!((st.sigma - s.sigma).amax() < 1e-8 * s.max_abs());
    }
}

#[test]
fn uncoupled_mode_relaxes_exponentially() {
    let p = preset(Preset::CavityBec);
    let (a, d) = (drift_matrix(&p), diffusion_matrix(&p));
    let n = p.n_thermal();
    let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.2 / p.gamma_b).collect();
    let ev = evolve_covariance(&a, &d, &CovarianceMatrix::vacuum(), &times).unwrap();
    for (t, s) in times.iter().zip(&ev.states) {
        let exact = n + 0.5 - n * (-2.0 * p.gamma_b * t).exp();
        assert!((s.sigma[(0, 0)] - exact).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn evolution_reaches_the_lyapunov_solution() {
    for p in [bec_at(0.5), preset(Preset::Optomechanics)] {
        let (a, d, s) = solve(&p);
        let t_long = 20.0 / is_stable(&a).margin;
        let ev = evolve_covariance(&a, &d, &CovarianceMatrix::vacuum(), &[0.0, t_long]).unwrap();
        let last = ev.states.last().unwrap();
        assert!(
            (last.sigma - s.sigma).amax() < 1e-6 * s.max_abs(),
            "{:?}",
            p.setup
        );
    }
}

#[test]
fn random_initial_states_share_one_limit() {
    let p = bec_at(0.7);
    let (a, d, s) = solve(&p);
    let t_long = 20.0 / is_stable(&a).margin;
    let mut rng = common::rng(4);
    let finals: Vec<CovarianceMatrix> = (0..10)
        .map(|_| {
            let m = nalgebra::Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let s0 = CovarianceMatrix::new(m * m.transpose() + nalgebra::Matrix4::identity() * 0.5);
            *evolve_covariance(&a, &d, &s0, &[0.0, t_long])
                .unwrap()
                .states
                .last()
                .unwrap()
        })
        .collect();
    for x in &finals {
        for y in &finals {
            assert!((x.sigma - y.sigma).amax() < 1e-6 * s.max_abs());
        }
    }
}

#[test]
fn transient_from_vacuum_obeys_the_second_law() {
    let p = bec_at(0.8);
    let (a, d) = (drift_matrix(&p), diffusion_matrix(&p));
    let t_end = 5.0 / p.gamma_b;
    let times: Vec<f64> = (0..=200).map(|i| t_end * i as f64 / 200.0).collect();
    let ev = evolve_covariance(&a, &d, &CovarianceMatrix::vacuum(), &times).unwrap();
    let dm = d.matrix();
    for s in &ev.states {
        let sd = a.a * s.sigma + s.sigma * a.a.transpose() + dm;
        assert!(entropy_production_rate(s, &sd, &p).unwrap() >= -1e-10);
    }
}

#[test]
fn entropy_rate_matches_finite_differences() {
    let p = bec_at(0.6);
    let (a, d) = (drift_matrix(&p), diffusion_matrix(&p));
    let dm = d.matrix();
    let h = 1e-4 / p.gamma_b;
    for t in [0.1, 0.5, 1.0, 2.0].map(|x| x / p.gamma_b) {
        let grid = [0.0, t - 2.0 * h, t - h, t, t + h, t + 2.0 * h];
        let ev = evolve_covariance(&a, &d, &CovarianceMatrix::vacuum(), &grid).unwrap();
        let s: Vec<f64> = ev
            .states
            .iter()
            .map(|x| wigner_entropy(x).unwrap())
            .collect();
        let fd = (s[1] - 8.0 * s[2] + 8.0 * s[4] - s[5]) / (12.0 * h);
        let s0 = &ev.states[3];
        let sd = a.a * s0.sigma + s0.sigma * a.a.transpose() + dm;
        let exact = entropy_rate(s0, &sd).unwrap();
        assert!(
            (fd - exact).abs() < 1e-6 * exact.abs(),
            "t={t}: {fd} vs {exact}"
        );
    }
}
