mod common;

use entroprod::dynamics::{diffusion_matrix, drift_matrix, Mat4};
use entroprod::entropy::*;
use entroprod::model::{critical_coupling_drift, preset, Preset, Setup};
use proptest::prelude::*;

fn bec_at(ratio_sq: f64) -> entroprod::SystemParams {
    let p = preset(Preset::CavityBec);
    p.with_g_ab(ratio_sq.sqrt() * critical_coupling_drift(&p).unwrap())
}

#[test]
fn second_law_and_balance_over_random_draws() {
    for (setup, seed) in [
        (Setup::OptomechBrownian, 11),
        (Setup::CavityBECMarkovian, 12),
    ] {
        let mut rng = common::rng(seed);
        for _ in 0..1000 {
            let p = common::random_stable(setup, &mut rng);
            let r = steady_state_entropy_production(&p).unwrap_or_else(|e| panic!("{p:?}: {e}"));
            assert!(r.pi_s >= -1e-12 * p.kappa_a, "{p:?}: {}", r.pi_s);
            assert!(r.mu_a >= 0.0);
            assert_eq!(r.pi_s, r.mu_a + r.mu_b);
            // both fluxes subtract O(κ) and O(γ_b) terms; compare on that scale
            let n_t = p.n_thermal() + 0.5;
            let scale = r
                .pi_s
                .max(4.0 * p.kappa_a * (r.n_a + 0.5) + 2.0 * p.gamma_b * (r.n_b + 0.5) / n_t);
            assert!(
                (r.pi_s - r.phi_s).abs() <= 1e-11 * scale,
                "{p:?}: {} vs {}",
                r.pi_s,
                r.phi_s
            );
        }
    }
}

#[test]
fn stationary_production_equals_steady_state_rate() {
    let p = preset(Preset::Optomechanics);
    let p = p.with_g_ab(2.29 * p.kappa_a);
    let (r, s) = steady_state_with_covariance(&p).unwrap();
    let pi = entropy_production_rate(&s, &Mat4::zeros(), &p).unwrap();
    assert!((pi - r.pi_s).abs() < 1e-9 * r.pi_s);
    assert!(r.pi_s > 0.0);
    assert!((entropy_flux_rate(&s, &p) - r.pi_s).abs() < 1e-12 * r.pi_s);
}

#[test]
fn entropy_of_the_steady_state_is_its_log_determinant() {
    let (_, s) = steady_state_with_covariance(&bec_at(0.93)).unwrap();
    let direct = 0.5 * s.sigma.determinant().ln() + WIGNER_ENTROPY_OFFSET;
    assert!((wigner_entropy(&s).unwrap() - direct).abs() < 1e-10 * direct.abs());
}

#[test]
fn optomech_sweep_shows_cooling() {
    let p0 = preset(Preset::Optomechanics);
    let mut last: Option<EntropyRates> = None;
    for i in 0..25 {
        let g = 0.5 + (3.3 - 0.5) * i as f64 / 24.0;
        let r = steady_state_entropy_production(&p0.with_g_ab(g * p0.kappa_a)).unwrap();
        assert!(r.mu_b < 0.0 && r.mu_a > 0.0 && r.pi_s > 0.0);
        if let Some(l) = last {
            assert!(r.mu_a >= l.mu_a && r.mu_b <= l.mu_b);
        }
        last = Some(r);
    }
}

#[test]
fn production_diverges_toward_the_boundary() {
    let lo = steady_state_entropy_production(&bec_at(0.9)).unwrap().pi_s;
    let hi = steady_state_entropy_production(&bec_at(0.99)).unwrap().pi_s;
    assert!(hi / lo > 5.0, "{}", hi / lo);
}

#[test]
fn equilibrium_state_has_zero_production() {
    for pr in [Preset::Optomechanics, Preset::CavityBec] {
        let p = preset(pr);
        let r = steady_state_entropy_production(&p).unwrap();
        assert!(r.pi_s.abs() < 1e-12 * p.kappa_a);
        assert!(r.mu_b.abs() < 1e-12 * p.kappa_a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_and_occupation_fluxes_agree(seed in any::<u64>(), bec in any::<bool>()) {
        let setup = if bec { Setup::CavityBECMarkovian } else { Setup::OptomechBrownian };
        let p = common::random_stable(setup, &mut common::rng(seed));
        let (_, s) = steady_state_with_covariance(&p).unwrap();
        let t = entropy_flux_trace(&s, &drift_matrix(&p), &diffusion_matrix(&p));
        let o = entropy_flux_rate(&s, &p);
        prop_assert!((t - o).abs() <= 1e-9 * t.abs().max(o.abs()).max(1e-300) + 1e-12 * p.kappa_a);
    }
}
