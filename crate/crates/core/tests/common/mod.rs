#![allow(dead_code)]

use entroprod::dynamics::{coupling_stability_boundary, drift_matrix, is_stable};
use entroprod::model::{Setup, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = std::f64::consts::TAU;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Random Hurwitz parameter set with rates spread log-uniformly over four decades,
/// kept at least 1e-4·max|A_ij| away from the stability boundary.
pub fn random_stable(setup: Setup, rng: &mut ChaCha8Rng) -> SystemParams {
    loop {
        let p = match setup {
            Setup::OptomechBrownian => {
                let wm = TAU * log_uniform(rng, 1e5, 1e7);
                let kappa = wm * log_uniform(rng, 1e-2, 1e2);
                SystemParams {
                    setup,
                    omega_a: wm * log_uniform(rng, 0.1, 10.0),
                    omega_b: wm,
                    kappa_a: kappa,
                    gamma_b: wm * log_uniform(rng, 1e-6, 1e-2),
                    g_ab: kappa * log_uniform(rng, 1e-3, 10.0),
                    t_b: log_uniform(rng, 1e-3, 1e3),
                    mu_squeeze: 0.0,
                }
            }
            Setup::CavityBECMarkovian => {
                let w = TAU * log_uniform(rng, 1e6, 1e8);
                let w0 = TAU * log_uniform(rng, 1e3, 1e5);
                let mut p = SystemParams {
                    setup,
                    omega_a: w,
                    omega_b: w0,
                    kappa_a: w * log_uniform(rng, 1e-2, 1e1),
                    gamma_b: w0 * log_uniform(rng, 1e-4, 1.0),
                    g_ab: 0.0,
                    t_b: log_uniform(rng, 1e-9, 1e-5),
                    mu_squeeze: w0 * rng.random_range(-0.5..0.2),
                };
                let edge = coupling_stability_boundary(&p, 1e3 * (w * w0).sqrt()).unwrap();
                p.g_ab = edge * rng.random_range(0.0f64..0.995).sqrt();
                p
            }
        };
        let s = is_stable(&drift_matrix(&p));
        if p.validate().is_ok() && s.is_stable() && s.margin >= 1e-4 * drift_matrix(&p).a.amax() {
            return p;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
