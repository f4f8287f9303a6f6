//! Wigner entropy of the Gaussian state, entropy production and flux rates.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    diffusion_matrix, drift_matrix, is_stable, occupations, steady_state_covariance,
    CovarianceMatrix, DiffusionMatrix, DriftMatrix, Mat4, Occupations, Stability,
};
use crate::error::{Error, Result};
use crate::model::{Setup, SystemParams};

/// Additive constant of the Wigner entropy, 2(1 + ln π). Only differences of S matter.
pub const WIGNER_ENTROPY_OFFSET: f64 = 2.0 * (1.0 + 1.144_729_885_849_400_2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyRates {
    pub pi_s: f64,
    pub phi_s: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub n_a: f64,
    pub n_b: f64,
    pub p_b_var: f64,
    pub stability: Stability,
}

/// Split A into the time-reversal even (diagonal damping) and odd parts.
pub fn irr_rev_split(a: &DriftMatrix) -> (Mat4, Mat4) {
    let d = a.a.diagonal();
    let irr = match a.setup {
        Setup::OptomechBrownian => {
            Mat4::from_diagonal(&nalgebra::Vector4::new(0.0, d[1], d[2], d[3]))
        }
        Setup::CavityBECMarkovian => Mat4::from_diagonal(&d),
    };
    (irr, a.a - irr)
}

fn cholesky(s: &CovarianceMatrix) -> Result<Cholesky<f64, nalgebra::U4>> {
    Cholesky::new(s.symmetrized().sigma).ok_or(Error::NonPositiveDefinite)
}

/// S = ½ ln det σ + 2(1 + ln π).
pub fn wigner_entropy(s: &CovarianceMatrix) -> Result<f64> {
    let ch = cholesky(s)?;
    let log_det: f64 = ch.l_dirty().diagonal().iter().map(|l| 2.0 * l.ln()).sum();
    Ok(0.5 * log_det + WIGNER_ENTROPY_OFFSET)
}

/// dS/dt = ½ tr(σ⁻¹ σ̇).
pub fn entropy_rate(s: &CovarianceMatrix, sigma_dot: &Mat4) -> Result<f64> {
    let ch = cholesky(s)?;
    Ok(0.5 * ch.solve(sigma_dot).trace())
}

/// Φ = tr(2 A_irrᵀ D⁻¹ A_irr σ + A_irr), with D⁻¹ the diagonal pseudo-inverse.
pub fn entropy_flux_trace(s: &CovarianceMatrix, a: &DriftMatrix, d: &DiffusionMatrix) -> f64 {
    let (irr, _) = irr_rev_split(a);
    (irr.transpose() * d.pseudo_inverse() * irr * s.sigma * 2.0 + irr).trace()
}

fn flux_parts(occ: &Occupations, p: &SystemParams) -> (f64, f64) {
    let n_t = p.n_thermal();
    let mu_a = 4.0 * p.kappa_a * occ.n_a;
    let mu_b = match p.setup {
        Setup::CavityBECMarkovian => 2.0 * p.gamma_b * ((occ.n_b + 0.5) / (n_t + 0.5) - 1.0),
        Setup::OptomechBrownian => p.gamma_b * (occ.p_b_var / (n_t + 0.5) - 1.0),
    };
    (mu_a, mu_b)
}

/// Entropy flux rate written in terms of the local occupations.
pub fn entropy_flux_rate(s: &CovarianceMatrix, p: &SystemParams) -> f64 {
    let (mu_a, mu_b) = flux_parts(&occupations(s), p);
    mu_a + mu_b
}

/// Π = dS/dt + Φ for a state σ with time derivative σ̇.
pub fn entropy_production_rate(
    s: &CovarianceMatrix,
    sigma_dot: &Mat4,
    p: &SystemParams,
) -> Result<f64> {
    let ds = entropy_rate(s, sigma_dot)?;
    let phi = entropy_flux_trace(s, &drift_matrix(p), &diffusion_matrix(p));
    Ok(ds + phi)
}

/// Steady-state rates from given local occupations.
pub fn rates_from_occupations(
    p: &SystemParams,
    occ: &Occupations,
    stability: Stability,
) -> EntropyRates {
    let (mu_a, mu_b) = flux_parts(occ, p);
    EntropyRates {
        pi_s: mu_a + mu_b,
        phi_s: mu_a + mu_b,
        mu_a,
        mu_b,
        n_a: occ.n_a,
        n_b: occ.n_b,
        p_b_var: occ.p_b_var,
        stability,
    }
}

/// Solve for σ_s and evaluate Π_s = μ_a + μ_b together with the flux Φ_s.
pub fn steady_state_entropy_production(p: &SystemParams) -> Result<EntropyRates> {
    Ok(steady_state_with_covariance(p)?.0)
}

pub fn steady_state_with_covariance(p: &SystemParams) -> Result<(EntropyRates, CovarianceMatrix)> {
    let a = drift_matrix(p);
    let d = diffusion_matrix(p);
    let stability = is_stable(&a);
    let sigma = steady_state_covariance(&a, &d)?;
    let mut rates = rates_from_occupations(p, &occupations(&sigma), stability);
    rates.phi_s = entropy_flux_trace(&sigma, &a, &d);
    Ok((rates, sigma))
}
