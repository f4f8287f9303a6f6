//! Cavity-BEC pipeline: mean fields of the open Dicke model, the displaced
//! quadratic Hamiltonian, polariton modes and the sideband-based reconstruction
//! of local occupations and entropy production.

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{drift_matrix, is_stable, Occupations};
use crate::entropy::{rates_from_occupations, steady_state_entropy_production, EntropyRates};
use crate::error::{Error, Result};
use crate::model::{
    preset, thermal_occupation, Preset, Setup, SystemParams, BEC_ATOM_NUMBER, SYNTHETIC_BEC_GAMMA_B,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeBareParams {
    pub n: u64,
    pub omega0: f64,
    /// Cavity detuning.
    pub omega: f64,
    pub kappa: f64,
    /// Pump-controlled coupling.
    pub lambda: f64,
    /// Symmetry-breaking field.
    pub zeta: f64,
    pub t: f64,
    /// Damping of the atomic polariton.
    pub gamma_c: f64,
}

impl DickeBareParams {
    /// Table values of the BEC experiment at pump strength `x = (λ/λ_cr)²`,
    /// with the synthetic constant polariton damping.
    pub fn table(x: f64) -> Self {
        let p = preset(Preset::CavityBec);
        let mut d = DickeBareParams {
            n: BEC_ATOM_NUMBER,
            omega0: p.omega_b,
            omega: p.omega_a,
            kappa: p.kappa_a,
            lambda: 0.0,
            zeta: 0.0,
            t: p.t_b,
            gamma_c: SYNTHETIC_BEC_GAMMA_B,
        };
        d.lambda = x.sqrt() * d.lambda_cr();
        d
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParams {
                field: "n",
                reason: "atom number must be positive".into(),
            });
        }
        for (field, v) in [
            ("omega0", self.omega0),
            ("omega", self.omega),
            ("kappa", self.kappa),
            ("lambda", self.lambda),
            ("t", self.t),
            ("gamma_c", self.gamma_c),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        if !(self.omega0 > 0.0 && self.omega > 0.0) {
            return Err(Error::InvalidParams {
                field: "omega",
                reason: "mode frequencies must be positive".into(),
            });
        }
        if !self.zeta.is_finite() {
            return Err(Error::InvalidParams {
                field: "zeta",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// ½ √(ω₀(κ² + ω²)/ω).
    pub fn lambda_cr(&self) -> f64 {
        0.5 * (self.omega0 * (self.kappa * self.kappa + self.omega * self.omega) / self.omega)
            .sqrt()
    }

    pub fn pump_x(&self) -> f64 {
        (self.lambda / self.lambda_cr()).powi(2)
    }

    pub fn with_pump_x(mut self, x: f64) -> Self {
        self.lambda = x.sqrt() * self.lambda_cr();
        self
    }
}

/// Steady state of the field and the collective spin, (α_s, β_s).
pub fn mean_fields(p: &DickeBareParams) -> Result<(Complex64, f64)> {
    p.validate()?;
    let nf = p.n as f64;
    let x = p.pump_x();
    // in u = 2β/N the equation reads u = x (u + z) √(1 - u²)
    let u = if p.zeta == 0.0 {
        if x <= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (x * x)).sqrt()
        }
    } else {
        let z = 2.0 * p.zeta / nf;
        let s = p.zeta.signum();
        let f = |u: f64| u - x * (u + z) * (1.0 - u * u).max(0.0).sqrt();
        // root on the side selected by the field
        let (mut lo, mut hi) = if s > 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
        let (flo, fhi) = (f(lo), f(hi));
        if flo * fhi > 0.0 {
            return Err(Error::NoRoot {
                lo: lo * nf / 2.0,
                hi: hi * nf / 2.0,
            });
        }
        let rising = flo < 0.0;
        while hi - lo > 1e-15 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let beta = 0.5 * nf * u;
    let alpha = 2.0 * p.lambda * (beta + p.zeta) / (Complex64::new(-p.omega, p.kappa) * nf.sqrt());
    Ok((alpha, beta))
}

/// Bosonic amplitude β̃ with β̃ √(1 - β̃²/N²) = β_s, on the branch through β̃ = 0.
pub fn displaced_amplitude(beta_s: f64, n: u64) -> Result<f64> {
    let nf = n as f64;
    let r = 2.0 * beta_s / nf;
    if !(r.abs() <= 1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "|β_s| = {} exceeds N/2",
            beta_s.abs()
        )));
    }
    let root = (1.0 - r * r).max(0.0).sqrt();
    Ok(beta_s.signum() * (2.0 * beta_s * beta_s / (1.0 + root)).sqrt())
}

/// (ω̃₀, μ, λ̃) of the displaced quadratic Hamiltonian.
pub fn effective_params(
    p: &DickeBareParams,
    beta_tilde: f64,
    alpha_s: Complex64,
) -> (f64, f64, f64) {
    let nf = p.n as f64;
    let r2 = (beta_tilde / nf).powi(2);
    let s = (1.0 - r2).sqrt();
    let c = p.lambda * alpha_s.re * beta_tilde / (nf.powf(1.5) * s);
    let omega0_t = p.omega0 - 2.0 * c;
    let mu = c * (1.0 + r2 / (2.0 * (1.0 - r2)));
    let lambda_t = p.lambda * (1.0 - 2.0 * r2) / s;
    (omega0_t, mu, lambda_t)
}

/// Entries of the polariton transformation, δa = A d + B d† + G c + D c† and
/// δb = A₂ d + B₂ d† + G₂ c + D₂ c†.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonCoeffs {
    pub a: f64,
    pub b: f64,
    pub g: f64,
    pub d: f64,
    pub a2: f64,
    pub b2: f64,
    pub g2: f64,
    pub d2: f64,
}

impl PolaritonCoeffs {
    pub fn identity() -> Self {
        PolaritonCoeffs {
            a: 1.0,
            b: 0.0,
            g: 0.0,
            d: 0.0,
            a2: 0.0,
            b2: 0.0,
            g2: 1.0,
            d2: 0.0,
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let c = self;
        Matrix4::new(
            c.a, c.b, c.g, c.d, //
            c.b, c.a, c.d, c.g, //
            c.a2, c.b2, c.g2, c.d2, //
            c.b2, c.a2, c.d2, c.g2,
        )
    }

    /// max |M K Mᵀ - K| with K = diag(1, -1, 1, -1).
    pub fn symplectic_residual(&self) -> f64 {
        let m = self.matrix();
        let k = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, -1.0, 1.0, -1.0));
        (m * k * m.transpose() - k).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Polaritons {
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub gamma_s: f64,
    pub coeffs: PolaritonCoeffs,
}

/// Normal-mode energies (ε₋, ε₊) of the closed system.
///
/// The product ε₊²ε₋² is formed in factored form so that the soft root keeps
/// full relative accuracy next to the large one.
pub fn polariton_energies(omega: f64, omega0_t: f64, mu: f64, lambda_t: f64) -> Result<(f64, f64)> {
    let (w, w0, l) = (omega, omega0_t, lambda_t);
    let s = (w * w0).sqrt();
    let r_arg = w0 * w0 - w * w - 4.0 * mu * w0;
    let sum = w * w + w0 * w0 - 4.0 * mu * w0;
    let rad = (r_arg * r_arg + 16.0 * l * l * w * w0).sqrt();
    let big = 0.5 * (sum + rad);
    let prod = w * w0 * (s - 2.0 * l) * (s + 2.0 * l) - 4.0 * mu * w0 * w * w;
    let small = if big > 0.0 { prod / big } else { 0.0 };
    let scale = w * w0 * s * (s + 2.0 * l.abs()) + 4.0 * mu.abs() * w0 * w * w;
    let tol = 64.0 * f64::EPSILON * scale / big.max(f64::MIN_POSITIVE);
    let small = if small < 0.0 {
        if small >= -tol {
            0.0
        } else {
            return Err(Error::ComplexMode { radicand: small });
        }
    } else {
        small
    };
    let (ep2, em2) = if r_arg >= 0.0 {
        (big, small)
    } else {
        (small, big)
    };
    Ok((em2.sqrt(), ep2.sqrt()))
}

fn f_sum(a: f64, b: f64) -> f64 {
    0.5 * ((a / b).sqrt() + (b / a).sqrt())
}

fn f_diff(a: f64, b: f64) -> f64 {
    0.5 * ((a / b).sqrt() - (b / a).sqrt())
}

/// Energies, Bogoliubov angle and transformation coefficients of the polaritons.
pub fn polariton_diagonalize(
    omega: f64,
    omega0_t: f64,
    mu: f64,
    lambda_t: f64,
) -> Result<Polaritons> {
    let (em, ep) = polariton_energies(omega, omega0_t, mu, lambda_t)?;
    if !(em > 0.0 && ep > 0.0) {
        return Err(Error::ComplexMode { radicand: 0.0 });
    }
    let r_arg = omega0_t * omega0_t - omega * omega - 4.0 * mu * omega0_t;
    let num = 4.0 * lambda_t * (omega * omega0_t).sqrt();
    let gamma_s = if num == 0.0 {
        0.0
    } else {
        0.5 * (num / r_arg).atan()
    };
    let (sn, cs) = gamma_s.sin_cos();
    let coeffs = PolaritonCoeffs {
        a: cs * f_sum(omega, em),
        b: cs * f_diff(omega, em),
        g: sn * f_sum(omega, ep),
        d: sn * f_diff(omega, ep),
        a2: -sn * f_sum(omega0_t, em),
        b2: -sn * f_diff(omega0_t, em),
        g2: cs * f_sum(omega0_t, ep),
        d2: cs * f_diff(omega0_t, ep),
    };
    Ok(Polaritons {
        eps_minus: em,
        eps_plus: ep,
        gamma_s,
        coeffs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Normal,
    Superradiant,
}

/// ε₊/ω₀ near the transition, optionally with the (κ/ω)² correction.
pub fn soft_mode_approx(x: f64, phase: Phase, kappa_over_omega: Option<f64>) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be >= 0, got {x}")));
    }
    let k2 = kappa_over_omega.map_or(0.0, |k| k * k);
    let radicand = match phase {
        Phase::Normal if x <= 1.0 => 1.0 - x * (1.0 + k2),
        Phase::Superradiant if x >= 1.0 => x * x - 1.0 - k2,
        _ => {
            return Err(Error::Domain(format!(
                "x = {x} lies outside the {phase:?} phase"
            )))
        }
    };
    if radicand < 0.0 {
        return Err(Error::Domain(format!(
            "negative radicand {radicand} at x = {x}"
        )));
    }
    Ok(radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeState {
    pub alpha_s: Complex64,
    pub beta_s: f64,
    pub beta_tilde: f64,
    pub omega0_tilde: f64,
    pub mu: f64,
    pub lambda_tilde: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub coeffs: PolaritonCoeffs,
    pub gamma_s: f64,
    /// Thermal occupation at ω̃₀.
    pub n_t: f64,
    /// Thermal occupation of the atomic polariton at ε₊.
    pub n_t_c: f64,
}

/// Full chain from bare parameters to the polariton description.
pub fn dicke_state(p: &DickeBareParams) -> Result<DickeState> {
    let (alpha_s, beta_s) = mean_fields(p)?;
    let beta_tilde = displaced_amplitude(beta_s, p.n)?;
    let (omega0_tilde, mu, lambda_tilde) = effective_params(p, beta_tilde, alpha_s);
    let pol = polariton_diagonalize(p.omega, omega0_tilde, mu, lambda_tilde)?;
    Ok(DickeState {
        alpha_s,
        beta_s,
        beta_tilde,
        omega0_tilde,
        mu,
        lambda_tilde,
        eps_minus: pol.eps_minus,
        eps_plus: pol.eps_plus,
        coeffs: pol.coeffs,
        gamma_s: pol.gamma_s,
        n_t: thermal_occupation(omega0_tilde, p.t)?,
        n_t_c: thermal_occupation(pol.eps_plus, p.t)?,
    })
}

/// γ_b = γ_c (n_T^c + 1) / ((n_T + 1) G₂² + n_T D₂²).
pub fn effective_gamma_b(p: &DickeBareParams, state: &DickeState) -> Result<f64> {
    let c = &state.coeffs;
    let den = (state.n_t + 1.0) * c.g2 * c.g2 + state.n_t * c.d2 * c.d2;
    if !(den > 0.0) {
        return Err(Error::Domain(
            "vanishing polariton weight in the atomic mode".into(),
        ));
    }
    Ok(p.gamma_c * (state.n_t_c + 1.0) / den)
}

/// ⟨c†c⟩ = n_T^c + (κ/γ_c)(I₋ - I₊) from the sideband asymmetry.
pub fn occupation_from_sidebands(
    i_minus: f64,
    i_plus: f64,
    kappa: f64,
    gamma_c: f64,
    n_t_c: f64,
) -> Result<f64> {
    if !(gamma_c > 0.0) {
        return Err(Error::InvalidParams {
            field: "gamma_c",
            reason: format!("must be positive, got {gamma_c}"),
        });
    }
    if !(i_minus >= 0.0 && i_plus >= 0.0) {
        return Err(Error::Domain("sideband weights must be nonnegative".into()));
    }
    let n = n_t_c + kappa / gamma_c * (i_minus - i_plus);
    let tol = 1e-9 * (1.0 + n_t_c + kappa / gamma_c * (i_minus + i_plus));
    if n < -tol {
        return Err(Error::NegativeOccupation { value: n });
    }
    Ok(n)
}

/// Local occupations (n_a, n_b) with an empty photonic polariton.
pub fn local_occupations(c_occ: f64, state: &DickeState) -> (f64, f64) {
    let c = &state.coeffs;
    let n_a = c.b * c.b + c.d * c.d + (c.d * c.d + c.g * c.g) * c_occ;
    let n_b = c.b2 * c.b2 + c.d2 * c.d2 + (c.d2 * c.d2 + c.g2 * c.g2) * c_occ;
    (n_a, n_b)
}

/// Two-mode parameters of the displaced model with damping `gamma_b`.
pub fn effective_system_params(
    p: &DickeBareParams,
    state: &DickeState,
    gamma_b: f64,
) -> SystemParams {
    SystemParams {
        setup: Setup::CavityBECMarkovian,
        omega_a: p.omega,
        omega_b: state.omega0_tilde,
        kappa_a: p.kappa,
        gamma_b,
        g_ab: 2.0 * state.lambda_tilde,
        t_b: p.t,
        mu_squeeze: state.mu,
    }
}

/// Polariton steady state and the cavity sidebands it produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidebands {
    /// Sideband offset ε₊ from the probe, rad/s.
    pub omega_s: f64,
    /// Half width at half maximum, rad/s.
    pub hwhm: f64,
    /// Weight D²(⟨c†c⟩ + 1) of the sideband at -ε₊.
    pub i_minus: f64,
    /// Weight G²⟨c†c⟩ of the sideband at +ε₊.
    pub i_plus: f64,
    pub c_occ: f64,
}

/// Steady state of the atomic polariton under the cavity and atomic baths.
pub fn forward_sidebands(p: &DickeBareParams, state: &DickeState) -> Result<Sidebands> {
    let c = &state.coeffs;
    let (g2, d2) = (c.g * c.g, c.d * c.d);
    let hwhm = p.kappa * (g2 - d2) + p.gamma_c;
    if !(hwhm > 0.0) {
        return Err(Error::Domain("atomic polariton is not damped".into()));
    }
    let c_occ = (p.kappa * d2 + p.gamma_c * state.n_t_c) / hwhm;
    Ok(Sidebands {
        omega_s: state.eps_plus,
        hwhm,
        i_minus: d2 * (c_occ + 1.0),
        i_plus: g2 * c_occ,
        c_occ,
    })
}

/// Intermediate products of the reconstruction chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub state: DickeState,
    pub c_occ: f64,
    pub gamma_b: f64,
    pub rates: EntropyRates,
}

/// Sidebands → ⟨c†c⟩ → (n_a, n_b) → γ_b → Π_s.
pub fn reconstruct(p: &DickeBareParams, i_minus: f64, i_plus: f64) -> Result<Reconstruction> {
    if !(p.gamma_c > 0.0) {
        return Err(Error::InvalidParams {
            field: "gamma_c",
            reason: "polariton damping must be positive".into(),
        });
    }
    let state = dicke_state(p)?;
    let c_occ = occupation_from_sidebands(i_minus, i_plus, p.kappa, p.gamma_c, state.n_t_c)?;
    let (n_a, n_b) = local_occupations(c_occ, &state);
    let gamma_b = effective_gamma_b(p, &state)?;
    let sp = effective_system_params(p, &state, gamma_b);
    let occ = Occupations {
        n_a,
        n_b,
        p_b_var: n_b + 0.5,
    };
    let rates = rates_from_occupations(&sp, &occ, is_stable(&drift_matrix(&sp)));
    Ok(Reconstruction {
        state,
        c_occ,
        gamma_b,
        rates,
    })
}

pub fn reconstruct_entropy_production(
    p: &DickeBareParams,
    i_minus: f64,
    i_plus: f64,
) -> Result<EntropyRates> {
    Ok(reconstruct(p, i_minus, i_plus)?.rates)
}

/// Π_s of the forward polariton model (exact sidebands fed through the chain).
pub fn forward_entropy_production(p: &DickeBareParams) -> Result<Reconstruction> {
    let state = dicke_state(p)?;
    let sb = forward_sidebands(p, &state)?;
    reconstruct(p, sb.i_minus, sb.i_plus)
}

/// Π_s from the Lyapunov solution of the two-mode model at the effective γ_b.
pub fn lyapunov_entropy_production(p: &DickeBareParams) -> Result<EntropyRates> {
    let state = dicke_state(p)?;
    let gamma_b = effective_gamma_b(p, &state)?;
    steady_state_entropy_production(&effective_system_params(p, &state, gamma_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_phase_has_no_mean_field() {
        let p = DickeBareParams::table(0.25);
        let (a, b) = mean_fields(&p).unwrap();
        assert_eq!(b, 0.0);
        assert_eq!(a, Complex64::new(0.0, 0.0));
        let bt = displaced_amplitude(b, p.n).unwrap();
        let (w0, mu, l) = effective_params(&p, bt, a);
        assert_eq!((w0, mu, l), (p.omega0, 0.0, p.lambda));
    }

    #[test]
    fn strong_pump_polarizes_fully() {
        let p = DickeBareParams::table(1e12);
        let (_, b) = mean_fields(&p).unwrap();
        assert_relative_eq!(b, p.n as f64 / 2.0, max_relative = 1e-11);
    }

    #[test]
    fn displaced_amplitude_edges() {
        let n = 1000;
        assert_eq!(displaced_amplitude(0.0, n).unwrap(), 0.0);
        assert_relative_eq!(
            displaced_amplitude(500.0, n).unwrap(),
            1000.0 / 2f64.sqrt(),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            displaced_amplitude(-500.0, n).unwrap(),
            -1000.0 / 2f64.sqrt(),
            max_relative = 1e-15
        );
        assert!(displaced_amplitude(501.0, n).is_err());
    }

    #[test]
    fn decoupled_polaritons_are_bare_modes() {
        let pol = polariton_diagonalize(3.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(pol.gamma_s, 0.0);
        assert_relative_eq!(pol.eps_minus, 3.0);
        assert_relative_eq!(pol.eps_plus, 1.0);
        let id = PolaritonCoeffs::identity();
        for (a, b) in [
            (pol.coeffs.a, id.a),
            (pol.coeffs.b, id.b),
            (pol.coeffs.g, id.g),
            (pol.coeffs.d, id.d),
            (pol.coeffs.a2, id.a2),
            (pol.coeffs.b2, id.b2),
            (pol.coeffs.g2, id.g2),
            (pol.coeffs.d2, id.d2),
        ] {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_soft_point() {
        let (w, w0): (f64, f64) = (9.5e7, 5.2e4);
        let l = 0.5 * (w * w0).sqrt();
        let (em, ep) = polariton_energies(w, w0, 0.0, l).unwrap();
        assert!(ep <= 1e-9 * w0);
        assert!(em > 0.0);
        assert!(matches!(
            polariton_energies(w, w0, 0.0, 1.01 * l),
            Err(Error::ComplexMode { .. })
        ));
    }

    #[test]
    fn soft_mode_formulas() {
        assert_eq!(soft_mode_approx(0.0, Phase::Normal, None).unwrap(), 1.0);
        assert_relative_eq!(
            soft_mode_approx(2.0, Phase::Superradiant, None).unwrap(),
            3f64.sqrt()
        );
        assert_eq!(soft_mode_approx(1.0, Phase::Normal, None).unwrap(), 0.0);
        assert!(soft_mode_approx(1.0, Phase::Normal, Some(0.1)).is_err());
        assert!(soft_mode_approx(1.5, Phase::Normal, None).is_err());
        assert!(soft_mode_approx(-0.1, Phase::Normal, None).is_err());
    }

    #[test]
    fn sideband_balance() {
        assert_eq!(
            occupation_from_sidebands(0.3, 0.3, 10.0, 2.0, 0.7).unwrap(),
            0.7
        );
        assert_relative_eq!(
            occupation_from_sidebands(0.5, 0.3, 10.0, 2.0, 0.7).unwrap(),
            1.7,
            max_relative = 1e-14
        );
        assert!(matches!(
            occupation_from_sidebands(0.0, 1.0, 10.0, 2.0, 0.0),
            Err(Error::NegativeOccupation { .. })
        ));
        assert!(occupation_from_sidebands(0.0, 0.0, 10.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn local_occupations_at_identity() {
        let mut s = dicke_state(&DickeBareParams::table(0.0)).unwrap();
        s.coeffs = PolaritonCoeffs::identity();
        assert_eq!(local_occupations(2.5, &s), (0.0, 2.5));
    }

    #[test]
    fn weak_pump_damping_matches_polariton_damping() {
        let p = DickeBareParams::table(1e-8);
        let s = dicke_state(&p).unwrap();
        assert_relative_eq!(
            effective_gamma_b(&p, &s).unwrap(),
            p.gamma_c,
            max_relative = 1e-6
        );
    }

    #[test]
    fn reconstruction_needs_polariton_damping() {
        let mut p = DickeBareParams::table(0.5);
        p.gamma_c = 0.0;
        assert!(reconstruct_entropy_production(&p, 0.1, 0.0).is_err());
    }
}
