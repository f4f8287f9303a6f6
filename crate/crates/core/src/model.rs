//! Physical parameters, unit conventions and the two experimental presets.
//!
//! Every frequency and rate is stored in rad/s. Config files and the CLI work
//! in Hz and convert on the way in.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Atom number of the cavity-BEC experiment.
pub const BEC_ATOM_NUMBER: u64 = 100_000;
/// Effective mass of the mechanical oscillator, kg.
pub const OPTOMECH_MASS_KG: f64 = 176e-12;
/// Atomic damping used by the BEC preset when no working-point value is given.
/// Synthetic: the experiment only quotes it per working point.
pub const SYNTHETIC_BEC_GAMMA_B: f64 = TAU * 200.0;

pub fn hz_to_rad(f: f64) -> f64 {
    TAU * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    /// Mechanical oscillator with a Brownian (position-free) bath; damping only on p.
    OptomechBrownian,
    /// Atomic density mode of a BEC with Markovian damping on both quadratures.
    CavityBECMarkovian,
}

impl Setup {
    pub fn name(self) -> &'static str {
        match self {
            Setup::OptomechBrownian => "optomech",
            Setup::CavityBECMarkovian => "cavity_bec",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Setup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "optomech" | "optomechanics" | "optomech_brownian" | "optomechbrownian" => {
                Ok(Setup::OptomechBrownian)
            }
            "cavity_bec" | "bec" | "cavitybec" | "cavity_bec_markovian" | "cavitybecmarkovian" => {
                Ok(Setup::CavityBECMarkovian)
            }
            other => Err(Error::Domain(format!("unknown setup `{other}`"))),
        }
    }
}

/// Parameters of the two coupled oscillators.
///
/// Mode `a` is the cavity field, mode `b` the mechanical or atomic mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub setup: Setup,
    /// Cavity detuning (optomechanics: Δ; Dicke: ω).
    pub omega_a: f64,
    /// Mechanical or atomic frequency (ω_m, or ω̃₀ for the BEC).
    pub omega_b: f64,
    /// Total cavity amplitude decay rate.
    pub kappa_a: f64,
    pub gamma_b: f64,
    /// Bilinear coupling. For optomechanics this is 2G.
    pub g_ab: f64,
    /// Bath temperature of mode b, kelvin.
    pub t_b: f64,
    /// Atomic squeezing term μ; zero for optomechanics.
    pub mu_squeeze: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("kappa_a", self.kappa_a),
            ("gamma_b", self.gamma_b),
            ("g_ab", self.g_ab),
            ("T_b", self.t_b),
            ("mu_squeeze", self.mu_squeeze),
        ];
        for (field, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("{v} is not finite"),
                });
            }
        }
        for (field, v) in [
            ("omega_a", self.omega_a),
            ("omega_b", self.omega_b),
            ("kappa_a", self.kappa_a),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be > 0, got {v}"),
                });
            }
        }
        for (field, v) in [
            ("gamma_b", self.gamma_b),
            ("g_ab", self.g_ab),
            ("T_b", self.t_b),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidParams {
                    field,
                    reason: format!("must be >= 0, got {v}"),
                });
            }
        }
        if self.setup == Setup::OptomechBrownian && self.mu_squeeze != 0.0 {
            return Err(Error::InvalidParams {
                field: "mu_squeeze",
                reason: "must be zero for the optomechanical setup".into(),
            });
        }
        Ok(())
    }

    pub fn validated(self) -> Result<Self> {
        self.validate().map(|_| self)
    }

    pub fn with_g_ab(mut self, g_ab: f64) -> Self {
        self.g_ab = g_ab;
        self
    }

    pub fn with_gamma_b(mut self, gamma_b: f64) -> Self {
        self.gamma_b = gamma_b;
        self
    }

    /// Thermal occupation of mode b at its bath temperature.
    pub fn n_thermal(&self) -> f64 {
        thermal_occupation(self.omega_b, self.t_b).unwrap_or(0.0)
    }

    /// Standard optomechanical coupling G (half of g_ab).
    pub fn optomech_g(&self) -> f64 {
        g_ab_to_optomech_g(self.g_ab)
    }
}

pub fn g_ab_to_optomech_g(g_ab: f64) -> f64 {
    0.5 * g_ab
}

pub fn optomech_g_to_g_ab(g: f64) -> f64 {
    2.0 * g
}

/// Port structure of the optomechanical cavity and detector efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptomechDetection {
    pub kappa_1: f64,
    pub kappa_2: f64,
    pub eta: f64,
}

/// Coupler share κ₁/κ of the optomechanical cavity: input-mirror transmission
/// 3e-4 over the round-trip loss 2π/F at finesse F = 17200.
pub const OPTOMECH_COUPLER_FRACTION: f64 = 3e-4 * 17200.0 / TAU;

impl OptomechDetection {
    /// Table cavity with ideal detection (η = 1).
    pub fn table(kappa: f64) -> Self {
        Self::from_fraction(kappa, OPTOMECH_COUPLER_FRACTION, 1.0)
    }

    /// Split `kappa` into coupler and internal loss with coupler fraction `frac`.
    pub fn from_fraction(kappa: f64, frac: f64, eta: f64) -> Self {
        let kappa_1 = kappa * frac;
        OptomechDetection {
            kappa_1,
            kappa_2: kappa - kappa_1,
            eta,
        }
    }

    pub fn validate_for(&self, p: &SystemParams) -> Result<()> {
        if !(self.kappa_1 >= 0.0 && self.kappa_2 >= 0.0) {
            return Err(Error::InvalidParams {
                field: "kappa_1",
                reason: "port rates must be nonnegative".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::InvalidParams {
                field: "eta",
                reason: format!("must lie in [0, 1], got {}", self.eta),
            });
        }
        let sum = self.kappa_1 + self.kappa_2;
        if (sum - p.kappa_a).abs() > 1e-12 * p.kappa_a {
            return Err(Error::InvalidParams {
                field: "kappa_2",
                reason: format!(
                    "kappa_1 + kappa_2 = {sum} differs from kappa_a = {}",
                    p.kappa_a
                ),
            });
        }
        Ok(())
    }
}

/// Drive-side quantities of the optomechanical experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    pub g0: f64,
    pub cavity_length: f64,
    pub x_zpf: f64,
    pub m_eff: f64,
    pub power: f64,
    pub e_amp: f64,
    pub delta_tilde: f64,
}

impl DriveParams {
    /// Drive amplitude from the input power through the coupler at laser frequency `omega_p`.
    pub fn drive_amplitude(power: f64, kappa_1: f64, omega_p: f64) -> f64 {
        (2.0 * power * kappa_1 / (HBAR * omega_p)).sqrt()
    }

    /// Enhanced coupling G for total decay `kappa` and effective detuning `delta`.
    pub fn enhanced_coupling(&self, kappa: f64, delta: f64) -> f64 {
        std::f64::consts::SQRT_2 * self.g0 * self.e_amp.abs()
            / (kappa * kappa + delta * delta).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Optomechanics,
    CavityBec,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "optomechanics" | "optomech" => Ok(Preset::Optomechanics),
            "cavity-bec" | "cavitybec" | "bec" => Ok(Preset::CavityBec),
            other => Err(Error::Domain(format!("unknown preset `{other}`"))),
        }
    }
}

/// Table values of the two experiments, in rad/s.
///
/// The optomechanical data are taken at ω_a = ω_b. The BEC damping depends on
/// the working point; the preset carries [`SYNTHETIC_BEC_GAMMA_B`] and callers
/// are expected to override it.
pub fn preset(name: Preset) -> SystemParams {
    match name {
        Preset::Optomechanics => {
            let omega_m = hz_to_rad(1.27815e6);
            SystemParams {
                setup: Setup::OptomechBrownian,
                omega_a: omega_m,
                omega_b: omega_m,
                kappa_a: hz_to_rad(435.849e3),
                gamma_b: hz_to_rad(264.1),
                g_ab: 0.0,
                t_b: 292.0,
                mu_squeeze: 0.0,
            }
        }
        Preset::CavityBec => SystemParams {
            setup: Setup::CavityBECMarkovian,
            omega_a: hz_to_rad(15.13e6),
            omega_b: hz_to_rad(8.3e3),
            kappa_a: hz_to_rad(1.25e6),
            gamma_b: SYNTHETIC_BEC_GAMMA_B,
            g_ab: 0.0,
            t_b: 38e-9,
            mu_squeeze: 0.0,
        },
    }
}

/// Bose-Einstein occupation 1/(exp(ħω/k_BT) - 1). Exactly zero at T = 0.
pub fn thermal_occupation(omega: f64, t: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!(
            "frequency must be positive, got {omega}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("temperature must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * t);
    // exp_m1 overflows to inf for large x, which gives the right limit 0.
    Ok(1.0 / x.exp_m1())
}

fn require_bec(p: &SystemParams) -> Result<()> {
    if p.setup != Setup::CavityBECMarkovian {
        return Err(Error::WrongSetup {
            expected: "CavityBECMarkovian",
        });
    }
    Ok(())
}

/// Critical coupling in the normalization of the cavity-BEC figure:
/// sqrt((κ² + ω_a²) ω_b / (4 ω_a)).
pub fn critical_coupling(p: &SystemParams) -> Result<f64> {
    require_bec(p)?;
    let (k, wa, wb) = (p.kappa_a, p.omega_a, p.omega_b);
    Ok(((k * k + wa * wa) * wb / (4.0 * wa)).sqrt())
}

/// Value of g_ab at which the drift matrix loses stability for γ_b → 0,
/// sqrt((ω_b - 4μ)(κ² + ω_a²)/ω_a). Equals 2λ_cr of the Dicke model.
pub fn critical_coupling_drift(p: &SystemParams) -> Result<f64> {
    require_bec(p)?;
    let (k, wa, wb) = (p.kappa_a, p.omega_a, p.omega_b);
    let stiff = wb - 4.0 * p.mu_squeeze;
    if stiff <= 0.0 {
        return Err(Error::Domain("ω_b - 4μ must be positive".into()));
    }
    Ok((stiff * (k * k + wa * wa) / wa).sqrt())
}
