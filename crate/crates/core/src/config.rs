//! TOML parameter files.
//!
//! ```toml
//! setup = "optomech"        # or "cavity_bec"
//! omega_a_hz = 1.27815e6
//! omega_b_hz = 1.27815e6
//! kappa_a_hz = 435.849e3
//! gamma_b_hz = 264.1
//! g_ab_hz = 217.9e3
//! T_b_K = 292.0
//! mu_hz = 0.0
//! kappa_1_hz = 357.9e3      # optional, optomech only
//! kappa_2_hz = 77.9e3       # optional, optomech only
//! eta = 1.0                 # optional, optomech only
//! ```
//!
//! Frequencies are in Hz and converted to rad/s. Every error names the key and line.

use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::model::{hz_to_rad, OptomechDetection, Setup, SystemParams, OPTOMECH_COUPLER_FRACTION};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    setup: Spanned<String>,
    omega_a_hz: Spanned<f64>,
    omega_b_hz: Spanned<f64>,
    kappa_a_hz: Spanned<f64>,
    gamma_b_hz: Spanned<f64>,
    g_ab_hz: Spanned<f64>,
    #[serde(rename = "T_b_K")]
    t_b_k: Spanned<f64>,
    mu_hz: Spanned<f64>,
    kappa_1_hz: Option<Spanned<f64>>,
    kappa_2_hz: Option<Spanned<f64>>,
    eta: Option<Spanned<f64>>,
}

/// Parsed parameter file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub params: SystemParams,
    /// Port split and efficiency; present for optomechanical files.
    pub detection: Option<OptomechDetection>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|b| *b == b'\n')
        .count()
        + 1
}

fn key_error<T>(text: &str, key: &str, v: &Spanned<T>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        line: line_of(text, v.span().start),
        message: message.into(),
    }
}

// serde messages name missing or unknown keys in backticks
fn key_from_message(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(msg[start..end].to_string())
}

pub fn parse_config(text: &str) -> Result<Config> {
    let raw: Raw = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(1);
        Error::Config {
            key: key_from_message(e.message()).unwrap_or_default(),
            line,
            message: e.message().trim().to_string(),
        }
    })?;
    let setup: Setup = raw
        .setup
        .get_ref()
        .parse()
        .map_err(|e: Error| key_error(text, "setup", &raw.setup, e.to_string()))?;

    let fields = [
        ("omega_a_hz", &raw.omega_a_hz),
        ("omega_b_hz", &raw.omega_b_hz),
        ("kappa_a_hz", &raw.kappa_a_hz),
        ("gamma_b_hz", &raw.gamma_b_hz),
        ("g_ab_hz", &raw.g_ab_hz),
        ("T_b_K", &raw.t_b_k),
        ("mu_hz", &raw.mu_hz),
    ];
    for (key, v) in fields {
        if !v.get_ref().is_finite() {
            return Err(key_error(text, key, v, "must be finite"));
        }
    }
    for (key, v) in &fields[..3] {
        if !(*v.get_ref() > 0.0) {
            return Err(key_error(text, key, v, "must be positive"));
        }
    }
    for (key, v) in [fields[3], fields[4], fields[5]] {
        if *v.get_ref() < 0.0 {
            return Err(key_error(text, key, v, "must be nonnegative"));
        }
    }
    if setup == Setup::OptomechBrownian && *raw.mu_hz.get_ref() != 0.0 {
        return Err(key_error(
            text,
            "mu_hz",
            &raw.mu_hz,
            "must be 0 for the optomechanical setup",
        ));
    }

    let params = SystemParams {
        setup,
        omega_a: hz_to_rad(*raw.omega_a_hz.get_ref()),
        omega_b: hz_to_rad(*raw.omega_b_hz.get_ref()),
        kappa_a: hz_to_rad(*raw.kappa_a_hz.get_ref()),
        gamma_b: hz_to_rad(*raw.gamma_b_hz.get_ref()),
        g_ab: hz_to_rad(*raw.g_ab_hz.get_ref()),
        t_b: *raw.t_b_k.get_ref(),
        mu_squeeze: hz_to_rad(*raw.mu_hz.get_ref()),
    }
    .validated()
    .map_err(|e| key_error(text, "setup", &raw.setup, e.to_string()))?;

    let detection = match setup {
        Setup::CavityBECMarkovian => {
            for (key, v) in [
                ("kappa_1_hz", &raw.kappa_1_hz),
                ("kappa_2_hz", &raw.kappa_2_hz),
                ("eta", &raw.eta),
            ] {
                if let Some(v) = v {
                    return Err(key_error(
                        text,
                        key,
                        v,
                        "only valid for the optomechanical setup",
                    ));
                }
            }
            None
        }
        Setup::OptomechBrownian => Some(detection(text, &raw, params.kappa_a)?),
    };
    Ok(Config { params, detection })
}

fn detection(text: &str, raw: &Raw, kappa: f64) -> Result<OptomechDetection> {
    let eta = raw.eta.as_ref().map_or(1.0, |v| *v.get_ref());
    let hz = |v: &Option<Spanned<f64>>| v.as_ref().map(|v| hz_to_rad(*v.get_ref()));
    let (k1, k2) = match (hz(&raw.kappa_1_hz), hz(&raw.kappa_2_hz)) {
        (None, None) => {
            let d = OptomechDetection::from_fraction(kappa, OPTOMECH_COUPLER_FRACTION, eta);
            (d.kappa_1, d.kappa_2)
        }
        (Some(k1), None) => (k1, kappa - k1),
        (None, Some(k2)) => (kappa - k2, k2),
        (Some(k1), Some(k2)) => (k1, k2),
    };
    let d = OptomechDetection {
        kappa_1: k1,
        kappa_2: k2,
        eta,
    };
    let probe = SystemParams {
        setup: Setup::OptomechBrownian,
        omega_a: 1.0,
        omega_b: 1.0,
        kappa_a: kappa,
        gamma_b: 0.0,
        g_ab: 0.0,
        t_b: 0.0,
        mu_squeeze: 0.0,
    };
    d.validate_for(&probe).map_err(|e| {
        let (key, span) = match &e {
            Error::InvalidParams { field: "eta", .. } => ("eta", raw.eta.as_ref()),
            _ => match (&raw.kappa_1_hz, &raw.kappa_2_hz) {
                (Some(v), _) => ("kappa_1_hz", Some(v)),
                (None, Some(v)) => ("kappa_2_hz", Some(v)),
                _ => ("kappa_a_hz", Some(&raw.kappa_a_hz)),
            },
        };
        let line = span.map_or(1, |v| line_of(text, v.span().start));
        Error::Config {
            key: key.into(),
            line,
            message: e.to_string(),
        }
    })?;
    Ok(d)
}

pub fn load_config(path: &Path) -> Result<Config> {
    parse_config(&std::fs::read_to_string(path)?)
}
