use std::path::Path;

use clap::ValueEnum;
use entroprod::dicke::{dicke_state, effective_gamma_b, effective_system_params, DickeBareParams};
use entroprod::dynamics::{coupling_stability_boundary, drift_matrix, is_stable, StabilityClass};
use entroprod::model::{hz_to_rad, BEC_ATOM_NUMBER};
use entroprod::{steady_state_entropy_production, EntropyRates, Setup, SystemParams};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Axis {
    /// g_ab in units of κ_a.
    GAb,
    /// (g_ab/g_cr)², g_cr the drift-matrix stability boundary.
    GOverGcrSq,
    /// (λ/λ_cr)² of the Dicke pump, through the polariton chain.
    PumpX,
}

impl Axis {
    pub fn column(self) -> &'static str {
        match self {
            Axis::GAb => "g_ab_over_kappa_a",
            Axis::GOverGcrSq => "g_over_gcr_sq",
            Axis::PumpX => "pump_x",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Output {
    #[value(name = "Pi_s")]
    PiS,
    #[value(name = "mu_a")]
    MuA,
    #[value(name = "mu_b")]
    MuB,
    #[value(name = "n_a")]
    NA,
    #[value(name = "n_b")]
    NB,
    #[value(name = "eps_plus")]
    EpsPlus,
    #[value(name = "stability_margin")]
    StabilityMargin,
}

impl Output {
    pub const ALL: [Output; 7] = [
        Output::PiS,
        Output::MuA,
        Output::MuB,
        Output::NA,
        Output::NB,
        Output::EpsPlus,
        Output::StabilityMargin,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Output::PiS => "Pi_s",
            Output::MuA => "mu_a",
            Output::MuB => "mu_b",
            Output::NA => "n_a",
            Output::NB => "n_b",
            Output::EpsPlus => "eps_plus",
            Output::StabilityMargin => "stability_margin",
        }
    }
}

/// Polariton damping γ_c as a function of the pump strength.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaC {
    Constant(f64),
    /// Linear interpolation through (x, γ_c) knots sorted by x.
    Profile(Vec<(f64, f64)>),
}

impl GammaC {
    pub fn at(&self, x: f64) -> Result<f64, String> {
        match self {
            GammaC::Constant(g) => Ok(*g),
            GammaC::Profile(k) => {
                let i = k.partition_point(|(kx, _)| *kx < x);
                if i < k.len() && k[i].0 == x {
                    return Ok(k[i].1);
                }
                if i == 0 || i == k.len() {
                    return Err(format!("pump_x = {x} outside the gamma_c profile"));
                }
                let ((x0, g0), (x1, g1)) = (k[i - 1], k[i]);
                Ok(g0 + (g1 - g0) * (x - x0) / (x1 - x0))
            }
        }
    }

    /// Reads `x,gamma_c_hz` rows; the damping is converted to rad/s.
    pub fn from_csv(path: &Path) -> CliResult<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let headers = rdr
            .headers()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "gamma_c_hz"] {
            return Err(CliError::Usage(format!(
                "{}: expected header `x,gamma_c_hz`",
                path.display()
            )));
        }
        let mut knots = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Usage(e.to_string()))?;
            let parse = |j: usize| {
                rec[j]
                    .parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("{} row {}: {e}", path.display(), i + 1)))
            };
            let (x, g) = (parse(0)?, parse(1)?);
            if !(g > 0.0) || !x.is_finite() {
                return Err(CliError::Usage(format!(
                    "{} row {}: invalid knot",
                    path.display(),
                    i + 1
                )));
            }
            knots.push((x, hz_to_rad(g)));
        }
        if knots.is_empty() || knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(CliError::Usage(format!(
                "{}: profile needs strictly increasing x",
                path.display()
            )));
        }
        Ok(GammaC::Profile(knots))
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub base: SystemParams,
    pub outputs: Vec<Output>,
    pub gamma_c: GammaC,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub value: f64,
    /// One entry per requested output; `None` where the point could not be evaluated.
    pub columns: Vec<Option<f64>>,
    pub status: String,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    rates: Option<EntropyRates>,
    eps_plus: Option<f64>,
    margin: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if self.outputs.is_empty() {
            return Err(CliError::Usage("empty output set".into()));
        }
        if self.values.is_empty() {
            return Err(CliError::Usage("no sweep values".into()));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CliError::Usage(
                "sweep values must be finite and nonnegative".into(),
            ));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Usage(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.axis == Axis::PumpX && self.base.setup != Setup::CavityBECMarkovian {
            return Err(CliError::Usage(
                "axis pump_x needs the cavity BEC setup".into(),
            ));
        }
        self.base.validate()?;
        Ok(())
    }

    /// Evaluates every point in parallel; rows come back in sweep order.
    pub fn run(&self) -> CliResult<Vec<Row>> {
        self.validate()?;
        let g_cr = match self.axis {
            Axis::GOverGcrSq => Some(stability_boundary(&self.base)?),
            _ => None,
        };
        Ok(self.values.par_iter().map(|&v| self.row(v, g_cr)).collect())
    }

    fn row(&self, v: f64, g_cr: Option<f64>) -> Row {
        let (point, status) = match self.point(v, g_cr) {
            Ok(pt) => {
                let status = match pt.rates.map(|r| r.stability.class) {
                    Some(StabilityClass::NearCritical) => "near_critical".to_string(),
                    Some(_) => "ok".to_string(),
                    None => "unstable".to_string(),
                };
                (Some(pt), status)
            }
            Err(e) => (None, format!("error: {e}")),
        };
        let columns = self
            .outputs
            .iter()
            .map(|o| {
                let pt = point?;
                let r = pt.rates;
                match o {
                    Output::PiS => r.map(|r| r.pi_s),
                    Output::MuA => r.map(|r| r.mu_a),
                    Output::MuB => r.map(|r| r.mu_b),
                    Output::NA => r.map(|r| r.n_a),
                    Output::NB => r.map(|r| r.n_b),
                    Output::EpsPlus => pt.eps_plus,
                    Output::StabilityMargin => Some(pt.margin),
                }
            })
            .collect();
        Row {
            value: v,
            columns,
            status,
        }
    }

    fn point(&self, v: f64, g_cr: Option<f64>) -> entroprod::Result<Point> {
        let (p, eps_plus) = match self.axis {
            Axis::GAb => (self.base.with_g_ab(v * self.base.kappa_a), None),
            Axis::GOverGcrSq => (self.base.with_g_ab(v.sqrt() * g_cr.unwrap_or(0.0)), None),
            Axis::PumpX => {
                let gamma_c = self.gamma_c.at(v).map_err(entroprod::Error::Domain)?;
                let d = dicke_params(&self.base, gamma_c).with_pump_x(v);
                let state = dicke_state(&d)?;
                let gamma_b = effective_gamma_b(&d, &state)?;
                (
                    effective_system_params(&d, &state, gamma_b),
                    Some(state.eps_plus),
                )
            }
        };
        let stab = is_stable(&drift_matrix(&p));
        let eps_plus = eps_plus.or_else(|| Some(lowest_mode_frequency(&p)));
        if !stab.is_stable() {
            return Ok(Point {
                rates: None,
                eps_plus,
                margin: stab.margin,
            });
        }
        let rates = steady_state_entropy_production(&p)?;
        Ok(Point {
            rates: Some(rates),
            eps_plus,
            margin: rates.stability.margin,
        })
    }
}

/// Bare Dicke parameters sharing the cavity and atomic values of `p`, with polariton damping `gamma_c`.
pub fn dicke_params(p: &SystemParams, gamma_c: f64) -> DickeBareParams {
    DickeBareParams {
        n: BEC_ATOM_NUMBER,
        omega0: p.omega_b,
        omega: p.omega_a,
        kappa: p.kappa_a,
        lambda: 0.0,
        zeta: 0.0,
        t: p.t_b,
        gamma_c,
    }
}

pub fn stability_boundary(p: &SystemParams) -> CliResult<f64> {
    let g_hi = 1e3 * ((p.omega_a * p.omega_b).sqrt() + p.kappa_a);
    coupling_stability_boundary(p, g_hi).map_err(|e| match e {
        entroprod::Error::NoRoot { .. } => CliError::Usage(format!(
            "no stability boundary for g_ab below {g_hi:e} rad/s"
        )),
        e => e.into(),
    })
}

/// Smallest oscillation frequency |Im λ| among the drift-matrix eigenvalues, rad/s.
pub fn lowest_mode_frequency(p: &SystemParams) -> f64 {
    drift_matrix(p)
        .a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.im.abs())
        .fold(f64::INFINITY, f64::min)
}
