//! Density-noise-spectrum data, least-squares fits of model spectra and
//! sideband integrals.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{thermal_occupation, OptomechDetection, SystemParams};
use crate::spectra::{output_phase_spectrum, BathKernel};

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnsDataset {
    pub freq_hz: Vec<f64>,
    pub psd: Vec<f64>,
    pub sigma_psd: Option<Vec<f64>>,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnsFormat {
    Csv,
}

/// Default minimum number of points in a dataset.
pub const MIN_POINTS: usize = 16;

impl DnsDataset {
    pub fn new(freq_hz: Vec<f64>, psd: Vec<f64>, sigma_psd: Option<Vec<f64>>) -> Result<Self> {
        let d = DnsDataset {
            freq_hz,
            psd,
            sigma_psd,
            meta: BTreeMap::new(),
        };
        d.validate(MIN_POINTS)?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.freq_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq_hz.is_empty()
    }

    pub fn validate(&self, min_points: usize) -> Result<()> {
        let bad = |field: &str, message: String| Error::Validation {
            field: field.into(),
            message,
        };
        if self.psd.len() != self.freq_hz.len() {
            return Err(bad("psd", "length differs from freq_hz".into()));
        }
        if let Some(s) = &self.sigma_psd {
            if s.len() != self.freq_hz.len() {
                return Err(bad("sigma_psd", "length differs from freq_hz".into()));
            }
            if let Some(i) = s.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(bad(
                    "sigma_psd",
                    format!("row {i}: must be positive, got {}", s[i]),
                ));
            }
        }
        if self.len() < min_points {
            return Err(bad(
                "freq_hz",
                format!("{} points, need at least {min_points}", self.len()),
            ));
        }
        if let Some(i) = self.freq_hz.iter().position(|f| !f.is_finite()) {
            return Err(bad("freq_hz", format!("row {i}: not finite")));
        }
        if let Some(i) = self.freq_hz.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(bad(
                "freq_hz",
                format!("row {}: not strictly increasing", i + 1),
            ));
        }
        if let Some(i) = self.psd.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(bad(
                "psd",
                format!("row {i}: must be finite and >= 0, got {}", self.psd[i]),
            ));
        }
        Ok(())
    }

    /// Writes `# key: value` comments, the header and one row per point.
    /// Floats use the shortest representation that reads back exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}: {v}")?;
        }
        match &self.sigma_psd {
            Some(s) => {
                writeln!(w, "freq_hz,psd,sigma_psd")?;
                for ((f, v), e) in self.freq_hz.iter().zip(&self.psd).zip(s) {
                    writeln!(w, "{f:e},{v:e},{e:e}")?;
                }
            }
            None => {
                writeln!(w, "freq_hz,psd")?;
                for (f, v) in self.freq_hz.iter().zip(&self.psd) {
                    writeln!(w, "{f:e},{v:e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Parse a DNS table. Comment lines start with `#`; comments of the form
/// `# key: value` are kept in `meta`.
pub fn ingest_dns<R: Read>(reader: R, format: DnsFormat, min_points: usize) -> Result<DnsDataset> {
    let DnsFormat::Csv = format;
    let mut meta = BTreeMap::new();
    let mut header: Option<Vec<String>> = None;
    let (mut f, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(c) = t.strip_prefix('#') {
            if let Some((k, v)) = c.split_once(':') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
            continue;
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(t.as_bytes());
        let rec = rdr
            .records()
            .next()
            .transpose()
            .map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?
            .unwrap_or_default();
        let cells: Vec<&str> = rec.iter().map(str::trim).collect();
        let Some(cols) = &header else {
            if cells != ["freq_hz", "psd"] && cells != ["freq_hz", "psd", "sigma_psd"] {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header `freq_hz,psd[,sigma_psd]`, got `{t}`"),
                });
            }
            header = Some(cells.iter().map(|c| c.to_string()).collect());
            continue;
        };
        if cells.len() != cols.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, got {}", cols.len(), cells.len()),
            });
        }
        let mut vals = [0.0; 3];
        for (k, c) in cells.iter().enumerate() {
            vals[k] = c.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("{}: `{c}`: {e}", cols[k]),
            })?;
            if vals[k].is_nan() {
                return Err(Error::Validation {
                    field: cols[k].clone(),
                    message: format!("NaN on line {line_no}"),
                });
            }
        }
        f.push(vals[0]);
        p.push(vals[1]);
        if cols.len() == 3 {
            s.push(vals[2]);
        }
    }
    let Some(cols) = header else {
        return Err(Error::Parse {
            line: 0,
            message: "missing header".into(),
        });
    };
    let d = DnsDataset {
        freq_hz: f,
        psd: p,
        sigma_psd: (cols.len() == 3).then_some(s),
        meta,
    };
    d.validate(min_points)?;
    Ok(d)
}

pub fn ingest_dns_path(path: &Path, min_points: usize) -> Result<DnsDataset> {
    let mut d = ingest_dns(std::fs::File::open(path)?, DnsFormat::Csv, min_points)?;
    d.meta
        .entry("source".into())
        .or_insert_with(|| path.display().to_string());
    Ok(d)
}

/// Multiply each value by (1 + rel·ξ), ξ standard normal, from a seeded stream.
pub fn multiplicative_noise(values: &[f64], rel: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values
        .iter()
        .map(|v| {
            let xi: f64 = rng.sample(StandardNormal);
            (v * (1.0 + rel * xi)).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FitModel {
    /// gain · S_out(ω) + offset for the phase quadrature of the optomechanical cavity.
    /// Fit parameters: g_ab, gamma_b, omega_b, detuning, T_eff, gain, offset (rad/s, K).
    OutputPhaseOptomech {
        base: SystemParams,
        detection: OptomechDetection,
        kernel: BathKernel,
    },
    /// Pair of Lorentzian sidebands at ±ω_s with areas gain·(n + 1) and gain·n,
    /// n the Bose occupation at ω_s and T_eff, plus offset.
    /// Fit parameters: omega_b (= ω_s), gamma_b (half width), T_eff, gain, offset.
    CavityHeterodyneBEC,
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            FitModel::OutputPhaseOptomech { .. } => "OutputPhaseOptomech",
            FitModel::CavityHeterodyneBEC => "CavityHeterodyneBEC",
        }
    }

    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            FitModel::OutputPhaseOptomech { .. } => &[
                "g_ab", "gamma_b", "omega_b", "detuning", "T_eff", "gain", "offset",
            ],
            FitModel::CavityHeterodyneBEC => &["omega_b", "gamma_b", "T_eff", "gain", "offset"],
        }
    }

    /// Values used for parameters absent from the initial map.
    pub fn defaults(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        if let FitModel::OutputPhaseOptomech { base, .. } = self {
            m.insert("g_ab".into(), base.g_ab);
            m.insert("gamma_b".into(), base.gamma_b);
            m.insert("omega_b".into(), base.omega_b);
            m.insert("detuning".into(), base.omega_a);
            m.insert("T_eff".into(), base.t_b);
        }
        m.insert("gain".into(), 1.0);
        m.insert("offset".into(), 0.0);
        m
    }

    /// Model PSD at the given frequencies (Hz) for a complete parameter map.
    pub fn evaluate(&self, params: &BTreeMap<String, f64>, freq_hz: &[f64]) -> Result<Vec<f64>> {
        let get = |k: &str| {
            params.get(k).copied().ok_or_else(|| Error::Validation {
                field: k.into(),
                message: "missing parameter value".into(),
            })
        };
        let (gain, offset) = (get("gain")?, get("offset")?);
        match self {
            FitModel::OutputPhaseOptomech {
                base,
                detection,
                kernel,
            } => {
                let mut p = *base;
                p.g_ab = get("g_ab")?;
                p.gamma_b = get("gamma_b")?;
                p.omega_b = get("omega_b")?;
                p.omega_a = get("detuning")?;
                p.t_b = get("T_eff")?;
                p.validate()?;
                let grid: Vec<f64> = freq_hz.iter().map(|f| TAU * f).collect();
                let s = output_phase_spectrum(&p, detection, &grid, *kernel)?;
                Ok(s.values.iter().map(|v| gain * v + offset).collect())
            }
            FitModel::CavityHeterodyneBEC => {
                let (ws, hw, t) = (get("omega_b")?, get("gamma_b")?, get("T_eff")?);
                if !(hw > 0.0) {
                    return Err(Error::Domain("sideband width must be positive".into()));
                }
                let n = thermal_occupation(ws, t)?;
                let (f0, g) = (ws / TAU, hw / TAU);
                let lor = |f: f64, c: f64| g / std::f64::consts::PI / ((f - c) * (f - c) + g * g);
                Ok(freq_hz
                    .iter()
                    .map(|&f| gain * ((n + 1.0) * lor(f, -f0) + n * lor(f, f0)) + offset)
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    /// All parameter values, fitted and fixed.
    pub params: BTreeMap<String, f64>,
    /// Names of the fitted parameters, in covariance order.
    pub fitted: Vec<String>,
    pub std_errors: BTreeMap<String, f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2_reduced: f64,
    pub converged: bool,
    pub iterations: usize,
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub rel_cost_tol: f64,
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            rel_cost_tol: 1e-10,
            grad_tol: 1e-8,
        }
    }
}

pub fn fit_spectrum(
    data: &DnsDataset,
    model: &FitModel,
    init: &BTreeMap<String, f64>,
    frozen: &BTreeSet<String>,
) -> Result<FitResult> {
    fit_spectrum_with(data, model, init, frozen, FitOptions::default())
}

/// Damped Gauss-Newton (Levenberg-Marquardt) on σ-weighted residuals.
///
/// Parameters listed in `init` and not in `frozen` are fitted; everything else
/// stays at its initial or default value. The fitted parameters are scaled by
/// the magnitude of their initial values.
pub fn fit_spectrum_with(
    data: &DnsDataset,
    model: &FitModel,
    init: &BTreeMap<String, f64>,
    frozen: &BTreeSet<String>,
    opts: FitOptions,
) -> Result<FitResult> {
    let names = model.parameter_names();
    for k in init.keys().chain(frozen.iter()) {
        if !names.contains(&k.as_str()) {
            return Err(Error::Validation {
                field: k.clone(),
                message: format!("not a parameter of {}", model.name()),
            });
        }
    }
    let mut all = model.defaults();
    all.extend(init.iter().map(|(k, v)| (k.clone(), *v)));
    for n in names {
        if !all.contains_key(*n) {
            return Err(Error::Validation {
                field: n.to_string(),
                message: "needs an initial value".into(),
            });
        }
    }
    let free: Vec<String> = names
        .iter()
        .filter(|n| init.contains_key(**n) && !frozen.contains(**n))
        .map(|n| n.to_string())
        .collect();
    let m = data.len();
    let k = free.len();
    if k == 0 || k >= m {
        return Err(Error::Validation {
            field: "init".into(),
            message: format!("{k} free parameters for {m} points"),
        });
    }
    let scale: Vec<f64> = free
        .iter()
        .map(|n| {
            let v = all[n].abs();
            if v > 0.0 {
                v
            } else {
                1.0
            }
        })
        .collect();
    let weights: Vec<f64> = match &data.sigma_psd {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; m],
    };

    let params_at = |x: &DVector<f64>| {
        let mut p = all.clone();
        for (i, n) in free.iter().enumerate() {
            p.insert(n.clone(), x[i] * scale[i]);
        }
        p
    };
    let residuals = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let y = model.evaluate(&params_at(x), &data.freq_hz)?;
        Ok(DVector::from_fn(m, |i, _| {
            (y[i] - data.psd[i]) * weights[i]
        }))
    };
    let jacobian = |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(m, k);
        for c in 0..k {
            let h = 1e-6 * x[c].abs().max(1e-3);
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[c] += h;
            xm[c] -= h;
            let (rp, rm) = (residuals(&xp)?, residuals(&xm)?);
            j.set_column(c, &((rp - rm) / (2.0 * h)));
        }
        Ok(j)
    };

    let mut x = DVector::from_fn(k, |i, _| all[&free[i]] / scale[i]);
    let mut r = residuals(&x)?;
    let mut cost = 0.5 * r.norm_squared();
    let mut jac = jacobian(&x)?;
    let mut jtj = jac.transpose() * &jac;
    let mut grad = jac.transpose() * &r;
    let diag_floor = 1e-12 * jtj.diagonal().max();
    let mut lambda = 1e-3;
    let mut converged = cost == 0.0 || grad.amax() < opts.grad_tol;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let mut accepted = false;
        while !accepted {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let step = a.cholesky().map(|c| c.solve(&(-&grad)));
            let trial = step
                .map(|s| &x + s)
                .and_then(|xt| residuals(&xt).ok().map(|rt| (xt, rt)));
            match trial {
                Some((xt, rt)) if 0.5 * rt.norm_squared() < cost => {
                    let new_cost = 0.5 * rt.norm_squared();
                    let rel = (cost - new_cost) / cost;
                    x = xt;
                    r = rt;
                    cost = new_cost;
                    jac = jacobian(&x)?;
                    jtj = jac.transpose() * &jac;
                    grad = jac.transpose() * &r;
                    lambda /= 10.0;
                    accepted = true;
                    converged =
                        rel < opts.rel_cost_tol || grad.amax() < opts.grad_tol || cost == 0.0;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > 1e20 {
                        // no downhill step at machine precision: accept if the residual is
                        // orthogonal to every Jacobian column
                        let rn = r.norm();
                        converged = grad.amax() < opts.grad_tol
                            || (0..k).all(|i| grad[i].abs() <= 1e-6 * rn * jtj[(i, i)].sqrt());
                        break;
                    }
                }
            }
        }
        if !accepted {
            break;
        }
    }

    let dof = (m - k) as f64;
    let chi2_reduced = 2.0 * cost / dof;
    let inv = jtj.clone().try_inverse().ok_or(Error::SingularJacobian)?;
    if inv.iter().any(|v| !v.is_finite()) || (0..k).any(|i| !(inv[(i, i)] > 0.0)) {
        return Err(Error::SingularJacobian);
    }
    let var_scale = if data.sigma_psd.is_some() {
        1.0
    } else {
        chi2_reduced
    };
    let covariance: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| inv[(i, j)] * scale[i] * scale[j] * var_scale)
                .collect()
        })
        .collect();
    let std_errors = free
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), covariance[i][i].sqrt()))
        .collect();
    let mut meta = BTreeMap::new();
    meta.insert(
        "weighting".into(),
        if data.sigma_psd.is_some() {
            "sigma_psd".into()
        } else {
            "uniform; errors scaled by chi2_reduced".into()
        },
    );
    Ok(FitResult {
        model: model.name().into(),
        params: params_at(&x),
        fitted: free,
        std_errors,
        covariance,
        chi2_reduced,
        converged,
        iterations,
        meta,
    })
}

fn interp(x: &[f64], y: &[f64], t: f64) -> f64 {
    let i = x.partition_point(|v| *v <= t).clamp(1, x.len() - 1);
    let (x0, x1, y0, y1) = (x[i - 1], x[i], y[i - 1], y[i]);
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

fn window_integral(x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let mut xs = vec![lo];
    let mut ys = vec![interp(x, y, lo)];
    for (xi, yi) in x.iter().zip(y) {
        if *xi > lo && *xi < hi {
            xs.push(*xi);
            ys.push(*yi);
        }
    }
    xs.push(hi);
    ys.push(interp(x, y, hi));
    crate::quadrature::trapezoid(&xs, &ys)
}

/// Background-subtracted areas (in PSD·Hz) of the windows centered on -ω_s
/// (`I_minus`) and +ω_s (`I_plus`). The background is the median PSD outside
/// both windows.
pub fn sideband_integrals(data: &DnsDataset, omega_s: f64, half_width: f64) -> Result<(f64, f64)> {
    let (fs, hw) = (omega_s / TAU, half_width / TAU);
    if !(fs > 0.0 && hw > 0.0) {
        return Err(Error::Domain(
            "sideband position and width must be positive".into(),
        ));
    }
    let (lo, hi) = (-fs - hw, fs + hw);
    let (first, last) = (data.freq_hz[0], data.freq_hz[data.len() - 1]);
    if lo < first || hi > last || hw >= fs {
        return Err(Error::WindowOutOfRange {
            lo: lo * TAU,
            hi: hi * TAU,
        });
    }
    let inside = |f: f64| (f - fs).abs() <= hw || (f + fs).abs() <= hw;
    let mut outside: Vec<f64> = data
        .freq_hz
        .iter()
        .zip(&data.psd)
        .filter(|(f, _)| !inside(**f))
        .map(|(_, p)| *p)
        .collect();
    if outside.is_empty() {
        return Err(Error::WindowOutOfRange {
            lo: lo * TAU,
            hi: hi * TAU,
        });
    }
    outside.sort_by(f64::total_cmp);
    let n = outside.len();
    let bg = if n % 2 == 1 {
        outside[n / 2]
    } else {
        0.5 * (outside[n / 2 - 1] + outside[n / 2])
    };
    let y: Vec<f64> = data.psd.iter().map(|p| p - bg).collect();
    let x = &data.freq_hz;
    Ok((
        window_integral(x, &y, -fs - hw, -fs + hw),
        window_integral(x, &y, fs - hw, fs + hw),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "# source: unit\nfreq_hz,psd\n1.0,2.0\n2.0,3.0\n3.0,4.5\n";

    #[test]
    fn parse_small_file_with_relaxed_length() {
        let d = ingest_dns(SMALL.as_bytes(), DnsFormat::Csv, 3).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.meta["source"], "unit");
        assert!(ingest_dns(SMALL.as_bytes(), DnsFormat::Csv, MIN_POINTS).is_err());
    }

    #[test]
    fn negative_psd_is_a_validation_error() {
        let text = "freq_hz,psd\n1,2\n2,-3\n";
        match ingest_dns(text.as_bytes(), DnsFormat::Csv, 1) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "psd"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# c\nfreq_hz,psd\n1,2\n2,abc\n";
        match ingest_dns(text.as_bytes(), DnsFormat::Csv, 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        match ingest_dns("f,p\n".as_bytes(), DnsFormat::Csv, 1) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let nan = "freq_hz,psd\n1,NaN\n";
        assert!(matches!(
            ingest_dns(nan.as_bytes(), DnsFormat::Csv, 1),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn noise_is_seeded() {
        let v = vec![1.0; 10];
        assert_eq!(
            multiplicative_noise(&v, 0.01, 3),
            multiplicative_noise(&v, 0.01, 3)
        );
        assert_ne!(
            multiplicative_noise(&v, 0.01, 3),
            multiplicative_noise(&v, 0.01, 4)
        );
    }
}
