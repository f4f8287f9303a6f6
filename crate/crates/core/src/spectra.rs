//! Optomechanical noise spectra, the extra-cavity detection chain and spectral
//! integration back to quadrature variances.
//!
//! All densities are symmetrized and normalized so that a variance is
//! `∫ dω/2π S(ω)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{drift_matrix, is_stable, Mat4};
use crate::error::{Error, Result};
use crate::model::{OptomechDetection, Setup, SystemParams, HBAR, K_B};
use crate::quadrature::{adaptive_grid, power_law_tail, simpson, trapezoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumKind {
    Sx,
    Sy,
    Sq,
    SyOut,
    SxOut,
}

/// Thermal kernel of the mechanical bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BathKernel {
    /// ω coth(ħω/2k_BT).
    Full,
    /// White-noise replacement (2n_T + 1) ω_m, consistent with the diffusion matrix.
    Markovian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub params_hash: String,
}

impl Spectrum {
    pub fn new(
        omega_grid: Vec<f64>,
        values: Vec<f64>,
        kind: SpectrumKind,
        params_hash: String,
    ) -> Result<Self> {
        if omega_grid.len() != values.len() {
            return Err(Error::GridMismatch);
        }
        check_grid(&omega_grid)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "spectral value {v} is not a finite nonnegative number"
            )));
        }
        Ok(Spectrum {
            omega_grid,
            values,
            kind,
            params_hash,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with header `omega_rad_s,value` and 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "omega_rad_s,value")?;
        for (x, y) in self.omega_grid.iter().zip(&self.values) {
            writeln!(w, "{x:.16e},{y:.16e}")?;
        }
        Ok(())
    }

    /// JSON document with a metadata block and the data columns.
    pub fn to_json(&self, params: &SystemParams) -> serde_json::Value {
        serde_json::json!({
            "metadata": {
                "kind": self.kind,
                "params": params,
                "params_hash": self.params_hash,
            },
            "omega_rad_s": self.omega_grid,
            "value": self.values,
        })
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|w| !w.is_finite()) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "frequency grid must be finite and strictly increasing".into(),
        ));
    }
    Ok(())
}

pub fn params_hash(p: &SystemParams, extra: &[u64]) -> String {
    let mut h = DefaultHasher::new();
    p.setup.hash(&mut h);
    for v in [
        p.omega_a,
        p.omega_b,
        p.kappa_a,
        p.gamma_b,
        p.g_ab,
        p.t_b,
        p.mu_squeeze,
    ] {
        v.to_bits().hash(&mut h);
    }
    extra.hash(&mut h);
    format!("{:016x}", h.finish())
}

/// ω coth(ħω / 2k_BT), continuous through ω = 0 and equal to |ω| at T = 0.
pub fn coth_factor(omega: f64, t: f64) -> f64 {
    if t == 0.0 {
        return omega.abs();
    }
    let x = HBAR * omega / (2.0 * K_B * t);
    if x.abs() < 1e-6 {
        2.0 * K_B * t / HBAR + HBAR * omega * omega / (6.0 * K_B * t)
    } else {
        omega / x.tanh()
    }
}

/// Closed-form ingredients of the linearized optomechanical response.
#[derive(Debug, Clone, Copy)]
struct Optomech {
    delta: f64,
    kappa: f64,
    gamma: f64,
    omega_m: f64,
    g: f64,
    t: f64,
    n_t: f64,
    kernel: BathKernel,
}

impl Optomech {
    fn new(p: &SystemParams, kernel: BathKernel) -> Result<Self> {
        if p.setup != Setup::OptomechBrownian {
            return Err(Error::WrongSetup {
                expected: "OptomechBrownian",
            });
        }
        let stab = is_stable(&drift_matrix(p));
        if !stab.is_stable() {
            return Err(Error::UnstableSystem {
                margin: stab.margin,
            });
        }
        Ok(Optomech {
            delta: p.omega_a,
            kappa: p.kappa_a,
            gamma: p.gamma_b,
            omega_m: p.omega_b,
            g: p.optomech_g(),
            t: p.t_b,
            n_t: p.n_thermal(),
            kernel,
        })
    }

    /// ω(ω + iγ) - ω_m².
    fn m(&self, w: f64) -> Complex64 {
        Complex64::new(w * w - self.omega_m * self.omega_m, self.gamma * w)
    }

    /// Δ² + (κ - iω)².
    fn c(&self, w: f64) -> Complex64 {
        Complex64::new(
            self.delta * self.delta + self.kappa * self.kappa - w * w,
            -2.0 * self.kappa * w,
        )
    }

    fn d(&self, w: f64) -> Complex64 {
        self.c(w) * self.m(w) + self.delta * self.g * self.g * self.omega_m
    }

    fn thermal(&self, w: f64) -> f64 {
        match self.kernel {
            BathKernel::Full => coth_factor(w, self.t),
            BathKernel::Markovian => (2.0 * self.n_t + 1.0) * self.omega_m,
        }
    }

    fn sq(&self, w: f64) -> f64 {
        let (k, dl, g, wm) = (self.kappa, self.delta, self.g, self.omega_m);
        let s = k * k + w * w + dl * dl;
        let lor = (k * k + (dl - w).powi(2)) * (k * k + (dl + w).powi(2));
        wm * wm / self.d(w).norm_sqr()
            * (s * s - 4.0 * dl * dl * w * w)
            * (k * g * g * s / lor + self.gamma / wm * self.thermal(w))
    }

    fn sx(&self, w: f64) -> f64 {
        let (k, dl, g, wm) = (self.kappa, self.delta, self.g, self.omega_m);
        (k * (dl * dl + k * k + w * w) * self.m(w).norm_sqr()
            + g * g * dl * dl * wm * self.gamma * self.thermal(w))
            / self.d(w).norm_sqr()
    }

    fn sy(&self, w: f64) -> f64 {
        let (k, dl, g, wm) = (self.kappa, self.delta, self.g, self.omega_m);
        let m = self.m(w);
        (k * (m * dl + g * g * wm).norm_sqr()
            + k * (k * k + w * w) * m.norm_sqr()
            + g * g * (k * k + w * w) * wm * self.gamma * self.thermal(w))
            / self.d(w).norm_sqr()
    }

    fn transfer(&self, w: f64) -> f64 {
        self.g * self.g * (self.kappa * self.kappa + w * w) / self.c(w).norm_sqr()
    }

    fn floor(&self, w: f64) -> f64 {
        let (k, dl) = (self.kappa, self.delta);
        k * (k * k + w * w + dl * dl) / self.c(w).norm_sqr()
    }

    fn beta(&self, w: f64) -> Complex64 {
        (2.0 * self.kappa).sqrt() * Complex64::new(self.kappa, -w) * self.m(w) / self.d(w)
    }
}

fn kernel_tag(kernel: BathKernel) -> u64 {
    match kernel {
        BathKernel::Full => 0,
        BathKernel::Markovian => 1,
    }
}

fn build(
    p: &SystemParams,
    grid: &[f64],
    kind: SpectrumKind,
    kernel: BathKernel,
    f: impl Fn(f64) -> f64,
) -> Result<Spectrum> {
    check_grid(grid)?;
    let values = grid.iter().map(|&w| f(w)).collect();
    let hash = params_hash(p, &[kind as u64, kernel_tag(kernel)]);
    Spectrum::new(grid.to_vec(), values, kind, hash)
}

/// Position spectrum S_q of the mechanical mode.
pub fn mechanical_spectrum_sq(
    p: &SystemParams,
    grid: &[f64],
    kernel: BathKernel,
) -> Result<Spectrum> {
    let om = Optomech::new(p, kernel)?;
    build(p, grid, SpectrumKind::Sq, kernel, |w| om.sq(w))
}

/// Amplitude (S_x) and phase (S_y) spectra of the intracavity field.
pub fn intracavity_spectra(
    p: &SystemParams,
    grid: &[f64],
    kernel: BathKernel,
) -> Result<(Spectrum, Spectrum)> {
    let om = Optomech::new(p, kernel)?;
    Ok((
        build(p, grid, SpectrumKind::Sx, kernel, |w| om.sx(w))?,
        build(p, grid, SpectrumKind::Sy, kernel, |w| om.sy(w))?,
    ))
}

/// Phase spectrum written as transfer(ω)·S_q(ω) plus the bare cavity floor.
/// `include_floor = false` drops the floor.
pub fn phase_spectrum_from_sq(
    sq: &Spectrum,
    p: &SystemParams,
    include_floor: bool,
) -> Result<Spectrum> {
    if sq.kind != SpectrumKind::Sq {
        return Err(Error::Domain(
            "phase_spectrum_from_sq expects an S_q spectrum".into(),
        ));
    }
    if sq.params_hash != params_hash(p, &[SpectrumKind::Sq as u64, 0])
        && sq.params_hash != params_hash(p, &[SpectrumKind::Sq as u64, 1])
    {
        return Err(Error::GridMismatch);
    }
    let om = Optomech::new(p, BathKernel::Markovian)?;
    let values = sq
        .omega_grid
        .iter()
        .zip(&sq.values)
        .map(|(&w, &s)| om.transfer(w) * s + if include_floor { om.floor(w) } else { 0.0 })
        .collect();
    Spectrum::new(
        sq.omega_grid.clone(),
        values,
        SpectrumKind::Sy,
        params_hash(p, &[SpectrumKind::Sy as u64, 2 + include_floor as u64]),
    )
}

/// β(ω) = d(ω)⁻¹ √(2κ) (κ - iω) [ω(ω + iγ) - ω_m²].
pub fn beta(p: &SystemParams, omega: f64) -> Result<Complex64> {
    Ok(Optomech::new(p, BathKernel::Markovian)?.beta(omega))
}

/// Response matrix χ(ω) = (-iω - A)⁻¹ of the drift matrix.
pub fn susceptibility(a: &Mat4, omega: f64) -> Option<Matrix4<Complex64>> {
    let ac = a.map(|x| Complex64::new(x, 0.0));
    (Matrix4::<Complex64>::identity() * Complex64::new(0.0, -omega) - ac).try_inverse()
}

fn detection(det: &OptomechDetection, p: &SystemParams) -> Result<()> {
    det.validate_for(p)
}

/// Homodyne phase-quadrature spectrum outside the coupler port.
///
/// S_out = η [2κ₁ S_y - 2κ₁ Re χ_yy + 1/2] + (1 - η), where 2κ₁ Re χ_yy = √(2κ₁) √(κ₁/κ) Re β.
pub fn output_phase_spectrum(
    p: &SystemParams,
    det: &OptomechDetection,
    grid: &[f64],
    kernel: BathKernel,
) -> Result<Spectrum> {
    detection(det, p)?;
    let om = Optomech::new(p, kernel)?;
    let (k1, eta) = (det.kappa_1, det.eta);
    let cross = (2.0 * k1).sqrt() * (k1 / p.kappa_a).sqrt();
    for &w in grid {
        let (b, bm) = (om.beta(w), om.beta(-w));
        if (b.conj() - bm).norm() > 1e-12 * b.norm().max(1e-300) {
            return Err(Error::Domain(format!("β(-ω) ≠ β(ω)* at ω = {w}")));
        }
    }
    build(p, grid, SpectrumKind::SyOut, kernel, |w| {
        eta * (2.0 * k1 * om.sy(w) - cross * om.beta(w).re + 0.5) + (1.0 - eta)
    })
}

/// Amplitude-quadrature analogue of [`output_phase_spectrum`].
pub fn output_amplitude_spectrum(
    p: &SystemParams,
    det: &OptomechDetection,
    grid: &[f64],
    kernel: BathKernel,
) -> Result<Spectrum> {
    detection(det, p)?;
    let om = Optomech::new(p, kernel)?;
    let a = drift_matrix(p).a;
    let (k1, eta) = (det.kappa_1, det.eta);
    let mut chi = Vec::with_capacity(grid.len());
    for &w in grid {
        let x = susceptibility(&a, w)
            .ok_or_else(|| Error::SolverFailure("singular response matrix".into()))?;
        chi.push(x[(2, 2)].re);
    }
    let vals: Vec<f64> = grid
        .iter()
        .zip(&chi)
        .map(|(&w, &c)| eta * (2.0 * k1 * om.sx(w) - 2.0 * k1 * c + 0.5) + (1.0 - eta))
        .collect();
    check_grid(grid)?;
    Spectrum::new(
        grid.to_vec(),
        vals,
        SpectrumKind::SxOut,
        params_hash(p, &[SpectrumKind::SxOut as u64, kernel_tag(kernel)]),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralWeight {
    Unit,
    /// ω²/ω_m², turning S_q into the momentum spectrum.
    OmegaSqOverOmegaMSq {
        omega_m: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Integral {
    pub value: f64,
    /// Tail contribution beyond the grid ends.
    pub tail: f64,
    /// Estimated error: tail plus the Simpson/trapezoid discrepancy.
    pub error: f64,
}

/// ∫ dω/2π w(ω) S(ω) over the grid plus a power-law tail estimate.
pub fn integrate_spectrum(s: &Spectrum, weight: SpectralWeight) -> Result<Integral> {
    let x = &s.omega_grid;
    if x.len() < 3 {
        return Err(Error::Domain("need at least three grid points".into()));
    }
    let y: Vec<f64> = x
        .iter()
        .zip(&s.values)
        .map(|(&w, &v)| match weight {
            SpectralWeight::Unit => v,
            SpectralWeight::OmegaSqOverOmegaMSq { omega_m } => v * (w / omega_m).powi(2),
        })
        .collect();
    let body = simpson(x, &y);
    let quad_err = (body - trapezoid(x, &y)).abs() / 15.0;
    let n = x.len();
    let mut tail = 0.0;
    if x[n - 1] > 0.0 {
        tail += power_law_tail(x[n - 2], y[n - 2], x[n - 1], y[n - 1]).unwrap_or(f64::INFINITY);
    }
    if x[0] < 0.0 {
        tail += power_law_tail(x[1], y[1], x[0], y[0]).unwrap_or(f64::INFINITY);
    }
    let total = body + tail;
    let fraction = if total > 0.0 {
        tail / total
    } else {
        f64::INFINITY
    };
    if !(fraction <= 0.05) {
        return Err(Error::TailDominated { fraction });
    }
    let two_pi = std::f64::consts::TAU;
    Ok(Integral {
        value: total / two_pi,
        tail: tail / two_pi,
        error: (tail + quad_err) / two_pi,
    })
}

/// Resonances (center, half width) from the eigenvalues of the drift matrix, rad/s.
pub fn resonances(p: &SystemParams) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = drift_matrix(p)
        .a
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im >= 0.0)
        .map(|z| (z.im, z.re.abs()))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Upper frequency of integration grids: max(resonance + 50 widths, 20κ, 20ω_m).
pub fn omega_max(p: &SystemParams) -> f64 {
    resonances(p)
        .iter()
        .map(|&(c, w)| c + 50.0 * w)
        .fold(20.0 * p.kappa_a.max(p.omega_b), f64::max)
}

/// Breakpoints on [0, Ω_max] clustered around each resonance.
pub fn integration_breakpoints(p: &SystemParams) -> Vec<f64> {
    let top = omega_max(p);
    let mut b = vec![0.0, top];
    for (c, w) in resonances(p) {
        b.push(c);
        let mut step = 0.25 * w.max(1e-12 * top);
        while step < top {
            for x in [c - step, c + step] {
                if x > 0.0 && x < top {
                    b.push(x);
                }
            }
            step *= 2.0;
        }
    }
    b.sort_by(f64::total_cmp);
    b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * top);
    b
}

/// Symmetric grid adapted to `f` on [-Ω_max, Ω_max]; `f` must be even.
pub fn symmetric_adaptive_grid<F: Fn(f64) -> f64>(p: &SystemParams, f: F, rtol: f64) -> Vec<f64> {
    let pos = adaptive_grid(f, &integration_breakpoints(p), rtol, 48);
    let mut grid: Vec<f64> = pos[1..].iter().rev().map(|w| -w).collect();
    grid.extend_from_slice(&pos);
    grid
}

/// ⟨δq²⟩ and ⟨δp²⟩ of the mechanical mode from S_q on adapted grids.
pub fn mechanical_variances(p: &SystemParams, kernel: BathKernel) -> Result<(Integral, Integral)> {
    let om = Optomech::new(p, kernel)?;
    let wm = p.omega_b;
    let gq = symmetric_adaptive_grid(p, |w| om.sq(w), 1e-9);
    let gp = symmetric_adaptive_grid(p, |w| om.sq(w) * (w / wm).powi(2), 1e-9);
    let q = integrate_spectrum(
        &mechanical_spectrum_sq(p, &gq, kernel)?,
        SpectralWeight::Unit,
    )?;
    let pv = integrate_spectrum(
        &mechanical_spectrum_sq(p, &gp, kernel)?,
        SpectralWeight::OmegaSqOverOmegaMSq { omega_m: wm },
    )?;
    Ok((q, pv))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub omega: f64,
    pub value: f64,
    pub fwhm: Option<f64>,
}

/// Interior local maxima with half-maximum widths when both crossings are on the grid.
pub fn find_peaks(s: &Spectrum) -> Vec<Peak> {
    let (x, y) = (&s.omega_grid, &s.values);
    let mut out = Vec::new();
    for i in 1..y.len().saturating_sub(1) {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] {
            let half = 0.5 * y[i];
            let left = (1..=i).rev().find(|&j| y[j - 1] < half).map(|j| {
                let (x0, x1, y0, y1) = (x[j - 1], x[j], y[j - 1], y[j]);
                x0 + (half - y0) * (x1 - x0) / (y1 - y0)
            });
            let right = (i..y.len() - 1).find(|&j| y[j + 1] < half).map(|j| {
                let (x0, x1, y0, y1) = (x[j], x[j + 1], y[j], y[j + 1]);
                x0 + (y0 - half) * (x1 - x0) / (y0 - y1)
            });
            let fwhm = match (left, right) {
                (Some(l), Some(r)) => Some(r - l),
                _ => None,
            };
            out.push(Peak {
                omega: x[i],
                value: y[i],
                fwhm,
            });
        }
    }
    out
}

pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
