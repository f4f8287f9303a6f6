//! Drift and diffusion matrices, stability, the steady-state Lyapunov solve and
//! time evolution of the covariance matrix.
//!
//! Quadrature ordering is (δq_b, δp_b, δq_a, δp_a) throughout.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Setup, SystemParams};

pub type Mat4 = Matrix4<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    pub sigma: Mat4,
}

impl CovarianceMatrix {
    pub fn new(sigma: Mat4) -> Self {
        CovarianceMatrix { sigma }
    }

    pub fn vacuum() -> Self {
        CovarianceMatrix::new(Mat4::identity() * 0.5)
    }

    /// Uncorrelated thermal state with occupations `n_b`, `n_a`.
    pub fn thermal(n_b: f64, n_a: f64) -> Self {
        CovarianceMatrix::new(Mat4::from_diagonal(&Vector4::new(
            n_b + 0.5,
            n_b + 0.5,
            n_a + 0.5,
            n_a + 0.5,
        )))
    }

    pub fn symmetrized(mut self) -> Self {
        self.sigma = (self.sigma + self.sigma.transpose()) * 0.5;
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.sigma.amax()
    }

    pub fn is_symmetric(&self, rel: f64) -> bool {
        (self.sigma - self.sigma.transpose()).amax() <= rel * self.max_abs()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let s = (self.sigma + self.sigma.transpose()) * 0.5;
        s.symmetric_eigenvalues().min()
    }

    /// Symmetric, positive semidefinite, and above the vacuum floor on the diagonal.
    pub fn is_physical(&self) -> bool {
        self.is_symmetric(1e-12)
            && self.min_eigenvalue() >= -1e-12 * self.max_abs()
            && self.sigma.diagonal().iter().all(|&d| d >= 0.5 - 1e-9)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftMatrix {
    pub a: Mat4,
    pub setup: Setup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionMatrix {
    pub diag: Vector4<f64>,
}

impl DiffusionMatrix {
    pub fn matrix(&self) -> Mat4 {
        Mat4::from_diagonal(&self.diag)
    }

    /// Inverse of the nonzero diagonal entries, zero elsewhere.
    pub fn pseudo_inverse(&self) -> Mat4 {
        Mat4::from_diagonal(&self.diag.map(|d| if d > 0.0 { 1.0 / d } else { 0.0 }))
    }
}

pub fn drift_matrix(p: &SystemParams) -> DriftMatrix {
    let a = match p.setup {
        Setup::OptomechBrownian => {
            let g = p.optomech_g();
            let (wm, gam, k, det) = (p.omega_b, p.gamma_b, p.kappa_a, p.omega_a);
            Mat4::new(
                0.0, wm, 0.0, 0.0, //
                -wm, -gam, g, 0.0, //
                0.0, 0.0, -k, det, //
                g, 0.0, -det, -k,
            )
        }
        Setup::CavityBECMarkovian => {
            let g = p.g_ab;
            let (w0, gam, k, w, mu) = (p.omega_b, p.gamma_b, p.kappa_a, p.omega_a, p.mu_squeeze);
            Mat4::new(
                -gam,
                w0,
                0.0,
                0.0, //
                -(w0 - 4.0 * mu),
                -gam,
                -g,
                0.0, //
                0.0,
                0.0,
                -k,
                w, //
                -g,
                0.0,
                -w,
                -k,
            )
        }
    };
    DriftMatrix { a, setup: p.setup }
}

pub fn diffusion_matrix(p: &SystemParams) -> DiffusionMatrix {
    let thermal = p.gamma_b * (2.0 * p.n_thermal() + 1.0);
    let k = p.kappa_a;
    let diag = match p.setup {
        Setup::OptomechBrownian => Vector4::new(0.0, thermal, k, k),
        Setup::CavityBECMarkovian => Vector4::new(thermal, thermal, k, k),
    };
    DiffusionMatrix { diag }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    Stable,
    NearCritical,
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub class: StabilityClass,
    /// Minus the largest real part of the spectrum, rad/s.
    pub margin: f64,
}

impl Stability {
    /// All eigenvalues strictly in the left half plane.
    pub fn is_stable(&self) -> bool {
        self.margin > 0.0
    }
}

/// Classify the spectrum of `a`. Margins within 1e-12·max|A_ij| of zero are near critical.
pub fn is_stable(a: &DriftMatrix) -> Stability {
    let margin =
        -a.a.complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
    let threshold = 1e-12 * a.a.amax();
    let class = if margin.abs() <= threshold {
        StabilityClass::NearCritical
    } else if margin > 0.0 {
        StabilityClass::Stable
    } else {
        StabilityClass::Unstable
    };
    Stability { class, margin }
}

/// ‖Aσ + σAᵀ + D‖_max.
pub fn lyapunov_residual(a: &DriftMatrix, d: &DiffusionMatrix, s: &CovarianceMatrix) -> f64 {
    covariance_derivative(&a.a, &d.matrix(), &s.sigma).amax()
}

fn covariance_derivative(a: &Mat4, d: &Mat4, s: &Mat4) -> Mat4 {
    a * s + s * a.transpose() + d
}

/// Solve Aσ + σAᵀ = -D through the 16×16 vectorized system.
pub fn steady_state_covariance(a: &DriftMatrix, d: &DiffusionMatrix) -> Result<CovarianceMatrix> {
    let stab = is_stable(a);
    if !stab.is_stable() {
        return Err(Error::UnstableSystem {
            margin: stab.margin,
        });
    }
    let scale = a.a.amax();
    let a_s = a.a / scale;
    let d_s = d.matrix() / scale;

    let eye = Mat4::identity();
    let k: SMatrix<f64, 16, 16> = eye.kronecker(&a_s) + a_s.kronecker(&eye);
    let lu = k.lu();
    let rhs: SVector<f64, 16> = SVector::from_column_slice((-d_s).as_slice());
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure("vectorized Lyapunov system is singular".into()))?;
    // one step of iterative refinement
    let r = rhs - k * x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    let sigma = CovarianceMatrix::new(Mat4::from_column_slice(x.as_slice())).symmetrized();

    let res = lyapunov_residual(a, d, &sigma);
    let bound = 1e-9 * d.diag.amax();
    if !(res <= bound) {
        return Err(Error::SolverFailure(format!(
            "Lyapunov residual {res:.3e} exceeds {bound:.3e}"
        )));
    }
    Ok(sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupations {
    pub n_a: f64,
    pub n_b: f64,
    pub p_b_var: f64,
}

pub fn occupations(s: &CovarianceMatrix) -> Occupations {
    let m = &s.sigma;
    Occupations {
        n_a: 0.5 * (m[(2, 2)] + m[(3, 3)] - 1.0),
        n_b: 0.5 * (m[(0, 0)] + m[(1, 1)] - 1.0),
        p_b_var: m[(1, 1)],
    }
}

/// Smallest coupling in `(0, g_hi]` at which the drift matrix of `p` stops being Hurwitz.
pub fn coupling_stability_boundary(p: &SystemParams, g_hi: f64) -> Result<f64> {
    let stable = |g: f64| is_stable(&drift_matrix(&p.with_g_ab(g))).is_stable();
    if !stable(0.0) {
        return Err(Error::UnstableSystem {
            margin: is_stable(&drift_matrix(&p.with_g_ab(0.0))).margin,
        });
    }
    if stable(g_hi) {
        return Err(Error::NoRoot { lo: 0.0, hi: g_hi });
    }
    let (mut lo, mut hi) = (0.0, g_hi);
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    pub states: Vec<CovarianceMatrix>,
    pub stability: Stability,
    pub steps: usize,
}

/// Integrate dσ/dt = Aσ + σAᵀ + D from `sigma0` at `t_grid[0]`, reporting σ at every grid time.
pub fn evolve_covariance(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    sigma0: &CovarianceMatrix,
    t_grid: &[f64],
) -> Result<Evolution> {
    evolve_covariance_with(a, d, sigma0, t_grid, OdeOptions::default())
}

pub fn evolve_covariance_with(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    sigma0: &CovarianceMatrix,
    t_grid: &[f64],
    opts: OdeOptions,
) -> Result<Evolution> {
    if t_grid.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain(
            "time grid must be strictly increasing".into(),
        ));
    }
    let stability = is_stable(a);
    let am = a.a;
    let dm = d.matrix();
    let f = |s: &Mat4| covariance_derivative(&am, &dm, s);

    let mut y = sigma0.symmetrized().sigma;
    let mut t = t_grid[0];
    let mut states = vec![CovarianceMatrix::new(y)];
    let mut h = 0.01 / am.amax().max(1e-300);
    let mut steps = 0usize;
    let mut k1 = f(&y);

    for &t_target in &t_grid[1..] {
        while t < t_target {
            if steps >= opts.max_steps {
                return Err(Error::SolverFailure(format!(
                    "step budget of {} exhausted at t = {t:.6e}",
                    opts.max_steps
                )));
            }
            let last = t + h >= t_target;
            let h_try = if last { t_target - t } else { h };
            let (y_new, k7, err) = dopri_step(&f, &y, &k1, h_try, &opts);
            steps += 1;
            if err <= 1.0 {
                t = if last { t_target } else { t + h_try };
                y = (y_new + y_new.transpose()) * 0.5;
                k1 = if y == y_new { k7 } else { f(&y) };
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !(last && err <= 1.0) {
                h = h_try * fac;
            }
            if !h.is_finite() || h <= f64::EPSILON * t.abs().max(1e-300) {
                return Err(Error::SolverFailure(format!(
                    "step size underflow at t = {t:.6e}"
                )));
            }
        }
        states.push(CovarianceMatrix::new(y));
    }
    Ok(Evolution {
        times: t_grid.to_vec(),
        states,
        stability,
        steps,
    })
}

// Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes c_i are not needed.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn dopri_step<F: Fn(&Mat4) -> Mat4>(
    f: &F,
    y: &Mat4,
    k1: &Mat4,
    h: f64,
    opts: &OdeOptions,
) -> (Mat4, Mat4, f64) {
    let k2 = f(&(y + k1 * (h * A21)));
    let k3 = f(&(y + (k1 * A31 + k2 * A32) * h));
    let k4 = f(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
    let k5 = f(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
    let k6 = f(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
    let y_new = y + (k1 * B1 + k3 * B3 + k4 * B4 + k5 * B5 + k6 * B6) * h;
    let k7 = f(&y_new);
    let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    let mut err = 0.0f64;
    for i in 0..16 {
        let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
        err = err.max(err_vec[i].abs() / sc);
    }
    (y_new, k7, err)
}
