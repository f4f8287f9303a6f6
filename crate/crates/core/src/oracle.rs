//! Stochastic-trajectory estimate of the steady-state covariance.
//!
//! Trajectories of du = A u dt + S dW with S Sᵀ = D are sampled with classical
//! Gaussian noise. For linear dynamics the ensemble covariance obeys the same
//! moment equation as the symmetrized quantum covariance, so this checks σ only,
//! never commutator-type quantities.

use std::io::Write;

use nalgebra::{SMatrix, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{is_stable, CovarianceMatrix, DiffusionMatrix, DriftMatrix, Mat4};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Fixed-step Euler-Maruyama; requires dt < 0.1/max|eig(A)|.
    EulerMaruyama,
    /// Exact Gaussian transition over each sampling interval.
    ExactGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    /// Integration step (Euler-Maruyama) or sampling interval (exact scheme).
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub burn_in: f64,
    pub scheme: Scheme,
}

impl EnsembleConfig {
    /// Exact-scheme configuration scaled to the slowest relaxation rate of `a`:
    /// burn-in of 20 decay times, then 8 samples two decay times apart.
    pub fn exact_for(a: &DriftMatrix, n_traj: usize, seed: u64) -> Result<Self> {
        let st = is_stable(a);
        if !st.is_stable() {
            return Err(Error::UnstableSystem { margin: st.margin });
        }
        let tau = 1.0 / st.margin;
        Ok(EnsembleConfig {
            n_traj,
            dt: 2.0 * tau,
            t_end: 34.0 * tau,
            seed,
            burn_in: 20.0 * tau,
            scheme: Scheme::ExactGaussian,
        })
    }

    fn samples_per_traj(&self) -> usize {
        ((self.t_end - self.burn_in) / self.dt * (1.0 + 1e-12)).floor() as usize + 1
    }

    pub fn validate(&self, a: &DriftMatrix) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::InvalidParams {
                field: "n_traj",
                reason: "need at least one trajectory".into(),
            });
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams {
                field: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.burn_in >= 0.0 && self.t_end > self.burn_in) {
            return Err(Error::InvalidParams {
                field: "t_end",
                reason: "t_end must exceed burn_in >= 0".into(),
            });
        }
        if self.scheme == Scheme::EulerMaruyama {
            let fastest =
                a.a.complex_eigenvalues()
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
            let limit = 0.1 / fastest;
            if self.dt >= limit {
                return Err(Error::StepTooLarge { dt: self.dt, limit });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub sigma: CovarianceMatrix,
    /// Jackknife standard errors of the entries of σ.
    pub std_err: Mat4,
    pub n_traj: usize,
    pub samples_per_traj: usize,
}

impl EnsembleResult {
    /// Largest |σ_ij - reference_ij| / se_ij over the ten independent entries.
    pub fn max_z_score(&self, reference: &CovarianceMatrix) -> f64 {
        let mut z = 0.0f64;
        for i in 0..4 {
            for j in i..4 {
                let diff = (self.sigma.sigma[(i, j)] - reference.sigma[(i, j)]).abs();
                let se = self.std_err[(i, j)];
                z = z.max(if se > 0.0 {
                    diff / se
                } else if diff == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                });
            }
        }
        z
    }

    /// Rows `i,j,sigma,std_err` for the upper triangle.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "sigma", "std_err"])
            .map_err(|e| Error::SolverFailure(e.to_string()))?;
        for i in 0..4 {
            for j in i..4 {
                wr.write_record([
                    i.to_string(),
                    j.to_string(),
                    format!("{:.16e}", self.sigma.sigma[(i, j)]),
                    format!("{:.16e}", self.std_err[(i, j)]),
                ])
                .map_err(|e| Error::SolverFailure(e.to_string()))?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Transition of the Ornstein-Uhlenbeck process over a time h:
/// u(t+h) = Φ u(t) + ξ with ξ ~ N(0, Q).
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub phi: Mat4,
    pub q: Mat4,
}

/// Φ = e^{Ah} and Q = ∫₀ʰ e^{As} D e^{Aᵀs} ds, from a Van Loan block exponential
/// at a short step followed by repeated doubling.
pub fn exact_transition(a: &Mat4, d: &Mat4, h: f64) -> Transition {
    let norm = a.amax() * 4.0;
    let mut k = 0;
    while norm * h / 2f64.powi(k) > 0.25 {
        k += 1;
    }
    let h0 = h / 2f64.powi(k);
    let mut c = SMatrix::<f64, 8, 8>::zeros();
    c.fixed_view_mut::<4, 4>(0, 0).copy_from(&(-a * h0));
    c.fixed_view_mut::<4, 4>(0, 4).copy_from(&(d * h0));
    c.fixed_view_mut::<4, 4>(4, 4)
        .copy_from(&(a.transpose() * h0));
    let e = c.exp();
    let f12: Mat4 = e.fixed_view::<4, 4>(0, 4).into();
    let f22: Mat4 = e.fixed_view::<4, 4>(4, 4).into();
    let mut phi = f22.transpose();
    let mut q = phi * f12;
    q = (q + q.transpose()) * 0.5;
    for _ in 0..k {
        q = q + phi * q * phi.transpose();
        q = (q + q.transpose()) * 0.5;
        phi = phi * phi;
    }
    Transition { phi, q }
}

/// Factor L with L Lᵀ = Q from the symmetric eigendecomposition.
fn noise_factor(q: &Mat4) -> Mat4 {
    let eig = SymmetricEigen::new(*q);
    let s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    eig.eigenvectors * Mat4::from_diagonal(&s)
}

fn normal4(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample(StandardNormal))
}

fn rng_for(seed: u64, traj: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj as u64);
    rng
}

const BLOCKS: usize = 100;

/// Time- and ensemble-averaged covariance after burn-in, with jackknife errors
/// over blocks of trajectories. Deterministic for a given seed regardless of
/// thread count.
pub fn simulate_ensemble(
    a: &DriftMatrix,
    d: &DiffusionMatrix,
    cfg: &EnsembleConfig,
) -> Result<EnsembleResult> {
    let st = is_stable(a);
    if !st.is_stable() {
        return Err(Error::UnstableSystem { margin: st.margin });
    }
    if d.diag.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Domain(
            "diffusion entries must be nonnegative".into(),
        ));
    }
    cfg.validate(a)?;
    let am = a.a;
    let dm = d.matrix();
    let n_samp = cfg.samples_per_traj();

    let traj: Box<dyn Fn(&mut ChaCha8Rng) -> Mat4 + Sync> = match cfg.scheme {
        Scheme::ExactGaussian => {
            let burn = exact_transition(&am, &dm, cfg.burn_in);
            let step = exact_transition(&am, &dm, cfg.dt);
            let (lb, ls) = (noise_factor(&burn.q), noise_factor(&step.q));
            Box::new(move |rng| {
                let mut u = lb * normal4(rng);
                let mut acc = u * u.transpose();
                for _ in 1..n_samp {
                    u = step.phi * u + ls * normal4(rng);
                    acc += u * u.transpose();
                }
                acc
            })
        }
        Scheme::EulerMaruyama => {
            let dt = cfg.dt;
            let amp = d.diag.map(|x| (x * dt).sqrt());
            let n_burn = (cfg.burn_in / dt).round() as usize;
            let total = ((cfg.t_end - cfg.burn_in) / dt).round() as usize + 1;
            Box::new(move |rng| {
                let mut u = Vector4::zeros();
                for _ in 0..n_burn {
                    u += am * u * dt + amp.component_mul(&normal4(rng));
                }
                let mut acc = Mat4::zeros();
                for k in 0..total {
                    if k > 0 {
                        u += am * u * dt + amp.component_mul(&normal4(rng));
                    }
                    acc += u * u.transpose();
                }
                acc
            })
        }
    };
    let per_traj = match cfg.scheme {
        Scheme::ExactGaussian => n_samp,
        Scheme::EulerMaruyama => ((cfg.t_end - cfg.burn_in) / cfg.dt).round() as usize + 1,
    };

    let n = cfg.n_traj;
    let blocks = BLOCKS.min(n);
    let sums: Vec<(Mat4, usize)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = (b * n / blocks, (b + 1) * n / blocks);
            let mut acc = Mat4::zeros();
            for i in lo..hi {
                acc += traj(&mut rng_for(cfg.seed, i));
            }
            (acc, (hi - lo) * per_traj)
        })
        .collect();

    let (total, count) = sums
        .iter()
        .fold((Mat4::zeros(), 0usize), |(s, c), (m, k)| (s + m, c + k));
    let mean = total / count as f64;
    let mut se = Mat4::from_element(f64::INFINITY);
    if blocks >= 2 {
        let loo: Vec<Mat4> = sums
            .iter()
            .map(|(m, k)| (total - m) / (count - k) as f64)
            .collect();
        let bar = loo.iter().fold(Mat4::zeros(), |s, m| s + m) / blocks as f64;
        let var = loo.iter().fold(Mat4::zeros(), |s, m| {
            s + (m - bar).component_mul(&(m - bar))
        });
        se = (var * ((blocks - 1) as f64 / blocks as f64)).map(f64::sqrt);
    }
    Ok(EnsembleResult {
        sigma: CovarianceMatrix::new(mean).symmetrized(),
        std_err: se,
        n_traj: n,
        samples_per_traj: per_traj,
    })
}
