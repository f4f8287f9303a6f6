//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use entroprod::dicke::{
    dicke_state, forward_entropy_production, forward_sidebands, polariton_diagonalize,
    polariton_energies, reconstruct_entropy_production, soft_mode_approx, DickeBareParams, Phase,
    PolaritonCoeffs,
};
use entroprod::dynamics::{
    coupling_stability_boundary, diffusion_matrix, drift_matrix, lyapunov_residual,
    steady_state_covariance,
};
use entroprod::entropy::steady_state_entropy_production;
use entroprod::fit::{fit_spectrum, multiplicative_noise, DnsDataset, FitModel};
use entroprod::model::{preset, OptomechDetection, Preset, Setup, SystemParams, HBAR, K_B};
use entroprod::oracle::{simulate_ensemble, EnsembleConfig};
use entroprod::spectra::{
    find_peaks, linear_grid, mechanical_variances, output_phase_spectrum, BathKernel,
};
use rand::Rng;

const TAU: f64 = std::f64::consts::TAU;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Lyapunov residuals collected by criteria 1 and 2 for criterion 3.
#[derive(Default)]
struct Residuals {
    solves: usize,
    worst: f64,
}

impl Residuals {
    fn record(&mut self, p: &SystemParams) {
        let (a, d) = (drift_matrix(p), diffusion_matrix(p));
        let s = steady_state_covariance(&a, &d).expect("stable draw");
        self.solves += 1;
        self.worst = self
            .worst
            .max(lyapunov_residual(&a, &d, &s) / d.diag.amax());
    }
}

fn bec_at(ratio_sq: f64) -> SystemParams {
    let p = preset(Preset::CavityBec);
    let edge = coupling_stability_boundary(&p, 1e8).unwrap();
    p.with_g_ab(ratio_sq.sqrt() * edge)
}

fn optomech(g_over_kappa: f64) -> SystemParams {
    let p = preset(Preset::Optomechanics);
    p.with_g_ab(g_over_kappa * p.kappa_a)
}

fn c1_equilibrium_zero(res: &mut Residuals) -> Outcome {
    let mut worst: f64 = 0.0;
    for pr in [Preset::Optomechanics, Preset::CavityBec] {
        let p = preset(pr);
        let r = steady_state_entropy_production(&p).unwrap();
        res.record(&p);
        worst = worst.max(r.pi_s.abs() / p.kappa_a);
    }
    outcome(
        worst < 1e-12,
        format!("max |Pi_s|/kappa_a = {worst:.2e} (bound 1e-12)"),
    )
}

fn c2_second_law(res: &mut Residuals) -> Outcome {
    let mut worst = f64::INFINITY;
    for (setup, seed) in [
        (Setup::OptomechBrownian, 101),
        (Setup::CavityBECMarkovian, 102),
    ] {
        let mut rng = common::rng(seed);
        for _ in 0..1000 {
            let p = common::random_stable(setup, &mut rng);
            let r = steady_state_entropy_production(&p).unwrap();
            res.record(&p);
            worst = worst.min(r.pi_s / p.kappa_a);
        }
    }
    outcome(
        worst >= -1e-12,
        format!("min Pi_s/kappa_a over 2x1000 draws = {worst:.3e} (bound -1e-12)"),
    )
}

fn c3_lyapunov_residual(res: &Residuals) -> Outcome {
    outcome(
        res.worst <= 1e-9,
        format!(
            "max residual/||D||_max over {} solves = {:.2e} (bound 1e-9)",
            res.solves, res.worst
        ),
    )
}

fn c4_oracle() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, p) in [
        ("BEC x=0.5", bec_at(0.5)),
        ("optomech g/kappa=1", optomech(1.0)),
    ] {
        let (a, d) = (drift_matrix(&p), diffusion_matrix(&p));
        let sigma = steady_state_covariance(&a, &d).unwrap();
        let cfg = EnsembleConfig::exact_for(&a, 20_000, 2024).unwrap();
        let r = simulate_ensemble(&a, &d, &cfg).unwrap();
        let z = r.max_z_score(&sigma);
        pass &= z < 5.0;
        parts.push(format!("{name}: max z = {z:.2}"));
    }
    outcome(pass, format!("{} (bound 5)", parts.join(", ")))
}

fn c5_parseval() -> Outcome {
    let mut rng = common::rng(105);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..50 {
        let p = common::random_stable(Setup::OptomechBrownian, &mut rng);
        let s = steady_state_covariance(&drift_matrix(&p), &diffusion_matrix(&p)).unwrap();
        match mechanical_variances(&p, BathKernel::Markovian) {
            Ok((q, pv)) => {
                worst = worst
                    .max((q.value / s.sigma[(0, 0)] - 1.0).abs())
                    .max((pv.value / s.sigma[(1, 1)] - 1.0).abs());
            }
            Err(_) => failures += 1,
        }
    }
    outcome(
        worst < 0.01 && failures == 0,
        format!("max relative deviation = {worst:.2e} over 50 draws, {failures} integration errors (bound 1e-2)"),
    )
}

fn c6_cooling() -> Outcome {
    let rates: Vec<_> = (0..30)
        .map(|i| {
            steady_state_entropy_production(&optomech(0.49 + (3.3 - 0.49) * i as f64 / 29.0))
                .unwrap()
        })
        .collect();
    let mu_b_neg = rates.iter().all(|r| r.mu_b < 0.0);
    let mu_a_pos = rates.iter().all(|r| r.mu_a > 0.0);
    let mu_b_mono = rates.windows(2).all(|w| w[1].mu_b.abs() > w[0].mu_b.abs());
    let mu_a_mono = rates.windows(2).all(|w| w[1].mu_a > w[0].mu_a);
    outcome(
        mu_b_neg && mu_a_pos && mu_b_mono && mu_a_mono,
        format!(
            "mu_b<0: {mu_b_neg}, |mu_b| increasing: {mu_b_mono}, mu_a>0: {mu_a_pos}, mu_a increasing: {mu_a_mono}; mu_b from {:.3e} to {:.3e} 1/s",
            rates[0].mu_b,
            rates[29].mu_b
        ),
    )
}

fn c7_criticality() -> Outcome {
    let pi = |x: f64| steady_state_entropy_production(&bec_at(x)).unwrap().pi_s;
    let ratio = pi(0.99) / pi(0.9);
    let xs: Vec<f64> = (0..=47).map(|i| 0.05 + 0.02 * i as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| pi(x)).collect();
    let mono = vals.windows(2).all(|w| w[1] > w[0]);
    outcome(
        ratio > 5.0 && mono,
        format!("Pi_s(0.99)/Pi_s(0.9) = {ratio:.2} (bound 5), monotone on [0.05, 0.99]: {mono}"),
    )
}

fn c8_soft_mode() -> Outcome {
    // closed system, mu = 0, exactly at 2 lambda = sqrt(omega omega0)
    let t = DickeBareParams::table(0.0);
    let (em, ep) =
        polariton_energies(t.omega, t.omega0, 0.0, 0.5 * (t.omega * t.omega0).sqrt()).unwrap();
    let soft = em.min(ep) / t.omega0;
    let closed_ok = soft <= 1e-9;

    let k = t.kappa / t.omega;
    let (mut literal, mut corrected) = (0.0f64, 0.0f64);
    let mut worst_x = 0.0;
    for i in 0..=95 {
        let x = i as f64 / 100.0;
        let eps = dicke_state(&DickeBareParams::table(x)).unwrap().eps_plus / t.omega0;
        let lit = ((1.0 - x).sqrt() - eps).abs() / (1.0 - x).sqrt();
        if lit > literal {
            literal = lit;
            worst_x = x;
        }
        let c = soft_mode_approx(x, Phase::Normal, Some(k)).unwrap();
        corrected = corrected.max((c - eps).abs() / c);
    }
    outcome(
        closed_ok && literal <= 0.05,
        format!(
            "closed eps+/omega0 = {soft:.1e} (bound 1e-9); max |eps+/omega0 - sqrt(1-x)|/sqrt(1-x) = {literal:.3} at x = {worst_x} (bound 0.05); \
             with the (kappa/omega)^2 term: {corrected:.1e}"
        ),
    )
}

fn c9_symplectic() -> Outcome {
    let mut rng = common::rng(109);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let w = 10f64.powf(rng.random_range(-1.0..3.0));
        let w0 = 10f64.powf(rng.random_range(-1.0..3.0));
        let mu = w0 * rng.random_range(-0.5..0.2);
        let l_soft = 0.5 * (w * (w0 - 4.0 * mu)).sqrt();
        let l = rng.random_range(0.0f64..0.95).sqrt() * l_soft;
        worst = worst.max(
            polariton_diagonalize(w, w0, mu, l)
                .unwrap()
                .coeffs
                .symplectic_residual(),
        );
    }
    let t = DickeBareParams::table(0.0);
    let id = PolaritonCoeffs::identity();
    let c = polariton_diagonalize(t.omega, t.omega0, 0.0, 0.0)
        .unwrap()
        .coeffs;
    let dev = (c.matrix() - id.matrix()).amax();
    outcome(
        worst < 1e-12 && dev <= 1e-12,
        format!("max residual over 200 draws = {worst:.2e} (bound 1e-12); lambda->0 deviation from identity = {dev:.1e}"),
    )
}

fn c10_fit() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (g, seed) in [(0.5, 110u64), (2.29, 111)] {
        let p = optomech(g);
        let model = FitModel::OutputPhaseOptomech {
            base: p,
            detection: OptomechDetection::table(p.kappa_a),
            kernel: BathKernel::Full,
        };
        let mut truth = model.defaults();
        truth.insert("gain".into(), 3.0);
        let freq = linear_grid(0.05e6, 3.0e6, 4000);
        let clean = model.evaluate(&truth, &freq).unwrap();
        let sigma = clean.iter().map(|v| 0.01 * v).collect();
        let data =
            DnsDataset::new(freq, multiplicative_noise(&clean, 0.01, seed), Some(sigma)).unwrap();
        let init: BTreeMap<String, f64> = [
            ("g_ab".to_string(), truth["g_ab"] * 1.2),
            ("gamma_b".to_string(), truth["gamma_b"] * 0.8),
            ("gain".to_string(), truth["gain"] * 1.2),
        ]
        .into();
        let r = fit_spectrum(&data, &model, &init, &BTreeSet::new()).unwrap();
        let eg = (r.params["g_ab"] / truth["g_ab"] - 1.0).abs();
        let eb = (r.params["gamma_b"] / truth["gamma_b"] - 1.0).abs();
        pass &= r.converged && eg < 0.02 && eb < 0.05;
        parts.push(format!(
            "g/kappa={g}: G err {eg:.2e}, gamma_b err {eb:.2e}, converged {}",
            r.converged
        ));
    }
    outcome(pass, format!("{} (bounds 2e-2, 5e-2)", parts.join("; ")))
}

fn c11_reconstruction() -> Outcome {
    let p = DickeBareParams::table(0.5);
    let s = dicke_state(&p).unwrap();
    let sb = forward_sidebands(&p, &s).unwrap();
    let truth = forward_entropy_production(&p).unwrap().rates.pi_s;

    let (f0, hw) = (sb.omega_s / TAU, sb.hwhm / TAU);
    let freq = linear_grid(-2.0 * f0, 2.0 * f0, 801);
    let lor = |f: f64, c: f64| hw / std::f64::consts::PI / ((f - c).powi(2) + hw * hw);
    let clean: Vec<f64> = freq
        .iter()
        .map(|&f| sb.i_minus * lor(f, -f0) + sb.i_plus * lor(f, f0))
        .collect();
    let sigma = clean.iter().map(|v| 0.01 * v).collect();
    let data = DnsDataset::new(freq, multiplicative_noise(&clean, 0.01, 211), Some(sigma)).unwrap();

    // starting point off the truth: occupation 0.5, shifted line, wider width
    let n0: f64 = 0.5;
    let init: BTreeMap<String, f64> = [
        ("omega_b".to_string(), sb.omega_s * 1.01),
        ("gamma_b".to_string(), sb.hwhm * 1.2),
        (
            "T_eff".to_string(),
            HBAR * sb.omega_s / (K_B * (1.0 + 1.0 / n0).ln()),
        ),
        ("gain".to_string(), 0.8 * (sb.i_minus - sb.i_plus)),
    ]
    .into();
    let r = fit_spectrum(
        &data,
        &FitModel::CavityHeterodyneBEC,
        &init,
        &BTreeSet::new(),
    )
    .unwrap();
    let n = entroprod::thermal_occupation(r.params["omega_b"], r.params["T_eff"]).unwrap();
    let (im, ip) = (r.params["gain"] * (n + 1.0), r.params["gain"] * n);
    let got = reconstruct_entropy_production(&p, im, ip).unwrap().pi_s;
    let err = (got / truth - 1.0).abs();
    outcome(
        r.converged && err < 0.02,
        format!("reconstructed Pi_s = {got:.4e}, forward {truth:.4e}, relative error {err:.2e} (bound 2e-2)"),
    )
}

fn c12_splitting() -> Outcome {
    let p = optomech(2.29);
    let grid: Vec<f64> = linear_grid(0.05e6, 3.0e6, 6000)
        .iter()
        .map(|f| TAU * f)
        .collect();
    let s = output_phase_spectrum(
        &p,
        &OptomechDetection::table(p.kappa_a),
        &grid,
        BathKernel::Full,
    )
    .unwrap();
    let peaks = find_peaks(&s);
    let mut im: Vec<f64> = drift_matrix(&p)
        .a
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0)
        .map(|z| z.im)
        .collect();
    im.sort_by(f64::total_cmp);
    let gap = im.last().unwrap() - im.first().unwrap();
    let listed = peaks
        .iter()
        .map(|k| format!("{:.4}", k.omega / TAU / 1e6))
        .collect::<Vec<_>>()
        .join(", ");
    let base = format!(
        "maxima at [{listed}] MHz; eigenfrequency gap {:.4} MHz, g_ab {:.4} MHz",
        gap / TAU / 1e6,
        p.g_ab / TAU / 1e6
    );
    if peaks.len() != 2 {
        return outcome(false, format!("{} maxima (need 2); {base}", peaks.len()));
    }
    let sep = peaks[1].omega - peaks[0].omega;
    let e_gap = (sep / gap - 1.0).abs();
    let e_g = (sep / p.g_ab - 1.0).abs();
    outcome(
        e_gap < 0.02 && e_g < 0.10,
        format!("separation vs gap {e_gap:.3} (bound 0.02), vs g_ab {e_g:.3} (bound 0.10); {base}"),
    )
}

fn main() {
    let mut res = Residuals::default();
    type Run<'a> = Box<dyn FnOnce(&mut Residuals) -> Outcome + 'a>;
    let criteria: Vec<(&str, Option<Duration>, Run)> = vec![
        (
            "equilibrium zero",
            Some(Duration::from_secs(1)),
            Box::new(c1_equilibrium_zero),
        ),
        (
            "second law",
            Some(Duration::from_secs(30)),
            Box::new(c2_second_law),
        ),
        (
            "Lyapunov residual",
            None,
            Box::new(|r: &mut Residuals| c3_lyapunov_residual(r)),
        ),
        (
            "oracle equivalence",
            Some(Duration::from_secs(300)),
            Box::new(|_: &mut Residuals| c4_oracle()),
        ),
        (
            "Parseval closure",
            Some(Duration::from_secs(120)),
            Box::new(|_: &mut Residuals| c5_parseval()),
        ),
        (
            "cooling signature",
            None,
            Box::new(|_: &mut Residuals| c6_cooling()),
        ),
        (
            "criticality divergence",
            None,
            Box::new(|_: &mut Residuals| c7_criticality()),
        ),
        (
            "soft mode",
            None,
            Box::new(|_: &mut Residuals| c8_soft_mode()),
        ),
        (
            "symplectic diagonalization",
            None,
            Box::new(|_: &mut Residuals| c9_symplectic()),
        ),
        (
            "fit recovery",
            Some(Duration::from_secs(60)),
            Box::new(|_: &mut Residuals| c10_fit()),
        ),
        (
            "reconstruction closure",
            None,
            Box::new(|_: &mut Residuals| c11_reconstruction()),
        ),
        (
            "normal-mode splitting",
            None,
            Box::new(|_: &mut Residuals| c12_splitting()),
        ),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let o = run(&mut res);
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = o.pass && in_time;
        let timing = match budget {
            Some(b) => format!("{:.2} s, budget {} s", took.as_secs_f64(), b.as_secs()),
            None => format!("{:.2} s", took.as_secs_f64()),
        };
        println!(
            "criterion {:>2} {} {name}: {} [{timing}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!(
            "acceptance: {} of 12 criteria fail: {failed:?}",
            failed.len()
        );
        std::process::exit(1);
    }
}
