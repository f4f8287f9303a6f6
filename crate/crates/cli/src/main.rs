mod error;
mod output;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entroprod::dynamics::{drift_matrix, is_stable};
use entroprod::fit::{
    fit_spectrum_with, ingest_dns_path, multiplicative_noise, DnsDataset, FitModel, FitOptions,
    FitResult, MIN_POINTS,
};
use entroprod::model::{hz_to_rad, rad_to_hz};
use entroprod::spectra::{
    find_peaks, intracavity_spectra, linear_grid, mechanical_spectrum_sq,
    output_amplitude_spectrum, output_phase_spectrum,
};
use entroprod::{
    load_config, preset, steady_state_entropy_production, thermal_occupation, BathKernel,
    OptomechDetection, Preset, Setup, Spectrum, SpectrumKind, SystemParams,
};
use serde_json::{json, Value};

use error::{CliError, CliResult};
use output::{Format, OutDir, Table};
use sweep::{dicke_params, stability_boundary, Axis, GammaC, Output, SweepSpec};

#[derive(Debug, Parser)]
#[command(
    name = "entroprod",
    version,
    about = "Entropy production of two coupled driven-dissipative oscillators"
)]
struct Cli {
    /// TOML parameter file.
    #[arg(long, global = true, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in parameter set: optomech or bec.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Directory for all output files; created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Seed for synthetic noise.
    #[arg(long, global = true, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady-state rates along a coupling or pump axis.
    Sweep(SweepArgs),
    /// Noise spectrum on a frequency grid, with a peak sidecar.
    Spectrum(SpectrumArgs),
    /// Levenberg-Marquardt fit of a DNS table.
    Fit(FitArgs),
    /// Theory curves of the entropy-production figure.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct GammaCArgs {
    /// Constant polariton damping γ_c in Hz for the pump_x chain.
    #[arg(long, value_name = "HZ", conflicts_with = "gamma_c_profile")]
    gamma_c_hz: Option<f64>,
    /// CSV with header `x,gamma_c_hz`, interpolated linearly in x.
    #[arg(long, value_name = "PATH")]
    gamma_c_profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated increasing values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with_all = ["from", "to", "points"])]
    values: Option<Vec<f64>>,
    #[arg(long, requires_all = ["to", "points"])]
    from: Option<f64>,
    #[arg(long, requires_all = ["from", "points"])]
    to: Option<f64>,
    #[arg(long, requires_all = ["from", "to"])]
    points: Option<usize>,
    /// Comma-separated columns; all by default.
    #[arg(long, value_enum, value_delimiter = ',', num_args = 1)]
    outputs: Option<Vec<Output>>,
    #[command(flatten)]
    gamma_c: GammaCArgs,
    /// Output file stem.
    #[arg(long, default_value = "sweep")]
    name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "kebab-case")]
enum KindArg {
    Sx,
    Sy,
    Sq,
    SyOut,
    SxOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Full,
    Markovian,
}

impl From<KernelArg> for BathKernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Full => BathKernel::Full,
            KernelArg::Markovian => BathKernel::Markovian,
        }
    }
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, value_enum, default_value = "sy-out")]
    kind: KindArg,
    /// Lower grid frequency in Hz.
    #[arg(long, default_value_t = 0.05e6)]
    f_min: f64,
    /// Upper grid frequency in Hz.
    #[arg(long, default_value_t = 3.0e6)]
    f_max: f64,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    /// Overrides the coupling as g_ab = R·κ_a.
    #[arg(long, value_name = "R")]
    g_over_kappa: Option<f64>,
    #[arg(long, value_enum, default_value = "full")]
    kernel: KernelArg,
    /// Also write `<name>.dns.csv` with this relative multiplicative noise (seeded by --seed).
    #[arg(long, value_name = "REL")]
    noise: Option<f64>,
    #[arg(long, default_value = "spectrum")]
    name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    /// Output phase quadrature of the optomechanical cavity.
    Optomech,
    /// Heterodyne sideband pair of the cavity BEC.
    Bec,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// DNS table with header `freq_hz,psd[,sigma_psd]`.
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "optomech")]
    model: ModelArg,
    /// TOML table `name = value` of starting values (rad/s, K); these parameters are fitted.
    #[arg(long, value_name = "PATH")]
    init: Option<PathBuf>,
    /// Comma-separated parameters held at their starting values.
    #[arg(long, value_delimiter = ',')]
    freeze: Vec<String>,
    /// Exit 0 and keep the result when the fit does not converge.
    #[arg(long)]
    allow_nonconverged: bool,
    #[arg(long, default_value_t = FitOptions::default().max_iterations)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value = "full")]
    kernel: KernelArg,
    /// Pump strength (λ/λ_cr)² of the BEC data; enables the entropy reconstruction.
    #[arg(long, value_name = "X")]
    pump_x: Option<f64>,
    #[command(flatten)]
    gamma_c: GammaCArgs,
    #[arg(long, default_value = "fit")]
    name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    /// Optomechanics: Π_s, μ_a, μ_b against g_ab/κ_a on [0.49, 3.3].
    Fig3a,
    /// Cavity BEC: Π_s, μ_a, μ_b against (λ/λ_cr)² on [0.05, 0.99].
    Fig3b,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    figure: Figure,
    #[arg(long, default_value_t = 60)]
    points: usize,
    #[command(flatten)]
    gamma_c: GammaCArgs,
}

struct Base {
    params: SystemParams,
    detection: Option<OptomechDetection>,
    source: String,
}

fn parse_preset(name: &str) -> CliResult<Preset> {
    name.parse::<Preset>()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn resolve_base(cli: &Cli, default: Option<Preset>) -> CliResult<Base> {
    if let Some(path) = &cli.config {
        if !path.is_file() {
            return Err(CliError::Usage(format!("{}: no such file", path.display())));
        }
        let c = load_config(path)?;
        return Ok(Base {
            params: c.params,
            detection: c.detection,
            source: format!("config {}", path.display()),
        });
    }
    let pr = match (&cli.preset, default) {
        (Some(n), _) => parse_preset(n)?,
        (None, Some(d)) => d,
        (None, None) => {
            return Err(CliError::Usage(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    Ok(Base {
        params: preset(pr),
        detection: None,
        source: format!("preset {}", preset_name(pr)),
    })
}

fn preset_name(p: Preset) -> &'static str {
    match p {
        Preset::Optomechanics => "optomech",
        Preset::CavityBec => "bec",
    }
}

fn resolve_gamma_c(
    args: &GammaCArgs,
    base: &SystemParams,
    base_source: &str,
) -> CliResult<(GammaC, String)> {
    if let Some(path) = &args.gamma_c_profile {
        return Ok((
            GammaC::from_csv(path)?,
            format!("profile {}", path.display()),
        ));
    }
    if let Some(hz) = args.gamma_c_hz {
        if !(hz > 0.0) || !hz.is_finite() {
            return Err(CliError::Usage("--gamma-c-hz must be positive".into()));
        }
        return Ok((
            GammaC::Constant(hz_to_rad(hz)),
            "constant, --gamma-c-hz".into(),
        ));
    }
    let label = if base_source.starts_with("preset") {
        "synthetic constant (preset gamma_b)"
    } else {
        "constant, gamma_b_hz of the config"
    };
    Ok((GammaC::Constant(base.gamma_b), label.into()))
}

fn params_json(p: &SystemParams) -> Value {
    json!({
        "setup": p.setup.name(),
        "omega_a_rad_s": p.omega_a,
        "omega_b_rad_s": p.omega_b,
        "kappa_a_rad_s": p.kappa_a,
        "gamma_b_rad_s": p.gamma_b,
        "g_ab_rad_s": p.g_ab,
        "T_b_K": p.t_b,
        "mu_rad_s": p.mu_squeeze,
    })
}

const RATE_UNITS: &str =
    "Pi_s, mu_a, mu_b in k_B/s; n_a, n_b quanta; eps_plus, stability_margin in rad/s";

fn sweep_table(spec: &SweepSpec) -> CliResult<Table> {
    let rows = spec.run()?;
    let mut columns = vec![spec.axis.column().to_string()];
    columns.extend(spec.outputs.iter().map(|o| o.column().to_string()));
    Ok(Table {
        columns,
        status: Some(rows.iter().map(|r| r.status.clone()).collect()),
        rows: rows
            .into_iter()
            .map(|r| std::iter::once(Some(r.value)).chain(r.columns).collect())
            .collect(),
    })
}

fn sweep_meta(spec: &SweepSpec, source: &str, gamma_c_label: &str) -> CliResult<Value> {
    let mut meta = json!({
        "axis": spec.axis.column(),
        "params": params_json(&spec.base),
        "params_source": source,
        "units": RATE_UNITS,
    });
    match spec.axis {
        Axis::GOverGcrSq => meta["g_cr_rad_s"] = json!(stability_boundary(&spec.base)?),
        Axis::PumpX => meta["gamma_c"] = json!(gamma_c_label),
        Axis::GAb => {}
    }
    Ok(meta)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn cmd_sweep(cli: &Cli, a: &SweepArgs) -> CliResult<()> {
    let base = resolve_base(cli, None)?;
    let values = match (&a.values, a.from, a.to, a.points) {
        (Some(v), ..) => v.clone(),
        (None, Some(lo), Some(hi), Some(n)) => linear_grid(lo, hi, n),
        _ => {
            return Err(CliError::Usage(
                "give --values or --from/--to/--points".into(),
            ))
        }
    };
    let (gamma_c, label) = resolve_gamma_c(&a.gamma_c, &base.params, &base.source)?;
    let spec = SweepSpec {
        axis: a.axis,
        values,
        base: base.params,
        outputs: a.outputs.clone().unwrap_or_else(|| Output::ALL.to_vec()),
        gamma_c,
    };
    let table = sweep_table(&spec)?;
    let meta = sweep_meta(&spec, &base.source, &label)?;
    let out = OutDir::create(&cli.out)?;
    report(&table.write(&out, &a.name, cli.format, meta)?);
    Ok(())
}

fn cmd_reproduce(cli: &Cli, a: &ReproduceArgs) -> CliResult<()> {
    if cli.config.is_some() || cli.preset.is_some() {
        return Err(CliError::Usage(
            "reproduce always uses the built-in presets".into(),
        ));
    }
    let (axis, pr, lo, hi, stem) = match a.figure {
        Figure::Fig3a => (Axis::GAb, Preset::Optomechanics, 0.49, 3.3, "fig3a"),
        Figure::Fig3b => (Axis::PumpX, Preset::CavityBec, 0.05, 0.99, "fig3b"),
    };
    if a.points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    let base = preset(pr);
    let source = format!("preset {}", preset_name(pr));
    let (gamma_c, label) = resolve_gamma_c(&a.gamma_c, &base, &source)?;
    let spec = SweepSpec {
        axis,
        values: linear_grid(lo, hi, a.points),
        base,
        outputs: Output::ALL.to_vec(),
        gamma_c,
    };
    let table = sweep_table(&spec)?;
    let mut meta = sweep_meta(&spec, &source, &label)?;
    meta["figure"] = json!(stem);
    meta["content"] =
        json!("theory curves from the preset values; measured data points are not included");
    let out = OutDir::create(&cli.out)?;
    report(&table.write(&out, stem, cli.format, meta)?);
    Ok(())
}

fn cmd_spectrum(cli: &Cli, a: &SpectrumArgs) -> CliResult<()> {
    if a.points == 0 {
        return Err(CliError::Usage("--points must be positive".into()));
    }
    if !(a.f_max > a.f_min) || !a.f_min.is_finite() || !a.f_max.is_finite() {
        return Err(CliError::Usage("need finite --f-min < --f-max".into()));
    }
    let base = resolve_base(cli, None)?;
    let mut p = base.params;
    if let Some(r) = a.g_over_kappa {
        p = p.with_g_ab(r * p.kappa_a);
    }
    p.validate()?;
    if p.setup != Setup::OptomechBrownian {
        return Err(CliError::Usage(
            "spectra are available for the optomech setup".into(),
        ));
    }
    let stab = is_stable(&drift_matrix(&p));
    if !stab.is_stable() {
        return Err(CliError::Unstable(format!(
            "stability margin {:e} rad/s",
            stab.margin
        )));
    }
    let det = base
        .detection
        .unwrap_or_else(|| OptomechDetection::table(p.kappa_a));
    let kernel = BathKernel::from(a.kernel);
    let grid: Vec<f64> = linear_grid(hz_to_rad(a.f_min), hz_to_rad(a.f_max), a.points);
    let s: Spectrum = match a.kind {
        KindArg::Sx => intracavity_spectra(&p, &grid, kernel)?.0,
        KindArg::Sy => intracavity_spectra(&p, &grid, kernel)?.1,
        KindArg::Sq => mechanical_spectrum_sq(&p, &grid, kernel)?,
        KindArg::SyOut => output_phase_spectrum(&p, &det, &grid, kernel)?,
        KindArg::SxOut => output_amplitude_spectrum(&p, &det, &grid, kernel)?,
    };

    let out = OutDir::create(&cli.out)?;
    let mut written = Vec::new();
    match cli.format {
        Format::Csv => {
            let (path, w) = out.writer(&format!("{}.csv", a.name))?;
            s.write_csv(w)?;
            written.push(path);
        }
        Format::Json => written.push(out.write_json(&format!("{}.json", a.name), &s.to_json(&p))?),
    }
    let peaks: Vec<Value> = find_peaks(&s)
        .iter()
        .map(|pk| {
            json!({
                "freq_hz": rad_to_hz(pk.omega),
                "omega_rad_s": pk.omega,
                "value": pk.value,
                "fwhm_hz": pk.fwhm.map(rad_to_hz),
            })
        })
        .collect();
    let sidecar = json!({
        "kind": kind_name(s.kind),
        "kernel": format!("{kernel:?}"),
        "params": params_json(&p),
        "params_source": base.source,
        "params_hash": s.params_hash,
        "detection": { "kappa_1_rad_s": det.kappa_1, "kappa_2_rad_s": det.kappa_2, "eta": det.eta },
        "peaks": peaks,
    });
    written.push(out.write_json(&format!("{}.peaks.json", a.name), &sidecar)?);

    if let Some(rel) = a.noise {
        if !(rel >= 0.0) || !rel.is_finite() {
            return Err(CliError::Usage(
                "--noise must be a nonnegative number".into(),
            ));
        }
        let freq: Vec<f64> = s.omega_grid.iter().map(|&w| rad_to_hz(w)).collect();
        let psd = multiplicative_noise(&s.values, rel, cli.seed);
        let sigma = (rel > 0.0).then(|| s.values.iter().map(|v| rel * v).collect());
        let mut d = DnsDataset::new(freq, psd, sigma)?;
        d.meta.insert("kind".into(), kind_name(s.kind).into());
        d.meta.insert(
            "noise".into(),
            format!("multiplicative {rel}, seed {}", cli.seed),
        );
        d.meta.insert("params_hash".into(), s.params_hash.clone());
        let (path, w) = out.writer(&format!("{}.dns.csv", a.name))?;
        d.write_csv(w)?;
        written.push(path);
    }
    report(&written);
    Ok(())
}

fn kind_name(k: SpectrumKind) -> &'static str {
    match k {
        SpectrumKind::Sx => "Sx",
        SpectrumKind::Sy => "Sy",
        SpectrumKind::Sq => "Sq",
        SpectrumKind::SyOut => "SyOut",
        SpectrumKind::SxOut => "SxOut",
    }
}

fn read_init(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_fit(cli: &Cli, a: &FitArgs) -> CliResult<()> {
    if !a.data.is_file() {
        return Err(CliError::Usage(format!(
            "{}: no such file",
            a.data.display()
        )));
    }
    let data = ingest_dns_path(&a.data, MIN_POINTS)?;
    let default = match a.model {
        ModelArg::Optomech => Preset::Optomechanics,
        ModelArg::Bec => Preset::CavityBec,
    };
    let base = resolve_base(cli, Some(default))?;
    let model = match a.model {
        ModelArg::Optomech => {
            let p = base.params;
            if p.setup != Setup::OptomechBrownian {
                return Err(CliError::Usage(
                    "model optomech needs optomech parameters".into(),
                ));
            }
            FitModel::OutputPhaseOptomech {
                base: p,
                detection: base
                    .detection
                    .unwrap_or_else(|| OptomechDetection::table(p.kappa_a)),
                kernel: a.kernel.into(),
            }
        }
        ModelArg::Bec => FitModel::CavityHeterodyneBEC,
    };
    let init = match (&a.init, a.model) {
        (Some(path), _) => read_init(path)?,
        (None, ModelArg::Optomech) => default_optomech_init(&model, &data)?,
        (None, ModelArg::Bec) => return Err(CliError::Usage("model bec needs --init".into())),
    };
    let frozen: BTreeSet<String> = a.freeze.iter().cloned().collect();
    let opts = FitOptions {
        max_iterations: a.max_iterations,
        ..FitOptions::default()
    };
    let result = fit_spectrum_with(&data, &model, &init, &frozen, opts)?;

    let mut doc = serde_json::to_value(&result)?;
    doc["params_source"] = json!(base.source);
    if let Some((route, rates)) = derived_rates(&result, &model, &base, a)? {
        doc["entropy_rates"] = serde_json::to_value(rates)?;
        doc["entropy_route"] = json!(route);
    }
    let out = OutDir::create(&cli.out)?;
    report(&[out.write_json(&format!("{}.json", a.name), &doc)?]);
    if !result.converged && !a.allow_nonconverged {
        return Err(CliError::NotConverged(format!(
            "{} iterations, chi2_reduced {:e}",
            result.iterations, result.chi2_reduced
        )));
    }
    Ok(())
}

/// Fits g_ab, γ_b and a gain matched to the mean level of the data.
fn default_optomech_init(model: &FitModel, data: &DnsDataset) -> CliResult<BTreeMap<String, f64>> {
    let d = model.defaults();
    if !(d["g_ab"] > 0.0) {
        return Err(CliError::Usage(
            "base coupling is zero; pass --init or a config with g_ab_hz".into(),
        ));
    }
    let m = model.evaluate(&d, &data.freq_hz)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let gain = mean(&data.psd) / mean(&m);
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(CliError::Usage(
            "cannot estimate a starting gain from the data".into(),
        ));
    }
    Ok([
        ("g_ab".to_string(), d["g_ab"]),
        ("gamma_b".to_string(), d["gamma_b"]),
        ("gain".to_string(), gain),
    ]
    .into())
}

fn derived_rates(
    r: &FitResult,
    model: &FitModel,
    base: &Base,
    a: &FitArgs,
) -> CliResult<Option<(String, entroprod::EntropyRates)>> {
    match model {
        FitModel::OutputPhaseOptomech { base: p, .. } => {
            let q = SystemParams {
                g_ab: r.params["g_ab"],
                gamma_b: r.params["gamma_b"],
                omega_b: r.params["omega_b"],
                omega_a: r.params["detuning"],
                t_b: r.params["T_eff"],
                ..*p
            };
            match steady_state_entropy_production(&q) {
                Ok(rates) => Ok(Some((
                    "steady state at the fitted parameters".into(),
                    rates,
                ))),
                Err(e) => Err(e.into()),
            }
        }
        FitModel::CavityHeterodyneBEC => {
            let Some(x) = a.pump_x else { return Ok(None) };
            if base.params.setup != Setup::CavityBECMarkovian {
                return Err(CliError::Usage(
                    "--pump-x needs cavity BEC parameters".into(),
                ));
            }
            let (gamma_c, label) = resolve_gamma_c(&a.gamma_c, &base.params, &base.source)?;
            let gamma_c = gamma_c.at(x).map_err(CliError::Usage)?;
            let n = thermal_occupation(r.params["omega_b"], r.params["T_eff"])?;
            let gain = r.params["gain"];
            let d = dicke_params(&base.params, gamma_c).with_pump_x(x);
            let rates =
                entroprod::dicke::reconstruct_entropy_production(&d, gain * (n + 1.0), gain * n)?;
            Ok(Some((
                format!("sideband reconstruction, gamma_c {label}"),
                rates,
            )))
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(cli, a),
        Command::Spectrum(a) => cmd_spectrum(cli, a),
        Command::Fit(a) => cmd_fit(cli, a),
        Command::Reproduce(a) => cmd_reproduce(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("entroprod: {e}");
            e.exit_code()
        }
    }
}
