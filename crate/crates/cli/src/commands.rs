//! Subcommands and their output files.

use std::f64::consts::PI;
use std::io::BufReader;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freqbin::detection::{
    denoise_moments, moment_spread, moments_from_state, monte_carlo_denoised, synthesize_raw_moments, MomentSet,
    NoiseModel,
};
use freqbin::device::hybridize;
use freqbin::dynamics::{ideal_field_state, linspace, spectroscopy_sweep, Envelope, Protocol, SweepKind, SweepOptions};
use freqbin::heralding::{loss_sweep, remote_entanglement, LossChannel};
use freqbin::tomography::{density_json, process_json};
use freqbin::{device, Error, Result, Warning};
use serde_json::{json, Map};

use crate::config::{parse_angle_list, parse_f64_list, Format, Overrides, RunConfig, Settings, SCHEMA_HEADER};
use crate::output::{pretty, tagged, Cell, Sink, Table};
use crate::pipeline::{logical_from_theta, process_tomography, state_tomography, Calibration, Detector, Lab, Method};

#[derive(Debug, Parser)]
#[command(name = "freqbin-lab", version, about = "Simulate, measure and reconstruct frequency-bin-encoded microwave photons")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration; command-line flags override its fields
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Device parameter file (key = value lines)
    #[arg(long, global = true, value_name = "FILE")]
    pub device: Option<PathBuf>,
    /// Override one device parameter, e.g. `--set T1_ge_us=30`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Prefix for output file names
    #[arg(long, global = true)]
    pub experiment: Option<String>,
    /// Parametric drive amplitude η/2π in MHz
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    /// Switch off every decoherence channel
    #[arg(long, global = true)]
    pub ideal: bool,
    /// Comma-separated preparation angles, e.g. `0,pi/2,pi`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<String>,
    /// Comma-separated loss probabilities
    #[arg(long, global = true)]
    pub loss: Option<String>,
    /// Added noise photons of the amplifier chain
    #[arg(long = "n-added", global = true)]
    pub n_added: Option<f64>,
    /// Repetitions per moment; 0 for the infinite-shot limit
    #[arg(long, global = true, value_parser = parse_shots)]
    pub shots: Option<u64>,
    /// Seed for the measurement noise; required when shots are finite
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available cores
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Table format
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

fn parse_shots(s: &str) -> std::result::Result<u64, String> {
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if !(x >= 0.0) || x.fract() != 0.0 || x > u64::MAX as f64 {
        return Err(format!("shots must be a non-negative integer, got {s}"));
    }
    Ok(x as u64)
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Residual-population surface over drive frequency and amplitude
    Spectroscopy(SpectroscopyArgs),
    /// Emission envelopes, decay rates and photon numbers
    Emit(EmitArgs),
    /// Full measurement and reconstruction pipeline
    Tomography(TomographyArgs),
    /// Loss sweep of the error-detection protocol
    Herald(HeraldArgs),
    /// Synthesize and denoise detected moments
    Moments(MomentsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Param,
    #[value(name = "2nd")]
    Second,
}

#[derive(Debug, Clone, Args)]
pub struct SpectroscopyArgs {
    #[arg(long, value_enum, default_value = "param")]
    pub which: Which,
    /// Window start, GHz; derived from the device when omitted
    #[arg(long)]
    pub start: Option<f64>,
    /// Window end, GHz
    #[arg(long)]
    pub stop: Option<f64>,
    /// Frequency points; defaults to a 1 MHz step
    #[arg(long)]
    pub points: Option<usize>,
    /// Comma-separated drive amplitudes, MHz
    #[arg(long)]
    pub amps: Option<String>,
    /// Pulse length, μs
    #[arg(long, default_value_t = 0.5)]
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolArg {
    Encoded,
    Displaced,
}

#[derive(Debug, Clone, Args)]
pub struct EmitArgs {
    #[arg(long, value_enum, default_value = "encoded")]
    pub protocol: ProtocolArg,
    /// Comma-separated list of η values, MHz; overrides `--eta`
    #[arg(long)]
    pub etas: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    State,
    Process,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ls,
    Gd,
}

#[derive(Debug, Clone, Args)]
pub struct TomographyArgs {
    #[arg(long, value_enum, default_value = "state")]
    pub kind: Kind,
    #[arg(long, value_enum, default_value = "ls")]
    pub method: MethodArg,
    /// Rank of the Cholesky ansatz for `--method gd`
    #[arg(long, default_value_t = 4)]
    pub rank: usize,
    /// Moment normalization before reconstruction
    #[arg(long, value_enum, default_value = "calibrated")]
    pub normalize: NormalizeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    /// Rescale to the calibration runs' expected photon numbers
    Calibrated,
    /// Use the denoised moments directly
    None,
}

#[derive(Debug, Clone, Args)]
pub struct HeraldArgs {}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    /// Ideal moments from a CSV file instead of the encoded states
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Use the simulated captured field instead of the ideal one
    #[arg(long)]
    pub simulate: bool,
    /// Monte-Carlo repeats for the spread table; 0 to skip
    #[arg(long, default_value_t = 0)]
    pub repeats: u64,
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub report: Vec<String>,
    pub warnings: Vec<Warning>,
}

impl Outcome {
    fn warn(&mut self, ws: impl IntoIterator<Item = Warning>) {
        for w in ws {
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }
}

impl CommonArgs {
    pub fn overrides(&self) -> Result<Overrides> {
        Ok(Overrides {
            device: self.device.clone(),
            set: self.set.clone(),
            experiment: self.experiment.clone(),
            eta: self.eta,
            ideal: self.ideal,
            theta: self.theta.as_deref().map(parse_angle_list).transpose()?,
            loss: self.loss.as_deref().map(parse_f64_list).transpose()?,
            n_added: self.n_added,
            shots: self.shots,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }),
            jobs: self.jobs,
        })
    }

    pub fn settings(&self) -> Result<Settings> {
        let config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Settings::resolve(&config, &self.overrides()?)
    }
}

/// Resolve settings and run the selected command on a pool of `--jobs` threads.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let settings = cli.common.settings()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = settings.jobs {
        if n == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Spectroscopy(a) => spectroscopy(&settings, a),
        Command::Emit(a) => emit(&settings, a),
        Command::Tomography(a) => tomography(&settings, a),
        Command::Herald(a) => herald(&settings, a),
        Command::Moments(a) => moments(&settings, a),
    })
}

fn theta_label(theta: f64) -> String {
    format!("{:.4}", theta)
}

fn thetas_or(settings: &Settings, default: &[f64]) -> Vec<f64> {
    settings.theta.clone().unwrap_or_else(|| default.to_vec())
}

/// Local minima of `row`, deepest first.
pub fn local_minima(row: &[f64]) -> Vec<usize> {
    let n = row.len();
    let mut idx: Vec<usize> = (0..n)
        .filter(|&k| (k == 0 || row[k] <= row[k - 1]) && (k + 1 == n || row[k] < row[k + 1]))
        .filter(|&k| k != 0 && k + 1 != n)
        .collect();
    idx.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
    idx
}

/// Least-squares line `y = a + b x`; `None` with fewer than two distinct x.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if x.len() < 2 || sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

pub fn spectroscopy(settings: &Settings, args: &SpectroscopyArgs) -> Result<Outcome> {
    let params = &settings.params;
    let frame = hybridize(params)?;
    let kind = match args.which {
        Which::Param => SweepKind::Param,
        Which::Second => SweepKind::Second,
    };
    let amps = match &args.amps {
        Some(s) => parse_f64_list(s)?,
        None => match kind {
            SweepKind::Param => vec![settings.eta],
            SweepKind::Second => vec![0.25, 0.5, 0.75, 1.0],
        },
    };
    if amps.is_empty() || amps.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::Config("amplitudes must be a non-empty list of non-negative numbers".into()));
    }
    // unshifted resonances in GHz, lower first
    let (lo, hi) = match kind {
        SweepKind::Param => (frame.omega_a - params.omega_d_ge, frame.omega_s - params.omega_d_ge),
        SweepKind::Second => {
            let ladder = params.omega_d_ge + params.omega_d_ef();
            (ladder - frame.omega_s, ladder - frame.omega_a)
        }
    };
    let stark = |amp: f64| match kind {
        SweepKind::Param => 0.0,
        SweepKind::Second => 2e-3 * device::ac_stark_shift(device::epsilon_for_zeta(amp, &frame, params), &frame, params),
    };
    let max_amp = amps.iter().cloned().fold(0.0, f64::max);
    let margin = 0.03;
    let start = args.start.unwrap_or_else(|| ((lo - margin + stark(max_amp).min(0.0)) * 1e3).floor() / 1e3);
    let stop = args.stop.unwrap_or_else(|| ((hi + margin + stark(max_amp).max(0.0)) * 1e3).ceil() / 1e3);
    if !(stop > start) {
        return Err(Error::Config(format!("empty frequency window [{start}, {stop}]")));
    }
    let points = args.points.unwrap_or(((stop - start) * 1e3).round() as usize + 1);
    if points < 3 {
        return Err(Error::Config("need at least 3 frequency points".into()));
    }
    if !(args.duration > 0.0) {
        return Err(Error::Config("duration must be positive".into()));
    }
    let freqs = linspace(start, stop, points);
    let step_mhz = (stop - start) / (points - 1) as f64 * 1e3;
    let opts = SweepOptions { duration: args.duration, dt: 0.0 };
    let surface = spectroscopy_sweep(kind, &freqs, &amps, params, &frame, &opts)?;

    let which = match kind {
        SweepKind::Param => "param",
        SweepKind::Second => "2nd",
    };
    let mut out = Outcome::default();
    let mut sink = Sink::new(&settings.out)?;
    let mut table = Table::new(&["freq_GHz", "amp_MHz", "population"]);
    for (a, amp) in amps.iter().enumerate() {
        for (f, freq) in freqs.iter().enumerate() {
            table.push(vec![(*freq).into(), (*amp).into(), surface.population[a][f].into()]);
        }
    }
    sink.table(&settings.file_name(&format!("spectroscopy_{which}")), &table, settings.format)?;

    let mut dips = Table::new(&[
        "amp_MHz",
        "dip1_GHz",
        "dip2_GHz",
        "separation_MHz",
        "expected_low_GHz",
        "expected_high_GHz",
        "min_population",
    ]);
    let mut deepest = Vec::new();
    out.report.push(format!("{which} sweep: {points} points from {start:.4} to {stop:.4} GHz (step {step_mhz:.3} MHz)"));
    for (a, amp) in amps.iter().enumerate() {
        let row = &surface.population[a];
        let minima = local_minima(row);
        let mut two: Vec<f64> = minima.iter().take(2).map(|&k| freqs[k]).collect();
        two.sort_by(f64::total_cmp);
        let sep = if two.len() == 2 { Some((two[1] - two[0]) * 1e3) } else { None };
        let shift = stark(*amp);
        let min_pop = row.iter().cloned().fold(f64::INFINITY, f64::min);
        dips.push(vec![
            (*amp).into(),
            two.first().copied().into(),
            two.get(1).copied().into(),
            sep.into(),
            (lo + shift).into(),
            (hi + shift).into(),
            min_pop.into(),
        ]);
        if let Some(&k) = minima.first() {
            deepest.push((*amp, freqs[k]));
        }
        match sep {
            Some(s) => out.report.push(format!("amp {amp} MHz: dips at {:.4} and {:.4} GHz, separation {s:.1} MHz", two[0], two[1])),
            None => out.report.push(format!("amp {amp} MHz: fewer than two dips (min population {min_pop:.4})")),
        }
    }
    sink.table(&settings.file_name(&format!("spectroscopy_{which}_dips")), &dips, settings.format)?;
    out.report.push(format!("hybridized splitting {:.3} MHz", frame.splitting_mhz()));

    if kind == SweepKind::Second {
        let x: Vec<f64> = deepest.iter().map(|(a, _)| a * a).collect();
        let y: Vec<f64> = deepest.iter().map(|(_, f)| f * 1e3).collect();
        let mut fit = Table::new(&["intercept_MHz", "slope_MHz_per_MHz2", "model_slope_MHz_per_MHz2", "amps"]);
        let model = stark(1.0) * 1e3;
        match fit_line(&x, &y) {
            Some((a, b)) => {
                out.report.push(format!("dip shift vs amp^2: slope {b:.3} MHz/MHz^2 (Stark model {model:.3})"));
                fit.push(vec![a.into(), b.into(), model.into(), deepest.len().into()]);
            }
            None => {
                out.report.push("dip shift vs amp^2: needs two or more distinct amplitudes".into());
                fit.push(vec![Cell::Missing, Cell::Missing, model.into(), deepest.len().into()]);
            }
        }
        sink.table(&settings.file_name("spectroscopy_2nd_stark_fit"), &fit, settings.format)?;
    }
    out.files = sink.written;
    Ok(out)
}

/// Time of the envelope peak as a fraction of the window.
pub fn peak_fraction(env: &Envelope) -> Option<f64> {
    let mags = env.magnitudes();
    let k = (0..mags.len()).max_by(|&i, &j| mags[i].total_cmp(&mags[j]))?;
    let span = env.times.last()? - env.times.first()?;
    (span > 0.0).then(|| (env.times[k] - env.times[0]) / span)
}

/// Model-free decay rate `1/(2π·τ)` in MHz, with `τ` the time for `|f|²` to fall
/// from its peak to `1/e` of it (linear interpolation between samples).
pub fn fall_time_rate(env: &Envelope) -> Option<f64> {
    let mags = env.magnitudes();
    let k = (0..mags.len()).max_by(|&i, &j| mags[i].total_cmp(&mags[j]))?;
    let peak = mags[k] * mags[k];
    if !(peak > 0.0) {
        return None;
    }
    let level = peak / std::f64::consts::E;
    let j = (k + 1..mags.len()).find(|&j| mags[j] * mags[j] <= level)?;
    let (y0, y1) = (mags[j - 1] * mags[j - 1], mags[j] * mags[j]);
    let t = env.times[j - 1] + (env.times[j] - env.times[j - 1]) * (y0 - level) / (y0 - y1);
    let tau = t - env.times[k];
    (tau > 0.0).then(|| 1.0 / (2.0 * PI * tau))
}

fn series_table(table: &mut Table, name: &str, times: &[f64], values: impl Iterator<Item = (f64, f64)>) {
    for (t, (re, im)) in times.iter().zip(values) {
        table.push(vec![name.into(), (*t).into(), re.into(), im.into()]);
    }
}

pub fn emit(settings: &Settings, args: &EmitArgs) -> Result<Outcome> {
    let protocol = match args.protocol {
        ProtocolArg::Encoded => Protocol::Encoded,
        ProtocolArg::Displaced => Protocol::Displaced,
    };
    let etas = match &args.etas {
        Some(s) => parse_f64_list(s)?,
        None => vec![settings.eta],
    };
    let thetas = match protocol {
        Protocol::Encoded => thetas_or(settings, &[0.0, PI / 2.0, PI]),
        Protocol::Displaced => vec![0.0],
    };
    let mut out = Outcome::default();
    let mut sink = Sink::new(&settings.out)?;
    let mut summary = Table::new(&[
        "eta_MHz",
        "protocol",
        "theta",
        "mode",
        "photons",
        "gamma_eff_MHz",
        "gamma_fall_MHz",
        "purity",
        "peak_fraction",
        "carrier_GHz",
    ]);
    let proto_name = match protocol {
        Protocol::Encoded => "encoded",
        Protocol::Displaced => "displaced",
    };
    for eta in &etas {
        let (setup, warnings) = freqbin::dynamics::EmissionSetup::calibrated(
            settings.params.clone(),
            *eta,
            freqbin::dynamics::EmissionOptions::default(),
        )?;
        out.warn(warnings);
        for theta in &thetas {
            let modes = setup.modes_from(&setup.correlations(*theta, protocol)?)?;
            out.warn(modes.warnings.iter().cloned());
            let traj = setup.sender_trajectory(*theta, protocol)?;
            let tag = match protocol {
                Protocol::Encoded => format!("eta{eta:.4}_theta{}", theta_label(*theta)),
                Protocol::Displaced => format!("eta{eta:.4}_displaced"),
            };
            let mut env = Table::new(&["series", "t_us", "re", "im"]);
            for (name, e) in [("A", &modes.a), ("S", &modes.s)] {
                series_table(&mut env, name, &e.times, e.samples.iter().map(|z| (z.re, z.im)));
                summary.push(vec![
                    (*eta).into(),
                    proto_name.into(),
                    (*theta).into(),
                    name.into(),
                    e.photons.into(),
                    e.gamma_eff.into(),
                    fall_time_rate(e).into(),
                    e.purity.into(),
                    peak_fraction(e).into(),
                    e.carrier_ghz.into(),
                ]);
                out.report.push(format!(
                    "eta {eta} MHz, {proto_name}, theta {:.4}: mode {name} photons {:.4}, gamma_eff {}, fall-time rate {}, purity {:.4}",
                    theta,
                    e.photons,
                    e.gamma_eff.map_or("n/a".to_string(), |g| format!("{g:.4} MHz")),
                    fall_time_rate(e).map_or("n/a".to_string(), |g| format!("{g:.4} MHz")),
                    e.purity
                ));
            }
            sink.table(&settings.file_name(&format!("envelopes_{tag}")), &env, settings.format)?;
            let mut pops = Table::new(&["series", "t_us", "re", "im"]);
            for (name, values) in &traj.records {
                series_table(&mut pops, name, &traj.times, values.iter().map(|z| (z.re, z.im)));
            }
            sink.table(&settings.file_name(&format!("populations_{tag}")), &pops, settings.format)?;
        }
    }
    sink.table(&settings.file_name("emit_summary"), &summary, settings.format)?;
    out.files = sink.written;
    Ok(out)
}

fn method(args: &TomographyArgs) -> Result<Method> {
    match args.method {
        MethodArg::Ls => Method::parse("ls", args.rank),
        MethodArg::Gd => Method::parse("gd", args.rank),
    }
}

fn moments_file(set: &MomentSet) -> String {
    format!("{SCHEMA_HEADER}\n{}", set.to_csv_string())
}

fn moments_table(set: &MomentSet) -> Table {
    let mut t = Table::new(&["mA", "nA", "mS", "nS", "re", "im", "stage"]);
    for (k, v) in &set.values {
        t.push(vec![
            (k[0] as usize).into(),
            (k[1] as usize).into(),
            (k[2] as usize).into(),
            (k[3] as usize).into(),
            v.re.into(),
            v.im.into(),
            set.stage.as_str().into(),
        ]);
    }
    t
}

fn write_moments(sink: &mut Sink, stem: &str, set: &MomentSet, format: Format) -> Result<PathBuf> {
    match format {
        Format::Csv => sink.write(&format!("{stem}.csv"), &moments_file(set)),
        Format::Json => sink.table(stem, &moments_table(set), format),
    }
}

pub fn tomography(settings: &Settings, args: &TomographyArgs) -> Result<Outcome> {
    let method = method(args)?;
    let seed = settings.noise_seed()?;
    let det = Detector::new(settings.n_added, settings.shots, seed)?;
    let lab = Lab::new(settings.params.clone(), settings.eta)?;
    let mut out = Outcome::default();
    out.warn(lab.warnings.iter().cloned());
    let cal = match args.normalize {
        NormalizeArg::Calibrated => Some(Calibration::run(&lab, &det)?),
        NormalizeArg::None => None,
    };
    let mut sink = Sink::new(&settings.out)?;
    let mut summary = Table::new(&[
        "label",
        "alpha_re",
        "alpha_im",
        "beta_re",
        "beta_im",
        "F_captured",
        "F",
        "F_logical",
        "discarded",
        "residual",
        "iterations",
        "converged",
    ]);
    let (labels, reports, process) = match args.kind {
        Kind::State => {
            let thetas = thetas_or(settings, &[0.0, PI / 2.0, PI]);
            let amps: Vec<_> = thetas.iter().map(|t| logical_from_theta(*t)).collect();
            let labels: Vec<String> = thetas.iter().map(|t| format!("theta{}", theta_label(*t))).collect();
            (labels, state_tomography(&lab, &det, cal.as_ref(), &amps, method)?, None)
        }
        Kind::Process => {
            let p = process_tomography(&lab, &det, cal.as_ref(), method)?;
            let labels = ["plus_z", "plus_x", "minus_z", "plus_y"].iter().map(|s| s.to_string()).collect();
            (labels, p.states.clone(), Some(p))
        }
    };
    for (label, r) in labels.iter().zip(&reports) {
        out.warn(r.warnings.iter().cloned());
        summary.push(vec![
            label.as_str().into(),
            r.amplitudes[0].re.into(),
            r.amplitudes[0].im.into(),
            r.amplitudes[1].re.into(),
            r.amplitudes[1].im.into(),
            r.captured_fidelity.into(),
            r.fidelity.into(),
            r.logical_fidelity.into(),
            r.logical.discarded.into(),
            r.reconstruction.residual.into(),
            r.reconstruction.iterations.into(),
            (if r.reconstruction.converged { "true" } else { "false" }).into(),
        ]);
        out.report.push(format!(
            "{label}: F = {:.4} (captured {:.4}, logical {:.4})",
            r.fidelity, r.captured_fidelity, r.logical_fidelity
        ));
        let mut doc = Map::new();
        doc.insert("label".into(), json!(label));
        doc.insert("rho".into(), density_json(&r.reconstruction.rho));
        doc.insert("logical".into(), density_json(&r.logical.rho));
        doc.insert("fidelity".into(), json!(r.fidelity));
        doc.insert("logical_fidelity".into(), json!(r.logical_fidelity));
        sink.write(&format!("{}.json", settings.file_name(&format!("rho_{label}"))), &pretty(&tagged(doc)))?;
        write_moments(&mut sink, &settings.file_name(&format!("moments_{label}")), &r.moments, settings.format)?;
    }
    let kind = match args.kind {
        Kind::State => "state",
        Kind::Process => "process",
    };
    sink.table(&settings.file_name(&format!("tomography_{kind}")), &summary, settings.format)?;
    if let Some(p) = process {
        out.warn(p.qpt.warnings.iter().cloned());
        let mut doc = Map::new();
        doc.insert("chi".into(), process_json(&p.qpt.process));
        doc.insert("process_fidelity".into(), json!(p.fidelity));
        doc.insert("tp_residual".into(), json!(p.qpt.process.tp_residual()));
        doc.insert("min_eigenvalue".into(), json!(p.qpt.process.min_eigenvalue()));
        doc.insert("objective".into(), json!(p.qpt.objective));
        sink.write(&format!("{}.json", settings.file_name("chi")), &pretty(&tagged(doc)))?;
        out.report.push(format!(
            "process fidelity vs identity: {:.4} (TP residual {:.2e})",
            p.fidelity,
            p.qpt.process.tp_residual()
        ));
    }
    out.files = sink.written;
    Ok(out)
}

pub fn herald(settings: &Settings, _args: &HeraldArgs) -> Result<Outcome> {
    let thetas = thetas_or(settings, &[PI / 2.0]);
    let grid = settings.loss.clone().unwrap_or_else(|| linspace(0.0, 1.0, 21));
    let mut out = Outcome::default();
    let mut sink = Sink::new(&settings.out)?;
    let mut sweep = Table::new(&["theta", "p", "p_flag", "F_heralded", "F_unheralded"]);
    let mut remote = Table::new(&["theta", "p", "p_flag", "fidelity", "coherence", "x_coherence"]);
    for theta in &thetas {
        for row in loss_sweep(*theta, &grid)? {
            sweep.push(vec![(*theta).into(), row.p.into(), row.p_flag.into(), row.f_heralded.into(), row.f_unheralded.into()]);
        }
        for p in &grid {
            let r = remote_entanglement(*theta, &LossChannel::equal(*p)?)?;
            let xc = 2.0 * r.x_marginal.matrix()[[0, 1]].norm();
            remote.push(vec![(*theta).into(), (*p).into(), r.p_flag.into(), r.fidelity.into(), r.coherence.into(), xc.into()]);
        }
        let lossless = remote_entanglement(*theta, &LossChannel::equal(0.0)?)?;
        out.report.push(format!(
            "theta {:.4}: lossless remote-entanglement fidelity {:.6}",
            theta,
            lossless.fidelity.unwrap_or(f64::NAN)
        ));
    }
    sink.table(&settings.file_name("loss_sweep"), &sweep, settings.format)?;
    sink.table(&settings.file_name("remote_entanglement"), &remote, settings.format)?;
    out.files = sink.written;
    Ok(out)
}

pub fn moments(settings: &Settings, args: &MomentsArgs) -> Result<Outcome> {
    let seed = settings.noise_seed()?;
    let noise = NoiseModel::new(settings.n_added, settings.shots, seed)?;
    let mut inputs: Vec<(String, MomentSet)> = Vec::new();
    if let Some(path) = &args.input {
        let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        inputs.push(("input".into(), MomentSet::read_csv(BufReader::new(file))?));
    } else {
        let thetas = thetas_or(settings, &[PI / 2.0]);
        let lab = if args.simulate { Some(Lab::new(settings.params.clone(), settings.eta)?) } else { None };
        for theta in thetas {
            let rho = match &lab {
                Some(lab) => lab.emit(&logical_from_theta(theta))?.state,
                None => ideal_field_state(theta, Protocol::Encoded)?,
            };
            inputs.push((format!("theta{}", theta_label(theta)), moments_from_state(&rho)?));
        }
    }
    let mut out = Outcome::default();
    let mut sink = Sink::new(&settings.out)?;
    for (label, ideal) in &inputs {
        let (raw, reference) = synthesize_raw_moments(ideal, &noise)?;
        let denoised = denoise_moments(&raw, &reference)?;
        for (stage, set) in [("ideal", ideal), ("raw", &raw), ("reference", &reference), ("denoised", &denoised)] {
            write_moments(&mut sink, &settings.file_name(&format!("moments_{label}_{stage}")), set, settings.format)?;
        }
        out.report.push(format!(
            "{label}: <a_A^dag a_A> = {:.6}, <a_S^dag a_S> = {:.6}, max |denoised - ideal| = {:.3e}",
            denoised.get([1, 1, 0, 0]).re,
            denoised.get([0, 0, 1, 1]).re,
            denoised.max_difference(ideal)
        ));
        if args.repeats > 0 {
            let batch = monte_carlo_denoised(ideal, &noise, args.repeats)?;
            write_moments(&mut sink, &settings.file_name(&format!("moments_{label}_spread")), &moment_spread(&batch), settings.format)?;
        }
    }
    out.files = sink.written;
    Ok(out)
}
