//! Run configuration: a TOML file merged with command-line overrides.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use freqbin::device::DeviceParams;
use freqbin::{Error, Result};
use serde::Deserialize;

pub const SCHEMA_HEADER: &str = concat!("# freqbin-lab v", env!("CARGO_PKG_VERSION"), " schema=1");
pub const SCHEMA_TAG: &str = concat!("freqbin-lab v", env!("CARGO_PKG_VERSION"), " schema=1");

pub const DEFAULT_ETA_MHZ: f64 = 1.1;
pub const DEFAULT_N_ADDED: f64 = 2.1;
pub const DEFAULT_SHOTS: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format {other:?} (csv or json)"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// An angle given as a number (radians) or an expression such as `pi/2` or `0.25pi`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Text(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Radians(x) => Ok(*x),
            Angle::Text(s) => parse_angle(s),
        }
    }
}

/// Parse `1.2`, `pi`, `pi/4`, `3pi/4`, `0.5pi` or `3*pi/4` into radians.
pub fn parse_angle(text: &str) -> Result<f64> {
    let s: String = text.trim().to_ascii_lowercase().chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
    let bad = || Error::Config(format!("cannot parse angle {text:?}"));
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.to_string(), b.parse::<f64>().map_err(|_| bad())?),
        None => (s.clone(), 1.0),
    };
    let value = if let Some(coef) = num.strip_suffix("pi") {
        let c = if coef.is_empty() { 1.0 } else if coef == "-" { -1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
        c * PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    if den == 0.0 {
        return Err(bad());
    }
    Ok(value / den)
}

/// Comma-separated list of angles.
pub fn parse_angle_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').filter(|s| !s.trim().is_empty()).map(parse_angle).collect()
}

pub fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Config(format!("cannot parse number {s:?}"))))
        .collect()
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub n_added: Option<f64>,
    /// Zero selects the infinite-shot limit.
    pub shots: Option<u64>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Device parameter file; the bundled defaults when absent.
    pub device: Option<PathBuf>,
    /// Per-key device overrides, e.g. `T1_ge_us = 30.0`.
    #[serde(default)]
    pub device_overrides: BTreeMap<String, f64>,
    /// Prefix for output file names.
    pub experiment: Option<String>,
    /// Parametric drive amplitude, MHz.
    pub eta: Option<f64>,
    /// Drop every decoherence channel.
    pub ideal: Option<bool>,
    pub theta: Option<Vec<Angle>>,
    pub loss: Option<Vec<f64>>,
    pub noise: Option<NoiseConfig>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Command-line values that override the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub device: Option<PathBuf>,
    pub set: Vec<String>,
    pub experiment: Option<String>,
    pub eta: Option<f64>,
    pub ideal: bool,
    pub theta: Option<Vec<f64>>,
    pub loss: Option<Vec<f64>>,
    pub n_added: Option<f64>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: Option<usize>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub params: DeviceParams,
    pub experiment: Option<String>,
    pub eta: f64,
    pub ideal: bool,
    pub theta: Option<Vec<f64>>,
    pub loss: Option<Vec<f64>>,
    pub n_added: f64,
    /// `None` for the infinite-shot limit.
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub format: Format,
    pub jobs: Option<usize>,
}

fn parse_assignment(s: &str) -> Result<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Config(format!("expected KEY=VALUE, got {s:?}")))?;
    let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("bad value in {s:?}")))?;
    Ok((k.trim().to_string(), v))
}

impl Settings {
    pub fn resolve(config: &RunConfig, cli: &Overrides) -> Result<Self> {
        let device = cli.device.as_ref().or(config.device.as_ref());
        let mut params = match device {
            Some(path) => DeviceParams::load(path)?,
            None => DeviceParams::default(),
        };
        for (k, v) in &config.device_overrides {
            params.set(k, *v)?;
        }
        for s in &cli.set {
            let (k, v) = parse_assignment(s)?;
            params.set(&k, v)?;
        }
        let ideal = cli.ideal || config.ideal.unwrap_or(false);
        if ideal {
            params = params.without_decoherence();
        }
        let theta = match (&cli.theta, &config.theta) {
            (Some(t), _) => Some(t.clone()),
            (None, Some(t)) => Some(t.iter().map(Angle::radians).collect::<Result<Vec<_>>>()?),
            (None, None) => None,
        };
        let noise = config.noise.clone().unwrap_or_default();
        let shots = cli.shots.or(noise.shots).unwrap_or(DEFAULT_SHOTS);
        let eta = cli.eta.or(config.eta).unwrap_or(DEFAULT_ETA_MHZ);
        if !(eta >= 0.0) {
            return Err(Error::Config(format!("eta must be non-negative, got {eta}")));
        }
        let n_added = cli.n_added.or(noise.n_added).unwrap_or(DEFAULT_N_ADDED);
        if !(n_added >= 0.0) {
            return Err(Error::Config(format!("n_added must be non-negative, got {n_added}")));
        }
        Ok(Self {
            params,
            experiment: cli.experiment.clone().or_else(|| config.experiment.clone()),
            eta,
            ideal,
            theta,
            loss: cli.loss.clone().or_else(|| config.loss.clone()),
            n_added,
            shots: if shots == 0 { None } else { Some(shots) },
            seed: cli.seed.or(config.seed),
            out: cli.out.clone().or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("freqbin-out")),
            format: cli.format.or(config.format).unwrap_or_default(),
            jobs: cli.jobs.or(config.jobs),
        })
    }

    /// Seed for noisy runs; finite shot counts require one.
    pub fn noise_seed(&self) -> Result<u64> {
        match (self.shots, self.seed) {
            (None, s) => Ok(s.unwrap_or(0)),
            (Some(_), Some(s)) => Ok(s),
            (Some(_), None) => Err(Error::Config("--seed is required for runs with finite shots".into())),
        }
    }

    /// `<experiment>_<name>` or just `name`.
    pub fn file_name(&self, name: &str) -> String {
        match &self.experiment {
            Some(p) => format!("{p}_{name}"),
            None => name.to_string(),
        }
    }
}
