use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::channel::{ChannelElement, ChannelSpec, EveMode};
use crate::devices::DeviceConfig;
use crate::modecalc::{BeamGeometry, ModeLabel};
use crate::protocol::SessionConfig;
use crate::qstate::build_mub_family;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{field}`: {message}")]
    Validation { field: &'static str, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation { field, message: message.into() }
}

/// Everything one invocation needs. Keys are flat and mirror the CLI flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dimension of the encoding subspace; a power of 2 for the sorter bench.
    pub d: usize,
    pub photons: u64,
    /// Number of mutually unbiased bases used by both parties.
    pub mubs: usize,
    /// OAM sector `l` of the transmitted modes `LG(n+l, n)`.
    pub oam: i32,
    pub seed: u64,
    pub channel: ChannelSpec,
    /// Intercept-resend eavesdropper appended after the channel elements.
    #[serde(with = "opt_display")]
    pub eve: Option<EveMode>,
    pub test_fraction: f64,
    pub threshold: f64,
    pub emission_rate: f64,
    pub wavenumber: f64,
    pub rayleigh_range: f64,
    pub compensate_gouy: bool,
    /// Link length the receiver compensates for; defaults to the summed `gouy` distances.
    pub propagation_z: Option<f64>,
    pub detuning_epsilon: f64,
    pub threads: usize,
    pub out: PathBuf,
    pub transcript: bool,
    #[serde(with = "label_list")]
    pub dump_mode: Vec<ModeLabel>,
    pub dump_z: f64,
    pub dump_samples: usize,
    /// Half width of the dump grid; defaults to `6 w(z)`.
    pub dump_half_width: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 4,
            photons: 10_000,
            mubs: 2,
            oam: 0,
            seed: 0,
            channel: ChannelSpec::default(),
            eve: None,
            test_fraction: 0.1,
            threshold: 0.11,
            emission_rate: 1.0e6,
            wavenumber: 1.0e7,
            rayleigh_range: 1.0,
            compensate_gouy: false,
            propagation_z: None,
            detuning_epsilon: 0.0,
            threads: 0,
            out: PathBuf::from("out"),
            transcript: false,
            dump_mode: Vec::new(),
            dump_z: 0.0,
            dump_samples: 64,
            dump_half_width: None,
        }
    }
}

mod opt_display {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<EveMode>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(mode) => s.collect_str(mode),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<EveMode>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

mod label_list {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[ModeLabel], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|l| format!("{},{},{}", l.family, l.n, l.m)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ModeLabel>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Command-line flags; each one overrides the matching config-file key.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "oam-qkd", version, about = "Simulate d-dimensional BB84 over photon spatial modes")]
pub struct CliArgs {
    /// JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub photons: Option<u64>,
    #[arg(long)]
    pub mubs: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub oam: Option<i32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Channel element, e.g. "rotation: 0.7" or "loss: 0.1"; repeat for a chain (replaces the file's list)
    #[arg(long = "channel", allow_hyphen_values = true)]
    pub channel: Vec<String>,
    /// random | fixed:IDX
    #[arg(long)]
    pub eve: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub emission_rate: Option<f64>,
    #[arg(long)]
    pub wavenumber: Option<f64>,
    #[arg(long)]
    pub rayleigh_range: Option<f64>,
    #[arg(long)]
    pub compensate_gouy: bool,
    #[arg(long)]
    pub propagation_z: Option<f64>,
    #[arg(long)]
    pub detuning_epsilon: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write transcript.csv
    #[arg(long)]
    pub transcript: bool,
    /// FAMILY,N,M mode to dump as CSV; repeatable
    #[arg(long = "dump-mode")]
    pub dump_mode: Vec<String>,
    /// Propagation distance of the mode dumps
    #[arg(long = "z", allow_hyphen_values = true)]
    pub dump_z: Option<f64>,
    #[arg(long)]
    pub dump_samples: Option<usize>,
    #[arg(long)]
    pub dump_half_width: Option<f64>,
}

/// Reads a JSON config, reporting syntax and type errors with line and column.
pub fn load_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// File values (or defaults), overridden by flags, then validated.
pub fn parse_config(args: &CliArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => load_config_file(path)?,
        None => RunConfig::default(),
    };
    macro_rules! take {
        ($($field:ident),*) => { $( if let Some(v) = args.$field.clone() { cfg.$field = v; } )* };
    }
    take!(d, photons, mubs, oam, seed, test_fraction, threshold, emission_rate, wavenumber);
    take!(rayleigh_range, detuning_epsilon, threads, out, dump_z, dump_samples);
    if args.propagation_z.is_some() {
        cfg.propagation_z = args.propagation_z;
    }
    if args.dump_half_width.is_some() {
        cfg.dump_half_width = args.dump_half_width;
    }
    if !args.channel.is_empty() {
        cfg.channel = ChannelSpec::new(
            args.channel
                .iter()
                .map(|s| s.parse::<ChannelElement>().map_err(|e| invalid("channel", e)))
                .collect::<Result<_, _>>()?,
        );
    }
    if let Some(eve) = &args.eve {
        cfg.eve = Some(eve.parse().map_err(|e: String| invalid("eve", e))?);
    }
    if !args.dump_mode.is_empty() {
        cfg.dump_mode = args
            .dump_mode
            .iter()
            .map(|s| s.parse::<ModeLabel>().map_err(|e| invalid("dump_mode", e)))
            .collect::<Result<_, _>>()?;
    }
    cfg.compensate_gouy |= args.compensate_gouy;
    cfg.transcript |= args.transcript;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.d < 2 || !self.d.is_power_of_two() {
            return Err(invalid(
                "d",
                format!("d = {} but the SMI sorter device model needs a power of 2 (d >= 2)", self.d),
            ));
        }
        if self.photons < 1 || self.photons == u64::MAX {
            return Err(invalid("photons", "must be at least 1"));
        }
        build_mub_family(self.d, self.mubs).map_err(|e| invalid("mubs", e.to_string()))?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(invalid("test_fraction", format!("must lie in (0, 1), got {}", self.test_fraction)));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(invalid("threshold", format!("must lie in [0, 1], got {}", self.threshold)));
        }
        if !(self.emission_rate.is_finite() && self.emission_rate > 0.0) {
            return Err(invalid("emission_rate", format!("must be positive, got {}", self.emission_rate)));
        }
        BeamGeometry::new(self.wavenumber, self.rayleigh_range).map_err(|e| invalid("wavenumber/rayleigh_range", e.to_string()))?;
        if !(self.detuning_epsilon.is_finite() && self.detuning_epsilon >= 0.0) {
            return Err(invalid("detuning_epsilon", format!("must be >= 0, got {}", self.detuning_epsilon)));
        }
        if let Some(z) = self.propagation_z {
            if !z.is_finite() {
                return Err(invalid("propagation_z", "must be finite"));
            }
        }
        self.channel.validate().map_err(|e| invalid("channel", e.to_string()))?;
        let eve_modes = self.channel.elements.iter().filter_map(|e| match e {
            ChannelElement::Eve(m) => Some(*m),
            _ => None,
        });
        for mode in eve_modes.chain(self.eve) {
            if let EveMode::FixedBasis(i) = mode {
                if i >= self.mubs {
                    return Err(invalid("eve", format!("basis index {i} but only {} bases", self.mubs)));
                }
            }
        }
        if self.dump_samples < 2 {
            return Err(invalid("dump_samples", "must be at least 2"));
        }
        if !self.dump_z.is_finite() {
            return Err(invalid("dump_z", "must be finite"));
        }
        if let Some(hw) = self.dump_half_width {
            if !(hw.is_finite() && hw > 0.0) {
                return Err(invalid("dump_half_width", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> BeamGeometry {
        BeamGeometry { wavenumber: self.wavenumber, rayleigh_range: self.rayleigh_range }
    }

    /// Channel list with the `eve` shortcut appended.
    pub fn channel_spec(&self) -> ChannelSpec {
        let mut spec = self.channel.clone();
        if let Some(mode) = self.eve {
            spec.elements.push(ChannelElement::Eve(mode));
        }
        spec
    }

    pub fn session_config(&self) -> SessionConfig {
        let propagation_z = self.propagation_z.unwrap_or_else(|| {
            self.channel
                .elements
                .iter()
                .map(|e| if let ChannelElement::Gouy { z } = e { *z } else { 0.0 })
                .sum()
        });
        SessionConfig {
            d: self.d,
            num_mubs: self.mubs,
            oam_sector: self.oam,
            photons: self.photons,
            channel: self.channel_spec(),
            test_fraction: self.test_fraction,
            qber_abort_threshold: self.threshold,
            emission_rate: self.emission_rate,
            seed: self.seed,
            device: DeviceConfig {
                d: self.d,
                compensate_gouy: self.compensate_gouy,
                propagation_z,
                geom: self.geometry(),
                detuning_epsilon: self.detuning_epsilon,
            },
            threads: self.threads,
        }
    }
}
