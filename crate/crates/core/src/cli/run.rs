use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use thiserror::Error;

use super::config::{parse_config, CliArgs, ConfigError, RunConfig};
use crate::modecalc::{beam_params, sample_mode, BeamGeometry, ModeLabel, SpatialGrid};
use crate::protocol::{run_session, write_transcript_csv, SessionStats};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("session failed: {0}")]
    Session(#[from] crate::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stats: SessionStats,
    pub written: Vec<PathBuf>,
}

impl RunSummary {
    pub fn one_line(&self) -> String {
        let s = &self.stats;
        format!(
            "sifted={} qber={:.6} aborted={} key_bits={}",
            s.sifted_count, s.qber_estimate, s.aborted, s.key_bits
        )
    }
}

/// Writes `x,y,re,im` rows of one mode over a square grid.
pub fn write_mode_csv<W: Write>(
    label: &ModeLabel,
    geom: &BeamGeometry,
    z: f64,
    grid: &SpatialGrid,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "x,y,re,im")?;
    for (x, y, u) in sample_mode(label, geom, z, grid) {
        writeln!(out, "{x},{y},{},{}", u.re, u.im)?;
    }
    Ok(())
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), RunError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Runs the session and writes `stats.json`, `config.json`, and optionally
/// `transcript.csv` and one `mode_FAMILY_N_M.csv` per dump request.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let mut written = Vec::new();

    let (stats, records) = run_session(&cfg.session_config())?;

    let config_path = cfg.out.join("config.json");
    let config_json = serde_json::to_string_pretty(cfg).expect("config serialize");
    write_file(&config_path, |w| writeln!(w, "{config_json}"))?;
    written.push(config_path);

    let stats_path = cfg.out.join("stats.json");
    write_file(&stats_path, |w| writeln!(w, "{}", stats.to_json()))?;
    written.push(stats_path);

    if cfg.transcript {
        let path = cfg.out.join("transcript.csv");
        write_file(&path, |w| write_transcript_csv(&records, w))?;
        written.push(path);
    }

    let geom = cfg.geometry();
    for label in &cfg.dump_mode {
        let half_width = cfg.dump_half_width.unwrap_or_else(|| 6.0 * beam_params(&geom, cfg.dump_z).w);
        let grid = SpatialGrid::new(half_width, cfg.dump_samples)?;
        let path = cfg.out.join(format!("mode_{}_{}_{}.csv", label.family, label.n, label.m));
        write_file(&path, |w| write_mode_csv(label, &geom, cfg.dump_z, &grid, w))?;
        written.push(path);
    }

    Ok(RunSummary { stats, written })
}

/// Full CLI: exit 0 on a completed run (aborted sessions included), 2 on a
/// bad config, 1 on any other failure.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match CliArgs::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match parse_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(summary) => {
            println!("{}", summary.one_line());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RunError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
