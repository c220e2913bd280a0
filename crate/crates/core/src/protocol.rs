//! The BB84 session engine.
//!
//! Each round draws from its own ChaCha stream keyed by `(seed, round_id)`,
//! so rounds can run on any number of threads and still produce the same
//! transcript. Sifting and the public QBER test run afterwards, in round
//! order, on a dedicated stream.

use std::io::{self, Write};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, ChannelSpec, Photon};
use crate::devices::{measure_in, modal_convert, prepare_in, ConvertDirection, DeviceConfig};
use crate::error::{Error, Result};
use crate::qstate::{build_mub_family, MubFamily};

pub const STATS_SCHEMA_VERSION: u32 = 1;

/// Stream id reserved for the sifting-phase draws.
const PUBLIC_DISCUSSION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub d: usize,
    pub num_mubs: usize,
    pub oam_sector: i32,
    pub photons: u64,
    pub channel: ChannelSpec,
    pub test_fraction: f64,
    pub qber_abort_threshold: f64,
    /// Photons per second; round `i` is emitted at `i / emission_rate`.
    pub emission_rate: f64,
    pub seed: u64,
    pub device: DeviceConfig,
    /// Worker threads for the round loop; 0 lets rayon decide, 1 runs inline.
    #[serde(default)]
    pub threads: usize,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::ConfigInvalid(msg));
        if self.d != self.device.d {
            return invalid(format!("d = {} but device.d = {}", self.d, self.device.d));
        }
        self.device.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if self.photons < 1 || self.photons == u64::MAX {
            return invalid(format!("photons must be >= 1, got {}", self.photons));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return invalid(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.qber_abort_threshold) {
            return invalid(format!(
                "qber_abort_threshold must lie in [0, 1], got {}",
                self.qber_abort_threshold
            ));
        }
        if !(self.emission_rate.is_finite() && self.emission_rate > 0.0) {
            return invalid(format!("emission_rate must be positive, got {}", self.emission_rate));
        }
        self.channel.validate().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        build_mub_family(self.d, self.num_mubs).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_id: u64,
    pub emission_time: f64,
    pub alice_basis: usize,
    pub alice_symbol: usize,
    pub delivered: bool,
    pub bob_basis: usize,
    pub bob_outcome: Option<usize>,
    pub sifted: bool,
    pub sacrificed: bool,
    pub eve_basis: Option<usize>,
    pub eve_outcome: Option<usize>,
}

impl RoundRecord {
    pub fn is_error(&self) -> bool {
        self.bob_outcome.is_some_and(|b| b != self.alice_symbol)
    }
}

/// Wall-clock figures; the only non-deterministic part of [`SessionStats`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub elapsed_seconds: f64,
    pub photons_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub schema_version: u32,
    pub sent: u64,
    pub delivered: u64,
    pub sifted_count: u64,
    pub sacrificed_count: u64,
    pub test_errors: u64,
    pub qber_estimate: f64,
    /// Set when no sifted round was sacrificed, so the QBER estimate is vacuous.
    pub low_statistics: bool,
    pub aborted: bool,
    pub key_symbols: Vec<usize>,
    pub key_bits: f64,
    pub eve_mutual_information_estimate: Option<f64>,
    pub wall_clock: WallClock,
}

impl SessionStats {
    /// The stats with the wall-clock block zeroed, for reproducibility checks.
    pub fn without_wall_clock(&self) -> SessionStats {
        SessionStats {
            wall_clock: WallClock { elapsed_seconds: 0.0, photons_per_second: 0.0 },
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }
}

/// Result of the public error-rate test on the sifted key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QberEstimate {
    pub qber: f64,
    pub sacrificed: u64,
    pub errors: u64,
    pub low_statistics: bool,
}

/// Marks delivered rounds where both parties used the same basis. Symbol values are not read.
pub fn sift(records: &mut [RoundRecord]) {
    for r in records.iter_mut() {
        r.sifted = r.delivered && r.alice_basis == r.bob_basis;
    }
}

/// Sacrifices each sifted round with probability `test_fraction` (one draw per
/// sifted round, in order) and compares symbols on the sacrificed ones.
pub fn estimate_qber<R: Rng + ?Sized>(records: &mut [RoundRecord], test_fraction: f64, rng: &mut R) -> QberEstimate {
    let mut sacrificed = 0u64;
    let mut errors = 0u64;
    for r in records.iter_mut() {
        r.sacrificed = false;
        if !r.sifted {
            continue;
        }
        if rng.random::<f64>() < test_fraction {
            r.sacrificed = true;
            sacrificed += 1;
            if r.is_error() {
                errors += 1;
            }
        }
    }
    if sacrificed == 0 {
        return QberEstimate { qber: 0.0, sacrificed: 0, errors: 0, low_statistics: true };
    }
    QberEstimate { qber: errors as f64 / sacrificed as f64, sacrificed, errors, low_statistics: false }
}

/// Plug-in estimate, in bits, of the mutual information between Alice's
/// symbol and Eve's outcome over sifted rounds Eve touched.
pub fn eve_mutual_information(records: &[RoundRecord], d: usize) -> Option<f64> {
    let mut joint = vec![0u64; d * d];
    let mut total = 0u64;
    for r in records.iter().filter(|r| r.sifted) {
        if let Some(e) = r.eve_outcome {
            joint[r.alice_symbol * d + e] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    let t = total as f64;
    let pa: Vec<f64> = (0..d).map(|a| (0..d).map(|e| joint[a * d + e]).sum::<u64>() as f64 / t).collect();
    let pe: Vec<f64> = (0..d).map(|e| (0..d).map(|a| joint[a * d + e]).sum::<u64>() as f64 / t).collect();
    let mut info = 0.0;
    for a in 0..d {
        for e in 0..d {
            let p = joint[a * d + e] as f64 / t;
            if p > 0.0 {
                info += p * (p / (pa[a] * pe[e])).log2();
            }
        }
    }
    Some(info.max(0.0))
}

fn round_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Engine {
    cfg: SessionConfig,
    mub: Arc<MubFamily>,
    channel: Channel,
}

impl Engine {
    fn new(cfg: &SessionConfig) -> Result<Self> {
        cfg.validate()?;
        let mub = Arc::new(build_mub_family(cfg.d, cfg.num_mubs)?);
        let channel = Channel::new(cfg.channel.clone(), cfg.device.geom, mub.clone())?;
        Ok(Self { cfg: cfg.clone(), mub, channel })
    }

    fn round(&self, round_id: u64) -> Result<RoundRecord> {
        let cfg = &self.cfg;
        let mut rng = round_rng(cfg.seed, round_id);
        let t = round_id as f64 / cfg.emission_rate;
        let m = self.mub.len();

        let alice_basis = rng.random_range(0..m);
        let alice_symbol = rng.random_range(0..cfg.d);
        let bob_basis = rng.random_range(0..m);

        let prepared = prepare_in(self.mub.basis(alice_basis)?, alice_symbol, &cfg.device)?
            .with_sector(cfg.oam_sector);
        let in_flight = modal_convert(&prepared, ConvertDirection::HgToLg)?;
        let transit = self.channel.transmit(in_flight, t, &mut rng)?;

        let bob_outcome = match transit.photon {
            Photon::Delivered(state) => {
                let received = modal_convert(&state, ConvertDirection::LgToHg)?;
                Some(measure_in(&received, self.mub.basis(bob_basis)?, &cfg.device, &mut rng)?)
            }
            Photon::Lost => None,
        };

        Ok(RoundRecord {
            round_id,
            emission_time: t,
            alice_basis,
            alice_symbol,
            delivered: bob_outcome.is_some(),
            bob_basis,
            bob_outcome,
            sifted: false,
            sacrificed: false,
            eve_basis: transit.eve.map(|e| e.basis),
            eve_outcome: transit.eve.map(|e| e.outcome),
        })
    }

    fn rounds(&self) -> Result<Vec<RoundRecord>> {
        let n = self.cfg.photons;
        if self.cfg.threads == 1 {
            return (0..n).map(|i| self.round(i)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.threads)
            .build()
            .map_err(|e| Error::ConfigInvalid(format!("cannot start worker pool: {e}")))?;
        // indexed collect keeps round_id order regardless of scheduling
        pool.install(|| (0..n).into_par_iter().map(|i| self.round(i)).collect())
    }
}

/// Runs one full session: transmission rounds, sifting, QBER test, abort decision.
pub fn run_session(cfg: &SessionConfig) -> Result<(SessionStats, Vec<RoundRecord>)> {
    let started = Instant::now();
    let engine = Engine::new(cfg)?;
    let mut records = engine.rounds()?;

    sift(&mut records);
    let mut public = round_rng(cfg.seed, PUBLIC_DISCUSSION_STREAM);
    let estimate = estimate_qber(&mut records, cfg.test_fraction, &mut public);
    let aborted = estimate.qber > cfg.qber_abort_threshold;

    let key_symbols: Vec<usize> = if aborted {
        Vec::new()
    } else {
        records.iter().filter(|r| r.sifted && !r.sacrificed).map(|r| r.alice_symbol).collect()
    };
    let key_bits = key_symbols.len() as f64 * (cfg.d as f64).log2();
    let eve_info = if cfg.channel.has_eve() { eve_mutual_information(&records, cfg.d) } else { None };

    let elapsed = started.elapsed().as_secs_f64();
    let stats = SessionStats {
        schema_version: STATS_SCHEMA_VERSION,
        sent: cfg.photons,
        delivered: records.iter().filter(|r| r.delivered).count() as u64,
        sifted_count: records.iter().filter(|r| r.sifted).count() as u64,
        sacrificed_count: estimate.sacrificed,
        test_errors: estimate.errors,
        qber_estimate: estimate.qber,
        low_statistics: estimate.low_statistics,
        aborted,
        key_symbols,
        key_bits,
        eve_mutual_information_estimate: eve_info,
        wall_clock: WallClock {
            elapsed_seconds: elapsed,
            photons_per_second: if elapsed > 0.0 { cfg.photons as f64 / elapsed } else { 0.0 },
        },
    };
    Ok((stats, records))
}

pub const TRANSCRIPT_HEADER: &str =
    "round_id,emission_time,alice_basis,alice_symbol,delivered,bob_basis,bob_outcome,sifted,sacrificed,eve_basis,eve_outcome";

/// One line per round; missing values are empty fields.
pub fn write_transcript_csv<W: Write>(records: &[RoundRecord], mut out: W) -> io::Result<()> {
    fn opt(v: Option<usize>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    writeln!(out, "{TRANSCRIPT_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.round_id,
            r.emission_time,
            r.alice_basis,
            r.alice_symbol,
            r.delivered,
            r.bob_basis,
            opt(r.bob_outcome),
            r.sifted,
            r.sacrificed,
            opt(r.eve_basis),
            opt(r.eve_outcome),
        )?;
    }
    Ok(())
}
