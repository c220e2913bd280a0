//! Preparation and measurement hardware on Alice's and Bob's benches.
//!
//! The B1 measurement is a binary tree of spatial modal interleavers (SMIs):
//! stage `j` holds `2^{j-1}` SMIs, each splitting on one bit of the mode
//! index, so `d = 2^s` ports come out of `s` stages. The Fourier-type
//! measurements run the same sorter coherently, erase the mode label on every
//! output path with a mode analyzer (MODAN), apply per-path phase shifters
//! and then interfere the paths in an inverse DFT before detection.
//! Preparation devices are the same chains run backwards.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modecalc::{gouy_angle, BeamGeometry, ModeLabel};
use crate::qstate::{sample_index, Basis, BasisKind, Frame, PureState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    pub d: usize,
    /// Whether Bob's Fourier chain undoes the Gouy phase of a link of length `propagation_z`.
    pub compensate_gouy: bool,
    pub propagation_z: f64,
    pub geom: BeamGeometry,
    /// Per-path phase error `n * detuning_epsilon` in the Fourier chain.
    pub detuning_epsilon: f64,
}

impl DeviceConfig {
    pub fn new(d: usize, geom: BeamGeometry) -> Self {
        Self { d, compensate_gouy: false, propagation_z: 0.0, geom, detuning_epsilon: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || !self.d.is_power_of_two() {
            return Err(Error::UnsupportedDimension {
                dim: self.d,
                what: "SMI sorter (d must be a power of 2, d >= 2)",
            });
        }
        if !(self.detuning_epsilon.is_finite() && self.detuning_epsilon >= 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "detuning_epsilon must be finite and >= 0, got {}",
                self.detuning_epsilon
            )));
        }
        if !self.propagation_z.is_finite() {
            return Err(Error::ConfigInvalid("propagation_z must be finite".into()));
        }
        self.geom.validate()
    }

    /// Gouy angle the receiver compensates for.
    pub fn compensation_psi(&self) -> f64 {
        if self.compensate_gouy {
            gouy_angle(&self.geom, self.propagation_z)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvertDirection {
    HgToLg,
    LgToHg,
}

/// Cylindrical-lens converter: `HG(n,m) <-> LG(n,m)` index-wise.
pub fn modal_convert(state: &PureState, direction: ConvertDirection) -> Result<PureState> {
    let (from, to) = match direction {
        ConvertDirection::HgToLg => (Frame::HgSide, Frame::LgSide),
        ConvertDirection::LgToHg => (Frame::LgSide, Frame::HgSide),
    };
    if state.frame() != from {
        return Err(Error::WrongFrame { expected: from, actual: state.frame() });
    }
    Ok(state.clone().with_frame(to))
}

/// Ideal cascade of SMIs sorting `HG(n,n)` onto output port `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SorterTree {
    stages: u32,
}

impl SorterTree {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::UnsupportedDimension { dim: d, what: "SMI sorter" });
        }
        Ok(Self { stages: d.trailing_zeros() })
    }

    pub fn ports(&self) -> usize {
        1 << self.stages
    }

    pub fn stages(&self) -> u32 {
        self.stages
    }

    /// Number of SMIs in each stage, first stage first.
    pub fn smis_per_stage(&self) -> Vec<usize> {
        (0..self.stages).map(|j| 1usize << j).collect()
    }

    pub fn smi_count(&self) -> usize {
        self.ports() - 1
    }

    /// Output port reached by mode index `n`: stage `j` reads bit `s - j`, most significant first.
    pub fn route(&self, n: usize) -> usize {
        (1..=self.stages).fold(0, |node, j| 2 * node + ((n >> (self.stages - j)) & 1))
    }

    /// Walks the tree with a single uniform draw: at each SMI the photon takes
    /// the upper port iff the draw falls inside that port's cumulative weight.
    pub fn descend(&self, port_weights: &[f64], u: f64) -> usize {
        let total: f64 = port_weights.iter().sum();
        let target = u * total;
        let (mut lo, mut hi) = (0usize, self.ports());
        let mut before = 0.0;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let upper: f64 = port_weights[lo..mid].iter().sum();
            let lower: f64 = port_weights[mid..hi].iter().sum();
            if (target < before + upper && upper > 0.0) || lower <= 0.0 {
                hi = mid;
            } else {
                before += upper;
                lo = mid;
            }
        }
        lo
    }

    /// Coherent sort: the amplitude of mode `n` travels to port `route(n)`.
    pub fn sort(&self, state: &PureState) -> Result<SorterOutput> {
        if state.dim() != self.ports() {
            return Err(Error::DimensionMismatch { expected: self.ports(), actual: state.dim() });
        }
        let mut paths = vec![
            SorterPath { amplitude: Complex64::new(0.0, 0.0), mode: ModeLabel::hg(0, 0) };
            self.ports()
        ];
        for (n, &amplitude) in state.amplitudes().iter().enumerate() {
            paths[self.route(n)] = SorterPath { amplitude, mode: state.physical_mode(n) };
        }
        Ok(SorterOutput { paths })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorterPath {
    pub amplitude: Complex64,
    pub mode: ModeLabel,
}

/// Photon amplitude on each sorter output port together with its spatial mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SorterOutput {
    pub paths: Vec<SorterPath>,
}

/// MODAN on every port: each path is converted to the fundamental mode, so
/// only the path amplitudes survive.
pub fn modan_erase(sorted: &SorterOutput) -> Vec<Complex64> {
    sorted.paths.iter().map(|p| p.amplitude).collect()
}

/// Detector probabilities at the output of the Fourier chain, given the
/// path amplitudes after the MODANs.
///
/// Per path `n`: Gouy compensation `e^{+i (2n+|l|+1) psi}`, detuning
/// `e^{i n eps}`, basis phase plate `e^{-i theta_n}`; then the inverse DFT.
pub fn fourier_chain_probabilities(
    path_amplitudes: &[Complex64],
    cfg: &DeviceConfig,
    oam_sector: i32,
    path_phases: &[f64],
) -> Vec<f64> {
    let d = path_amplitudes.len();
    let psi = cfg.compensation_psi();
    let l = oam_sector.unsigned_abs() as f64;
    let shifted: Vec<Complex64> = path_amplitudes
        .iter()
        .enumerate()
        .map(|(n, &a)| {
            let nf = n as f64;
            let phase = (2.0 * nf + l + 1.0) * psi + nf * cfg.detuning_epsilon - path_phases[n];
            a * Complex64::from_polar(1.0, phase)
        })
        .collect();
    let scale = 1.0 / (d as f64).sqrt();
    let twiddle: Vec<Complex64> =
        (0..d).map(|j| Complex64::from_polar(scale, -2.0 * PI * j as f64 / d as f64)).collect();
    (0..d)
        .map(|k| {
            shifted
                .iter()
                .enumerate()
                .map(|(n, a)| a * twiddle[(k * n) % d])
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect()
}

fn check_bench(state: &PureState, cfg: &DeviceConfig) -> Result<SorterTree> {
    if state.frame() != Frame::HgSide {
        return Err(Error::WrongFrame { expected: Frame::HgSide, actual: state.frame() });
    }
    if state.dim() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, actual: state.dim() });
    }
    SorterTree::new(cfg.d)
}

/// Outcome probabilities of [`measure_b1`].
pub fn b1_probabilities(state: &PureState, cfg: &DeviceConfig) -> Result<Vec<f64>> {
    let tree = check_bench(state, cfg)?;
    let sorted = tree.sort(state)?;
    Ok(sorted.paths.iter().map(|p| p.amplitude.norm_sqr()).collect())
}

/// B1 measurement: sorter tree followed by one detector per port.
pub fn measure_b1<R: Rng + ?Sized>(state: &PureState, cfg: &DeviceConfig, rng: &mut R) -> Result<usize> {
    let tree = check_bench(state, cfg)?;
    let weights = b1_probabilities(state, cfg)?;
    Ok(tree.descend(&weights, rng.random::<f64>()))
}

/// Outcome probabilities of a Fourier-type measurement with per-path phase plates.
pub fn fourier_probabilities(
    state: &PureState,
    cfg: &DeviceConfig,
    path_phases: &[f64],
) -> Result<Vec<f64>> {
    let tree = check_bench(state, cfg)?;
    if path_phases.len() != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, actual: path_phases.len() });
    }
    let paths = modan_erase(&tree.sort(state)?);
    Ok(fourier_chain_probabilities(&paths, cfg, state.oam_sector(), path_phases))
}

/// Outcome probabilities of [`measure_b2`].
pub fn b2_probabilities(state: &PureState, cfg: &DeviceConfig) -> Result<Vec<f64>> {
    fourier_probabilities(state, cfg, &vec![0.0; cfg.d])
}

/// B2 measurement: coherent sort, MODAN erasure, phase shifters, inverse DFT, detection.
pub fn measure_b2<R: Rng + ?Sized>(state: &PureState, cfg: &DeviceConfig, rng: &mut R) -> Result<usize> {
    let probs = b2_probabilities(state, cfg)?;
    Ok(sample_index(&probs, rng.random::<f64>()))
}

/// Measures in any basis of a [`crate::qstate::MubFamily`] with the matching bench.
pub fn measure_in<R: Rng + ?Sized>(
    state: &PureState,
    basis: &Basis,
    cfg: &DeviceConfig,
    rng: &mut R,
) -> Result<usize> {
    match basis.kind() {
        BasisKind::Computational => measure_b1(state, cfg, rng),
        BasisKind::PhasedFourier { path_phases } => {
            let probs = fourier_probabilities(state, cfg, path_phases)?;
            Ok(sample_index(&probs, rng.random::<f64>()))
        }
    }
}

fn check_symbol(d: usize, k: usize, cfg: &DeviceConfig) -> Result<()> {
    if d != cfg.d {
        return Err(Error::DimensionMismatch { expected: cfg.d, actual: d });
    }
    SorterTree::new(d)?;
    if k >= d {
        return Err(Error::IndexOutOfRange { index: k, dim: d });
    }
    Ok(())
}

/// Photon gun in `HG(0,0)` followed by a MODAN that reshapes it into `HG(k,k)`.
pub fn prepare_b1(d: usize, k: usize, cfg: &DeviceConfig) -> Result<PureState> {
    check_symbol(d, k, cfg)?;
    let amps = (0..d).map(|n| Complex64::new(if n == k { 1.0 } else { 0.0 }, 0.0)).collect();
    PureState::new(amps, 0, Frame::HgSide)
}

/// Fourier chain run backwards from detector port `k`: forward DFT across
/// paths, conjugate phase plates, reverse MODANs and a recombining sorter.
/// Alice's bench carries no Gouy compensators.
pub fn prepare_fourier(d: usize, k: usize, path_phases: &[f64], cfg: &DeviceConfig) -> Result<PureState> {
    check_symbol(d, k, cfg)?;
    if path_phases.len() != d {
        return Err(Error::DimensionMismatch { expected: d, actual: path_phases.len() });
    }
    let scale = 1.0 / (d as f64).sqrt();
    // adjoint of the inverse DFT applied to e_k is column k of the DFT
    let paths: Vec<Complex64> = (0..d)
        .map(|n| Complex64::from_polar(scale, 2.0 * PI * ((k * n) % d) as f64 / d as f64 + path_phases[n]))
        .collect();
    let tree = SorterTree::new(d)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); d];
    for (n, a) in amps.iter_mut().enumerate() {
        *a = paths[tree.route(n)];
    }
    PureState::normalized(amps, 0, Frame::HgSide)
}

pub fn prepare_b2(d: usize, k: usize, cfg: &DeviceConfig) -> Result<PureState> {
    prepare_fourier(d, k, &vec![0.0; d], cfg)
}

/// Prepares vector `k` of `basis` on the matching bench.
pub fn prepare_in(basis: &Basis, k: usize, cfg: &DeviceConfig) -> Result<PureState> {
    match basis.kind() {
        BasisKind::Computational => prepare_b1(basis.dim(), k, cfg),
        BasisKind::PhasedFourier { path_phases } => prepare_fourier(basis.dim(), k, path_phases, cfg),
    }
}
