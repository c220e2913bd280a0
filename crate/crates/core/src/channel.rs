//! Everything that happens to a photon between Alice's and Bob's converters.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::modecalc::{gouy_angle, BeamGeometry};
use crate::qstate::{born_measure, Frame, MubFamily, PureState};

/// Rotation of the receiver frame about the propagation axis: a global phase
/// `e^{i l phi0}`. Sector-0 states come back untouched.
pub fn apply_rotation(state: &PureState, angle: f64) -> Result<PureState> {
    if state.frame() != Frame::LgSide {
        return Err(Error::WrongFrame { expected: Frame::LgSide, actual: state.frame() });
    }
    let l = state.oam_sector();
    if l == 0 {
        return Ok(state.clone());
    }
    Ok(state.clone().with_global_phase(l as f64 * angle))
}

/// Frames rotating at `angular_velocity`; `t` is the photon's emission time.
pub fn apply_time_varying_rotation(state: &PureState, angular_velocity: f64, t: f64) -> Result<PureState> {
    apply_rotation(state, angular_velocity * t)
}

/// Rotational frequency shift of a sector-`l` photon, `e^{i l Omega t}`.
/// Its effect on Bob's interferometers is carried by `DeviceConfig::detuning_epsilon`.
pub fn apply_frequency_shift(state: &PureState, angular_velocity: f64, t: f64) -> PureState {
    let l = state.oam_sector();
    if l == 0 {
        return state.clone();
    }
    state.clone().with_global_phase(l as f64 * angular_velocity * t)
}

/// Gouy phase of a link of length `z`: logical component `n` travels as a mode
/// of order `2n + |l|` and picks up `e^{-i (order + 1) psi(z)}`.
pub fn apply_gouy(state: &PureState, z: f64, geom: &BeamGeometry) -> PureState {
    apply_gouy_phase(state, gouy_angle(geom, z))
}

/// [`apply_gouy`] for a given accumulated Gouy angle `psi`.
pub fn apply_gouy_phase(state: &PureState, psi: f64) -> PureState {
    let l = state.oam_sector().unsigned_abs() as f64;
    state.clone().with_component_phases(|n| -(2.0 * n as f64 + l + 1.0) * psi)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Photon {
    Delivered(PureState),
    Lost,
}

/// Absorbs the photon with probability `p`, one draw.
pub fn apply_loss<R: Rng + ?Sized>(state: PureState, p: f64, rng: &mut R) -> Photon {
    if rng.random::<f64>() < p {
        Photon::Lost
    } else {
        Photon::Delivered(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveMode {
    RandomBasis,
    FixedBasis(usize),
}

impl fmt::Display for EveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EveMode::RandomBasis => write!(f, "random"),
            EveMode::FixedBasis(i) => write!(f, "fixed:{i}"),
        }
    }
}

impl FromStr for EveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim();
        if s == "random" {
            return Ok(EveMode::RandomBasis);
        }
        if let Some(idx) = s.strip_prefix("fixed:") {
            return idx
                .trim()
                .parse()
                .map(EveMode::FixedBasis)
                .map_err(|e| format!("bad eve basis index {idx:?}: {e}"));
        }
        Err(format!("unknown eve strategy {s:?} (expected random or fixed:IDX)"))
    }
}

/// Intercept-resend eavesdropper over a family of bases.
#[derive(Debug, Clone)]
pub struct EveStrategy {
    pub mode: EveMode,
    pub mub: Arc<MubFamily>,
}

impl EveStrategy {
    pub fn new(mode: EveMode, mub: Arc<MubFamily>) -> Result<Self> {
        if let EveMode::FixedBasis(i) = mode {
            if i >= mub.len() {
                return Err(Error::IndexOutOfRange { index: i, dim: mub.len() });
            }
        }
        Ok(Self { mode, mub })
    }
}

/// Eve's basis choice and measurement result for one photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveRecord {
    pub basis: usize,
    pub outcome: usize,
}

/// Measures in Eve's basis and forwards the corresponding basis vector,
/// keeping the photon's frame and OAM sector.
pub fn eve_attack<R: Rng + ?Sized>(
    state: &PureState,
    strategy: &EveStrategy,
    rng: &mut R,
) -> Result<(PureState, EveRecord)> {
    if state.dim() != strategy.mub.dim() {
        return Err(Error::DimensionMismatch { expected: strategy.mub.dim(), actual: state.dim() });
    }
    let basis = match strategy.mode {
        EveMode::RandomBasis => rng.random_range(0..strategy.mub.len()),
        EveMode::FixedBasis(i) => i,
    };
    let outcome = born_measure(state, strategy.mub.basis(basis)?, rng)?;
    let resent = strategy
        .mub
        .state(basis, outcome)?
        .with_sector(state.oam_sector())
        .with_frame(state.frame());
    Ok((resent, EveRecord { basis, outcome }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelElement {
    Rotation { angle: f64 },
    /// A fresh uniform angle in `[0, 2 pi)` for every photon.
    RandomRotation,
    TimeVaryingRotation { angular_velocity: f64 },
    Gouy { z: f64 },
    Loss { probability: f64 },
    Eve(EveMode),
    FrequencyShift { angular_velocity: f64 },
}

impl ChannelElement {
    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::ConfigInvalid(format!("{name} must be finite, got {v}")))
            }
        };
        match *self {
            ChannelElement::Rotation { angle } => finite("rotation angle", angle),
            ChannelElement::RandomRotation | ChannelElement::Eve(_) => Ok(()),
            ChannelElement::TimeVaryingRotation { angular_velocity }
            | ChannelElement::FrequencyShift { angular_velocity } => finite("angular velocity", angular_velocity),
            ChannelElement::Gouy { z } => finite("gouy distance", z),
            ChannelElement::Loss { probability } => {
                if (0.0..=1.0).contains(&probability) {
                    Ok(())
                } else {
                    Err(Error::ConfigInvalid(format!("loss probability must lie in [0, 1], got {probability}")))
                }
            }
        }
    }
}

impl fmt::Display for ChannelElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelElement::Rotation { angle } => write!(f, "rotation: {angle}"),
            ChannelElement::RandomRotation => write!(f, "random_rotation"),
            ChannelElement::TimeVaryingRotation { angular_velocity } => write!(f, "time_rotation: {angular_velocity}"),
            ChannelElement::Gouy { z } => write!(f, "gouy: {z}"),
            ChannelElement::Loss { probability } => write!(f, "loss: {probability}"),
            ChannelElement::Eve(mode) => write!(f, "eve: {mode}"),
            ChannelElement::FrequencyShift { angular_velocity } => write!(f, "frequency_shift: {angular_velocity}"),
        }
    }
}

impl FromStr for ChannelElement {
    type Err = String;

    /// Element syntax is `kind` or `kind: value`, e.g. `rotation: 0.7`, `eve: fixed:1`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (kind, value) = match s.split_once(':') {
            Some((k, v)) => (k.trim(), Some(v.trim())),
            None => (s.trim(), None),
        };
        let number = |what: &str| -> std::result::Result<f64, String> {
            let v = value.ok_or_else(|| format!("channel element {kind:?} needs a value ({what})"))?;
            v.parse::<f64>().map_err(|e| format!("bad {what} {v:?} for {kind:?}: {e}"))
        };
        let element = match kind {
            "rotation" => ChannelElement::Rotation { angle: number("angle in radians")? },
            "random_rotation" => ChannelElement::RandomRotation,
            "time_rotation" | "time_varying_rotation" => {
                ChannelElement::TimeVaryingRotation { angular_velocity: number("angular velocity in rad/s")? }
            }
            "gouy" => ChannelElement::Gouy { z: number("distance")? },
            "loss" => ChannelElement::Loss { probability: number("probability")? },
            "eve" => ChannelElement::Eve(value.unwrap_or("random").parse()?),
            "frequency_shift" => {
                ChannelElement::FrequencyShift { angular_velocity: number("angular velocity in rad/s")? }
            }
            other => return Err(format!("unknown channel element {other:?}")),
        };
        if value.is_some() && matches!(element, ChannelElement::RandomRotation) {
            return Err("random_rotation takes no value".into());
        }
        element.validate().map_err(|e| e.to_string())?;
        Ok(element)
    }
}

impl Serialize for ChannelElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChannelElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered list of channel elements, applied to each photon in turn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelSpec {
    pub elements: Vec<ChannelElement>,
}

impl ChannelSpec {
    pub fn new(elements: Vec<ChannelElement>) -> Self {
        Self { elements }
    }

    pub fn validate(&self) -> Result<()> {
        self.elements.iter().try_for_each(ChannelElement::validate)
    }

    pub fn has_eve(&self) -> bool {
        self.elements.iter().any(|e| matches!(e, ChannelElement::Eve(_)))
    }

    /// Sum of the Gouy angles of every `Gouy` element.
    pub fn total_gouy_angle(&self, geom: &BeamGeometry) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                ChannelElement::Gouy { z } => gouy_angle(geom, *z),
                _ => 0.0,
            })
            .sum()
    }
}

/// Outcome of one photon's trip through the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Transit {
    pub photon: Photon,
    pub eve: Option<EveRecord>,
}

/// A [`ChannelSpec`] bound to the link's beam geometry and the session's bases.
#[derive(Debug, Clone)]
pub struct Channel {
    spec: ChannelSpec,
    geom: BeamGeometry,
    mub: Arc<MubFamily>,
}

impl Channel {
    pub fn new(spec: ChannelSpec, geom: BeamGeometry, mub: Arc<MubFamily>) -> Result<Self> {
        spec.validate()?;
        geom.validate()?;
        for e in &spec.elements {
            if let ChannelElement::Eve(mode) = e {
                EveStrategy::new(*mode, mub.clone())?;
            }
        }
        Ok(Self { spec, geom, mub })
    }

    pub fn spec(&self) -> &ChannelSpec {
        &self.spec
    }

    /// Sends an LG-side photon emitted at time `t` through every element.
    /// Elements after a loss are skipped.
    pub fn transmit<R: Rng + ?Sized>(&self, state: PureState, t: f64, rng: &mut R) -> Result<Transit> {
        let mut state = state;
        let mut eve = None;
        for element in &self.spec.elements {
            state = match *element {
                ChannelElement::Rotation { angle } => apply_rotation(&state, angle)?,
                ChannelElement::RandomRotation => apply_rotation(&state, rng.random::<f64>() * 2.0 * PI)?,
                ChannelElement::TimeVaryingRotation { angular_velocity } => {
                    apply_time_varying_rotation(&state, angular_velocity, t)?
                }
                ChannelElement::Gouy { z } => apply_gouy(&state, z, &self.geom),
                ChannelElement::Loss { probability } => match apply_loss(state, probability, rng) {
                    Photon::Delivered(s) => s,
                    Photon::Lost => return Ok(Transit { photon: Photon::Lost, eve }),
                },
                ChannelElement::Eve(mode) => {
                    let strategy = EveStrategy { mode, mub: self.mub.clone() };
                    let (resent, record) = eve_attack(&state, &strategy, rng)?;
                    eve = Some(record);
                    resent
                }
                ChannelElement::FrequencyShift { angular_velocity } => {
                    apply_frequency_shift(&state, angular_velocity, t)
                }
            };
        }
        Ok(Transit { photon: Photon::Delivered(state), eve })
    }
}
