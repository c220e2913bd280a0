//! Paraxial Hermite-Gauss and Laguerre-Gauss mode functions.
//!
//! Both families carry the Gouy term inside the exponent with the sign
//! `exp(-i (n+m+1) psi(z))`; every phase compensator in the crate uses the
//! same convention. The grid quadrature here is what ties the abstract
//! logical states in [`crate::qstate`] to physical beams: it checks
//! orthonormality and rotation behaviour of the closed-form fields.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on the quadrature self-overlap of a mode.
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeFamily {
    #[serde(rename = "HG")]
    HermiteGauss,
    #[serde(rename = "LG")]
    LaguerreGauss,
}

impl fmt::Display for ModeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeFamily::HermiteGauss => write!(f, "HG"),
            ModeFamily::LaguerreGauss => write!(f, "LG"),
        }
    }
}

/// A spatial mode `u_{nm}` of either family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub family: ModeFamily,
    pub n: u32,
    pub m: u32,
}

impl ModeLabel {
    pub fn hg(n: u32, m: u32) -> Self {
        Self { family: ModeFamily::HermiteGauss, n, m }
    }

    pub fn lg(n: u32, m: u32) -> Self {
        Self { family: ModeFamily::LaguerreGauss, n, m }
    }

    /// Mode order `N = n + m`; modes of equal order share a Gouy phase.
    pub fn order(&self) -> u32 {
        self.n + self.m
    }

    /// Signed OAM `n - m` as it appears in the azimuthal factor `e^{-i(n-m)phi}`.
    pub fn signed_oam(&self) -> i64 {
        self.n as i64 - self.m as i64
    }

    pub fn oam_magnitude(&self) -> u32 {
        self.n.abs_diff(self.m)
    }

    /// All labels of `family` with order `N <= max_order`, sorted by order then `n`.
    pub fn all_up_to_order(family: ModeFamily, max_order: u32) -> Vec<ModeLabel> {
        (0..=max_order)
            .flat_map(|order| (0..=order).map(move |n| ModeLabel { family, n, m: order - n }))
            .collect()
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{})", self.family, self.n, self.m)
    }
}

impl FromStr for ModeLabel {
    type Err = String;

    /// Parses `FAMILY,N,M`, e.g. `LG,2,2`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("expected FAMILY,N,M, got {s:?}"));
        }
        let family = match parts[0].to_ascii_uppercase().as_str() {
            "HG" => ModeFamily::HermiteGauss,
            "LG" => ModeFamily::LaguerreGauss,
            other => return Err(format!("unknown mode family {other:?} (expected HG or LG)")),
        };
        let n = parts[1].parse::<u32>().map_err(|e| format!("bad index n {:?}: {e}", parts[1]))?;
        let m = parts[2].parse::<u32>().map_err(|e| format!("bad index m {:?}: {e}", parts[2]))?;
        Ok(ModeLabel { family, n, m })
    }
}

/// Wavenumber and Rayleigh range of a paraxial beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    pub wavenumber: f64,
    pub rayleigh_range: f64,
}

impl BeamGeometry {
    pub fn new(wavenumber: f64, rayleigh_range: f64) -> Result<Self> {
        let geom = Self { wavenumber, rayleigh_range };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavenumber.is_finite() && self.wavenumber > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "wavenumber must be positive and finite, got {}",
                self.wavenumber
            )));
        }
        if !(self.rayleigh_range.is_finite() && self.rayleigh_range > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "rayleigh_range must be positive and finite, got {}",
                self.rayleigh_range
            )));
        }
        Ok(())
    }

    /// Beam radius at the waist.
    pub fn waist(&self) -> f64 {
        (2.0 * self.rayleigh_range / self.wavenumber).sqrt()
    }
}

/// Beam radius, wavefront curvature and Gouy angle at a plane `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub w: f64,
    /// `1/R(z)`; zero at the waist where the wavefront is flat.
    pub inv_radius: f64,
    pub psi: f64,
}

impl BeamParams {
    /// `R(z)`, infinite at the waist.
    pub fn radius(&self) -> f64 {
        if self.inv_radius == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.inv_radius
        }
    }
}

pub fn beam_params(geom: &BeamGeometry, z: f64) -> BeamParams {
    let zr = geom.rayleigh_range;
    let s = zr * zr + z * z;
    BeamParams {
        w: (2.0 * s / (geom.wavenumber * zr)).sqrt(),
        inv_radius: z / s,
        psi: (z / zr).atan(),
    }
}

/// Gouy angle `psi(z) = arctan(z / z_R)`.
pub fn gouy_angle(geom: &BeamGeometry, z: f64) -> f64 {
    (z / geom.rayleigh_range).atan()
}

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite_poly(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Generalized Laguerre polynomial `L_p^alpha(x)`.
pub fn laguerre_poly(p: u32, alpha: u32, x: f64) -> f64 {
    let a = alpha as f64;
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..p {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn normalization(label: &ModeLabel) -> f64 {
    let base = (2.0 / (PI * factorial(label.n) * factorial(label.m))).sqrt();
    match label.family {
        ModeFamily::HermiteGauss => base * 2f64.powf(-(label.order() as f64) / 2.0),
        ModeFamily::LaguerreGauss => base * factorial(label.n.min(label.m)),
    }
}

/// Field `u_{nm}(x, y, z)` including normalization and the Gouy term.
pub fn eval_mode(label: &ModeLabel, geom: &BeamGeometry, x: f64, y: f64, z: f64) -> Complex64 {
    let bp = beam_params(geom, z);
    let ctx = ModeContext::new(label, geom, &bp);
    ctx.eval(x, y)
}

/// Per-plane constants of one mode, so grid sweeps skip the recomputation.
struct ModeContext {
    label: ModeLabel,
    amplitude: f64,
    w: f64,
    curvature: f64,
    gouy: f64,
}

impl ModeContext {
    fn new(label: &ModeLabel, geom: &BeamGeometry, bp: &BeamParams) -> Self {
        Self {
            label: *label,
            amplitude: normalization(label) / bp.w,
            w: bp.w,
            curvature: geom.wavenumber * bp.inv_radius / 2.0,
            gouy: (label.order() + 1) as f64 * bp.psi,
        }
    }

    fn eval(&self, x: f64, y: f64) -> Complex64 {
        let r2 = x * x + y * y;
        let w2 = self.w * self.w;
        let phase = -(self.curvature * r2 + self.gouy);
        let envelope = (-r2 / w2).exp();
        match self.label.family {
            ModeFamily::HermiteGauss => {
                let s = std::f64::consts::SQRT_2 / self.w;
                let real = self.amplitude
                    * envelope
                    * hermite_poly(self.label.n, x * s)
                    * hermite_poly(self.label.m, y * s);
                Complex64::from_polar(real, phase)
            }
            ModeFamily::LaguerreGauss => {
                let p = self.label.n.min(self.label.m);
                let l = self.label.oam_magnitude();
                let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                let rho = r2.sqrt() * std::f64::consts::SQRT_2 / self.w;
                let real = self.amplitude
                    * envelope
                    * sign
                    * rho.powi(l as i32)
                    * laguerre_poly(p, l, 2.0 * r2 / w2);
                let azimuth = if l == 0 { 0.0 } else { y.atan2(x) };
                Complex64::from_polar(real, phase - self.label.signed_oam() as f64 * azimuth)
            }
        }
    }
}

/// Uniform Cartesian sampling of `[-half_width, half_width]^2` at cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub half_width: f64,
    pub samples_per_axis: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, samples_per_axis: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "grid half_width must be positive, got {half_width}"
            )));
        }
        if samples_per_axis < 2 {
            return Err(Error::InvalidGeometry(format!(
                "grid needs at least 2 samples per axis, got {samples_per_axis}"
            )));
        }
        Ok(Self { half_width, samples_per_axis })
    }

    /// Reference grid: `6 w(z)` half width, 512 samples per axis.
    pub fn reference(geom: &BeamGeometry, z: f64) -> Self {
        Self { half_width: 6.0 * beam_params(geom, z).w, samples_per_axis: 512 }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.samples_per_axis as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }
}

/// Midpoint-rule Gram matrix `G[a][b] = ∫∫ conj(u_a) u_b dx dy` over `labels`.
///
/// The `rotation` angle rotates every mode rigidly about the beam axis before
/// it enters the conjugated slot, i.e. row modes are sampled at
/// `R(-rotation)(x, y)`. Rows of the grid are summed in parallel and
/// reduced in a fixed order, so the result is bitwise reproducible.
pub fn gram_matrix(
    labels: &[ModeLabel],
    geom: &BeamGeometry,
    z: f64,
    grid: &SpatialGrid,
    rotation: f64,
) -> Vec<Vec<Complex64>> {
    let bp = beam_params(geom, z);
    let ctxs: Vec<ModeContext> = labels.iter().map(|l| ModeContext::new(l, geom, &bp)).collect();
    let k = labels.len();
    let n = grid.samples_per_axis;
    let (sin_r, cos_r) = rotation.sin_cos();
    let rotated = rotation != 0.0;

    let partials: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let y = grid.coord(j);
            let mut fields = vec![Complex64::new(0.0, 0.0); k * n];
            let mut bra = if rotated { vec![Complex64::new(0.0, 0.0); k * n] } else { Vec::new() };
            for i in 0..n {
                let x = grid.coord(i);
                let (xr, yr) = (cos_r * x + sin_r * y, -sin_r * x + cos_r * y);
                for (a, ctx) in ctxs.iter().enumerate() {
                    fields[a * n + i] = ctx.eval(x, y);
                    if rotated {
                        bra[a * n + i] = ctx.eval(xr, yr);
                    }
                }
            }
            let bra = if rotated { &bra } else { &fields };
            let mut acc = vec![Complex64::new(0.0, 0.0); k * k];
            for a in 0..k {
                let ra = &bra[a * n..(a + 1) * n];
                for b in 0..k {
                    let rb = &fields[b * n..(b + 1) * n];
                    acc[a * k + b] = ra.iter().zip(rb).map(|(u, v)| u.conj() * v).sum();
                }
            }
            acc
        })
        .collect();

    let area = grid.cell_area();
    let mut total = vec![Complex64::new(0.0, 0.0); k * k];
    for row in &partials {
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    (0..k)
        .map(|a| (0..k).map(|b| total[a * k + b] * area).collect())
        .collect()
}

/// Quadrature overlap `∫∫ conj(a) b dx dy` with the default self-overlap tolerance.
pub fn overlap(
    a: &ModeLabel,
    b: &ModeLabel,
    geom: &BeamGeometry,
    z: f64,
    grid: &SpatialGrid,
) -> Result<Complex64> {
    overlap_with(a, b, geom, z, grid, 0.0, DEFAULT_NORM_TOLERANCE)
}

/// Overlap of `a` rotated by `rotation` about the beam axis with unrotated `b`.
pub fn overlap_rotated(
    a: &ModeLabel,
    b: &ModeLabel,
    geom: &BeamGeometry,
    z: f64,
    grid: &SpatialGrid,
    rotation: f64,
) -> Result<Complex64> {
    overlap_with(a, b, geom, z, grid, rotation, DEFAULT_NORM_TOLERANCE)
}

pub fn overlap_with(
    a: &ModeLabel,
    b: &ModeLabel,
    geom: &BeamGeometry,
    z: f64,
    grid: &SpatialGrid,
    rotation: f64,
    tolerance: f64,
) -> Result<Complex64> {
    let g = gram_matrix(&[*a, *b], geom, z, grid, 0.0);
    for (idx, label) in [a, b].into_iter().enumerate() {
        let self_overlap = g[idx][idx].re;
        if (self_overlap - 1.0).abs() > tolerance {
            return Err(Error::GridTooCoarse { mode: label.to_string(), self_overlap, tolerance });
        }
    }
    if rotation == 0.0 {
        Ok(g[0][1])
    } else {
        Ok(gram_matrix(&[*a, *b], geom, z, grid, rotation)[0][1])
    }
}

/// Field samples `(x, y, u)` over the grid, row-major in `y` then `x`.
pub fn sample_mode(
    label: &ModeLabel,
    geom: &BeamGeometry,
    z: f64,
    grid: &SpatialGrid,
) -> Vec<(f64, f64, Complex64)> {
    let bp = beam_params(geom, z);
    let ctx = ModeContext::new(label, geom, &bp);
    let n = grid.samples_per_axis;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let y = grid.coord(j);
        for i in 0..n {
            let x = grid.coord(i);
            out.push((x, y, ctx.eval(x, y)));
        }
    }
    out
}
