//! Logical d-dimensional state algebra.
//!
//! Logical index `n` stands for the physical mode `HG(n,n)` on Alice's and
//! Bob's benches and for `LG(n+l, n)` in flight, where `l` is the OAM sector
//! of the encoding. States are only ever compared through `|<a|b>|`, so a
//! global phase is never observable.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modecalc::ModeLabel;

/// Squared-norm tolerance accepted by [`PureState::new`].
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Which side of the HG/LG modal converter a photon is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    HgSide,
    LgSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
    oam_sector: i32,
    frame: Frame,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>, oam_sector: i32, frame: Frame) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::UnsupportedDimension { dim: 0, what: "pure state" });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self { amplitudes, oam_sector, frame })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>, oam_sector: i32, frame: Frame) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NotNormalized { norm_sqr: norm * norm });
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(amplitudes, oam_sector, frame)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn oam_sector(&self) -> i32 {
        self.oam_sector
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn with_sector(mut self, oam_sector: i32) -> Self {
        self.oam_sector = oam_sector;
        self
    }

    pub(crate) fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amplitudes, &other.amplitudes))
    }

    /// `|<self|other>|`, insensitive to global phase.
    pub fn fidelity(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Multiplies every amplitude by `e^{i theta}`.
    pub fn with_global_phase(mut self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        self.amplitudes.iter_mut().for_each(|a| *a *= phase);
        self
    }

    /// Multiplies amplitude `n` by `e^{i phase(n)}`.
    pub fn with_component_phases(mut self, phase: impl Fn(usize) -> f64) -> Self {
        for (n, a) in self.amplitudes.iter_mut().enumerate() {
            *a *= Complex64::from_polar(1.0, phase(n));
        }
        self
    }

    /// Physical spatial mode carrying logical index `n` on this state's side.
    pub fn physical_mode(&self, n: usize) -> ModeLabel {
        physical_mode(n, self.oam_sector, self.frame)
    }
}

/// Logical index to mode: `HG(n,n)` on the bench, `LG(n+l, n)` in flight.
/// Negative sectors use `LG(n, n+|l|)` so both indices stay non-negative.
pub fn physical_mode(n: usize, oam_sector: i32, frame: Frame) -> ModeLabel {
    let n = n as u32;
    match frame {
        Frame::HgSide => ModeLabel::hg(n, n),
        Frame::LgSide if oam_sector >= 0 => ModeLabel::lg(n + oam_sector as u32, n),
        Frame::LgSide => ModeLabel::lg(n, n + oam_sector.unsigned_abs()),
    }
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

fn check_index(index: usize, dim: usize) -> Result<()> {
    if index < dim {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { index, dim })
    }
}

/// How a basis is realized on the receiver bench.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind {
    /// Mode-sorted directly (`B1`).
    Computational,
    /// Fourier-type basis with vectors `e^{i theta_n} e^{i 2 pi k n / d} / sqrt(d)`;
    /// `theta` is all zeros for `B2`.
    PhasedFourier { path_phases: Vec<f64> },
}

/// An orthonormal basis of `C^d`; vector `k` is column `k` of a unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    kind: BasisKind,
    vectors: Vec<Vec<Complex64>>,
}

impl Basis {
    pub fn computational(d: usize) -> Self {
        let vectors = (0..d)
            .map(|k| (0..d).map(|n| Complex64::new(if n == k { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        Self { kind: BasisKind::Computational, vectors }
    }

    pub fn phased_fourier(path_phases: Vec<f64>) -> Self {
        let d = path_phases.len();
        let scale = 1.0 / (d as f64).sqrt();
        let vectors = (0..d)
            .map(|k| {
                path_phases
                    .iter()
                    .enumerate()
                    .map(|(n, theta)| Complex64::from_polar(scale, theta + fourier_angle(d, k, n)))
                    .collect()
            })
            .collect();
        Self { kind: BasisKind::PhasedFourier { path_phases }, vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    pub fn vector(&self, k: usize) -> &[Complex64] {
        &self.vectors[k]
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }

    /// Matrix element `U[row][col]`, i.e. component `row` of vector `col`.
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.vectors[col][row]
    }

    /// Basis vector `k` as an HG-side state in sector 0.
    pub fn state(&self, k: usize) -> Result<PureState> {
        check_index(k, self.dim())?;
        Ok(PureState { amplitudes: self.vectors[k].clone(), oam_sector: 0, frame: Frame::HgSide })
    }

    /// Born weights `|<b_j|state>|^2`.
    pub fn probabilities(&self, state: &PureState) -> Result<Vec<f64>> {
        check_dim(self.dim(), state.dim())?;
        Ok(self.vectors.iter().map(|v| inner(v, state.amplitudes()).norm_sqr()).collect())
    }

    /// Largest `|<b_i|b_j> - delta_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((inner(a, b) - target).norm());
            }
        }
        worst
    }
}

fn fourier_angle(d: usize, k: usize, n: usize) -> f64 {
    2.0 * PI * ((k * n) % d) as f64 / d as f64
}

/// The `B1` vector `|k>`: standard unit vector `e_k`.
pub fn make_b1_state(d: usize, k: usize) -> Result<PureState> {
    if d == 0 {
        return Err(Error::UnsupportedDimension { dim: 0, what: "pure state" });
    }
    Basis::computational(d).state(k)
}

/// The `B2` vector with amplitudes `e^{i 2 pi k n / d} / sqrt(d)`.
pub fn make_b2_state(d: usize, k: usize) -> Result<PureState> {
    if d == 0 {
        return Err(Error::UnsupportedDimension { dim: 0, what: "pure state" });
    }
    fourier_unitary(d).state(k)
}

/// DFT unitary; its columns are the `B2` vectors.
pub fn fourier_unitary(d: usize) -> Basis {
    Basis::phased_fourier(vec![0.0; d])
}

/// An ordered family of pairwise mutually unbiased bases.
#[derive(Debug, Clone, PartialEq)]
pub struct MubFamily {
    dim: usize,
    bases: Vec<Basis>,
}

impl MubFamily {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.bases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bases.is_empty()
    }

    pub fn basis(&self, index: usize) -> Result<&Basis> {
        self.bases.get(index).ok_or(Error::IndexOutOfRange { index, dim: self.bases.len() })
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    /// Vector `k` of basis `b` as an HG-side state.
    pub fn state(&self, b: usize, k: usize) -> Result<PureState> {
        self.basis(b)?.state(k)
    }

    /// `max | |<a_i|b_j>|^2 - 1/d |` over distinct basis pairs.
    pub fn max_unbiasedness_deviation(&self) -> f64 {
        let target = 1.0 / self.dim as f64;
        let mut worst = 0.0f64;
        for (ia, a) in self.bases.iter().enumerate() {
            for b in &self.bases[ia + 1..] {
                for u in a.vectors() {
                    for v in b.vectors() {
                        worst = worst.max((inner(u, v).norm_sqr() - target).abs());
                    }
                }
            }
        }
        worst
    }
}

pub fn is_prime(d: usize) -> bool {
    d >= 2 && (2..).take_while(|p| p * p <= d).all(|p| d % p != 0)
}

/// `B1`, `B2` and, for prime `d`, up to `d - 1` further quadratic-phase bases.
///
/// For odd prime `d`, basis `b` has vectors `w^{b n^2 + k n} / sqrt(d)` with
/// `w = e^{i 2 pi / d}` (`b = 0` is `B2`). For `d = 2` the third basis uses
/// the phase `pi n^2 / 2`, i.e. the circular basis `(1, ±i)/sqrt(2)`.
pub fn build_mub_family(d: usize, count: usize) -> Result<MubFamily> {
    if d == 0 {
        return Err(Error::UnsupportedDimension { dim: 0, what: "MUB family" });
    }
    if count < 2 || count > d + 1 {
        return Err(Error::InvalidBasisCount { dim: d, requested: count });
    }
    if count > 2 && !is_prime(d) {
        return Err(Error::UnsupportedDimension { dim: d, what: "more than two MUBs (prime d only)" });
    }
    let mut bases = vec![Basis::computational(d), fourier_unitary(d)];
    for b in 1..count - 1 {
        let phases = (0..d)
            .map(|n| {
                if d == 2 {
                    PI * (b * n * n) as f64 / 2.0
                } else {
                    2.0 * PI * ((b * n * n) % d) as f64 / d as f64
                }
            })
            .collect();
        bases.push(Basis::phased_fourier(phases));
    }
    Ok(MubFamily { dim: d, bases })
}

/// Index chosen by cumulative inversion of `weights` at the uniform draw `u`.
pub fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return j;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Projective measurement of `state` in `basis`, consuming one uniform draw.
pub fn born_measure<R: Rng + ?Sized>(state: &PureState, basis: &Basis, rng: &mut R) -> Result<usize> {
    let probs = basis.probabilities(state)?;
    Ok(sample_index(&probs, rng.random::<f64>()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn b1_unit_vectors() {
        let s = make_b1_state(4, 0).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let s = make_b1_state(4, 3).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0, 0.0));
        assert_eq!(s.frame(), Frame::HgSide);
        assert!(matches!(make_b1_state(4, 4), Err(Error::IndexOutOfRange { index: 4, dim: 4 })));
    }

    #[test]
    fn b2_at_d2() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s0 = make_b2_state(2, 0).unwrap();
        let s1 = make_b2_state(2, 1).unwrap();
        for (a, b) in s0.amplitudes().iter().zip([c(h, 0.0), c(h, 0.0)]) {
            assert!((a - b).norm() < 1e-15);
        }
        for (a, b) in s1.amplitudes().iter().zip([c(h, 0.0), c(-h, 0.0)]) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!(make_b2_state(2, 2).is_err());
    }

    #[test]
    fn b1_b2_unbiased() {
        for d in [2usize, 4, 8] {
            for i in 0..d {
                for j in 0..d {
                    let p = make_b1_state(d, i).unwrap().inner(&make_b2_state(d, j).unwrap()).unwrap();
                    assert!((p.norm_sqr() - 1.0 / d as f64).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn fourier_small_cases() {
        let u1 = fourier_unitary(1);
        assert!((u1.entry(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        let u2 = fourier_unitary(2);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let want = [[h, h], [h, -h]];
        for r in 0..2 {
            for col in 0..2 {
                assert!((u2.entry(r, col) - c(want[r][col], 0.0)).norm() < 1e-15);
            }
        }
        for d in 1..=16 {
            assert!(fourier_unitary(d).orthonormality_error() < 1e-12);
        }
    }

    #[test]
    fn fourier_of_e0_is_uniform() {
        for d in 1..=8 {
            let u = fourier_unitary(d);
            // U e_0 is column 0 of U
            let amp = 1.0 / (d as f64).sqrt();
            for n in 0..d {
                assert!((u.entry(n, 0) - c(amp, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn mub_families() {
        let f = build_mub_family(4, 2).unwrap();
        assert_eq!(f.len(), 2);
        assert!(f.max_unbiasedness_deviation() < 1e-10);

        let f = build_mub_family(5, 6).unwrap();
        assert_eq!(f.len(), 6);
        assert!(f.max_unbiasedness_deviation() < 1e-10);
        for b in f.bases() {
            assert!(b.orthonormality_error() < 1e-12);
        }

        let f = build_mub_family(2, 3).unwrap();
        assert!(f.max_unbiasedness_deviation() < 1e-10);

        assert!(matches!(build_mub_family(4, 5), Err(Error::UnsupportedDimension { .. })));
        assert!(matches!(build_mub_family(3, 5), Err(Error::InvalidBasisCount { .. })));
        assert!(matches!(build_mub_family(3, 1), Err(Error::InvalidBasisCount { .. })));
    }

    #[test]
    fn primes() {
        let ps: Vec<usize> = (0..30).filter(|&d| is_prime(d)).collect();
        assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn born_eigenstates_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b1 = Basis::computational(4);
        let b2 = fourier_unitary(4);
        for k in 0..4 {
            for _ in 0..100 {
                assert_eq!(born_measure(&make_b1_state(4, k).unwrap(), &b1, &mut rng).unwrap(), k);
                assert_eq!(born_measure(&make_b2_state(4, k).unwrap(), &b2, &mut rng).unwrap(), k);
            }
        }
    }

    #[test]
    fn born_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = born_measure(&make_b1_state(2, 0).unwrap(), &Basis::computational(4), &mut rng);
        assert!(matches!(err, Err(Error::DimensionMismatch { expected: 4, actual: 2 })));
    }

    #[test]
    fn born_matches_weights_within_5_sigma() {
        let trials = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let state = PureState::normalized(
            vec![c(0.3, 0.1), c(-0.5, 0.2), c(0.1, 0.7), c(0.05, -0.2)],
            0,
            Frame::HgSide,
        )
        .unwrap();
        for basis in [Basis::computational(4), fourier_unitary(4)] {
            let probs = basis.probabilities(&state).unwrap();
            let mut counts = [0usize; 4];
            for _ in 0..trials {
                counts[born_measure(&state, &basis, &mut rng).unwrap()] += 1;
            }
            for j in 0..4 {
                let sigma = (trials as f64 * probs[j] * (1.0 - probs[j])).sqrt().max(1.0);
                assert!((counts[j] as f64 - trials as f64 * probs[j]).abs() < 5.0 * sigma);
            }
        }
        // B2 vector measured in B1 is uniform
        let s = make_b2_state(4, 1).unwrap();
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            counts[born_measure(&s, &Basis::computational(4), &mut rng).unwrap()] += 1;
        }
        let sigma = (trials as f64 * 0.25 * 0.75).sqrt();
        for n in counts {
            assert!((n as f64 - trials as f64 / 4.0).abs() < 5.0 * sigma);
        }
    }

    #[test]
    fn same_seed_same_outcomes() {
        let s = make_b2_state(8, 3).unwrap();
        let b = Basis::computational(8);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..200).map(|_| born_measure(&s, &b, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
    }

    #[test]
    fn sample_index_edges() {
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 0.999_999_999_999), 1);
        // rounding slack never lands on a zero-weight outcome
        assert_eq!(sample_index(&[0.3, 0.7, 0.0], 1.0), 1);
    }

    #[test]
    fn normalization_is_enforced() {
        assert!(matches!(
            PureState::new(vec![c(1.0, 0.0), c(1.0, 0.0)], 0, Frame::HgSide),
            Err(Error::NotNormalized { .. })
        ));
        assert!(PureState::normalized(vec![c(0.0, 0.0)], 0, Frame::HgSide).is_err());
    }

    #[test]
    fn physical_mode_mapping() {
        assert_eq!(physical_mode(2, 0, Frame::HgSide), ModeLabel::hg(2, 2));
        assert_eq!(physical_mode(2, 0, Frame::LgSide), ModeLabel::lg(2, 2));
        assert_eq!(physical_mode(1, 3, Frame::LgSide), ModeLabel::lg(4, 1));
        assert_eq!(physical_mode(1, -2, Frame::LgSide), ModeLabel::lg(1, 3));
    }
}
