//! Non-equilibrium photon occupation spectra and the transition rates they induce.
//!
//! A spectrum is described through its inverse-temperature function
//! `beta(omega)`, so that the occupation number per mode is
//! `N(omega) = 1 / (exp(beta(omega)) - 1)`. The Gibbs spectrum is the linear
//! case `beta(omega) = beta * omega`; any other profile is out of equilibrium.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atom::ThreeLevelAtom;

/// Relative tolerance used to match a queried frequency against a table entry.
pub const FREQUENCY_MATCH_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("undefined-frequency: omega={omega} is outside the spectrum's domain")]
    UndefinedFrequency { omega: f64 },
    #[error("nonpositive-beta: beta({omega})={beta} must be > 0")]
    NonPositiveBeta { omega: f64, beta: f64 },
    #[error("invalid-spectrum: {0}")]
    InvalidSpectrum(String),
}

/// Field polarization. `Lr` is the transverse (↔) field, `Ud` the longitudinal (↕) one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    Lr,
    Ud,
}

/// The three allowed radiative transitions of the atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    /// 2 ↔ 1, coupled to the ↔ field.
    T21,
    /// 3 ↔ 1, coupled to the ↕ field.
    T31,
    /// 3 ↔ 2, coupled to the ↕ field.
    T32,
}

impl Transition {
    pub const ALL: [Transition; 3] = [Transition::T21, Transition::T31, Transition::T32];

    pub fn polarization(self) -> Polarization {
        match self {
            Transition::T21 => Polarization::Lr,
            Transition::T31 | Transition::T32 => Polarization::Ud,
        }
    }

    /// `(upper, lower)` level indices, 1-based.
    pub fn levels(self) -> (usize, usize) {
        match self {
            Transition::T21 => (2, 1),
            Transition::T31 => (3, 1),
            Transition::T32 => (3, 2),
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Transition::T21 => 0,
            Transition::T31 => 1,
            Transition::T32 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Gibbs,
    Tabulated,
    PerFrequency,
}

/// How `beta(omega)` is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaProfile {
    /// `beta(omega) = beta * omega`.
    Gibbs { beta: f64 },
    /// Ordered `(omega, beta)` samples, linearly interpolated, no extrapolation.
    Tabulated(Vec<(f64, f64)>),
    /// Explicit `(omega, beta)` pairs; queries must hit one of the listed frequencies.
    PerFrequency(Vec<(f64, f64)>),
}

/// Occupation spectrum of one polarization.
///
/// Point overrides take precedence over the profile; sweeps use them to move
/// `beta` at a single Bohr frequency without rebuilding the profile.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationSpectrum {
    profile: BetaProfile,
    overrides: Vec<(f64, f64)>,
}

fn matches(a: f64, b: f64) -> bool {
    (a - b).abs() <= FREQUENCY_MATCH_RTOL * a.abs().max(b.abs())
}

fn check_pairs(pairs: &[(f64, f64)]) -> Result<(), SpectralError> {
    if pairs.is_empty() {
        return Err(SpectralError::InvalidSpectrum("empty (omega, beta) list".into()));
    }
    for &(w, b) in pairs {
        if !w.is_finite() || w <= 0.0 || !b.is_finite() {
            return Err(SpectralError::InvalidSpectrum(format!(
                "entry (omega={w}, beta={b}) must have finite omega > 0 and finite beta"
            )));
        }
    }
    Ok(())
}

impl OccupationSpectrum {
    pub fn gibbs(beta: f64) -> Result<Self, SpectralError> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(SpectralError::InvalidSpectrum(format!(
                "gibbs spectrum needs a finite beta > 0, got {beta}"
            )));
        }
        Ok(Self {
            profile: BetaProfile::Gibbs { beta },
            overrides: Vec::new(),
        })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        check_pairs(&points)?;
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(SpectralError::InvalidSpectrum(
                "tabulated omega values must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            profile: BetaProfile::Tabulated(points),
            overrides: Vec::new(),
        })
    }

    pub fn per_frequency(points: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        check_pairs(&points)?;
        for (i, a) in points.iter().enumerate() {
            if points[i + 1..].iter().any(|b| matches(a.0, b.0)) {
                return Err(SpectralError::InvalidSpectrum(format!(
                    "frequency {} listed more than once",
                    a.0
                )));
            }
        }
        Ok(Self {
            profile: BetaProfile::PerFrequency(points),
            overrides: Vec::new(),
        })
    }

    /// Returns a copy with `beta(omega)` pinned to `beta` at this one frequency.
    pub fn with_override(&self, omega: f64, beta: f64) -> Self {
        let mut out = self.clone();
        out.overrides.retain(|&(w, _)| !matches(w, omega));
        out.overrides.push((omega, beta));
        out
    }

    pub fn kind(&self) -> SpectrumKind {
        match self.profile {
            BetaProfile::Gibbs { .. } => SpectrumKind::Gibbs,
            BetaProfile::Tabulated(_) => SpectrumKind::Tabulated,
            BetaProfile::PerFrequency(_) => SpectrumKind::PerFrequency,
        }
    }

    pub fn profile(&self) -> &BetaProfile {
        &self.profile
    }

    /// `beta(omega)` without the positivity check.
    pub fn beta_raw(&self, omega: f64) -> Result<f64, SpectralError> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(SpectralError::UndefinedFrequency { omega });
        }
        if let Some(&(_, b)) = self.overrides.iter().find(|(w, _)| matches(*w, omega)) {
            return Ok(b);
        }
        match &self.profile {
            BetaProfile::Gibbs { beta } => Ok(beta * omega),
            BetaProfile::PerFrequency(points) => points
                .iter()
                .find(|(w, _)| matches(*w, omega))
                .map(|&(_, b)| b)
                .ok_or(SpectralError::UndefinedFrequency { omega }),
            BetaProfile::Tabulated(points) => interpolate(points, omega),
        }
    }

    /// `beta(omega)`, rejecting values that are not strictly positive.
    pub fn beta(&self, omega: f64) -> Result<f64, SpectralError> {
        let beta = self.beta_raw(omega)?;
        if !(beta > 0.0) {
            return Err(SpectralError::NonPositiveBeta { omega, beta });
        }
        Ok(beta)
    }

    /// Occupation number `N(omega) = 1 / (exp(beta(omega)) - 1)`.
    pub fn occupation(&self, omega: f64) -> Result<f64, SpectralError> {
        Ok(occupation_from_beta(self.beta(omega)?))
    }
}

fn interpolate(points: &[(f64, f64)], omega: f64) -> Result<f64, SpectralError> {
    let first = points[0];
    let last = points[points.len() - 1];
    if matches(omega, first.0) {
        return Ok(first.1);
    }
    if matches(omega, last.0) {
        return Ok(last.1);
    }
    if omega < first.0 || omega > last.0 {
        return Err(SpectralError::UndefinedFrequency { omega });
    }
    // first index with w > omega; guaranteed in 1..len by the range checks
    let hi = points.partition_point(|&(w, _)| w <= omega);
    let (w0, b0) = points[hi - 1];
    let (w1, b1) = points[hi];
    let frac = (omega - w0) / (w1 - w0);
    Ok(b0 + frac * (b1 - b0))
}

/// Planck-type occupation for a given exponent. Caller guarantees `beta > 0`.
pub fn occupation_from_beta(beta: f64) -> f64 {
    1.0 / beta.exp_m1()
}

/// The pair of per-polarization spectra seen by the atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectra {
    pub lr: OccupationSpectrum,
    pub ud: OccupationSpectrum,
}

impl Spectra {
    pub fn new(lr: OccupationSpectrum, ud: OccupationSpectrum) -> Self {
        Self { lr, ud }
    }

    /// Both polarizations share one spectrum.
    pub fn shared(spectrum: OccupationSpectrum) -> Self {
        Self {
            lr: spectrum.clone(),
            ud: spectrum,
        }
    }

    pub fn get(&self, sigma: Polarization) -> &OccupationSpectrum {
        match sigma {
            Polarization::Lr => &self.lr,
            Polarization::Ud => &self.ud,
        }
    }

    pub fn is_shared(&self) -> bool {
        self.lr == self.ud
    }

    pub fn occupation(&self, sigma: Polarization, omega: f64) -> Result<f64, SpectralError> {
        self.get(sigma).occupation(omega)
    }

    pub fn beta(&self, sigma: Polarization, omega: f64) -> Result<f64, SpectralError> {
        self.get(sigma).beta(omega)
    }

    /// `beta_sigma(omega_t)` for each transition, in `[T21, T31, T32]` order.
    pub fn transition_betas(&self, atom: &ThreeLevelAtom) -> Result<[f64; 3], SpectralError> {
        let w = atom.bohr_frequencies();
        let mut out = [0.0; 3];
        for t in Transition::ALL {
            out[t.index()] = self.beta(t.polarization(), w.of(t))?;
        }
        Ok(out)
    }

    /// Pins `beta(omega)` on both polarizations.
    pub fn with_override(&self, omega: f64, beta: f64) -> Self {
        Self {
            lr: self.lr.with_override(omega, beta),
            ud: self.ud.with_override(omega, beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid-rate: {0}")]
pub struct RateError(String);

/// Downward (`minus`, emission) and upward (`plus`, absorption) rates per transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSet {
    minus: [f64; 3],
    plus: [f64; 3],
}

impl RateSet {
    /// `minus` and `plus` are given in `[T21, T31, T32]` order.
    pub fn new(minus: [f64; 3], plus: [f64; 3]) -> Result<Self, RateError> {
        for v in minus.iter().chain(plus.iter()) {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(RateError(format!("rates must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { minus, plus })
    }

    pub fn minus(&self, t: Transition) -> f64 {
        self.minus[t.index()]
    }

    pub fn plus(&self, t: Transition) -> f64 {
        self.plus[t.index()]
    }

    pub fn minus_all(&self) -> [f64; 3] {
        self.minus
    }

    pub fn plus_all(&self) -> [f64; 3] {
        self.plus
    }

    pub fn all_positive(&self) -> bool {
        self.minus.iter().chain(self.plus.iter()).all(|&v| v > 0.0)
    }

    /// Multiplies both rates of the ↔ channel by `s`, leaving their ratio untouched.
    pub fn scale_lr(&self, s: f64) -> Result<Self, RateError> {
        let mut minus = self.minus;
        let mut plus = self.plus;
        minus[0] *= s;
        plus[0] *= s;
        Self::new(minus, plus)
    }

    /// Largest diagonal entry (in magnitude) of the population generator, factor 2 included.
    pub fn max_exit_rate(&self) -> f64 {
        let (m, p) = (self.minus, self.plus);
        let exit1 = 2.0 * (p[0] + p[1]);
        let exit2 = 2.0 * (m[0] + p[2]);
        let exit3 = 2.0 * (m[2] + m[1]);
        exit1.max(exit2).max(exit3)
    }
}

/// Transition rates `gamma_minus = kappa (N + 1)`, `gamma_plus = kappa N`.
pub fn rates(atom: &ThreeLevelAtom, spectra: &Spectra) -> Result<RateSet, SpectralError> {
    let w = atom.bohr_frequencies();
    let mut minus = [0.0; 3];
    let mut plus = [0.0; 3];
    for t in Transition::ALL {
        let n = spectra.occupation(t.polarization(), w.of(t))?;
        let kappa = atom.coupling(t);
        minus[t.index()] = kappa * (n + 1.0);
        plus[t.index()] = kappa * n;
    }
    RateSet::new(minus, plus).map_err(|e| SpectralError::InvalidSpectrum(e.to_string()))
}
