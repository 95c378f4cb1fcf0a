//! The three-level atom, its selection rules and genericity check.

use std::fmt;

use thiserror::Error;

use crate::spectral::Transition;

/// Relative separation below which two Bohr frequencies count as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-9;

/// Couplings of the three allowed transitions. The forbidden ones
/// (2,1,↕), (3,1,↔) and (3,2,↔) have no slot at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub k21: f64,
    pub k31: f64,
    pub k32: f64,
}

impl Couplings {
    pub fn new(k21: f64, k31: f64, k32: f64) -> Self {
        Self { k21, k31, k32 }
    }

    pub fn uniform(k: f64) -> Self {
        Self::new(k, k, k)
    }

    pub fn get(&self, t: Transition) -> f64 {
        match t {
            Transition::T21 => self.k21,
            Transition::T31 => self.k31,
            Transition::T32 => self.k32,
        }
    }

    pub fn set(&mut self, t: Transition, value: f64) {
        match t {
            Transition::T21 => self.k21 = value,
            Transition::T31 => self.k31 = value,
            Transition::T32 => self.k32 = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BohrFrequencies {
    pub w21: f64,
    pub w31: f64,
    pub w32: f64,
}

impl BohrFrequencies {
    pub fn of(&self, t: Transition) -> f64 {
        match t {
            Transition::T21 => self.w21,
            Transition::T31 => self.w31,
            Transition::T32 => self.w32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AtomDiagnostic {
    NonFinite { what: &'static str, value: f64 },
    NonIncreasingEnergies { energies: [f64; 3] },
    DegenerateBohrFrequencies { w21: f64, w32: f64 },
    NegativeCoupling { transition: Transition, value: f64 },
}

impl AtomDiagnostic {
    pub fn code(&self) -> &'static str {
        match self {
            AtomDiagnostic::NonFinite { .. } => "non-finite-value",
            AtomDiagnostic::NonIncreasingEnergies { .. } => "non-increasing-energies",
            AtomDiagnostic::DegenerateBohrFrequencies { .. } => "degenerate-bohr-frequencies",
            AtomDiagnostic::NegativeCoupling { .. } => "negative-coupling",
        }
    }
}

impl fmt::Display for AtomDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomDiagnostic::NonFinite { what, value } => {
                write!(f, "{}: {what}={value}", self.code())
            }
            AtomDiagnostic::NonIncreasingEnergies { energies } => write!(
                f,
                "{}: need e1 < e2 < e3, got ({}, {}, {})",
                self.code(),
                energies[0],
                energies[1],
                energies[2]
            ),
            AtomDiagnostic::DegenerateBohrFrequencies { w21, w32 } => {
                write!(f, "{}: w21={w21} and w32={w32} coincide", self.code())
            }
            AtomDiagnostic::NegativeCoupling { transition, value } => {
                let (i, j) = transition.levels();
                write!(f, "{}: kappa{i}{j}={value}", self.code())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid-atom: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct AtomError(pub Vec<AtomDiagnostic>);

/// A validated three-level atom (`e1 < e2 < e3`, generic Bohr frequencies,
/// nonnegative couplings). Energies are in frequency units.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelAtom {
    energies: [f64; 3],
    couplings: Couplings,
}

/// Checks every invariant and reports all violations at once.
pub fn validate(energies: [f64; 3], couplings: Couplings) -> Result<ThreeLevelAtom, Vec<AtomDiagnostic>> {
    let mut diags = Vec::new();
    for (i, &e) in energies.iter().enumerate() {
        if !e.is_finite() {
            diags.push(AtomDiagnostic::NonFinite {
                what: ["e1", "e2", "e3"][i],
                value: e,
            });
        }
    }
    let finite = diags.is_empty();
    if finite {
        if !(energies[0] < energies[1] && energies[1] < energies[2]) {
            diags.push(AtomDiagnostic::NonIncreasingEnergies { energies });
        } else {
            let w21 = energies[1] - energies[0];
            let w32 = energies[2] - energies[1];
            if (w21 - w32).abs() <= DEGENERACY_RTOL * w21.max(w32) {
                diags.push(AtomDiagnostic::DegenerateBohrFrequencies { w21, w32 });
            }
        }
    }
    for t in Transition::ALL {
        let k = couplings.get(t);
        if k.is_nan() || k.is_infinite() {
            diags.push(AtomDiagnostic::NonFinite {
                what: match t {
                    Transition::T21 => "kappa21",
                    Transition::T31 => "kappa31",
                    Transition::T32 => "kappa32",
                },
                value: k,
            });
        } else if k < 0.0 {
            diags.push(AtomDiagnostic::NegativeCoupling { transition: t, value: k });
        }
    }
    if diags.is_empty() {
        Ok(ThreeLevelAtom { energies, couplings })
    } else {
        Err(diags)
    }
}

impl ThreeLevelAtom {
    pub fn new(energies: [f64; 3], couplings: Couplings) -> Result<Self, AtomError> {
        validate(energies, couplings).map_err(AtomError)
    }

    pub fn energies(&self) -> [f64; 3] {
        self.energies
    }

    pub fn couplings(&self) -> Couplings {
        self.couplings
    }

    pub fn coupling(&self, t: Transition) -> f64 {
        self.couplings.get(t)
    }

    /// `w31` is formed as `w21 + w32` so the sum rule holds bit-exactly.
    pub fn bohr_frequencies(&self) -> BohrFrequencies {
        let [e1, e2, e3] = self.energies;
        let w21 = e2 - e1;
        let w32 = e3 - e2;
        BohrFrequencies {
            w21,
            w31: w21 + w32,
            w32,
        }
    }

    /// Same atom with one coupling replaced; revalidated.
    pub fn with_coupling(&self, t: Transition, value: f64) -> Result<Self, AtomError> {
        let mut c = self.couplings;
        c.set(t, value);
        Self::new(self.energies, c)
    }

    /// Mean energy `sum_j e_j P_j`.
    pub fn mean_energy(&self, populations: &[f64; 3]) -> f64 {
        self.energies
            .iter()
            .zip(populations.iter())
            .map(|(e, p)| e * p)
            .sum()
    }

    /// Whether every level is reachable from every other through nonzero couplings.
    pub fn is_connected(&self) -> bool {
        let c = self.couplings;
        [c.k21 > 0.0, c.k31 > 0.0, c.k32 > 0.0]
            .iter()
            .filter(|&&on| on)
            .count()
            >= 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bohr_frequencies_by_subtraction() {
        let a = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::uniform(1.0)).unwrap();
        let w = a.bohr_frequencies();
        assert_eq!((w.w21, w.w31, w.w32), (1.0, 3.0, 2.0));
        let b = ThreeLevelAtom::new([-1.0, 0.0, 2.0], Couplings::uniform(1.0)).unwrap();
        assert_eq!(b.bohr_frequencies(), w);
    }

    #[test]
    fn equally_spaced_levels_are_rejected() {
        let err = ThreeLevelAtom::new([0.0, 1.0, 2.0], Couplings::uniform(1.0)).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].code(), "degenerate-bohr-frequencies");
    }

    #[test]
    fn near_degenerate_within_tolerance_is_rejected() {
        let err = validate([0.0, 1.0, 2.0 + 1e-12], Couplings::uniform(1.0)).unwrap_err();
        assert_eq!(err[0].code(), "degenerate-bohr-frequencies");
        assert!(validate([0.0, 1.0, 2.0 + 1e-6], Couplings::uniform(1.0)).is_ok());
    }

    #[test]
    fn misordered_energies() {
        let err = validate([0.0, 2.0, 1.0], Couplings::uniform(1.0)).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].code(), "non-increasing-energies");
        assert!(err[0].to_string().contains("(0, 2, 1)"));
    }

    #[test]
    fn negative_coupling() {
        let err = validate([0.0, 1.0, 3.0], Couplings::new(-1.0, 1.0, 1.0)).unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].code(), "negative-coupling");
        assert!(err[0].to_string().contains("kappa21=-1"));
    }

    #[test]
    fn all_violations_reported() {
        let err = validate([0.0, 2.0, 1.0], Couplings::new(-1.0, -2.0, 1.0)).unwrap_err();
        let codes: Vec<_> = err.iter().map(|d| d.code()).collect();
        assert_eq!(
            codes,
            ["non-increasing-energies", "negative-coupling", "negative-coupling"]
        );
        assert!(validate([0.0, f64::NAN, 3.0], Couplings::uniform(1.0)).is_err());
    }

    #[test]
    fn zero_coupling_allowed_but_may_disconnect() {
        let a = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::new(0.0, 1.0, 1.0)).unwrap();
        assert!(a.is_connected());
        let b = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::new(0.0, 0.0, 1.0)).unwrap();
        assert!(!b.is_connected());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn sum_rule_is_exact(e1 in -10.0f64..10.0, d1 in 0.01f64..5.0, d2 in 0.01f64..5.0) {
                prop_assume!((d1 - d2).abs() > 1e-6);
                let a = ThreeLevelAtom::new([e1, e1 + d1, e1 + d1 + d2], Couplings::uniform(1.0)).unwrap();
                let w = a.bohr_frequencies();
                prop_assert_eq!(w.w31, w.w21 + w.w32);
                prop_assert!(w.w21 > 0.0 && w.w32 > 0.0);
            }

            #[test]
            fn integer_shift_leaves_frequencies_bitwise(
                e in proptest::array::uniform3(-1000i32..1000),
                shift in -1000i32..1000,
            ) {
                let mut e = e;
                e.sort();
                prop_assume!(e[0] < e[1] && e[1] < e[2] && e[1] - e[0] != e[2] - e[1]);
                let base = e.map(f64::from);
                let shifted = e.map(|v| f64::from(v + shift));
                let a = ThreeLevelAtom::new(base, Couplings::uniform(1.0)).unwrap();
                let b = ThreeLevelAtom::new(shifted, Couplings::uniform(1.0)).unwrap();
                prop_assert_eq!(a.bohr_frequencies(), b.bohr_frequencies());
            }
        }
    }
}
