//! Stationary populations, the continuous-emission condition and the
//! double-Einstein limit.
//!
//! The closed-form ratios and the null-space solve are independent routes to
//! the same stationary state; the test suite checks one against the other.

use std::fmt;

use thiserror::Error;

use crate::atom::ThreeLevelAtom;
use crate::kinetics::{format_float, generator, AtomState};
use crate::spectral::{rates, RateSet, SpectralError, Spectra, Transition::*};

/// Absolute band on the log-ratio inside which the emission inequality is a tie (reported false).
pub const CONDITION_TIE: f64 = 1e-12;

/// Relative threshold on `|emission_rate| / (gamma-21 + gamma+21)` for detailed balance.
pub const DETAILED_BALANCE_RTOL: f64 = 1e-12;

/// Allowed mutual inconsistency of the three closed-form ratios.
pub const RATIO_CONSISTENCY_RTOL: f64 = 1e-12;

pub const REPORT_CSV_HEADER: [&str; 10] = [
    "P1",
    "P2",
    "P3",
    "r21",
    "r31",
    "r32",
    "emission_rate",
    "condition_rate_form",
    "condition_beta_form",
    "balance_class",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("reducible-system: {0}")]
    Reducible(String),
    #[error("not-applicable: {0}")]
    NotApplicable(String),
    #[error("inconsistent-ratios: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BalanceClass {
    DetailedBalance,
    DistortedBalance,
}

impl fmt::Display for BalanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BalanceClass::DetailedBalance => "detailed-balance",
            BalanceClass::DistortedBalance => "distorted-balance",
        })
    }
}

/// Population ratios `P2/P1`, `P3/P1`, `P3/P2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratios {
    pub r21: f64,
    pub r31: f64,
    pub r32: f64,
}

impl Ratios {
    pub fn from_state(p: &AtomState) -> Self {
        let [p1, p2, p3] = p.populations();
        Self {
            r21: p2 / p1,
            r31: p3 / p1,
            r32: p3 / p2,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r21, self.r31, self.r32]
    }

    /// Largest relative difference component-wise.
    pub fn max_rel_diff(&self, other: &Ratios) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    pub populations: AtomState,
    pub ratios: Ratios,
    /// Net ↔-photon emission rate in the stationary state.
    pub emission_rate: f64,
    pub condition_rate_form: bool,
    /// `None` when the two polarizations do not share one spectrum.
    pub condition_beta_form: Option<bool>,
    pub balance_class: BalanceClass,
}

impl StationaryReport {
    pub fn csv_fields(&self) -> Vec<String> {
        let [p1, p2, p3] = self.populations.populations();
        let mut out: Vec<String> = [
            p1,
            p2,
            p3,
            self.ratios.r21,
            self.ratios.r31,
            self.ratios.r32,
            self.emission_rate,
        ]
        .iter()
        .map(|v| format_float(*v))
        .collect();
        out.push(self.condition_rate_form.to_string());
        out.push(beta_form_label(self.condition_beta_form).to_string());
        out.push(self.balance_class.to_string());
        out
    }

    /// Flat `key=value` block, one entry per line.
    pub fn to_key_value(&self) -> String {
        REPORT_CSV_HEADER
            .iter()
            .zip(self.csv_fields())
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

pub fn beta_form_label(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "true",
        Some(false) => "false",
        None => "not-applicable",
    }
}

fn require_positive(rates: &RateSet) -> Result<(), StationaryError> {
    if rates.all_positive() {
        Ok(())
    } else {
        Err(StationaryError::Reducible(format!(
            "all six rates must be > 0, got minus={:?} plus={:?}",
            rates.minus_all(),
            rates.plus_all()
        )))
    }
}

/// Stationary state from the three quotient formulas.
///
/// Writing `a = gamma-`, `b = gamma+`:
///
/// ```text
/// P2/P1 = (a31 b21 + a32 b21 + b31 a32) / (a31 a21 + a31 b32 + a32 a21)
/// P3/P1 = (b31 a21 + b32 b21 + b31 b32) / (a32 a21 + a31 a21 + a31 b32)
/// P3/P2 = (b32 b21 + b31 a21 + b32 b31) / (a31 b21 + a32 b21 + b31 a32)
/// ```
pub fn stationary_closed_form(rates: &RateSet) -> Result<StationaryReport, StationaryError> {
    require_positive(rates)?;
    let (a21, a31, a32) = (rates.minus(T21), rates.minus(T31), rates.minus(T32));
    let (b21, b31, b32) = (rates.plus(T21), rates.plus(T31), rates.plus(T32));

    let r21 = (a31 * b21 + a32 * b21 + b31 * a32) / (a31 * a21 + a31 * b32 + a32 * a21);
    let r31 = (b31 * a21 + b32 * b21 + b31 * b32) / (a32 * a21 + a31 * a21 + a31 * b32);
    let r32 = (b32 * b21 + b31 * a21 + b32 * b31) / (a31 * b21 + a32 * b21 + b31 * a32);

    let chained = r32 * r21;
    if (r31 - chained).abs() > RATIO_CONSISTENCY_RTOL * r31.abs() {
        return Err(StationaryError::Inconsistent(format!(
            "P3/P1={r31} but (P3/P2)(P2/P1)={chained}"
        )));
    }

    let norm = 1.0 + r21 + r31;
    let populations = AtomState::from_raw([1.0 / norm, r21 / norm, r31 / norm]);
    let ratios = Ratios { r21, r31, r32 };
    Ok(build_report(rates, populations, ratios, None))
}

fn build_report(
    rates: &RateSet,
    populations: AtomState,
    ratios: Ratios,
    condition_beta_form: Option<bool>,
) -> StationaryReport {
    let [p1, p2, _] = populations.populations();
    let (a21, b21) = (rates.minus(T21), rates.plus(T21));
    let emission_rate = 2.0 * (a21 * p2 - b21 * p1);
    let balance_class = if emission_rate.abs() < DETAILED_BALANCE_RTOL * (a21 + b21) {
        BalanceClass::DetailedBalance
    } else {
        BalanceClass::DistortedBalance
    };
    StationaryReport {
        populations,
        ratios,
        emission_rate,
        condition_rate_form: log_margin(rates) > CONDITION_TIE,
        condition_beta_form,
        balance_class,
    }
}

/// Solves `M P = 0`, `sum P = 1` by Gaussian elimination with partial pivoting.
///
/// Only needs the kernel of the generator to be one-dimensional, so it also
/// handles chains with some zero rates (e.g. the vacuum ground state).
pub fn stationary_null_space(rates: &RateSet) -> Result<AtomState, StationaryError> {
    let m = generator(rates);
    let scale = m
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return Err(StationaryError::Reducible("all rates vanish".into()));
    }
    // rows of M are linearly dependent (columns sum to zero): swap the last for the normalization
    let mut a = [
        [m[0][0] / scale, m[0][1] / scale, m[0][2] / scale, 0.0],
        [m[1][0] / scale, m[1][1] / scale, m[1][2] / scale, 0.0],
        [1.0, 1.0, 1.0, 1.0],
    ];
    for col in 0..3 {
        let pivot_row = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < 1e-13 {
            return Err(StationaryError::Reducible(
                "generator kernel is more than one-dimensional".into(),
            ));
        }
        a.swap(col, pivot_row);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][3] - tail) / a[row][row];
    }
    // roundoff can leave entries a few ulps below zero
    let x = x.map(|v| if v < 0.0 && v > -1e-14 { 0.0 } else { v });
    AtomState::normalized(x).map_err(|e| StationaryError::Reducible(e.to_string()))
}

/// `ln[(gamma+31/gamma-31)(gamma-32/gamma+32)] - ln(gamma+21/gamma-21)`; positive iff emission.
fn log_margin(rates: &RateSet) -> f64 {
    let rhs = rates.plus(T31).ln() + rates.minus(T32).ln() + rates.minus(T21).ln();
    let lhs = rates.plus(T21).ln() + rates.minus(T31).ln() + rates.plus(T32).ln();
    rhs - lhs
}

/// The two sides `gamma+21/gamma-21` and `(gamma+31/gamma-31)(gamma-32/gamma+32)`.
pub fn emission_condition_sides(rates: &RateSet) -> Result<(f64, f64), StationaryError> {
    require_positive(rates)?;
    let lhs = rates.plus(T21) / rates.minus(T21);
    let rhs = rates.plus(T31) / rates.minus(T31) * (rates.minus(T32) / rates.plus(T32));
    Ok((lhs, rhs))
}

/// Rate form of the continuous-emission condition (strict; ties within
/// [`CONDITION_TIE`] count as false).
pub fn emission_condition(rates: &RateSet) -> Result<bool, StationaryError> {
    require_positive(rates)?;
    Ok(log_margin(rates) > CONDITION_TIE)
}

/// `beta(w31) < beta(w32) + beta(w21)` with the same tie band as the rate form.
pub fn emission_condition_beta_values(beta21: f64, beta31: f64, beta32: f64) -> bool {
    beta32 + beta21 - beta31 > CONDITION_TIE
}

/// Beta form of the condition; only defined when both polarizations share one spectrum.
pub fn emission_condition_beta(atom: &ThreeLevelAtom, spectra: &Spectra) -> Result<bool, StationaryError> {
    if !spectra.is_shared() {
        return Err(StationaryError::NotApplicable(
            "the lr and ud spectra differ".into(),
        ));
    }
    let [b21, b31, b32] = spectra.transition_betas(atom)?;
    Ok(emission_condition_beta_values(b21, b31, b32))
}

/// Full report for an atom in a given field, including the beta form when applicable.
pub fn analyze(atom: &ThreeLevelAtom, spectra: &Spectra) -> Result<StationaryReport, StationaryError> {
    analyze_scaled(atom, spectra, 1.0)
}

/// As [`analyze`], with the ↔ channel rates multiplied by `lr_scale`.
pub fn analyze_scaled(
    atom: &ThreeLevelAtom,
    spectra: &Spectra,
    lr_scale: f64,
) -> Result<StationaryReport, StationaryError> {
    if !atom.is_connected() {
        return Err(StationaryError::Reducible(
            "zero couplings disconnect the level graph".into(),
        ));
    }
    let r = rates(atom, spectra)?
        .scale_lr(lr_scale)
        .map_err(|e| StationaryError::Reducible(e.to_string()))?;
    let mut report = stationary_closed_form(&r)?;
    report.condition_beta_form = match emission_condition_beta(atom, spectra) {
        Ok(v) => Some(v),
        Err(StationaryError::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(report)
}

/// Limit ratios when the ↕ (pump) rates dominate the ↔ channel. Uses only
/// the ↕ entries of `rates`.
pub fn double_einstein_limit(rates: &RateSet) -> Ratios {
    let r31 = rates.plus(T31) / rates.minus(T31);
    let r32 = rates.plus(T32) / rates.minus(T32);
    Ratios {
        r21: r31 / r32,
        r31,
        r32,
    }
}

/// Same limit written with ↕ occupations: `N/(N+1)` replaces `gamma+/gamma-`.
pub fn double_einstein_from_occupations(n31: f64, n32: f64) -> Ratios {
    let e31 = n31 / (n31 + 1.0);
    let e32 = n32 / (n32 + 1.0);
    Ratios {
        r21: e31 * (n32 + 1.0) / n32,
        r31: e31,
        r32: e32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Couplings;
    use crate::spectral::OccupationSpectrum;

    fn atom() -> ThreeLevelAtom {
        ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::uniform(1.0)).unwrap()
    }

    fn gibbs_rates(beta: f64, w: [f64; 3], k: [f64; 3]) -> RateSet {
        let mut m = [0.0; 3];
        let mut p = [0.0; 3];
        for i in 0..3 {
            let n = 1.0 / (beta * w[i]).exp_m1();
            m[i] = k[i] * (n + 1.0);
            p[i] = k[i] * n;
        }
        RateSet::new(m, p).unwrap()
    }

    #[test]
    fn uniform_rates_give_uniform_state() {
        let r = RateSet::new([1.0; 3], [1.0; 3]).unwrap();
        let rep = stationary_closed_form(&r).unwrap();
        assert_eq!(rep.ratios.as_array(), [1.0, 1.0, 1.0]);
        for p in rep.populations.populations() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let ns = stationary_null_space(&r).unwrap();
        for p in ns.populations() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gibbs_ratios_are_boltzmann_factors() {
        let beta = 0.7;
        let r = gibbs_rates(beta, [1.0, 3.0, 2.0], [1.3, 0.4, 2.2]);
        let rep = stationary_closed_form(&r).unwrap();
        let expected = [(-beta).exp(), (-3.0 * beta).exp(), (-2.0 * beta).exp()];
        for (got, want) in rep.ratios.as_array().iter().zip(expected) {
            assert!(((got - want) / want).abs() < 1e-13);
        }
        assert_eq!(rep.balance_class, BalanceClass::DetailedBalance);
        assert!(!rep.condition_rate_form);
        assert!(rep.emission_rate.abs() < 1e-14);
    }

    #[test]
    fn concave_profile_emission_scenario() {
        let s = Spectra::shared(
            OccupationSpectrum::per_frequency(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 2.5)]).unwrap(),
        );
        let rep = analyze(&atom(), &s).unwrap();
        assert!(rep.condition_rate_form);
        assert_eq!(rep.condition_beta_form, Some(true));
        assert!(rep.emission_rate > 0.0);
        assert_eq!(rep.balance_class, BalanceClass::DistortedBalance);
        let ns = stationary_null_space(&rates(&atom(), &s).unwrap()).unwrap();
        for (a, b) in ns.populations().iter().zip(rep.populations.populations()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn condition_false_above_the_line() {
        let s = Spectra::shared(
            OccupationSpectrum::per_frequency(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 3.5)]).unwrap(),
        );
        let r = rates(&atom(), &s).unwrap();
        assert!(!emission_condition(&r).unwrap());
        assert!(!emission_condition_beta(&atom(), &s).unwrap());
        assert!(analyze(&atom(), &s).unwrap().emission_rate < 0.0);
    }

    #[test]
    fn linear_beta_is_an_exact_tie() {
        for beta in [0.01, 0.3, 1.0, 7.5] {
            let s = Spectra::shared(OccupationSpectrum::gibbs(beta).unwrap());
            let r = rates(&atom(), &s).unwrap();
            assert!(!emission_condition(&r).unwrap());
            assert!(!emission_condition_beta(&atom(), &s).unwrap());
            let (lhs, rhs) = emission_condition_sides(&r).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs);
        }
    }

    #[test]
    fn concave_sqrt_beta_satisfies_condition() {
        // atom with w21 = 1, w32 = 2, w31 = 3 and beta(w) = sqrt(w)
        let s = Spectra::shared(
            OccupationSpectrum::per_frequency(vec![
                (1.0, 1.0),
                (2.0, 2f64.sqrt()),
                (3.0, 3f64.sqrt()),
            ])
            .unwrap(),
        );
        assert!(emission_condition_beta(&atom(), &s).unwrap());
        assert!(emission_condition(&rates(&atom(), &s).unwrap()).unwrap());
    }

    #[test]
    fn beta_form_not_applicable_for_distinct_spectra() {
        let s = Spectra::new(
            OccupationSpectrum::gibbs(1.0).unwrap(),
            OccupationSpectrum::gibbs(2.0).unwrap(),
        );
        assert!(matches!(
            emission_condition_beta(&atom(), &s),
            Err(StationaryError::NotApplicable(_))
        ));
        assert_eq!(analyze(&atom(), &s).unwrap().condition_beta_form, None);
    }

    #[test]
    fn zero_rate_is_reducible_for_closed_form() {
        let r = RateSet::new([1.0, 1.0, 1.0], [0.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            stationary_closed_form(&r),
            Err(StationaryError::Reducible(_))
        ));
        assert!(emission_condition(&r).is_err());
    }

    #[test]
    fn null_space_handles_vacuum_and_rejects_split_chains() {
        // only spontaneous decay: everything ends in the ground state
        let r = RateSet::new([1.0, 1.0, 1.0], [0.0; 3]).unwrap();
        let p = stationary_null_space(&r).unwrap().populations();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15 && p[2].abs() < 1e-15);
        // level 1 isolated from {2, 3}
        let r = RateSet::new([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]).unwrap();
        assert!(stationary_null_space(&r).is_err());
        assert!(stationary_null_space(&RateSet::new([0.0; 3], [0.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn disconnected_atom_is_flagged() {
        let a = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::new(1.0, 0.0, 0.0)).unwrap();
        let s = Spectra::shared(OccupationSpectrum::gibbs(1.0).unwrap());
        assert!(matches!(analyze(&a, &s), Err(StationaryError::Reducible(_))));
    }

    #[test]
    fn double_einstein_with_unit_occupations() {
        let d = double_einstein_from_occupations(1.0, 1.0);
        assert_eq!(d.as_array(), [1.0, 0.5, 0.5]);
        let r = RateSet::new([2.0, 2.0, 2.0], [1.0, 1.0, 1.0]).unwrap();
        assert_eq!(double_einstein_limit(&r).as_array(), [1.0, 0.5, 0.5]);
    }

    #[test]
    fn double_einstein_gibbs_recovers_einstein_balance() {
        let beta = 0.8;
        let (w21, w32) = (1.0, 2.0);
        let w31 = w21 + w32;
        let n = |w: f64| 1.0 / (beta * w).exp_m1();
        let d = double_einstein_from_occupations(n(w31), n(w32));
        assert!((d.r21 - (-beta * w21).exp()).abs() < 1e-14);
        assert!((d.r31 - (-beta * w31).exp()).abs() < 1e-14);
        assert!((d.r32 - (-beta * w32).exp()).abs() < 1e-14);
    }

    #[test]
    fn report_text_and_csv_forms() {
        let r = RateSet::new([1.0; 3], [1.0; 3]).unwrap();
        let rep = stationary_closed_form(&r).unwrap();
        let kv = rep.to_key_value();
        assert!(kv.starts_with("P1=3.3333333333333331e-1\n"));
        assert!(kv.contains("condition_beta_form=not-applicable\n"));
        assert!(kv.contains("balance_class=detailed-balance\n"));
        assert_eq!(rep.csv_fields().len(), REPORT_CSV_HEADER.len());
    }
}
