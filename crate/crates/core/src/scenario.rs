//! Scenarios (one atom in one field) and parameter sweeps over them.

use std::io;

use thiserror::Error;

use crate::atom::{AtomError, ThreeLevelAtom};
use crate::batch::{map_ordered, with_workers};
use crate::kinetics::{
    format_float, integrate_rates, stationarity_reached, AtomState, FluxRecord, IntegrationControls,
    KineticsError, Stationarity, Trajectory,
};
use crate::spectral::{rates, RateSet, SpectralError, Spectra, Transition};
use crate::stationary::{
    analyze_scaled, beta_form_label, emission_condition, emission_condition_beta, StationaryError,
    StationaryReport, REPORT_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Atom(#[from] AtomError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Stationary(#[from] StationaryError),
    #[error("invalid-scenario: {0}")]
    Invalid(String),
}

/// Which failures come from bad input rather than from the numerics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Validation,
    Numerical,
}

impl ScenarioError {
    pub fn class(&self) -> FailureClass {
        match self {
            ScenarioError::Kinetics(KineticsError::UnstableStep { .. })
            | ScenarioError::Kinetics(KineticsError::Io(_))
            | ScenarioError::Kinetics(KineticsError::Csv(_))
            | ScenarioError::Stationary(StationaryError::Reducible(_))
            | ScenarioError::Stationary(StationaryError::Inconsistent(_)) => FailureClass::Numerical,
            ScenarioError::Kinetics(KineticsError::Spectral(_))
            | ScenarioError::Stationary(StationaryError::Spectral(_)) => FailureClass::Validation,
            ScenarioError::Stationary(StationaryError::NotApplicable(_)) => FailureClass::Validation,
            ScenarioError::Kinetics(_)
            | ScenarioError::Atom(_)
            | ScenarioError::Spectral(_)
            | ScenarioError::Invalid(_) => FailureClass::Validation,
        }
    }

    /// Short machine-readable tag, e.g. `unstable-step`.
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioError::Atom(_) => "invalid-atom",
            ScenarioError::Spectral(e) | ScenarioError::Kinetics(KineticsError::Spectral(e))
            | ScenarioError::Stationary(StationaryError::Spectral(e)) => match e {
                SpectralError::UndefinedFrequency { .. } => "undefined-frequency",
                SpectralError::NonPositiveBeta { .. } => "nonpositive-beta",
                SpectralError::InvalidSpectrum(_) => "invalid-spectrum",
            },
            ScenarioError::Kinetics(e) => match e {
                KineticsError::UnstableStep { .. } => "unstable-step",
                KineticsError::InvalidInitialState(_) => "invalid-initial-state",
                KineticsError::InvalidControls(_) => "invalid-controls",
                KineticsError::Io(_) | KineticsError::Csv(_) => "io",
                KineticsError::Spectral(_) => unreachable!(),
            },
            ScenarioError::Stationary(e) => match e {
                StationaryError::Reducible(_) => "reducible-system",
                StationaryError::NotApplicable(_) => "not-applicable",
                StationaryError::Inconsistent(_) => "inconsistent-ratios",
                StationaryError::Spectral(_) => unreachable!(),
            },
            ScenarioError::Invalid(_) => "invalid-scenario",
        }
    }
}

/// A validated atom-in-field setup with integration controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub atom: ThreeLevelAtom,
    pub spectra: Spectra,
    pub initial: AtomState,
    pub controls: IntegrationControls,
    /// Residual threshold for declaring stationarity at the end of a run.
    pub stationarity_tol: f64,
    /// Multiplier on both ↔ rates; 1 leaves the field untouched.
    pub lr_scale: f64,
}

impl Scenario {
    /// Builds a scenario and checks that the spectra cover the atom's Bohr frequencies.
    pub fn new(
        atom: ThreeLevelAtom,
        spectra: Spectra,
        initial: AtomState,
        controls: IntegrationControls,
        stationarity_tol: f64,
    ) -> Result<Self, ScenarioError> {
        let s = Self {
            atom,
            spectra,
            initial,
            controls,
            stationarity_tol,
            lr_scale: 1.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_lr_scale(mut self, s: f64) -> Result<Self, ScenarioError> {
        self.lr_scale = s;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.stationarity_tol.is_finite() && self.stationarity_tol >= 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "stationarity tolerance must be finite and >= 0, got {}",
                self.stationarity_tol
            )));
        }
        if !(self.lr_scale.is_finite() && self.lr_scale > 0.0) {
            return Err(ScenarioError::Invalid(format!(
                "lr_scale must be finite and > 0, got {}",
                self.lr_scale
            )));
        }
        if let Some(dt) = self.controls.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(KineticsError::InvalidControls(format!("dt must be > 0, got {dt}")).into());
            }
        }
        if !(self.controls.t_end.is_finite() && self.controls.t_end >= 0.0) {
            return Err(KineticsError::InvalidControls(format!(
                "t_end must be finite and >= 0, got {}",
                self.controls.t_end
            ))
            .into());
        }
        if self.controls.sample_every == 0 {
            return Err(KineticsError::InvalidControls("sample_every must be >= 1".into()).into());
        }
        AtomState::new(self.initial.populations())?;
        self.rates()?;
        Ok(())
    }

    pub fn rates(&self) -> Result<RateSet, ScenarioError> {
        let r = rates(&self.atom, &self.spectra)?;
        r.scale_lr(self.lr_scale)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn simulate(&self) -> Result<Simulation, ScenarioError> {
        let r = self.rates()?;
        let trajectory = integrate_rates(&self.atom, &r, self.initial, &self.controls)?;
        let stationarity = if trajectory.steps == 0 {
            None
        } else {
            Some(stationarity_reached(&trajectory, self.stationarity_tol))
        };
        let last = trajectory.last();
        let summary = SimulationSummary {
            stationarity,
            final_time: last.t,
            final_state: last.state,
            final_flux: last.flux,
            dn_lr: last.dn_lr,
            dn_ud: last.dn_ud,
            max_energy_violation: trajectory.max_energy_violation(),
            max_simplex_drift: trajectory.max_simplex_drift(),
            max_renormalization: trajectory.max_renormalization,
            step: trajectory.step,
            steps: trajectory.steps,
        };
        Ok(Simulation {
            trajectory,
            summary,
        })
    }

    pub fn stationary(&self) -> Result<StationaryReport, ScenarioError> {
        Ok(analyze_scaled(&self.atom, &self.spectra, self.lr_scale)?)
    }

    /// Emission condition in both forms without the full stationary solve.
    pub fn check(&self) -> Result<ConditionCheck, ScenarioError> {
        let rate_form = emission_condition(&self.rates()?)?;
        let beta_form = match emission_condition_beta(&self.atom, &self.spectra) {
            Ok(v) => Some(v),
            Err(StationaryError::NotApplicable(_)) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(ConditionCheck {
            rate_form,
            beta_form,
            betas: self.spectra.transition_betas(&self.atom)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub rate_form: bool,
    pub beta_form: Option<bool>,
    /// `beta` at `w21` (↔), `w31` (↕), `w32` (↕).
    pub betas: [f64; 3],
}

impl ConditionCheck {
    pub fn to_key_value(&self) -> String {
        let [b21, b31, b32] = self.betas;
        format!(
            "beta21={}\nbeta31={}\nbeta32={}\ncondition_rate_form={}\ncondition_beta_form={}\n",
            format_float(b21),
            format_float(b31),
            format_float(b32),
            self.rate_form,
            beta_form_label(self.beta_form)
        )
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub summary: SimulationSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSummary {
    /// `None` when no step was taken.
    pub stationarity: Option<Stationarity>,
    pub final_time: f64,
    pub final_state: AtomState,
    pub final_flux: FluxRecord,
    pub dn_lr: f64,
    pub dn_ud: f64,
    pub max_energy_violation: f64,
    pub max_simplex_drift: f64,
    pub max_renormalization: f64,
    pub step: f64,
    pub steps: usize,
}

impl SimulationSummary {
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        match &self.stationarity {
            None => kv("stationarity", "not evaluated".into()),
            Some(st) => {
                kv("stationarity", if st.reached { "reached" } else { "not reached" }.into());
                kv("residual", format_float(st.residual));
            }
        }
        let [p1, p2, p3] = self.final_state.populations();
        let f = &self.final_flux;
        kv("t_final", format_float(self.final_time));
        kv("steps", self.steps.to_string());
        kv("dt", format_float(self.step));
        kv("P1", format_float(p1));
        kv("P2", format_float(p2));
        kv("P3", format_float(p3));
        kv("f21", format_float(f.f21));
        kv("f31", format_float(f.f31));
        kv("f32", format_float(f.f32));
        kv("dn_lr_rate", format_float(f.dn_lr));
        kv("dn_ud_rate", format_float(f.dn_ud));
        kv("dn_lr", format_float(self.dn_lr));
        kv("dn_ud", format_float(self.dn_ud));
        kv("max_energy_violation", format_float(self.max_energy_violation));
        kv("max_simplex_drift", format_float(self.max_simplex_drift));
        kv("max_renormalization", format_float(self.max_renormalization));
        out
    }
}

/// Scenario parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// `beta` at a Bohr frequency, pinned on both polarizations.
    Beta(Transition),
    Kappa(Transition),
    /// Multiplier on the ↔ channel rates.
    LrScale,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Option<Self> {
        use Transition::*;
        Some(match name {
            "beta21" => Self::Beta(T21),
            "beta31" => Self::Beta(T31),
            "beta32" => Self::Beta(T32),
            "kappa21" => Self::Kappa(T21),
            "kappa31" => Self::Kappa(T31),
            "kappa32" => Self::Kappa(T32),
            "lr_scale" => Self::LrScale,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        use Transition::*;
        match self {
            Self::Beta(T21) => "beta21",
            Self::Beta(T31) => "beta31",
            Self::Beta(T32) => "beta32",
            Self::Kappa(T21) => "kappa21",
            Self::Kappa(T31) => "kappa31",
            Self::Kappa(T32) => "kappa32",
            Self::LrScale => "lr_scale",
        }
    }

    pub fn apply(&self, base: &Scenario, value: f64) -> Result<Scenario, ScenarioError> {
        let mut s = base.clone();
        match *self {
            Self::Beta(t) => {
                let w = base.atom.bohr_frequencies().of(t);
                s.spectra = base.spectra.with_override(w, value);
            }
            Self::Kappa(t) => s.atom = base.atom.with_coupling(t, value)?,
            Self::LrScale => s.lr_scale = value,
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(parameter: SweepParameter, values: Vec<f64>) -> Result<Self, ScenarioError> {
        if values.is_empty() {
            return Err(ScenarioError::Invalid(format!("{}: empty grid", parameter.name())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScenarioError::Invalid(format!(
                "{}: grid values must be finite",
                parameter.name()
            )));
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(ScenarioError::Invalid(format!(
                "{}: grid must be strictly monotone",
                parameter.name()
            )));
        }
        Ok(Self { parameter, values })
    }

    /// `points` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(
        parameter: SweepParameter,
        start: f64,
        stop: f64,
        points: usize,
    ) -> Result<Self, ScenarioError> {
        let values = match points {
            0 => Vec::new(),
            1 => vec![start],
            n => (0..n)
                .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
                .collect(),
        };
        Self::new(parameter, values)
    }

    /// `points` log-spaced values from `start` to `stop` inclusive (both > 0).
    pub fn logspace(
        parameter: SweepParameter,
        start: f64,
        stop: f64,
        points: usize,
    ) -> Result<Self, ScenarioError> {
        if !(start > 0.0 && stop > 0.0) {
            return Err(ScenarioError::Invalid("log grid bounds must be > 0".into()));
        }
        let axis = Self::linspace(parameter, start.ln(), stop.ln(), points)?;
        Self::new(parameter, axis.values.iter().map(|v| v.exp()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn new(base: Scenario, axes: Vec<SweepAxis>) -> Result<Self, ScenarioError> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(ScenarioError::Invalid(format!(
                "a sweep takes one or two axes, got {}",
                axes.len()
            )));
        }
        if axes.len() == 2 && axes[0].parameter == axes[1].parameter {
            return Err(ScenarioError::Invalid("both axes sweep the same parameter".into()));
        }
        Ok(Self { base, axes })
    }

    /// Grid points in row-major order (first axis outermost).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    fn evaluate(&self, point: &[f64]) -> Result<StationaryReport, ScenarioError> {
        let mut s = self.base.clone();
        for (axis, &v) in self.axes.iter().zip(point) {
            s = axis.parameter.apply(&s, v)?;
        }
        s.stationary()
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: Vec<f64>,
    pub outcome: Result<StationaryReport, String>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub parameters: Vec<SweepParameter>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn header(&self) -> Vec<String> {
        self.parameters
            .iter()
            .map(|p| p.name().to_string())
            .chain(REPORT_CSV_HEADER.iter().map(|s| s.to_string()))
            .chain(std::iter::once("error".to_string()))
            .collect()
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut rec: Vec<String> = row.point.iter().map(|v| format_float(*v)).collect();
            match &row.outcome {
                Ok(rep) => {
                    rec.extend(rep.csv_fields());
                    rec.push(String::new());
                }
                Err(msg) => {
                    rec.extend(std::iter::repeat_n(String::new(), REPORT_CSV_HEADER.len()));
                    rec.push(msg.clone());
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the stationary report at every grid point. Points run
/// concurrently (up to `workers` threads) and come back in grid order; a
/// failing point is recorded in its row and the sweep carries on.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> SweepTable {
    let points = spec.points();
    let outcomes = with_workers(workers, || {
        map_ordered(&points, |p| spec.evaluate(p).map_err(|e| e.to_string()))
    });
    SweepTable {
        parameters: spec.axes.iter().map(|a| a.parameter).collect(),
        rows: points
            .into_iter()
            .zip(outcomes)
            .map(|(point, outcome)| SweepRow { point, outcome })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::Couplings;
    use crate::spectral::OccupationSpectrum;

    fn base() -> Scenario {
        let atom = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::uniform(1.0)).unwrap();
        let spectra = Spectra::shared(
            OccupationSpectrum::per_frequency(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 2.5)]).unwrap(),
        );
        Scenario::new(
            atom,
            spectra,
            AtomState::ground(),
            IntegrationControls::new(10.0),
            1e-8,
        )
        .unwrap()
    }

    #[test]
    fn missing_frequency_fails_validation() {
        let atom = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::uniform(1.0)).unwrap();
        let spectra = Spectra::shared(OccupationSpectrum::per_frequency(vec![(1.0, 1.0)]).unwrap());
        let err = Scenario::new(
            atom,
            spectra,
            AtomState::ground(),
            IntegrationControls::new(1.0),
            1e-8,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "undefined-frequency");
        assert_eq!(err.class(), FailureClass::Validation);
    }

    #[test]
    fn zero_time_simulation_skips_stationarity() {
        let mut s = base();
        s.controls.t_end = 0.0;
        let sim = s.simulate().unwrap();
        assert_eq!(sim.trajectory.samples.len(), 1);
        assert!(sim.summary.to_key_value().starts_with("stationarity=not evaluated\n"));
    }

    #[test]
    fn grid_validation() {
        let p = SweepParameter::Beta(Transition::T31);
        assert!(SweepAxis::new(p, vec![]).is_err());
        assert!(SweepAxis::new(p, vec![1.0, 1.0]).is_err());
        assert!(SweepAxis::new(p, vec![1.0, 2.0, 1.5]).is_err());
        assert!(SweepAxis::new(p, vec![3.0, 2.0, 1.0]).is_ok());
        let ax = SweepAxis::logspace(SweepParameter::LrScale, 1e-6, 1.0, 7).unwrap();
        assert!((ax.values[0] - 1e-6).abs() < 1e-20);
        assert!((ax.values[6] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn parameters_round_trip_names() {
        for name in ["beta21", "beta31", "beta32", "kappa21", "kappa31", "kappa32", "lr_scale"] {
            assert_eq!(SweepParameter::parse(name).unwrap().name(), name);
        }
        assert!(SweepParameter::parse("beta").is_none());
    }

    #[test]
    fn two_axis_grid_is_row_major() {
        let spec = SweepSpec::new(
            base(),
            vec![
                SweepAxis::new(SweepParameter::Beta(Transition::T31), vec![2.0, 2.5]).unwrap(),
                SweepAxis::new(SweepParameter::Kappa(Transition::T21), vec![0.5, 1.0, 2.0]).unwrap(),
            ],
        )
        .unwrap();
        let pts = spec.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0], vec![2.0, 0.5]);
        assert_eq!(pts[2], vec![2.0, 2.0]);
        assert_eq!(pts[3], vec![2.5, 0.5]);
    }

    #[test]
    fn failing_points_are_recorded_not_fatal() {
        let spec = SweepSpec::new(
            base(),
            vec![SweepAxis::new(SweepParameter::Beta(Transition::T31), vec![-1.0, 2.0]).unwrap()],
        )
        .unwrap();
        let table = run_sweep(&spec, Some(2));
        assert!(table.rows[0].outcome.as_ref().unwrap_err().contains("nonpositive-beta"));
        assert!(table.rows[1].outcome.is_ok());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("beta31,P1,P2,P3,"));
        assert!(lines[0].ends_with(",balance_class,error"));
        assert!(lines[1].contains("nonpositive-beta"));
        assert!(lines[2].ends_with("distorted-balance,"));
    }

    #[test]
    fn beta_override_keeps_spectra_shared() {
        let s = SweepParameter::Beta(Transition::T31).apply(&base(), 2.9).unwrap();
        assert!(s.spectra.is_shared());
        assert_eq!(s.check().unwrap().beta_form, Some(true));
        let s = SweepParameter::Beta(Transition::T31).apply(&base(), 3.1).unwrap();
        assert_eq!(s.check().unwrap().beta_form, Some(false));
    }
}
