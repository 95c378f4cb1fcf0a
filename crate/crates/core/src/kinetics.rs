//! Rate equations for the atomic populations, photon fluxes and the energy ledger,
//! integrated with fixed-step classical RK4.
//!
//! Photon numbers are stored as deviations from `t = 0`; the absolute photon
//! number of a field with nonzero occupation over all modes is infinite, only
//! its rate of change is meaningful.

use std::io;

use log::debug;
use thiserror::Error;

use crate::atom::ThreeLevelAtom;
use crate::spectral::{rates, RateSet, SpectralError, Spectra, Transition::*};

/// Allowed deviation of `P1 + P2 + P3` from one.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// `dt * max_exit_rate` must stay below this.
pub const STABILITY_LIMIT: f64 = 0.5;

/// Default step as a fraction of the fastest exit time.
pub const DEFAULT_STEP_FRACTION: f64 = 0.01;

pub const TRAJECTORY_HEADER: [&str; 11] = [
    "t", "P1", "P2", "P3", "dn_lr", "dn_ud", "f21", "f31", "f32", "E_atom", "E_field_delta",
];

#[derive(Debug, Error)]
pub enum KineticsError {
    #[error("unstable-step: dt={dt} times max exit rate {max_exit_rate} is not below {STABILITY_LIMIT}")]
    UnstableStep { dt: f64, max_exit_rate: f64 },
    #[error("invalid-initial-state: {0}")]
    InvalidInitialState(String),
    #[error("invalid-controls: {0}")]
    InvalidControls(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Populations `(P1, P2, P3)` on the probability simplex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomState([f64; 3]);

impl AtomState {
    pub fn new(p: [f64; 3]) -> Result<Self, KineticsError> {
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KineticsError::InvalidInitialState(format!(
                "populations must be finite and >= 0, got {p:?}"
            )));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(KineticsError::InvalidInitialState(format!(
                "populations must sum to 1, got {sum}"
            )));
        }
        Ok(Self(p))
    }

    /// Rescales nonnegative weights onto the simplex.
    pub fn normalized(w: [f64; 3]) -> Result<Self, KineticsError> {
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) || w.iter().any(|v| *v < 0.0) {
            return Err(KineticsError::InvalidInitialState(format!(
                "cannot normalize weights {w:?}"
            )));
        }
        Ok(Self(w.map(|v| v / sum)))
    }

    pub fn ground() -> Self {
        Self([1.0, 0.0, 0.0])
    }

    pub fn populations(&self) -> [f64; 3] {
        self.0
    }

    pub fn p(&self, level: usize) -> f64 {
        self.0[level - 1]
    }

    /// Internal constructor for integrator output; invariants are checked by the caller.
    pub(crate) fn from_raw(p: [f64; 3]) -> Self {
        Self(p)
    }
}

/// Population generator `M` with `dP/dt = M P`, factor 2 included.
pub fn generator(rates: &RateSet) -> [[f64; 3]; 3] {
    let (m21, m31, m32) = (rates.minus(T21), rates.minus(T31), rates.minus(T32));
    let (p21, p31, p32) = (rates.plus(T21), rates.plus(T31), rates.plus(T32));
    [
        [-2.0 * (p21 + p31), 2.0 * m21, 2.0 * m31],
        [2.0 * p21, -2.0 * (m21 + p32), 2.0 * m32],
        [2.0 * p31, 2.0 * p32, -2.0 * (m32 + m31)],
    ]
}

/// Right-hand side of the population rate equations.
pub fn rhs(state: &AtomState, rates: &RateSet) -> [f64; 3] {
    derivative(&state.0, rates)
}

fn derivative(p: &[f64; 3], r: &RateSet) -> [f64; 3] {
    let [p1, p2, p3] = *p;
    let (m21, m31, m32) = (r.minus(T21), r.minus(T31), r.minus(T32));
    let (p21, p31, p32) = (r.plus(T21), r.plus(T31), r.plus(T32));
    [
        -2.0 * (p21 * p1 + p31 * p1) + 2.0 * (m21 * p2 + m31 * p3),
        -2.0 * (m21 * p2 + p32 * p2) + 2.0 * (m32 * p3 + p21 * p1),
        -2.0 * (m32 * p3 + m31 * p3) + 2.0 * (p31 * p1 + p32 * p2),
    ]
}

fn transition_fluxes(p: &[f64; 3], r: &RateSet) -> [f64; 3] {
    let [p1, p2, p3] = *p;
    [
        2.0 * (r.minus(T21) * p2 - r.plus(T21) * p1),
        2.0 * (r.minus(T31) * p3 - r.plus(T31) * p1),
        2.0 * (r.minus(T32) * p3 - r.plus(T32) * p2),
    ]
}

/// Instantaneous photon and energy flows. Positive `f` means net emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxRecord {
    pub f21: f64,
    pub f31: f64,
    pub f32: f64,
    pub dn_lr: f64,
    pub dn_ud: f64,
    pub atom_energy_rate: f64,
    pub field_energy_rate: f64,
}

pub fn fluxes(state: &AtomState, rates: &RateSet, atom: &ThreeLevelAtom) -> FluxRecord {
    let [f21, f31, f32] = transition_fluxes(&state.0, rates);
    let dp = derivative(&state.0, rates);
    let w = atom.bohr_frequencies();
    FluxRecord {
        f21,
        f31,
        f32,
        dn_lr: f21,
        dn_ud: f31 + f32,
        atom_energy_rate: atom.mean_energy(&dp),
        field_energy_rate: w.w21 * f21 + w.w31 * f31 + w.w32 * f32,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControls {
    /// Step size; `None` selects `DEFAULT_STEP_FRACTION / max_exit_rate`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Keep every n-th step. The first and last samples are always kept.
    pub sample_every: usize,
}

impl IntegrationControls {
    pub fn new(t_end: f64) -> Self {
        Self {
            dt: None,
            t_end,
            sample_every: 1,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_sample_every(mut self, n: usize) -> Self {
        self.sample_every = n;
        self
    }
}

/// Step size the integrator will use for these rates when none is given.
pub fn default_dt(rates: &RateSet) -> f64 {
    let max_exit = rates.max_exit_rate();
    if max_exit > 0.0 {
        DEFAULT_STEP_FRACTION / max_exit
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: AtomState,
    pub dn_lr: f64,
    pub dn_ud: f64,
    pub flux: FluxRecord,
    pub e_atom: f64,
    /// Energy delivered to the field since `t = 0`.
    pub e_field_delta: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub rates: RateSet,
    /// Step size actually used (may be slightly below the requested one so
    /// that the last step lands on `t_end`).
    pub step: f64,
    pub steps: usize,
    /// Largest simplex renormalization applied during the run.
    pub max_renormalization: f64,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    /// `max |E_atom(t) + dE_field(t) - E_atom(0)|` over the recorded samples.
    pub fn max_energy_violation(&self) -> f64 {
        let e0 = self.first().e_atom;
        self.samples
            .iter()
            .map(|s| (s.e_atom + s.e_field_delta - e0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |P1 + P2 + P3 - 1|` over the recorded samples.
    pub fn max_simplex_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| (s.state.0.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), KineticsError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(TRAJECTORY_HEADER)?;
        for s in &self.samples {
            let [p1, p2, p3] = s.state.0;
            let row = [
                s.t,
                p1,
                p2,
                p3,
                s.dn_lr,
                s.dn_ud,
                s.flux.f21,
                s.flux.f31,
                s.flux.f32,
                s.e_atom,
                s.e_field_delta,
            ];
            w.write_record(row.iter().map(|v| format_float(*v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Integrates the populations together with the photon and field-energy ledgers.
pub fn integrate(
    atom: &ThreeLevelAtom,
    spectra: &Spectra,
    initial: AtomState,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, KineticsError> {
    let r = rates(atom, spectra)?;
    integrate_rates(atom, &r, initial, &IntegrationControls::new(t_end).with_dt(dt))
}

/// Same as [`integrate`] for precomputed rates.
pub fn integrate_rates(
    atom: &ThreeLevelAtom,
    rates: &RateSet,
    initial: AtomState,
    controls: &IntegrationControls,
) -> Result<Trajectory, KineticsError> {
    let t_end = controls.t_end;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(KineticsError::InvalidControls(format!(
            "t_end must be finite and >= 0, got {t_end}"
        )));
    }
    if controls.sample_every == 0 {
        return Err(KineticsError::InvalidControls("sample_every must be >= 1".into()));
    }
    let dt = controls.dt.unwrap_or_else(|| default_dt(rates));
    if !(dt.is_finite() && dt > 0.0) {
        return Err(KineticsError::InvalidControls(format!(
            "dt must be finite and > 0, got {dt}"
        )));
    }
    let max_exit = rates.max_exit_rate();
    if !(dt * max_exit < STABILITY_LIMIT) {
        return Err(KineticsError::UnstableStep {
            dt,
            max_exit_rate: max_exit,
        });
    }
    // recheck so direct construction through from_raw never slips through
    let initial = AtomState::new(initial.0)?;

    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { dt } else { t_end / steps as f64 };
    let w = atom.bohr_frequencies();

    // augmented state: P1, P2, P3, dn_lr, dn_ud, E_field_delta
    let deriv = |y: &[f64; 6]| -> [f64; 6] {
        let p = [y[0], y[1], y[2]];
        let dp = derivative(&p, rates);
        let [f21, f31, f32] = transition_fluxes(&p, rates);
        [
            dp[0],
            dp[1],
            dp[2],
            f21,
            f31 + f32,
            w.w21 * f21 + w.w31 * f31 + w.w32 * f32,
        ]
    };
    let sample_at = |t: f64, y: &[f64; 6]| -> Sample {
        let state = AtomState([y[0], y[1], y[2]]);
        Sample {
            t,
            state,
            dn_lr: y[3],
            dn_ud: y[4],
            flux: fluxes(&state, rates, atom),
            e_atom: atom.mean_energy(&state.0),
            e_field_delta: y[5],
        }
    };

    let p0 = initial.0;
    let mut y = [p0[0], p0[1], p0[2], 0.0, 0.0, 0.0];
    let mut samples = Vec::with_capacity(steps / controls.sample_every + 2);
    samples.push(sample_at(0.0, &y));
    let mut max_renorm: f64 = 0.0;

    for k in 1..=steps {
        let k1 = deriv(&y);
        let k2 = deriv(&axpy(&y, 0.5 * h, &k1));
        let k3 = deriv(&axpy(&y, 0.5 * h, &k2));
        let k4 = deriv(&axpy(&y, h, &k3));
        for i in 0..6 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let sum = y[0] + y[1] + y[2];
        let drift = sum - 1.0;
        if drift.abs() > SIMPLEX_TOL {
            debug!("renormalizing populations at step {k}: sum drifted by {drift:e}");
            max_renorm = max_renorm.max(drift.abs());
            for v in &mut y[..3] {
                *v /= sum;
            }
        }
        if k % controls.sample_every == 0 || k == steps {
            samples.push(sample_at(k as f64 * h, &y));
        }
    }

    Ok(Trajectory {
        samples,
        rates: *rates,
        step: h,
        steps,
        max_renormalization: max_renorm,
    })
}

fn axpy(y: &[f64; 6], a: f64, x: &[f64; 6]) -> [f64; 6] {
    let mut out = *y;
    for i in 0..6 {
        out[i] += a * x[i];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stationarity {
    pub reached: bool,
    pub state: AtomState,
    /// `||dP/dt||_inf` at the final sample.
    pub residual: f64,
}

/// True iff `||dP/dt||_inf < tol` at the last sample.
pub fn stationarity_reached(traj: &Trajectory, tol: f64) -> Stationarity {
    let state = traj.last().state;
    let residual = rhs(&state, &traj.rates)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Stationarity {
        reached: residual < tol,
        state,
        residual,
    }
}

/// Integrates in chunks of `chunk` time units until the residual drops below
/// `tol` or `max_time` is exceeded. Only the final sample is kept per chunk.
pub fn relax_to_stationary(
    atom: &ThreeLevelAtom,
    rates: &RateSet,
    initial: AtomState,
    tol: f64,
    chunk: f64,
    max_time: f64,
) -> Result<(Stationarity, f64), KineticsError> {
    let mut state = initial;
    let mut t = 0.0;
    loop {
        let controls = IntegrationControls::new(chunk).with_sample_every(usize::MAX);
        let traj = integrate_rates(atom, rates, state, &controls)?;
        t += chunk;
        let st = stationarity_reached(&traj, tol);
        // the integrator keeps the sum within SIMPLEX_TOL, so re-entry is safe
        state = AtomState::normalized(st.state.0)?;
        if st.reached || t >= max_time {
            return Ok((st, t));
        }
    }
}
