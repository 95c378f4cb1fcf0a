//! Kinetics of a three-level atom driven by a polarized, non-equilibrium
//! radiation field.
//!
//! The field is described per polarization by an occupation spectrum
//! `N(omega) = 1/(exp(beta(omega)) - 1)`. The ↔ field couples levels 1 and 2,
//! the ↕ field couples 1–3 and 2–3. From the spectra and per-transition
//! couplings the crate builds emission/absorption rates, integrates the
//! population rate equations together with photon-number and energy ledgers,
//! and solves for the stationary state. When `beta` is not linear in `omega`
//! the stationary atom can keep emitting ↔ photons while the ↕ photon number
//! stays constant: a distorted-balance state rather than detailed balance.
//!
//! ```
//! use distorted_balance::prelude::*;
//!
//! let atom = ThreeLevelAtom::new([0.0, 1.0, 3.0], Couplings::uniform(1.0)).unwrap();
//! let field = OccupationSpectrum::per_frequency(vec![(1.0, 1.0), (2.0, 2.0), (3.0, 2.5)]).unwrap();
//! let report = analyze(&atom, &Spectra::shared(field)).unwrap();
//! assert!(report.condition_rate_form && report.emission_rate > 0.0);
//! ```

pub mod atom;
pub mod batch;
pub mod kinetics;
pub mod scenario;
pub mod spectral;
pub mod stationary;

pub mod prelude {
    pub use crate::atom::{validate, AtomDiagnostic, AtomError, BohrFrequencies, Couplings, ThreeLevelAtom};
    pub use crate::kinetics::{
        fluxes, integrate, integrate_rates, relax_to_stationary, rhs, stationarity_reached, AtomState,
        FluxRecord, IntegrationControls, KineticsError, Sample, Stationarity, Trajectory,
    };
    pub use crate::scenario::{
        run_sweep, FailureClass, Scenario, ScenarioError, SweepAxis, SweepParameter, SweepSpec, SweepTable,
    };
    pub use crate::spectral::{
        rates, OccupationSpectrum, Polarization, RateSet, SpectralError, Spectra, SpectrumKind, Transition,
    };
    pub use crate::stationary::{
        analyze, analyze_scaled, double_einstein_from_occupations, double_einstein_limit, emission_condition,
        emission_condition_beta, emission_condition_beta_values, emission_condition_sides,
        stationary_closed_form, stationary_null_space, BalanceClass, Ratios, StationaryError,
        StationaryReport,
    };
}
