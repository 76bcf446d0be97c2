//! Monte-Carlo simulator and analytical toolkit for the E91 quantum key
//! distribution protocol, focused on the detection loophole: a classical
//! pulsed source aimed at threshold detectors can fake maximal CHSH violation
//! on the post-selected coincidences, and a local polarimeter-based
//! fair-sampling test catches it.
//!
//! The crate is organised in layers:
//!
//! * [`optics`] — angles, pulses, Malus-law beamsplitting, detector response;
//! * [`source`] / [`station`] — emission models and the four-detector
//!   measurement station;
//! * [`session`] / [`engine`] — session configuration and the deterministic
//!   parallel round loop;
//! * [`analysis`] / [`stats`] — CHSH, QBER, double-count and fair-sampling
//!   estimators over integer tallies;
//! * [`analytics`] — closed-form and quadrature predictions used as oracles;
//! * [`presets`] — named ready-made scenarios behind a runtime registry.

pub mod analysis;
pub mod analytics;
pub mod engine;
pub mod error;
pub mod optics;
pub mod presets;
pub mod quadrature;
pub mod session;
pub mod source;
pub mod station;
pub mod stats;

pub use analysis::{
    compute_qber, double_count_rate, estimate_chsh, fair_sampling_test, ChshEstimate,
    DoubleCountReport, FairSamplingVerdict, LoopholeReport, QberEstimate, Verdict,
};
pub use engine::{run_session, run_session_recorded, scan_single_station};
pub use error::{Error, Result};
pub use optics::{cascaded_energy, split_pulse, Angle, DetectorModel, Pulse};
pub use presets::{PresetOverrides, ScenarioPreset};
pub use session::{FairSamplingConfig, SessionConfig};
pub use source::{emit, Emission, SourceModel};
pub use station::{StationConfig, StationOutcome, StationRole};
pub use stats::{PolarimeterMode, RoundRecord, SessionLayout, SessionStats, Tallies};
