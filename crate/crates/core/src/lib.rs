//! Simulation and analysis of polarization entanglement produced by converting
//! the spatial correlation of two-slit SPDC photon pairs in a modified
//! polarization Michelson interferometer.
//!
//! The crate is layered bottom-up:
//!
//! * [`modes`]: single-photon mode space (polarization x path) and the
//!   exchange-symmetric two-photon state.
//! * [`elements`]: unitary optical elements acting on one photon, lifted to
//!   the pair.
//! * [`apparatus`]: the full source + interferometer model, including the
//!   filter-limited temporal overlap envelope.
//! * [`detection`]: analyzer projections and Poisson count simulation.
//! * [`analysis`]: fringe fitting and the CHSH estimator.
//! * [`io`]: JSON/CSV artifacts shared by the CLI and the Python bindings.
//! * [`cli`]: the `polconv` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod apparatus;
pub mod cli;
pub mod detection;
pub mod elements;
mod error;
pub mod io;
pub mod modes;

pub use error::{Error, Result};

pub use analysis::{ChshResult, FringeFit, FringeKind, FringeScan};
pub use apparatus::{ApparatusConfig, EffectiveSource, FilterShape, FilterSpec};
pub use detection::{AnalyzerSetting, CountRecord, ScanRow, ScanTable};
pub use elements::OpticalElement;
pub use modes::{PathMode, PathSet, Polarization, SingleMode, TwoPhotonState};
