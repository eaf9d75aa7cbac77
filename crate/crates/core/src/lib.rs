//! Design and analysis toolkit for merged-element transmons (METs) built from
//! vertical van der Waals Josephson junctions.
//!
//! The crate is organised by task:
//!
//! - [`qubit`]: transmon energy scales and spectra (asymptotic and exact
//!   charge-basis), charge dispersion, SQUID tuning.
//! - [`design`]: junction geometry to qubit parameters, readout coupling and the
//!   layer-count sensitivity chart.
//! - [`loss`]: lifetime <-> loss-tangent conversion and the spin-boson
//!   temperature dependence of T1.
//! - [`resonator`]: notch-resonator circle fitting and capacitively terminated
//!   resonator loss-tangent extraction.
//! - [`timedomain`]: T1 / Ramsey / echo / Rabi chevron fitters and lifetime
//!   statistics.
//! - [`synth`]: seeded forward-model generators used as fitter oracles.
//! - [`io`]: CSV and sidecar formats shared by the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod design;
mod error;
pub mod io;
pub mod loss;
pub mod lsq;
pub mod qubit;
pub mod resonator;
pub mod synth;
pub mod tables;
pub mod timedomain;

pub use error::{Error, Flagged, Result, Warning};
