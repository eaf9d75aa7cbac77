//! Notch-type resonator analysis: circle fitting of S21 and loss-tangent
//! extraction from a capacitively terminated resonator compared with an
//! open-ended reference.

mod batch;
mod circle;
mod notch;
mod terminated;

pub use batch::{sweep_batch, BatchRow, TracePair};
pub use circle::{circle_fit, NotchFit, NotchErrors};
pub use notch::NotchParams;
pub use terminated::{
    extract, load_reactance_from_shift, max_participation, participation_from_freqs, q_term_from_loss, tand_from_q,
    terminated_frequency, LoadReactance, TerminatedExtraction,
};

use num_complex::Complex64;

use crate::{Error, Result};

/// Minimum number of samples accepted in a trace.
pub const MIN_TRACE_POINTS: usize = 50;

/// Complex transmission versus frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct S21Trace {
    /// Hz, strictly ascending.
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub power_dbm: Option<f64>,
    pub temp_k: Option<f64>,
}

impl S21Trace {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} frequencies but {} S21 samples",
                freqs.len(),
                values.len()
            )));
        }
        if freqs.len() < MIN_TRACE_POINTS {
            return Err(Error::InsufficientData(format!(
                "S21 trace needs >= {MIN_TRACE_POINTS} points, got {}",
                freqs.len()
            )));
        }
        if freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("frequencies must be strictly ascending".into()));
        }
        Ok(Self { freqs, values, power_dbm: None, temp_k: None })
    }

    pub fn with_conditions(mut self, power_dbm: Option<f64>, temp_k: Option<f64>) -> Self {
        self.power_dbm = power_dbm;
        self.temp_k = temp_k;
        self
    }

    pub fn span(&self) -> f64 {
        self.freqs[self.freqs.len() - 1] - self.freqs[0]
    }
}
