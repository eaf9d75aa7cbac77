use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the formula.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("fit failed: {0}")]
    FitFailure(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    /// Qubit and resonator are resonant (or straddle), so dispersive formulas
    /// do not apply.
    #[error("dispersive approximation invalid: {0}")]
    StraddlingResonance(String),
    #[error("outside the capacitive branch: {0}")]
    Branch(String),
    #[error("no sensitivity to the junction/load: {0}")]
    NoSensitivity(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Non-fatal conditions attached to a result.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// Charge-basis eigenvalues still moved by more than the tolerance when the
    /// basis was doubled.
    NotConverged { n_max: usize, shift_ghz: f64 },
    /// E_J/E_C below the transmon regime.
    LowRatio { ratio: f64 },
    /// S21 span covers fewer than three linewidths.
    NarrowSpan { linewidths: f64 },
    /// Ramsey trace shows fewer than two oscillation periods.
    FewOscillations { cycles: f64 },
    /// Extracted loss tangent is negative: the assumed background loss exceeds
    /// the measured total.
    NegativeLossTangent { value: f64 },
    /// Internal quality factor from the circle fit is non-physical
    /// (1/Qi < 0).
    NegativeInternalLoss,
    /// Reduced chi-squared well above one.
    LargeResiduals { reduced_chi2: f64 },
    /// Fit-derived value disagrees with the reference value it is compared to.
    Inconsistent { quantity: &'static str, computed: f64, listed: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::NotConverged { n_max, shift_ghz } => {
                write!(f, "charge basis not converged at n_max={n_max} (shift {shift_ghz:.3e} GHz)")
            }
            Warning::LowRatio { ratio } => write!(f, "E_J/E_C = {ratio:.2} is below the transmon regime"),
            Warning::NarrowSpan { linewidths } => {
                write!(f, "span covers only {linewidths:.2} linewidths")
            }
            Warning::FewOscillations { cycles } => {
                write!(f, "only {cycles:.2} oscillation periods; detuning poorly conditioned")
            }
            Warning::NegativeLossTangent { value } => {
                write!(f, "negative loss tangent {value:.3e}; background-loss assumption inconsistent")
            }
            Warning::NegativeInternalLoss => write!(f, "1/Qi < 0 from fitted Ql, Qc, phi0"),
            Warning::LargeResiduals { reduced_chi2 } => {
                write!(f, "large residuals (reduced chi2 = {reduced_chi2:.2})")
            }
            Warning::Inconsistent { quantity, computed, listed } => {
                write!(f, "{quantity}: computed {computed:.4} vs listed {listed:.4}")
            }
        }
    }
}

/// A value with the warnings raised while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Flagged<T> {
    pub fn clean(value: T) -> Self {
        Self { value, warnings: Vec::new() }
    }

    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}
