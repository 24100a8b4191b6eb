use thiserror::Error;

pub type Result<T> = std::result::Result<T, CbfError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CbfError {
    /// Dimensions or settings that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A NaN or infinity showed up where a finite number was required.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// The caller asked for something that makes no sense (empty sample set etc).
    #[error("usage error: {0}")]
    Usage(String),

    /// A scalar parameter outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The two-sided input constraint is empty while the input still has authority.
    #[error("infeasible slab: lower {lower} > upper {upper} with |a| = {a_norm}")]
    InfeasibleSlab { lower: f64, upper: f64, a_norm: f64 },

    /// The initial condition is not strictly inside both barrier sets.
    #[error("initial condition not strictly interior: h = {h}, b - h = {hbar} (level {level})")]
    NotInterior { level: usize, h: f64, hbar: f64 },
}

pub(crate) fn ensure_finite(what: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CbfError::NumericalDomain(format!("{what} has non-finite entries")))
    }
}
