//! Minimally-invasive safety filter for a single slab constraint.
//!
//! `min |u - u0|^2  s.t.  lower <= a u <= upper` is solved in closed form: the
//! minimizer is either `u0` itself or its orthogonal projection onto whichever
//! bounding hyperplane `a u0` overshoots.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::barrier::{ConstraintSlab, ControlInput};
use crate::error::{ensure_finite, CbfError, Result};

/// Which case of the closed-form solution produced `u*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActiveBranch {
    /// `a u0` already inside the slab.
    Nominal,
    /// Projected onto `a u = upper`.
    UpperClamped,
    /// Projected onto `a u = lower`.
    LowerClamped,
    /// `|a|` below tolerance: the input has no authority, `u0` is passed through.
    ZeroLg,
}

impl ActiveBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActiveBranch::Nominal => "nominal",
            ActiveBranch::UpperClamped => "upper_clamped",
            ActiveBranch::LowerClamped => "lower_clamped",
            ActiveBranch::ZeroLg => "zero_lg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nominal" => Some(ActiveBranch::Nominal),
            "upper_clamped" => Some(ActiveBranch::UpperClamped),
            "lower_clamped" => Some(ActiveBranch::LowerClamped),
            "zero_lg" => Some(ActiveBranch::ZeroLg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    pub u_star: ControlInput,
    pub active: ActiveBranch,
    /// `|u* - u0|`
    pub correction_norm: f64,
}

impl FilterResult {
    fn pass_through(u0: &ControlInput, active: ActiveBranch) -> Self {
        Self {
            u_star: u0.clone(),
            active,
            correction_norm: 0.0,
        }
    }
}

/// Absolute floor of the zero-authority threshold.
pub const BASE_EPS: f64 = 1e-10;

/// Zero-authority threshold scaled to the row `a`: `1e-10 (1 + max|a_j|)`.
pub fn default_eps(a: &DVector<f64>) -> f64 {
    BASE_EPS * (1.0 + a.amax())
}

/// Closed-form minimizer of `|u - u0|` over the slab.
///
/// Errors with [`CbfError::InfeasibleSlab`] when `lower > upper` while `|a| >= eps`;
/// for a valid constant-sum pair with linear class-K functions this never happens.
pub fn solve_closed_form(slab: &ConstraintSlab, u0: &ControlInput, eps: f64) -> Result<FilterResult> {
    validate(slab, u0, eps)?;
    let a = &slab.a;
    let a_norm2 = a.norm_squared();
    if a_norm2.sqrt() < eps {
        return Ok(FilterResult::pass_through(u0, ActiveBranch::ZeroLg));
    }
    if slab.lower > slab.upper {
        return Err(CbfError::InfeasibleSlab {
            lower: slab.lower,
            upper: slab.upper,
            a_norm: a_norm2.sqrt(),
        });
    }
    let s = a.dot(&u0.0);
    let (target, active) = if s > slab.upper {
        (slab.upper, ActiveBranch::UpperClamped)
    } else if s < slab.lower {
        (slab.lower, ActiveBranch::LowerClamped)
    } else {
        return Ok(FilterResult::pass_through(u0, ActiveBranch::Nominal));
    };
    let correction = a * ((target - s) / a_norm2);
    let correction_norm = correction.norm();
    let u_star = &u0.0 + correction;
    ensure_finite("filtered input", u_star.as_slice())?;
    Ok(FilterResult {
        u_star: ControlInput(u_star),
        active,
        correction_norm,
    })
}

/// Standard single-constraint filter `a u >= lower` (no upper side).
///
/// This is the filter used with a lone barrier; as `|a| -> 0` with a positive
/// required correction the returned input grows without bound.
pub fn solve_one_sided(
    a: &DVector<f64>,
    lower: f64,
    u0: &ControlInput,
    eps: f64,
) -> Result<FilterResult> {
    if a.len() != u0.len() {
        return Err(CbfError::Config(format!(
            "constraint row has length {} but input has length {}",
            a.len(),
            u0.len()
        )));
    }
    ensure_finite("constraint row", a.as_slice())?;
    ensure_finite("lower bound", &[lower])?;
    ensure_finite("nominal input", u0.as_slice())?;
    let a_norm2 = a.norm_squared();
    if a_norm2.sqrt() < eps {
        return Ok(FilterResult::pass_through(u0, ActiveBranch::ZeroLg));
    }
    let deficit = lower - a.dot(&u0.0);
    if deficit <= 0.0 {
        return Ok(FilterResult::pass_through(u0, ActiveBranch::Nominal));
    }
    let correction = a * (deficit / a_norm2);
    let correction_norm = correction.norm();
    Ok(FilterResult {
        u_star: ControlInput(&u0.0 + correction),
        active: ActiveBranch::LowerClamped,
        correction_norm,
    })
}

/// `upper - lower`; nonnegative values certify that both barrier conditions can
/// be met by one input at this state.
pub fn feasibility_gap(slab: &ConstraintSlab) -> f64 {
    slab.upper - slab.lower
}

/// Runtime validity monitor: where the input has no authority (`|a| < eps`),
/// zero must lie inside the slab, i.e. both barrier conditions hold with `u`
/// contributing nothing.
pub fn zero_lg_consistency(slab: &ConstraintSlab, eps: f64) -> bool {
    slab.a.norm() >= eps || (slab.lower <= 0.0 && 0.0 <= slab.upper)
}

/// One-sided counterpart of [`zero_lg_consistency`] for a lone barrier.
pub fn zero_lg_consistency_one_sided(a: &DVector<f64>, lower: f64, eps: f64) -> bool {
    a.norm() >= eps || lower <= 0.0
}

fn validate(slab: &ConstraintSlab, u0: &ControlInput, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(CbfError::Parameter(format!("eps must be positive, got {eps}")));
    }
    if slab.a.len() != u0.len() {
        return Err(CbfError::Config(format!(
            "slab row has length {} but input has length {}",
            slab.a.len(),
            u0.len()
        )));
    }
    ensure_finite("slab row", slab.a.as_slice())?;
    ensure_finite("slab bounds", &[slab.lower, slab.upper])?;
    ensure_finite("nominal input", u0.as_slice())
}
