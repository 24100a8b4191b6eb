//! Independent reference computations for the test suites and `pcbf validate`.
//!
//! The slab projection here never uses the closed-form filter. It enumerates the
//! possible active sets of `min |u - u0|^2 s.t. lower <= a u <= upper` (none,
//! upper face, lower face), solves each equality-constrained candidate through
//! its KKT linear system, and keeps the feasible candidate closest to `u0`.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::barrier::{BarrierField, State};
use crate::error::{CbfError, Result};

/// Perturbations drawn per oracle call.
pub const PERTURBATION_SAMPLES: usize = 1000;
/// Radius of the perturbation ball around the minimizer.
pub const PERTURBATION_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub label: &'static str,
    pub u: DVector<f64>,
    pub feasible: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub candidates: Vec<Candidate>,
    pub minimizer: DVector<f64>,
    /// `0.5 |u - u0|^2` at the minimizer.
    pub objective: f64,
    /// Largest objective decrease found among feasible perturbations; `<= 0` certifies local optimality.
    pub certificate: f64,
    pub feasible_perturbations: usize,
}

fn objective(u: &DVector<f64>, u0: &DVector<f64>) -> f64 {
    0.5 * (u - u0).norm_squared()
}

fn feasible(a: &DVector<f64>, lower: f64, upper: f64, u: &DVector<f64>, tol: f64) -> bool {
    let s = a.dot(u);
    s >= lower - tol && s <= upper + tol
}

/// Minimizer of `0.5 |u - u0|^2` subject to `a u = target`, from the KKT system
/// `[I a; a^T 0] [u; mu] = [u0; target]`.
fn equality_candidate(a: &DVector<f64>, target: f64, u0: &DVector<f64>) -> Option<DVector<f64>> {
    let m = a.len();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    kkt.view_mut((0, 0), (m, m)).fill_with_identity();
    kkt.view_mut((0, m), (m, 1)).copy_from(a);
    kkt.view_mut((m, 0), (1, m)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(m + 1);
    rhs.rows_mut(0, m).copy_from(u0);
    rhs[m] = target;
    let sol = kkt.lu().solve(&rhs)?;
    Some(sol.rows(0, m).into_owned())
}

/// Projection of `u0` onto the slab by active-set enumeration, plus a random
/// perturbation certificate seeded by `seed`.
pub fn project_onto_slab_oracle(
    a: &DVector<f64>,
    lower: f64,
    upper: f64,
    u0: &DVector<f64>,
    seed: u64,
) -> Result<OracleReport> {
    if a.len() != u0.len() {
        return Err(CbfError::Config("oracle: row and input lengths differ".into()));
    }
    let scale = 1.0 + lower.abs().max(upper.abs());
    let tol = 1e-12 * scale;
    let zero_row = a.iter().all(|v| *v == 0.0);
    if !zero_row && lower > upper {
        return Err(CbfError::InfeasibleSlab {
            lower,
            upper,
            a_norm: a.norm(),
        });
    }

    let mut candidates = vec![Candidate {
        label: "unconstrained",
        u: u0.clone(),
        feasible: zero_row || feasible(a, lower, upper, u0, 0.0),
        objective: 0.0,
    }];
    if !zero_row {
        for (label, target) in [("upper", upper), ("lower", lower)] {
            if let Some(u) = equality_candidate(a, target, u0) {
                candidates.push(Candidate {
                    label,
                    feasible: feasible(a, lower, upper, &u, tol),
                    objective: objective(&u, u0),
                    u,
                });
            }
        }
    }

    let best = candidates
        .iter()
        .filter(|c| c.feasible)
        .min_by(|x, y| x.objective.total_cmp(&y.objective))
        .ok_or_else(|| CbfError::NumericalDomain("oracle found no feasible candidate".into()))?;
    let minimizer = best.u.clone();
    let best_objective = best.objective;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut certificate = f64::NEG_INFINITY;
    let mut feasible_perturbations = 0;
    for _ in 0..PERTURBATION_SAMPLES {
        let d = feasible_direction(&mut rng, a, lower, upper, &minimizer);
        let p = &minimizer + d;
        if zero_row || feasible(a, lower, upper, &p, tol) {
            feasible_perturbations += 1;
            certificate = certificate.max(best_objective - objective(&p, u0));
        }
    }

    Ok(OracleReport {
        candidates,
        minimizer,
        objective: best_objective,
        certificate,
        feasible_perturbations,
    })
}

/// Random step `d` with `|d| <= PERTURBATION_RADIUS` and `u + d` inside the slab.
///
/// The component along `a` is drawn uniformly from the admissible interval, so
/// thin slabs are sampled as well as wide ones.
fn feasible_direction(
    rng: &mut ChaCha8Rng,
    a: &DVector<f64>,
    lower: f64,
    upper: f64,
    u: &DVector<f64>,
) -> DVector<f64> {
    let r = PERTURBATION_RADIUS;
    let d = random_in_ball(rng, a.len(), r);
    let norm = a.norm();
    if norm == 0.0 {
        return d;
    }
    let dir = a / norm;
    let s = a.dot(u);
    let t_lo = ((lower - s) / norm).clamp(-r, r);
    let t_hi = ((upper - s) / norm).clamp(-r, r);
    let t = if t_hi > t_lo { rng.random_range(t_lo..=t_hi) } else { t_lo };
    let mut perp = &d - &dir * d.dot(&dir);
    let room = (r * r - t * t).max(0.0).sqrt();
    if perp.norm() > room {
        perp *= room / perp.norm();
    }
    perp + dir * t
}

/// Uniform sample from the closed ball of the given radius.
pub fn random_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> DVector<f64> {
    loop {
        let d = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
        if d.norm_squared() <= 1.0 {
            return d * radius;
        }
    }
}

/// Central-difference step used for derivative checks at `x`.
pub fn fd_step(x: &State) -> f64 {
    1e-5 * (1.0 + x.amax())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// Worst `|analytic - fd| / (1 + |analytic|)` over gradient entries.
    pub gradient: f64,
    /// Same for the Hessian, when the field provides one.
    pub hessian: Option<f64>,
}

impl FdReport {
    pub fn worst(&self) -> f64 {
        self.gradient.max(self.hessian.unwrap_or(0.0))
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (1.0 + analytic.abs())
}

/// Compares analytic gradients (and Hessians, if present) against central differences.
pub fn finite_difference_check(field: &dyn BarrierField, samples: &[State]) -> Result<FdReport> {
    if samples.is_empty() {
        return Err(CbfError::Usage("finite-difference check needs samples".into()));
    }
    let mut grad_err = 0.0f64;
    let mut hess_err: Option<f64> = None;
    for x in samples {
        let n = x.len();
        let step = fd_step(x);
        let grad = field.gradient(x);
        let hess = field.hessian(x);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.0[j] += step;
            xm.0[j] -= step;
            let numeric = (field.value(&xp) - field.value(&xm)) / (2.0 * step);
            grad_err = grad_err.max(rel_err(grad[j], numeric));
            if let Some(h) = &hess {
                let column = (field.gradient(&xp) - field.gradient(&xm)) / (2.0 * step);
                let worst = (0..n).map(|i| rel_err(h[(i, j)], column[i])).fold(0.0, f64::max);
                hess_err = Some(hess_err.unwrap_or(0.0).max(worst));
            }
        }
    }
    if !grad_err.is_finite() || hess_err.is_some_and(|e| !e.is_finite()) {
        return Err(CbfError::NumericalDomain(format!("{}: non-finite derivative", field.label())));
    }
    Ok(FdReport {
        gradient: grad_err,
        hessian: hess_err,
    })
}
