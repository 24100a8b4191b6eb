//! Control-affine systems, barrier fields, class-K functions and the
//! constant-sum barrier pair.
//!
//! A [`ParallelPair`] stores a single field `h` together with the constant
//! `b > 0`; the partner barrier is always evaluated as `b - h(x)`, so the
//! constant-sum property and `grad(b - h) = -grad h` hold by construction.
//!
//! For such a pair the two first-order barrier conditions on the input collapse
//! into one two-sided ("slab") constraint on `L_g h(x) u`, see [`eval_slab`].

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_finite, CbfError, Result};

/// System state `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct State(pub DVector<f64>);

impl State {
    pub fn from_slice(values: &[f64]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for State {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<Vec<f64>> for State {
    fn from(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }
}

/// Control input `u` (also used for the nominal `u0` and the filtered `u*`).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput(pub DVector<f64>);

impl ControlInput {
    pub fn from_slice(values: &[f64]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }
}

impl Deref for ControlInput {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl From<Vec<f64>> for ControlInput {
    fn from(values: Vec<f64>) -> Self {
        Self(DVector::from_vec(values))
    }
}

/// `xdot = f(x) + g(x) u`.
pub trait ControlAffineSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    /// Drift `f(x)`, length `state_dim`.
    fn drift(&self, x: &State) -> DVector<f64>;
    /// Input matrix `g(x)`, `state_dim x input_dim`.
    fn input_matrix(&self, x: &State) -> DMatrix<f64>;
    fn label(&self) -> &str;

    /// Human-readable names of the state components, used as CSV headers.
    fn state_names(&self) -> Vec<String> {
        (1..=self.state_dim()).map(|i| format!("x{i}")).collect()
    }

    fn input_names(&self) -> Vec<String> {
        (1..=self.input_dim()).map(|i| format!("u{i}")).collect()
    }

    /// Index of the state component a speed-tracking nominal controller acts on.
    fn speed_index(&self) -> Option<usize> {
        None
    }

    /// `f(x) + g(x) u`.
    fn vector_field(&self, x: &State, u: &ControlInput) -> DVector<f64> {
        self.drift(x) + self.input_matrix(x) * &u.0
    }
}

/// A continuously differentiable scalar field on the state space.
pub trait BarrierField: Send + Sync {
    fn value(&self, x: &State) -> f64;
    fn gradient(&self, x: &State) -> DVector<f64>;
    /// Only needed when the field takes part in derivative checks of deeper chains.
    fn hessian(&self, _x: &State) -> Option<DMatrix<f64>> {
        None
    }
    fn label(&self) -> &str;
}

/// Extended class-K-infinity function.
#[derive(Clone)]
pub enum ClassK {
    /// `s -> c s`
    Linear(f64),
    /// Arbitrary user function. It is trusted to be strictly increasing with
    /// `alpha(0) = 0`; use [`ClassK::check_on_grid`] to sample that.
    Custom {
        label: String,
        apply: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl ClassK {
    pub fn apply(&self, s: f64) -> f64 {
        match self {
            ClassK::Linear(c) => c * s,
            ClassK::Custom { apply, .. } => apply(s),
        }
    }

    /// The slope for linear functions.
    pub fn coefficient(&self) -> Option<f64> {
        match self {
            ClassK::Linear(c) => Some(*c),
            ClassK::Custom { .. } => None,
        }
    }

    /// Zero at zero and strictly increasing over the given grid.
    pub fn check_on_grid(&self, grid: &[f64]) -> bool {
        if self.apply(0.0) != 0.0 {
            return false;
        }
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        sorted.windows(2).all(|w| self.apply(w[0]) < self.apply(w[1]))
    }
}

impl Default for ClassK {
    fn default() -> Self {
        ClassK::Linear(1.0)
    }
}

impl fmt::Debug for ClassK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassK::Linear(c) => write!(f, "Linear({c})"),
            ClassK::Custom { label, .. } => write!(f, "Custom({label})"),
        }
    }
}

/// `s -> c s` with `c > 0`.
pub fn class_k_linear(c: f64) -> Result<ClassK> {
    if !(c.is_finite() && c > 0.0) {
        return Err(CbfError::Parameter(format!(
            "linear class-K coefficient must be positive and finite, got {c}"
        )));
    }
    Ok(ClassK::Linear(c))
}

/// Barrier `h` with constant sum `b`; the partner is `b - h`.
#[derive(Clone)]
pub struct ParallelPair {
    h: Arc<dyn BarrierField>,
    b: f64,
}

impl ParallelPair {
    pub fn new(h: Arc<dyn BarrierField>, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(CbfError::Parameter(format!("pair constant b must be positive, got {b}")));
        }
        Ok(Self { h, b })
    }

    pub fn field(&self) -> &Arc<dyn BarrierField> {
        &self.h
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn h(&self, x: &State) -> f64 {
        self.h.value(x)
    }

    pub fn hbar(&self, x: &State) -> f64 {
        self.b - self.h.value(x)
    }

    pub fn grad_h(&self, x: &State) -> DVector<f64> {
        self.h.gradient(x)
    }

    pub fn grad_hbar(&self, x: &State) -> DVector<f64> {
        -self.h.gradient(x)
    }

    /// The partner barrier as a standalone field.
    pub fn complement(&self) -> ComplementField {
        ComplementField {
            h: Arc::clone(&self.h),
            b: self.b,
            label: format!("{} - ({})", self.b, self.h.label()),
        }
    }
}

impl fmt::Debug for ParallelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParallelPair")
            .field("h", &self.h.label())
            .field("b", &self.b)
            .finish()
    }
}

/// `b - h(x)`
pub struct ComplementField {
    h: Arc<dyn BarrierField>,
    b: f64,
    label: String,
}

impl BarrierField for ComplementField {
    fn value(&self, x: &State) -> f64 {
        self.b - self.h.value(x)
    }

    fn gradient(&self, x: &State) -> DVector<f64> {
        -self.h.gradient(x)
    }

    fn hessian(&self, x: &State) -> Option<DMatrix<f64>> {
        self.h.hessian(x).map(|h| -h)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// `lower <= a u <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSlab {
    /// Row vector `L_g h(x)`, stored as a column.
    pub a: DVector<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl ConstraintSlab {
    pub fn new(a: DVector<f64>, lower: f64, upper: f64) -> Self {
        Self { a, lower, upper }
    }

    pub fn from_slice(a: &[f64], lower: f64, upper: f64) -> Self {
        Self::new(DVector::from_column_slice(a), lower, upper)
    }

    pub fn contains(&self, u: &ControlInput, tol: f64) -> bool {
        let s = self.a.dot(&u.0);
        s >= self.lower - tol && s <= self.upper + tol
    }
}

/// Lie derivatives of a scalar field with gradient `grad` at `x`: `(L_f, L_g)`.
pub fn lie_derivatives(
    system: &dyn ControlAffineSystem,
    grad: &DVector<f64>,
    x: &State,
) -> Result<(f64, DVector<f64>)> {
    let n = system.state_dim();
    if grad.len() != n || x.len() != n {
        return Err(CbfError::Config(format!(
            "{}: expected state dimension {n}, got gradient {} and state {}",
            system.label(),
            grad.len(),
            x.len()
        )));
    }
    let f = system.drift(x);
    let g = system.input_matrix(x);
    if f.len() != n || g.nrows() != n || g.ncols() != system.input_dim() {
        return Err(CbfError::Config(format!(
            "{}: drift/input matrix have wrong shape",
            system.label()
        )));
    }
    let lf = grad.dot(&f);
    let lg = g.tr_mul(grad);
    Ok((lf, lg))
}

/// Joint input constraint of the pair `(h, b - h)` at `x`:
///
/// ```text
/// a     = grad h(x)^T g(x)
/// lower = -L_f h(x) - alpha(h(x))
/// upper = -L_f h(x) + alpha_bar(b - h(x))
/// ```
pub fn eval_slab(
    pair: &ParallelPair,
    system: &dyn ControlAffineSystem,
    alpha: &ClassK,
    alpha_bar: &ClassK,
    x: &State,
) -> Result<ConstraintSlab> {
    if !x.is_finite() {
        return Err(CbfError::NumericalDomain("state has non-finite entries".into()));
    }
    slab_from_parts(
        system,
        pair.h(x),
        &pair.grad_h(x),
        pair.b(),
        alpha,
        alpha_bar,
        x,
    )
}

/// Same as [`eval_slab`] but for a field whose value and gradient are already known.
pub(crate) fn slab_from_parts(
    system: &dyn ControlAffineSystem,
    h: f64,
    grad: &DVector<f64>,
    b: f64,
    alpha: &ClassK,
    alpha_bar: &ClassK,
    x: &State,
) -> Result<ConstraintSlab> {
    let (lf, lg) = lie_derivatives(system, grad, x)?;
    let lower = -lf - alpha.apply(h);
    let upper = -lf + alpha_bar.apply(b - h);
    ensure_finite("slab bounds", &[lower, upper])?;
    ensure_finite("L_g h", lg.as_slice())?;
    Ok(ConstraintSlab::new(lg, lower, upper))
}

/// Default absolute tolerance for [`verify_parallel`].
pub const PARALLEL_TOL: f64 = 1e-9;

/// Outcome of [`verify_parallel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelCheck {
    pub parallel: bool,
    /// Mean of `h + hbar` over the samples.
    pub b_estimate: f64,
    /// Largest deviation of `h + hbar` from the first sample's sum.
    pub spread: f64,
}

/// Checks that `h + hbar` is the same positive constant at every sample.
pub fn verify_parallel(
    h: &dyn BarrierField,
    hbar: &dyn BarrierField,
    samples: &[State],
    tol: f64,
) -> Result<ParallelCheck> {
    if samples.is_empty() {
        return Err(CbfError::Usage("verify_parallel needs at least one sample".into()));
    }
    let sums: Vec<f64> = samples.iter().map(|x| h.value(x) + hbar.value(x)).collect();
    ensure_finite("h + hbar", &sums)?;
    let reference = sums[0];
    let spread = sums.iter().map(|s| (s - reference).abs()).fold(0.0, f64::max);
    let b_estimate = sums.iter().sum::<f64>() / sums.len() as f64;
    Ok(ParallelCheck {
        parallel: spread <= tol && b_estimate > 0.0,
        b_estimate,
        spread,
    })
}
