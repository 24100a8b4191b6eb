//! Backstepping for constant-sum pairs of high relative degree.
//!
//! Starting from `h_1 = h`, `b_1 = b`, each level is
//!
//! ```text
//! h_i    = c_{i-1} h_{i-1} + L_f h_{i-1}
//! b_i    = c_{i-1} b_{i-1}
//! hbar_i = b_i - h_i
//! ```
//!
//! so every level is again a constant-sum pair. The gains are picked from the
//! initial condition so that `x0` lies strictly inside every level's set.
//!
//! Because `L_f` is linear, `h_i` is a fixed linear combination of the Lie
//! derivatives `L_f^k h`, `k < i`. The chain stores those weights and evaluates
//! levels through a [`SmoothJet`] that supplies `L_f^k h` and its gradient.

use std::fmt;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::barrier::{
    lie_derivatives, slab_from_parts, BarrierField, ClassK, ConstraintSlab, ControlAffineSystem,
    ParallelPair, State,
};
use crate::error::{CbfError, Result};

/// Closed-form Lie derivatives of a barrier along the drift.
///
/// Level 0 is the barrier itself; level `k` is `L_f^k h`.
pub trait SmoothJet: Send + Sync {
    /// Highest available level.
    fn depth(&self) -> usize;
    fn lie_value(&self, level: usize, x: &State) -> f64;
    fn lie_gradient(&self, level: usize, x: &State) -> DVector<f64>;
}

/// Default additive margin above the gain lower bound.
pub const DEFAULT_GAIN_MARGIN: f64 = 0.1;

/// Threshold above which a lower chain level is reported as having input authority.
pub const RELATIVE_DEGREE_WARN: f64 = 1e-8;

/// How the chain gains `c_1 .. c_{n-1}` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct GainPolicy {
    /// Automatic gains are `max(bound, 0) + margin`.
    pub margin: f64,
    /// Per-level explicit gains; `overrides[i]` replaces `c_{i+1}`.
    pub overrides: Vec<Option<f64>>,
}

impl Default for GainPolicy {
    fn default() -> Self {
        Self {
            margin: DEFAULT_GAIN_MARGIN,
            overrides: Vec::new(),
        }
    }
}

impl GainPolicy {
    pub fn with_margin(margin: f64) -> Self {
        Self {
            margin,
            overrides: Vec::new(),
        }
    }

    /// All gains fixed explicitly.
    pub fn fixed(gains: &[f64]) -> Self {
        Self {
            margin: DEFAULT_GAIN_MARGIN,
            overrides: gains.iter().copied().map(Some).collect(),
        }
    }
}

/// Smallest gain that keeps the next level strictly positive on both sides at `x0`.
///
/// `max(-L_f h / h, L_f h / (b - h), 0)`, which requires `0 < h < b`.
pub fn gain_lower_bound(h_val: f64, lfh_val: f64, b: f64) -> Result<f64> {
    if !(h_val > 0.0 && h_val < b) || !lfh_val.is_finite() {
        return Err(CbfError::NotInterior {
            level: 0,
            h: h_val,
            hbar: b - h_val,
        });
    }
    Ok((-lfh_val / h_val).max(lfh_val / (b - h_val)).max(0.0))
}

/// The built chain `h_1 .. h_n` with its gains and constants.
#[derive(Clone)]
pub struct BacksteppingChain {
    pair: ParallelPair,
    jet: Arc<dyn SmoothJet>,
    gains: Vec<f64>,
    bounds: Vec<f64>,
    constants: Vec<f64>,
    /// `weights[i][k]` is the coefficient of `L_f^k h` in `h_{i+1}`.
    weights: Vec<Vec<f64>>,
    x0: State,
}

impl fmt::Debug for BacksteppingChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BacksteppingChain")
            .field("pair", &self.pair)
            .field("gains", &self.gains)
            .field("constants", &self.constants)
            .field("x0", &self.x0.as_slice())
            .finish()
    }
}

/// Builds the chain of relative degree `n >= 2` from the pair, tuning each gain at `x0`.
pub fn build_chain(
    pair: &ParallelPair,
    jet: Arc<dyn SmoothJet>,
    system: &dyn ControlAffineSystem,
    x0: &State,
    n: usize,
    policy: &GainPolicy,
) -> Result<BacksteppingChain> {
    if n < 2 {
        return Err(CbfError::Config(format!("backstepping needs relative degree n >= 2, got {n}")));
    }
    if jet.depth() + 1 < n {
        return Err(CbfError::Config(format!(
            "jet depth {} cannot support relative degree {n} (needs {})",
            jet.depth(),
            n - 1
        )));
    }
    if x0.len() != system.state_dim() {
        return Err(CbfError::Config(format!(
            "x0 has length {} but {} has state dimension {}",
            x0.len(),
            system.label(),
            system.state_dim()
        )));
    }
    if !x0.is_finite() {
        return Err(CbfError::NumericalDomain("x0 has non-finite entries".into()));
    }
    if !(policy.margin.is_finite() && policy.margin > 0.0) {
        return Err(CbfError::Parameter(format!("gain margin must be positive, got {}", policy.margin)));
    }

    let h0 = pair.h(x0);
    if !(h0 > 0.0 && h0 < pair.b()) {
        return Err(CbfError::NotInterior {
            level: 1,
            h: h0,
            hbar: pair.b() - h0,
        });
    }

    let mut chain = BacksteppingChain {
        pair: pair.clone(),
        jet,
        gains: Vec::with_capacity(n - 1),
        bounds: Vec::with_capacity(n - 1),
        constants: vec![pair.b()],
        weights: vec![vec![1.0]],
        x0: x0.clone(),
    };

    for level in 2..=n {
        let prev = level - 1;
        let h_prev = chain.level_value(prev, x0);
        let b_prev = chain.constants[prev - 1];
        let lfh_prev = chain.drift_derivative(prev, x0);
        let bound = gain_lower_bound(h_prev, lfh_prev, b_prev).map_err(|_| CbfError::NotInterior {
            level: prev,
            h: h_prev,
            hbar: b_prev - h_prev,
        })?;
        let gain = match policy.overrides.get(prev - 1).copied().flatten() {
            Some(c) if c.is_finite() && c > bound => c,
            Some(c) => {
                return Err(CbfError::Parameter(format!(
                    "gain c{prev} = {c} does not exceed its lower bound {bound} at x0"
                )))
            }
            None => bound + policy.margin,
        };

        let w_prev = &chain.weights[prev - 1];
        let mut w = vec![0.0; level];
        for (k, wk) in w_prev.iter().enumerate() {
            w[k] += gain * wk;
            w[k + 1] += wk;
        }
        chain.weights.push(w);
        chain.gains.push(gain);
        chain.bounds.push(bound);
        chain.constants.push(gain * b_prev);

        let h_new = chain.level_value(level, x0);
        let b_new = chain.constants[level - 1];
        if !(h_new > 0.0 && h_new < b_new) {
            return Err(CbfError::NotInterior {
                level,
                h: h_new,
                hbar: b_new - h_new,
            });
        }
    }

    for (level, lg) in chain.relative_degree_report(system, std::slice::from_ref(x0))?.iter().enumerate() {
        if *lg > RELATIVE_DEGREE_WARN {
            warn!(
                "level {} of {} has |L_g h| = {lg:e} at x0; relative degree may be lower than {n}",
                level + 1,
                pair.field().label()
            );
        }
    }

    Ok(chain)
}

impl BacksteppingChain {
    /// Relative degree `n`.
    pub fn depth(&self) -> usize {
        self.constants.len()
    }

    /// `c_1 .. c_{n-1}`.
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Gain lower bounds evaluated at `x0` when the chain was built.
    pub fn gain_bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// `b_1 .. b_n`.
    pub fn constants(&self) -> &[f64] {
        &self.constants
    }

    pub fn x0(&self) -> &State {
        &self.x0
    }

    pub fn pair(&self) -> &ParallelPair {
        &self.pair
    }

    /// `h_level(x)`, 1-indexed.
    pub fn level_value(&self, level: usize, x: &State) -> f64 {
        self.weights[level - 1]
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.jet.lie_value(k, x))
            .sum()
    }

    pub fn level_gradient(&self, level: usize, x: &State) -> DVector<f64> {
        let mut grad = DVector::zeros(x.len());
        for (k, w) in self.weights[level - 1].iter().enumerate() {
            grad.axpy(*w, &self.jet.lie_gradient(k, x), 1.0);
        }
        grad
    }

    /// `b_level - h_level(x)`.
    pub fn hbar_value(&self, level: usize, x: &State) -> f64 {
        self.constants[level - 1] - self.level_value(level, x)
    }

    /// `(h_1..h_n, hbar_1..hbar_n)` at `x`.
    pub fn levels(&self, x: &State) -> (Vec<f64>, Vec<f64>) {
        let h: Vec<f64> = (1..=self.depth()).map(|i| self.level_value(i, x)).collect();
        let hbar = h.iter().zip(&self.constants).map(|(h, b)| b - h).collect();
        (h, hbar)
    }

    /// `L_f h_level(x)` using the jet's next level, without needing the system.
    fn drift_derivative(&self, level: usize, x: &State) -> f64 {
        self.weights[level - 1]
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.jet.lie_value(k + 1, x))
            .sum()
    }

    /// Target barrier `h_n` as a field.
    pub fn target_field(&self) -> ChainLevelField {
        self.level_field(self.depth())
    }

    pub fn level_field(&self, level: usize) -> ChainLevelField {
        ChainLevelField {
            chain: self.clone(),
            level,
            label: format!("h{level}[{}]", self.pair.field().label()),
        }
    }

    /// `(L_f h_n, L_g h_n)` at `x`.
    pub fn target_lie_derivatives(
        &self,
        system: &dyn ControlAffineSystem,
        x: &State,
    ) -> Result<(f64, DVector<f64>)> {
        lie_derivatives(system, &self.level_gradient(self.depth(), x), x)
    }

    /// Slab constraint of the target pair `(h_n, b_n - h_n)`.
    pub fn target_slab(
        &self,
        system: &dyn ControlAffineSystem,
        alpha_n: &ClassK,
        alpha_bar_n: &ClassK,
        x: &State,
    ) -> Result<ConstraintSlab> {
        if !x.is_finite() {
            return Err(CbfError::NumericalDomain("state has non-finite entries".into()));
        }
        let n = self.depth();
        slab_from_parts(
            system,
            self.level_value(n, x),
            &self.level_gradient(n, x),
            self.constants[n - 1],
            alpha_n,
            alpha_bar_n,
            x,
        )
    }

    /// Whether `x` lies in every level's set `{h_i >= 0} ∩ {b_i - h_i >= 0}`.
    pub fn membership(&self, x: &State) -> bool {
        (1..=self.depth()).all(|i| {
            let h = self.level_value(i, x);
            h >= 0.0 && self.constants[i - 1] - h >= 0.0
        })
    }

    /// Largest `|L_g h_i|` over the samples for each level `i < n`.
    pub fn relative_degree_report(
        &self,
        system: &dyn ControlAffineSystem,
        samples: &[State],
    ) -> Result<Vec<f64>> {
        let mut worst = vec![0.0f64; self.depth() - 1];
        for x in samples {
            for (i, w) in worst.iter_mut().enumerate() {
                let (_, lg) = lie_derivatives(system, &self.level_gradient(i + 1, x), x)?;
                *w = w.max(lg.norm());
            }
        }
        Ok(worst)
    }
}

/// One level of a chain viewed as a barrier field.
pub struct ChainLevelField {
    chain: BacksteppingChain,
    level: usize,
    label: String,
}

impl BarrierField for ChainLevelField {
    fn value(&self, x: &State) -> f64 {
        self.chain.level_value(self.level, x)
    }

    fn gradient(&self, x: &State) -> DVector<f64> {
        self.chain.level_gradient(self.level, x)
    }

    fn hessian(&self, _x: &State) -> Option<DMatrix<f64>> {
        None
    }

    fn label(&self) -> &str {
        &self.label
    }
}
