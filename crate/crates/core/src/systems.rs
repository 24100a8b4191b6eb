//! Benchmark systems and barriers.
//!
//! * double integrator `x1' = x2, x2' = u` with the corridor `-1 <= x1 <= 1`
//!   split into `h = 1 + x1`, `hbar = 1 - x1`;
//! * unicycle with an integrator on the speed, state `(x, y, v, theta)`,
//!   input `(u_v, u_theta)`, kept between `y = -sin x - 1` and `y = -sin x + 1`
//!   by `h = sin x + y + 1`, `hbar = 1 - sin x - y`;
//! * the single-barrier baseline `h_s = h (b - h)` for either corridor, which
//!   describes the same safe set but has a vanishing gradient on the midline.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backstepping::SmoothJet;
use crate::barrier::{lie_derivatives, BarrierField, ControlAffineSystem, ParallelPair, State};
use crate::error::{CbfError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    DoubleIntegrator,
    Unicycle,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::DoubleIntegrator => "double_integrator",
            SystemKind::Unicycle => "unicycle",
        }
    }

    /// System, corridor pair and jet of the shipped example.
    pub fn example(&self) -> Example {
        match self {
            SystemKind::DoubleIntegrator => double_integrator(),
            SystemKind::Unicycle => {
                let (pair, jet) = sine_corridor();
                Example {
                    kind: *self,
                    system: Arc::new(unicycle_extended()),
                    pair,
                    jet,
                }
            }
        }
    }
}

/// A shipped system with its corridor pair.
#[derive(Clone)]
pub struct Example {
    pub kind: SystemKind,
    pub system: Arc<dyn ControlAffineSystem>,
    pub pair: ParallelPair,
    pub jet: Arc<dyn SmoothJet>,
}

impl Example {
    /// Relative degree of the corridor barrier with respect to the input.
    pub fn relative_degree(&self) -> usize {
        2
    }
}

// ---------------------------------------------------------------------------
// double integrator

#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleIntegrator;

impl ControlAffineSystem for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &State) -> DVector<f64> {
        DVector::from_column_slice(&[x[1], 0.0])
    }

    fn input_matrix(&self, _x: &State) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 1, &[0.0, 1.0])
    }

    fn label(&self) -> &str {
        "double_integrator"
    }

    fn input_names(&self) -> Vec<String> {
        vec!["u".into()]
    }

    fn speed_index(&self) -> Option<usize> {
        Some(1)
    }
}

/// `h = 1 + x1`
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearCorridor;

impl BarrierField for LinearCorridor {
    fn value(&self, x: &State) -> f64 {
        1.0 + x[0]
    }

    fn gradient(&self, _x: &State) -> DVector<f64> {
        DVector::from_column_slice(&[1.0, 0.0])
    }

    fn hessian(&self, _x: &State) -> Option<DMatrix<f64>> {
        Some(DMatrix::zeros(2, 2))
    }

    fn label(&self) -> &str {
        "1 + x1"
    }
}

/// `L_f h = x2`
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearCorridorJet;

impl SmoothJet for LinearCorridorJet {
    fn depth(&self) -> usize {
        1
    }

    fn lie_value(&self, level: usize, x: &State) -> f64 {
        match level {
            0 => LinearCorridor.value(x),
            1 => x[1],
            _ => panic!("linear corridor jet has depth 1, asked for level {level}"),
        }
    }

    fn lie_gradient(&self, level: usize, x: &State) -> DVector<f64> {
        match level {
            0 => LinearCorridor.gradient(x),
            1 => DVector::from_column_slice(&[0.0, 1.0]),
            _ => panic!("linear corridor jet has depth 1, asked for level {level}"),
        }
    }
}

pub fn double_integrator() -> Example {
    Example {
        kind: SystemKind::DoubleIntegrator,
        system: Arc::new(DoubleIntegrator),
        pair: ParallelPair::new(Arc::new(LinearCorridor), 2.0).expect("b = 2 is positive"),
        jet: Arc::new(LinearCorridorJet),
    }
}

// ---------------------------------------------------------------------------
// unicycle with speed integrator

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnicycleState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    /// Heading in radians; never wrapped.
    pub theta: f64,
}

impl From<&State> for UnicycleState {
    fn from(s: &State) -> Self {
        Self {
            x: s[0],
            y: s[1],
            v: s[2],
            theta: s[3],
        }
    }
}

impl From<UnicycleState> for State {
    fn from(s: UnicycleState) -> Self {
        State::from_slice(&[s.x, s.y, s.v, s.theta])
    }
}

/// State indices of the unicycle.
pub mod unicycle_index {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const V: usize = 2;
    pub const THETA: usize = 3;
    pub const U_V: usize = 0;
    pub const U_THETA: usize = 1;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Unicycle;

impl ControlAffineSystem for Unicycle {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn drift(&self, s: &State) -> DVector<f64> {
        let (v, theta) = (s[2], s[3]);
        DVector::from_column_slice(&[v * theta.cos(), v * theta.sin(), 0.0, 0.0])
    }

    fn input_matrix(&self, _x: &State) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(4, 2);
        g[(unicycle_index::V, unicycle_index::U_V)] = 1.0;
        g[(unicycle_index::THETA, unicycle_index::U_THETA)] = 1.0;
        g
    }

    fn label(&self) -> &str {
        "unicycle"
    }

    fn state_names(&self) -> Vec<String> {
        vec!["x".into(), "y".into(), "v".into(), "theta".into()]
    }

    fn input_names(&self) -> Vec<String> {
        vec!["u_v".into(), "u_theta".into()]
    }

    fn speed_index(&self) -> Option<usize> {
        Some(unicycle_index::V)
    }
}

pub fn unicycle_extended() -> Unicycle {
    Unicycle
}

/// `h = sin x + y + 1`
#[derive(Debug, Clone, Copy, Default)]
pub struct SineCorridor;

impl BarrierField for SineCorridor {
    fn value(&self, s: &State) -> f64 {
        s[0].sin() + s[1] + 1.0
    }

    fn gradient(&self, s: &State) -> DVector<f64> {
        DVector::from_column_slice(&[s[0].cos(), 1.0, 0.0, 0.0])
    }

    fn hessian(&self, s: &State) -> Option<DMatrix<f64>> {
        let mut h = DMatrix::zeros(4, 4);
        h[(0, 0)] = -s[0].sin();
        Some(h)
    }

    fn label(&self) -> &str {
        "sin x + y + 1"
    }
}

/// `L_f h = v (cos x cos theta + sin theta)`
#[derive(Debug, Clone, Copy, Default)]
pub struct SineCorridorJet;

impl SmoothJet for SineCorridorJet {
    fn depth(&self) -> usize {
        1
    }

    fn lie_value(&self, level: usize, s: &State) -> f64 {
        match level {
            0 => SineCorridor.value(s),
            1 => {
                let (x, v, th) = (s[0], s[2], s[3]);
                v * (x.cos() * th.cos() + th.sin())
            }
            _ => panic!("sine corridor jet has depth 1, asked for level {level}"),
        }
    }

    fn lie_gradient(&self, level: usize, s: &State) -> DVector<f64> {
        match level {
            0 => SineCorridor.gradient(s),
            1 => {
                let (x, v, th) = (s[0], s[2], s[3]);
                let (sx, cx) = x.sin_cos();
                let (st, ct) = th.sin_cos();
                DVector::from_column_slice(&[-v * sx * ct, 0.0, cx * ct + st, v * (-cx * st + ct)])
            }
            _ => panic!("sine corridor jet has depth 1, asked for level {level}"),
        }
    }
}

pub fn sine_corridor() -> (ParallelPair, Arc<dyn SmoothJet>) {
    (
        ParallelPair::new(Arc::new(SineCorridor), 2.0).expect("b = 2 is positive"),
        Arc::new(SineCorridorJet),
    )
}

/// Input and drift terms of `h_2 = c1 h_1 + L_f h_1` for the sine corridor,
/// written directly in terms of the planar gradient and Hessian of `h_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicycleLieTerms {
    /// `L_{g_v} h_2 = grad h_1 . (cos theta, sin theta)`
    pub lgv: f64,
    /// `L_{g_theta} h_2 = v grad h_1 . (-sin theta, cos theta)`
    pub lgtheta: f64,
    /// `L_f h_2 = c1 v grad h_1 . e + v^2 e^T Hess h_1 e`, `e = (cos theta, sin theta)`
    pub drift: f64,
}

pub fn unicycle_lie_terms(c1: f64, s: &UnicycleState) -> Result<UnicycleLieTerms> {
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(CbfError::Parameter(format!("c1 must be positive, got {c1}")));
    }
    let (gx, gy) = (s.x.cos(), 1.0);
    let (hxx, hxy, hyy) = (-s.x.sin(), 0.0, 0.0);
    let (st, ct) = s.theta.sin_cos();
    let along = gx * ct + gy * st;
    let across = -gx * st + gy * ct;
    let curvature = ct * (hxx * ct + hxy * st) + st * (hxy * ct + hyy * st);
    Ok(UnicycleLieTerms {
        lgv: along,
        lgtheta: s.v * across,
        drift: c1 * s.v * along + s.v * s.v * curvature,
    })
}

// ---------------------------------------------------------------------------
// gradient condition

/// True iff the barrier gradient is nonzero at every sample.
///
/// For the unicycle this is the sampled form of the sufficient condition that
/// makes the backstepped pair valid everywhere between the boundaries.
pub fn check_gradient_nonzero(field: &dyn BarrierField, samples: &[State]) -> Result<bool> {
    if samples.is_empty() {
        return Err(CbfError::Usage("gradient check needs at least one sample".into()));
    }
    Ok(samples.iter().all(|x| field.gradient(x).norm() > 0.0))
}

/// States covering the region between the corridor boundaries.
///
/// `levels` odd values of the corridor coordinate `h - b/2` in `[-b/2, b/2]`
/// (so the midline is always included), crossed with a few speeds and headings.
pub fn corridor_grid(kind: SystemKind, levels: usize) -> Vec<State> {
    let levels = levels.max(1) | 1;
    let offsets: Vec<f64> = if levels == 1 {
        vec![0.0]
    } else {
        (0..levels).map(|i| -1.0 + 2.0 * i as f64 / (levels - 1) as f64).collect()
    };
    let mut out = Vec::new();
    match kind {
        SystemKind::DoubleIntegrator => {
            for &s in &offsets {
                for x2 in [-1.0, 0.0, 0.5, 2.0] {
                    out.push(State::from_slice(&[s, x2]));
                }
            }
        }
        SystemKind::Unicycle => {
            for i in 0..levels {
                let x = -PI + 2.0 * PI * i as f64 / levels as f64;
                for &s in &offsets {
                    for (v, theta) in [(0.0, 0.0), (1.0, 0.3), (2.0, -1.2)] {
                        out.push(State::from_slice(&[x, s - x.sin(), v, theta]));
                    }
                }
            }
        }
    }
    out
}

/// States on the midline `h = b/2` where the single barrier's gradient vanishes.
pub fn midline_samples(kind: SystemKind, count: usize) -> Vec<State> {
    let count = count.max(1);
    (0..count)
        .map(|i| {
            let t = -PI + 2.0 * PI * i as f64 / count as f64;
            match kind {
                SystemKind::DoubleIntegrator => State::from_slice(&[0.0, t]),
                SystemKind::Unicycle => State::from_slice(&[t, -t.sin(), 1.0, 0.5 * t]),
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// single-barrier baseline

/// `h_s = h (b - h)`, zero on both corridor boundaries and maximal on the midline.
pub struct ProductField {
    pair: ParallelPair,
    label: String,
}

impl ProductField {
    pub fn new(pair: ParallelPair) -> Self {
        let label = format!("({}) ({} - ({}))", pair.field().label(), pair.b(), pair.field().label());
        Self { pair, label }
    }
}

impl BarrierField for ProductField {
    fn value(&self, x: &State) -> f64 {
        self.pair.h(x) * self.pair.hbar(x)
    }

    fn gradient(&self, x: &State) -> DVector<f64> {
        self.pair.grad_h(x) * (self.pair.b() - 2.0 * self.pair.h(x))
    }

    fn hessian(&self, x: &State) -> Option<DMatrix<f64>> {
        let hess = self.pair.field().hessian(x)?;
        let grad = self.pair.grad_h(x);
        Some(hess * (self.pair.b() - 2.0 * self.pair.h(x)) - (&grad * grad.transpose()) * 2.0)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Which corridor the baseline barrier is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    DoubleIntegrator,
    Unicycle,
}

impl From<SystemKind> for BaselineKind {
    fn from(kind: SystemKind) -> Self {
        match kind {
            SystemKind::DoubleIntegrator => BaselineKind::DoubleIntegrator,
            SystemKind::Unicycle => BaselineKind::Unicycle,
        }
    }
}

/// One-sided constraint `a u >= lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneSidedConstraint {
    pub a: DVector<f64>,
    pub lower: f64,
}

/// Backstepped single barrier `h2_s = c1 h_s + L_f h_s` with liveness gain `c2`.
#[derive(Clone)]
pub struct SingleCbfBaseline {
    pair: ParallelPair,
    jet: Arc<dyn SmoothJet>,
    pub c1: f64,
    pub c2: f64,
}

pub fn single_cbf_baseline(kind: BaselineKind, c1: f64, c2: f64) -> Result<SingleCbfBaseline> {
    let example = match kind {
        BaselineKind::DoubleIntegrator => SystemKind::DoubleIntegrator.example(),
        BaselineKind::Unicycle => SystemKind::Unicycle.example(),
    };
    SingleCbfBaseline::new(example.pair, example.jet, c1, c2)
}

impl SingleCbfBaseline {
    pub fn new(pair: ParallelPair, jet: Arc<dyn SmoothJet>, c1: f64, c2: f64) -> Result<Self> {
        for (name, c) in [("c1", c1), ("c2", c2)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(CbfError::Parameter(format!("{name} must be positive, got {c}")));
            }
        }
        if jet.depth() < 1 {
            return Err(CbfError::Config("baseline needs a jet of depth >= 1".into()));
        }
        Ok(Self { pair, jet, c1, c2 })
    }

    pub fn barrier_field(&self) -> ProductField {
        ProductField::new(self.pair.clone())
    }

    pub fn h_s(&self, x: &State) -> f64 {
        self.pair.h(x) * self.pair.hbar(x)
    }

    /// `L_f h_s = (b - 2h) L_f h`
    pub fn lf_h_s(&self, x: &State) -> f64 {
        (self.pair.b() - 2.0 * self.pair.h(x)) * self.jet.lie_value(1, x)
    }

    /// `grad L_f h_s = -2 L_f h grad h + (b - 2h) grad L_f h`
    pub fn grad_lf_h_s(&self, x: &State) -> DVector<f64> {
        let lfh = self.jet.lie_value(1, x);
        self.pair.grad_h(x) * (-2.0 * lfh) + self.jet.lie_gradient(1, x) * (self.pair.b() - 2.0 * self.pair.h(x))
    }

    pub fn h2(&self, x: &State) -> f64 {
        self.c1 * self.h_s(x) + self.lf_h_s(x)
    }

    pub fn grad_h2(&self, x: &State) -> DVector<f64> {
        self.barrier_field().gradient(x) * self.c1 + self.grad_lf_h_s(x)
    }

    /// `L_g h2_s u >= -c2 h2_s - L_f h2_s`
    pub fn constraint(&self, system: &dyn ControlAffineSystem, x: &State) -> Result<OneSidedConstraint> {
        let (lf, lg) = lie_derivatives(system, &self.grad_h2(x), x)?;
        Ok(OneSidedConstraint {
            a: lg,
            lower: -self.c2 * self.h2(x) - lf,
        })
    }

    pub fn target_field(&self) -> BaselineTargetField {
        BaselineTargetField {
            baseline: self.clone(),
            label: format!("h2_s[{}]", self.pair.field().label()),
        }
    }
}

/// Largest midline speed for which the double-integrator baseline stays valid:
/// `sqrt(c1 c2 / 2)`.
pub fn double_integrator_speed_limit(c1: f64, c2: f64) -> f64 {
    (c1 * c2 / 2.0).sqrt()
}

pub struct BaselineTargetField {
    baseline: SingleCbfBaseline,
    label: String,
}

impl BarrierField for BaselineTargetField {
    fn value(&self, x: &State) -> f64 {
        self.baseline.h2(x)
    }

    fn gradient(&self, x: &State) -> DVector<f64> {
        self.baseline.grad_h2(x)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// `L_f h_s` of the baseline as a field, for derivative checks.
pub struct BaselineDriftField(pub SingleCbfBaseline);

impl BarrierField for BaselineDriftField {
    fn value(&self, x: &State) -> f64 {
        self.0.lf_h_s(x)
    }

    fn gradient(&self, x: &State) -> DVector<f64> {
        self.0.grad_lf_h_s(x)
    }

    fn label(&self) -> &str {
        "L_f h_s"
    }
}

/// One level of a jet as a field, for derivative checks.
pub struct JetLevelField {
    pub jet: Arc<dyn SmoothJet>,
    pub level: usize,
    pub label: String,
}

impl BarrierField for JetLevelField {
    fn value(&self, x: &State) -> f64 {
        self.jet.lie_value(self.level, x)
    }

    fn gradient(&self, x: &State) -> DVector<f64> {
        self.jet.lie_gradient(self.level, x)
    }

    fn label(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backstepping::{build_chain, GainPolicy};
    use crate::barrier::{verify_parallel, PARALLEL_TOL};

    fn st(v: &[f64]) -> State {
        State::from_slice(v)
    }

    #[test]
    fn double_integrator_dynamics_and_pair() {
        let ex = double_integrator();
        assert_eq!(ex.system.drift(&st(&[3.0, -2.0])).as_slice(), &[-2.0, 0.0]);
        let x = st(&[0.3, 7.0]);
        assert_eq!(ex.pair.h(&x), 1.3);
        assert_eq!(ex.pair.hbar(&x), 0.7);
        assert_eq!(ex.pair.h(&x) + ex.pair.hbar(&x), 2.0);
        assert_eq!(ex.jet.lie_value(1, &x), 7.0);
    }

    #[test]
    fn double_integrator_target_has_unit_input_coefficient() {
        let ex = double_integrator();
        for c1 in [0.7, 1.0, 4.0] {
            let x0 = st(&[0.0, 0.0]);
            let chain = build_chain(&ex.pair, ex.jet.clone(), ex.system.as_ref(), &x0, 2, &GainPolicy::fixed(&[c1])).unwrap();
            for x in [[0.1, 0.2], [-0.8, 3.0]] {
                let (_, lg) = chain.target_lie_derivatives(ex.system.as_ref(), &st(&x)).unwrap();
                assert_eq!(lg.as_slice(), &[1.0]);
            }
        }
    }

    #[test]
    fn unicycle_dynamics() {
        let u = unicycle_extended();
        assert_eq!(u.drift(&st(&[0.0, 0.0, 1.0, 0.0])).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        for th in [0.0, 1.0, -2.5] {
            assert_eq!(u.drift(&st(&[3.0, 1.0, 0.0, th])).as_slice(), &[0.0, 0.0, 0.0, 0.0]);
        }
        let g = u.input_matrix(&st(&[0.0; 4]));
        assert_eq!(g.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(g, u.input_matrix(&st(&[5.0, -1.0, 2.0, 0.3])));
    }

    #[test]
    fn sine_corridor_values() {
        let (pair, jet) = sine_corridor();
        let origin = st(&[0.0; 4]);
        assert_eq!(pair.h(&origin), 1.0);
        assert_eq!(pair.hbar(&origin), 1.0);
        assert_eq!(jet.lie_value(1, &st(&[0.0, 0.0, 1.0, 0.0])), 1.0);
        for x in [-3.0, 0.2, 10.0] {
            assert_eq!(pair.grad_h(&st(&[x, 0.5, 1.0, 0.2]))[1], 1.0);
        }
        let samples = corridor_grid(SystemKind::Unicycle, 7);
        let check = verify_parallel(pair.field().as_ref(), &pair.complement(), &samples, PARALLEL_TOL).unwrap();
        assert!(check.parallel);
        assert!((check.b_estimate - 2.0).abs() < 1e-15);
    }

    #[test]
    fn lie_terms_at_reference_state() {
        let t = unicycle_lie_terms(1.0, &UnicycleState { x: 0.0, y: 0.0, v: 1.0, theta: 0.0 }).unwrap();
        assert_eq!(t.lgv, 1.0);
        assert_eq!(t.lgtheta, 1.0);
        assert_eq!(t.drift, 1.0);
        assert!(unicycle_lie_terms(0.0, &UnicycleState::default()).is_err());
    }

    #[test]
    fn lie_terms_vanish_when_stopped_along_boundary() {
        for x in [-2.0f64, 0.0, 0.7] {
            // heading perpendicular to the planar gradient (cos x, 1)
            let theta = 1.0f64.atan2(x.cos()) + std::f64::consts::FRAC_PI_2;
            let t = unicycle_lie_terms(1.0, &UnicycleState { x, y: 0.1, v: 0.0, theta }).unwrap();
            assert!(t.lgv.abs() < 1e-15);
            assert_eq!(t.lgtheta, 0.0);
            assert_eq!(t.drift, 0.0);
        }
    }

    #[test]
    fn lie_terms_aligned_heading() {
        let x = 0.4f64;
        let (gx, gy) = (x.cos(), 1.0f64);
        let theta = gy.atan2(gx);
        let t = unicycle_lie_terms(1.0, &UnicycleState { x, y: 0.0, v: 2.0, theta }).unwrap();
        assert!(t.lgtheta.abs() < 1e-15);
        assert!((t.lgv - (gx * gx + gy * gy).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gradient_condition() {
        let (pair, _) = sine_corridor();
        let grid = corridor_grid(SystemKind::Unicycle, 9);
        assert!(check_gradient_nonzero(pair.field().as_ref(), &grid).unwrap());
        let baseline = single_cbf_baseline(BaselineKind::Unicycle, 1.0, 1.0).unwrap();
        let midline = midline_samples(SystemKind::Unicycle, 16);
        assert!(!check_gradient_nonzero(&baseline.barrier_field(), &midline).unwrap());
        assert!(matches!(check_gradient_nonzero(pair.field().as_ref(), &[]), Err(CbfError::Usage(_))));

        struct Tiny;
        impl BarrierField for Tiny {
            fn value(&self, _x: &State) -> f64 {
                0.0
            }
            fn gradient(&self, _x: &State) -> DVector<f64> {
                DVector::from_column_slice(&[0.0, 1e-30, 0.0, 0.0])
            }
            fn label(&self) -> &str {
                "tiny"
            }
        }
        assert!(check_gradient_nonzero(&Tiny, &[st(&[0.0; 4])]).unwrap());
    }

    #[test]
    fn baseline_matches_closed_forms() {
        let b = single_cbf_baseline(BaselineKind::DoubleIntegrator, 1.3, 0.8).unwrap();
        let sys = DoubleIntegrator;
        for x in [[0.2, -0.4], [-0.9, 1.5], [0.0, 2.0]] {
            let (x1, x2) = (x[0], x[1]);
            let s = st(&x);
            assert!((b.h_s(&s) - (1.0 - x1 * x1)).abs() < 1e-15);
            assert!((b.h2(&s) - (1.3 * (1.0 - x1 * x1) - 2.0 * x1 * x2)).abs() < 1e-14);
            let c = b.constraint(&sys, &s).unwrap();
            assert!((c.a[0] + 2.0 * x1).abs() < 1e-15);
        }

        let u = single_cbf_baseline(BaselineKind::Unicycle, 1.0, 1.0).unwrap();
        for x in [[0.3, -0.2, 1.0, 0.5], [2.0, 0.1, -1.0, 3.0]] {
            let s = st(&x);
            let q = x[0].sin() + x[1];
            assert!((u.h_s(&s) - (1.0 - q * q)).abs() < 1e-15);
        }
    }

    #[test]
    fn double_integrator_baseline_on_midline() {
        let b = single_cbf_baseline(BaselineKind::DoubleIntegrator, 1.0, 1.0).unwrap();
        let c = b.constraint(&DoubleIntegrator, &st(&[0.0, 0.5])).unwrap();
        assert_eq!(c.a[0], 0.0);
        // |x2| <= sqrt(1/2) keeps the zero-input condition satisfiable
        assert!(c.lower <= 0.0);
        let c = b.constraint(&DoubleIntegrator, &st(&[0.0, 2.0])).unwrap();
        assert!(c.lower > 0.0);
        assert_eq!(double_integrator_speed_limit(1.0, 1.0), 0.5f64.sqrt());
    }

    #[test]
    fn unicycle_baseline_correction_blows_up_near_midline() {
        let b = single_cbf_baseline(BaselineKind::Unicycle, 1.0, 1.0).unwrap();
        let sys = Unicycle;
        // Heading 45 degrees across the midline at speed 2: approach it from below.
        let mut last = 0.0;
        for k in 2..8 {
            let d = 10f64.powi(-k);
            let s = st(&[0.0, -d, 2.0, std::f64::consts::FRAC_PI_4]);
            let c = b.constraint(&sys, &s).unwrap();
            let u0 = crate::barrier::ControlInput::from_slice(&[0.0, 0.0]);
            let r = crate::filter::solve_one_sided(&c.a, c.lower, &u0, 1e-300).unwrap();
            assert!(r.correction_norm > last, "d = {d}: {} <= {last}", r.correction_norm);
            last = r.correction_norm;
        }
        assert!(last > 1e6);
    }
}
