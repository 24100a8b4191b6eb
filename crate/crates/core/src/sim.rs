//! Fixed-step closed-loop simulation.
//!
//! Each step computes the nominal input, filters it, checks for events and
//! advances the state with one classical RK4 step, holding the input constant
//! over the step.
//!
//! Events are checked in a fixed order at every sample: infeasible slab,
//! control blow-up, safety violation, barrier invalidity. The first one ends
//! the run.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backstepping::{build_chain, BacksteppingChain, GainPolicy, DEFAULT_GAIN_MARGIN};
use crate::barrier::{class_k_linear, ClassK, ControlAffineSystem, ControlInput, State};
use crate::error::{CbfError, Result};
use crate::filter::{
    default_eps, solve_closed_form, solve_one_sided, zero_lg_consistency, zero_lg_consistency_one_sided,
    ActiveBranch, FilterResult,
};
use crate::systems::{Example, SingleCbfBaseline, SystemKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    /// Closed-form slab filter on the backstepped constant-sum pair.
    ParallelPair,
    /// One-sided filter on the backstepped single barrier `h (b - h)`.
    SingleBaseline,
    /// Nominal input applied unchanged.
    None,
}

impl FilterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterKind::ParallelPair => "parallel_pair",
            FilterKind::SingleBaseline => "single_baseline",
            FilterKind::None => "none",
        }
    }
}

/// Nominal (performance) controllers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NominalController {
    Constant {
        u: Vec<f64>,
    },
    /// `u_0 = gain (v_ref - v)` on the first input, zero elsewhere.
    ProportionalSpeed {
        #[serde(default = "one")]
        gain: f64,
        v_ref: f64,
    },
    /// `u_j = amplitude_j sin(2 pi frequency t + phase)`
    Sinusoidal {
        amplitude: Vec<f64>,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Uniform in `[-bound, bound]` per input, redrawn every `hold` seconds from the run seed.
    RandomPiecewise {
        bound: f64,
        hold: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl NominalController {
    pub fn evaluate(&self, t: f64, x: &State, system: &dyn ControlAffineSystem, seed: u64) -> Result<ControlInput> {
        let m = system.input_dim();
        let u = match self {
            NominalController::Constant { u } => DVector::from_column_slice(u),
            NominalController::ProportionalSpeed { gain, v_ref } => {
                let idx = system.speed_index().ok_or_else(|| {
                    CbfError::Config(format!("{} has no speed state for proportional_speed", system.label()))
                })?;
                let mut u = DVector::zeros(m);
                u[0] = gain * (v_ref - x[idx]);
                u
            }
            NominalController::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => {
                let s = (2.0 * PI * frequency * t + phase).sin();
                DVector::from_iterator(amplitude.len(), amplitude.iter().map(|a| a * s))
            }
            NominalController::RandomPiecewise { bound, hold } => {
                let interval = (t / hold + 1e-9).floor() as u64;
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed.wrapping_add(interval.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
                DVector::from_fn(m, |_, _| rng.random_range(-*bound..=*bound))
            }
        };
        if u.len() != m {
            return Err(CbfError::Config(format!(
                "nominal controller produces {} inputs but {} takes {m}",
                u.len(),
                system.label()
            )));
        }
        Ok(ControlInput(u))
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            NominalController::Constant { u } => u.iter().all(|v| v.is_finite()),
            NominalController::ProportionalSpeed { gain, v_ref } => gain.is_finite() && v_ref.is_finite(),
            NominalController::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => amplitude.iter().all(|v| v.is_finite()) && frequency.is_finite() && phase.is_finite(),
            NominalController::RandomPiecewise { bound, hold } => {
                bound.is_finite() && *bound >= 0.0 && hold.is_finite() && *hold > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(CbfError::Config(format!("invalid nominal controller parameters: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSettings {
    /// Explicit backstepping gains `c_1 .. c_{n-1}`; empty selects automatic gains.
    pub chain: Vec<f64>,
    /// Additive margin above the lower bound for automatic gains.
    pub margin: f64,
    /// Backstepping gain of the single baseline barrier; falls back to `chain[0]`, then 1.
    pub baseline_c1: Option<f64>,
    /// Liveness gain of the single baseline barrier.
    pub c2: f64,
}

impl Default for GainSettings {
    fn default() -> Self {
        Self {
            chain: Vec::new(),
            margin: DEFAULT_GAIN_MARGIN,
            baseline_c1: None,
            c2: 1.0,
        }
    }
}

impl GainSettings {
    pub fn policy(&self) -> GainPolicy {
        GainPolicy {
            margin: self.margin,
            overrides: self.chain.iter().copied().map(Some).collect(),
        }
    }

    pub fn baseline_c1(&self) -> f64 {
        self.baseline_c1.or(self.chain.first().copied()).unwrap_or(1.0)
    }
}

/// Linear class-K slopes for the target pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassKSettings {
    pub alpha: f64,
    pub alpha_bar: f64,
}

impl Default for ClassKSettings {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            alpha_bar: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub horizon: f64,
    pub blowup_threshold: f64,
    pub safety_tol: f64,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e4;
pub const DEFAULT_SAFETY_TOL: f64 = 1e-6;

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            horizon: DEFAULT_HORIZON,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            safety_tol: DEFAULT_SAFETY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSettings {
    /// Number of corridor levels in the validation grid (forced odd so the midline is included).
    pub grid_levels: usize,
    /// Number of midline samples for the single-barrier gradient check.
    pub midline_samples: usize,
    /// Tolerance of the finite-difference checks.
    pub fd_tol: f64,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self {
            grid_levels: 21,
            midline_samples: 64,
            fd_tol: 1e-6,
        }
    }
}

/// Everything that defines one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub system: SystemKind,
    pub filter: FilterKind,
    #[serde(default)]
    pub seed: u64,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub gains: GainSettings,
    #[serde(default)]
    pub class_k: ClassKSettings,
    #[serde(default)]
    pub sim: SimSettings,
    pub nominal: NominalController,
    #[serde(default)]
    pub validate: ValidateSettings,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        if !(s.dt.is_finite() && s.dt > 0.0) {
            return Err(CbfError::Config(format!("sim.dt must be positive, got {}", s.dt)));
        }
        if !(s.horizon.is_finite() && s.horizon > 0.0) {
            return Err(CbfError::Config(format!("sim.horizon must be positive, got {}", s.horizon)));
        }
        if s.dt > s.horizon {
            return Err(CbfError::Config(format!("sim.dt = {} exceeds horizon {}", s.dt, s.horizon)));
        }
        if !(s.blowup_threshold > 0.0) {
            return Err(CbfError::Config("sim.blowup_threshold must be positive".into()));
        }
        if !(s.safety_tol >= 0.0 && s.safety_tol.is_finite()) {
            return Err(CbfError::Config("sim.safety_tol must be nonnegative".into()));
        }
        let n = self.system.example().system.state_dim();
        if self.x0.len() != n {
            return Err(CbfError::Config(format!(
                "x0 has {} entries but {} has {n} states",
                self.x0.len(),
                self.system.as_str()
            )));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return Err(CbfError::Config("x0 has non-finite entries".into()));
        }
        class_k_linear(self.class_k.alpha).map_err(|e| CbfError::Config(format!("class_k.alpha: {e}")))?;
        class_k_linear(self.class_k.alpha_bar).map_err(|e| CbfError::Config(format!("class_k.alpha_bar: {e}")))?;
        if !(self.gains.margin > 0.0) {
            return Err(CbfError::Config("gains.margin must be positive".into()));
        }
        if self.gains.chain.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(CbfError::Config("gains.chain entries must be positive".into()));
        }
        if !(self.gains.c2 > 0.0 && self.gains.baseline_c1() > 0.0) {
            return Err(CbfError::Config("baseline gains must be positive".into()));
        }
        self.nominal.validate()
    }

    /// Number of samples of a run that reaches the horizon.
    pub fn sample_count(&self) -> usize {
        step_count(self.sim.horizon, self.sim.dt) + 1
    }
}

fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize
}

/// Built artifacts of a scenario: system, chain, baseline and class-K functions.
pub struct Scenario {
    pub config: ScenarioConfig,
    pub example: Example,
    /// Backstepped constant-sum chain. Always present for filtered runs; for
    /// unfiltered runs it is only used for recording and may be missing when
    /// `x0` is outside the corridor.
    pub chain: Option<BacksteppingChain>,
    pub baseline: Option<SingleCbfBaseline>,
    pub alpha: ClassK,
    pub alpha_bar: ClassK,
}

impl Scenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let example = config.system.example();
        let x0 = State::from_slice(&config.x0);
        let chain = build_chain(
            &example.pair,
            Arc::clone(&example.jet),
            example.system.as_ref(),
            &x0,
            example.relative_degree(),
            &config.gains.policy(),
        );
        let chain = match (chain, config.filter) {
            (Ok(c), _) => Some(c),
            (Err(_), FilterKind::None) => None,
            (Err(e), _) => return Err(e),
        };
        let baseline = match config.filter {
            FilterKind::SingleBaseline => Some(SingleCbfBaseline::new(
                example.pair.clone(),
                Arc::clone(&example.jet),
                config.gains.baseline_c1(),
                config.gains.c2,
            )?),
            _ => None,
        };
        Ok(Self {
            alpha: class_k_linear(config.class_k.alpha)?,
            alpha_bar: class_k_linear(config.class_k.alpha_bar)?,
            config: config.clone(),
            example,
            chain,
            baseline,
        })
    }

    pub fn system(&self) -> &dyn ControlAffineSystem {
        self.example.system.as_ref()
    }

    /// Relative degree, i.e. the number of recorded chain levels.
    pub fn levels(&self) -> usize {
        self.example.relative_degree()
    }

    /// `(h_1..h_n, hbar_1..hbar_n)`; levels above 1 are NaN without a chain.
    pub fn level_values(&self, x: &State) -> (Vec<f64>, Vec<f64>) {
        match &self.chain {
            Some(chain) => chain.levels(x),
            None => {
                let n = self.levels();
                let mut h = vec![f64::NAN; n];
                let mut hbar = vec![f64::NAN; n];
                h[0] = self.example.pair.h(x);
                hbar[0] = self.example.pair.hbar(x);
                (h, hbar)
            }
        }
    }
}

/// One evaluation of the closed loop at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStep {
    pub u_nominal: ControlInput,
    pub filter: FilterResult,
    /// Input row of the active constraint (`L_g h_n` or `L_g h2_s`); empty without a filter.
    pub a: DVector<f64>,
    pub slab_lower: f64,
    /// `+inf` for the one-sided baseline.
    pub slab_upper: f64,
    /// Zero-authority validity monitor at this state.
    pub consistent: bool,
}

impl ControlStep {
    pub fn u_filtered(&self) -> &ControlInput {
        &self.filter.u_star
    }
}

/// Nominal input, constraint and filtered input at `(t, x)`.
pub fn closed_loop_control(scenario: &Scenario, t: f64, x: &State) -> Result<ControlStep> {
    if !x.is_finite() {
        return Err(CbfError::NumericalDomain(format!("state not finite at t = {t}")));
    }
    let system = scenario.system();
    let cfg = &scenario.config;
    let u0 = cfg.nominal.evaluate(t, x, system, cfg.seed)?;
    match cfg.filter {
        FilterKind::ParallelPair => {
            let chain = scenario.chain.as_ref().expect("filtered scenarios always build a chain");
            let slab = chain.target_slab(system, &scenario.alpha, &scenario.alpha_bar, x)?;
            let eps = default_eps(&slab.a);
            let filter = solve_closed_form(&slab, &u0, eps)?;
            Ok(ControlStep {
                consistent: zero_lg_consistency(&slab, eps),
                u_nominal: u0,
                filter,
                slab_lower: slab.lower,
                slab_upper: slab.upper,
                a: slab.a,
            })
        }
        FilterKind::SingleBaseline => {
            let baseline = scenario.baseline.as_ref().expect("baseline scenarios build a baseline");
            let c = baseline.constraint(system, x)?;
            let eps = default_eps(&c.a);
            let filter = solve_one_sided(&c.a, c.lower, &u0, eps)?;
            Ok(ControlStep {
                consistent: zero_lg_consistency_one_sided(&c.a, c.lower, eps),
                u_nominal: u0,
                filter,
                slab_lower: c.lower,
                slab_upper: f64::INFINITY,
                a: c.a,
            })
        }
        FilterKind::None => {
            let (lower, upper) = match &scenario.chain {
                Some(chain) => {
                    let slab = chain.target_slab(system, &scenario.alpha, &scenario.alpha_bar, x)?;
                    (slab.lower, slab.upper)
                }
                None => (f64::NAN, f64::NAN),
            };
            Ok(ControlStep {
                filter: FilterResult {
                    u_star: u0.clone(),
                    active: ActiveBranch::Nominal,
                    correction_norm: 0.0,
                },
                u_nominal: u0,
                a: DVector::zeros(0),
                slab_lower: lower,
                slab_upper: upper,
                consistent: true,
            })
        }
    }
}

/// Classical RK4 step of `xdot = f(x) + g(x) u` with `u` held over the step.
pub fn rk4_step(system: &dyn ControlAffineSystem, u: &ControlInput, x: &State, dt: f64) -> Result<State> {
    if !(dt > 0.0) {
        return Err(CbfError::Parameter(format!("dt must be positive, got {dt}")));
    }
    let field = |s: &DVector<f64>| system.vector_field(&State(s.clone()), u);
    let k1 = field(&x.0);
    let k2 = field(&(&x.0 + &k1 * (0.5 * dt)));
    let k3 = field(&(&x.0 + &k2 * (0.5 * dt)));
    let k4 = field(&(&x.0 + &k3 * dt));
    let next = &x.0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().any(|v| !v.is_finite()) {
        return Err(CbfError::NumericalDomain("RK4 step produced a non-finite state".into()));
    }
    Ok(State(next))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: Vec<f64>,
    pub u_nominal: Vec<f64>,
    pub u_filtered: Vec<f64>,
    pub h: Vec<f64>,
    pub hbar: Vec<f64>,
    pub slab_lower: f64,
    pub slab_upper: f64,
    pub active: ActiveBranch,
    pub correction_norm: f64,
}

/// A point where the constraint row lost all input authority: either a sample
/// with `|a| < eps`, or (single-input systems) a sign change of `a` between
/// two samples, located by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorityLoss {
    pub t: f64,
    pub state: Vec<f64>,
    pub slab_lower: f64,
    pub slab_upper: f64,
    /// Whether zero input satisfies the constraint there.
    pub consistent: bool,
    pub interpolated: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub levels: usize,
    pub samples: Vec<Sample>,
    pub authority_losses: Vec<AuthorityLoss>,
}

impl Trajectory {
    fn fold(&self, init: f64, f: impl FnMut(f64, &Sample) -> f64) -> f64 {
        self.samples.iter().fold(init, f)
    }

    pub fn min_h1(&self) -> f64 {
        self.fold(f64::INFINITY, |m, s| m.min(s.h[0]))
    }

    pub fn min_hbar1(&self) -> f64 {
        self.fold(f64::INFINITY, |m, s| m.min(s.hbar[0]))
    }

    /// Smallest `h_i` or `hbar_i` over all levels and samples (NaN levels ignored).
    pub fn min_all_levels(&self) -> f64 {
        self.fold(f64::INFINITY, |m, s| s.h.iter().chain(&s.hbar).fold(m, |m, v| m.min(*v)))
    }

    pub fn max_abs_u_filtered(&self) -> f64 {
        self.fold(0.0, |m, s| s.u_filtered.iter().fold(m, |m, v| m.max(v.abs())))
    }

    pub fn max_correction_norm(&self) -> f64 {
        self.fold(0.0, |m, s| m.max(s.correction_norm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Completed,
    SafetyViolation,
    ControlBlowUp,
    InfeasibleSlab,
    CbfInvalidity,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Completed => "completed",
            EventKind::SafetyViolation => "safety_violation",
            EventKind::ControlBlowUp => "control_blow_up",
            EventKind::InfeasibleSlab => "infeasible_slab",
            EventKind::CbfInvalidity => "cbf_invalidity",
        }
    }

    pub fn is_safety_relevant(&self) -> bool {
        !matches!(self, EventKind::Completed)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: EventKind,
    pub t_event: f64,
    pub detail: String,
}

/// Runs the scenario until the horizon or the first event.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Trajectory, SimEvent)> {
    let scenario = Scenario::new(cfg)?;
    run_built(&scenario)
}

/// Same as [`run_scenario`] for an already built scenario.
pub fn run_built(scenario: &Scenario) -> Result<(Trajectory, SimEvent)> {
    let cfg = &scenario.config;
    let system = scenario.system();
    let dt = cfg.sim.dt;
    let steps = step_count(cfg.sim.horizon, dt);
    let filtered = cfg.filter != FilterKind::None;

    let mut traj = Trajectory {
        state_names: system.state_names(),
        input_names: system.input_names(),
        levels: scenario.levels(),
        samples: Vec::with_capacity(steps + 1),
        authority_losses: Vec::new(),
    };
    let mut x = State::from_slice(&cfg.x0);
    let mut previous: Option<(f64, State, f64)> = None;

    for k in 0..=steps {
        let t = k as f64 * dt;
        let step = match closed_loop_control(scenario, t, &x) {
            Ok(step) => step,
            Err(CbfError::InfeasibleSlab { lower, upper, a_norm }) => {
                let event = SimEvent {
                    kind: EventKind::InfeasibleSlab,
                    t_event: t,
                    detail: format!("lower {lower} > upper {upper} with |a| = {a_norm}"),
                };
                return Ok((traj, event));
            }
            Err(e) => return Err(e),
        };

        let (h, hbar) = scenario.level_values(&x);
        let (h1, hbar1) = (h[0], hbar[0]);
        traj.samples.push(Sample {
            t,
            state: x.as_slice().to_vec(),
            u_nominal: step.u_nominal.as_slice().to_vec(),
            u_filtered: step.u_filtered().as_slice().to_vec(),
            h,
            hbar,
            slab_lower: step.slab_lower,
            slab_upper: step.slab_upper,
            active: step.filter.active,
            correction_norm: step.filter.correction_norm,
        });

        let u_max = step.u_filtered().amax();
        if !(u_max <= cfg.sim.blowup_threshold) {
            let event = SimEvent {
                kind: EventKind::ControlBlowUp,
                t_event: t,
                detail: format!("|u|_inf = {u_max:e} exceeds {:e}", cfg.sim.blowup_threshold),
            };
            return Ok((traj, event));
        }

        if h1 < -cfg.sim.safety_tol || hbar1 < -cfg.sim.safety_tol {
            let event = SimEvent {
                kind: EventKind::SafetyViolation,
                t_event: t,
                detail: format!("h1 = {h1:e}, hbar1 = {hbar1:e}"),
            };
            return Ok((traj, event));
        }

        if filtered {
            if let Some(loss) = crossing(scenario, previous.as_ref(), (t, &x, &step))? {
                let inconsistent = !loss.consistent;
                let t_loss = loss.t;
                traj.authority_losses.push(loss);
                if inconsistent {
                    let event = SimEvent {
                        kind: EventKind::CbfInvalidity,
                        t_event: t_loss,
                        detail: "input row changed sign where zero input violates the constraint".into(),
                    };
                    return Ok((traj, event));
                }
            }
            if step.filter.active == ActiveBranch::ZeroLg {
                traj.authority_losses.push(AuthorityLoss {
                    t,
                    state: x.as_slice().to_vec(),
                    slab_lower: step.slab_lower,
                    slab_upper: step.slab_upper,
                    consistent: step.consistent,
                    interpolated: false,
                });
            }
            if !step.consistent {
                let event = SimEvent {
                    kind: EventKind::CbfInvalidity,
                    t_event: t,
                    detail: format!(
                        "no input authority and zero input violates the constraint (lower {}, upper {})",
                        step.slab_lower, step.slab_upper
                    ),
                };
                return Ok((traj, event));
            }
        }

        if k == steps {
            break;
        }
        let a_scalar = if step.a.len() == 1 { step.a[0] } else { f64::NAN };
        let next = rk4_step(system, step.u_filtered(), &x, dt)?;
        previous = Some((t, std::mem::replace(&mut x, next), a_scalar));
    }

    Ok((
        traj,
        SimEvent {
            kind: EventKind::Completed,
            t_event: steps as f64 * dt,
            detail: String::new(),
        },
    ))
}

/// Sign change of a scalar input row between the previous and current sample.
fn crossing(
    scenario: &Scenario,
    previous: Option<&(f64, State, f64)>,
    current: (f64, &State, &ControlStep),
) -> Result<Option<AuthorityLoss>> {
    let (t, x, step) = current;
    let Some((t_prev, x_prev, a_prev)) = previous else {
        return Ok(None);
    };
    if step.a.len() != 1 {
        return Ok(None);
    }
    let a_now = step.a[0];
    if !(a_prev * a_now < 0.0) {
        return Ok(None);
    }
    let lambda = a_prev / (a_prev - a_now);
    let x_star = State(&x_prev.0 + (&x.0 - &x_prev.0) * lambda);
    let t_star = t_prev + lambda * (t - t_prev);
    let (lower, upper) = match scenario.config.filter {
        FilterKind::ParallelPair => {
            let chain = scenario.chain.as_ref().expect("filtered scenarios always build a chain");
            let slab = chain.target_slab(scenario.system(), &scenario.alpha, &scenario.alpha_bar, &x_star)?;
            (slab.lower, slab.upper)
        }
        FilterKind::SingleBaseline => {
            let baseline = scenario.baseline.as_ref().expect("baseline scenarios build a baseline");
            (baseline.constraint(scenario.system(), &x_star)?.lower, f64::INFINITY)
        }
        FilterKind::None => return Ok(None),
    };
    Ok(Some(AuthorityLoss {
        t: t_star,
        state: x_star.as_slice().to_vec(),
        slab_lower: lower,
        slab_upper: upper,
        consistent: lower <= 0.0 && 0.0 <= upper,
        interpolated: true,
    }))
}
