//! Constant-sum control barrier function pairs.
//!
//! A pair `h`, `hbar = b - h` with `b > 0` bounds the state inside a corridor
//! `0 <= h <= b`. Both barrier conditions combine into one slab constraint
//! `lower <= L_g h u <= upper` whose width never shrinks below zero, so the
//! minimum-norm filter has a closed form and stays bounded where `L_g h`
//! vanishes.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backstepping;
pub mod cli;
pub mod barrier;
pub mod config;
pub mod error;
pub mod filter;
pub mod oracle;
pub mod sim;
pub mod systems;
pub mod trajectory;

pub use backstepping::{build_chain, BacksteppingChain, GainPolicy, SmoothJet};
pub use barrier::{
    class_k_linear, eval_slab, lie_derivatives, verify_parallel, BarrierField, ClassK, ConstraintSlab,
    ControlAffineSystem, ControlInput, ParallelPair, State,
};
pub use error::{CbfError, Result};
pub use filter::{default_eps, solve_closed_form, solve_one_sided, ActiveBranch, FilterResult};
pub use sim::{closed_loop_control, rk4_step, run_scenario, EventKind, FilterKind, ScenarioConfig, SimEvent, Trajectory};
pub use systems::{Example, SystemKind};
