//! Safety functions, safe sets and safe-set control for one-dimensional
//! maps driven by bounded noise.
//!
//! The core is generic over the floating-point type through [`Scalar`];
//! `f64` and `f32` aliases are provided below.

pub mod cli;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod oracle;
pub mod safety;
pub mod scalar;
pub mod verify;

pub use controllers::{
    descent_control_step, partial_control_step, simulate_orbit, uncontrolled_escape_time,
    ControllerKind, DescentController, Monitor, OrbitRecord, PartialController, Step,
};
pub use dynamics::{
    disturbance_support, map_eval, sample_disturbance, DisturbanceModel, Grid, MapSpec, Problem,
    RngStream,
};
pub use error::{Error, Result};
pub use safety::{
    bellman_update, compute_safety_function, extract_safe_set, min_control_bound, minimal_safe_set,
    piece_stats, BellmanOperator, MembershipRule, Piece, PieceStats, SafeSet, SafetyFunction,
    SolverOptions, UpdateStrategy,
};
pub use scalar::Scalar;

pub type Grid64 = Grid<f64>;
pub type Problem64 = Problem<f64>;
pub type SafetyFunction64 = SafetyFunction<f64>;
pub type SafeSet64 = SafeSet<f64>;
pub type OrbitRecord64 = OrbitRecord<f64>;

pub type Grid32 = Grid<f32>;
pub type Problem32 = Problem<f32>;
pub type SafetyFunction32 = SafetyFunction<f32>;
pub type SafeSet32 = SafeSet<f32>;
pub type OrbitRecord32 = OrbitRecord<f32>;
