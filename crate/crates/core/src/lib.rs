//! Time-optimal strategies for a surveillance-evasion game between two
//! Dubins cars, where the pursuer keeps the evader inside a conic sensing
//! region and the evader tries to leave it as fast as possible.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`.
//!
//! ```
//! use conic_game::{synthesize, BoundarySide, Params, Seed};
//!
//! let params = Params::from_degrees(40.0).unwrap();
//! let seed = Seed::up(0.8, 120f64.to_radians(), BoundarySide::Right, &params).unwrap();
//! let traj = synthesize(&seed, &params).unwrap();
//! assert!((traj.total_tau - 1.899).abs() < 1e-3);
//! ```

pub mod control;
pub mod error;
pub mod kinematics;
pub mod roots;
pub mod scalar;
pub mod simulate;
pub mod synthesis;
pub mod terminal;
pub mod validation;

pub use control::{ControlSign, SwitchRecord};
pub use error::{GameError, Result};
pub use kinematics::{Controls, CylindricalState, GameParams, Pose, RealisticState, ReducedState};
pub use scalar::Scalar;
pub use simulate::{replay, run_scenario, EusBranch, Scenario, SimResult};
pub use synthesis::{
    synthesize, synthesize_barrier, synthesize_tributary, Emanation, FamilyTag, Termination,
    Trajectory, TrajectorySegment,
};
pub use terminal::{BoundarySide, Seed, SeedKind, TerminalClass};

pub type Params = kinematics::GameParams<f64>;
pub type Reduced = kinematics::ReducedState<f64>;
pub type Cylindrical = kinematics::CylindricalState<f64>;
pub type Realistic = kinematics::RealisticState<f64>;
pub type Costate = control::Costate<f64>;
pub type Seed64 = terminal::Seed<f64>;
pub type Trajectory64 = synthesis::Trajectory<f64>;
pub type Segment64 = synthesis::TrajectorySegment<f64>;
pub type Scenario64 = simulate::Scenario<f64>;
pub type SimResult64 = simulate::SimResult<f64>;
