//! Planar articulated quadruped simulator.

pub mod control;
pub mod dynamics;
pub mod kinematics;
pub mod model;
pub mod state;

pub use control::{pd_torque, spring_torque};
pub use dynamics::Simulator;
pub use kinematics::{body_points, collision_flags, BodyPoints, CollisionFlags};
pub use model::{ContactParams, LinkParams, PdGains, RobotModel, SpringMode, SpringSpec, NUM_JOINTS};
pub use state::{contact_summary, ContactSummary, SimState};
