//! Spatial rigid-body algorithms for small open chains and rotation utilities.
//!
//! Conventions: z-up world with gravity `(0, 0, -9.81)` by default, right-handed
//! body frames, spatial vectors ordered `[angular; linear]`.

mod chain;
mod dynamics;
mod integrate;
pub mod schema;
pub mod so3;
pub mod spatial;

pub use chain::{base_quaternion, ChainModel, ChainState, Joint, JointKind, JointLimits, Link};
pub(crate) use dynamics::solve_spd;
pub use dynamics::{
    bias_forces, center_of_mass, forward_dynamics, inverse_dynamics, kinetic_energy,
    link_velocities, mass_matrix, point_jacobian, potential_energy, ExternalWrench,
};
pub use integrate::integrate;
pub use so3::{boxminus, exp_map, gravity_in_frame, log_map};
pub use spatial::Transform;
