//! Parallel-linkage actuators: loop closure, transmission maps, the projected
//! dynamics ladder and output torque polytopes.

mod constrained;
mod eval;
mod linkage;
pub mod mechanisms;
mod models;
mod polytope;
mod system;

pub use constrained::{Baumgarte, ConstrainedState};
pub use eval::{
    evaluate_model_errors, write_model_errors_csv, EvalProtocol, ModelErrorRow,
    MODEL_ERROR_CSV_HEADER,
};
pub use linkage::{
    Closure, ClosureDoc, LinkageDoc, MechanismDoc, PlaLinkage, PushrodBranch, PushrodDoc,
};
pub use models::{
    dynamic_armature_step, exact_projected_dynamics, locally_projected_dynamics,
    map_actuator_torque, nominal_armature_dynamics, simplest_dynamics, ModelContext, PlaModel,
};
pub use polytope::{
    polytope_sweep, torque_polytope, write_polytope_csv, PolytopeSample, TorquePolytope,
    POLYTOPE_CSV_HEADER,
};
pub use system::{ArmatureDecomposition, ClosureSolution, PlaSystem, TransmissionMaps};
