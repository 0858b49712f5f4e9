pub mod curriculum;
pub mod env;
pub mod error;
pub mod pla;
pub mod rbd;
pub mod rsi;
pub mod scalar;
pub mod spot;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations.
pub mod f64 {
    pub type ChainModel = crate::rbd::ChainModel<f64>;
    pub type ChainState = crate::rbd::ChainState<f64>;
    pub type PlaSystem = crate::pla::PlaSystem<f64>;
    pub type TorquePolytope = crate::pla::TorquePolytope<f64>;
    pub type Actuator = crate::spot::Actuator<f64>;
    pub type ActuatorParams = crate::spot::ActuatorParams<f64>;
    pub type BaseModel = crate::curriculum::BaseModel<f64>;
    pub type Wrench = crate::curriculum::Wrench<f64>;
    pub type Plant = crate::env::Plant<f64>;
    pub type Env = crate::env::Env<f64>;
    pub type Trajectory = crate::env::Trajectory<f64>;
}

/// Single-precision instantiations.
pub mod f32 {
    pub type ChainModel = crate::rbd::ChainModel<f32>;
    pub type ChainState = crate::rbd::ChainState<f32>;
    pub type PlaSystem = crate::pla::PlaSystem<f32>;
    pub type TorquePolytope = crate::pla::TorquePolytope<f32>;
    pub type Actuator = crate::spot::Actuator<f32>;
    pub type ActuatorParams = crate::spot::ActuatorParams<f32>;
    pub type BaseModel = crate::curriculum::BaseModel<f32>;
    pub type Wrench = crate::curriculum::Wrench<f32>;
    pub type Plant = crate::env::Plant<f32>;
    pub type Env = crate::env::Env<f32>;
    pub type Trajectory = crate::env::Trajectory<f32>;
}
