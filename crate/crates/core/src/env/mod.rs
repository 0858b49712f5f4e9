//! Imitation environment: plant, reference motions, observations, rewards,
//! termination, randomization and the episode runner.

pub mod control;
pub mod episode;
pub mod generate;
pub mod obs;
pub mod plant;
pub mod randomization;
pub mod reward;
pub mod termination;
pub mod trajectory;

pub use control::{apply_action, pd_demand, pd_gains, pd_torque, CoupledLimit, TorqueLimits};
pub use episode::{
    rollout, run_episode, run_episode_from, table_for_library, Env, EnvParams, EpisodeLog,
    EpisodeOptions, Policy, PolicyContext, PolicyKind, RolloutIteration, RolloutParams,
    SimilaritySummary, StepLog, EPISODE_CSV_HEADER,
};
pub use obs::{
    build_actor_obs, build_critic_obs, CriticExtras, ObsLayout, ObsNoise, ACTOR_SLOTS,
    PRIVILEGED_SLOTS,
};
pub use plant::{Measured, Plant, PlantDoc, TOY_PLANT_JSON};
pub use randomization::{DomainRandomization, DomainSample, Push};
pub use reward::{
    kernel, regularization_penalty, survival_reward, tracking_errors, tracking_reward,
    Regularization, RewardWeights, TrackingReward, TRACKING_TERMS,
};
pub use termination::{check_termination, FailureReason, Status, TerminationParams};
pub use trajectory::{FrameDoc, KeybodyDoc, RefState, Trajectory, TrajectoryDoc};
