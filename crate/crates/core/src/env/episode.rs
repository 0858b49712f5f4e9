//! Episode runner, scripted policies and the multi-stream rollout loop.

use std::io::Write;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::control::{apply_action, pd_demand, pd_gains, TorqueLimits};
use super::obs::{build_actor_obs, build_critic_obs, CriticExtras, ObsLayout, ObsNoise};
use super::plant::Plant;
use super::randomization::{DomainRandomization, DomainSample};
use super::reward::{regularization_penalty, survival_reward, tracking_reward, RewardWeights};
use super::termination::{check_termination, FailureReason, Status, TerminationParams};
use super::trajectory::Trajectory;
use crate::curriculum::{assistance_scale, assistive_wrench, BaseModel, CurriculumParams, Wrench};
use crate::error::{Error, Result};
use crate::rbd::{forward_dynamics, integrate, ChainState, ExternalWrench};
use crate::rsi::{episode_similarity, max_episode_length, BinTable, EpisodeOutcome, StartState};
use crate::scalar::{cast, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    pub sim_dt: f64,
    pub decimation: usize,
    /// Episode length cap, s.
    pub episode_s: f64,
    /// PD natural frequency against the joint armature, rad/s.
    pub omega_n: f64,
    /// Componentwise clip on policy outputs.
    pub action_clip: f64,
    pub observation_noise: bool,
    pub noise: ObsNoise,
    pub reward: RewardWeights,
    pub termination: TerminationParams,
    pub randomization: DomainRandomization,
    pub curriculum: CurriculumParams,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            sim_dt: 0.004,
            decimation: 5,
            episode_s: 10.0,
            omega_n: 40.0,
            action_clip: 10.0,
            observation_noise: true,
            noise: ObsNoise::default(),
            reward: RewardWeights::default(),
            termination: TerminationParams::default(),
            randomization: DomainRandomization::default(),
            curriculum: CurriculumParams::default(),
        }
    }
}

impl EnvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sim_dt > 0.0 && self.sim_dt.is_finite())
            || self.decimation == 0
            || !(self.episode_s > 0.0 && self.episode_s.is_finite())
            || !(self.omega_n > 0.0 && self.omega_n.is_finite())
            || !(self.action_clip > 0.0)
        {
            return Err(Error::InvalidParameter(
                "environment timing or gains out of range".into(),
            ));
        }
        self.noise.validate()?;
        self.reward.validate()?;
        self.termination.validate()?;
        self.randomization.validate()?;
        self.curriculum.validate()
    }

    pub fn control_dt(&self) -> f64 {
        self.sim_dt * self.decimation as f64
    }

    pub fn episode_steps(&self) -> usize {
        (self.episode_s / self.control_dt()).round() as usize
    }
}

/// Plant plus its controller.
#[derive(Clone, Debug)]
pub struct Env<T: Real> {
    pub plant: Plant<T>,
    pub params: EnvParams,
    pub kp: DVector<T>,
    pub kd: DVector<T>,
    pub limits: TorqueLimits<T>,
}

impl<T: Real> Env<T> {
    pub fn new(plant: Plant<T>, params: EnvParams) -> Result<Self> {
        params.validate()?;
        let (kp, kd) = pd_gains(&plant.armature(), cast(params.omega_n))?;
        let limits = TorqueLimits::boxed(plant.torque_limits());
        Ok(Self {
            plant,
            params,
            kp,
            kd,
            limits,
        })
    }

    pub fn actor_layout(&self) -> ObsLayout {
        let n = self.plant.num_joints();
        ObsLayout::actor(n, n)
    }

    pub fn critic_layout(&self) -> ObsLayout {
        let n = self.plant.num_joints();
        ObsLayout::critic(n, n, self.plant.num_keybodies())
    }

    pub fn check_trajectory(&self, traj: &Trajectory<T>) -> Result<()> {
        let cdt = self.params.control_dt();
        if (traj.dt - cdt).abs() > 1e-9 * cdt {
            return Err(Error::InvalidParameter(format!(
                "reference dt {} differs from control dt {cdt}",
                traj.dt
            )));
        }
        if traj
            .frames
            .first()
            .is_some_and(|f| f.q.len() != self.plant.num_joints())
        {
            return Err(Error::DimensionMismatch {
                what: "reference joints",
                expected: self.plant.num_joints(),
                got: traj.frames[0].q.len(),
            });
        }
        Ok(())
    }
}

/// Information a scripted policy may use beyond the observation.
pub struct PolicyContext<'a> {
    pub layout: &'a ObsLayout,
    pub action_scale: &'a [f64],
}

pub trait Policy<T: Real>: Send {
    fn reset(&mut self) {}
    fn act(&mut self, obs: &DVector<T>, ctx: &PolicyContext<'_>) -> DVector<T>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyKind {
    ZeroResidual,
    /// Zero-mean Gaussian residuals.
    NoisyExpert {
        std: f64,
    },
    /// Residual `gain (q̂ − q) / Σ` from the observed joint positions.
    ProportionalCorrector {
        gain: f64,
    },
    /// Same action every step.
    Constant {
        value: f64,
    },
}

impl PolicyKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            PolicyKind::ZeroResidual => true,
            PolicyKind::NoisyExpert { std } => std >= 0.0 && std.is_finite(),
            PolicyKind::ProportionalCorrector { gain } => gain.is_finite(),
            PolicyKind::Constant { value } => value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "policy parameters out of range".into(),
            ))
        }
    }

    pub fn build<T: Real>(&self, n_actions: usize, seed: u64) -> Box<dyn Policy<T>> {
        match *self {
            PolicyKind::ZeroResidual => Box::new(ConstantPolicy {
                n: n_actions,
                value: 0.0,
            }),
            PolicyKind::Constant { value } => Box::new(ConstantPolicy {
                n: n_actions,
                value,
            }),
            PolicyKind::NoisyExpert { std } => Box::new(NoisyExpert {
                n: n_actions,
                std,
                rng: ChaCha8Rng::seed_from_u64(seed),
            }),
            PolicyKind::ProportionalCorrector { gain } => Box::new(ProportionalCorrector { gain }),
        }
    }
}

pub struct ConstantPolicy {
    pub n: usize,
    pub value: f64,
}

impl<T: Real> Policy<T> for ConstantPolicy {
    fn act(&mut self, _obs: &DVector<T>, _ctx: &PolicyContext<'_>) -> DVector<T> {
        DVector::from_element(self.n, cast(self.value))
    }
}

pub struct NoisyExpert {
    pub n: usize,
    pub std: f64,
    pub rng: ChaCha8Rng,
}

impl<T: Real> Policy<T> for NoisyExpert {
    fn act(&mut self, _obs: &DVector<T>, _ctx: &PolicyContext<'_>) -> DVector<T> {
        if self.std == 0.0 {
            return DVector::zeros(self.n);
        }
        let d = Normal::new(0.0, self.std).expect("validated std");
        DVector::from_iterator(self.n, (0..self.n).map(|_| cast(d.sample(&mut self.rng))))
    }
}

pub struct ProportionalCorrector {
    pub gain: f64,
}

impl<T: Real> Policy<T> for ProportionalCorrector {
    fn act(&mut self, obs: &DVector<T>, ctx: &PolicyContext<'_>) -> DVector<T> {
        let q = ctx.layout.range("joint_positions").expect("actor layout");
        let r = ctx
            .layout
            .range("ref_joint_positions")
            .expect("actor layout");
        DVector::from_iterator(
            q.len(),
            q.zip(r)
                .zip(ctx.action_scale)
                .map(|((i, j), &s)| cast::<T>(self.gain / s) * (obs[j] - obs[i])),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    /// Time since reset, s.
    pub time: f64,
    pub target_frame: usize,
    pub phase: f64,
    pub tracking: [f64; 7],
    pub tracking_total: f64,
    pub regularization: f64,
    pub survival: f64,
    pub reward: f64,
    /// Unweighted joint kernel; zero during the dwell.
    pub similarity: f64,
    pub status: Status,
    pub base_pos: [f64; 3],
    pub assist_force: [f64; 3],
    pub assist_torque: [f64; 3],
    pub q: Vec<f64>,
    pub q_ref: Vec<f64>,
    pub action: Vec<f64>,
    #[serde(skip)]
    pub actor_obs: Option<DVector<f64>>,
    #[serde(skip)]
    pub critic_obs: Option<DVector<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeLog {
    pub trajectory: usize,
    pub bin: usize,
    pub t_init: f64,
    pub start_frame: usize,
    pub beta: f64,
    pub l_max: usize,
    pub timeout_steps: usize,
    pub l_real: usize,
    pub status: Status,
    pub similarity: f64,
    pub domain: DomainSample,
    pub steps: Vec<StepLog>,
}

impl EpisodeLog {
    pub fn outcome(&self) -> EpisodeOutcome {
        EpisodeOutcome {
            trajectory: self.trajectory,
            bin: self.bin,
            similarity: self.similarity,
        }
    }

    pub fn csv_header(n_joints: usize) -> Vec<String> {
        let mut h: Vec<String> = EPISODE_CSV_HEADER.iter().map(|s| s.to_string()).collect();
        for prefix in ["q", "q_ref", "action"] {
            h.extend((0..n_joints).map(|i| format!("{prefix}_{i}")));
        }
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.steps.first().map_or(0, |s| s.q.len());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(n))?;
        for s in &self.steps {
            let mut rec = vec![
                s.step.to_string(),
                s.time.to_string(),
                s.target_frame.to_string(),
                s.phase.to_string(),
            ];
            rec.extend(s.tracking.iter().map(|x| x.to_string()));
            rec.extend(
                [
                    s.tracking_total,
                    s.regularization,
                    s.survival,
                    s.reward,
                    s.similarity,
                ]
                .map(|x| x.to_string()),
            );
            rec.push(s.status.label().to_string());
            rec.extend(
                s.base_pos
                    .iter()
                    .chain(&s.assist_force)
                    .chain(&s.assist_torque)
                    .map(|x| x.to_string()),
            );
            rec.extend(
                s.q.iter()
                    .chain(&s.q_ref)
                    .chain(&s.action)
                    .map(|x| x.to_string()),
            );
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fixed leading columns; per-joint `q_i`, `q_ref_i`, `action_i` follow.
pub const EPISODE_CSV_HEADER: [&str; 26] = [
    "step",
    "time",
    "target_frame",
    "phase",
    "r_base_position",
    "r_base_orientation",
    "r_base_angular_velocity",
    "r_base_linear_velocity",
    "r_joint_position",
    "r_keybody_position",
    "r_keybody_orientation",
    "r_tracking",
    "r_regularization",
    "r_survival",
    "reward",
    "similarity",
    "status",
    "base_x",
    "base_y",
    "base_z",
    "assist_fx",
    "assist_fy",
    "assist_fz",
    "assist_mx",
    "assist_my",
    "assist_mz",
];

/// Per-episode switches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpisodeOptions {
    /// Keep the actor and critic vectors in every step record.
    pub record_observations: bool,
}

fn array3<T: Real>(v: &Vector3<T>) -> [f64; 3] {
    [to_f64(v.x), to_f64(v.y), to_f64(v.z)]
}

fn to_vec<T: Real>(v: &DVector<T>) -> Vec<f64> {
    v.iter().map(|&x| to_f64(x)).collect()
}

/// Runs one episode from `start` with assistance scale `beta` fixed at reset.
///
/// The observation at step `j` targets frame `k0 + j + 1`, where `k0` is the
/// frame at the start time. After the last frame the reference holds for the
/// dwell, whose steps do not enter the similarity.
#[allow(clippy::too_many_arguments)]
pub fn run_episode_from<T: Real, R: Rng + ?Sized>(
    env: &Env<T>,
    traj: &Trajectory<T>,
    start: &StartState,
    beta: f64,
    policy: &mut dyn Policy<T>,
    rng: &mut R,
    options: EpisodeOptions,
) -> Result<EpisodeLog> {
    env.check_trajectory(traj)?;
    let p = &env.params;
    let cdt = p.control_dt();
    let n = traj.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "a trajectory needs at least two frames".into(),
        ));
    }
    let k0 = ((start.t_init / traj.dt).floor().max(0.0) as usize).min(n - 2);
    let l_max = max_episode_length(p.episode_steps(), n - 1 - k0);
    let timeout = p
        .episode_steps()
        .min(l_max + p.termination.dwell_steps(cdt));
    let n_links = env.plant.chain.num_bodies();
    let domain = p.randomization.sample(n_links, timeout as f64 * cdt, rng);
    let plant = if domain.mass_scales.iter().all(|&s| s == 1.0) {
        env.plant.clone()
    } else {
        let s: Vec<T> = domain.mass_scales.iter().map(|&x| cast(x)).collect();
        env.plant.with_mass_scales(&s)?
    };
    let chain = &plant.chain;
    let base_model = BaseModel::from_chain(chain, &chain.neutral_q())?;
    let beta_t: T = cast(beta);
    let sim_dt: T = cast(p.sim_dt);
    let n_j = plant.num_joints();
    let layout = env.actor_layout();
    let scale: Vec<f64> = plant.action_scale.iter().map(|&x| to_f64(x)).collect();
    let ctx = PolicyContext {
        layout: &layout,
        action_scale: &scale,
    };
    let pos_limits = plant.position_limits();
    let tau_limits = plant.torque_limits();
    let clip: T = cast(p.action_clip);
    let duration = traj.duration();

    policy.reset();
    let mut state = traj.frames[k0].to_state(&plant)?;
    let mut meas = plant.measure(&state)?;
    let mut prev_action = DVector::<T>::zeros(n_j);
    let mut scores = Vec::with_capacity(l_max);
    let mut steps = Vec::with_capacity(timeout);
    let mut status = Status::Running;
    let mut next_push = 0;
    let mut sim_steps = 0usize;

    for j in 0..timeout {
        let target = (k0 + j + 1).min(n - 1);
        let r = &traj.frames[target];
        let base_ref = traj.base_reference(target, p.curriculum.accel_clamp);
        let noise_rng = if p.observation_noise {
            Some(&mut *rng)
        } else {
            None
        };
        let obs = build_actor_obs(&meas, r, &prev_action, &p.noise, noise_rng)?;
        let raw = policy.act(&obs, &ctx);
        if raw.len() != n_j {
            return Err(Error::DimensionMismatch {
                what: "policy action",
                expected: n_j,
                got: raw.len(),
            });
        }
        let action = raw.map(|a| a.max(-clip).min(clip));
        let q_cmd = apply_action(&r.q, &action, &plant.action_scale)?;
        let qd_before = meas.qd.clone();
        let mut demand = DVector::zeros(n_j);
        let mut wrench = Wrench::zero();
        let mut numerical = !action.iter().all(|a| a.is_finite());
        for _ in 0..p.decimation {
            if numerical {
                break;
            }
            let qj = plant.joint_positions(&state.q);
            let vj = plant.joint_velocities(&state.qd);
            demand = pd_demand(&q_cmd, &qj, &vj, &env.kp, &env.kd)?;
            let tau_j = env.limits.project(&demand)?;
            let kin = plant.base_kinematics(&state);
            wrench = assistive_wrench(&kin, &base_ref, &base_model, &p.curriculum, beta_t);
            let mut tau = DVector::zeros(chain.nv());
            tau.rows_mut(6, n_j).copy_from(&tau_j);
            let ext = [ExternalWrench {
                link: 0,
                force: wrench.force,
                torque: wrench.torque,
            }];
            let next = forward_dynamics(chain, &state.q, &state.qd, &tau, &ext)
                .and_then(|qdd| integrate(chain, &state, &qdd, sim_dt));
            match next {
                Ok(s) if s.q.iter().chain(s.qd.iter()).all(|x| x.is_finite()) => state = s,
                _ => numerical = true,
            }
            sim_steps += 1;
            while next_push < domain.pushes.len()
                && domain.pushes[next_push].time <= sim_steps as f64 * p.sim_dt
            {
                apply_push(&mut state, domain.pushes[next_push].dv);
                next_push += 1;
            }
        }
        if !numerical {
            meas = plant.measure(&state)?;
        }
        let qdd = (&meas.qd - &qd_before) / cast::<T>(cdt);
        let track = tracking_reward(&meas, r, &p.reward, cdt)?;
        let reg = regularization_penalty(
            &action,
            &prev_action,
            &qdd,
            &meas.q,
            &demand,
            &pos_limits,
            &tau_limits,
            &p.reward,
            cdt,
        )?;
        let survival = survival_reward(&p.reward, cdt);
        status = if numerical {
            Status::Failed(FailureReason::Numerical)
        } else {
            check_termination(&meas, r, None, j + 1, timeout, &p.termination)
        };
        let similarity = if j < l_max && track.similarity.is_finite() {
            scores.push(track.similarity);
            track.similarity
        } else {
            0.0
        };
        let phase = ((target as f64 * traj.dt) / duration).min(1.0);
        let (actor_obs, critic_obs) = if options.record_observations {
            let extras = CriticExtras::new(
                plant.num_keybodies(),
                wrench,
                beta_t,
                track.terms,
                cast(phase),
            );
            let critic = build_critic_obs(&meas, r, &action, &extras)?;
            (Some(obs.map(to_f64)), Some(critic.map(to_f64)))
        } else {
            (None, None)
        };
        steps.push(StepLog {
            step: j,
            time: (j + 1) as f64 * cdt,
            target_frame: target,
            phase,
            tracking: track.terms,
            tracking_total: track.total,
            regularization: reg.total,
            survival,
            reward: track.total + reg.total + survival,
            similarity,
            status,
            base_pos: array3(&meas.base.position),
            assist_force: array3(&wrench.force),
            assist_torque: array3(&wrench.torque),
            q: to_vec(&meas.q),
            q_ref: to_vec(&r.q),
            action: to_vec(&action),
            actor_obs,
            critic_obs,
        });
        prev_action = action;
        if status.is_done() {
            break;
        }
    }
    if status == Status::Failed(FailureReason::Numerical) {
        log::warn!(
            "episode on trajectory {} hit a numerical failure",
            start.trajectory
        );
    }
    let similarity = episode_similarity(&scores, l_max)?;
    Ok(EpisodeLog {
        trajectory: start.trajectory,
        bin: start.bin,
        t_init: start.t_init,
        start_frame: k0,
        beta,
        l_max,
        timeout_steps: timeout,
        l_real: steps.len(),
        status,
        similarity,
        domain,
        steps,
    })
}

/// Adds a world-frame planar velocity change to the base.
fn apply_push<T: Real>(state: &mut ChainState<T>, dv: [f64; 2]) {
    let rot = crate::rbd::base_quaternion(&state.q);
    let body = rot.inverse_transform_vector(&Vector3::new(cast(dv[0]), cast(dv[1]), T::zero()));
    for k in 0..3 {
        state.qd[3 + k] += body[k];
    }
}

/// Samples a start from `table`, runs the episode with the bin's current
/// assistance and feeds the similarity back into the table.
pub fn run_episode<T: Real, R: Rng + ?Sized>(
    env: &Env<T>,
    library: &[Trajectory<T>],
    table: &mut BinTable,
    policy: &mut dyn Policy<T>,
    rng: &mut R,
    options: EpisodeOptions,
) -> Result<EpisodeLog> {
    let log = sample_and_run(env, library, table, policy, rng, options)?;
    table.apply_batch(&[log.outcome()])?;
    Ok(log)
}

fn sample_and_run<T: Real, R: Rng + ?Sized>(
    env: &Env<T>,
    library: &[Trajectory<T>],
    table: &BinTable,
    policy: &mut dyn Policy<T>,
    rng: &mut R,
    options: EpisodeOptions,
) -> Result<EpisodeLog> {
    check_library(library, table)?;
    let start = crate::rsi::sample_start(table, rng)?;
    let beta = assistance_scale(
        table.failure(start.trajectory, start.bin),
        &env.params.curriculum,
    );
    run_episode_from(
        env,
        &library[start.trajectory],
        &start,
        beta,
        policy,
        rng,
        options,
    )
}

fn check_library<T: Real>(library: &[Trajectory<T>], table: &BinTable) -> Result<()> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if library.len() != table.num_trajectories() {
        return Err(Error::DimensionMismatch {
            what: "trajectory library",
            expected: table.num_trajectories(),
            got: library.len(),
        });
    }
    Ok(())
}

/// Builds a sampler table whose durations match the loaded trajectories.
pub fn table_for_library<T: Real>(
    library: &[Trajectory<T>],
    params: crate::rsi::SamplerParams,
) -> Result<BinTable> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let durations: Vec<f64> = library.iter().map(|t| t.duration()).collect();
    let width = match params.bin_width {
        Some(w) => w,
        None => durations.iter().copied().fold(4.0, f64::min),
    };
    BinTable::with_durations(durations, width, params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutParams {
    pub iterations: usize,
    pub episodes_per_stream: usize,
    pub streams: usize,
    pub base_seed: u64,
}

/// Episodes of one iteration in stream order.
pub struct RolloutIteration {
    pub iteration: usize,
    pub episodes: Vec<EpisodeLog>,
}

/// Runs `iterations` rounds of parallel streams. Stream `s` owns an RNG
/// seeded with `base_seed + s` and a policy built with the same seed. Each
/// round reads a frozen table; outcomes are folded in stream order after
/// the join, so results do not depend on thread scheduling.
pub fn rollout<T: Real>(
    env: &Env<T>,
    library: &[Trajectory<T>],
    table: &mut BinTable,
    policy: &PolicyKind,
    params: &RolloutParams,
    options: EpisodeOptions,
    mut on_iteration: impl FnMut(&RolloutIteration, &BinTable) -> Result<()>,
) -> Result<()> {
    if params.streams == 0 {
        return Err(Error::InvalidParameter(
            "at least one stream is required".into(),
        ));
    }
    policy.validate()?;
    check_library(library, table)?;
    let n_a = env.plant.num_joints();
    let mut streams: Vec<(ChaCha8Rng, Box<dyn Policy<T>>)> = (0..params.streams as u64)
        .map(|s| {
            let seed = params.base_seed.wrapping_add(s);
            (
                ChaCha8Rng::seed_from_u64(seed),
                policy.build::<T>(n_a, seed),
            )
        })
        .collect();
    for it in 0..params.iterations {
        let frozen: &BinTable = table;
        let results: Vec<Result<Vec<EpisodeLog>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = streams
                .iter_mut()
                .map(|(rng, pol)| {
                    scope.spawn(move || {
                        (0..params.episodes_per_stream)
                            .map(|_| {
                                sample_and_run(env, library, frozen, pol.as_mut(), rng, options)
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::Numerical("episode stream panicked".into())))
                })
                .collect()
        });
        let mut episodes = Vec::new();
        for r in results {
            episodes.extend(r?);
        }
        let outcomes: Vec<EpisodeOutcome> = episodes.iter().map(EpisodeLog::outcome).collect();
        table.apply_batch(&outcomes)?;
        on_iteration(
            &RolloutIteration {
                iteration: it,
                episodes,
            },
            table,
        )?;
    }
    Ok(())
}

/// Mean, minimum and 10th percentile of episode similarities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySummary {
    pub episodes: usize,
    pub mean: f64,
    pub min: f64,
    pub p10: f64,
    pub max: f64,
}

impl SimilaritySummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("no episodes to summarize".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        // Nearest-rank percentile.
        let rank = ((0.1 * v.len() as f64).ceil() as usize).max(1) - 1;
        Ok(Self {
            episodes: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            p10: v[rank],
            max: v[v.len() - 1],
        })
    }
}
