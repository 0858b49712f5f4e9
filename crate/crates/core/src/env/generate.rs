//! Self-consistent reference motions from forward simulation of the plant.

use nalgebra::{DVector, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::control::{pd_demand, pd_gains, TorqueLimits};
use super::plant::Plant;
use super::trajectory::{RefState, Trajectory};
use crate::error::{Error, Result};
use crate::rbd::{forward_dynamics, integrate, ChainState};
use crate::scalar::{cast, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateParams {
    pub duration_s: f64,
    /// Frame spacing; must be a whole multiple of `sim_dt`.
    pub dt: f64,
    pub sim_dt: f64,
    /// Amplitude of the sinusoidal joint targets, rad.
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub omega_n: f64,
    pub base_height: f64,
}

impl Default for GenerateParams {
    fn default() -> Self {
        Self {
            duration_s: 6.0,
            dt: 0.02,
            sim_dt: 0.004,
            amplitude: 0.4,
            frequency_hz: 0.3,
            omega_n: 40.0,
            base_height: 1.0,
        }
    }
}

impl GenerateParams {
    fn substeps(&self) -> Result<(usize, usize)> {
        let ok = self.duration_s > 0.0
            && self.dt > 0.0
            && self.sim_dt > 0.0
            && self.amplitude >= 0.0
            && self.frequency_hz >= 0.0
            && self.omega_n > 0.0
            && [
                self.duration_s,
                self.dt,
                self.sim_dt,
                self.amplitude,
                self.frequency_hz,
                self.base_height,
            ]
            .iter()
            .all(|x| x.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(
                "generator parameters out of range".into(),
            ));
        }
        let ratio = self.dt / self.sim_dt;
        let sub = ratio.round();
        if (ratio - sub).abs() > 1e-9 || sub < 1.0 {
            return Err(Error::InvalidParameter(
                "frame dt must be a multiple of the simulation step".into(),
            ));
        }
        let frames = (self.duration_s / self.dt).round() as usize;
        if frames < 2 {
            return Err(Error::InvalidParameter(
                "duration must cover at least two frames".into(),
            ));
        }
        Ok((sub as usize, frames))
    }
}

fn frame<T: Real>(plant: &Plant<T>, state: &ChainState<T>) -> Result<RefState<T>> {
    let m = plant.measure(state)?;
    Ok(RefState {
        base_pos: m.base.position,
        base_quat: m.base.orientation,
        base_linvel: m.base_linvel_body,
        base_angvel: m.base.angvel,
        q: m.q,
        qd: m.qd,
        keybodies: m.keybodies,
    })
}

/// Drives the joints toward sinusoids with seed-drawn phases using the
/// armature PD design, holding each torque for one frame interval. The
/// applied torques are stored with the frames.
pub fn generate_reference<T: Real>(
    plant: &Plant<T>,
    params: &GenerateParams,
    seed: u64,
) -> Result<Trajectory<T>> {
    let (sub, n_frames) = params.substeps()?;
    let n_j = plant.num_joints();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..n_j)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let (kp, kd) = pd_gains(&plant.armature(), cast(params.omega_n))?;
    let limits = TorqueLimits::boxed(plant.torque_limits());
    let mut state = plant.state_from_parts(
        &Vector3::new(T::zero(), T::zero(), cast(params.base_height)),
        &UnitQuaternion::identity(),
        &Vector3::zeros(),
        &Vector3::zeros(),
        &DVector::zeros(n_j),
        &DVector::zeros(n_j),
    )?;
    let w = std::f64::consts::TAU * params.frequency_hz;
    let sim_dt: T = cast(params.sim_dt);
    let mut frames = Vec::with_capacity(n_frames);
    let mut torques = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        frames.push(frame(plant, &state)?);
        let t = (k + 1) as f64 * params.dt;
        let target = DVector::from_iterator(
            n_j,
            phases
                .iter()
                .map(|&ph| cast::<T>(params.amplitude * ((w * t + ph).sin() - ph.sin()))),
        );
        let tau_j = limits.project(&pd_demand(
            &target,
            &plant.joint_positions(&state.q),
            &plant.joint_velocities(&state.qd),
            &kp,
            &kd,
        )?)?;
        if k + 1 < n_frames {
            state = hold_torque(plant, &state, &tau_j, sim_dt, sub)?;
        }
        torques.push(tau_j);
    }
    Ok(Trajectory {
        dt: params.dt,
        frames,
        torques: Some(torques),
    })
}

fn hold_torque<T: Real>(
    plant: &Plant<T>,
    state: &ChainState<T>,
    tau_j: &DVector<T>,
    sim_dt: T,
    substeps: usize,
) -> Result<ChainState<T>> {
    let chain = &plant.chain;
    let mut tau = DVector::zeros(chain.nv());
    tau.rows_mut(6, tau_j.len()).copy_from(tau_j);
    let mut s = state.clone();
    for _ in 0..substeps {
        let qdd = forward_dynamics(chain, &s.q, &s.qd, &tau, &[])?;
        s = integrate(chain, &s, &qdd, sim_dt)?;
    }
    if s.q.iter().chain(s.qd.iter()).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("reference simulation diverged".into()));
    }
    Ok(s)
}

/// Replays the stored torques from the first frame and returns the largest
/// absolute deviation of `q`/`qd` from the stored frames.
pub fn replay_deviation<T: Real>(
    plant: &Plant<T>,
    traj: &Trajectory<T>,
    sim_dt: f64,
) -> Result<f64> {
    let torques = traj
        .torques
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("trajectory carries no torques".into()))?;
    let ratio = traj.dt / sim_dt;
    let sub = ratio.round() as usize;
    if (ratio - sub as f64).abs() > 1e-9 || sub == 0 {
        return Err(Error::InvalidParameter(
            "frame dt must be a multiple of the simulation step".into(),
        ));
    }
    let mut state = traj.frames[0].to_state(plant)?;
    let mut worst = 0.0f64;
    for k in 0..traj.len() {
        let expected = traj.frames[k].to_state(plant)?;
        let dq = (&state.q - &expected.q).amax();
        let dv = (&state.qd - &expected.qd).amax();
        worst = worst.max(to_f64(dq)).max(to_f64(dv));
        if k + 1 < traj.len() {
            state = hold_torque(plant, &state, &torques[k], cast(sim_dt), sub)?;
        }
    }
    Ok(worst)
}
