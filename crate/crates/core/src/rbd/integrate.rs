use nalgebra::{DVector, Vector3};

use super::chain::{base_quaternion, ChainModel, ChainState, JointKind};
use super::so3::exp_map;
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Semi-implicit Euler step: velocities first, then positions from the new
/// velocities. The base quaternion is renormalized after every step.
pub fn integrate<T: Real>(
    chain: &ChainModel<T>,
    state: &ChainState<T>,
    qdd: &DVector<T>,
    dt: T,
) -> Result<ChainState<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    chain.check_q(&state.q)?;
    chain.check_v(&state.qd, "joint velocities")?;
    check_len("joint accelerations", chain.nv(), qdd.len())?;
    let qd = &state.qd + qdd * dt;
    let mut q = state.q.clone();
    for (i, joint) in chain.joints().iter().enumerate() {
        let qo = chain.q_offset(i);
        let vo = chain.v_offset(i);
        match joint.kind {
            JointKind::Revolute => q[qo] += qd[vo] * dt,
            JointKind::FloatingBase => {
                let rot = base_quaternion(&state.q);
                let w = Vector3::new(qd[vo], qd[vo + 1], qd[vo + 2]);
                let v = Vector3::new(qd[vo + 3], qd[vo + 4], qd[vo + 5]);
                let dp = rot * v * dt;
                let next = rot * exp_map(&(w * dt));
                let c = next.quaternion().coords;
                q[qo] += dp.x;
                q[qo + 1] += dp.y;
                q[qo + 2] += dp.z;
                q[qo + 3] = c.w;
                q[qo + 4] = c.x;
                q[qo + 5] = c.y;
                q[qo + 6] = c.z;
            }
        }
    }
    Ok(ChainState { q, qd })
}
