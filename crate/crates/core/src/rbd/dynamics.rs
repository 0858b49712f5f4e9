//! Composite-rigid-body mass matrix, recursive Newton-Euler bias forces and
//! forward dynamics for open chains.

use nalgebra::{DMatrix, DVector, Matrix3xX, Matrix6, Matrix6xX, Vector3, Vector6};

use super::chain::{ChainModel, ChainState, JointKind};
use super::spatial::{force_cross, motion_cross, skew, spatial_inertia, stack, Transform};
use crate::error::{check_len, Error, Result};
use crate::scalar::Real;

/// Force and torque applied to a link, both in world coordinates; the torque is
/// taken about the link frame origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExternalWrench<T: Real> {
    pub link: usize,
    pub force: Vector3<T>,
    pub torque: Vector3<T>,
}

/// Joint motion subspace in link coordinates.
fn motion_subspace<T: Real>(chain: &ChainModel<T>, i: usize) -> Matrix6xX<T> {
    let joint = &chain.joints()[i];
    match joint.kind {
        JointKind::Revolute => {
            let mut s = Matrix6xX::zeros(1);
            s.fixed_view_mut::<3, 1>(0, 0).copy_from(&joint.axis);
            s
        }
        JointKind::FloatingBase => Matrix6xX::identity(6),
    }
}

fn link_inertia<T: Real>(chain: &ChainModel<T>, i: usize) -> Matrix6<T> {
    let l = &chain.links()[i];
    spatial_inertia(l.mass, &l.com, &l.inertia)
}

/// Joint-space mass matrix `M(q)` including joint armatures.
pub fn mass_matrix<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<DMatrix<T>> {
    chain.check_q(q)?;
    let n = chain.num_bodies();
    let xs: Vec<Matrix6<T>> = (0..n)
        .map(|i| chain.joint_transform(i, q).motion_matrix())
        .collect();
    let subspaces: Vec<Matrix6xX<T>> = (0..n).map(|i| motion_subspace(chain, i)).collect();
    let mut composite: Vec<Matrix6<T>> = (0..n).map(|i| link_inertia(chain, i)).collect();
    for i in (0..n).rev() {
        if let Some(p) = chain.joints()[i].parent {
            let add = xs[i].transpose() * composite[i] * xs[i];
            composite[p] += add;
        }
    }
    let mut m = DMatrix::zeros(chain.nv(), chain.nv());
    for i in 0..n {
        let si = &subspaces[i];
        let vi = chain.v_offset(i);
        let mut f: Matrix6xX<T> = composite[i] * si;
        let block = si.transpose() * &f;
        m.view_mut((vi, vi), (si.ncols(), si.ncols()))
            .copy_from(&block);
        let mut j = i;
        while let Some(p) = chain.joints()[j].parent {
            f = xs[j].transpose() * f;
            j = p;
            let sj = &subspaces[j];
            let vj = chain.v_offset(j);
            let block = sj.transpose() * &f;
            m.view_mut((vj, vi), (sj.ncols(), si.ncols()))
                .copy_from(&block);
            m.view_mut((vi, vj), (si.ncols(), sj.ncols()))
                .copy_from(&block.transpose());
        }
    }
    for (i, joint) in chain.joints().iter().enumerate() {
        if joint.kind == JointKind::Revolute {
            let d = chain.v_offset(i);
            m[(d, d)] += joint.armature;
        }
    }
    Ok(m)
}

/// Recursive Newton-Euler inverse dynamics: the generalized force that produces
/// `qdd` at `(q, qd)` under gravity and the given external wrenches.
pub fn inverse_dynamics<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    qdd: &DVector<T>,
    external: &[ExternalWrench<T>],
) -> Result<DVector<T>> {
    chain.check_q(q)?;
    chain.check_v(qd, "joint velocities")?;
    chain.check_v(qdd, "joint accelerations")?;
    let n = chain.num_bodies();
    let mut local: Vec<Transform<T>> = Vec::with_capacity(n);
    let mut world: Vec<Transform<T>> = Vec::with_capacity(n);
    let mut vel: Vec<Vector6<T>> = Vec::with_capacity(n);
    let mut acc: Vec<Vector6<T>> = Vec::with_capacity(n);
    let a_world = stack(&Vector3::zeros(), &(-chain.gravity));
    for i in 0..n {
        let x = chain.joint_transform(i, q);
        let s = motion_subspace(chain, i);
        let vi = chain.v_offset(i);
        let k = s.ncols();
        let vj = &s * qd.rows(vi, k);
        let aj = &s * qdd.rows(vi, k);
        let (v_parent, a_parent, w) = match chain.joints()[i].parent {
            Some(p) => (vel[p], acc[p], world[p].compose(&x)),
            None => (Vector6::zeros(), a_world, x),
        };
        let v = x.apply_motion(&v_parent) + vj;
        let a = x.apply_motion(&a_parent) + aj + motion_cross(&v) * vj;
        local.push(x);
        world.push(w);
        vel.push(v);
        acc.push(a);
    }
    let mut forces: Vec<Vector6<T>> = (0..n)
        .map(|i| {
            let inertia = link_inertia(chain, i);
            inertia * acc[i] + force_cross(&vel[i]) * (inertia * vel[i])
        })
        .collect();
    for w in external {
        if w.link >= n {
            return Err(Error::InvalidParameter(format!(
                "external wrench on link {} of a {n}-link chain",
                w.link
            )));
        }
        let rt = world[w.link].rot.transpose();
        forces[w.link] -= stack(&(rt * w.torque), &(rt * w.force));
    }
    let mut tau = DVector::zeros(chain.nv());
    for i in (0..n).rev() {
        let s = motion_subspace(chain, i);
        let vi = chain.v_offset(i);
        let ti = s.transpose() * forces[i];
        tau.rows_mut(vi, s.ncols()).copy_from(&ti);
        if let Some(p) = chain.joints()[i].parent {
            let fp = local[i].apply_force_to_parent(&forces[i]);
            forces[p] += fp;
        }
    }
    for (i, joint) in chain.joints().iter().enumerate() {
        if joint.kind == JointKind::Revolute {
            let d = chain.v_offset(i);
            tau[d] += joint.armature * qdd[d];
        }
    }
    Ok(tau)
}

/// Coriolis, centrifugal and gravity generalized forces `h(q, qd)`.
pub fn bias_forces<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
) -> Result<DVector<T>> {
    inverse_dynamics(chain, q, qd, &DVector::zeros(chain.nv()), &[])
}

/// Solves `M qdd + h = tau + J^T w` for `qdd`.
pub fn forward_dynamics<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
    external: &[ExternalWrench<T>],
) -> Result<DVector<T>> {
    check_len("joint torques", chain.nv(), tau.len())?;
    let h = inverse_dynamics(chain, q, qd, &DVector::zeros(chain.nv()), external)?;
    let m = mass_matrix(chain, q)?;
    solve_spd(m, tau - h)
}

/// Cholesky solve with an LU fallback for semidefinite-but-invertible systems.
pub(crate) fn solve_spd<T: Real>(m: DMatrix<T>, rhs: DVector<T>) -> Result<DVector<T>> {
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    m.lu().solve(&rhs).ok_or(Error::SingularMassMatrix)
}

/// World-frame linear Jacobian of a point fixed in `link` (given in link coordinates).
pub fn point_jacobian<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    link: usize,
    point: &Vector3<T>,
) -> Result<Matrix3xX<T>> {
    let poses = chain.link_poses(q)?;
    let p = poses[link].transform_point(point);
    let mut jac = Matrix3xX::zeros(chain.nv());
    for j in chain.path_to(link) {
        let vj = chain.v_offset(j);
        let joint = &chain.joints()[j];
        let pose = &poses[j];
        match joint.kind {
            JointKind::Revolute => {
                let axis = pose.rot * joint.axis;
                jac.set_column(vj, &axis.cross(&(p - pose.trans)));
            }
            JointKind::FloatingBase => {
                let r = p - pose.trans;
                jac.fixed_view_mut::<3, 3>(0, vj)
                    .copy_from(&(-skew(&r) * pose.rot));
                jac.fixed_view_mut::<3, 3>(0, vj + 3).copy_from(&pose.rot);
            }
        }
    }
    Ok(jac)
}

/// World-frame `(angular velocity, origin linear velocity)` of every link.
pub fn link_velocities<T: Real>(
    chain: &ChainModel<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
) -> Result<Vec<(Vector3<T>, Vector3<T>)>> {
    chain.check_q(q)?;
    chain.check_v(qd, "joint velocities")?;
    let n = chain.num_bodies();
    let mut world: Vec<Transform<T>> = Vec::with_capacity(n);
    let mut vel: Vec<Vector6<T>> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = chain.joint_transform(i, q);
        let s = motion_subspace(chain, i);
        let vj = &s * qd.rows(chain.v_offset(i), s.ncols());
        let (v_parent, w) = match chain.joints()[i].parent {
            Some(p) => (vel[p], world[p].compose(&x)),
            None => (Vector6::zeros(), x),
        };
        let v = x.apply_motion(&v_parent) + vj;
        let om = w.rot * v.fixed_rows::<3>(0).into_owned();
        let lin = w.rot * v.fixed_rows::<3>(3).into_owned();
        out.push((om, lin));
        world.push(w);
        vel.push(v);
    }
    Ok(out)
}

pub fn kinetic_energy<T: Real>(chain: &ChainModel<T>, state: &ChainState<T>) -> Result<T> {
    let m = mass_matrix(chain, &state.q)?;
    Ok((state.qd.transpose() * m * &state.qd)[(0, 0)] * nalgebra::convert::<f64, T>(0.5))
}

pub fn potential_energy<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<T> {
    let poses = chain.link_poses(q)?;
    Ok(chain
        .links()
        .iter()
        .zip(&poses)
        .fold(T::zero(), |acc, (l, pose)| {
            acc - l.mass * chain.gravity.dot(&pose.transform_point(&l.com))
        }))
}

/// Whole-body center of mass in world coordinates.
pub fn center_of_mass<T: Real>(chain: &ChainModel<T>, q: &DVector<T>) -> Result<Vector3<T>> {
    let poses = chain.link_poses(q)?;
    let mut acc = Vector3::zeros();
    for (l, pose) in chain.links().iter().zip(&poses) {
        acc += pose.transform_point(&l.com) * l.mass;
    }
    Ok(acc / chain.total_mass())
}
