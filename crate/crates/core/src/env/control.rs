//! Residual action mapping and joint PD control.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::pla::TorquePolytope;
use crate::scalar::Real;

/// Critically damped gains for natural frequency `omega_n`:
/// `K_p = I ω²`, `K_d = 2 I ω`.
pub fn pd_gains<T: Real>(inertia: &DVector<T>, omega_n: T) -> Result<(DVector<T>, DVector<T>)> {
    if !(omega_n > T::zero()) || inertia.iter().any(|&i| !(i > T::zero())) {
        return Err(Error::InvalidParameter(
            "PD design needs positive inertia and frequency".into(),
        ));
    }
    let kp = inertia * (omega_n * omega_n);
    let kd = inertia * (omega_n + omega_n);
    Ok((kp, kd))
}

/// `q̂ + Σ a` with diagonal `Σ`.
pub fn apply_action<T: Real>(
    q_ref: &DVector<T>,
    action: &DVector<T>,
    scale: &DVector<T>,
) -> Result<DVector<T>> {
    check_len("action", q_ref.len(), action.len())?;
    check_len("action scale", q_ref.len(), scale.len())?;
    Ok(q_ref + action.component_mul(scale))
}

/// Joints whose torques are jointly limited by a linkage polytope.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledLimit<T: Real> {
    pub joints: Vec<usize>,
    pub polytope: TorquePolytope<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorqueLimits<T: Real> {
    /// `[min, max]` per joint, used for joints outside every coupled group.
    pub boxes: Vec<[T; 2]>,
    pub coupled: Vec<CoupledLimit<T>>,
}

impl<T: Real> TorqueLimits<T> {
    pub fn boxed(boxes: Vec<[T; 2]>) -> Self {
        Self {
            boxes,
            coupled: Vec::new(),
        }
    }

    /// Closest feasible torque: box clamp per joint, then polytope projection
    /// for each coupled group.
    pub fn project(&self, tau: &DVector<T>) -> Result<DVector<T>> {
        check_len("joint torques", self.boxes.len(), tau.len())?;
        let mut out = tau.clone();
        for (i, b) in self.boxes.iter().enumerate() {
            if !self.coupled.iter().any(|c| c.joints.contains(&i)) {
                out[i] = out[i].max(b[0]).min(b[1]);
            }
        }
        for c in &self.coupled {
            if c.joints.iter().any(|&j| j >= tau.len()) {
                return Err(Error::InvalidParameter(
                    "coupled joint index out of range".into(),
                ));
            }
            let sub = DVector::from_iterator(c.joints.len(), c.joints.iter().map(|&j| tau[j]));
            let p = c.polytope.project(&sub)?;
            for (k, &j) in c.joints.iter().enumerate() {
                out[j] = p[k];
            }
        }
        Ok(out)
    }
}

/// Unprojected `K_p (q_cmd − q) − K_d q̇`.
pub fn pd_demand<T: Real>(
    q_cmd: &DVector<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    kp: &DVector<T>,
    kd: &DVector<T>,
) -> Result<DVector<T>> {
    let n = q_cmd.len();
    for (what, v) in [
        ("joint positions", q),
        ("joint velocities", qd),
        ("kp", kp),
        ("kd", kd),
    ] {
        check_len(what, n, v.len())?;
    }
    Ok((q_cmd - q).component_mul(kp) - qd.component_mul(kd))
}

/// PD torque projected into the feasible set.
pub fn pd_torque<T: Real>(
    q_cmd: &DVector<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    kp: &DVector<T>,
    kd: &DVector<T>,
    limits: &TorqueLimits<T>,
) -> Result<DVector<T>> {
    limits.project(&pd_demand(q_cmd, q, qd, kp, kd)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_examples() {
        let (kp, kd) = pd_gains(&DVector::from_vec(vec![0.5, 1.0]), 20.0).unwrap();
        assert_eq!((kp[0], kd[0]), (200.0, 20.0));
        let (kp, kd) = pd_gains(&DVector::from_vec(vec![1.0]), 10.0).unwrap();
        assert_eq!((kp[0], kd[0]), (100.0, 20.0));
        assert!(pd_gains(&DVector::from_vec(vec![0.0]), 10.0).is_err());
    }

    #[test]
    fn box_clamp() {
        let lim = TorqueLimits::boxed(vec![[-1.0, 1.0], [-5.0, 5.0]]);
        let t = lim.project(&DVector::from_vec(vec![3.0, -2.0])).unwrap();
        assert_eq!(t.as_slice(), &[1.0, -2.0]);
    }
}
