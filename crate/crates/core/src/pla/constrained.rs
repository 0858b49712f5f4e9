//! Lagrange-multiplier simulation of the full closed-chain mechanism.
//!
//! The main chain and the support chain are integrated as one open tree in
//! coordinates `z = [q; y]`, with the loop closure enforced through
//! multipliers and Baumgarte stabilization.

use nalgebra::{DMatrix, DVector};

use super::system::PlaSystem;
use crate::error::{check_len, Error, Result};
use crate::rbd::{bias_forces, mass_matrix};
use crate::scalar::{cast, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedState<T: Real> {
    pub q: DVector<T>,
    pub qd: DVector<T>,
    /// Support coordinates `[q_i; q_d]`.
    pub y: DVector<T>,
    pub yd: DVector<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Baumgarte<T: Real> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> Default for Baumgarte<T> {
    fn default() -> Self {
        Self {
            alpha: cast(10.0),
            beta: cast(10.0),
        }
    }
}

impl<T: Real> PlaSystem<T> {
    /// A state on the constraint manifold: closure solved and `ẏ = Γ_y q̇_o`.
    pub fn consistent_state(&self, q: &DVector<T>, qd: &DVector<T>) -> Result<ConstrainedState<T>> {
        self.main().check_q(q)?;
        self.main().check_v(qd, "joint velocities")?;
        let q_o = self.outputs_of(q);
        let y = self.solve_y(&q_o, self.nominal_support())?;
        let maps = self.jacobians_at(&q_o, &y)?;
        let yd = maps.gamma_y() * self.outputs_of(qd);
        Ok(ConstrainedState {
            q: q.clone(),
            qd: qd.clone(),
            y,
            yd,
        })
    }

    /// Full-coordinate mass matrix and bias in `z = [q; y]`.
    fn full_dynamics(&self, st: &ConstrainedState<T>) -> Result<(DMatrix<T>, DVector<T>)> {
        let n_m = self.main().nv();
        let n_y = st.y.len();
        let n = n_m + n_y;
        let mut m = DMatrix::zeros(n, n);
        let mut h = DVector::zeros(n);
        m.view_mut((0, 0), (n_m, n_m))
            .copy_from(&mass_matrix(self.main(), &st.q)?);
        h.rows_mut(0, n_m)
            .copy_from(&bias_forces(self.main(), &st.q, &st.qd)?);
        match self.support_chain() {
            None => {
                for k in 0..n_y {
                    m[(n_m + k, n_m + k)] = self.linkage().armature[k];
                }
            }
            Some(chain) => {
                let anc = self.ancestor_dofs();
                let index: Vec<usize> = anc.iter().copied().chain(n_m..n).collect();
                let pick = |v: &DVector<T>, w: &DVector<T>| {
                    DVector::from_iterator(
                        index.len(),
                        anc.iter().map(|&d| v[d]).chain(w.iter().copied()),
                    )
                };
                let qs = pick(&st.q, &st.y);
                let vs = pick(&st.qd, &st.yd);
                let ms = mass_matrix(chain, &qs)?;
                let hs = bias_forces(chain, &qs, &vs)?;
                for (r, &i) in index.iter().enumerate() {
                    h[i] += hs[r];
                    for (c, &j) in index.iter().enumerate() {
                        m[(i, j)] += ms[(r, c)];
                    }
                }
            }
        }
        Ok((m, h))
    }

    /// Closure Jacobian `A = [∂c/∂q, ∂c/∂y]` over the full coordinates.
    fn full_constraint_jacobian(&self, q: &DVector<T>, y: &DVector<T>) -> Result<DMatrix<T>> {
        let n_m = self.main().nv();
        let (c_o, c_y) = self.constraint_jacobians(&self.outputs_of(q), y)?;
        let mut a = DMatrix::zeros(c_y.nrows(), n_m + y.len());
        for (k, &d) in self.output_dofs().iter().enumerate() {
            a.set_column(d, &c_o.column(k));
        }
        a.view_mut((0, n_m), (c_y.nrows(), y.len())).copy_from(&c_y);
        Ok(a)
    }

    /// Accelerations `(q̈, ÿ)` from the stabilized KKT system.
    ///
    /// `tau` acts on the main chain and `tau_i` on the motor coordinates.
    pub fn constrained_accelerations(
        &self,
        st: &ConstrainedState<T>,
        tau: &DVector<T>,
        tau_i: &DVector<T>,
        stab: Baumgarte<T>,
    ) -> Result<(DVector<T>, DVector<T>)> {
        let n_m = self.main().nv();
        let n_y = self.num_support();
        self.main().check_v(tau, "joint torques")?;
        check_len("motor torques", self.num_motors(), tau_i.len())?;
        check_len("support coordinates", n_y, st.y.len())?;
        check_len("support velocities", n_y, st.yd.len())?;
        let n = n_m + n_y;
        let (m, h) = self.full_dynamics(st)?;
        let a = self.full_constraint_jacobian(&st.q, &st.y)?;
        let zd = DVector::from_iterator(n, st.qd.iter().chain(st.yd.iter()).copied());
        let eps = cast::<T>(1e-6);
        let shift = |s: T| -> Result<DMatrix<T>> {
            let q = &st.q + &st.qd * s;
            let y = &st.y + &st.yd * s;
            self.full_constraint_jacobian(&q, &y)
        };
        let adot_zd = (shift(eps)? - shift(-eps)?) * &zd / (eps + eps);
        let c = self.residual(&self.outputs_of(&st.q), &st.y)?;
        let k = a.nrows();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&m);
        kkt.view_mut((0, n), (n, k)).copy_from(&a.transpose());
        kkt.view_mut((n, 0), (k, n)).copy_from(&a);
        let mut rhs = DVector::zeros(n + k);
        let mut force = -h;
        force.rows_mut(0, n_m).axpy(T::one(), tau, T::one());
        for j in 0..self.num_motors() {
            force[n_m + j] += tau_i[j];
        }
        rhs.rows_mut(0, n).copy_from(&force);
        let two = cast::<T>(2.0);
        let stabilize = -adot_zd - (&a * &zd) * (two * stab.alpha) - c * (stab.beta * stab.beta);
        rhs.rows_mut(n, k).copy_from(&stabilize);
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular constrained KKT system".into()))?;
        Ok((
            sol.rows(0, n_m).into_owned(),
            sol.rows(n_m, n_y).into_owned(),
        ))
    }

    /// One semi-implicit Euler step of the constrained system.
    pub fn constrained_step(
        &self,
        st: &ConstrainedState<T>,
        tau: &DVector<T>,
        tau_i: &DVector<T>,
        stab: Baumgarte<T>,
        dt: T,
    ) -> Result<ConstrainedState<T>> {
        let (qdd, ydd) = self.constrained_accelerations(st, tau, tau_i, stab)?;
        let qd = &st.qd + qdd * dt;
        let yd = &st.yd + ydd * dt;
        Ok(ConstrainedState {
            q: &st.q + &qd * dt,
            y: &st.y + &yd * dt,
            qd,
            yd,
        })
    }
}
