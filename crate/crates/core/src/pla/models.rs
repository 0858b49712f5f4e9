//! Exact projected dynamics and its approximations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::system::{PlaSystem, TransmissionMaps};
use crate::error::{check_len, Result};
use crate::rbd::{bias_forces, mass_matrix, solve_spd};
use crate::scalar::Real;

/// The model ladder, from the oracle down to the cheapest approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaModel {
    Exact,
    LocallyProjected,
    DynamicArmature,
    NominalArmature,
    Simplest,
}

impl PlaModel {
    pub const ALL: [PlaModel; 5] = [
        PlaModel::Exact,
        PlaModel::LocallyProjected,
        PlaModel::DynamicArmature,
        PlaModel::NominalArmature,
        PlaModel::Simplest,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PlaModel::Exact => "exact",
            PlaModel::LocallyProjected => "locally_projected",
            PlaModel::DynamicArmature => "dynamic_armature",
            PlaModel::NominalArmature => "nominal_armature",
            PlaModel::Simplest => "simplest",
        }
    }
}

/// Per-simulation state the models carry between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelContext<T: Real> {
    /// Last closure solution `[q_i; q_d]`, used as the Newton warm start.
    pub support: DVector<T>,
    /// `q̈_o` from the previous step (zero at the start).
    pub qdd_o_prev: DVector<T>,
}

impl<T: Real> ModelContext<T> {
    pub fn new(sys: &PlaSystem<T>) -> Self {
        Self {
            support: sys.nominal_support().clone(),
            qdd_o_prev: DVector::zeros(sys.num_outputs()),
        }
    }
}

impl<T: Real> PlaSystem<T> {
    /// Projected mass matrix `M_M + Gᵀ M_S G` at a consistent configuration.
    pub fn projected_mass_matrix(
        &self,
        q: &DVector<T>,
        warm: Option<&DVector<T>>,
    ) -> Result<DMatrix<T>> {
        let q_o = self.outputs_of(q);
        let y = self.solve_y(&q_o, warm.unwrap_or(self.nominal_support()))?;
        let maps = self.jacobians_at(&q_o, &y)?;
        let g = self.support_map(&maps);
        let m_s = self.support_mass(q, &y)?;
        Ok(mass_matrix(self.main(), q)? + g.transpose() * m_s * g)
    }

    /// Map from main-chain velocities to support-chain velocities.
    fn support_map(&self, maps: &TransmissionMaps<T>) -> DMatrix<T> {
        let anc = self.ancestor_dofs();
        let gamma_y = maps.gamma_y();
        let n_y = gamma_y.nrows();
        let mut g = DMatrix::zeros(anc.len() + n_y, self.main().nv());
        for (k, &d) in anc.iter().enumerate() {
            g[(k, d)] = T::one();
        }
        for (c, &d) in self.output_dofs().iter().enumerate() {
            for r in 0..n_y {
                g[(anc.len() + r, d)] = gamma_y[(r, c)];
            }
        }
        g
    }

    fn support_q(&self, q: &DVector<T>, y: &DVector<T>) -> DVector<T> {
        let anc = self.ancestor_dofs();
        DVector::from_iterator(
            anc.len() + y.len(),
            anc.iter().map(|&d| q[d]).chain(y.iter().copied()),
        )
    }

    fn support_mass(&self, q: &DVector<T>, y: &DVector<T>) -> Result<DMatrix<T>> {
        match self.support_chain() {
            Some(chain) => mass_matrix(chain, &self.support_q(q, y)),
            None => Ok(DMatrix::from_diagonal(&self.linkage().armature)),
        }
    }

    fn support_bias(
        &self,
        q: &DVector<T>,
        y: &DVector<T>,
        qd_s: &DVector<T>,
    ) -> Result<DVector<T>> {
        match self.support_chain() {
            Some(chain) => bias_forces(chain, &self.support_q(q, y), qd_s),
            None => Ok(DVector::zeros(y.len())),
        }
    }

    /// Joint accelerations of the main chain under `model`.
    ///
    /// `tau` is the main-chain generalized force; its output entries hold
    /// `τ_o = Γ_iᵀ τ_i` (see [`PlaSystem::joint_torques`]). The context's warm
    /// start and previous output acceleration are updated.
    pub fn accelerations(
        &self,
        model: PlaModel,
        q: &DVector<T>,
        qd: &DVector<T>,
        tau: &DVector<T>,
        ctx: &mut ModelContext<T>,
    ) -> Result<DVector<T>> {
        let main = self.main();
        main.check_q(q)?;
        main.check_v(qd, "joint velocities")?;
        main.check_v(tau, "joint torques")?;
        check_len(
            "previous output accelerations",
            self.num_outputs(),
            ctx.qdd_o_prev.len(),
        )?;
        let mut m = mass_matrix(main, q)?;
        let mut rhs = tau - bias_forces(main, q, qd)?;
        let out = self.output_dofs();
        let q_o = self.outputs_of(q);
        let qd_o = self.outputs_of(qd);
        if model == PlaModel::Simplest {
            add_block(&mut m, out, &self.nominal_armature().d_o);
            let qdd = solve_spd(m, rhs)?;
            ctx.qdd_o_prev = self.outputs_of(&qdd);
            return Ok(qdd);
        }
        let y = self.solve_y(&q_o, &ctx.support)?;
        let maps = self.rates_at(&q_o, &qd_o, &y)?;
        match model {
            PlaModel::Exact => {
                let g = self.support_map(&maps);
                let qd_s = &g * qd;
                let m_s = self.support_mass(q, &y)?;
                let h_s = self.support_bias(q, &y, &qd_s)?;
                let n_anc = self.ancestor_dofs().len();
                let mut gdot_qd = DVector::zeros(n_anc + y.len());
                gdot_qd
                    .rows_mut(n_anc, y.len())
                    .copy_from(&(maps.gamma_y_dot() * &qd_o));
                m += g.transpose() * &m_s * &g;
                rhs -= g.transpose() * (h_s + &m_s * gdot_qd);
            }
            _ => {
                let arm = &self.linkage().armature;
                let h0 = maps.gamma_i.transpose() * arm.component_mul(&(&maps.gamma_i_dot * &qd_o));
                let (block, fictitious) = match model {
                    PlaModel::LocallyProjected => (self.decompose(&maps).m_o, None),
                    PlaModel::DynamicArmature => {
                        let dec = self.decompose(&maps);
                        (dec.d_o, Some(dec.o_o))
                    }
                    _ => {
                        let dec = self.nominal_armature();
                        (dec.d_o.clone(), Some(dec.o_o.clone()))
                    }
                };
                add_block(&mut m, out, &block);
                let mut h = h0;
                if let Some(o) = fictitious {
                    h += o * &ctx.qdd_o_prev;
                }
                for (k, &d) in out.iter().enumerate() {
                    rhs[d] -= h[k];
                }
            }
        }
        let qdd = solve_spd(m, rhs)?;
        ctx.support = y;
        ctx.qdd_o_prev = self.outputs_of(&qdd);
        Ok(qdd)
    }
}

fn add_block<T: Real>(m: &mut DMatrix<T>, dofs: &[usize], block: &DMatrix<T>) {
    for (r, &i) in dofs.iter().enumerate() {
        for (c, &j) in dofs.iter().enumerate() {
            m[(i, j)] += block[(r, c)];
        }
    }
}

fn one_shot<T: Real>(
    sys: &PlaSystem<T>,
    model: PlaModel,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
    qdd_o_prev: Option<&DVector<T>>,
) -> Result<DVector<T>> {
    let mut ctx = ModelContext::new(sys);
    if let Some(prev) = qdd_o_prev {
        ctx.qdd_o_prev = prev.clone();
    }
    sys.accelerations(model, q, qd, tau, &mut ctx)
}

/// Exact projected model: `(M_M + Gᵀ M_S G) q̈ = τ − h_M − Gᵀ h_S − Gᵀ M_S Ġ q̇`.
pub fn exact_projected_dynamics<T: Real>(
    sys: &PlaSystem<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
) -> Result<DVector<T>> {
    one_shot(sys, PlaModel::Exact, q, qd, tau, None)
}

/// Massless support links; motor inertia projected through `Γ_i(q_o)`.
pub fn locally_projected_dynamics<T: Real>(
    sys: &PlaSystem<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
) -> Result<DVector<T>> {
    one_shot(sys, PlaModel::LocallyProjected, q, qd, tau, None)
}

/// Diagonal armature `D_o(q_o)` with the coupling moved to the force side
/// using the previous step's output acceleration.
pub fn dynamic_armature_step<T: Real>(
    sys: &PlaSystem<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
    qdd_o_prev: &DVector<T>,
) -> Result<DVector<T>> {
    one_shot(sys, PlaModel::DynamicArmature, q, qd, tau, Some(qdd_o_prev))
}

/// Like [`dynamic_armature_step`] with `D̄_o`, `Ō_o` frozen at `q_nom`.
pub fn nominal_armature_dynamics<T: Real>(
    sys: &PlaSystem<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
    qdd_o_prev: &DVector<T>,
) -> Result<DVector<T>> {
    one_shot(sys, PlaModel::NominalArmature, q, qd, tau, Some(qdd_o_prev))
}

/// Constant diagonal armature `D̄_o` only.
pub fn simplest_dynamics<T: Real>(
    sys: &PlaSystem<T>,
    q: &DVector<T>,
    qd: &DVector<T>,
    tau: &DVector<T>,
) -> Result<DVector<T>> {
    one_shot(sys, PlaModel::Simplest, q, qd, tau, None)
}

/// `τ_o = Γ_iᵀ τ_i`.
pub fn map_actuator_torque<T: Real>(
    gamma_i: &DMatrix<T>,
    tau_i: &DVector<T>,
) -> Result<DVector<T>> {
    check_len("motor torques", gamma_i.nrows(), tau_i.len())?;
    Ok(gamma_i.transpose() * tau_i)
}
