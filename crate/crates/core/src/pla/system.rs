//! Main chain plus linkage: loop closure and transmission maps.

use nalgebra::{DMatrix, DVector, Vector3};

use super::linkage::{Closure, PlaLinkage};
use crate::error::{check_len, Error, Result};
use crate::rbd::{point_jacobian, ChainModel, Joint, JointKind, Link, Transform};
use crate::scalar::{cast, Real};

const MAX_NEWTON_ITERATIONS: usize = 50;
const CONTINUATION_STEPS: usize = 16;

/// Velocity maps from output joint rates to motor and passive support rates.
///
/// `q̇_d = Γ_d q̇_o`, `q̇_i = Γ_i q̇_o`. The `_dot` members are time
/// derivatives along the current `q̇_o` (zero when only positions were given).
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMaps<T: Real> {
    pub gamma_d: DMatrix<T>,
    pub gamma_i: DMatrix<T>,
    pub gamma_d_dot: DMatrix<T>,
    pub gamma_i_dot: DMatrix<T>,
}

impl<T: Real> TransmissionMaps<T> {
    /// Block map `G = [I 0; 0 Γ_d; 0 Γ_i]` from `[q̇_p; q̇_o]` to `[q̇_p; q̇_d; q̇_i]`.
    pub fn g(&self, n_passive: usize) -> DMatrix<T> {
        let n_o = self.gamma_i.ncols();
        let n_d = self.gamma_d.nrows();
        let n_i = self.gamma_i.nrows();
        let mut g = DMatrix::zeros(n_passive + n_d + n_i, n_passive + n_o);
        g.view_mut((0, 0), (n_passive, n_passive))
            .fill_with_identity();
        g.view_mut((n_passive, n_passive), (n_d, n_o))
            .copy_from(&self.gamma_d);
        g.view_mut((n_passive + n_d, n_passive), (n_i, n_o))
            .copy_from(&self.gamma_i);
        g
    }

    /// `[Γ_i; Γ_d]`, the ordering of the internal support coordinates.
    pub(crate) fn gamma_y(&self) -> DMatrix<T> {
        stack_rows(&self.gamma_i, &self.gamma_d)
    }

    pub(crate) fn gamma_y_dot(&self) -> DMatrix<T> {
        stack_rows(&self.gamma_i_dot, &self.gamma_d_dot)
    }
}

fn stack_rows<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

/// Solved support coordinates for one output configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureSolution<T: Real> {
    pub q_d: DVector<T>,
    pub q_i: DVector<T>,
    /// Final `‖c‖∞`.
    pub residual: T,
    pub iterations: usize,
}

/// Split of the locally projected armature `M_o = Γ_iᵀ I_i Γ_i` into its
/// diagonal `D_o` and off-diagonal `O_o` parts.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmatureDecomposition<T: Real> {
    pub m_o: DMatrix<T>,
    pub d_o: DMatrix<T>,
    pub o_o: DMatrix<T>,
}

impl<T: Real> ArmatureDecomposition<T> {
    pub fn from_mass(m_o: DMatrix<T>) -> Self {
        let d_o = DMatrix::from_diagonal(&m_o.diagonal());
        let o_o = &m_o - &d_o;
        Self { m_o, d_o, o_o }
    }

    /// `max_j Σ_k |O_jk| / D_jj`; below one means strictly diagonally dominant.
    pub fn dominance_ratio(&self) -> T {
        let mut worst = T::zero();
        for j in 0..self.m_o.nrows() {
            let off = self
                .o_o
                .row(j)
                .iter()
                .fold(T::zero(), |acc, v| acc + v.abs());
            worst = worst.max(off / self.d_o[(j, j)]);
        }
        worst
    }
}

/// A fixed-base revolute main chain driven through a parallel linkage.
///
/// Internally the support coordinates are ordered `y = [q_i; q_d]`. For
/// pushrod linkages `q_d` holds the two universal-joint angles of every branch,
/// first axes of all branches followed by second axes.
#[derive(Clone, Debug)]
pub struct PlaSystem<T: Real> {
    main: ChainModel<T>,
    linkage: PlaLinkage<T>,
    output_dofs: Vec<usize>,
    passive_dofs: Vec<usize>,
    /// Output joints re-rooted at the motor-carrying link.
    output_chain: ChainModel<T>,
    /// Pushrod branches rooted at the motor-carrying link (kinematics only).
    closure_chain: Option<ChainModel<T>>,
    /// Massless copies of the motor-carrying link's ancestors followed by the
    /// branches, used for the support-chain dynamics.
    support: Option<ChainModel<T>>,
    /// Main-chain dof of each ancestor copy in `support`.
    ancestor_dofs: Vec<usize>,
    nominal_y: DVector<T>,
    nominal_armature: ArmatureDecomposition<T>,
}

impl<T: Real> PlaSystem<T> {
    pub fn new(main: ChainModel<T>, linkage: PlaLinkage<T>) -> Result<Self> {
        linkage.validate()?;
        if main.is_floating() {
            return Err(Error::InvalidModel(
                "linkage main chains must have a fixed base".into(),
            ));
        }
        let mut output_dofs = Vec::with_capacity(linkage.output_joints.len());
        for name in &linkage.output_joints {
            let j = main
                .find_joint(name)
                .ok_or_else(|| Error::InvalidModel(format!("unknown output joint {name}")))?;
            output_dofs.push(j);
        }
        for pair in output_dofs.windows(2) {
            if main.joints()[pair[1]].parent != Some(pair[0]) {
                return Err(Error::InvalidModel(
                    "output joints must form a serial chain".into(),
                ));
            }
        }
        let passive_dofs = (0..main.nv())
            .filter(|d| !output_dofs.contains(d))
            .collect();
        let parent_link = main.joints()[output_dofs[0]].parent;
        let output_chain = {
            let links = output_dofs
                .iter()
                .map(|&j| main.links()[j].clone())
                .collect();
            let joints = output_dofs
                .iter()
                .enumerate()
                .map(|(k, &j)| {
                    let mut joint = main.joints()[j].clone();
                    joint.parent = k.checked_sub(1);
                    joint
                })
                .collect();
            ChainModel::new_allow_massless(links, joints, Vector3::zeros())?
        };
        let (closure_chain, support, ancestor_dofs) = match &linkage.closure {
            Closure::Linear { .. } => (None, None, Vec::new()),
            Closure::Pushrod { .. } => {
                let closure_chain =
                    branch_chain(&linkage, None, Vec::new(), Vec::new(), Vector3::zeros())?;
                let ancestors = parent_link.map(|p| main.path_to(p)).unwrap_or_default();
                let mut links = Vec::new();
                let mut joints = Vec::new();
                for (k, &a) in ancestors.iter().enumerate() {
                    links.push(Link::massless(main.links()[a].name.clone()));
                    let mut joint = main.joints()[a].clone();
                    joint.parent = k.checked_sub(1);
                    joint.armature = T::zero();
                    joints.push(joint);
                }
                let root = ancestors.len().checked_sub(1);
                let support = branch_chain(&linkage, root, links, joints, main.gravity)?;
                (Some(closure_chain), Some(support), ancestors)
            }
        };
        let mut sys = Self {
            main,
            linkage,
            output_dofs,
            passive_dofs,
            output_chain,
            closure_chain,
            support,
            ancestor_dofs,
            nominal_y: DVector::zeros(0),
            nominal_armature: ArmatureDecomposition::from_mass(DMatrix::zeros(0, 0)),
        };
        let n_y = sys.num_support();
        let nominal = sys.linkage.nominal.clone();
        sys.nominal_y = sys.solve_y(&nominal, &DVector::zeros(n_y))?;
        let maps = sys.jacobians_at(&nominal, &sys.nominal_y)?;
        sys.nominal_armature = sys.decompose(&maps);
        Ok(sys)
    }

    pub fn main(&self) -> &ChainModel<T> {
        &self.main
    }

    pub fn linkage(&self) -> &PlaLinkage<T> {
        &self.linkage
    }

    /// Main-chain dofs of `q_o`.
    pub fn output_dofs(&self) -> &[usize] {
        &self.output_dofs
    }

    /// Main-chain dofs of `q_p`.
    pub fn passive_dofs(&self) -> &[usize] {
        &self.passive_dofs
    }

    pub fn num_outputs(&self) -> usize {
        self.output_dofs.len()
    }

    pub fn num_motors(&self) -> usize {
        self.linkage.num_motors()
    }

    pub(crate) fn num_support(&self) -> usize {
        self.linkage.num_motors() + self.linkage.num_dependent()
    }

    pub(crate) fn support_chain(&self) -> Option<&ChainModel<T>> {
        self.support.as_ref()
    }

    pub(crate) fn ancestor_dofs(&self) -> &[usize] {
        &self.ancestor_dofs
    }

    /// Support coordinates `[q_i; q_d]` at `q_nom`.
    pub fn nominal_support(&self) -> &DVector<T> {
        &self.nominal_y
    }

    /// `D̄_o` and `Ō_o`, evaluated once at `q_nom`.
    pub fn nominal_armature(&self) -> &ArmatureDecomposition<T> {
        &self.nominal_armature
    }

    pub fn outputs_of(&self, q: &DVector<T>) -> DVector<T> {
        DVector::from_iterator(
            self.output_dofs.len(),
            self.output_dofs.iter().map(|&d| q[d]),
        )
    }

    /// Closure residual `c(q_o, y)`.
    pub(crate) fn residual(&self, q_o: &DVector<T>, y: &DVector<T>) -> Result<DVector<T>> {
        match &self.linkage.closure {
            Closure::Linear { ratios } => Ok(y - ratios * q_o),
            Closure::Pushrod { branches } => {
                let closure = self.closure_chain.as_ref().expect("pushrod closure chain");
                let out_poses = self.output_chain.link_poses(q_o)?;
                let end = out_poses.last().expect("at least one output");
                let rod_poses = closure.link_poses(y)?;
                let b = branches.len();
                let mut c = DVector::zeros(3 * b);
                for (k, br) in branches.iter().enumerate() {
                    let p_rod = rod_poses[2 * b + k].transform_point(&br.rod_end);
                    let p_att = end.transform_point(&br.attachment);
                    c.fixed_rows_mut::<3>(3 * k).copy_from(&(p_rod - p_att));
                }
                Ok(c)
            }
        }
    }

    /// `(∂c/∂q_o, ∂c/∂y)`.
    pub(crate) fn constraint_jacobians(
        &self,
        q_o: &DVector<T>,
        y: &DVector<T>,
    ) -> Result<(DMatrix<T>, DMatrix<T>)> {
        match &self.linkage.closure {
            Closure::Linear { ratios } => {
                Ok((-ratios.clone(), DMatrix::identity(y.len(), y.len())))
            }
            Closure::Pushrod { branches } => {
                let closure = self.closure_chain.as_ref().expect("pushrod closure chain");
                let b = branches.len();
                let n_o = q_o.len();
                let last = n_o - 1;
                let mut c_o = DMatrix::zeros(3 * b, n_o);
                let mut c_y = DMatrix::zeros(3 * b, 3 * b);
                for (k, br) in branches.iter().enumerate() {
                    let jo = point_jacobian(&self.output_chain, q_o, last, &br.attachment)?;
                    c_o.view_mut((3 * k, 0), (3, n_o)).copy_from(&(-jo));
                    let jy = point_jacobian(closure, y, 2 * b + k, &br.rod_end)?;
                    c_y.view_mut((3 * k, 0), (3, 3 * b)).copy_from(&jy);
                }
                Ok((c_o, c_y))
            }
        }
    }

    fn closure_tolerance() -> T {
        let eps = T::default_epsilon();
        cast::<T>(1e-10).max(eps * cast(100.0))
    }

    /// Damped Newton on `c(q_o, y) = 0` from `start`.
    pub(crate) fn solve_y(&self, q_o: &DVector<T>, start: &DVector<T>) -> Result<DVector<T>> {
        Ok(self.solve(q_o, start)?.0)
    }

    /// Newton from `start`, falling back to continuation from `q_nom`.
    fn solve(&self, q_o: &DVector<T>, start: &DVector<T>) -> Result<(DVector<T>, T, usize)> {
        let first = self.newton(q_o, start);
        if first.is_ok() || self.nominal_y.len() != start.len() {
            return first;
        }
        let nominal = &self.linkage.nominal;
        let mut y = self.nominal_y.clone();
        let mut total = 0;
        for k in 1..=CONTINUATION_STEPS {
            let s: T = cast(k as f64 / CONTINUATION_STEPS as f64);
            let target = nominal + (q_o - nominal) * s;
            let (next, _, it) = self.newton(&target, &y).map_err(|_| first_error(&first))?;
            y = next;
            total += it;
        }
        let (y, residual, it) = self.newton(q_o, &y)?;
        Ok((y, residual, total + it))
    }

    fn newton(&self, q_o: &DVector<T>, start: &DVector<T>) -> Result<(DVector<T>, T, usize)> {
        check_len("output positions", self.num_outputs(), q_o.len())?;
        check_len("support coordinates", self.num_support(), start.len())?;
        let tol = Self::closure_tolerance();
        let mut y = start.clone();
        let mut c = self.residual(q_o, &y)?;
        let mut norm = c.amax();
        for it in 0..MAX_NEWTON_ITERATIONS {
            if norm < tol {
                return Ok((y, norm, it));
            }
            let (_, c_y) = self.constraint_jacobians(q_o, &y)?;
            let step = c_y.lu().solve(&c).ok_or(Error::TransmissionSingularity)?;
            let mut alpha = T::one();
            loop {
                let trial = &y - &step * alpha;
                let c_trial = self.residual(q_o, &trial)?;
                let n_trial = c_trial.amax();
                if n_trial < norm || alpha < cast(1e-3) {
                    y = trial;
                    c = c_trial;
                    norm = n_trial;
                    break;
                }
                alpha *= cast(0.5);
            }
        }
        if norm < tol {
            return Ok((y, norm, MAX_NEWTON_ITERATIONS));
        }
        Err(Error::WorkspaceViolation {
            iterations: MAX_NEWTON_ITERATIONS,
            residual: crate::scalar::to_f64(norm),
        })
    }

    /// Solves the loop closure at `q_o`, warm-started from `warm` (support
    /// coordinates `[q_i; q_d]`) or from the nominal solution.
    pub fn solve_loop_closure(
        &self,
        q_o: &DVector<T>,
        warm: Option<&DVector<T>>,
    ) -> Result<ClosureSolution<T>> {
        let (y, residual, iterations) = self.solve(q_o, warm.unwrap_or(&self.nominal_y))?;
        let n_i = self.num_motors();
        Ok(ClosureSolution {
            q_i: y.rows(0, n_i).into_owned(),
            q_d: y.rows(n_i, y.len() - n_i).into_owned(),
            residual,
            iterations,
        })
    }

    /// Implicit-function Jacobians at a solved configuration, without rates.
    pub(crate) fn jacobians_at(
        &self,
        q_o: &DVector<T>,
        y: &DVector<T>,
    ) -> Result<TransmissionMaps<T>> {
        let (c_o, c_y) = self.constraint_jacobians(q_o, y)?;
        if is_singular(&c_y) {
            return Err(Error::TransmissionSingularity);
        }
        let gamma_y = -c_y.lu().solve(&c_o).ok_or(Error::TransmissionSingularity)?;
        let n_i = self.num_motors();
        let n_d = gamma_y.nrows() - n_i;
        let n_o = q_o.len();
        Ok(TransmissionMaps {
            gamma_i: gamma_y.rows(0, n_i).into_owned(),
            gamma_d: gamma_y.rows(n_i, n_d).into_owned(),
            gamma_d_dot: DMatrix::zeros(n_d, n_o),
            gamma_i_dot: DMatrix::zeros(n_i, n_o),
        })
    }

    /// Transmission Jacobians at `q_o`.
    pub fn transmission_jacobians(
        &self,
        q_o: &DVector<T>,
        warm: Option<&DVector<T>>,
    ) -> Result<TransmissionMaps<T>> {
        let y = self.solve_y(q_o, warm.unwrap_or(&self.nominal_y))?;
        self.jacobians_at(q_o, &y)
    }

    /// Jacobians plus their time derivatives along `qd_o`, by a central
    /// difference of the closure solution in the direction of `qd_o`.
    pub(crate) fn rates_at(
        &self,
        q_o: &DVector<T>,
        qd_o: &DVector<T>,
        y: &DVector<T>,
    ) -> Result<TransmissionMaps<T>> {
        let mut maps = self.jacobians_at(q_o, y)?;
        if matches!(self.linkage.closure, Closure::Linear { .. }) {
            return Ok(maps);
        }
        let speed = qd_o.norm();
        if speed == T::zero() {
            return Ok(maps);
        }
        let eps = cast::<T>(1e-6).max(T::default_epsilon().cbrt() * cast(0.1));
        let dir = qd_o / speed;
        let q_plus = q_o + &dir * eps;
        let q_minus = q_o - &dir * eps;
        let y_plus = self.solve_y(&q_plus, y)?;
        let y_minus = self.solve_y(&q_minus, y)?;
        let plus = self.jacobians_at(&q_plus, &y_plus)?;
        let minus = self.jacobians_at(&q_minus, &y_minus)?;
        let scale = speed / (eps + eps);
        maps.gamma_i_dot = (plus.gamma_i - minus.gamma_i) * scale;
        maps.gamma_d_dot = (plus.gamma_d - minus.gamma_d) * scale;
        Ok(maps)
    }

    /// Transmission maps with `Γ̇` along `qd_o`.
    pub fn transmission_rates(
        &self,
        q_o: &DVector<T>,
        qd_o: &DVector<T>,
        warm: Option<&DVector<T>>,
    ) -> Result<TransmissionMaps<T>> {
        check_len("output velocities", self.num_outputs(), qd_o.len())?;
        let y = self.solve_y(q_o, warm.unwrap_or(&self.nominal_y))?;
        self.rates_at(q_o, qd_o, &y)
    }

    pub(crate) fn decompose(&self, maps: &TransmissionMaps<T>) -> ArmatureDecomposition<T> {
        let weighted = DMatrix::from_diagonal(&self.linkage.armature) * &maps.gamma_i;
        ArmatureDecomposition::from_mass(maps.gamma_i.transpose() * weighted)
    }

    /// `M_o`, `D_o`, `O_o` at an arbitrary output configuration.
    pub fn armature_at(
        &self,
        q_o: &DVector<T>,
        warm: Option<&DVector<T>>,
    ) -> Result<ArmatureDecomposition<T>> {
        Ok(self.decompose(&self.transmission_jacobians(q_o, warm)?))
    }

    /// Main-chain generalized force from passive-joint torques and motor torques.
    pub fn joint_torques(
        &self,
        q_o: &DVector<T>,
        tau_passive: &DVector<T>,
        tau_i: &DVector<T>,
        warm: Option<&DVector<T>>,
    ) -> Result<DVector<T>> {
        check_len(
            "passive torques",
            self.passive_dofs.len(),
            tau_passive.len(),
        )?;
        check_len("motor torques", self.num_motors(), tau_i.len())?;
        let maps = self.transmission_jacobians(q_o, warm)?;
        let tau_o = super::map_actuator_torque(&maps.gamma_i, tau_i)?;
        let mut tau = DVector::zeros(self.main.nv());
        for (k, &d) in self.passive_dofs.iter().enumerate() {
            tau[d] = tau_passive[k];
        }
        for (k, &d) in self.output_dofs.iter().enumerate() {
            tau[d] = tau_o[k];
        }
        Ok(tau)
    }
}

fn first_error<T: Real>(r: &Result<(DVector<T>, T, usize)>) -> Error {
    match r {
        Err(Error::WorkspaceViolation {
            iterations,
            residual,
        }) => Error::WorkspaceViolation {
            iterations: *iterations,
            residual: *residual,
        },
        _ => Error::TransmissionSingularity,
    }
}

/// Singular when `|det|` is negligible against the Hadamard bound.
fn is_singular<T: Real>(m: &DMatrix<T>) -> bool {
    let bound = m.column_iter().fold(T::one(), |acc, c| acc * c.norm());
    if bound == T::zero() {
        return true;
    }
    let det = m.clone().lu().determinant();
    !(det.abs() > bound * cast(1e-10))
}

/// Builds the pushrod branches: all motors, then all first universal axes,
/// then all second axes, appended after `links`/`joints`, with the motors
/// hanging from link `root`.
fn branch_chain<T: Real>(
    linkage: &PlaLinkage<T>,
    root: Option<usize>,
    mut links: Vec<Link<T>>,
    mut joints: Vec<Joint<T>>,
    gravity: Vector3<T>,
) -> Result<ChainModel<T>> {
    let Closure::Pushrod { branches } = &linkage.closure else {
        unreachable!("branch chain requested for a linear closure");
    };
    let base = links.len();
    let b = branches.len();
    for (k, br) in branches.iter().enumerate() {
        links.push(br.crank.clone());
        joints.push(
            Joint::revolute(
                format!("{}_motor", br.name),
                root,
                br.motor_origin,
                br.motor_axis,
            )
            .with_armature(linkage.armature[k]),
        );
    }
    for (k, br) in branches.iter().enumerate() {
        links.push(Link::massless(format!("{}_cross", br.name)));
        joints.push(Joint::revolute(
            format!("{}_u1", br.name),
            Some(base + k),
            Transform::from_translation(br.crank_tip),
            br.rod_axes[0],
        ));
    }
    for (k, br) in branches.iter().enumerate() {
        links.push(br.rod.clone());
        joints.push(Joint::revolute(
            format!("{}_u2", br.name),
            Some(base + b + k),
            Transform::identity(),
            br.rod_axes[1],
        ));
    }
    debug_assert!(joints.iter().all(|j| j.kind == JointKind::Revolute));
    ChainModel::new_allow_massless(links, joints, gravity)
}
