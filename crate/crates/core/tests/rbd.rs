use approx::assert_relative_eq;
use mimic_core::rbd::{
    bias_forces, forward_dynamics, integrate, inverse_dynamics, kinetic_energy, link_velocities,
    mass_matrix, potential_energy, ChainModel, ChainState, ExternalWrench, Joint, Link, Transform,
};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pendulum(gravity: f64) -> ChainModel<f64> {
    ChainModel::new(
        vec![Link::new(
            "bob",
            1.0,
            Vector3::new(0.0, 0.0, -1.0),
            Matrix3::identity() * 1e-12,
        )],
        vec![Joint::revolute(
            "pivot",
            None,
            Transform::identity(),
            Vector3::y(),
        )],
        Vector3::new(0.0, 0.0, -gravity),
    )
    .unwrap()
}

/// Planar 2-link arm rotating about y with link lengths l1, l2 along -z.
fn two_link(m1: f64, m2: f64, l1: f64, lc1: f64, lc2: f64, i1: f64, i2: f64) -> ChainModel<f64> {
    let inertia = |i: f64| Matrix3::new(i, 0.0, 0.0, 0.0, i, 0.0, 0.0, 0.0, i);
    ChainModel::new(
        vec![
            Link::new("upper", m1, Vector3::new(0.0, 0.0, -lc1), inertia(i1)),
            Link::new("lower", m2, Vector3::new(0.0, 0.0, -lc2), inertia(i2)),
        ],
        vec![
            Joint::revolute("shoulder", None, Transform::identity(), Vector3::y()),
            Joint::revolute(
                "elbow",
                Some(0),
                Transform::from_translation(Vector3::new(0.0, 0.0, -l1)),
                Vector3::y(),
            ),
        ],
        Vector3::new(0.0, 0.0, -9.81),
    )
    .unwrap()
}

/// A branching 3D chain with skewed axes, offsets and off-diagonal inertias.
fn spatial_tree() -> ChainModel<f64> {
    let inertia = |a: f64, b: f64, c: f64, d: f64| Matrix3::new(a, d, 0.0, d, b, 0.0, 0.0, 0.0, c);
    let axis = |x: f64, y: f64, z: f64| Vector3::new(x, y, z).normalize();
    ChainModel::new(
        vec![
            Link::new(
                "a",
                1.3,
                Vector3::new(0.1, 0.0, -0.2),
                inertia(0.03, 0.02, 0.01, 0.002),
            ),
            Link::new(
                "b",
                0.9,
                Vector3::new(0.0, 0.05, -0.15),
                inertia(0.02, 0.02, 0.005, -0.001),
            ),
            Link::new(
                "c",
                0.7,
                Vector3::new(0.02, -0.03, -0.1),
                inertia(0.01, 0.012, 0.004, 0.0),
            ),
            Link::new(
                "d",
                0.5,
                Vector3::new(-0.05, 0.0, 0.1),
                inertia(0.004, 0.005, 0.006, 0.001),
            ),
        ],
        vec![
            Joint::revolute("j0", None, Transform::identity(), axis(0.0, 1.0, 0.2)),
            Joint::revolute(
                "j1",
                Some(0),
                Transform::new(
                    mimic_core::rbd::spatial::axis_angle_matrix(&Vector3::x(), 0.3),
                    Vector3::new(0.0, 0.1, -0.4),
                ),
                axis(1.0, 0.0, 0.3),
            ),
            Joint::revolute(
                "j2",
                Some(1),
                Transform::from_translation(Vector3::new(0.05, 0.0, -0.3)),
                axis(0.2, 1.0, 0.0),
            ),
            Joint::revolute(
                "j3",
                Some(0),
                Transform::from_translation(Vector3::new(0.0, -0.1, -0.2)),
                axis(0.0, 0.0, 1.0),
            )
            .with_armature(0.02),
        ],
        Vector3::new(0.0, 0.0, -9.81),
    )
    .unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-scale..scale))
}

#[test]
fn pendulum_mass_matrix_is_ml2() {
    let m = mass_matrix(&pendulum(9.81), &DVector::from_element(1, 0.0)).unwrap();
    assert_relative_eq!(m[(0, 0)], 1.0, epsilon = 1e-11);
}

#[test]
fn pendulum_gravity_torque() {
    let chain = pendulum(9.81);
    let h = bias_forces(
        &chain,
        &DVector::from_element(1, std::f64::consts::FRAC_PI_2),
        &DVector::zeros(1),
    )
    .unwrap();
    // rotating +90 deg about y swings the bob to -x; gravity pulls it back
    assert_relative_eq!(h[0].abs(), 9.81, epsilon = 1e-12);
}

#[test]
fn zero_velocity_zero_gravity_bias_vanishes() {
    let mut chain = spatial_tree();
    chain.gravity = Vector3::zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let q = random_vec(&mut rng, 4, 3.0);
    let h = bias_forces(&chain, &q, &DVector::zeros(4)).unwrap();
    assert!(h.amax() < 1e-15);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let chain = spatial_tree();
    assert!(mass_matrix(&chain, &DVector::zeros(3)).is_err());
    assert!(bias_forces(&chain, &DVector::zeros(4), &DVector::zeros(2)).is_err());
}

#[test]
fn mass_matrix_symmetric_positive_definite() {
    let chain = spatial_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let q = random_vec(&mut rng, 4, std::f64::consts::PI);
        let m = mass_matrix(&chain, &q).unwrap();
        assert!((&m - m.transpose()).amax() < 1e-12);
        assert!(m.symmetric_eigenvalues().min() > 0.0);
    }
}

/// Textbook closed-form dynamics of a planar two-link arm (angles from the
/// downward vertical, both joints about +y).
fn two_link_closed_form(
    p: (f64, f64, f64, f64, f64, f64, f64),
    q: &DVector<f64>,
    qd: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let (m1, m2, l1, lc1, lc2, i1, i2) = p;
    let c2 = q[1].cos();
    let s2 = q[1].sin();
    let m11 = i1 + i2 + m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
    let m12 = i2 + m2 * (lc2 * lc2 + l1 * lc2 * c2);
    let m22 = i2 + m2 * lc2 * lc2;
    let hc = m2 * l1 * lc2 * s2;
    let g = 9.81;
    // rotation about +y by angle t moves a point at -z toward -x; its height is -l cos(t)
    let g1 = (m1 * lc1 + m2 * l1) * g * q[0].sin() + m2 * lc2 * g * (q[0] + q[1]).sin();
    let g2 = m2 * lc2 * g * (q[0] + q[1]).sin();
    let h = DVector::from_vec(vec![
        -hc * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]) + g1,
        hc * qd[0] * qd[0] + g2,
    ]);
    (DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22]), h)
}

#[test]
fn two_link_matches_lagrangian_closed_form() {
    let p = (1.2, 0.8, 0.5, 0.25, 0.3, 0.02, 0.015);
    let chain = two_link(p.0, p.1, p.2, p.3, p.4, p.5, p.6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let q = random_vec(&mut rng, 2, 3.0);
        let qd = random_vec(&mut rng, 2, 4.0);
        let (m_ref, h_ref) = two_link_closed_form(p, &q, &qd);
        let m = mass_matrix(&chain, &q).unwrap();
        let h = bias_forces(&chain, &q, &qd).unwrap();
        assert!((&m - &m_ref).amax() < 1e-12, "{m} vs {m_ref}");
        assert!((&h - &h_ref).amax() < 1e-10, "{h} vs {h_ref}");
    }
}

/// Kinetic energy from finite-differenced forward kinematics only.
fn fk_kinetic_energy(chain: &ChainModel<f64>, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
    let eps = 1e-5;
    let plus = chain.link_poses(&(q + qd * eps)).unwrap();
    let minus = chain.link_poses(&(q - qd * eps)).unwrap();
    let mut t = 0.0;
    for (k, link) in chain.links().iter().enumerate() {
        let v = (plus[k].transform_point(&link.com) - minus[k].transform_point(&link.com))
            / (2.0 * eps);
        let rdot = (plus[k].rot - minus[k].rot) / (2.0 * eps);
        let pose = chain.link_poses(q).unwrap()[k];
        let w_skew = rdot * pose.rot.transpose();
        let w = Vector3::new(w_skew[(2, 1)], w_skew[(0, 2)], w_skew[(1, 0)]);
        let wb = pose.rot.transpose() * w;
        t += 0.5 * link.mass * v.norm_squared() + 0.5 * wb.dot(&(link.inertia * wb));
    }
    for (i, j) in chain.joints().iter().enumerate() {
        t += 0.5 * j.armature * qd[chain.v_offset(i)].powi(2);
    }
    t
}

#[test]
fn mass_matrix_matches_energy_polarization_oracle() {
    let chain = spatial_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let q = random_vec(&mut rng, 4, 3.0);
        let m = mass_matrix(&chain, &q).unwrap();
        let n = 4;
        let e = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        for i in 0..n {
            for j in 0..n {
                let mij = if i == j {
                    2.0 * fk_kinetic_energy(&chain, &q, &e(i))
                } else {
                    fk_kinetic_energy(&chain, &q, &(e(i) + e(j)))
                        - fk_kinetic_energy(&chain, &q, &e(i))
                        - fk_kinetic_energy(&chain, &q, &e(j))
                };
                assert!(
                    (m[(i, j)] - mij).abs() < 1e-8,
                    "M[{i},{j}] {} vs {mij}",
                    m[(i, j)]
                );
            }
        }
    }
}

#[test]
fn bias_matches_lagrangian_finite_differences() {
    // h = Mdot qd - dT/dq + dV/dq with Mdot and the gradients by central differences
    let chain = spatial_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eps = 1e-5;
    for _ in 0..50 {
        let q = random_vec(&mut rng, 4, 3.0);
        let qd = random_vec(&mut rng, 4, 2.0);
        let mdot = (mass_matrix(&chain, &(&q + &qd * eps)).unwrap()
            - mass_matrix(&chain, &(&q - &qd * eps)).unwrap())
            / (2.0 * eps);
        let energy = |qq: &DVector<f64>| {
            let s = ChainState::new(qq.clone(), qd.clone());
            kinetic_energy(&chain, &s).unwrap() - potential_energy(&chain, qq).unwrap()
        };
        let mut dl = DVector::zeros(4);
        for k in 0..4 {
            let mut dq = DVector::zeros(4);
            dq[k] = eps;
            dl[k] = (energy(&(&q + &dq)) - energy(&(&q - &dq))) / (2.0 * eps);
        }
        let h_ref = &mdot * &qd - dl;
        let h = bias_forces(&chain, &q, &qd).unwrap();
        assert!((&h - &h_ref).amax() < 1e-6, "{h} vs {h_ref}");
    }
}

#[test]
fn forward_dynamics_residual_and_equilibrium() {
    let chain = spatial_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let q = random_vec(&mut rng, 4, 3.0);
        let qd = random_vec(&mut rng, 4, 2.0);
        let tau = random_vec(&mut rng, 4, 5.0);
        let w = ExternalWrench {
            link: 2,
            force: Vector3::new(rng.random_range(-3.0..3.0), 1.0, -2.0),
            torque: Vector3::new(0.5, rng.random_range(-1.0..1.0), 0.2),
        };
        let qdd = forward_dynamics(&chain, &q, &qd, &tau, &[w]).unwrap();
        // J^T w from the world point Jacobian and the rotational Jacobian
        let jp = mimic_core::rbd::point_jacobian(&chain, &q, 2, &Vector3::zeros()).unwrap();
        let poses = chain.link_poses(&q).unwrap();
        let mut jt_w = jp.transpose() * w.force;
        for j in chain.path_to(2) {
            let axis = poses[j].rot * chain.joints()[j].axis;
            jt_w[chain.v_offset(j)] += axis.dot(&w.torque);
        }
        let m = mass_matrix(&chain, &q).unwrap();
        let h = bias_forces(&chain, &q, &qd).unwrap();
        let residual = &m * &qdd + &h - &tau - jt_w;
        assert!(residual.amax() < 1e-8);

        let still = forward_dynamics(&chain, &q, &qd, &h, &[]).unwrap();
        assert!(still.amax() < 1e-10);
        let id = inverse_dynamics(&chain, &q, &qd, &qdd, &[w]).unwrap();
        assert!((id - &tau).amax() < 1e-9);
    }
}

#[test]
fn pendulum_at_rest_with_unit_torque() {
    let chain = pendulum(9.81);
    let q = DVector::from_element(1, 0.4);
    let qdd = forward_dynamics(
        &chain,
        &q,
        &DVector::zeros(1),
        &DVector::from_element(1, 1.0),
        &[],
    )
    .unwrap();
    let gravity = -9.81 * 0.4f64.sin();
    assert_relative_eq!(qdd[0], gravity + 1.0, epsilon = 1e-10);
}

#[test]
fn integrate_examples() {
    let chain = pendulum(9.81);
    let s = ChainState::new(DVector::zeros(1), DVector::from_element(1, 1.0));
    let next = integrate(&chain, &s, &DVector::zeros(1), 0.004).unwrap();
    assert_relative_eq!(next.q[0], 0.004, epsilon = 1e-18);
    let rest = ChainState::rest(&chain);
    assert_eq!(
        integrate(&chain, &rest, &DVector::zeros(1), 0.004).unwrap(),
        rest
    );
    assert!(integrate(&chain, &rest, &DVector::zeros(1), 0.0).is_err());
}

fn simulate_pendulum_energy(dt: f64, duration: f64) -> Vec<f64> {
    let chain = pendulum(9.81);
    let mut s = ChainState::new(DVector::from_element(1, 1.0), DVector::zeros(1));
    let steps = (duration / dt).round() as usize;
    let mut energies = Vec::with_capacity(steps + 1);
    let energy = |s: &ChainState<f64>| {
        kinetic_energy(&chain, s).unwrap() + potential_energy(&chain, &s.q).unwrap()
    };
    energies.push(energy(&s));
    for _ in 0..steps {
        let qdd = forward_dynamics(&chain, &s.q, &s.qd, &DVector::zeros(1), &[]).unwrap();
        s = integrate(&chain, &s, &qdd, dt).unwrap();
        energies.push(energy(&s));
    }
    energies
}

#[test]
fn semi_implicit_energy_drift_is_bounded() {
    let coarse = simulate_pendulum_energy(0.004, 10.0);
    let fine = simulate_pendulum_energy(1e-5, 10.0);
    let e0 = coarse[0];
    let swing = coarse.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    let fine_swing = fine.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max);
    // symplectic: the energy error oscillates with O(dt) amplitude instead of growing;
    // measured swing at dt = 0.004 is about 1.7e-2 J on an ~4.5 J amplitude
    assert!(swing < 0.03, "swing {swing}");
    assert!(
        fine_swing < swing * 0.01,
        "fine {fine_swing} coarse {swing}"
    );
    // no secular drift: the last second stays inside the envelope of the first
    let first: f64 = coarse[..250]
        .iter()
        .map(|e| (e - e0).abs())
        .fold(0.0, f64::max);
    let last: f64 = coarse[coarse.len() - 250..]
        .iter()
        .map(|e| (e - e0).abs())
        .fold(0.0, f64::max);
    assert!(last < first * 1.5 + 1e-9, "first {first} last {last}");
}

#[test]
fn power_balance_under_applied_torque() {
    // dE/dt = qd^T tau for an unconstrained chain; checked with a fine step
    let chain = spatial_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut s = ChainState::new(random_vec(&mut rng, 4, 1.0), random_vec(&mut rng, 4, 1.0));
    let tau = random_vec(&mut rng, 4, 2.0);
    let dt = 1e-5;
    let energy = |s: &ChainState<f64>| {
        kinetic_energy(&chain, s).unwrap() + potential_energy(&chain, &s.q).unwrap()
    };
    let mut work = 0.0;
    let e0 = energy(&s);
    for _ in 0..20000 {
        let qdd = forward_dynamics(&chain, &s.q, &s.qd, &tau, &[]).unwrap();
        let next = integrate(&chain, &s, &qdd, dt).unwrap();
        work += 0.5 * (s.qd.dot(&tau) + next.qd.dot(&tau)) * dt;
        s = next;
    }
    let e1 = energy(&s);
    assert!(
        ((e1 - e0) - work).abs() < 1e-3 * (1.0 + work.abs()),
        "dE {} work {work}",
        e1 - e0
    );
}

fn floating_robot(gravity: Vector3<f64>) -> ChainModel<f64> {
    let box_inertia = |m: f64, a: f64, b: f64, c: f64| {
        Matrix3::new(
            m * (b * b + c * c) / 12.0,
            0.0,
            0.0,
            0.0,
            m * (a * a + c * c) / 12.0,
            0.0,
            0.0,
            0.0,
            m * (a * a + b * b) / 12.0,
        )
    };
    ChainModel::new(
        vec![
            Link::new(
                "torso",
                5.0,
                Vector3::new(0.0, 0.0, 0.05),
                box_inertia(5.0, 0.2, 0.3, 0.4),
            ),
            Link::new(
                "arm",
                1.0,
                Vector3::new(0.0, 0.0, -0.15),
                box_inertia(1.0, 0.05, 0.05, 0.3),
            ),
            Link::new(
                "fore",
                0.6,
                Vector3::new(0.0, 0.0, -0.12),
                box_inertia(0.6, 0.04, 0.04, 0.25),
            ),
        ],
        vec![
            Joint::floating("base"),
            Joint::revolute(
                "shoulder",
                Some(0),
                Transform::from_translation(Vector3::new(0.0, 0.2, 0.15)),
                Vector3::new(0.0, 1.0, 0.3).normalize(),
            ),
            Joint::revolute(
                "elbow",
                Some(1),
                Transform::from_translation(Vector3::new(0.0, 0.0, -0.3)),
                Vector3::x(),
            ),
        ],
        gravity,
    )
    .unwrap()
}

fn momentum(chain: &ChainModel<f64>, s: &ChainState<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let poses = chain.link_poses(&s.q).unwrap();
    let vels = link_velocities(chain, &s.q, &s.qd).unwrap();
    let mut lin = Vector3::zeros();
    let mut ang = Vector3::zeros();
    for ((link, pose), (w, v)) in chain.links().iter().zip(&poses).zip(&vels) {
        let c = pose.transform_point(&link.com);
        let vc = v + w.cross(&(pose.rot * link.com));
        let iw = pose.rot * link.inertia * pose.rot.transpose() * w;
        lin += vc * link.mass;
        ang += c.cross(&(vc * link.mass)) + iw;
    }
    (lin, ang)
}

fn momentum_drift(chain: &ChainModel<f64>, dt: f64) -> (f64, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut q = chain.neutral_q();
    q[7] = 0.4;
    let mut s = ChainState::new(q, random_vec(&mut rng, 8, 0.5));
    let (l0, a0) = momentum(chain, &s);
    let steps = (0.2 / dt).round() as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut tau = DVector::zeros(8);
        tau[6] = (3.0 * t).sin();
        tau[7] = 0.5 * (5.0 * t).cos();
        let qdd = forward_dynamics(chain, &s.q, &s.qd, &tau, &[]).unwrap();
        s = integrate(chain, &s, &qdd, dt).unwrap();
        let qn = s.q.rows(3, 4).norm();
        assert!((qn - 1.0).abs() < 1e-9);
    }
    let (l1, a1) = momentum(chain, &s);
    ((l1 - l0).norm(), (a1 - a0).norm(), l0.norm())
}

// Semi-implicit Euler only conserves momentum up to O(dt), so check both the
// size of the drift and that it shrinks linearly with the step.
#[test]
fn floating_base_conserves_momentum_without_gravity() {
    let chain = floating_robot(Vector3::zeros());
    let (l_coarse, a_coarse, l0) = momentum_drift(&chain, 2e-4);
    let (l_fine, a_fine, _) = momentum_drift(&chain, 1e-4);
    assert!(l_fine < 1e-3 * l0, "{l_fine} vs {l0}");
    let ratio = l_fine / l_coarse;
    assert!((0.4..0.6).contains(&ratio), "linear drift ratio {ratio}");
    let ratio = a_fine / a_coarse;
    assert!((0.4..0.6).contains(&ratio), "angular drift ratio {ratio}");
}

#[test]
fn floating_base_free_fall() {
    let g = Vector3::new(0.0, 0.0, -9.81);
    let chain = floating_robot(g);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut q = chain.neutral_q();
    let quat = nalgebra::UnitQuaternion::from_euler_angles(0.3, -0.2, 0.9);
    q[3] = quat.w;
    q[4] = quat.i;
    q[5] = quat.j;
    q[6] = quat.k;
    q[7] = rng.random_range(-1.0..1.0);
    q[8] = rng.random_range(-1.0..1.0);
    let qdd = forward_dynamics(&chain, &q, &DVector::zeros(8), &DVector::zeros(8), &[]).unwrap();
    let a_body = quat.inverse_transform_vector(&g);
    for k in 0..3 {
        assert!(qdd[k].abs() < 1e-12);
        assert!((qdd[3 + k] - a_body[k]).abs() < 1e-10);
    }
    assert!(qdd[6].abs() < 1e-10 && qdd[7].abs() < 1e-10);
}

#[test]
fn base_wrench_equals_gravity_cancels_fall() {
    let g = Vector3::new(0.0, 0.0, -9.81);
    let chain = floating_robot(g);
    let q = chain.neutral_q();
    let com = mimic_core::rbd::center_of_mass(&chain, &q).unwrap();
    let mass = chain.total_mass();
    let w = ExternalWrench {
        link: 0,
        force: -g * mass,
        torque: -(com.cross(&(g * mass))),
    };
    let qdd = forward_dynamics(&chain, &q, &DVector::zeros(8), &DVector::zeros(8), &[w]).unwrap();
    assert!(qdd.amax() < 1e-10, "{qdd}");
}
