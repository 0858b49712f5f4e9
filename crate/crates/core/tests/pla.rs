use approx::assert_relative_eq;
use mimic_core::pla::mechanisms::{self, FOUR_BAR_KNEE_JSON, PITCH_ROLL_ANKLE_JSON};
use mimic_core::pla::{
    dynamic_armature_step, evaluate_model_errors, exact_projected_dynamics,
    locally_projected_dynamics, map_actuator_torque, nominal_armature_dynamics, simplest_dynamics,
    torque_polytope, Baumgarte, ClosureDoc, EvalProtocol, MechanismDoc, ModelContext, PlaModel,
    PlaSystem, TorquePolytope,
};
use mimic_core::rbd::{bias_forces, forward_dynamics, mass_matrix};
use mimic_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn doc(json: &str) -> MechanismDoc {
    MechanismDoc::from_json(json).unwrap()
}

fn build(d: &MechanismDoc) -> PlaSystem<f64> {
    PlaSystem::new(d.chain.to_model().unwrap(), d.linkage.to_linkage().unwrap()).unwrap()
}

fn massless_support(mut d: MechanismDoc) -> MechanismDoc {
    if let ClosureDoc::Pushrod { branches } = &mut d.linkage.closure {
        for b in branches {
            for link in [&mut b.crank, &mut b.rod] {
                link.mass = 0.0;
                link.inertia = [[0.0; 3]; 3];
            }
        }
    }
    d
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn stacked(sys: &PlaSystem<f64>, q_o: &DVector<f64>, warm: Option<&DVector<f64>>) -> DVector<f64> {
    let s = sys.solve_loop_closure(q_o, warm).unwrap();
    DVector::from_iterator(
        s.q_i.len() + s.q_d.len(),
        s.q_i.iter().chain(s.q_d.iter()).copied(),
    )
}

fn random_state(
    sys: &PlaSystem<f64>,
    rng: &mut ChaCha8Rng,
    frac: f64,
) -> (DVector<f64>, DVector<f64>) {
    let main = sys.main();
    let q = DVector::from_fn(main.nq(), |d, _| {
        let l = main.joints()[d].limits;
        let half = 0.5 * (l.q_max - l.q_min).min(2.0);
        frac * rng.random_range(-half..half)
    });
    let qd = DVector::from_fn(main.nv(), |_, _| rng.random_range(-3.0..3.0));
    (q, qd)
}

#[test]
fn rigid_coupling_is_identity() {
    let sys = mechanisms::linear_coupling(DMatrix::identity(2, 2), v(&[0.1, 0.1])).unwrap();
    let q_o = v(&[0.3, -0.2]);
    let sol = sys.solve_loop_closure(&q_o, None).unwrap();
    assert_relative_eq!(sol.q_i, q_o, epsilon = 1e-14);
    assert_eq!(sol.q_d.len(), 0);
    let maps = sys.transmission_jacobians(&q_o, None).unwrap();
    assert_relative_eq!(maps.gamma_i, DMatrix::identity(2, 2), epsilon = 1e-14);
    let nom = sys.nominal_armature();
    assert_relative_eq!(nom.d_o, DMatrix::identity(2, 2) * 0.1, epsilon = 1e-14);
    assert_relative_eq!(nom.o_o, DMatrix::zeros(2, 2), epsilon = 1e-14);
}

#[test]
fn gear_ratio_two() {
    let sys = mechanisms::linear_coupling(DMatrix::from_element(1, 1, 2.0), v(&[0.1])).unwrap();
    let maps = sys.transmission_jacobians(&v(&[0.0]), None).unwrap();
    assert_relative_eq!(maps.gamma_i[(0, 0)], 2.0, epsilon = 1e-14);
    assert_relative_eq!(sys.nominal_armature().d_o[(0, 0)], 0.4, epsilon = 1e-14);
    let tau_o = map_actuator_torque(&maps.gamma_i, &v(&[10.0])).unwrap();
    assert_relative_eq!(tau_o[0], 20.0, epsilon = 1e-12);
}

#[test]
fn nominal_closure_returns_stored_solution() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let y = stacked(&sys, &v(&[0.0, 0.0]), None);
    assert_eq!(&y, sys.nominal_support());
    let sol = sys.solve_loop_closure(&v(&[0.0, 0.0]), None).unwrap();
    assert_eq!(sol.iterations, 0);
}

#[test]
fn four_bar_closure_residual_and_continuity() {
    let sys = mechanisms::four_bar_knee::<f64>().unwrap();
    let mut prev: Option<DVector<f64>> = None;
    for k in 0..=120 {
        let q = -0.6 + 1.2 * k as f64 / 120.0;
        let sol = sys.solve_loop_closure(&v(&[q]), prev.as_ref()).unwrap();
        assert!(sol.residual < 1e-10, "residual {} at {q}", sol.residual);
        let y = DVector::from_iterator(3, sol.q_i.iter().chain(sol.q_d.iter()).copied());
        if let Some(p) = &prev {
            // Lipschitz along the sweep: no branch jumps.
            assert!((&y - p).amax() < 0.05, "jump at {q}");
        }
        prev = Some(y);
    }
}

#[test]
fn closure_outside_workspace_is_an_error() {
    let sys = mechanisms::four_bar_knee::<f64>().unwrap();
    match sys.solve_loop_closure(&v(&[2.8]), None) {
        Err(Error::WorkspaceViolation { .. }) | Err(Error::TransmissionSingularity) => {}
        other => panic!("expected a workspace error, got {other:?}"),
    }
}

#[test]
fn gamma_matches_closure_finite_differences() {
    for sys in [
        mechanisms::four_bar_knee::<f64>().unwrap(),
        mechanisms::pitch_roll_ankle().unwrap(),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n_o = sys.num_outputs();
        for _ in 0..20 {
            let q_o = DVector::from_fn(n_o, |_, _| rng.random_range(-0.3..0.3));
            let y0 = stacked(&sys, &q_o, None);
            let maps = sys.transmission_jacobians(&q_o, Some(&y0)).unwrap();
            let h = 1e-6;
            for c in 0..n_o {
                let mut qp = q_o.clone();
                qp[c] += h;
                let mut qm = q_o.clone();
                qm[c] -= h;
                let fd =
                    (stacked(&sys, &qp, Some(&y0)) - stacked(&sys, &qm, Some(&y0))) / (2.0 * h);
                let n_i = sys.num_motors();
                for r in 0..fd.len() {
                    let analytic = if r < n_i {
                        maps.gamma_i[(r, c)]
                    } else {
                        maps.gamma_d[(r - n_i, c)]
                    };
                    assert!((analytic - fd[r]).abs() < 1e-6 * (1.0 + analytic.abs()));
                }
            }
        }
    }
}

#[test]
fn gamma_dot_matches_second_difference() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let q_o = v(&[0.2, -0.1]);
    let qd_o = v(&[1.5, -2.0]);
    let maps = sys.transmission_rates(&q_o, &qd_o, None).unwrap();
    // Along q_o(t) = q_o + t qd_o the support acceleration is Γ̇ qd_o.
    let h = 1e-4;
    let y0 = stacked(&sys, &q_o, None);
    let yp = stacked(&sys, &(&q_o + &qd_o * h), Some(&y0));
    let ym = stacked(&sys, &(&q_o - &qd_o * h), Some(&y0));
    let ydd = (yp - &y0 * 2.0 + ym) / (h * h);
    let n_i = sys.num_motors();
    let gi = &maps.gamma_i_dot * &qd_o;
    let gd = &maps.gamma_d_dot * &qd_o;
    for r in 0..ydd.len() {
        let a = if r < n_i { gi[r] } else { gd[r - n_i] };
        assert!(
            (a - ydd[r]).abs() < 1e-5 * (1.0 + a.abs()),
            "row {r}: {a} vs {}",
            ydd[r]
        );
    }
}

#[test]
fn g_has_block_structure() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let maps = sys.transmission_jacobians(&v(&[0.1, 0.05]), None).unwrap();
    let g = maps.g(1);
    assert_eq!(g.shape(), (1 + 4 + 2, 3));
    assert_eq!(g[(0, 0)], 1.0);
    assert!(g.view((1, 0), (6, 1)).iter().all(|&x| x == 0.0));
    assert!(g.view((0, 1), (1, 2)).iter().all(|&x| x == 0.0));
    assert_eq!(g.view((1, 1), (4, 2)), maps.gamma_d);
    assert_eq!(g.view((5, 1), (2, 2)), maps.gamma_i);
}

#[test]
fn exact_model_at_rest_without_gravity() {
    let mut d = doc(PITCH_ROLL_ANKLE_JSON);
    d.chain.gravity = [0.0; 3];
    let sys = build(&d);
    let q = v(&[0.2, 0.1, -0.1]);
    let qdd = exact_projected_dynamics(&sys, &q, &DVector::zeros(3), &DVector::zeros(3)).unwrap();
    assert!(qdd.amax() < 1e-12);
}

#[test]
fn vanishing_support_reduces_to_main_chain() {
    let mut d = massless_support(doc(PITCH_ROLL_ANKLE_JSON));
    d.linkage.armature = vec![1e-12, 1e-12];
    let sys = build(&d);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let (q, qd) = random_state(&sys, &mut rng, 0.8);
        let tau = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
        let exact = exact_projected_dynamics(&sys, &q, &qd, &tau).unwrap();
        let plain = forward_dynamics(sys.main(), &q, &qd, &tau, &[]).unwrap();
        assert_relative_eq!(exact, plain, epsilon = 1e-8, max_relative = 1e-8);
    }
}

#[test]
fn exact_model_matches_constrained_oracle() {
    for json in [FOUR_BAR_KNEE_JSON, PITCH_ROLL_ANKLE_JSON] {
        let sys = build(&doc(json));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let (q, qd) = random_state(&sys, &mut rng, 0.8);
            let st = sys.consistent_state(&q, &qd).unwrap();
            let tau_i = DVector::from_fn(sys.num_motors(), |_, _| rng.random_range(-5.0..5.0));
            let mut tau_p = DVector::zeros(sys.passive_dofs().len());
            for x in tau_p.iter_mut() {
                *x = rng.random_range(-10.0..10.0);
            }
            let mut tau_main = DVector::zeros(sys.main().nv());
            for (k, &d) in sys.passive_dofs().iter().enumerate() {
                tau_main[d] = tau_p[k];
            }
            let (qdd_oracle, _) = sys
                .constrained_accelerations(&st, &tau_main, &tau_i, Baumgarte::default())
                .unwrap();
            let tau = sys
                .joint_torques(&sys.outputs_of(&q), &tau_p, &tau_i, Some(&st.y))
                .unwrap();
            let qdd = exact_projected_dynamics(&sys, &q, &qd, &tau).unwrap();
            let scale = 1.0 + qdd_oracle.amax();
            assert!(
                (&qdd - &qdd_oracle).amax() < 1e-6 * scale,
                "{qdd} vs {qdd_oracle}"
            );
        }
    }
}

#[test]
fn constrained_rollout_tracks_projected_rollout() {
    let sys = mechanisms::four_bar_knee::<f64>().unwrap();
    let q0 = v(&[0.1, 0.2]);
    let qd0 = v(&[0.0, 0.5]);
    let mut st = sys.consistent_state(&q0, &qd0).unwrap();
    let (mut q, mut qd) = (q0, qd0);
    let mut ctx = ModelContext::new(&sys);
    let dt = 1e-4;
    for _ in 0..2000 {
        st = sys
            .constrained_step(
                &st,
                &DVector::zeros(2),
                &DVector::zeros(1),
                Baumgarte::default(),
                dt,
            )
            .unwrap();
        let qdd = sys
            .accelerations(PlaModel::Exact, &q, &qd, &DVector::zeros(2), &mut ctx)
            .unwrap();
        qd += qdd * dt;
        q += &qd * dt;
    }
    assert!((&st.q - &q).amax() < 1e-3);
    let c = sys
        .solve_loop_closure(&sys.outputs_of(&st.q), None)
        .unwrap();
    assert!(
        (c.q_i - st.y.rows(0, 1)).amax() < 1e-4,
        "oracle drifted off the manifold"
    );
}

#[test]
fn locally_projected_is_exact_for_massless_support() {
    let sys = build(&massless_support(doc(PITCH_ROLL_ANKLE_JSON)));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let (q, qd) = random_state(&sys, &mut rng, 0.8);
        let tau = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
        let exact = exact_projected_dynamics(&sys, &q, &qd, &tau).unwrap();
        let lpm = locally_projected_dynamics(&sys, &q, &qd, &tau).unwrap();
        assert_relative_eq!(exact, lpm, epsilon = 1e-8, max_relative = 1e-8);
    }
}

#[test]
fn armature_ladder_identities() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let q = v(&[0.1, 0.2, -0.15]);
    let qd = v(&[0.5, -1.0, 2.0]);
    let tau = v(&[1.0, 2.0, -1.0]);
    // First DAM step with zero history is LPM with the coupling dropped.
    let dam = dynamic_armature_step(&sys, &q, &qd, &tau, &DVector::zeros(2)).unwrap();
    let arm = sys.armature_at(&v(&[0.2, -0.15]), None).unwrap();
    let maps = sys
        .transmission_rates(&v(&[0.2, -0.15]), &v(&[-1.0, 2.0]), None)
        .unwrap();
    let h0 = maps.gamma_i.transpose()
        * sys
            .linkage()
            .armature
            .component_mul(&(&maps.gamma_i_dot * v(&[-1.0, 2.0])));
    let mut m = mass_matrix(sys.main(), &q).unwrap();
    let mut block = m.view_mut((1, 1), (2, 2));
    block += &arm.d_o;
    let mut rhs = &tau - bias_forces(sys.main(), &q, &qd).unwrap();
    let mut rows = rhs.rows_mut(1, 2);
    rows -= &h0;
    let expected = m.lu().solve(&rhs).unwrap();
    assert_relative_eq!(dam, expected, epsilon = 1e-10);
    // M_o = D_o + O_o exactly, symmetric and PSD.
    assert_eq!(&arm.d_o + &arm.o_o, arm.m_o);
    assert_relative_eq!(arm.m_o.clone(), arm.m_o.transpose(), epsilon = 1e-15);
    assert!(arm.m_o.symmetric_eigenvalues().min() >= 0.0);
    // Nominal decomposition is M_o(q_nom) split.
    let at_nom = sys.armature_at(&v(&[0.0, 0.0]), None).unwrap();
    assert_eq!(&at_nom, sys.nominal_armature());
}

#[test]
fn decoupled_linkage_dam_equals_lpm() {
    let ratios = DMatrix::from_diagonal(&v(&[2.0, 1.5]));
    let sys = mechanisms::linear_coupling(ratios, v(&[0.05, 0.08])).unwrap();
    let q = v(&[0.3, 0.2, -0.4]);
    let qd = v(&[1.0, -0.5, 0.3]);
    let tau = v(&[0.5, 1.0, -2.0]);
    let lpm = locally_projected_dynamics(&sys, &q, &qd, &tau).unwrap();
    let prev = v(&[3.0, -7.0]);
    let dam = dynamic_armature_step(&sys, &q, &qd, &tau, &prev).unwrap();
    let nam = nominal_armature_dynamics(&sys, &q, &qd, &tau, &prev).unwrap();
    assert_relative_eq!(lpm, dam, epsilon = 1e-12);
    assert_relative_eq!(lpm, nam, epsilon = 1e-12);
    // Simplest matches NAM when the coupling vanishes and the outputs are at rest.
    let qd_rest = v(&[1.0, 0.0, 0.0]);
    let simple = simplest_dynamics(&sys, &q, &qd_rest, &tau).unwrap();
    let nam = nominal_armature_dynamics(&sys, &q, &qd_rest, &tau, &prev).unwrap();
    assert_relative_eq!(simple, nam, epsilon = 1e-12);
}

#[test]
fn simplest_static_balance() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let q = v(&[0.3, -0.2, 0.1]);
    let zero = DVector::zeros(3);
    let gravity = bias_forces(sys.main(), &q, &zero).unwrap();
    let qdd = simplest_dynamics(&sys, &q, &zero, &gravity).unwrap();
    assert!(qdd.amax() < 1e-12);
}

#[test]
fn projected_mass_matrix_is_symmetric_psd() {
    for sys in [
        mechanisms::four_bar_knee::<f64>().unwrap(),
        mechanisms::pitch_roll_ankle().unwrap(),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let (q, _) = random_state(&sys, &mut rng, 1.0);
            let m = sys.projected_mass_matrix(&q, None).unwrap();
            assert_relative_eq!(m.clone(), m.transpose(), epsilon = 1e-12);
            assert!(m.symmetric_eigenvalues().min() > 0.0);
        }
    }
}

#[test]
fn ankle_is_diagonally_dominant_over_its_workspace() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let mut warm = sys.nominal_support().clone();
    for i in 0..=20 {
        for j in 0..=20 {
            let q_o = v(&[-0.5 + 0.05 * i as f64, -0.3 + 0.03 * j as f64]);
            warm = stacked(&sys, &q_o, Some(&warm));
            let arm = sys.armature_at(&q_o, Some(&warm)).unwrap();
            assert!(arm.dominance_ratio() < 1.0, "not dominant at {q_o}");
        }
    }
}

#[test]
fn ankle_coupling_is_not_trivial() {
    let nom = mechanisms::pitch_roll_ankle::<f64>()
        .unwrap()
        .nominal_armature()
        .clone();
    assert!(nom.o_o[(0, 1)].abs() > 0.2 * nom.d_o[(1, 1)]);
}

#[test]
fn polytope_examples() {
    let unit = [[-1.0, 1.0], [-1.0, 1.0]];
    let square = TorquePolytope::from_transmission(&DMatrix::identity(2, 2), &unit).unwrap();
    let expected = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    assert_eq!(square.vertices.len(), 4);
    for (vx, e) in square.vertices.iter().zip(expected) {
        assert_eq!(vx.as_slice(), e);
    }
    let rect =
        TorquePolytope::from_transmission(&DMatrix::from_diagonal(&v(&[2.0, 1.0])), &unit).unwrap();
    let expected = [[-2.0, -1.0], [2.0, -1.0], [2.0, 1.0], [-2.0, 1.0]];
    for (vx, e) in rect.vertices.iter().zip(expected) {
        assert_eq!(vx.as_slice(), e);
    }
    assert!(rect.contains(&v(&[1.9, 0.9]), 0.0).unwrap());
    assert!(!rect.contains(&v(&[2.1, 0.0]), 0.0).unwrap());
    assert_eq!(rect.project(&v(&[3.0, 0.5])).unwrap(), v(&[2.0, 0.5]));
    assert_eq!(rect.project(&v(&[1.0, 0.5])).unwrap(), v(&[1.0, 0.5]));
    let flat = TorquePolytope::from_transmission(
        &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
        &unit,
    )
    .unwrap();
    assert!(flat.degenerate);
}

#[test]
fn ankle_polytopes_are_counterclockwise_parallelograms() {
    let sys = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let limits = sys.linkage().motor_torque_limits.clone();
    let p = torque_polytope(&sys, &v(&[0.3, -0.2]), &limits, None).unwrap();
    assert_eq!(p.vertices.len(), 4);
    let n = p.vertices.len();
    for k in 0..n {
        let a = &p.vertices[k];
        let b = &p.vertices[(k + 1) % n];
        let c = &p.vertices[(k + 2) % n];
        let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        assert!(cross > 0.0);
    }
    // Opposite edges of an affine image of a box are parallel.
    let e0 = &p.vertices[1] - &p.vertices[0];
    let e2 = &p.vertices[3] - &p.vertices[2];
    assert_relative_eq!(e0, -e2, epsilon = 1e-9);
}

#[test]
fn ladder_of_errors_on_the_knee() {
    let sys = mechanisms::four_bar_knee::<f64>().unwrap();
    let protocol = EvalProtocol {
        duration: 0.5,
        phases: vec![0.0],
        ..EvalProtocol::default()
    };
    let rows = evaluate_model_errors(&sys, &protocol).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].model, PlaModel::Exact);
    assert_eq!(rows[0].normalized_mse, 0.0);
    assert!(rows
        .iter()
        .all(|r| !r.diverged && r.normalized_mse.is_finite()));
    assert!(rows[4].normalized_mse > rows[1].normalized_mse);
}

#[test]
fn mechanism_documents_round_trip() {
    for json in [FOUR_BAR_KNEE_JSON, PITCH_ROLL_ANKLE_JSON] {
        let d = doc(json);
        let again = MechanismDoc::from_json(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(d, again);
    }
    let bad = PITCH_ROLL_ANKLE_JSON.replacen("\"nominal\"", "\"nominall\"", 1);
    assert!(MechanismDoc::from_json(&bad).is_err());
}

#[test]
fn rejects_invalid_linkages() {
    let mut d = doc(PITCH_ROLL_ANKLE_JSON);
    d.linkage.armature[0] = 0.0;
    assert!(d.linkage.to_linkage::<f64>().is_err());
    let mut d = doc(PITCH_ROLL_ANKLE_JSON);
    d.linkage.output_joints = vec!["knee".into(), "ankle_roll".into()];
    assert!(PlaSystem::new(
        d.chain.to_model::<f64>().unwrap(),
        d.linkage.to_linkage().unwrap()
    )
    .is_err());
}

#[test]
fn single_precision_closure() {
    let sys = mechanisms::pitch_roll_ankle::<f32>().unwrap();
    let q_o = DVector::from_column_slice(&[0.2f32, -0.1]);
    let sol = sys.solve_loop_closure(&q_o, None).unwrap();
    let sys64 = mechanisms::pitch_roll_ankle::<f64>().unwrap();
    let sol64 = sys64.solve_loop_closure(&v(&[0.2, -0.1]), None).unwrap();
    for (a, b) in sol.q_i.iter().zip(sol64.q_i.iter()) {
        assert!((*a as f64 - b).abs() < 1e-4);
    }
}

proptest! {
    #[test]
    fn actuator_torque_map_is_linear(
        g in proptest::collection::vec(-3.0f64..3.0, 4),
        t1 in proptest::collection::vec(-10.0f64..10.0, 2),
        t2 in proptest::collection::vec(-10.0f64..10.0, 2),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
    ) {
        let gamma = DMatrix::from_row_slice(2, 2, &g);
        let (t1, t2) = (v(&t1), v(&t2));
        let lhs = map_actuator_torque(&gamma, &(&t1 * a + &t2 * b)).unwrap();
        let rhs = map_actuator_torque(&gamma, &t1).unwrap() * a + map_actuator_torque(&gamma, &t2).unwrap() * b;
        prop_assert!((lhs - rhs).amax() < 1e-10);
    }

    #[test]
    fn identity_map_passes_torque_through(t in proptest::collection::vec(-10.0f64..10.0, 3)) {
        let t = v(&t);
        prop_assert_eq!(map_actuator_torque(&DMatrix::identity(3, 3), &t).unwrap(), t);
    }
}
