use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wong_core::dynamics::{self, Method, ReducedState};
use wong_core::linalg::max_abs_vec;
use wong_core::system::{AffineConnection, KaluzaKlein, MechanicalSystem, PointOnSigma, TwoVectorSo3};

fn random_state(sys: &TwoVectorSo3, rng: &mut ChaCha8Rng) -> ReducedState {
    let q = PointOnSigma::new(sys, TwoVectorSo3::random_sigma_point(rng)).unwrap();
    let v = DVector::from_fn(6, |_, _| rng.random_range(-0.5..0.5));
    let n = dynamics::n_projector(sys, q.q()).unwrap();
    let p = DVector::from_fn(3, |_, _| rng.random_range(-0.5..0.5));
    ReducedState::new(sys, q, n * v, p, 0.0).unwrap()
}

#[test]
fn reduced_flow_matches_unreduced_oracle() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let state = random_state(&sys, &mut rng);
    let lifted = dynamics::lift_velocity(&sys, state.q.q(), &state.q_dot, &state.p).unwrap();
    let (_, fixed) = dynamics::full_space_oracle(&sys, state.q.q(), &lifted, 0.5, 1e-3, 50).unwrap();
    let red = dynamics::integrate_system(&sys, &state, 0.5, 1e-3, Method::Rk4).unwrap();
    for s in &fixed.samples {
        let k = (s.t / 1e-3).round() as usize;
        let r = &red.samples[k];
        assert!(max_abs_vec(&(&s.q - &r.q)) < 1e-8, "t={} {} vs {}", s.t, s.q, r.q);
        assert!(max_abs_vec(&(&s.q_dot - &r.q_dot)) < 1e-7);
        assert!(max_abs_vec(&(&s.p - &r.p)) < 1e-7, "t={} {} vs {}", s.t, s.p, r.p);
    }
}

#[test]
fn rest_state_accelerates_down_the_potential() {
    let sys = TwoVectorSo3::default();
    let q = PointOnSigma::new(&sys, TwoVectorSo3::canonical_point()).unwrap();
    let st = ReducedState::new(&sys, q.clone(), DVector::zeros(6), DVector::zeros(3), 0.0).unwrap();
    let r = dynamics::wong_rhs(&sys, &st).unwrap();
    let n = dynamics::n_projector(&sys, q.q()).unwrap();
    let expect = -(n * sys.metric_inverse(q.q()).unwrap() * sys.potential_gradient(q.q()));
    assert!(max_abs_vec(&(&r.q_ddot - expect)) < 1e-12);
    assert!(max_abs_vec(&r.p_dot) < 1e-14);
}

#[test]
fn energy_is_conserved_and_fourth_order() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let st = random_state(&sys, &mut rng);
    let traj = dynamics::integrate_system(&sys, &st, 10.0, 1e-3, Method::Rk4).unwrap();
    let drift = traj.max_relative_energy_drift();
    assert!(drift < 1e-7, "drift {drift}");
    assert!(traj.max_constraint() < 1e-9);
    let end = |dt: f64| dynamics::integrate_system(&sys, &st, 1.0, dt, Method::Rk4).unwrap().last().q.clone();
    let reference = end(1e-3);
    let e1 = max_abs_vec(&(end(0.1) - &reference));
    let e2 = max_abs_vec(&(end(0.05) - &reference));
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn kaluza_klein_reduced_flow_matches_oracle() {
    let sys = KaluzaKlein::new(AffineConnection {
        constant: vec![vec![0.3, -0.2], vec![0.1, 0.5], vec![-0.4, 0.2]],
        linear: vec![
            vec![vec![0.1, 0.2], vec![0.0, -0.3]],
            vec![vec![0.2, 0.0], vec![0.1, 0.1]],
            vec![vec![-0.1, 0.3], vec![0.2, 0.0]],
        ],
    })
    .unwrap()
    .with_base_potential(nalgebra::DMatrix::identity(2, 2))
    .unwrap();
    let q = PointOnSigma::new(&sys, DVector::from_vec(vec![0.3, -0.2, 0.0, 0.0, 0.0])).unwrap();
    let st = ReducedState::new(&sys, q, DVector::from_vec(vec![0.2, 0.1, 0.0, 0.0, 0.0]), DVector::from_vec(vec![0.3, -0.1, 0.2]), 0.0).unwrap();
    let lifted = dynamics::lift_velocity(&sys, st.q.q(), &st.q_dot, &st.p).unwrap();
    let (_, fixed) = dynamics::full_space_oracle(&sys, st.q.q(), &lifted, 0.3, 1e-3, 30).unwrap();
    let red = dynamics::integrate_system(&sys, &st, 0.3, 1e-3, Method::Rk4).unwrap();
    for s in &fixed.samples {
        let r = &red.samples[(s.t / 1e-3).round() as usize];
        assert!(max_abs_vec(&(&s.q - &r.q)) < 1e-6, "t={} {} vs {}", s.t, s.q, r.q);
        assert!(max_abs_vec(&(&s.p - &r.p)) < 1e-6, "t={} {} vs {}", s.t, s.p, r.p);
    }
}
