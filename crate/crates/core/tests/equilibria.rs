use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wong_core::equilibria::{self, SolverOptions};
use wong_core::geometry::orbit_metric;
use wong_core::system::{AffineConnection, InvariantPotential, KaluzaKlein, MechanicalSystem, PointOnSigma, TwoVectorSo3};
use wong_core::linalg::max_abs_vec;

#[test]
fn canonical_point_eigenvalues() {
    let sys = TwoVectorSo3::default();
    let q = TwoVectorSo3::canonical_point();
    let pairs = equilibria::momentum_eigenproblem(&sys, &q).unwrap();
    let lams: Vec<f64> = pairs.iter().map(|e| e.lambda).collect();
    assert!((lams[0] + 2.0).abs() < 1e-12 && (lams[1] + 2.0).abs() < 1e-12 && (lams[2] + 1.0).abs() < 1e-12);
    assert!((pairs[2].vector[1].abs() - 1.0).abs() < 1e-12, "{}", pairs[2].vector);
    // brute-force eigen residual
    let (_, gi, _) = orbit_metric(&sys, &q).unwrap();
    let m = sys.algebra().k() * gi;
    for e in &pairs {
        assert!(max_abs_vec(&(&m * &e.vector - &e.vector * e.lambda)) < 1e-10);
    }
}

#[test]
fn bi_invariant_orbit_metric_is_fully_degenerate() {
    let sys = KaluzaKlein::new(AffineConnection::zero(1)).unwrap();
    let pairs = equilibria::momentum_eigenproblem(&sys, &DVector::from_vec(vec![0.2, 0.0, 0.0, 0.0])).unwrap();
    for e in pairs {
        assert!((e.lambda + 2.0).abs() < 1e-12);
    }
}

#[test]
fn eigenvectors_solve_the_vertical_equation() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let q = TwoVectorSo3::random_sigma_point(&mut rng);
        for e in equilibria::momentum_eigenproblem(&sys, &q).unwrap() {
            assert!(equilibria::vertical_residual(&sys, &q, &e.vector).unwrap().norm() < 1e-10);
        }
        let p = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let r1 = equilibria::vertical_residual(&sys, &q, &p).unwrap();
        let r2 = equilibria::vertical_residual(&sys, &q, &(&p * 3.0)).unwrap();
        assert!(max_abs_vec(&(r2 - r1 * 9.0)) < 1e-12);
    }
    let q = TwoVectorSo3::canonical_point();
    let axis = DVector::from_vec(vec![0.0, 1.0, 0.0]);
    assert!(equilibria::vertical_residual(&sys, &q, &axis).unwrap().norm() < 1e-15);
    let generic = DVector::from_vec(vec![0.3, 0.5, -0.2]);
    assert!(equilibria::vertical_residual(&sys, &q, &generic).unwrap().norm() > 1e-3);
}

#[test]
fn harmonic_relative_equilibrium() {
    let sys = TwoVectorSo3::default();
    let q0 = TwoVectorSo3::canonical_point();
    let eq = equilibria::solve_equilibrium(&sys, &q0, 2, 1.0, &SolverOptions::default()).unwrap();
    assert!(eq.residual_v < 1e-10, "{eq:?}");
    assert!(eq.residual_h < 1e-8, "{eq:?}");
    let check = equilibria::verify_dynamically(&sys, &eq, 1.0, 1e-3).unwrap();
    assert!(check.max_q_dot < 1e-6, "{check:?}");
    assert!(check.max_p_change < 1e-8, "{check:?}");
}

#[test]
fn zero_scale_at_critical_point_is_ordinary_equilibrium() {
    let sys = TwoVectorSo3::new(InvariantPotential {
        linear: [-1.0, -1.0, 0.0],
        quadratic: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    });
    let q = TwoVectorSo3::canonical_point();
    let pt = PointOnSigma::new(&sys, q.clone()).unwrap();
    assert!(equilibria::horizontal_residual(&sys, &pt, &DVector::zeros(3)).unwrap().norm() < 1e-12);
    let eq = equilibria::solve_equilibrium(&sys, &q, 0, 0.0, &SolverOptions::default()).unwrap();
    assert!(eq.p.norm() == 0.0);
    assert!(max_abs_vec(&(eq.q.q() - &q)) < 1e-10);
}

#[test]
fn away_from_critical_points_the_residual_is_the_force() {
    let sys = TwoVectorSo3::default();
    let q = PointOnSigma::new(&sys, TwoVectorSo3::canonical_point()).unwrap();
    let r = equilibria::horizontal_residual(&sys, &q, &DVector::zeros(3)).unwrap();
    let n = wong_core::dynamics::n_projector(&sys, q.q()).unwrap();
    let expect = -(n * DMatrix::identity(6, 6) * sys.potential_gradient(q.q()));
    assert!(max_abs_vec(&(r - expect)) < 1e-12);
}

#[test]
fn multistart_runs_every_guess() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let starts: Vec<_> = (0..4).map(|_| (TwoVectorSo3::random_sigma_point(&mut rng), 1.0)).collect();
    let res = equilibria::multistart(&sys, &starts, 2, &SolverOptions::default());
    assert_eq!(res.len(), 4);
    for r in res.into_iter().flatten() {
        assert!(r.residual_v < 1e-10 && r.residual_h < 1e-8);
    }
}
