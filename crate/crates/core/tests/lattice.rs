use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wong_core::dynamics::{self, ReducedState};
use wong_core::equilibria::SolverOptions;
use wong_core::geometry::GeometryAtPoint;
use wong_core::lattice::*;
use wong_core::linalg::{max_abs, max_abs_vec, sorted_symmetric_eigen};
use wong_core::system::PointOnSigma;
use wong_core::Error;

fn lattice(side: usize) -> GaugeLattice {
    GaugeLattice::new(side, 1.0).unwrap()
}

fn coulomb_field(lat: &GaugeLattice, amp: f64, rng: &mut ChaCha8Rng) -> GaugeField {
    let raw = GaugeField::random(lat.clone(), amp, rng);
    GaugeField::new(lat.clone(), coulomb_project(lat, &raw.a_field)).unwrap()
}

fn random_vec(n: usize, amp: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-amp..amp))
}

fn rotation(axis: [f64; 3], angle: f64) -> DMatrix<f64> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = DMatrix::from_row_slice(3, 3, &[0.0, -axis[2], axis[1], axis[2], 0.0, -axis[0], -axis[1], axis[0], 0.0]) / n;
    DMatrix::identity(3, 3) + &k * angle.sin() + &k * &k * (1.0 - angle.cos())
}

#[test]
fn generic_pipeline_reproduces_lattice_formulas() {
    let lat = lattice(2);
    let sys = LatticeSystem::new(lat.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let field = coulomb_field(&lat, 0.4, &mut rng);
        let v = coulomb_project(&lat, &random_vec(lat.flat_dim(), 0.5, &mut rng));
        let p = random_vec(lat.site_dim(), 0.5, &mut rng);
        let point = PointOnSigma::new(&sys, field.a_field.clone()).unwrap();
        let geo = GeometryAtPoint::evaluate(&sys, &point).unwrap();
        assert!(max_abs(&(&geo.gamma - fp_operator(&field))) < 1e-8);
        assert!(max_abs(&(&geo.a_conn - coulomb_connection(&field).unwrap())) < 1e-8);

        let state = ReducedState::new(&sys, point, v.clone(), p.clone(), 0.0).unwrap();
        let generic = dynamics::wong_rhs(&sys, &state).unwrap();
        let lat_rhs = ym_rhs(&field, &v, &p).unwrap();
        let t = &lat_rhs.terms;
        let lgeo = LatticeGeometry::new(&field).unwrap();
        let chris = &lgeo.n_proj * (&t.christoffel_connection + &t.christoffel_metric);
        assert!(max_abs_vec(&(&chris - &generic.terms.christoffel)) < 1e-8, "christoffel");
        let mut curv = DVector::zeros(lat.flat_dim());
        for term in &t.curvature {
            curv += term;
        }
        let gi = &geo.metric_inv;
        let curv = gi * (lgeo.n_proj.transpose() * curv);
        assert!(max_abs_vec(&(&curv - &generic.terms.curvature)) < 1e-8, "curvature");
        let mom = gi * (lgeo.n_proj.transpose() * &t.momentum_quadratic);
        assert!(max_abs_vec(&(&mom - &generic.terms.momentum)) < 1e-8, "momentum");
        assert!(max_abs_vec(&(&lat_rhs.a_ddot - &generic.q_ddot)) < 1e-8);
        assert!(max_abs_vec(&(&lat_rhs.p_dot - &generic.p_dot)) < 1e-8);
    }
}

#[test]
fn fp_spectrum_invariant_under_global_rotation() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let field = coulomb_field(&lat, 0.5, &mut rng);
    let r = rotation([0.3, -1.0, 0.7], 1.1);
    let mut rotated = field.a_field.clone();
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            let k = lat.index(0, i, x);
            let seg = r.clone() * field.a_field.rows(k, 3);
            rotated.rows_mut(k, 3).copy_from(&seg);
        }
    }
    let rotated = GaugeField::new(lat.clone(), rotated).unwrap();
    let (a, _) = sorted_symmetric_eigen(&fp_operator(&field));
    let (b, _) = sorted_symmetric_eigen(&fp_operator(&rotated));
    assert!((a - b).amax() < 1e-10);
}

#[test]
fn vacuum_fp_operator_is_laplacian() {
    let lat = lattice(3);
    let field = GaugeField::zero(lat.clone());
    let gamma = fp_operator(&field);
    let grad = gradient_operator(&lat);
    assert!(max_abs(&(&gamma - grad.transpose() * &grad)) < 1e-12);
    let green = green_function(&gamma).unwrap();
    assert_eq!(green.kernel_dim, lat.n_g());
    assert!(max_abs(&(&gamma * &green.pinv * &gamma - &gamma)) < 1e-10);
    assert!(max_abs(&(&green.pinv * &gamma * &green.pinv - &green.pinv)) < 1e-10);
}

#[test]
fn potential_gradient_matches_finite_differences() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let field = GaugeField::random(lat.clone(), 0.6, &mut rng);
    let (_, grad) = potential_and_gradient(&lat, &field.a_field);
    let h = 1e-5;
    let fd = DVector::from_fn(lat.flat_dim(), |k, _| {
        let mut a = field.a_field.clone();
        a[k] += h;
        let vp = potential_and_gradient(&lat, &a).0;
        a[k] -= 2.0 * h;
        let vm = potential_and_gradient(&lat, &a).0;
        (vp - vm) / (2.0 * h)
    });
    assert!((&grad - &fd).norm() / grad.norm() < 1e-6);
}

#[test]
fn abelian_plane_wave_energy() {
    let lat = lattice(4);
    let mut a = DVector::zeros(lat.flat_dim());
    let k = std::f64::consts::TAU / 4.0;
    for x in 0..lat.n_sites() {
        let c = lat.coords(x);
        a[lat.index(2, 1, x)] = (k * c[0] as f64).sin();
    }
    let (v, _) = potential_and_gradient(&lat, &a);
    // F_01 = -F_10 = forward difference of A_1 along x0
    let mut expect = 0.0;
    for x in 0..lat.n_sites() {
        let d = a[lat.index(2, 1, lat.shift(x, 0, 1))] - a[lat.index(2, 1, x)];
        expect += d * d;
    }
    assert!((v - expect).abs() < 1e-12);
}

#[test]
fn coulomb_projection_is_transverse_and_idempotent() {
    let lat = lattice(3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let raw = random_vec(lat.flat_dim(), 1.0, &mut rng);
    let a = coulomb_project(&lat, &raw);
    assert!(divergence(&lat, &a).amax() < 1e-12);
    assert!((coulomb_project(&lat, &a) - &a).amax() < 1e-12);
    let w = random_vec(lat.site_dim(), 1.0, &mut rng);
    let pure = gradient_operator(&lat) * w;
    assert!(coulomb_project(&lat, &pure).amax() < 1e-12);
}

#[test]
fn free_transverse_field_at_vacuum_does_not_accelerate() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let field = GaugeField::zero(lat.clone());
    let v = coulomb_project(&lat, &random_vec(lat.flat_dim(), 1.0, &mut rng));
    let rhs = ym_rhs(&field, &v, &DVector::zeros(lat.site_dim())).unwrap();
    assert!(rhs.a_ddot.amax() < 1e-12);
}

#[test]
fn green_eigenvectors_solve_vertical_equation() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..3 {
        let field = coulomb_field(&lat, 0.1, &mut rng);
        for pair in green_eigenpairs(&field).unwrap() {
            let (_, res_v) = ym_equilibrium_residuals(&field, &(pair.vector * 0.7)).unwrap();
            assert!(res_v.norm() < 1e-9);
        }
        let p = random_vec(lat.site_dim(), 1.0, &mut rng);
        let (_, res_v) = ym_equilibrium_residuals(&field, &p).unwrap();
        assert!(res_v.norm() > 1e-6);
    }
}

#[test]
fn vacuum_is_an_equilibrium() {
    let lat = lattice(2);
    let field = GaugeField::zero(lat.clone());
    let (h, v) = ym_equilibrium_residuals(&field, &DVector::zeros(lat.site_dim())).unwrap();
    assert_eq!(h.amax(), 0.0);
    assert_eq!(v.amax(), 0.0);
    let sol = ym_solve_equilibrium(&field, 0, 0.0, &SolverOptions::default()).unwrap();
    assert!(sol.converged);
    let eq = sol.into_result().unwrap();
    assert!(eq.residual_h < 1e-10 && eq.residual_v < 1e-10);
    assert!(eq.a_field.amax() < 1e-12);
}

#[test]
fn zero_scale_converges_to_transverse_critical_point() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let guess = GaugeField::random(lat.clone(), 0.05, &mut rng);
    let sol = ym_solve_equilibrium(&guess, 0, 0.0, &SolverOptions::default()).unwrap();
    assert!(sol.converged, "{:?}", sol.best.history);
    assert!(sol.best.residual_h < 1e-7);
    assert!(sol.best.constraint < 1e-10);
}

#[test]
fn nonzero_scale_branch_is_monotone_or_flagged() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let guess = coulomb_field(&lat, 0.1, &mut rng);
    let opts = SolverOptions {
        max_iterations: 30,
        ..SolverOptions::default()
    };
    match ym_solve_equilibrium(&guess, lat.site_dim() - 1, 0.3, &opts) {
        Ok(sol) => {
            assert!(sol.best.history.windows(2).all(|w| w[1] <= w[0]));
            if !sol.converged {
                assert!(matches!(sol.into_result(), Err(Error::NoConvergence { .. })));
            }
        }
        Err(e) => assert!(matches!(e, Error::EigenCrossing { .. }), "{e}"),
    }
}

#[test]
fn lattice_flow_stays_transverse_with_fourth_order_convergence() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let field = coulomb_field(&lat, 0.3, &mut rng);
    let geo = LatticeGeometry::new(&field).unwrap();
    let v = &geo.n_proj * random_vec(lat.flat_dim(), 0.3, &mut rng);
    let p = random_vec(lat.site_dim(), 0.3, &mut rng);
    let flow = LatticeFlow { lattice: lat.clone() };
    let run = |dt: f64| dynamics::integrate(&flow, &field.a_field, &v, &p, 0.0, 0.4, dt, dynamics::Method::Rk4).unwrap();
    let reference = run(0.0025);
    assert!(reference.max_constraint() < 1e-12);
    assert!(reference.invariants.iter().all(|s| s.tangency < 1e-12));
    let coarse = run(0.04);
    let fine = run(0.02);
    let err = |t: &dynamics::Trajectory| (&t.last().q - &reference.last().q).amax();
    let ratio = err(&coarse) / err(&fine);
    assert!((12.0..20.0).contains(&ratio), "{ratio}");
}

#[test]
fn gribov_region_contains_small_fields() {
    let lat = lattice(3);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    assert!(gribov_check(&GaugeField::zero(lat.clone())).inside);
    assert!(gribov_check(&coulomb_field(&lat, 0.05, &mut rng)).inside);
}

#[test]
fn coulomb_slice_keeps_the_global_orbit_directions() {
    let lat = lattice(2);
    let sys = LatticeSystem::new(lat.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let field = coulomb_field(&lat, 0.3, &mut rng);
        let point = PointOnSigma::new(&sys, field.a_field.clone()).unwrap();
        let geo = GeometryAtPoint::evaluate(&sys, &point).unwrap();
        let r = geo.identity_residuals();
        for v in [r.n_idempotent, r.n_then_p_perp, r.p_perp_then_n, r.pi_n, r.connection_on_horizontal, r.connection_on_killing] {
            assert!(v < 1e-9, "{r:?}");
        }
        assert_eq!(geo.g_h_rank, lat.flat_dim() - lat.site_dim());
        let nk = &geo.n_proj * &geo.killing;
        let (s, _) = sorted_symmetric_eigen(&(nk.transpose() * &nk));
        let kept = s.iter().filter(|&&x| x > 1e-12 * s.max()).count();
        assert_eq!(kept, lat.n_g());
    }
}
