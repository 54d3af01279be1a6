use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wong_core::geometry::{self, GeometryAtPoint};
use wong_core::system::{
    self, AffineConnection, FiniteDifferenced, KaluzaKlein, MechanicalSystem, PointOnSigma, TwoVectorSo3,
};
use wong_core::linalg::{max_abs, Tensor3};

fn canonical() -> (TwoVectorSo3, PointOnSigma) {
    let sys = TwoVectorSo3::default();
    let q = PointOnSigma::new(&sys, TwoVectorSo3::canonical_point()).unwrap();
    (sys, q)
}

fn kk_random(rng: &mut ChaCha8Rng, base_dim: usize, linear: bool) -> KaluzaKlein {
    let constant = (0..3)
        .map(|_| (0..base_dim).map(|_| rng.random_range(-0.8..0.8)).collect())
        .collect();
    let linear = if linear {
        (0..3)
            .map(|_| {
                (0..base_dim)
                    .map(|_| (0..base_dim).map(|_| rng.random_range(-0.5..0.5)).collect())
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    KaluzaKlein::new(AffineConnection { constant, linear })
        .unwrap()
        .with_fiber_scale(1.7)
        .unwrap()
}

#[test]
fn orbit_metric_at_canonical_point() {
    let (sys, q) = canonical();
    let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
    // brute force: gamma_{mu nu} = sum_s K_mu^(s) . K_nu^(s) from the cross products
    let x = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
    let mut brute = DMatrix::zeros(3, 3);
    for xs in x {
        let v = nalgebra::Vector3::from(xs);
        for mu in 0..3 {
            for nu in 0..3 {
                let a = v.cross(&nalgebra::Vector3::ith(mu, 1.0));
                let b = v.cross(&nalgebra::Vector3::ith(nu, 1.0));
                brute[(mu, nu)] += a.dot(&b);
            }
        }
    }
    let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 1.0]));
    assert!(max_abs(&(&brute - &expect)) < 1e-15);
    assert!(max_abs(&(&geo.gamma - &expect)) < 1e-14);
    assert_eq!(geo.g_h_rank, 3);
}

#[test]
fn collinear_vectors_have_singular_fp() {
    let sys = TwoVectorSo3::default();
    let q = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]);
    let p = PointOnSigma::new(&sys, q.clone()).unwrap();
    assert!(matches!(
        GeometryAtPoint::evaluate(&sys, &p),
        Err(wong_core::Error::SingularFp { .. })
    ));
    assert!(matches!(system::project_to_sigma(&sys, &q), Err(wong_core::Error::SingularFp { .. })));
}

#[test]
fn identity_suite_two_vector() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let q = PointOnSigma::new(&sys, TwoVectorSo3::random_sigma_point(&mut rng)).unwrap();
        let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
        let r = geo.identity_residuals();
        assert!(r.max_residual() < 1e-9, "{r:?}");
        assert_eq!(r.g_h_rank_deficit, 0);
        assert!(r.gamma_min_eigenvalue > 0.0);
    }
}

#[test]
fn identity_suite_kaluza_klein() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..20 {
        let sys = kk_random(&mut rng, 2, i % 2 == 0)
            .with_base_metric(DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.2, 0.9]))
            .unwrap();
        let x = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0, 0.0, 0.0]);
        let q = PointOnSigma::new(&sys, x).unwrap();
        let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
        let r = geo.identity_residuals();
        assert!(r.max_residual() < 1e-9, "{r:?}");
        assert_eq!(r.g_h_rank_deficit, 0);
    }
}

#[test]
fn kaluza_klein_connection_and_curvature_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for linear in [false, true] {
        let sys = kk_random(&mut rng, 3, linear);
        let xb: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut x = DVector::zeros(6);
        x.rows_mut(0, 3).copy_from_slice(&xb);
        let q = PointOnSigma::new(&sys, x).unwrap();
        let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
        let a_in = sys.connection().at(&xb);
        assert!(max_abs(&(geo.a_conn.columns(0, 3) - &a_in)) < 1e-8);
        assert!(max_abs(&(geo.a_conn.columns(3, 3) - DMatrix::identity(3, 3))) < 1e-12);
        let f = sys.connection().field_strength(sys.algebra(), &xb);
        let mut worst = 0.0_f64;
        for al in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    worst = worst.max((geo.f_curv.get(al, a, b) - f.get(al, a, b)).abs());
                }
            }
        }
        assert!(worst < 1e-6, "linear={linear} worst={worst}");
        // curvature vanishes along the fibre
        for al in 0..3 {
            for e in 0..6 {
                for p in 3..6 {
                    assert!(geo.f_curv.get(al, e, p).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn kaluza_klein_zero_connection_is_flat() {
    let sys = KaluzaKlein::new(AffineConnection::zero(2)).unwrap();
    let q = PointOnSigma::new(&sys, DVector::from_vec(vec![0.3, -0.4, 0.0, 0.0, 0.0])).unwrap();
    let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
    assert!(max_abs(&geo.a_conn.columns(0, 2).into_owned()) < 1e-14);
    assert!(geo.f_curv.max_abs() < 1e-9);
    let base = |m: &DMatrix<f64>| m.view((0, 0), (2, 2)).into_owned();
    assert!(max_abs(&(base(&geo.n_proj) - base(&geo.p_perp))) < 1e-14);
    assert!(max_abs(&(base(&geo.n_proj) - base(&geo.pi_proj))) < 1e-14);
    let blocks = geo.pseudoinverse_blocks();
    assert!(max_abs(&blocks.upper_right) < 1e-14);
    assert!(max_abs(&blocks.lower_left) < 1e-14);
}

#[test]
fn pure_orbit_has_no_horizontal_directions() {
    let sys = KaluzaKlein::new(AffineConnection::zero(0)).unwrap();
    let q = PointOnSigma::new(&sys, DVector::zeros(3)).unwrap();
    let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
    assert!(max_abs(&geo.g_h) < 1e-14);
    assert!(max_abs(&geo.pi_proj) < 1e-14);
    assert_eq!(geo.g_h_rank, 0);
    assert!(max_abs(&geo.pseudoinverse_blocks().upper_left) < 1e-14);
}

#[test]
fn curvature_is_antisymmetric_at_canonical_point() {
    let (sys, q) = canonical();
    let f = geometry::curvature(&sys, q.q()).unwrap();
    let mut worst = 0.0_f64;
    for al in 0..3 {
        for e in 0..6 {
            for p in 0..6 {
                worst = worst.max((f.get(al, e, p) + f.get(al, p, e)).abs());
            }
        }
    }
    assert!(worst < 1e-8);
}

#[test]
fn curvature_annihilates_killing_fields() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let q = TwoVectorSo3::random_configuration(&mut rng);
    let f = geometry::curvature(&sys, &q).unwrap();
    let k = sys.killing(&q).unwrap();
    for al in 0..3 {
        let fa = f.slice(al);
        assert!(max_abs(&(fa * &k)) < 1e-10);
    }
}

#[test]
fn analytic_and_finite_difference_geometry_agree() {
    let sys = TwoVectorSo3::default();
    let fd = FiniteDifferenced::new(TwoVectorSo3::default());
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let q = PointOnSigma::new(&sys, TwoVectorSo3::random_sigma_point(&mut rng)).unwrap();
        let a = GeometryAtPoint::evaluate(&sys, &q).unwrap();
        let b = GeometryAtPoint::evaluate(&fd, &q).unwrap();
        let rel = |x: &Tensor3, y: &Tensor3| x.sub(y).max_abs() / x.max_abs().max(1.0);
        assert!(rel(&a.f_curv, &b.f_curv) < 1e-6);
        assert!(rel(&a.christoffel_h, &b.christoffel_h) < 1e-6);
        assert!(rel(&a.d_gamma, &b.d_gamma) < 1e-6);
    }
}

#[test]
fn christoffel_is_symmetric_and_vanishes_for_flat_base() {
    let (sys, q) = canonical();
    let g = geometry::christoffel_horizontal(&sys, &q).unwrap();
    for a in 0..6 {
        for c in 0..6 {
            for d in 0..6 {
                assert_eq!(g.get(a, c, d), g.get(a, d, c));
            }
        }
    }
    let kk = KaluzaKlein::new(AffineConnection::zero(2)).unwrap();
    let q = PointOnSigma::new(&kk, DVector::from_vec(vec![0.1, 0.2, 0.0, 0.0, 0.0])).unwrap();
    assert!(geometry::christoffel_horizontal(&kk, &q).unwrap().max_abs() < 1e-9);
}

#[test]
fn covariant_derivative_of_gamma() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    // bi-invariant orbit metric: the momentum-quadratic contraction vanishes
    let sys = kk_random(&mut rng, 2, true);
    let q = PointOnSigma::new(&sys, DVector::from_vec(vec![0.2, -0.5, 0.0, 0.0, 0.0])).unwrap();
    let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
    assert!(max_abs(&(&geo.gamma - DMatrix::identity(3, 3) * 1.7)) < 1e-12);
    let alg = sys.algebra();
    for _ in 0..10 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        for s in 0..3 {
            let mut v = 0.0;
            for m in 0..3 {
                for n in 0..3 {
                    for k in 0..3 {
                        v += alg.c(m, s, n) * geo.gamma_inv[(n, k)] * p[m] * p[k];
                    }
                }
            }
            assert!(v.abs() < 1e-12);
        }
    }
    let tv = TwoVectorSo3::default();
    for _ in 0..5 {
        let q = PointOnSigma::new(&tv, TwoVectorSo3::random_sigma_point(&mut rng)).unwrap();
        let geo = GeometryAtPoint::evaluate(&tv, &q).unwrap();
        assert!(geometry::derivation_residual(&geo) < 1e-8);
    }
}

#[test]
fn orthogonality_of_pseudoinverse_blocks() {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let q = PointOnSigma::new(&sys, TwoVectorSo3::random_sigma_point(&mut rng)).unwrap();
        let b = geometry::pseudoinverse_blocks(&sys, &q).unwrap();
        assert!(b.orthogonality_residual < 1e-9);
    }
}
