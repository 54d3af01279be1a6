use nalgebra::{DVector, Vector3};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wong_core::dynamics::vertical_quadratic;
use wong_core::equilibria::eigenpairs;
use wong_core::geometry::GeometryAtPoint;
use wong_core::lattice::{coulomb_project, divergence, GaugeLattice};
use wong_core::linalg::{canonical_sign, max_abs};
use wong_core::system::{PointOnSigma, TwoVectorSo3};
use wong_core::{so3, LieAlgebraSpec};

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 3)
}

fn sigma_point(seed: u64) -> (TwoVectorSo3, PointOnSigma) {
    let sys = TwoVectorSo3::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = PointOnSigma::new(&sys, TwoVectorSo3::random_sigma_point(&mut rng)).unwrap();
    (sys, q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_is_antisymmetric_and_bilinear(x in vec3(), y in vec3(), z in vec3(), s in -3.0..3.0f64) {
        let alg = LieAlgebraSpec::so3();
        let xy = alg.bracket(&x, &y);
        let yx = alg.bracket(&y, &x);
        let lin: Vec<f64> = x.iter().zip(&z).map(|(a, b)| s * a + b).collect();
        let lhs = alg.bracket(&lin, &y);
        let zy = alg.bracket(&z, &y);
        for g in 0..3 {
            prop_assert!((xy[g] + yx[g]).abs() < 1e-12);
            prop_assert!((lhs[g] - (s * xy[g] + zy[g])).abs() < 1e-11);
        }
    }

    #[test]
    fn so3_log_inverts_exp(w in vec3()) {
        let w = Vector3::from_column_slice(&w) * 0.7;
        prop_assume!(w.norm() < 3.0);
        prop_assert!((so3::log(&so3::exp(&w)) - w).amax() < 1e-10);
    }

    #[test]
    fn projectors_are_idempotent(seed in any::<u64>()) {
        let (sys, q) = sigma_point(seed);
        let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
        prop_assert!(max_abs(&(&geo.n_proj * &geo.n_proj - &geo.n_proj)) < 1e-9);
        prop_assert!(max_abs(&(&geo.pi_proj * &geo.pi_proj - &geo.pi_proj)) < 1e-9);
        prop_assert!(max_abs(&(&geo.n_proj * &geo.killing)) < 1e-9);
    }

    #[test]
    fn eigenvector_momenta_have_no_vertical_residual(seed in any::<u64>(), scale in -2.0..2.0f64) {
        let (sys, q) = sigma_point(seed);
        let geo = GeometryAtPoint::evaluate(&sys, &q).unwrap();
        let alg = LieAlgebraSpec::so3();
        for pair in eigenpairs(&alg, &geo.gamma_inv) {
            let p = pair.vector * scale;
            prop_assert!(vertical_quadratic(&alg, &geo.gamma_inv, &p).amax() < 1e-10);
        }
    }

    #[test]
    fn canonical_sign_makes_largest_entry_positive(v in prop::collection::vec(-5.0..5.0f64, 1..8)) {
        let mut v = DVector::from_vec(v);
        prop_assume!(v.amax() > 1e-9);
        canonical_sign(&mut v);
        let k = v.iamax();
        prop_assert!(v[k] > 0.0);
    }

    #[test]
    fn coulomb_projection_is_linear_idempotent_and_transverse(
        a in prop::collection::vec(-1.0..1.0f64, 72),
        b in prop::collection::vec(-1.0..1.0f64, 72),
        s in -2.0..2.0f64,
    ) {
        let lat = GaugeLattice::new(2, 1.0).unwrap();
        let a = DVector::from_vec(a);
        let b = DVector::from_vec(b);
        let pa = coulomb_project(&lat, &a);
        let pb = coulomb_project(&lat, &b);
        let pab = coulomb_project(&lat, &(&a * s + &b));
        prop_assert!((pab - (&pa * s + &pb)).amax() < 1e-12);
        prop_assert!((coulomb_project(&lat, &pa) - &pa).amax() < 1e-12);
        prop_assert!(divergence(&lat, &pa).amax() < 1e-12);
    }
}
