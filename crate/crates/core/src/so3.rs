//! Rotation-group helpers in exponential coordinates.

use nalgebra::{Matrix3, Rotation3, Vector3};

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

pub fn exp(w: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*w).into_inner()
}

/// Principal logarithm; the angle lies in `[0, pi]`.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    Rotation3::from_matrix_unchecked(*r).scaled_axis()
}

/// Right Jacobian: `exp(w + d) = exp(w) exp(J_r(w) d)` to first order.
pub fn right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let wh = hat(w);
    let (a, b) = if t < 1e-4 {
        let t2 = t * t;
        (0.5 - t2 / 24.0 + t2 * t2 / 720.0, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0)
    } else {
        ((1.0 - t.cos()) / (t * t), (t - t.sin()) / (t * t * t))
    };
    Matrix3::identity() - wh * a + wh * wh * b
}

pub fn right_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let wh = hat(w);
    let b = if t < 1e-4 {
        let t2 = t * t;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        1.0 / (t * t) - (1.0 + t.cos()) / (2.0 * t * t.sin())
    };
    Matrix3::identity() + wh * 0.5 + wh * wh * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_jacobian_inverse_pair() {
        for w in [Vector3::new(0.3, -0.2, 0.9), Vector3::new(1e-6, 0.0, 2e-6), Vector3::new(2.5, 0.4, -0.1)] {
            let e = right_jacobian(&w) * right_jacobian_inv(&w) - Matrix3::identity();
            assert!(e.abs().max() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn right_jacobian_matches_perturbation() {
        let w = Vector3::new(0.4, -0.7, 0.2);
        let d = Vector3::new(1e-6, -2e-6, 3e-6);
        let lhs = exp(&w).transpose() * exp(&(w + d));
        let rhs = exp(&(right_jacobian(&w) * d));
        assert!((lhs - rhs).abs().max() < 1e-11);
    }

    #[test]
    fn log_inverts_exp() {
        let w = Vector3::new(-1.1, 0.5, 0.8);
        assert!((log(&exp(&w)) - w).norm() < 1e-13);
    }
}
