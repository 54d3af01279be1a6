use nalgebra::{DMatrix, DVector, Vector3};
use rand::RngExt;
use serde::{Deserialize, Serialize};

use super::{DerivativeMode, MechanicalSystem};
use crate::error::Result;
use crate::lie::LieAlgebraSpec;
use crate::so3;

/// `V = l . s + s^T Q s / 2` in the invariants `s = (|x1|^2, |x2|^2, x1.x2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantPotential {
    #[serde(default = "harmonic_linear")]
    pub linear: [f64; 3],
    #[serde(default)]
    pub quadratic: [[f64; 3]; 3],
}

fn harmonic_linear() -> [f64; 3] {
    [0.5, 0.5, 0.0]
}

impl Default for InvariantPotential {
    fn default() -> Self {
        Self::harmonic()
    }
}

impl InvariantPotential {
    /// `(|x1|^2 + |x2|^2) / 2`.
    pub fn harmonic() -> Self {
        Self {
            linear: harmonic_linear(),
            quadratic: [[0.0; 3]; 3],
        }
    }

    pub fn zero() -> Self {
        Self {
            linear: [0.0; 3],
            quadratic: [[0.0; 3]; 3],
        }
    }

    fn sym_q(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.quadratic[i][j] + self.quadratic[j][i])
    }

    pub fn value(&self, s: &[f64; 3]) -> f64 {
        let mut v = 0.0;
        for i in 0..3 {
            v += self.linear[i] * s[i];
            for j in 0..3 {
                v += 0.5 * s[i] * self.sym_q(i, j) * s[j];
            }
        }
        v
    }

    pub fn gradient(&self, s: &[f64; 3]) -> [f64; 3] {
        let mut g = self.linear;
        for (i, gi) in g.iter_mut().enumerate() {
            for j in 0..3 {
                *gi += self.sym_q(i, j) * s[j];
            }
        }
        g
    }
}

/// Two vectors in R^3 under simultaneous rotation, flat metric, gauge fixed
/// with the first vector on the z-axis and the second in the x-z plane.
#[derive(Clone, Debug)]
pub struct TwoVectorSo3 {
    algebra: LieAlgebraSpec,
    pub potential: InvariantPotential,
}

impl Default for TwoVectorSo3 {
    fn default() -> Self {
        Self::new(InvariantPotential::harmonic())
    }
}

pub(crate) fn split(q: &DVector<f64>) -> (Vector3<f64>, Vector3<f64>) {
    (
        Vector3::new(q[0], q[1], q[2]),
        Vector3::new(q[3], q[4], q[5]),
    )
}

impl TwoVectorSo3 {
    pub fn new(potential: InvariantPotential) -> Self {
        Self {
            algebra: LieAlgebraSpec::so3(),
            potential,
        }
    }

    /// `(0,0,1, 1,0,0)`: unit vectors along z and x.
    pub fn canonical_point() -> DVector<f64> {
        DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    }

    pub fn invariants(q: &DVector<f64>) -> [f64; 3] {
        let (a, b) = split(q);
        [a.norm_squared(), b.norm_squared(), a.dot(&b)]
    }

    /// Random configuration with well separated, non-collinear vectors.
    /// Not gauge fixed.
    pub fn random_configuration<R: RngExt + ?Sized>(rng: &mut R) -> DVector<f64> {
        loop {
            let q = DVector::from_fn(6, |_, _| rng.random_range(-1.5..1.5));
            let (a, b) = split(&q);
            let cross = a.cross(&b).norm();
            if a.norm() > 0.4 && b.norm() > 0.4 && cross > 0.3 * a.norm() * b.norm() {
                return q;
            }
        }
    }

    /// Random point already on the gauge surface.
    pub fn random_sigma_point<R: RngExt + ?Sized>(rng: &mut R) -> DVector<f64> {
        let z = rng.random_range(0.5..1.5) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let ang: f64 = rng.random_range(0.3..2.8);
        let r = rng.random_range(0.5..1.5);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        DVector::from_vec(vec![0.0, 0.0, z, sign * r * ang.sin(), 0.0, r * ang.cos()])
    }
}

impl MechanicalSystem for TwoVectorSo3 {
    fn name(&self) -> &str {
        "two_vector_so3"
    }

    fn n_p(&self) -> usize {
        6
    }

    fn algebra(&self) -> &LieAlgebraSpec {
        &self.algebra
    }

    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::Analytic
    }

    fn metric(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(6, 6))
    }

    fn metric_inverse(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(DMatrix::identity(6, 6))
    }

    /// Column `mu` is `(x1 x e_mu, x2 x e_mu)`.
    fn killing(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut k = DMatrix::zeros(6, 3);
        for (s, x) in [q.rows(0, 3), q.rows(3, 3)].into_iter().enumerate() {
            let x = Vector3::new(x[0], x[1], x[2]);
            for mu in 0..3 {
                let col = x.cross(&Vector3::ith(mu, 1.0));
                for i in 0..3 {
                    k[(3 * s + i, mu)] = col[i];
                }
            }
        }
        Ok(k)
    }

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![q[0], q[1], q[4]])
    }

    fn constraint_jacobian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(3, 6);
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        j[(2, 4)] = 1.0;
        j
    }

    fn constraint_second(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(3)
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        self.potential.value(&Self::invariants(q))
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let (a, b) = split(q);
        let g = self.potential.gradient(&Self::invariants(q));
        let ga = a * (2.0 * g[0]) + b * g[2];
        let gb = b * (2.0 * g[1]) + a * g[2];
        DVector::from_vec(vec![ga[0], ga[1], ga[2], gb[0], gb[1], gb[2]])
    }

    fn metric_derivative(&self, _q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        Ok(vec![DMatrix::zeros(6, 6); 6])
    }

    fn killing_derivative(&self, _q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let unit = DVector::from_fn(6, |_, _| 0.0);
        Ok((0..6)
            .map(|e| {
                let mut v = unit.clone();
                v[e] = 1.0;
                self.killing(&v).expect("linear field")
            })
            .collect())
    }

    /// Rotate so that `x1` lies on the z-axis and `x2` in the x-z plane,
    /// keeping the signs of `x1_z` and `x2_x` where they are defined.
    fn gauge_guess(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let (a, b) = split(q);
        let e3 = a.normalize() * if a[2] < 0.0 { -1.0 } else { 1.0 };
        let v = b - e3 * b.dot(&e3);
        let e1 = v.normalize() * if v[0] < 0.0 { -1.0 } else { 1.0 };
        let e2 = e3.cross(&e1);
        let r = nalgebra::Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
        let r = if r.determinant() < 0.0 {
            nalgebra::Matrix3::from_rows(&[e1.transpose(), -e2.transpose(), e3.transpose()])
        } else {
            r
        };
        let (a, b) = (r * a, r * b);
        Ok(DVector::from_vec(vec![a[0], a[1], a[2], b[0], b[1], b[2]]))
    }

    /// The flow of `K xi` rotates both vectors by the angle vector `-xi`.
    fn group_flow(&self, q: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let r = so3::exp(&-Vector3::new(xi[0], xi[1], xi[2]));
        let (a, b) = split(q);
        let (a, b) = (r * a, r * b);
        Ok(DVector::from_vec(vec![a[0], a[1], a[2], b[0], b[1], b[2]]))
    }
}
