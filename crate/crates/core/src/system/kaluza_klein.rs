use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::MechanicalSystem;
use crate::error::{Error, Result};
use crate::lie::LieAlgebraSpec;
use crate::linalg::Tensor3;
use crate::so3;

/// Gauge potential `A^mu_a(x) = constant[mu][a] + sum_b linear[mu][a][b] x^b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConnection {
    pub constant: Vec<Vec<f64>>,
    #[serde(default)]
    pub linear: Vec<Vec<Vec<f64>>>,
}

impl AffineConnection {
    pub fn zero(base_dim: usize) -> Self {
        Self {
            constant: vec![vec![0.0; base_dim]; 3],
            linear: Vec::new(),
        }
    }

    pub fn base_dim(&self) -> usize {
        self.constant.first().map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let m = self.base_dim();
        if self.constant.len() != 3 || self.constant.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("connection constant part must be 3 x base_dim".into()));
        }
        if !self.linear.is_empty()
            && (self.linear.len() != 3
                || self
                    .linear
                    .iter()
                    .any(|r| r.len() != m || r.iter().any(|s| s.len() != m)))
        {
            return Err(Error::Dimension("connection linear part must be 3 x base_dim x base_dim".into()));
        }
        Ok(())
    }

    /// `3 x base_dim` matrix of components at `x`.
    pub fn at(&self, x: &[f64]) -> DMatrix<f64> {
        let m = self.base_dim();
        DMatrix::from_fn(3, m, |mu, a| {
            let mut v = self.constant[mu][a];
            if !self.linear.is_empty() {
                for (b, xb) in x.iter().enumerate() {
                    v += self.linear[mu][a][b] * xb;
                }
            }
            v
        })
    }

    /// `d A^mu_a / dx^b`.
    pub fn gradient(&self) -> Tensor3 {
        let m = self.base_dim();
        Tensor3::from_fn(3, m, m, |mu, a, b| {
            if self.linear.is_empty() {
                0.0
            } else {
                self.linear[mu][a][b]
            }
        })
    }

    /// Closed-form field strength `dA_b/dx^a - dA_a/dx^b + c A_a A_b`, indexed `[alpha][a][b]`.
    pub fn field_strength(&self, algebra: &LieAlgebraSpec, x: &[f64]) -> Tensor3 {
        let m = self.base_dim();
        let a = self.at(x);
        let d = self.gradient();
        Tensor3::from_fn(3, m, m, |al, i, j| {
            let mut f = d.get(al, j, i) - d.get(al, i, j);
            for n in 0..3 {
                for s in 0..3 {
                    f += algebra.c(al, n, s) * a[(n, i)] * a[(s, j)];
                }
            }
            f
        })
    }
}

/// Total space `M x SO(3)` with the Kaluza-Klein metric
/// `h + s (theta + A)^2`, written in exponential coordinates for the group
/// factor. The group acts by right multiplication and the gauge surface is
/// the identity section `theta = 0`.
#[derive(Clone, Debug)]
pub struct KaluzaKlein {
    algebra: LieAlgebraSpec,
    connection: AffineConnection,
    base_metric: DMatrix<f64>,
    fiber_scale: f64,
    base_potential: DMatrix<f64>,
}

/// Largest rotation angle accepted in the exponential chart.
const CHART_LIMIT: f64 = std::f64::consts::PI - 1e-3;

impl KaluzaKlein {
    pub fn new(connection: AffineConnection) -> Result<Self> {
        connection.validate()?;
        let m = connection.base_dim();
        Ok(Self {
            algebra: LieAlgebraSpec::so3(),
            connection,
            base_metric: DMatrix::identity(m, m),
            fiber_scale: 1.0,
            base_potential: DMatrix::zeros(m, m),
        })
    }

    pub fn with_base_metric(mut self, h: DMatrix<f64>) -> Result<Self> {
        let m = self.base_dim();
        if h.shape() != (m, m) {
            return Err(Error::Dimension("base metric must be base_dim x base_dim".into()));
        }
        self.base_metric = (&h + h.transpose()) * 0.5;
        Ok(self)
    }

    pub fn with_fiber_scale(mut self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidInput("fiber scale must be positive".into()));
        }
        self.fiber_scale = s;
        Ok(self)
    }

    /// Potential `x^T H x / 2` on the base (invariant because it ignores the fiber).
    pub fn with_base_potential(mut self, h: DMatrix<f64>) -> Result<Self> {
        let m = self.base_dim();
        if h.shape() != (m, m) {
            return Err(Error::Dimension("base potential must be base_dim x base_dim".into()));
        }
        self.base_potential = (&h + h.transpose()) * 0.5;
        Ok(self)
    }

    pub fn base_dim(&self) -> usize {
        self.connection.base_dim()
    }

    pub fn connection(&self) -> &AffineConnection {
        &self.connection
    }

    fn theta(&self, q: &DVector<f64>) -> Result<Vector3<f64>> {
        let m = self.base_dim();
        let t = Vector3::new(q[m], q[m + 1], q[m + 2]);
        let n = t.norm();
        if n >= CHART_LIMIT || !n.is_finite() {
            return Err(Error::ChartOutOfRange { norm: n });
        }
        Ok(t)
    }

    /// Rows of the vertical one-forms `R^T A dx + J_r dtheta`.
    fn vertical_forms(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = self.base_dim();
        let t = self.theta(q)?;
        let r = so3::exp(&t);
        let a = self.connection.at(&q.as_slice()[..m]);
        let ra = DMatrix::from_fn(3, m, |i, j| (0..3).map(|k| r[(k, i)] * a[(k, j)]).sum());
        let jr = so3::right_jacobian(&t);
        let mut w = DMatrix::zeros(3, m + 3);
        w.view_mut((0, 0), (3, m)).copy_from(&ra);
        for i in 0..3 {
            for j in 0..3 {
                w[(i, m + j)] = jr[(i, j)];
            }
        }
        Ok(w)
    }
}

impl MechanicalSystem for KaluzaKlein {
    fn name(&self) -> &str {
        "kaluza_klein"
    }

    fn n_p(&self) -> usize {
        self.base_dim() + 3
    }

    fn algebra(&self) -> &LieAlgebraSpec {
        &self.algebra
    }

    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = self.base_dim();
        let w = self.vertical_forms(q)?;
        let mut g = w.transpose() * w * self.fiber_scale;
        let mut base = g.view_mut((0, 0), (m, m));
        base += &self.base_metric;
        Ok(g)
    }

    fn killing(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let m = self.base_dim();
        let jinv = so3::right_jacobian_inv(&self.theta(q)?);
        let mut k = DMatrix::zeros(m + 3, 3);
        for i in 0..3 {
            for j in 0..3 {
                k[(m + i, j)] = jinv[(i, j)];
            }
        }
        Ok(k)
    }

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        let m = self.base_dim();
        DVector::from_vec(vec![q[m], q[m + 1], q[m + 2]])
    }

    fn constraint_jacobian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        let m = self.base_dim();
        let mut j = DMatrix::zeros(3, m + 3);
        for i in 0..3 {
            j[(i, m + i)] = 1.0;
        }
        j
    }

    fn constraint_second(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(3)
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        let m = self.base_dim();
        let x = q.rows(0, m);
        0.5 * (x.transpose() * &self.base_potential * x)[(0, 0)]
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let m = self.base_dim();
        let mut g = DVector::zeros(m + 3);
        g.rows_mut(0, m).copy_from(&(&self.base_potential * q.rows(0, m)));
        g
    }

    fn gauge_guess(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = q.clone();
        let m = self.base_dim();
        for i in 0..3 {
            out[m + i] = 0.0;
        }
        Ok(out)
    }

    /// Right multiplication of the group factor by `exp(xi)`.
    fn group_flow(&self, q: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let m = self.base_dim();
        let t = self.theta(q)?;
        let r = so3::exp(&t) * so3::exp(&Vector3::new(xi[0], xi[1], xi[2]));
        let t = so3::log(&r);
        let mut out = q.clone();
        for i in 0..3 {
            out[m + i] = t[i];
        }
        Ok(out)
    }
}
