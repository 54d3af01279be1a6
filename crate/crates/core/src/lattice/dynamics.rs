use nalgebra::DVector;
use serde::Serialize;

use super::operators::{apply_metric, bracket_field_site, coulomb_project, divergence, potential_and_gradient, LatticeGeometry};
use super::{GaugeField, GaugeLattice};
use crate::dynamics::{InvariantSample, ReducedFlow};
use crate::error::Result;

/// `R_w^T Y` where `R_w X = [X, w]` pointwise.
fn bracket_right_transpose(lat: &GaugeLattice, w: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(lat.flat_dim());
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            for &(a, n, m, c) in lat.algebra().nonzero_constants() {
                out[lat.index(n, i, x)] += c * w[lat.site_index(m, x)] * y[lat.index(a, i, x)];
            }
        }
    }
    out
}

/// `C(v)^T Y` where `C(v) w = [v, w]` pointwise; a site function.
fn bracket_left_transpose(lat: &GaugeLattice, v: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(lat.site_dim());
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            for &(a, n, m, c) in lat.algebra().nonzero_constants() {
                out[lat.site_index(m, x)] += c * v[lat.index(n, i, x)] * y[lat.index(a, i, x)];
            }
        }
    }
    out
}

/// `sum_a c^a_{n s} u^n p_a` at every site.
fn coadjoint_left(lat: &GaugeLattice, u: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(lat.site_dim());
    for x in 0..lat.n_sites() {
        for &(a, n, s, c) in lat.algebra().nonzero_constants() {
            out[lat.site_index(s, x)] += c * u[lat.site_index(n, x)] * p[lat.site_index(a, x)];
        }
    }
    out
}

/// `sum_g c^g_{a b} w^b p_g` at every site.
pub(super) fn coadjoint_right(lat: &GaugeLattice, w: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(lat.site_dim());
    for x in 0..lat.n_sites() {
        for &(g, a, b, c) in lat.algebra().nonzero_constants() {
            out[lat.site_index(a, x)] += c * w[lat.site_index(b, x)] * p[lat.site_index(g, x)];
        }
    }
    out
}

struct Ctx<'a> {
    lat: &'a GaugeLattice,
    geo: &'a LatticeGeometry,
    v: &'a DVector<f64>,
    p: &'a DVector<f64>,
    u: DVector<f64>,
    pi: DVector<f64>,
}

impl<'a> Ctx<'a> {
    fn new(lat: &'a GaugeLattice, geo: &'a LatticeGeometry, v: &'a DVector<f64>, p: &'a DVector<f64>) -> Self {
        let u = &geo.connection * v;
        let pi = &geo.green.pinv * p;
        Self { lat, geo, v, p, u, pi }
    }

    fn g(&self, x: &DVector<f64>) -> DVector<f64> {
        apply_metric(self.lat, x, false)
    }
}

/// `-Pi [v, A v]`, the part of the horizontal Christoffel term coming from
/// the field dependence of the covariant derivative.
pub fn christoffel_connection_term(lat: &GaugeLattice, geo: &LatticeGeometry, v: &DVector<f64>) -> DVector<f64> {
    let u = &geo.connection * v;
    -(&geo.pi_proj * bracket_field_site(lat, v, &u))
}

/// `Pi G^{-1} R_u^T G (v - D u)` with `u = A v`, the part coming from the
/// variation of the connection.
pub fn christoffel_metric_term(lat: &GaugeLattice, geo: &LatticeGeometry, v: &DVector<f64>) -> DVector<f64> {
    let u = &geo.connection * v;
    let w = v - &geo.cov * &u;
    let y = bracket_right_transpose(lat, &u, &apply_metric(lat, &w, false));
    &geo.pi_proj * apply_metric(lat, &y, true)
}

macro_rules! curvature_term {
    ($(#[$doc:meta])* $name:ident, |$c:ident| $body:expr) => {
        $(#[$doc])*
        pub fn $name(lat: &GaugeLattice, geo: &LatticeGeometry, v: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
            let $c = Ctx::new(lat, geo, v, p);
            $body
        }
    };
}

curvature_term!(
    /// `-A^T C(v)^T G D pi`.
    curvature_term_1,
    |c| -(c.geo.connection.transpose() * bracket_left_transpose(c.lat, c.v, &c.g(&(&c.geo.cov * &c.pi))))
);

curvature_term!(
    /// `-A^T D^T G [v, pi]`.
    curvature_term_2,
    |c| -(c.geo.connection.transpose() * (c.geo.cov.transpose() * c.g(&bracket_field_site(c.lat, c.v, &c.pi))))
);

curvature_term!(
    /// `G [v, pi] - R_pi^T G v`.
    curvature_term_3,
    |c| c.g(&bracket_field_site(c.lat, c.v, &c.pi)) - bracket_right_transpose(c.lat, &c.pi, &c.g(c.v))
);

curvature_term!(
    /// `R_u^T G D pi`.
    curvature_term_4,
    |c| bracket_right_transpose(c.lat, &c.u, &c.g(&(&c.geo.cov * &c.pi)))
);

curvature_term!(
    /// `R_pi^T G D u`.
    curvature_term_5,
    |c| bracket_right_transpose(c.lat, &c.pi, &c.g(&(&c.geo.cov * &c.u)))
);

curvature_term!(
    /// `A^T (c^a_{n s} u^n p_a)`.
    curvature_term_6,
    |c| c.geo.connection.transpose() * coadjoint_left(c.lat, &c.u, c.p)
);

/// Half the covariant derivative of the Green function contracted twice
/// with `p`: `-R_pi^T G D pi + A^T (c^g_{ab} pi^b p_g)`.
pub fn momentum_quadratic_term(lat: &GaugeLattice, geo: &LatticeGeometry, p: &DVector<f64>) -> DVector<f64> {
    let pi = &geo.green.pinv * p;
    -bracket_right_transpose(lat, &pi, &apply_metric(lat, &(&geo.cov * &pi), false))
        + geo.connection.transpose() * coadjoint_right(lat, &pi, p)
}

#[derive(Clone, Debug, Serialize)]
pub struct YmTerms {
    pub christoffel_connection: DVector<f64>,
    pub christoffel_metric: DVector<f64>,
    /// The six curvature covectors, in order.
    pub curvature: [DVector<f64>; 6],
    pub momentum_quadratic: DVector<f64>,
    /// `G^{-1} dV`.
    pub potential: DVector<f64>,
    pub vertical_transport: DVector<f64>,
    pub vertical_quadratic: DVector<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct YmRhs {
    pub a_ddot: DVector<f64>,
    pub p_dot: DVector<f64>,
    pub terms: YmTerms,
}

/// Horizontal and vertical Yang-Mills equations in Coulomb gauge.
pub fn ym_rhs(field: &GaugeField, a_dot: &DVector<f64>, p: &DVector<f64>) -> Result<YmRhs> {
    let geo = LatticeGeometry::new(field)?;
    Ok(ym_rhs_with(&field.lattice, &geo, &field.a_field, a_dot, p))
}

pub(crate) fn ym_rhs_with(
    lat: &GaugeLattice,
    geo: &LatticeGeometry,
    a: &DVector<f64>,
    v: &DVector<f64>,
    p: &DVector<f64>,
) -> YmRhs {
    let n = &geo.n_proj;
    let christoffel_connection = christoffel_connection_term(lat, geo, v);
    let christoffel_metric = christoffel_metric_term(lat, geo, v);
    let curvature = [
        curvature_term_1(lat, geo, v, p),
        curvature_term_2(lat, geo, v, p),
        curvature_term_3(lat, geo, v, p),
        curvature_term_4(lat, geo, v, p),
        curvature_term_5(lat, geo, v, p),
        curvature_term_6(lat, geo, v, p),
    ];
    let momentum_quadratic = momentum_quadratic_term(lat, geo, p);
    let (_, grad) = potential_and_gradient(lat, a);
    let potential = apply_metric(lat, &grad, true);
    let mut covector = momentum_quadratic.clone();
    for t in &curvature {
        covector += t;
    }
    let force = apply_metric(lat, &(n.transpose() * covector), true);
    let christoffel = n * (&christoffel_connection + &christoffel_metric);
    let a_ddot = -(n * (christoffel + force + &potential));

    let u = &geo.connection * v;
    let pi = &geo.green.pinv * p;
    let vertical_transport = coadjoint_left(lat, &u, p);
    let vertical_quadratic = coadjoint_right(lat, &pi, p);
    let p_dot = &vertical_transport + &vertical_quadratic;
    YmRhs {
        a_ddot,
        p_dot,
        terms: YmTerms {
            christoffel_connection,
            christoffel_metric,
            curvature,
            momentum_quadratic,
            potential,
            vertical_transport,
            vertical_quadratic,
        },
    }
}

/// `(Pi v)^T G (Pi v) / 2 + p^T gamma^+ p / 2 + V`.
pub fn lattice_energy(field: &GaugeField, a_dot: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
    let geo = LatticeGeometry::new(field)?;
    Ok(energy_with(&field.lattice, &geo, &field.a_field, a_dot, p))
}

fn energy_with(lat: &GaugeLattice, geo: &LatticeGeometry, a: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> f64 {
    let h = &geo.pi_proj * v;
    let (pot, _) = potential_and_gradient(lat, a);
    0.5 * h.dot(&apply_metric(lat, &h, false)) + 0.5 * p.dot(&(&geo.green.pinv * p)) + pot
}

/// Reduced Yang-Mills flow for [`crate::dynamics::integrate`].
pub struct LatticeFlow {
    pub lattice: GaugeLattice,
}

impl LatticeFlow {
    fn field(&self, a: &DVector<f64>) -> GaugeField {
        GaugeField {
            lattice: self.lattice.clone(),
            a_field: a.clone(),
            coulomb_fixed: true,
        }
    }
}

impl ReducedFlow for LatticeFlow {
    fn n_p(&self) -> usize {
        self.lattice.flat_dim()
    }

    fn n_g(&self) -> usize {
        self.lattice.site_dim()
    }

    fn acceleration(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let geo = LatticeGeometry::new(&self.field(q))?;
        let r = ym_rhs_with(&self.lattice, &geo, q, v, p);
        Ok((r.a_ddot, r.p_dot))
    }

    fn restore(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let q = coulomb_project(&self.lattice, q);
        let geo = LatticeGeometry::new(&self.field(&q))?;
        let v = &geo.n_proj * v;
        Ok((q, v))
    }

    fn diagnostics(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<InvariantSample> {
        let lat = &self.lattice;
        let geo = LatticeGeometry::new(&self.field(q))?;
        let khi = lat.algebra().k_hat_inv();
        let ng = lat.n_g();
        let mut pk = 0.0;
        for x in 0..lat.n_sites() {
            let seg = p.rows(x * ng, ng);
            pk += seg.dot(&(&khi * seg));
        }
        Ok(InvariantSample {
            energy: energy_with(lat, &geo, q, v, p),
            constraint: divergence(lat, q).amax(),
            tangency: divergence(lat, v).amax(),
            connection: (&geo.connection * v).amax(),
            p_norm: p.norm(),
            p_khat_norm: pk.max(0.0).sqrt(),
        })
    }
}
