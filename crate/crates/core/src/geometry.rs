//! Pointwise bundle geometry on the gauge surface.
//!
//! Shapes: `K` is `n_p x n_g` (Killing fields as columns), the constraint
//! Jacobian is `n_g x n_p`, the Faddeev-Popov matrix `Phi = chi' K` is
//! `n_g x n_g`, the connection is `n_g x n_p`. Rank-3 arrays are indexed
//! `F[alpha][E][P]`, `D_gamma[E][alpha][beta]`, `christoffel[A][C][D]`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::LieAlgebraSpec;
use crate::linalg::{self, pinv_deflated, pinv_symmetric, Tensor3, SINGULAR_CONDITION};
use crate::system::{fp_matrix, MechanicalSystem, PointOnSigma};

/// Relative cut for the horizontal-metric pseudo-inverse.
pub const GH_PINV_TOL: f64 = 1e-10;

/// Every geometric object evaluated at one point of the gauge surface.
#[derive(Clone, Debug, Serialize)]
pub struct GeometryAtPoint {
    pub q: PointOnSigma,
    pub metric: DMatrix<f64>,
    pub metric_inv: DMatrix<f64>,
    pub killing: DMatrix<f64>,
    pub constraint_jacobian: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub phi_inv: DMatrix<f64>,
    pub phi_condition: f64,
    pub p_perp: DMatrix<f64>,
    pub n_proj: DMatrix<f64>,
    pub pi_proj: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma_inv: DMatrix<f64>,
    pub gamma_condition: f64,
    pub a_conn: DMatrix<f64>,
    pub f_curv: Tensor3,
    pub g_h: DMatrix<f64>,
    pub g_h_pinv: DMatrix<f64>,
    pub g_h_rank: usize,
    /// Lowered first-kind symbols of the horizontal metric, `[A][C][D]`.
    #[serde(skip)]
    pub christoffel_first: Tensor3,
    pub christoffel_h: Tensor3,
    pub d_gamma: Tensor3,
    pub d_gamma_inv: Tensor3,
    #[serde(skip)]
    pub d_a_conn: Vec<DMatrix<f64>>,
    #[serde(skip)]
    pub d_g_h: Vec<DMatrix<f64>>,
}

/// Chart derivatives of the orbit metric, connection and horizontal projector.
struct Derivatives {
    gamma: Vec<DMatrix<f64>>,
    a_conn: Vec<DMatrix<f64>>,
    g_h: Vec<DMatrix<f64>>,
}

fn chain_rule(
    g: &DMatrix<f64>,
    k: &DMatrix<f64>,
    gamma_inv: &DMatrix<f64>,
    a_conn: &DMatrix<f64>,
    pi: &DMatrix<f64>,
    dg: &[DMatrix<f64>],
    dk: &[DMatrix<f64>],
) -> Derivatives {
    let n = dg.len();
    let kt_g = k.transpose() * g;
    let g_pi = g * pi;
    let mut out = Derivatives {
        gamma: Vec::with_capacity(n),
        a_conn: Vec::with_capacity(n),
        g_h: Vec::with_capacity(n),
    };
    for e in 0..n {
        let dkt_g = dk[e].transpose() * g;
        let kt_dg = k.transpose() * &dg[e];
        let d_kt_g = &dkt_g + &kt_dg;
        let d_gamma = &d_kt_g * k + &kt_g * &dk[e];
        let d_a = gamma_inv * (d_kt_g - &d_gamma * a_conn);
        let d_pi = -(&dk[e] * a_conn) - k * &d_a;
        let t = d_pi.transpose() * &g_pi;
        let d_gh = &t + t.transpose() + pi.transpose() * &dg[e] * pi;
        out.gamma.push(d_gamma);
        out.a_conn.push(d_a);
        out.g_h.push(d_gh);
    }
    out
}

/// `ad(A_E)` with `(ad x)^s_a = c^s_{ma} x^m`.
fn ad_of_column(alg: &LieAlgebraSpec, a_conn: &DMatrix<f64>, e: usize) -> DMatrix<f64> {
    alg.ad(&a_conn.column(e).into_owned())
}

/// Covariant derivative of the orbit metric and of its inverse.
pub fn covariant_from_parts(
    alg: &LieAlgebraSpec,
    gamma: &DMatrix<f64>,
    gamma_inv: &DMatrix<f64>,
    a_conn: &DMatrix<f64>,
    d_gamma: &[DMatrix<f64>],
) -> (Tensor3, Tensor3) {
    let n = d_gamma.len();
    let mut dg = Vec::with_capacity(n);
    let mut dgi = Vec::with_capacity(n);
    for (e, dge) in d_gamma.iter().enumerate() {
        let t = ad_of_column(alg, a_conn, e);
        // D_E gamma_{ab} = d_E gamma_{ab} - c^s_{ma} A^m_E gamma_{sb} - c^s_{mb} A^m_E gamma_{sa}
        let tg = t.transpose() * gamma;
        let cov = dge - &tg - tg.transpose();
        dgi.push(-(gamma_inv * &cov * gamma_inv));
        dg.push(cov);
    }
    (Tensor3::from_slices(&dg), Tensor3::from_slices(&dgi))
}

/// Curvature `F^a_{EP} = d_E A^a_P - d_P A^a_E + c^a_{ns} A^n_E A^s_P`.
pub fn curvature_from_parts(alg: &LieAlgebraSpec, a_conn: &DMatrix<f64>, d_a: &[DMatrix<f64>]) -> Tensor3 {
    let ng = a_conn.nrows();
    let n = a_conn.ncols();
    let mut f = Tensor3::zeros(ng, n, n);
    for al in 0..ng {
        for e in 0..n {
            for p in 0..n {
                f.set(al, e, p, d_a[e][(al, p)] - d_a[p][(al, e)]);
            }
        }
    }
    for &(al, nu, si, c) in alg.nonzero_constants() {
        for e in 0..n {
            let ae = a_conn[(nu, e)];
            if ae == 0.0 {
                continue;
            }
            for p in 0..n {
                f.add(al, e, p, c * ae * a_conn[(si, p)]);
            }
        }
    }
    f
}

/// `Gamma1_{ACD} = (d_D GH_{AC} + d_C GH_{AD} - d_A GH_{CD}) / 2`.
fn christoffel_first_kind(d_gh: &[DMatrix<f64>]) -> Tensor3 {
    let n = d_gh.len();
    Tensor3::from_fn(n, n, n, |a, c, d| 0.5 * (d_gh[d][(a, c)] + d_gh[c][(a, d)] - d_gh[a][(c, d)]))
}

/// Orbit metric `gamma = K^T G K` and its inverse, without the rest of the geometry.
pub fn orbit_metric<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let k = sys.killing(q)?;
    let gamma = k.transpose() * sys.metric(q)? * &k;
    let (inv, cond) = linalg::checked_inverse(&gamma);
    let inv = inv.ok_or(Error::SingularFp { condition: cond })?;
    Ok((gamma, inv, cond))
}

/// Projector onto the kernel of the constraint Jacobian along `G^{-1} chi'^T`.
fn p_perp(metric_inv: &DMatrix<f64>, cj: &DMatrix<f64>, redundancy: usize) -> Result<DMatrix<f64>> {
    let n = metric_inv.nrows();
    let x = metric_inv * cj.transpose();
    let s = cj * &x;
    let s_inv = if redundancy == 0 {
        let (inv, cond) = linalg::checked_inverse(&s);
        inv.ok_or(Error::IllConditioned {
            what: "constraint Gram matrix".into(),
            condition: cond,
        })?
    } else {
        pinv_deflated(&s, redundancy).0
    };
    Ok(DMatrix::identity(n, n) - x * s_inv * cj)
}

impl GeometryAtPoint {
    pub fn evaluate<S: MechanicalSystem + ?Sized>(sys: &S, q: &PointOnSigma) -> Result<Self> {
        let x = q.q();
        let n = sys.n_p();
        let alg = sys.algebra();
        let g = sys.metric(x)?;
        let g_inv = sys.metric_inverse(x)?;
        let k = sys.killing(x)?;
        let cj = sys.constraint_jacobian(x);
        let (phi, phi_inv, phi_condition) = fp_matrix(sys, x)?;
        if phi_condition > SINGULAR_CONDITION {
            return Err(Error::SingularFp { condition: phi_condition });
        }
        let gamma = k.transpose() * &g * &k;
        let (gi, gamma_condition) = linalg::checked_inverse(&gamma);
        let gamma_inv = gi.ok_or(Error::SingularFp { condition: gamma_condition })?;
        let a_conn = &gamma_inv * k.transpose() * &g;
        let id = DMatrix::identity(n, n);
        let pi_proj = &id - &k * &a_conn;
        let n_proj = &id - &k * &phi_inv * &cj;
        let p_perp = p_perp(&g_inv, &cj, sys.constraint_redundancy())?;
        let g_h = pi_proj.transpose() * &g * &pi_proj;
        let (g_h_pinv, g_h_rank) = pinv_symmetric(&g_h, GH_PINV_TOL);

        let dg = sys.metric_derivative(x)?;
        let dk = sys.killing_derivative(x)?;
        let der = chain_rule(&g, &k, &gamma_inv, &a_conn, &pi_proj, &dg, &dk);
        let f_curv = curvature_from_parts(alg, &a_conn, &der.a_conn);
        let (d_gamma, d_gamma_inv) = covariant_from_parts(alg, &gamma, &gamma_inv, &a_conn, &der.gamma);
        let christoffel_first = christoffel_first_kind(&der.g_h);
        let raise = &n_proj * &g_h_pinv;
        let mut christoffel_h = Tensor3::zeros(n, n, n);
        for c in 0..n {
            for d in c..n {
                let col = DVector::from_fn(n, |a, _| christoffel_first.get(a, c, d));
                let up = &raise * col;
                for a in 0..n {
                    christoffel_h.set(a, c, d, up[a]);
                    christoffel_h.set(a, d, c, up[a]);
                }
            }
        }
        Ok(Self {
            q: q.clone(),
            metric: g,
            metric_inv: g_inv,
            killing: k,
            constraint_jacobian: cj,
            phi,
            phi_inv,
            phi_condition,
            p_perp,
            n_proj,
            pi_proj,
            gamma,
            gamma_inv,
            gamma_condition,
            a_conn,
            f_curv,
            g_h,
            g_h_pinv,
            g_h_rank,
            christoffel_first,
            christoffel_h,
            d_gamma,
            d_gamma_inv,
            d_a_conn: der.a_conn,
            d_g_h: der.g_h,
        })
    }

    pub fn n_p(&self) -> usize {
        self.metric.nrows()
    }

    pub fn n_g(&self) -> usize {
        self.gamma.nrows()
    }

    /// `Gamma1_{ACD} v^C v^D`.
    pub fn christoffel_first_contract(&self, v: &DVector<f64>) -> DVector<f64> {
        self.christoffel_first.contract_last_two(v, v)
    }

    /// `F^n_{EF} v^E p_n`, a covector in `F`.
    pub fn curvature_contract(&self, v: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let n = self.n_p();
        DVector::from_fn(n, |f, _| {
            let mut s = 0.0;
            for nu in 0..self.n_g() {
                if p[nu] == 0.0 {
                    continue;
                }
                for e in 0..n {
                    s += self.f_curv.get(nu, e, f) * v[e] * p[nu];
                }
            }
            s
        })
    }

    /// `D_E gamma^{ks} p_s p_k`, a covector in `E`.
    pub fn d_gamma_inv_contract(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n_p(), |e, _| {
            let m = self.d_gamma_inv.slice(e);
            (p.transpose() * m * p)[(0, 0)]
        })
    }

    /// The four blocks of the inverse of the adapted metric:
    /// `[[N G^-1 N^T, N G^-1 chi'^T Phi^-T], [Phi^-1 chi' G^-1 N^T, Phi^-1 chi' G^-1 chi'^T Phi^-T]]`.
    pub fn pseudoinverse_blocks(&self) -> PseudoinverseBlocks {
        let gi = &self.metric_inv;
        let n = &self.n_proj;
        let cj = &self.constraint_jacobian;
        let pi = &self.phi_inv;
        let upper_left = n * gi * n.transpose();
        let upper_right = n * gi * cj.transpose() * pi.transpose();
        let lower_left = upper_right.transpose();
        let lower_right = pi * cj * gi * cj.transpose() * pi.transpose();
        let pp = &self.p_perp;
        let g = &self.metric;
        let k = &self.killing;
        let m_ul = pp.transpose() * g * pp;
        let m_ur = pp.transpose() * g * k;
        let m_ll = m_ur.transpose();
        let m_lr = self.gamma.clone();
        let np = self.n_p();
        let ng = self.n_g();
        let stack = |a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>| {
            let mut m = DMatrix::zeros(np + ng, np + ng);
            m.view_mut((0, 0), (np, np)).copy_from(a);
            m.view_mut((0, np), (np, ng)).copy_from(b);
            m.view_mut((np, 0), (ng, np)).copy_from(c);
            m.view_mut((np, np), (ng, ng)).copy_from(d);
            m
        };
        let inverse = stack(&upper_left, &upper_right, &lower_left, &lower_right);
        let metric = stack(&m_ul, &m_ur, &m_ll, &m_lr);
        let target = stack(pp, &DMatrix::zeros(np, ng), &DMatrix::zeros(ng, np), &DMatrix::identity(ng, ng));
        let orthogonality_residual = linalg::max_abs(&(&inverse * &metric - target));
        PseudoinverseBlocks {
            upper_left,
            upper_right,
            lower_left,
            lower_right,
            orthogonality_residual,
        }
    }

    /// Residuals of every pointwise identity.
    pub fn identity_residuals(&self) -> IdentityResiduals {
        let n = &self.n_proj;
        let pp = &self.p_perp;
        let pi = &self.pi_proj;
        let k = &self.killing;
        let np = self.n_p();
        let mut f_antisym = 0.0_f64;
        for al in 0..self.n_g() {
            for e in 0..np {
                for p in 0..np {
                    f_antisym = f_antisym.max((self.f_curv.get(al, e, p) + self.f_curv.get(al, p, e)).abs());
                }
            }
        }
        let mut gamma_pd = linalg::sorted_symmetric_eigen(&self.gamma).0[0];
        if !gamma_pd.is_finite() {
            gamma_pd = f64::NAN;
        }
        IdentityResiduals {
            n_idempotent: linalg::max_abs(&(n * n - n)),
            n_kills_killing: linalg::max_abs(&(n * k)),
            n_then_p_perp: linalg::max_abs(&(n * pp - pp)),
            p_perp_then_n: linalg::max_abs(&(pp * n - n)),
            pi_n: linalg::max_abs(&(pi * n - pi)),
            n_pi: linalg::max_abs(&(n * pi - n)),
            connection_on_horizontal: linalg::max_abs(&(&self.a_conn * pi)),
            connection_on_killing: linalg::max_abs(&(&self.a_conn * k - DMatrix::identity(self.n_g(), self.n_g()))),
            gamma_asymmetry: linalg::max_abs(&(&self.gamma - self.gamma.transpose())),
            gamma_min_eigenvalue: gamma_pd,
            curvature_antisymmetry: f_antisym,
            g_h_definition: linalg::max_abs(&(&self.g_h - pi.transpose() * &self.metric * pi)),
            g_h_kills_killing: linalg::max_abs(&(&self.g_h * k)),
            g_h_rank_deficit: (np as i64 - self.n_g() as i64 - self.g_h_rank as i64).unsigned_abs() as usize,
            orthogonality: self.pseudoinverse_blocks().orthogonality_residual,
            dual_basis: self.dual_basis_residual(),
        }
    }

    /// Horizontal frame `H_A = Pi N e_A`, vertical frame `L_b = K_b`, dual
    /// forms `omega^A = N dQ`, `omega^a = A dQ`; returns the worst deviation
    /// from `omega^A(H_B) = N`, `omega^a(L_b) = delta`, `omega^a(H_A) = 0`,
    /// `omega^A(L_b) = 0`.
    pub fn dual_basis_residual(&self) -> f64 {
        let h = &self.pi_proj * &self.n_proj;
        let l = &self.killing;
        let ng = self.n_g();
        [
            linalg::max_abs(&(&self.n_proj * &h - &self.n_proj)),
            linalg::max_abs(&(&self.a_conn * l - DMatrix::identity(ng, ng))),
            linalg::max_abs(&(&self.a_conn * &h)),
            linalg::max_abs(&(&self.n_proj * l)),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Blocks of the inverse adapted metric and the orthogonality check against
/// the metric blocks `[[P^T G P, P^T G K], [K^T G P, gamma]]`.
#[derive(Clone, Debug, Serialize)]
pub struct PseudoinverseBlocks {
    pub upper_left: DMatrix<f64>,
    pub upper_right: DMatrix<f64>,
    pub lower_left: DMatrix<f64>,
    pub lower_right: DMatrix<f64>,
    pub orthogonality_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityResiduals {
    pub n_idempotent: f64,
    pub n_kills_killing: f64,
    pub n_then_p_perp: f64,
    pub p_perp_then_n: f64,
    pub pi_n: f64,
    pub n_pi: f64,
    pub connection_on_horizontal: f64,
    pub connection_on_killing: f64,
    pub gamma_asymmetry: f64,
    pub gamma_min_eigenvalue: f64,
    pub curvature_antisymmetry: f64,
    pub g_h_definition: f64,
    pub g_h_kills_killing: f64,
    pub g_h_rank_deficit: usize,
    pub orthogonality: f64,
    pub dual_basis: f64,
}

impl IdentityResiduals {
    /// Largest projector/identity residual (the rank and eigenvalue entries are excluded).
    pub fn max_residual(&self) -> f64 {
        [
            self.n_idempotent,
            self.n_kills_killing,
            self.n_then_p_perp,
            self.p_perp_then_n,
            self.pi_n,
            self.n_pi,
            self.connection_on_horizontal,
            self.connection_on_killing,
            self.gamma_asymmetry,
            self.curvature_antisymmetry,
            self.g_h_definition,
            self.g_h_kills_killing,
            self.orthogonality,
            self.dual_basis,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n_idempotent", self.n_idempotent),
            ("n_kills_killing", self.n_kills_killing),
            ("n_then_p_perp", self.n_then_p_perp),
            ("p_perp_then_n", self.p_perp_then_n),
            ("pi_n", self.pi_n),
            ("n_pi", self.n_pi),
            ("connection_on_horizontal", self.connection_on_horizontal),
            ("connection_on_killing", self.connection_on_killing),
            ("gamma_asymmetry", self.gamma_asymmetry),
            ("curvature_antisymmetry", self.curvature_antisymmetry),
            ("g_h_definition", self.g_h_definition),
            ("g_h_kills_killing", self.g_h_kills_killing),
            ("orthogonality", self.orthogonality),
            ("dual_basis", self.dual_basis),
        ]
    }
}

pub fn evaluate_geometry<S: MechanicalSystem + ?Sized>(sys: &S, q: &PointOnSigma) -> Result<GeometryAtPoint> {
    GeometryAtPoint::evaluate(sys, q)
}

/// Curvature of the mechanical connection at any chart point.
pub fn curvature<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<Tensor3> {
    let g = sys.metric(q)?;
    let k = sys.killing(q)?;
    let (_, gamma_inv, _) = orbit_metric(sys, q)?;
    let a_conn = &gamma_inv * k.transpose() * &g;
    let n = sys.n_p();
    let pi = DMatrix::identity(n, n) - &k * &a_conn;
    let der = chain_rule(&g, &k, &gamma_inv, &a_conn, &pi, &sys.metric_derivative(q)?, &sys.killing_derivative(q)?);
    Ok(curvature_from_parts(sys.algebra(), &a_conn, &der.a_conn))
}

/// Mechanical connection `gamma^{-1} K^T G` at any chart point.
pub fn mechanical_connection<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (_, gamma_inv, _) = orbit_metric(sys, q)?;
    Ok(gamma_inv * sys.killing(q)?.transpose() * sys.metric(q)?)
}

pub fn christoffel_horizontal<S: MechanicalSystem + ?Sized>(sys: &S, q: &PointOnSigma) -> Result<Tensor3> {
    Ok(GeometryAtPoint::evaluate(sys, q)?.christoffel_h)
}

pub fn covariant_derivative_gamma<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &PointOnSigma,
) -> Result<(Tensor3, Tensor3)> {
    let geo = GeometryAtPoint::evaluate(sys, q)?;
    Ok((geo.d_gamma, geo.d_gamma_inv))
}

pub fn pseudoinverse_blocks<S: MechanicalSystem + ?Sized>(sys: &S, q: &PointOnSigma) -> Result<PseudoinverseBlocks> {
    Ok(GeometryAtPoint::evaluate(sys, q)?.pseudoinverse_blocks())
}

/// Largest entry of `D_E(gamma gamma^{-1})` computed with the product rule.
pub fn derivation_residual(geo: &GeometryAtPoint) -> f64 {
    let mut worst = 0.0_f64;
    for e in 0..geo.n_p() {
        let m = geo.d_gamma.slice(e) * &geo.gamma_inv + &geo.gamma * geo.d_gamma_inv.slice(e);
        worst = worst.max(linalg::max_abs(&m));
    }
    worst
}
