//! Reduced Wong equations on the gauge surface, a projected integrator, and
//! an unreduced oracle used to validate them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryAtPoint;
use crate::linalg::{self, Tensor3};
use crate::system::{fp_matrix, project_to_sigma, MechanicalSystem, PointOnSigma, TOL_SIGMA};

/// Tolerance on `|chi' q_dot|` for a state to count as tangent to the gauge surface.
pub const TOL_TANGENT: f64 = 1e-8;
/// Looser surface tolerance accepted at intermediate Runge-Kutta stages.
const STAGE_TOL_SIGMA: f64 = 1e-6;
const BLOW_UP: f64 = 1e12;

/// Shape velocity tangent to the gauge surface and internal momentum.
#[derive(Clone, Debug, Serialize)]
pub struct ReducedState {
    pub q: PointOnSigma,
    pub q_dot: DVector<f64>,
    pub p: DVector<f64>,
    pub t: f64,
}

impl ReducedState {
    pub fn new<S: MechanicalSystem + ?Sized>(
        sys: &S,
        q: PointOnSigma,
        q_dot: DVector<f64>,
        p: DVector<f64>,
        t: f64,
    ) -> Result<Self> {
        if q_dot.len() != sys.n_p() || p.len() != sys.n_g() {
            return Err(Error::Dimension(format!(
                "state needs {} velocities and {} momenta, got {} and {}",
                sys.n_p(),
                sys.n_g(),
                q_dot.len(),
                p.len()
            )));
        }
        let r = linalg::max_abs_vec(&(sys.constraint_jacobian(q.q()) * &q_dot));
        if r > TOL_TANGENT * (1.0 + linalg::max_abs_vec(&q_dot)) {
            return Err(Error::InvalidInput(format!(
                "velocity is not tangent to the gauge surface (|chi' q_dot| = {r:e})"
            )));
        }
        Ok(Self { q, q_dot, p, t })
    }

    /// Build a state from arbitrary data: project `q`, then `q_dot` with `N`.
    pub fn projected<S: MechanicalSystem + ?Sized>(
        sys: &S,
        q: &DVector<f64>,
        q_dot: &DVector<f64>,
        p: DVector<f64>,
        t: f64,
    ) -> Result<Self> {
        let q = project_to_sigma(sys, q)?;
        let n = n_projector(sys, q.q())?;
        Self::new(sys, q.clone(), n * q_dot, p, t)
    }
}

/// `N = 1 - K Phi^{-1} chi'`.
pub fn n_projector<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    let k = sys.killing(q)?;
    let (_, phi_inv, _) = fp_matrix(sys, q)?;
    let n = sys.n_p();
    Ok(DMatrix::identity(n, n) - k * phi_inv * sys.constraint_jacobian(q))
}

/// Separately reported pieces of the reduced right-hand side.
#[derive(Clone, Debug, Serialize)]
pub struct WongTerms {
    /// `N GH^+ Gamma1(q_dot, q_dot)`.
    pub christoffel: DVector<f64>,
    /// `G^{-1} N^T F(q_dot, .) p`.
    pub curvature: DVector<f64>,
    /// `G^{-1} N^T D gamma^{-1}(p, p) / 2`.
    pub momentum: DVector<f64>,
    /// `G^{-1} dV`.
    pub potential: DVector<f64>,
    /// `K Phi^{-1} chi''(q_dot, q_dot)`, keeps the velocity tangent to a curved gauge surface.
    pub constraint: DVector<f64>,
    /// `c^k_{ms} A^m_E p_k q_dot^E`.
    pub vertical_transport: DVector<f64>,
    /// `c^m_{sn} gamma^{nk} p_m p_k`.
    pub vertical_quadratic: DVector<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WongRhs {
    pub q_ddot: DVector<f64>,
    pub p_dot: DVector<f64>,
    pub terms: WongTerms,
}

/// `c^k_{ms} A^m_E p_k v^E`.
pub fn vertical_transport(geo: &GeometryAtPoint, alg: &crate::LieAlgebraSpec, v: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let u = &geo.a_conn * v;
    let mut out = DVector::zeros(geo.n_g());
    for &(k, m, s, c) in alg.nonzero_constants() {
        out[s] += c * u[m] * p[k];
    }
    out
}

/// `c^m_{sn} gamma^{nk} p_m p_k`.
pub fn vertical_quadratic(alg: &crate::LieAlgebraSpec, gamma_inv: &DMatrix<f64>, p: &DVector<f64>) -> DVector<f64> {
    let w = gamma_inv * p;
    let mut out = DVector::zeros(p.len());
    for &(m, s, n, c) in alg.nonzero_constants() {
        out[s] += c * p[m] * w[n];
    }
    out
}

/// The additional transport term `c^k_{mn} A^m_E gamma^{nn'} p_{n'} gamma_{sk} q_dot^E`
/// as it appears in the printed vertical equation. Kept for inspection only:
/// adding it to the momentum equation breaks agreement with the unreduced
/// dynamics, so [`wong_rhs`] does not use it.
pub fn vertical_displayed_extra(geo: &GeometryAtPoint, alg: &crate::LieAlgebraSpec, v: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let u = &geo.a_conn * v;
    let w = &geo.gamma_inv * p;
    let mut bracket = DVector::zeros(geo.n_g());
    for &(k, m, n, c) in alg.nonzero_constants() {
        bracket[k] += c * u[m] * w[n];
    }
    &geo.gamma * bracket
}

pub fn wong_rhs_from_geometry(
    geo: &GeometryAtPoint,
    alg: &crate::LieAlgebraSpec,
    grad_v: &DVector<f64>,
    chi_second: &DVector<f64>,
    v: &DVector<f64>,
    p: &DVector<f64>,
) -> WongRhs {
    let n = &geo.n_proj;
    let gi = &geo.metric_inv;
    let christoffel = n * (&geo.g_h_pinv * geo.christoffel_first_contract(v));
    let curvature = gi * (n.transpose() * geo.curvature_contract(v, p));
    let momentum = gi * (n.transpose() * geo.d_gamma_inv_contract(p)) * 0.5;
    let potential = gi * grad_v;
    let constraint = &geo.killing * (&geo.phi_inv * chi_second);
    let q_ddot = -(n * (&christoffel + &curvature + &momentum + &potential)) - &constraint;
    let vertical_transport = vertical_transport(geo, alg, v, p);
    let vertical_quadratic = vertical_quadratic(alg, &geo.gamma_inv, p);
    let p_dot = &vertical_transport + &vertical_quadratic;
    WongRhs {
        q_ddot,
        p_dot,
        terms: WongTerms {
            christoffel,
            curvature,
            momentum,
            potential,
            constraint,
            vertical_transport,
            vertical_quadratic,
        },
    }
}

/// Right-hand side of the horizontal and vertical reduced equations.
pub fn wong_rhs<S: MechanicalSystem + ?Sized>(sys: &S, state: &ReducedState) -> Result<WongRhs> {
    let geo = GeometryAtPoint::evaluate(sys, &state.q)?;
    let grad_v = sys.potential_gradient(state.q.q());
    let chi2 = sys.constraint_second(state.q.q(), &state.q_dot);
    Ok(wong_rhs_from_geometry(&geo, sys.algebra(), &grad_v, &chi2, &state.q_dot, &state.p))
}

/// `GH(v, v)/2 + gamma^{-1}(p, p)/2 + V`.
pub fn energy<S: MechanicalSystem + ?Sized>(sys: &S, state: &ReducedState) -> Result<f64> {
    energy_at(sys, state.q.q(), &state.q_dot, &state.p)
}

pub fn energy_at<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
    v: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<f64> {
    let g = sys.metric(q)?;
    let k = sys.killing(q)?;
    let gamma = k.transpose() * &g * &k;
    let (gi, cond) = linalg::checked_inverse(&gamma);
    let gi = gi.ok_or(Error::SingularFp { condition: cond })?;
    let u = &gi * (k.transpose() * (&g * v));
    let h = v - k * u;
    let kin_h = h.dot(&(&g * &h));
    let kin_v = p.dot(&(&gi * p));
    Ok(0.5 * kin_h + 0.5 * kin_v + sys.potential(q))
}

/// A system whose reduced equations can be stepped by [`integrate`].
pub trait ReducedFlow {
    fn n_p(&self) -> usize;
    fn n_g(&self) -> usize;
    fn acceleration(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)>;
    /// Restore the constraints after a step: returns the projected point and velocity.
    fn restore(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)>;
    fn diagnostics(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<InvariantSample>;
}

/// Adapter running the generic geometric pipeline for any [`MechanicalSystem`].
pub struct GenericFlow<'a, S: ?Sized> {
    pub sys: &'a S,
}

impl<'a, S: MechanicalSystem + ?Sized> GenericFlow<'a, S> {
    pub fn new(sys: &'a S) -> Self {
        Self { sys }
    }
}

impl<S: MechanicalSystem + ?Sized> ReducedFlow for GenericFlow<'_, S> {
    fn n_p(&self) -> usize {
        self.sys.n_p()
    }

    fn n_g(&self) -> usize {
        self.sys.n_g()
    }

    fn acceleration(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let point = PointOnSigma::with_tolerance(self.sys, q.clone(), STAGE_TOL_SIGMA)?;
        let geo = GeometryAtPoint::evaluate(self.sys, &point)?;
        let grad_v = self.sys.potential_gradient(q);
        let chi2 = self.sys.constraint_second(q, v);
        let r = wong_rhs_from_geometry(&geo, self.sys.algebra(), &grad_v, &chi2, v, p);
        Ok((r.q_ddot, r.p_dot))
    }

    fn restore(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let q = project_to_sigma(self.sys, q)?.into_inner();
        let v = n_projector(self.sys, &q)? * v;
        Ok((q, v))
    }

    fn diagnostics(&self, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>) -> Result<InvariantSample> {
        let sys = self.sys;
        let g = sys.metric(q)?;
        let k = sys.killing(q)?;
        let gamma = k.transpose() * &g * &k;
        let gi = gamma
            .clone()
            .try_inverse()
            .ok_or(Error::SingularFp { condition: f64::INFINITY })?;
        let a = &gi * k.transpose() * &g;
        let khi = sys.algebra().k_hat_inv();
        Ok(InvariantSample {
            energy: energy_at(sys, q, v, p)?,
            constraint: linalg::max_abs_vec(&sys.constraint(q)),
            tangency: linalg::max_abs_vec(&(sys.constraint_jacobian(q) * v)),
            connection: linalg::max_abs_vec(&(a * v)),
            p_norm: p.norm(),
            p_khat_norm: p.dot(&(khi * p)).max(0.0).sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Midpoint,
}

/// Invariants logged with each sample.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantSample {
    pub energy: f64,
    /// `max |chi|`.
    pub constraint: f64,
    /// `max |chi' q_dot|`.
    pub tangency: f64,
    /// `max |A q_dot|`, the vertical part carried by the shape velocity.
    pub connection: f64,
    pub p_norm: f64,
    /// `sqrt(p^T k_hat^{-1} p)`.
    pub p_khat_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
    pub p: DVector<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub invariants: Vec<InvariantSample>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn max_relative_energy_drift(&self) -> f64 {
        let e0 = self.invariants[0].energy;
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.invariants
            .iter()
            .map(|s| (s.energy - e0).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn max_constraint(&self) -> f64 {
        self.invariants.iter().map(|s| s.constraint).fold(0.0, f64::max)
    }
}

/// Fixed-step integration of the reduced equations with constraint
/// restoration after every full step.
pub fn integrate<F: ReducedFlow + ?Sized>(
    flow: &F,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    p0: &DVector<f64>,
    t0: f64,
    t_end: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    if t_end < t0 {
        return Err(Error::InvalidInput("t_end precedes the initial time".into()));
    }
    let steps = ((t_end - t0) / dt).round() as usize;
    let mut traj = Trajectory {
        samples: Vec::with_capacity(steps + 1),
        invariants: Vec::with_capacity(steps + 1),
    };
    let (mut q, mut v, mut p) = (q0.clone(), v0.clone(), p0.clone());
    traj.samples.push(Sample {
        t: t0,
        q: q.clone(),
        q_dot: v.clone(),
        p: p.clone(),
    });
    traj.invariants.push(flow.diagnostics(&q, &v, &p)?);
    for step in 0..steps {
        let t = t0 + step as f64 * dt;
        let fail = |e: Error| Error::StepFailure { t, reason: e.to_string() };
        let (qn, vn, pn) = match method {
            Method::Rk4 => rk4_step(flow, &q, &v, &p, dt).map_err(fail)?,
            Method::Midpoint => midpoint_step(flow, &q, &v, &p, dt).map_err(fail)?,
        };
        let (qn, vn) = flow.restore(&qn, &vn).map_err(fail)?;
        let size = qn.amax().max(vn.amax()).max(pn.amax());
        if !size.is_finite() || size > BLOW_UP {
            return Err(Error::BlowUp { t: t + dt, norm: size });
        }
        q = qn;
        v = vn;
        p = pn;
        let t_next = t0 + (step + 1) as f64 * dt;
        traj.samples.push(Sample {
            t: t_next,
            q: q.clone(),
            q_dot: v.clone(),
            p: p.clone(),
        });
        traj.invariants.push(flow.diagnostics(&q, &v, &p).map_err(fail)?);
    }
    Ok(traj)
}

type Triple = (DVector<f64>, DVector<f64>, DVector<f64>);

fn rk4_step<F: ReducedFlow + ?Sized>(flow: &F, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>, h: f64) -> Result<Triple> {
    let (a1, b1) = flow.acceleration(q, v, p)?;
    let (q2, v2, p2) = (q + v * (h / 2.0), v + &a1 * (h / 2.0), p + &b1 * (h / 2.0));
    let (a2, b2) = flow.acceleration(&q2, &v2, &p2)?;
    let (q3, v3, p3) = (q + &v2 * (h / 2.0), v + &a2 * (h / 2.0), p + &b2 * (h / 2.0));
    let (a3, b3) = flow.acceleration(&q3, &v3, &p3)?;
    let (q4, v4, p4) = (q + &v3 * h, v + &a3 * h, p + &b3 * h);
    let (a4, b4) = flow.acceleration(&q4, &v4, &p4)?;
    let qn = q + (v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
    let vn = v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
    let pn = p + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0);
    Ok((qn, vn, pn))
}

fn midpoint_step<F: ReducedFlow + ?Sized>(flow: &F, q: &DVector<f64>, v: &DVector<f64>, p: &DVector<f64>, h: f64) -> Result<Triple> {
    let (a1, b1) = flow.acceleration(q, v, p)?;
    let (qm, vm, pm) = (q + v * (h / 2.0), v + &a1 * (h / 2.0), p + &b1 * (h / 2.0));
    let (a2, b2) = flow.acceleration(&qm, &vm, &pm)?;
    Ok((q + vm * h, v + a2 * h, p + b2 * h))
}

/// Integrate the reduced equations of a mechanical system from a state.
pub fn integrate_system<S: MechanicalSystem + ?Sized>(
    sys: &S,
    state0: &ReducedState,
    t_end: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    integrate(&GenericFlow::new(sys), state0.q.q(), &state0.q_dot, &state0.p, state0.t, t_end, dt, method)
}

/// Full-space velocity with shape part `q_dot` and momentum `p`:
/// `Q_dot = q_dot + K (gamma^{-1} p - A q_dot)`.
pub fn lift_velocity<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
    q_dot: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<DVector<f64>> {
    let g = sys.metric(q)?;
    let k = sys.killing(q)?;
    let gamma = k.transpose() * &g * &k;
    let (gi, cond) = linalg::checked_inverse(&gamma);
    let gi = gi.ok_or(Error::SingularFp { condition: cond })?;
    let xi = &gi * (p - k.transpose() * (&g * q_dot));
    Ok(q_dot + k * xi)
}

/// Momentum components `p_s = K_s^T G Q_dot`.
pub fn momentum_of<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>, q_dot: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(sys.killing(q)?.transpose() * (sys.metric(q)? * q_dot))
}

/// Geodesic-plus-potential acceleration in the original coordinates.
pub fn full_acceleration<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let dg = sys.metric_derivative(q)?;
    let n = sys.n_p();
    // Gamma1_{A}(v, v) = (sum_D v^D d_D G) v - v^T (d_A G) v / 2
    let mut dv = DMatrix::zeros(n, n);
    for (d, m) in dg.iter().enumerate() {
        dv += m * v[d];
    }
    let mut c = dv * v;
    for (a, m) in dg.iter().enumerate() {
        c[a] -= 0.5 * v.dot(&(m * v));
    }
    let rhs = c + sys.potential_gradient(q);
    Ok(-(sys.metric_inverse(q)? * rhs))
}

/// Integrate the unreduced equations and map every `stride`-th sample to the
/// gauge surface.
///
/// Gauge fixing follows the orbit continuously: the group steps used to
/// project one sample are replayed before projecting the next, so that the
/// composed action is a single fixed group element per sample. Velocities are
/// pushed through that action; the shape velocity is its `N`-projection and
/// the momentum is `K^T G` applied to it.
pub fn full_space_oracle<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<(Trajectory, Trajectory)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    let stride = stride.max(1);
    let steps = (t_end / dt).round() as usize;
    let mut full = Trajectory {
        samples: Vec::new(),
        invariants: Vec::new(),
    };
    let mut fixed = Trajectory {
        samples: Vec::new(),
        invariants: Vec::new(),
    };
    let mut path: Vec<DVector<f64>> = Vec::new();
    let (mut q, mut v) = (q0.clone(), v0.clone());
    let flow = GenericFlow::new(sys);
    let khi = sys.algebra().k_hat_inv();
    for step in 0..=steps {
        let t = step as f64 * dt;
        if step % stride == 0 || step == steps {
            let p_full = momentum_of(sys, &q, &v)?;
            let e = 0.5 * v.dot(&(sys.metric(&q)? * &v)) + sys.potential(&q);
            full.samples.push(Sample {
                t,
                q: q.clone(),
                q_dot: v.clone(),
                p: p_full.clone(),
            });
            full.invariants.push(InvariantSample {
                energy: e,
                constraint: linalg::max_abs_vec(&sys.constraint(&q)),
                tangency: f64::NAN,
                connection: f64::NAN,
                p_norm: p_full.norm(),
                p_khat_norm: p_full.dot(&(&khi * &p_full)).max(0.0).sqrt(),
            });
            let (qs, vs, ps) = gauge_fix_sample(sys, &q, &v, &mut path)?;
            fixed.invariants.push(flow.diagnostics(&qs, &vs, &ps)?);
            fixed.samples.push(Sample { t, q: qs, q_dot: vs, p: ps });
        }
        if step == steps {
            break;
        }
        let acc = |x: &DVector<f64>, w: &DVector<f64>| full_acceleration(sys, x, w);
        let fail = |e: Error| Error::StepFailure { t, reason: e.to_string() };
        let a1 = acc(&q, &v).map_err(fail)?;
        let (q2, v2) = (&q + &v * (dt / 2.0), &v + &a1 * (dt / 2.0));
        let a2 = acc(&q2, &v2).map_err(fail)?;
        let (q3, v3) = (&q + &v2 * (dt / 2.0), &v + &a2 * (dt / 2.0));
        let a3 = acc(&q3, &v3).map_err(fail)?;
        let (q4, v4) = (&q + &v3 * dt, &v + &a3 * dt);
        let a4 = acc(&q4, &v4).map_err(fail)?;
        q += (&v + &v2 * 2.0 + &v3 * 2.0 + &v4) * (dt / 6.0);
        v += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0);
        let size = q.amax().max(v.amax());
        if !size.is_finite() || size > BLOW_UP {
            return Err(Error::BlowUp { t: t + dt, norm: size });
        }
    }
    Ok((full, fixed))
}

fn apply_path<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>, path: &[DVector<f64>]) -> Result<DVector<f64>> {
    let mut x = q.clone();
    for xi in path {
        x = sys.group_flow(&x, xi)?;
    }
    Ok(x)
}

fn gauge_fix_sample<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
    v: &DVector<f64>,
    path: &mut Vec<DVector<f64>>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    const MAX_ITER: usize = 50;
    let mut x = apply_path(sys, q, path)?;
    let target = 1e-14 * (1.0 + x.amax());
    for _ in 0..MAX_ITER {
        let chi = sys.constraint(&x);
        if chi.amax() <= target {
            break;
        }
        let (_, phi_inv, _) = fp_matrix(sys, &x)?;
        let xi = -(phi_inv * chi);
        let next = sys.group_flow(&x, &xi)?;
        if sys.constraint(&next).amax() >= sys.constraint(&x).amax() {
            break;
        }
        path.push(xi);
        x = next;
    }
    let res = sys.constraint(&x).amax();
    if res > TOL_SIGMA {
        return Err(Error::NoConvergence {
            iterations: MAX_ITER,
            residual: res,
        });
    }
    // push the velocity through the composed group action
    let h = 1e-3 * (1.0 + q.amax()) / (1.0 + v.amax());
    let at = |s: f64| apply_path(sys, &(q + v * (s * h)), path);
    let w = (at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h);
    let p = momentum_of(sys, &x, &w)?;
    let qd = n_projector(sys, &x)? * w;
    Ok((x, qd, p))
}

/// Relative-equilibrium style data: the reduced Christoffel tensor is exposed
/// for callers that want to inspect it.
pub fn christoffel_tensor(geo: &GeometryAtPoint) -> &Tensor3 {
    &geo.christoffel_h
}
