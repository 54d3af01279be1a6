//! Mechanical systems with a Lie-group symmetry: metric, Killing fields, gauge
//! constraints and an invariant potential over a single coordinate chart.

mod kaluza_klein;
mod two_vector;

pub use kaluza_klein::{AffineConnection, KaluzaKlein};
pub use two_vector::{InvariantPotential, TwoVectorSo3};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::LieAlgebraSpec;
use crate::linalg::{self, pinv_deflated, SINGULAR_CONDITION};

/// Sign `s` in `[K_mu, K_nu] = s c^sigma_{mu nu} K_sigma`. Every built-in
/// system is constructed to satisfy it, and the curvature formula is only
/// consistent with this choice.
pub const BRACKET_SIGN: f64 = 1.0;

pub const TOL_SIGMA: f64 = 1e-10;
pub const TOL_KILLING: f64 = 1e-7;
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// How chart derivatives of the fields are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference { step: f64 },
}

/// A finite-dimensional system with symmetry.
///
/// Derivative methods default to fourth-order central differences; systems
/// override them with closed forms where available.
pub trait MechanicalSystem: Sync {
    fn name(&self) -> &str;

    fn n_p(&self) -> usize;

    fn algebra(&self) -> &LieAlgebraSpec;

    fn n_g(&self) -> usize {
        self.algebra().dim()
    }

    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Killing fields as columns, `n_p x n_g`.
    fn killing(&self, q: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64>;

    fn potential(&self, q: &DVector<f64>) -> f64;

    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifference { step: DEFAULT_FD_STEP }
    }

    fn fd_step(&self) -> f64 {
        match self.derivative_mode() {
            DerivativeMode::FiniteDifference { step } => step,
            DerivativeMode::Analytic => DEFAULT_FD_STEP,
        }
    }

    /// Number of constraint directions that are structurally redundant, so
    /// that the Faddeev-Popov matrix has exactly this many zero modes.
    fn constraint_redundancy(&self) -> usize {
        0
    }

    fn metric_inverse(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        let g = self.metric(q)?;
        let (inv, cond) = linalg::checked_inverse(&g);
        inv.ok_or(Error::IllConditioned {
            what: "metric".into(),
            condition: cond,
        })
    }

    /// Constraint Jacobian `d chi^a / dQ^A`, `n_g x n_p`.
    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        fd_jacobian_of(|x| self.constraint(x), q, self.fd_step())
    }

    /// Second derivative of the constraint contracted twice with `v`.
    fn constraint_second(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let h = self.fd_step();
        let f = |x: &DVector<f64>| self.constraint_jacobian(x) * v;
        linalg::fd_vector_along(&f, q, v, h)
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let h = self.fd_step();
        DVector::from_fn(self.n_p(), |i, _| {
            let at = |s: f64| {
                let mut x = q.clone();
                x[i] += s * h;
                self.potential(&x)
            };
            (at(-2.0) - at(2.0) + 8.0 * (at(1.0) - at(-1.0))) / (12.0 * h)
        })
    }

    /// Chart derivatives `d G / dQ^E`, one matrix per `E`.
    fn metric_derivative(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        fd_matrix_field(|x| self.metric(x), q, self.fd_step())
    }

    /// Chart derivatives `d K / dQ^E`, one matrix per `E`.
    fn killing_derivative(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        fd_matrix_field(|x| self.killing(x), q, self.fd_step())
    }

    /// A point on the orbit of `q` near the gauge surface, used to restart the
    /// projection when Newton from `q` itself fails. Defaults to `q`.
    fn gauge_guess(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(q.clone())
    }

    /// Move `q` along the group orbit by the flow of `K xi` for unit time.
    fn group_flow(&self, q: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        const SUBSTEPS: usize = 8;
        let h = 1.0 / SUBSTEPS as f64;
        let f = |x: &DVector<f64>| -> Result<DVector<f64>> { Ok(self.killing(x)? * xi) };
        let mut x = q.clone();
        for _ in 0..SUBSTEPS {
            let k1 = f(&x)?;
            let k2 = f(&(&x + &k1 * (h / 2.0)))?;
            let k3 = f(&(&x + &k2 * (h / 2.0)))?;
            let k4 = f(&(&x + &k3 * h))?;
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        Ok(x)
    }
}

impl<S: MechanicalSystem + ?Sized> MechanicalSystem for &S {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn n_p(&self) -> usize {
        (**self).n_p()
    }
    fn algebra(&self) -> &LieAlgebraSpec {
        (**self).algebra()
    }
    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).metric(q)
    }
    fn killing(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).killing(q)
    }
    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        (**self).constraint(q)
    }
    fn potential(&self, q: &DVector<f64>) -> f64 {
        (**self).potential(q)
    }
    fn derivative_mode(&self) -> DerivativeMode {
        (**self).derivative_mode()
    }
    fn constraint_redundancy(&self) -> usize {
        (**self).constraint_redundancy()
    }
    fn metric_inverse(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        (**self).metric_inverse(q)
    }
    fn constraint_jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (**self).constraint_jacobian(q)
    }
    fn constraint_second(&self, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).constraint_second(q, v)
    }
    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        (**self).potential_gradient(q)
    }
    fn metric_derivative(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        (**self).metric_derivative(q)
    }
    fn killing_derivative(&self, q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        (**self).killing_derivative(q)
    }
    fn gauge_guess(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).gauge_guess(q)
    }
    fn group_flow(&self, q: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        (**self).group_flow(q, xi)
    }
}

/// Wraps a system so that every derivative is taken by finite differences,
/// ignoring any closed forms the inner system provides.
pub struct FiniteDifferenced<S> {
    pub inner: S,
    pub step: f64,
}

impl<S: MechanicalSystem> FiniteDifferenced<S> {
    pub fn new(inner: S) -> Self {
        Self {
            inner,
            step: DEFAULT_FD_STEP,
        }
    }
}

impl<S: MechanicalSystem> MechanicalSystem for FiniteDifferenced<S> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn n_p(&self) -> usize {
        self.inner.n_p()
    }
    fn algebra(&self) -> &LieAlgebraSpec {
        self.inner.algebra()
    }
    fn metric(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.inner.metric(q)
    }
    fn killing(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.inner.killing(q)
    }
    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        self.inner.constraint(q)
    }
    fn potential(&self, q: &DVector<f64>) -> f64 {
        self.inner.potential(q)
    }
    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::FiniteDifference { step: self.step }
    }
    fn constraint_redundancy(&self) -> usize {
        self.inner.constraint_redundancy()
    }
    fn gauge_guess(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner.gauge_guess(q)
    }
    fn group_flow(&self, q: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner.group_flow(q, xi)
    }
}

fn fd_jacobian_of<F>(f: F, q: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let cols: Vec<DVector<f64>> = (0..q.len()).map(|e| linalg::fd_vector(&f, q, e, h)).collect();
    if cols.is_empty() {
        return DMatrix::zeros(f(q).len(), 0);
    }
    DMatrix::from_columns(&cols)
}

fn fd_matrix_field<F>(f: F, q: &DVector<f64>, h: f64) -> Result<Vec<DMatrix<f64>>>
where
    F: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    (0..q.len())
        .map(|e| {
            let at = |s: f64| {
                let mut x = q.clone();
                x[e] += s * h;
                f(&x)
            };
            Ok((at(-2.0)? - at(2.0)? + (at(1.0)? - at(-1.0)?) * 8.0) / (12.0 * h))
        })
        .collect()
}

/// A configuration on the gauge surface `chi = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointOnSigma {
    q: DVector<f64>,
}

impl PointOnSigma {
    pub fn new<S: MechanicalSystem + ?Sized>(sys: &S, q: DVector<f64>) -> Result<Self> {
        Self::with_tolerance(sys, q, TOL_SIGMA)
    }

    pub fn with_tolerance<S: MechanicalSystem + ?Sized>(sys: &S, q: DVector<f64>, tol: f64) -> Result<Self> {
        if q.len() != sys.n_p() {
            return Err(Error::Dimension(format!("point has {} coordinates, system needs {}", q.len(), sys.n_p())));
        }
        let r = linalg::max_abs_vec(&sys.constraint(&q));
        if !(r < tol) {
            return Err(Error::NotOnSigma { residual: r });
        }
        Ok(Self { q })
    }

    /// Wrap without checking; for callers that just projected.
    pub(crate) fn trusted(q: DVector<f64>) -> Self {
        Self { q }
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.q
    }
}

/// Faddeev-Popov matrix `Phi^b_mu = dchi^b/dQ^A K^A_mu` and its (possibly
/// deflated) inverse with the condition number of the retained part.
pub fn fp_matrix<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, f64)> {
    let k = sys.killing(q)?;
    let phi = sys.constraint_jacobian(q) * &k;
    let (inv, cond) = fp_inverse(&phi, sys.constraint_redundancy())?;
    Ok((phi, inv, cond))
}

pub(crate) fn fp_inverse(phi: &DMatrix<f64>, redundancy: usize) -> Result<(DMatrix<f64>, f64)> {
    if redundancy == 0 {
        let (inv, cond) = linalg::checked_inverse(phi);
        return inv.map(|m| (m, cond)).ok_or(Error::SingularFp { condition: cond });
    }
    let (inv, cond) = pinv_deflated(phi, redundancy);
    if !cond.is_finite() || cond > SINGULAR_CONDITION {
        return Err(Error::SingularFp { condition: cond });
    }
    Ok((inv, cond))
}

/// Newton iteration along the group orbit onto `chi = 0`. If Newton from
/// `q` stalls, it is restarted from the system's orbit-preserving guess.
pub fn project_to_sigma<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<PointOnSigma> {
    fp_matrix(sys, q)?;
    match newton_on_orbit(sys, q) {
        Ok(p) => Ok(p),
        Err(first) => {
            let guess = sys.gauge_guess(q)?;
            if &guess == q {
                return Err(first);
            }
            newton_on_orbit(sys, &guess).map_err(|_| first)
        }
    }
}

/// Largest orbit step taken per Newton iteration (max-norm of the algebra element).
const MAX_ORBIT_STEP: f64 = 0.5;

fn newton_on_orbit<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<PointOnSigma> {
    const MAX_ITER: usize = 60;
    let scale = 1.0 + linalg::max_abs_vec(q);
    let target = 1e-14 * scale;
    let mut x = q.clone();
    let mut res = linalg::max_abs_vec(&sys.constraint(&x));
    if res <= target {
        fp_matrix(sys, &x)?;
        return Ok(PointOnSigma::trusted(x));
    }
    for _ in 0..MAX_ITER {
        let chi = sys.constraint(&x);
        let (_, phi_inv, _) = fp_matrix(sys, &x)?;
        let mut xi = -(phi_inv * chi);
        let big = linalg::max_abs_vec(&xi);
        if big > MAX_ORBIT_STEP {
            xi *= MAX_ORBIT_STEP / big;
        }
        let next = sys.group_flow(&x, &xi)?;
        let next_res = linalg::max_abs_vec(&sys.constraint(&next));
        if !next_res.is_finite() {
            break;
        }
        if next_res >= res && res < TOL_SIGMA {
            break;
        }
        x = next;
        res = next_res;
        if res <= target {
            break;
        }
    }
    if res < TOL_SIGMA {
        fp_matrix(sys, &x)?;
        Ok(PointOnSigma::trusted(x))
    } else {
        Err(Error::NoConvergence {
            iterations: MAX_ITER,
            residual: res,
        })
    }
}

/// Max entry of the Lie derivative of `G` along every Killing field.
pub fn killing_residual<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<f64> {
    let g = sys.metric(q)?;
    let k = sys.killing(q)?;
    let dg = sys.metric_derivative(q)?;
    let dk = sys.killing_derivative(q)?;
    let n = sys.n_p();
    let mut worst = 0.0_f64;
    for mu in 0..sys.n_g() {
        // (L_K G)_AB = K^C dG_AB/dQ^C + G_CB dK^C/dQ^A + G_AC dK^C/dQ^B
        let mut lie = DMatrix::zeros(n, n);
        for (c, dgc) in dg.iter().enumerate() {
            lie += dgc * k[(c, mu)];
        }
        let grad_k = DMatrix::from_fn(n, n, |c, a| dk[a][(c, mu)]);
        lie += grad_k.transpose() * &g + &g * grad_k;
        worst = worst.max(linalg::max_abs(&lie));
    }
    Ok(worst)
}

/// Max residual of `[K_mu, K_nu] - BRACKET_SIGN c^s_{mu nu} K_s`.
pub fn equivariance_residual<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<f64> {
    let k = sys.killing(q)?;
    let dk = sys.killing_derivative(q)?;
    let alg = sys.algebra();
    let ng = sys.n_g();
    let n = sys.n_p();
    let mut worst = 0.0_f64;
    for mu in 0..ng {
        for nu in 0..ng {
            for a in 0..n {
                let mut br = 0.0;
                for (b, dkb) in dk.iter().enumerate() {
                    br += k[(b, mu)] * dkb[(a, nu)] - k[(b, nu)] * dkb[(a, mu)];
                }
                let mut rhs = 0.0;
                for s in 0..ng {
                    rhs += alg.c(s, mu, nu) * k[(a, s)];
                }
                worst = worst.max((br - BRACKET_SIGN * rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Max of `|K^A_mu dV/dQ^A|`.
pub fn invariance_residual<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<f64> {
    let k = sys.killing(q)?;
    Ok(linalg::max_abs_vec(&(k.transpose() * sys.potential_gradient(q))))
}

/// Smallest eigenvalue of the metric.
pub fn metric_min_eigenvalue<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<f64> {
    let (vals, _) = linalg::sorted_symmetric_eigen(&sys.metric(q)?);
    Ok(vals[0])
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemCheck {
    pub metric_asymmetry: f64,
    pub metric_min_eigenvalue: f64,
    pub killing: f64,
    pub equivariance: f64,
    pub invariance: f64,
}

impl SystemCheck {
    pub fn passes(&self, tol_killing: f64) -> bool {
        self.metric_asymmetry < 1e-12
            && self.metric_min_eigenvalue > 0.0
            && self.killing < tol_killing
            && self.equivariance < tol_killing
            && self.invariance < tol_killing
    }
}

pub fn check_system<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<SystemCheck> {
    let g = sys.metric(q)?;
    Ok(SystemCheck {
        metric_asymmetry: linalg::max_abs(&(&g - g.transpose())),
        metric_min_eigenvalue: metric_min_eigenvalue(sys, q)?,
        killing: killing_residual(sys, q)?,
        equivariance: equivariance_residual(sys, q)?,
        invariance: invariance_residual(sys, q)?,
    })
}
