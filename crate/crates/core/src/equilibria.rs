//! Relative equilibria: shapes that stay frozen while the system drifts along
//! the group orbit with an internal momentum taken from the eigenvectors of
//! `k gamma^{-1}`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, Method, ReducedState};
use crate::error::{Error, Result};
use crate::geometry::{orbit_metric, GeometryAtPoint};
use crate::lie::LieAlgebraSpec;
use crate::lm;
pub use crate::lm::SolverOptions;
use crate::linalg::{canonical_sign, sorted_symmetric_eigen, spd_sqrt_pair};
use crate::system::{MechanicalSystem, PointOnSigma};

/// Overlap below which the tracked eigenspace is considered lost.
pub const MIN_OVERLAP: f64 = 0.5;
const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Normalized to `e^T k_hat^{-1} e = 1`.
    pub vector: DVector<f64>,
}

/// Eigenpairs of `k gamma^{-1}` sorted by ascending eigenvalue.
pub fn momentum_eigenproblem<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>) -> Result<Vec<EigenPair>> {
    let (_, gamma_inv, _) = orbit_metric(sys, q)?;
    Ok(eigenpairs(sys.algebra(), &gamma_inv))
}

/// Eigenpairs of `k gamma^{-1}` for a given `gamma^{-1}`.
///
/// With `k = -s k_hat`, the problem is similar to the symmetric matrix
/// `k_hat^{1/2} gamma^{-1} k_hat^{1/2}`: an eigenpair `(mu, v)` of it gives
/// `lambda = -s mu` and `e = k_hat^{1/2} v`.
pub fn eigenpairs(alg: &LieAlgebraSpec, gamma_inv: &DMatrix<f64>) -> Vec<EigenPair> {
    let (half, _) = spd_sqrt_pair(&alg.k_hat());
    let sym = &half * gamma_inv * &half;
    let (mu, v) = sorted_symmetric_eigen(&sym);
    let mut out: Vec<EigenPair> = (0..mu.len())
        .map(|i| {
            let mut e = &half * v.column(i);
            canonical_sign(&mut e);
            EigenPair {
                lambda: -alg.kk_scale() * mu[i],
                vector: e,
            }
        })
        .collect();
    out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    out
}

/// `c^m_{sn} gamma^{nk} p_m p_k`.
pub fn vertical_residual<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>, p: &DVector<f64>) -> Result<DVector<f64>> {
    let (_, gamma_inv, _) = orbit_metric(sys, q)?;
    Ok(dynamics::vertical_quadratic(sys.algebra(), &gamma_inv, p))
}

/// Shape acceleration at rest with momentum `p`:
/// `-N (G^{-1} N^T D gamma^{-1}(p, p) / 2 + G^{-1} dV)`.
pub fn horizontal_residual<S: MechanicalSystem + ?Sized>(sys: &S, q: &PointOnSigma, p: &DVector<f64>) -> Result<DVector<f64>> {
    let geo = GeometryAtPoint::evaluate(sys, q)?;
    Ok(horizontal_from_geometry(&geo, &sys.potential_gradient(q.q()), p))
}

fn horizontal_from_geometry(geo: &GeometryAtPoint, grad_v: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let n = &geo.n_proj;
    let gi = &geo.metric_inv;
    let momentum = gi * (n.transpose() * geo.d_gamma_inv_contract(p)) * 0.5;
    -(n * (momentum + gi * grad_v))
}

#[derive(Clone, Debug, Serialize)]
pub struct RelativeEquilibrium {
    pub q: PointOnSigma,
    pub p: DVector<f64>,
    pub lambda: f64,
    /// `k_hat`-norm of `p`.
    pub scale: f64,
    pub residual_h: f64,
    pub residual_v: f64,
    pub iterations: usize,
    /// Residual norm after each accepted step.
    pub history: Vec<f64>,
}

/// Eigenspace basis at `q` aligned to `reference` by orthogonal Procrustes in
/// the `k_hat^{-1}` inner product.
fn aligned_basis<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q: &DVector<f64>,
    reference: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let pairs = momentum_eigenproblem(sys, q)?;
    align_eigenspace(&pairs, &sys.algebra().k_hat_inv(), reference)
}

/// The `reference.ncols()` eigenvectors of `pairs` that overlap `reference`
/// most, rotated onto it by orthogonal Procrustes in the `khi` inner product.
pub(crate) fn align_eigenspace(
    pairs: &[EigenPair],
    khi: &DMatrix<f64>,
    reference: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let d = reference.ncols();
    let all = DMatrix::from_columns(&pairs.iter().map(|e| e.vector.clone()).collect::<Vec<_>>());
    let o = all.transpose() * khi * reference;
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.sort_by(|&a, &b| o.row(b).norm_squared().total_cmp(&o.row(a).norm_squared()));
    idx.truncate(d);
    idx.sort_unstable();
    let chosen = DMatrix::from_columns(&idx.iter().map(|&i| pairs[i].vector.clone()).collect::<Vec<_>>());
    let m = chosen.transpose() * khi * reference;
    let svd = m.svd(true, true);
    let overlap = svd.singular_values.min();
    if overlap < MIN_OVERLAP {
        return Err(Error::EigenCrossing { overlap });
    }
    let r = svd.u.expect("svd u") * svd.v_t.expect("svd v_t");
    Ok((chosen * r, overlap))
}

/// Basis of the eigenspace containing `pairs[index]`, with its eigenvalue.
pub(crate) fn eigen_cluster(pairs: &[EigenPair], index: usize) -> Result<(DMatrix<f64>, f64)> {
    let target = pairs
        .get(index)
        .ok_or_else(|| Error::InvalidInput(format!("eigen_index {index} out of range (n_g = {})", pairs.len())))?
        .lambda;
    let cols: Vec<DVector<f64>> = pairs
        .iter()
        .filter(|e| (e.lambda - target).abs() <= DEGENERACY_TOL * target.abs().max(1.0))
        .map(|e| e.vector.clone())
        .collect();
    Ok((DMatrix::from_columns(&cols), target))
}

fn cluster_lambda<S: MechanicalSystem + ?Sized>(sys: &S, q: &DVector<f64>, basis: &DMatrix<f64>) -> Result<f64> {
    let (_, gi, _) = orbit_metric(sys, q)?;
    let m = sys.algebra().k() * gi;
    let khi = sys.algebra().k_hat_inv();
    // Rayleigh quotient in the k_hat^{-1} inner product
    let r = basis.transpose() * &khi * m * basis;
    Ok(r.trace() / basis.ncols() as f64)
}

struct Problem<'a, S: ?Sized> {
    sys: &'a S,
    n_p: usize,
}

impl<S: MechanicalSystem + ?Sized> Problem<'_, S> {
    fn residual(&self, x: &DVector<f64>, reference: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let q = x.rows(0, self.n_p).into_owned();
        let c = x.rows(self.n_p, x.len() - self.n_p).into_owned();
        let (basis, _) = aligned_basis(self.sys, &q, reference)?;
        let p = &basis * c;
        let geo = GeometryAtPoint::evaluate(self.sys, &PointOnSigma::trusted(q.clone()))?;
        let h = horizontal_from_geometry(&geo, &self.sys.potential_gradient(&q), &p);
        let chi = self.sys.constraint(&q);
        let mut r = DVector::zeros(h.len() + chi.len());
        r.rows_mut(0, h.len()).copy_from(&h);
        r.rows_mut(h.len(), chi.len()).copy_from(&chi);
        Ok((r, basis))
    }
}

/// Levenberg-Marquardt on `[horizontal_residual; chi]` over the shape and the
/// coordinates of `p` in the eigenspace selected by `eigen_index` (ascending
/// eigenvalue order). Degenerate eigenvalues are handled by working in the
/// whole eigenspace.
pub fn solve_equilibrium<S: MechanicalSystem + ?Sized>(
    sys: &S,
    q_guess: &DVector<f64>,
    eigen_index: usize,
    scale_guess: f64,
    opts: &SolverOptions,
) -> Result<RelativeEquilibrium> {
    let n_p = sys.n_p();
    let pairs = momentum_eigenproblem(sys, q_guess)?;
    let (reference, _) = eigen_cluster(&pairs, eigen_index)?;
    let d = reference.ncols();
    let problem = Problem { sys, n_p };

    // tie-break among basis directions by the initial horizontal residual
    let mut best_dir = 0;
    if d > 1 && scale_guess != 0.0 {
        let geo = GeometryAtPoint::evaluate(sys, &PointOnSigma::trusted(q_guess.clone()))?;
        let grad = sys.potential_gradient(q_guess);
        let mut best = f64::INFINITY;
        for j in 0..d {
            let p = reference.column(j) * scale_guess;
            let r = horizontal_from_geometry(&geo, &grad, &p).norm();
            if r < best {
                best = r;
                best_dir = j;
            }
        }
    }
    let mut x = DVector::zeros(n_p + d);
    x.rows_mut(0, n_p).copy_from(q_guess);
    x[n_p + best_dir] = scale_guess;

    let out = lm::minimize(x, reference, |x, r| problem.residual(x, r), opts)?;
    if !out.converged(opts) {
        return Err(Error::NoConvergence {
            iterations: out.iterations,
            residual: out.norm(),
        });
    }
    let (x, reference, iterations, history) = (out.x, out.state, out.iterations, out.history);
    let q = x.rows(0, n_p).into_owned();
    let c = x.rows(n_p, d).into_owned();
    let p = &reference * &c;
    let point = PointOnSigma::new(sys, q.clone())?;
    let residual_h = horizontal_residual(sys, &point, &p)?.norm();
    let residual_v = vertical_residual(sys, &q, &p)?.norm();
    let lambda = cluster_lambda(sys, &q, &reference)?;
    Ok(RelativeEquilibrium {
        q: point,
        scale: c.norm(),
        p,
        lambda,
        residual_h,
        residual_v,
        iterations,
        history,
    })
}

/// Independent solves from several `(q_guess, scale_guess)` pairs, run in parallel.
pub fn multistart<S: MechanicalSystem + ?Sized>(
    sys: &S,
    starts: &[(DVector<f64>, f64)],
    eigen_index: usize,
    opts: &SolverOptions,
) -> Vec<Result<RelativeEquilibrium>> {
    starts
        .par_iter()
        .map(|(q, s)| solve_equilibrium(sys, q, eigen_index, *s, opts))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DynamicCheck {
    pub max_q_dot: f64,
    pub max_p_change: f64,
    pub max_q_change: f64,
}

/// Integrate from the equilibrium at rest and measure how far it moves.
pub fn verify_dynamically<S: MechanicalSystem + ?Sized>(
    sys: &S,
    eq: &RelativeEquilibrium,
    t_end: f64,
    dt: f64,
) -> Result<DynamicCheck> {
    let st = ReducedState::new(sys, eq.q.clone(), DVector::zeros(sys.n_p()), eq.p.clone(), 0.0)?;
    let traj = dynamics::integrate_system(sys, &st, t_end, dt, Method::Rk4)?;
    let mut check = DynamicCheck {
        max_q_dot: 0.0,
        max_p_change: 0.0,
        max_q_change: 0.0,
    };
    for s in &traj.samples {
        check.max_q_dot = check.max_q_dot.max(s.q_dot.amax());
        check.max_p_change = check.max_p_change.max((&s.p - &eq.p).amax());
        check.max_q_change = check.max_q_change.max((&s.q - eq.q.q()).amax());
    }
    Ok(check)
}
