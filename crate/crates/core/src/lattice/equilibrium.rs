use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::dynamics::{coadjoint_right, momentum_quadratic_term};
use super::operators::{apply_metric, coulomb_project, divergence, potential_and_gradient, LatticeGeometry};
use super::{GaugeField, GaugeLattice};
use crate::equilibria::{align_eigenspace, eigen_cluster, eigenpairs, EigenPair};
use crate::error::{Error, Result};
use crate::lie::LieAlgebraSpec;
use crate::lm::{self, SolverOptions};

fn local_algebra(lat: &GaugeLattice) -> Result<LieAlgebraSpec> {
    lat.algebra().direct_sum(lat.n_sites())
}

/// Eigenpairs of `k gamma^+` over all sites, ascending in eigenvalue.
pub fn green_eigenpairs(field: &GaugeField) -> Result<Vec<EigenPair>> {
    let geo = LatticeGeometry::new(field)?;
    Ok(eigenpairs(&local_algebra(&field.lattice)?, &geo.green.pinv))
}

fn residuals_with(lat: &GaugeLattice, geo: &LatticeGeometry, a: &DVector<f64>, p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let (_, grad) = potential_and_gradient(lat, a);
    let n = &geo.n_proj;
    let momentum = apply_metric(lat, &(n.transpose() * momentum_quadratic_term(lat, geo, p)), true);
    let res_h = -(n * (momentum + apply_metric(lat, &grad, true)));
    let pi = &geo.green.pinv * p;
    (res_h, coadjoint_right(lat, &pi, p))
}

/// Horizontal residual (shape acceleration at rest with momentum `p`) and the
/// vertical residual `c^g_{ab} p_g (gamma^+ p)^b` at every site.
pub fn ym_equilibrium_residuals(field: &GaugeField, p: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let geo = LatticeGeometry::new(field)?;
    Ok(residuals_with(&field.lattice, &geo, &field.a_field, p))
}

#[derive(Clone, Debug, Serialize)]
pub struct LatticeEquilibrium {
    pub a_field: DVector<f64>,
    pub p: DVector<f64>,
    pub lambda: f64,
    pub scale: f64,
    pub residual_h: f64,
    pub residual_v: f64,
    /// Largest divergence of the solution.
    pub constraint: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
}

/// Solver output; non-converged runs still carry the best iterate.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeSolve {
    pub best: LatticeEquilibrium,
    pub converged: bool,
}

impl LatticeSolve {
    pub fn into_result(self) -> Result<LatticeEquilibrium> {
        if self.converged {
            Ok(self.best)
        } else {
            Err(Error::NoConvergence {
                iterations: self.best.iterations,
                residual: self.best.history.last().copied().unwrap_or(f64::NAN),
            })
        }
    }
}

struct Problem<'a> {
    lat: &'a GaugeLattice,
    khi: DMatrix<f64>,
    alg: LieAlgebraSpec,
}

impl Problem<'_> {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.lat.flat_dim();
        (x.rows(0, n).into_owned(), x.rows(n, x.len() - n).into_owned())
    }

    fn field(&self, a: &DVector<f64>) -> GaugeField {
        GaugeField {
            lattice: self.lat.clone(),
            a_field: a.clone(),
            coulomb_fixed: false,
        }
    }

    fn residual(&self, x: &DVector<f64>, reference: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (a, c) = self.split(x);
        let geo = LatticeGeometry::new(&self.field(&a))?;
        let pairs = eigenpairs(&self.alg, &geo.green.pinv);
        let (basis, _) = align_eigenspace(&pairs, &self.khi, reference)?;
        let p = &basis * c;
        let (h, _) = residuals_with(self.lat, &geo, &a, &p);
        let div = divergence(self.lat, &a);
        let mut r = DVector::zeros(h.len() + div.len());
        r.rows_mut(0, h.len()).copy_from(&h);
        r.rows_mut(h.len(), div.len()).copy_from(&div);
        Ok((r, basis))
    }
}

/// Levenberg-Marquardt over the field and the coordinates of `p` in the
/// eigenspace of `k gamma^+` selected by `eigen_index`, tracked along the
/// iteration. The residual stacks the horizontal residual and the divergence.
pub fn ym_solve_equilibrium(
    guess: &GaugeField,
    eigen_index: usize,
    scale_guess: f64,
    opts: &SolverOptions,
) -> Result<LatticeSolve> {
    let lat = &guess.lattice;
    let a0 = coulomb_project(lat, &guess.a_field);
    let alg = local_algebra(lat)?;
    let problem = Problem {
        lat,
        khi: alg.k_hat_inv(),
        alg,
    };
    let geo = LatticeGeometry::new(&problem.field(&a0))?;
    let pairs = eigenpairs(&problem.alg, &geo.green.pinv);
    let (reference, _) = eigen_cluster(&pairs, eigen_index)?;
    let d = reference.ncols();
    let n = lat.flat_dim();
    let mut x = DVector::zeros(n + d);
    x.rows_mut(0, n).copy_from(&a0);
    x[n] = scale_guess;

    let out = lm::minimize(x, reference, |x, r| problem.residual(x, r), opts)?;
    let converged = out.converged(opts);
    let (a, c) = problem.split(&out.x);
    let p = &out.state * &c;
    let geo = LatticeGeometry::new(&problem.field(&a))?;
    let (h, v) = residuals_with(lat, &geo, &a, &p);
    let m = &out.state.transpose() * &problem.khi * (problem.alg.k() * &geo.green.pinv) * &out.state;
    Ok(LatticeSolve {
        best: LatticeEquilibrium {
            constraint: divergence(lat, &a).amax(),
            a_field: a,
            scale: c.norm(),
            p,
            lambda: m.trace() / d as f64,
            residual_h: h.norm(),
            residual_v: v.norm(),
            iterations: out.iterations,
            history: out.history,
        },
        converged,
    })
}
