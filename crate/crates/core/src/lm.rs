//! Levenberg-Marquardt with a finite-difference Jacobian and a piece of state
//! (for example a tracked eigenbasis) carried along accepted steps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Residual norm accepted as converged.
    pub tolerance: f64,
    pub fd_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-8,
            fd_step: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome<T> {
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    pub state: T,
    pub iterations: usize,
    /// Residual norm at the start and after every iteration; never increases.
    pub history: Vec<f64>,
}

impl<T> Outcome<T> {
    pub fn norm(&self) -> f64 {
        self.residual.norm()
    }

    pub fn converged(&self, opts: &SolverOptions) -> bool {
        self.norm() < opts.tolerance
    }
}

/// Minimize `|f(x)|`. `f` receives the state of the current iterate and
/// returns the residual together with the state at `x`. Iteration continues
/// past `tolerance` down to `tolerance * 1e-4` as long as steps improve.
pub fn minimize<T, F>(x0: DVector<f64>, state0: T, f: F, opts: &SolverOptions) -> Result<Outcome<T>>
where
    T: Clone + Sync,
    F: Fn(&DVector<f64>, &T) -> Result<(DVector<f64>, T)> + Sync,
{
    let (r0, s0) = f(&x0, &state0)?;
    let mut out = Outcome {
        history: vec![r0.norm()],
        x: x0,
        residual: r0,
        state: s0,
        iterations: 0,
    };
    let polish = opts.tolerance * 1e-4;
    let mut damping = 1e-3;
    while out.iterations < opts.max_iterations && out.norm() > polish {
        out.iterations += 1;
        let x = &out.x;
        let state = &out.state;
        let cols: Vec<DVector<f64>> = (0..x.len())
            .into_par_iter()
            .map(|i| {
                let h = opts.fd_step * (1.0 + x[i].abs());
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let (rp, _) = f(&xp, state)?;
                let (rm, _) = f(&xm, state)?;
                Ok((rp - rm) / (2.0 * h))
            })
            .collect::<Result<_>>()?;
        let jac = DMatrix::from_columns(&cols);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &out.residual;
        let norm = out.norm();
        let mut accepted = false;
        while damping < 1e12 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += damping * (jtj[(i, i)] + 1e-12);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                damping *= 4.0;
                continue;
            };
            let xn = &out.x + step;
            match f(&xn, &out.state) {
                Ok((rn, sn)) if rn.norm() < norm => {
                    out.x = xn;
                    out.residual = rn;
                    out.state = sn;
                    damping = (damping / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                Err(e @ Error::EigenCrossing { .. }) if damping > 1e6 => return Err(e),
                _ => damping *= 4.0,
            }
        }
        out.history.push(out.norm());
        if !accepted {
            break;
        }
    }
    Ok(out)
}
