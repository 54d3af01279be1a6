use nalgebra::{DMatrix, DVector};

use super::operators::{cov_deriv_operator, divergence, divergence_operator, metric_matrix, potential_and_gradient};
use super::{GaugeField, GaugeLattice};
use crate::error::Result;
use crate::lie::LieAlgebraSpec;
use crate::system::{DerivativeMode, MechanicalSystem};

/// The lattice field viewed as a finite-dimensional mechanical system: the
/// flattened field is the configuration, the local gauge algebra is one copy
/// of the colour algebra per site and the Killing fields are the columns of
/// the covariant derivative.
#[derive(Clone, Debug)]
pub struct LatticeSystem {
    lattice: GaugeLattice,
    local: LieAlgebraSpec,
    metric: DMatrix<f64>,
    metric_inv: DMatrix<f64>,
    div: DMatrix<f64>,
}

impl LatticeSystem {
    pub fn new(lattice: GaugeLattice) -> Result<Self> {
        let local = lattice.algebra().direct_sum(lattice.n_sites())?;
        let metric = metric_matrix(&lattice);
        let ng = lattice.n_g();
        let mut metric_inv = DMatrix::zeros(lattice.flat_dim(), lattice.flat_dim());
        let blk = lattice.algebra().k_hat_inv() / lattice.cell_volume();
        for b in 0..lattice.flat_dim() / ng {
            metric_inv.view_mut((b * ng, b * ng), (ng, ng)).copy_from(&blk);
        }
        let div = divergence_operator(&lattice);
        Ok(Self {
            lattice,
            local,
            metric,
            metric_inv,
            div,
        })
    }

    pub fn lattice(&self) -> &GaugeLattice {
        &self.lattice
    }

    fn field(&self, q: &DVector<f64>) -> GaugeField {
        GaugeField {
            lattice: self.lattice.clone(),
            a_field: q.clone(),
            coulomb_fixed: false,
        }
    }
}

impl MechanicalSystem for LatticeSystem {
    fn name(&self) -> &str {
        "lattice"
    }

    fn n_p(&self) -> usize {
        self.lattice.flat_dim()
    }

    fn algebra(&self) -> &LieAlgebraSpec {
        &self.local
    }

    fn metric(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.metric.clone())
    }

    fn metric_inverse(&self, _q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.metric_inv.clone())
    }

    fn killing(&self, q: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(cov_deriv_operator(&self.field(q)))
    }

    fn constraint(&self, q: &DVector<f64>) -> DVector<f64> {
        divergence(&self.lattice, q)
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        potential_and_gradient(&self.lattice, q).0
    }

    fn derivative_mode(&self) -> DerivativeMode {
        DerivativeMode::Analytic
    }

    fn constraint_redundancy(&self) -> usize {
        self.lattice.n_g()
    }

    fn constraint_jacobian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        self.div.clone()
    }

    fn constraint_second(&self, _q: &DVector<f64>, _v: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.lattice.site_dim())
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        potential_and_gradient(&self.lattice, q).1
    }

    fn metric_derivative(&self, _q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let n = self.n_p();
        Ok(vec![DMatrix::zeros(n, n); n])
    }

    fn killing_derivative(&self, _q: &DVector<f64>) -> Result<Vec<DMatrix<f64>>> {
        let lat = &self.lattice;
        let ng = lat.n_g();
        let mut out = vec![DMatrix::zeros(lat.flat_dim(), lat.site_dim()); lat.flat_dim()];
        for y in 0..lat.n_sites() {
            for j in 0..3 {
                for &(a, b, m, c) in lat.algebra().nonzero_constants() {
                    out[lat.index(b, j, y)][(lat.index(a, j, y), y * ng + m)] += c;
                }
            }
        }
        Ok(out)
    }
}
