//! Coulomb-gauge Yang-Mills on a small periodic cubic lattice.
//!
//! A field `A^a_i(x)` is stored flat at `x * 3 n_g + i * n_g + a`; algebra-valued
//! site functions `w^m(x)` at `x * n_g + m`; sites at `x0 + L (x1 + L x2)`.
//! Lattice derivatives are forward differences with periodic wrap.

mod dynamics;
mod equilibrium;
mod operators;
mod system;

pub use dynamics::{
    christoffel_connection_term, christoffel_metric_term, curvature_term_1, curvature_term_2, curvature_term_3,
    curvature_term_4, curvature_term_5, curvature_term_6, lattice_energy, momentum_quadratic_term, ym_rhs, LatticeFlow,
    YmRhs, YmTerms,
};
pub use equilibrium::{
    green_eigenpairs, ym_equilibrium_residuals, ym_solve_equilibrium, LatticeEquilibrium, LatticeSolve,
};
pub use operators::{
    bracket_field_site, coulomb_connection, coulomb_project, cov_deriv_operator, divergence, divergence_operator,
    fp_operator, gradient_operator, green_function, gribov_check, potential_and_gradient, GreenFunction, GribovReport,
    LatticeGeometry,
};
pub use system::LatticeSystem;

use nalgebra::DVector;
use rand::RngExt;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lie::LieAlgebraSpec;

pub const MIN_SIDE: usize = 2;
pub const MAX_SIDE: usize = 6;
/// Divergence tolerance for a field to count as Coulomb fixed.
pub const TOL_COULOMB: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct GaugeLattice {
    side: usize,
    spacing: f64,
    #[serde(skip)]
    algebra: LieAlgebraSpec,
}

impl GaugeLattice {
    pub fn new(side: usize, spacing: f64) -> Result<Self> {
        Self::with_algebra(side, spacing, LieAlgebraSpec::named("su2")?)
    }

    pub fn with_algebra(side: usize, spacing: f64, algebra: LieAlgebraSpec) -> Result<Self> {
        if !(MIN_SIDE..=MAX_SIDE).contains(&side) {
            return Err(Error::InvalidInput(format!(
                "lattice side must be in {MIN_SIDE}..={MAX_SIDE}, got {side}"
            )));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidInput("lattice spacing must be positive".into()));
        }
        Ok(Self { side, spacing, algebra })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn algebra(&self) -> &LieAlgebraSpec {
        &self.algebra
    }

    pub fn n_g(&self) -> usize {
        self.algebra.dim()
    }

    pub fn n_sites(&self) -> usize {
        self.side.pow(3)
    }

    /// Length of a flattened field.
    pub fn flat_dim(&self) -> usize {
        3 * self.n_g() * self.n_sites()
    }

    /// Length of an algebra-valued site function.
    pub fn site_dim(&self) -> usize {
        self.n_g() * self.n_sites()
    }

    /// Volume element `a^3`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn index(&self, a: usize, i: usize, x: usize) -> usize {
        x * 3 * self.n_g() + i * self.n_g() + a
    }

    /// Inverse of [`index`](Self::index).
    pub fn unindex(&self, k: usize) -> (usize, usize, usize) {
        let ng = self.n_g();
        (k % ng, (k / ng) % 3, k / (3 * ng))
    }

    pub fn site_index(&self, m: usize, x: usize) -> usize {
        x * self.n_g() + m
    }

    pub fn site(&self, c: [usize; 3]) -> usize {
        let l = self.side;
        c[0] + l * (c[1] + l * c[2])
    }

    pub fn coords(&self, x: usize) -> [usize; 3] {
        let l = self.side;
        [x % l, (x / l) % l, x / (l * l)]
    }

    /// Site displaced by `step` along axis `i`, with periodic wrap.
    pub fn shift(&self, x: usize, i: usize, step: isize) -> usize {
        let mut c = self.coords(x);
        let l = self.side as isize;
        c[i] = ((c[i] as isize + step).rem_euclid(l)) as usize;
        self.site(c)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeField {
    pub lattice: GaugeLattice,
    pub a_field: DVector<f64>,
    pub coulomb_fixed: bool,
}

impl GaugeField {
    pub fn new(lattice: GaugeLattice, a_field: DVector<f64>) -> Result<Self> {
        if a_field.len() != lattice.flat_dim() {
            return Err(Error::Dimension(format!(
                "field has {} components, lattice needs {}",
                a_field.len(),
                lattice.flat_dim()
            )));
        }
        let coulomb_fixed = divergence(&lattice, &a_field).amax() < TOL_COULOMB;
        Ok(Self {
            lattice,
            a_field,
            coulomb_fixed,
        })
    }

    pub fn zero(lattice: GaugeLattice) -> Self {
        let n = lattice.flat_dim();
        Self {
            lattice,
            a_field: DVector::zeros(n),
            coulomb_fixed: true,
        }
    }

    /// Uniform random components in `[-amplitude, amplitude]`, not gauge fixed.
    pub fn random<R: RngExt + ?Sized>(lattice: GaugeLattice, amplitude: f64, rng: &mut R) -> Self {
        let n = lattice.flat_dim();
        let a = DVector::from_fn(n, |_, _| rng.random_range(-amplitude..=amplitude));
        Self::new(lattice, a).expect("dimension matches")
    }

    pub fn get(&self, a: usize, i: usize, x: usize) -> f64 {
        self.a_field[self.lattice.index(a, i, x)]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldMomentum {
    pub lattice: GaugeLattice,
    pub p_field: DVector<f64>,
}

impl FieldMomentum {
    pub fn new(lattice: GaugeLattice, p_field: DVector<f64>) -> Result<Self> {
        if p_field.len() != lattice.site_dim() {
            return Err(Error::Dimension(format!(
                "momentum has {} components, lattice needs {}",
                p_field.len(),
                lattice.site_dim()
            )));
        }
        if p_field.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("momentum has non-finite entries".into()));
        }
        Ok(Self { lattice, p_field })
    }
}
