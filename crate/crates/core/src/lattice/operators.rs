use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::Serialize;

use super::{GaugeField, GaugeLattice};
use crate::error::{Error, Result};
use crate::linalg::{pinv_deflated, sorted_symmetric_eigen, SINGULAR_CONDITION};

/// Relative eigenvalue threshold for deflation in the Green function.
pub const GREEN_DEFLATION: f64 = 1e-10;

/// Forward-difference gradient, site functions to fields.
pub fn gradient_operator(lat: &GaugeLattice) -> DMatrix<f64> {
    let ng = lat.n_g();
    let h = lat.spacing();
    let mut m = DMatrix::zeros(lat.flat_dim(), lat.site_dim());
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            let xn = lat.shift(x, i, 1);
            for a in 0..ng {
                let row = lat.index(a, i, x);
                m[(row, lat.site_index(a, xn))] += 1.0 / h;
                m[(row, lat.site_index(a, x))] -= 1.0 / h;
            }
        }
    }
    m
}

/// Backward-difference divergence, the negative transpose of the gradient.
pub fn divergence_operator(lat: &GaugeLattice) -> DMatrix<f64> {
    -gradient_operator(lat).transpose()
}

/// `sum_i (A_i(x) - A_i(x - e_i)) / a` for every colour and site.
pub fn divergence(lat: &GaugeLattice, a: &DVector<f64>) -> DVector<f64> {
    let ng = lat.n_g();
    let h = lat.spacing();
    let mut out = DVector::zeros(lat.site_dim());
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            let xp = lat.shift(x, i, -1);
            for c in 0..ng {
                out[lat.site_index(c, x)] += (a[lat.index(c, i, x)] - a[lat.index(c, i, xp)]) / h;
            }
        }
    }
    out
}

/// Pointwise bracket of a field with a site function: `[X_i(x), w(x)]`.
pub fn bracket_field_site(lat: &GaugeLattice, field: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(lat.flat_dim());
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            for &(a, n, m, c) in lat.algebra().nonzero_constants() {
                out[lat.index(a, i, x)] += c * field[lat.index(n, i, x)] * w[lat.site_index(m, x)];
            }
        }
    }
    out
}

/// Covariant derivative `D w = grad w + [A, w]` as a `flat_dim x site_dim` matrix.
pub fn cov_deriv_operator(field: &GaugeField) -> DMatrix<f64> {
    let lat = &field.lattice;
    let mut d = gradient_operator(lat);
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            for &(a, n, m, c) in lat.algebra().nonzero_constants() {
                d[(lat.index(a, i, x), lat.site_index(m, x))] += c * field.a_field[lat.index(n, i, x)];
            }
        }
    }
    d
}

/// Field-space metric `a^3 k_hat (x) 1` applied to a flat vector.
pub(crate) fn apply_metric(lat: &GaugeLattice, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
    let ng = lat.n_g();
    let (k, s) = if inverse {
        (lat.algebra().k_hat_inv(), 1.0 / lat.cell_volume())
    } else {
        (lat.algebra().k_hat(), lat.cell_volume())
    };
    let mut out = DVector::zeros(v.len());
    for blk in 0..v.len() / ng {
        let seg = v.rows(blk * ng, ng);
        out.rows_mut(blk * ng, ng).copy_from(&(&k * seg * s));
    }
    out
}

pub(crate) fn metric_matrix(lat: &GaugeLattice) -> DMatrix<f64> {
    let ng = lat.n_g();
    let k = lat.algebra().k_hat() * lat.cell_volume();
    let mut g = DMatrix::zeros(lat.flat_dim(), lat.flat_dim());
    for blk in 0..lat.flat_dim() / ng {
        g.view_mut((blk * ng, blk * ng), (ng, ng)).copy_from(&k);
    }
    g
}

/// Orbit metric `gamma = D^T G D`, the gauge-covariant Faddeev-Popov operator.
pub fn fp_operator(field: &GaugeField) -> DMatrix<f64> {
    let d = cov_deriv_operator(field);
    fp_from_cov(&field.lattice, &d)
}

fn fp_from_cov(lat: &GaugeLattice, d: &DMatrix<f64>) -> DMatrix<f64> {
    let gd = metric_matrix(lat) * d;
    let g = d.transpose() * gd;
    (&g + g.transpose()) * 0.5
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenFunction {
    pub pinv: DMatrix<f64>,
    pub kernel_dim: usize,
    /// Ratio of extreme retained eigenvalues.
    pub condition: f64,
    /// Orthonormal basis of the deflated kernel, one column per mode.
    pub kernel: DMatrix<f64>,
}

/// Pseudo-inverse of the symmetric FP operator with eigenvalues below
/// `1e-10 * lambda_max` deflated.
pub fn green_function(gamma: &DMatrix<f64>) -> Result<GreenFunction> {
    let n = gamma.nrows();
    let (vals, vecs) = sorted_symmetric_eigen(gamma);
    let lmax = vals.amax();
    let cut = GREEN_DEFLATION * lmax;
    let mut pinv = DMatrix::zeros(n, n);
    let mut kernel = Vec::new();
    let mut lmin = f64::INFINITY;
    for i in 0..n {
        let v = vecs.column(i);
        if vals[i].abs() <= cut {
            kernel.push(v.into_owned());
        } else {
            lmin = lmin.min(vals[i].abs());
            pinv += v * v.transpose() / vals[i];
        }
    }
    let condition = if kernel.len() == n { 1.0 } else { lmax / lmin };
    if condition > SINGULAR_CONDITION {
        return Err(Error::IllConditioned {
            what: "Faddeev-Popov operator".into(),
            condition,
        });
    }
    let kernel_mat = if kernel.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&kernel)
    };
    Ok(GreenFunction {
        pinv: (&pinv + pinv.transpose()) * 0.5,
        kernel_dim: kernel.len(),
        condition,
        kernel: kernel_mat,
    })
}

/// Coulomb connection `gamma^+ D^T G`, mapping fields to site functions.
pub fn coulomb_connection(field: &GaugeField) -> Result<DMatrix<f64>> {
    Ok(LatticeGeometry::new(field)?.connection)
}

/// Everything the lattice equations need at one field configuration.
#[derive(Clone, Debug)]
pub struct LatticeGeometry {
    pub cov: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub green: GreenFunction,
    pub connection: DMatrix<f64>,
    /// `Div D`, the Faddeev-Popov matrix of the Coulomb constraint.
    pub fp_constraint: DMatrix<f64>,
    pub fp_constraint_pinv: DMatrix<f64>,
    /// `1 - D (Div D)^+ Div`.
    pub n_proj: DMatrix<f64>,
    /// `1 - D A`.
    pub pi_proj: DMatrix<f64>,
}

impl LatticeGeometry {
    pub fn new(field: &GaugeField) -> Result<Self> {
        let lat = &field.lattice;
        let cov = cov_deriv_operator(field);
        let gamma = fp_from_cov(lat, &cov);
        let green = green_function(&gamma)?;
        let g = metric_matrix(lat);
        let connection = &green.pinv * cov.transpose() * g;
        let div = divergence_operator(lat);
        let fp_constraint = &div * &cov;
        let (fp_constraint_pinv, cond) = pinv_deflated(&fp_constraint, lat.n_g());
        if cond > SINGULAR_CONDITION {
            return Err(Error::SingularFp { condition: cond });
        }
        let n = lat.flat_dim();
        let id = DMatrix::identity(n, n);
        let n_proj = &id - &cov * &fp_constraint_pinv * div;
        let pi_proj = id - &cov * &connection;
        Ok(Self {
            cov,
            gamma,
            green,
            connection,
            fp_constraint,
            fp_constraint_pinv,
            n_proj,
            pi_proj,
        })
    }
}

fn fft3(data: &mut [Complex64], side: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft(side, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    let stride = [1, side, side * side];
    for axis in 0..3 {
        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
        for u in 0..side {
            for v in 0..side {
                let base = u * stride[others[0]] + v * stride[others[1]];
                for (t, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + t * stride[axis]];
                }
                fft.process(&mut line);
                for (t, val) in line.iter().enumerate() {
                    data[base + t * stride[axis]] = *val;
                }
            }
        }
    }
}

/// Remove the longitudinal part of a field in Fourier space, leaving
/// `Div A = 0` exactly up to rounding.
pub fn coulomb_project(lat: &GaugeLattice, a_raw: &DVector<f64>) -> DVector<f64> {
    let l = lat.side();
    let ns = lat.n_sites();
    let h = lat.spacing();
    let tau = std::f64::consts::TAU;
    let d: Vec<[Complex64; 3]> = (0..ns)
        .map(|x| {
            let c = lat.coords(x);
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for i in 0..3 {
                out[i] = (Complex64::from_polar(1.0, tau * c[i] as f64 / l as f64) - 1.0) / h;
            }
            out
        })
        .collect();
    let mut out = a_raw.clone();
    for col in 0..lat.n_g() {
        let mut comp: Vec<Vec<Complex64>> = (0..3)
            .map(|i| (0..ns).map(|x| Complex64::new(a_raw[lat.index(col, i, x)], 0.0)).collect())
            .collect();
        for c in comp.iter_mut() {
            fft3(c, l, FftDirection::Forward);
        }
        for (k, dk) in d.iter().enumerate() {
            let norm: f64 = dk.iter().map(|z| z.norm_sqr()).sum();
            if norm < 1e-14 {
                continue;
            }
            let long: Complex64 = (0..3).map(|j| dk[j].conj() * comp[j][k]).sum();
            for i in 0..3 {
                comp[i][k] -= dk[i] * long / norm;
            }
        }
        for (i, c) in comp.iter_mut().enumerate() {
            fft3(c, l, FftDirection::Inverse);
            for x in 0..ns {
                out[lat.index(col, i, x)] = c[x].re / ns as f64;
            }
        }
    }
    out
}

/// Field strength `F_ij(x) = d_i A_j - d_j A_i + [A_i, A_j]`, indexed `[x][i][j]` with colour vectors.
fn field_strength(lat: &GaugeLattice, a: &DVector<f64>) -> Vec<[[DVector<f64>; 3]; 3]> {
    let ng = lat.n_g();
    let h = lat.spacing();
    (0..lat.n_sites())
        .map(|x| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let mut f = DVector::zeros(ng);
                    if i == j {
                        return f;
                    }
                    let (xi, xj) = (lat.shift(x, i, 1), lat.shift(x, j, 1));
                    for c in 0..ng {
                        f[c] = (a[lat.index(c, j, xi)] - a[lat.index(c, j, x)]) / h
                            - (a[lat.index(c, i, xj)] - a[lat.index(c, i, x)]) / h;
                    }
                    for &(c, n, m, s) in lat.algebra().nonzero_constants() {
                        f[c] += s * a[lat.index(n, i, x)] * a[lat.index(m, j, x)];
                    }
                    f
                })
            })
        })
        .collect()
}

/// Magnetic energy `V = a^3/2 sum_x sum_ij k_hat(F_ij, F_ij)` and its gradient.
pub fn potential_and_gradient(lat: &GaugeLattice, a: &DVector<f64>) -> (f64, DVector<f64>) {
    let ng = lat.n_g();
    let h = lat.spacing();
    let s = lat.cell_volume();
    let kh = lat.algebra().k_hat();
    let f = field_strength(lat, a);
    let lowered: Vec<[[DVector<f64>; 3]; 3]> = f
        .iter()
        .map(|fx| std::array::from_fn(|i| std::array::from_fn(|j| &kh * &fx[i][j])))
        .collect();
    let mut v = 0.0;
    for x in 0..lat.n_sites() {
        for i in 0..3 {
            for j in 0..3 {
                v += 0.5 * s * f[x][i][j].dot(&lowered[x][i][j]);
            }
        }
    }
    let mut grad = DVector::zeros(lat.flat_dim());
    for y in 0..lat.n_sites() {
        for j in 0..3 {
            for i in 0..3 {
                if i == j {
                    continue;
                }
                let ym = lat.shift(y, i, -1);
                for b in 0..ng {
                    grad[lat.index(b, j, y)] += 2.0 * s * (lowered[ym][i][j][b] - lowered[y][i][j][b]) / h;
                }
                for &(c, n, b, sc) in lat.algebra().nonzero_constants() {
                    grad[lat.index(b, j, y)] += 2.0 * s * sc * a[lat.index(n, i, y)] * lowered[y][i][j][c];
                }
            }
        }
    }
    (v, grad)
}

#[derive(Clone, Debug, Serialize)]
pub struct GribovReport {
    /// Smallest eigenvalue of the symmetrized `-Div D` on site functions
    /// orthogonal to the constants.
    pub min_eigenvalue: f64,
    pub negative_modes: usize,
    pub inside: bool,
}

/// Whether the configuration lies inside the first Gribov region.
pub fn gribov_check(field: &GaugeField) -> GribovReport {
    let lat = &field.lattice;
    let phi = -(divergence_operator(lat) * cov_deriv_operator(field));
    let sym = (&phi + phi.transpose()) * 0.5;
    let ns = lat.n_sites();
    let ng = lat.n_g();
    // orthonormal complement of the per-colour constants
    let mut proj = DMatrix::identity(lat.site_dim(), lat.site_dim());
    for c in 0..ng {
        let v = DVector::from_fn(lat.site_dim(), |k, _| if k % ng == c { 1.0 / (ns as f64).sqrt() } else { 0.0 });
        proj -= &v * v.transpose();
    }
    let (pv, pvecs) = sorted_symmetric_eigen(&proj);
    let basis: Vec<DVector<f64>> = (0..pv.len()).filter(|&i| pv[i] > 0.5).map(|i| pvecs.column(i).into_owned()).collect();
    let q = DMatrix::from_columns(&basis);
    let reduced = q.transpose() * sym * &q;
    let (vals, _) = sorted_symmetric_eigen(&reduced);
    let min_eigenvalue = vals.min();
    let negative_modes = vals.iter().filter(|&&v| v < -1e-10).count();
    GribovReport {
        min_eigenvalue,
        negative_modes,
        inside: negative_modes == 0,
    }
}
