//! Dense helpers shared by the geometry, dynamics and lattice code: a small
//! rank-3 tensor, conditioned inverses, truncated pseudo-inverses and
//! fourth-order finite differences.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::ser::{Serialize, SerializeSeq, Serializer};

/// Condition number above which a matrix is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Dense rank-3 array stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Self {
            dims: [d0, d1, d2],
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn from_fn(d0: usize, d1: usize, d2: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(d0, d1, d2);
        for i in 0..d0 {
            for j in 0..d1 {
                for k in 0..d2 {
                    t.data[(i * d1 + j) * d2 + k] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Stack matrices `m[i]` (each `d1 x d2`) along the first axis.
    pub fn from_slices(slices: &[DMatrix<f64>]) -> Self {
        let d0 = slices.len();
        let (d1, d2) = slices.first().map_or((0, 0), |m| m.shape());
        Self::from_fn(d0, d1, d2, |i, j, k| slices[i][(j, k)])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = (i * self.dims[1] + j) * self.dims[2] + k;
        self.data[idx] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = (i * self.dims[1] + j) * self.dims[2] + k;
        self.data[idx] += v;
    }

    /// The `d1 x d2` matrix at fixed first index.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.dims[1], self.dims[2], |j, k| self.get(i, j, k))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims, other.dims);
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Contract the second and third slots with vectors: `out_i = T_ijk u_j v_k`.
    pub fn contract_last_two(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.dims[0], |i, _| {
            let mut s = 0.0;
            for j in 0..self.dims[1] {
                let uj = u[j];
                if uj == 0.0 {
                    continue;
                }
                for k in 0..self.dims[2] {
                    s += self.get(i, j, k) * uj * v[k];
                }
            }
            s
        })
    }
}

impl Serialize for Tensor3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dims[0]))?;
        for i in 0..self.dims[0] {
            let rows: Vec<Vec<f64>> = (0..self.dims[1])
                .map(|j| (0..self.dims[2]).map(|k| self.get(i, j, k)).collect())
                .collect();
            seq.serialize_element(&rows)?;
        }
        seq.end()
    }
}

/// Ratio of extreme singular values; infinite when the smallest vanishes.
/// Copy of `m` with entries negligible against its largest one set to zero.
/// The SVD routine can lose accuracy on matrices mixing entries tens of
/// orders of magnitude apart.
fn flush_tiny(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cut = 1e-30 * m.amax();
    m.map(|x| if x.abs() < cut { 0.0 } else { x })
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = flush_tiny(m).svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse together with the condition number it was computed at, or `None`
/// when the condition exceeds [`SINGULAR_CONDITION`].
pub fn checked_inverse(m: &DMatrix<f64>) -> (Option<DMatrix<f64>>, f64) {
    let cond = condition_number(m);
    if !cond.is_finite() || cond > SINGULAR_CONDITION {
        return (None, cond);
    }
    (m.clone().lu().try_inverse(), cond)
}

/// Moore-Penrose pseudo-inverse with singular values below `rel_tol * sigma_max`
/// truncated. Returns the inverse and the retained rank.
pub fn pinv_truncated(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (DMatrix::zeros(c, r), 0);
    }
    let svd = flush_tiny(m).svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let smax = svd.singular_values.max();
    let cut = rel_tol * smax;
    let mut out = DMatrix::zeros(c, r);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            out += (vt.row(i).transpose() * u.column(i).transpose()) / s;
        }
    }
    (out, rank)
}

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition,
/// dropping eigenvalues with magnitude at most `rel_tol` times the largest.
pub fn pinv_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let cut = rel_tol * lmax;
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() > cut && l != 0.0 {
            rank += 1;
            let v = eig.eigenvectors.column(i);
            out += v * v.transpose() / l;
        }
    }
    (out, rank)
}

/// Pseudo-inverse that drops exactly the `deflate` smallest singular values,
/// for matrices with a known structural rank deficiency. Also returns the
/// condition number of the retained part.
pub fn pinv_deflated(m: &DMatrix<f64>, deflate: usize) -> (DMatrix<f64>, f64) {
    let (r, c) = m.shape();
    let svd = flush_tiny(m).svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep = order.len().saturating_sub(deflate);
    let mut out = DMatrix::zeros(c, r);
    if keep == 0 {
        return (out, 1.0);
    }
    for &i in &order[..keep] {
        let s = svd.singular_values[i];
        out += (vt.row(i).transpose() * u.column(i).transpose()) / s;
    }
    let smax = svd.singular_values[order[0]];
    let smin = svd.singular_values[order[keep - 1]];
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    (out, cond)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]]);
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Flip the sign of `v` so that its largest-magnitude entry is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for x in v.iter() {
        if x.abs() > best + 1e-14 {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.neg_mut();
    }
}

/// Symmetric square root and inverse square root of a positive definite matrix.
pub fn spd_sqrt_pair(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (vals, vecs) = sorted_symmetric_eigen(m);
    let s = DMatrix::from_diagonal(&vals.map(f64::sqrt));
    let si = DMatrix::from_diagonal(&vals.map(|x| 1.0 / x.sqrt()));
    (&vecs * s * vecs.transpose(), &vecs * si * vecs.transpose())
}

/// Fourth-order central difference of a matrix-valued map along coordinate `dir`.
pub fn fd_matrix<F>(f: &F, q: &DVector<f64>, dir: usize, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let shifted = |s: f64| {
        let mut x = q.clone();
        x[dir] += s * h;
        f(&x)
    };
    (shifted(-2.0) - shifted(2.0) + (shifted(1.0) - shifted(-1.0)) * 8.0) / (12.0 * h)
}

/// Fourth-order central difference of a vector-valued map along coordinate `dir`.
pub fn fd_vector<F>(f: &F, q: &DVector<f64>, dir: usize, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let shifted = |s: f64| {
        let mut x = q.clone();
        x[dir] += s * h;
        f(&x)
    };
    (shifted(-2.0) - shifted(2.0) + (shifted(1.0) - shifted(-1.0)) * 8.0) / (12.0 * h)
}

/// Fourth-order central difference of a vector-valued map along an arbitrary direction.
pub fn fd_vector_along<F>(f: &F, q: &DVector<f64>, dir: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let at = |s: f64| f(&(q + dir * (s * h)));
    (at(-2.0) - at(2.0) + (at(1.0) - at(-1.0)) * 8.0) / (12.0 * h)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_rank_deficient_projector_is_itself() {
        let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let (pi, rank) = pinv_truncated(&p, 1e-10);
        assert_eq!(rank, 2);
        assert!(max_abs(&(pi - &p)) < 1e-14);
    }

    #[test]
    fn deflated_pinv_drops_requested_modes() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0, 1e-3]));
        let (pi, cond) = pinv_deflated(&m, 1);
        assert!((pi[(0, 0)] - 0.25).abs() < 1e-15);
        assert_eq!(pi[(2, 2)], 0.0);
        assert!((cond - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fd_matches_polynomial_derivative() {
        let f = |x: &DVector<f64>| DVector::from_vec(vec![x[0].powi(3) * x[1], x[1].sin()]);
        let q = DVector::from_vec(vec![0.7, -0.3]);
        let d0 = fd_vector(&f, &q, 0, 1e-3);
        assert!((d0[0] - 3.0 * 0.49 * -0.3).abs() < 1e-10);
        let d1 = fd_vector(&f, &q, 1, 1e-3);
        assert!((d1[1] - (-0.3_f64).cos()).abs() < 1e-10);
    }

    #[test]
    fn canonical_sign_makes_largest_entry_positive() {
        let mut v = DVector::from_vec(vec![0.1, -0.9, 0.3]);
        canonical_sign(&mut v);
        assert!(v[1] > 0.0);
    }
}
