//! Compact semisimple Lie algebras given by structure constants.
//!
//! Index convention: `c.get(g, a, b)` is the structure constant with upper
//! index `g` and lower indices `a, b`, so that `[e_a, e_b] = c^g_{ab} e_g`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sorted_symmetric_eigen, Tensor3};

/// Absolute tolerance for algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct LieAlgebraSpec {
    dim: usize,
    c: Tensor3,
    k: DMatrix<f64>,
    k_inv: DMatrix<f64>,
    kk_scale: f64,
    #[serde(skip)]
    nonzero: Vec<(usize, usize, usize, f64)>,
}

impl LieAlgebraSpec {
    /// Validate structure constants and build the Cartan-Killing data.
    ///
    /// `kk_scale` is chosen so that the positive form `-k / kk_scale` has unit
    /// trace per dimension, which gives the identity for so(3) with the
    /// Levi-Civita basis.
    pub fn new(c: Tensor3) -> Result<Self> {
        let [n, n1, n2] = c.dims();
        if n == 0 || n1 != n || n2 != n {
            return Err(Error::Dimension(format!(
                "structure constants must be n x n x n, got {n} x {n1} x {n2}"
            )));
        }
        for g in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let v = c.get(g, a, b);
                    if !v.is_finite() {
                        return Err(Error::InvalidInput("non-finite structure constant".into()));
                    }
                    let r = v + c.get(g, b, a);
                    if r.abs() > IDENTITY_TOL {
                        return Err(Error::NotAntisymmetric {
                            gamma: g,
                            alpha: a,
                            beta: b,
                            residual: r,
                        });
                    }
                }
            }
        }
        let jacobi = jacobi_residual(&c);
        if jacobi > IDENTITY_TOL {
            return Err(Error::JacobiViolation { residual: jacobi });
        }
        let k = killing_form(&c);
        let (vals, _) = sorted_symmetric_eigen(&k);
        let largest = vals[n - 1];
        if largest >= -IDENTITY_TOL {
            return Err(Error::IndefiniteKilling {
                largest_eigenvalue: largest,
            });
        }
        let k_inv = k
            .clone()
            .try_inverse()
            .ok_or(Error::IndefiniteKilling { largest_eigenvalue: largest })?;
        let kk_scale = -k.trace() / n as f64;
        let mut nonzero = Vec::new();
        for g in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let v = c.get(g, a, b);
                    if v != 0.0 {
                        nonzero.push((g, a, b, v));
                    }
                }
            }
        }
        Ok(Self {
            dim: n,
            c,
            k,
            k_inv,
            kk_scale,
            nonzero,
        })
    }

    /// so(3) (equivalently su(2)) with `c^g_{ab} = eps_{gab}`.
    pub fn so3() -> Self {
        Self::new(levi_civita()).expect("so(3) is compact semisimple")
    }

    /// Look up a built-in algebra by name.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "so3" | "su2" => Ok(Self::so3()),
            other => Err(Error::InvalidInput(format!("unknown algebra `{other}`"))),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn c(&self, g: usize, a: usize, b: usize) -> f64 {
        self.c.get(g, a, b)
    }

    /// Nonzero structure constants as `(g, a, b, c^g_{ab})`.
    pub fn nonzero_constants(&self) -> &[(usize, usize, usize, f64)] {
        &self.nonzero
    }

    pub fn structure_constants(&self) -> &Tensor3 {
        &self.c
    }

    /// Raw Cartan-Killing form `k_{ab} = c^t_{ma} c^m_{tb}` (negative definite).
    pub fn k(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn k_inv(&self) -> &DMatrix<f64> {
        &self.k_inv
    }

    pub fn kk_scale(&self) -> f64 {
        self.kk_scale
    }

    /// Positive definite rescaling `-k / kk_scale`.
    pub fn k_hat(&self) -> DMatrix<f64> {
        &self.k * (-1.0 / self.kk_scale)
    }

    pub fn k_hat_inv(&self) -> DMatrix<f64> {
        &self.k_inv * (-self.kk_scale)
    }

    /// Adjoint matrix of `x`: `(ad_x)^g_b = c^g_{ab} x^a`.
    pub fn ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(g, a, b, v) in &self.nonzero {
            m[(g, b)] += v * x[a];
        }
        m
    }

    /// Bracket `[x, y]^g = c^g_{ab} x^a y^b`.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(g, a, b, v) in &self.nonzero {
            out[g] += v * x[a] * y[b];
        }
        out
    }

    /// Direct sum of `copies` copies of this algebra. Validity is inherited
    /// from the summand, so the quintic Jacobi scan is skipped.
    pub fn direct_sum(&self, copies: usize) -> Result<Self> {
        if copies == 0 {
            return Err(Error::InvalidInput("direct sum needs at least one copy".into()));
        }
        let n = self.dim;
        let m = n * copies;
        let mut c = Tensor3::zeros(m, m, m);
        let mut nonzero = Vec::with_capacity(self.nonzero.len() * copies);
        let mut k = DMatrix::zeros(m, m);
        let mut k_inv = DMatrix::zeros(m, m);
        for block in 0..copies {
            let o = block * n;
            for &(g, a, b, v) in &self.nonzero {
                c.set(o + g, o + a, o + b, v);
                nonzero.push((o + g, o + a, o + b, v));
            }
            k.view_mut((o, o), (n, n)).copy_from(&self.k);
            k_inv.view_mut((o, o), (n, n)).copy_from(&self.k_inv);
        }
        Ok(Self {
            dim: m,
            c,
            k,
            k_inv,
            kk_scale: self.kk_scale,
            nonzero,
        })
    }

    /// Replace the Cartan-Killing form, bypassing validation. Only used to
    /// exercise the antisymmetry check on corrupted data.
    pub fn with_k_unchecked(mut self, k: DMatrix<f64>) -> Self {
        self.k_inv = k.clone().try_inverse().unwrap_or_else(|| k.clone());
        self.k = k;
        self
    }
}

pub fn levi_civita() -> Tensor3 {
    Tensor3::from_fn(3, 3, 3, |i, j, k| {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    })
}

/// Validate raw structure constants and build the algebra.
pub fn make_algebra(c: Tensor3) -> Result<LieAlgebraSpec> {
    LieAlgebraSpec::new(c)
}

pub fn killing_form(c: &Tensor3) -> DMatrix<f64> {
    let n = c.dims()[0];
    DMatrix::from_fn(n, n, |a, b| {
        let mut s = 0.0;
        for t in 0..n {
            for m in 0..n {
                s += c.get(t, m, a) * c.get(m, t, b);
            }
        }
        s
    })
}

/// Max over free indices of the cyclic Jacobi sum.
pub fn jacobi_residual(c: &Tensor3) -> f64 {
    let n = c.dims()[0];
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            for g in 0..n {
                for s in 0..n {
                    let mut r = 0.0;
                    for m in 0..n {
                        r += c.get(m, a, b) * c.get(s, m, g)
                            + c.get(m, b, g) * c.get(s, m, a)
                            + c.get(m, g, a) * c.get(s, m, b);
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
    }
    worst
}

/// Max residual of `c^m_{sn} k^{ne} + c^e_{sn} k^{nm}` over all `s, m, e`.
pub fn ad_antisymmetry_residual(spec: &LieAlgebraSpec) -> f64 {
    let n = spec.dim();
    let ki = spec.k_inv();
    let mut worst = 0.0_f64;
    for s in 0..n {
        for m in 0..n {
            for e in 0..n {
                let mut r = 0.0;
                for v in 0..n {
                    r += spec.c(m, s, v) * ki[(v, e)] + spec.c(e, s, v) * ki[(v, m)];
                }
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// Whether the raised structure constants are antisymmetric in their upper pair.
pub fn ad_antisymmetry_check(spec: &LieAlgebraSpec) -> bool {
    ad_antisymmetry_residual(spec) < IDENTITY_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn so3_killing_form_is_minus_two() {
        let c = levi_civita();
        // brute-force contraction over every index tuple
        let mut k = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for t in 0..3 {
                    for m in 0..3 {
                        k[a][b] += c.get(t, m, a) * c.get(m, t, b);
                    }
                }
            }
        }
        let spec = LieAlgebraSpec::so3();
        for a in 0..3 {
            for b in 0..3 {
                let expect = if a == b { -2.0 } else { 0.0 };
                assert_eq!(k[a][b], expect);
                assert_eq!(spec.k()[(a, b)], expect);
            }
        }
        assert_eq!(spec.kk_scale(), 2.0);
        assert!((spec.k_hat() - DMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn abelian_is_rejected() {
        let err = make_algebra(Tensor3::zeros(3, 3, 3)).unwrap_err();
        assert!(matches!(err, Error::IndefiniteKilling { .. }));
    }

    #[test]
    fn single_sign_flip_is_not_antisymmetric() {
        let mut c = levi_civita();
        c.set(0, 1, 2, -1.0);
        assert!(matches!(make_algebra(c), Err(Error::NotAntisymmetric { .. })));
    }

    #[test]
    fn jacobi_violation_detected() {
        // antisymmetric but not a Lie algebra: only one bracket nonzero
        let mut c = Tensor3::zeros(3, 3, 3);
        c.set(0, 0, 1, 1.0);
        c.set(0, 1, 0, -1.0);
        c.set(1, 0, 2, 1.0);
        c.set(1, 2, 0, -1.0);
        assert!(jacobi_residual(&c) > 1e-3);
        assert!(matches!(make_algebra(c), Err(Error::JacobiViolation { .. })));
    }

    #[test]
    fn antisymmetry_identity_holds_for_so3_and_rescaled() {
        assert!(ad_antisymmetry_check(&LieAlgebraSpec::so3()));
        let mut c = levi_civita();
        for g in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    c.set(g, a, b, 2.0 * c.get(g, a, b));
                }
            }
        }
        let spec = make_algebra(c).unwrap();
        assert_eq!(spec.k()[(0, 0)], -8.0);
        assert!(ad_antisymmetry_check(&spec));
    }

    #[test]
    fn corrupted_k_fails_antisymmetry() {
        let mut k = LieAlgebraSpec::so3().k().clone();
        k[(0, 1)] = 1.0;
        let spec = LieAlgebraSpec::so3().with_k_unchecked(k);
        assert!(!ad_antisymmetry_check(&spec));
    }

    #[test]
    fn direct_sum_is_block_diagonal() {
        let s = LieAlgebraSpec::so3().direct_sum(2).unwrap();
        assert_eq!(s.dim(), 6);
        assert_eq!(s.c(3, 4, 5), 1.0);
        assert_eq!(s.c(0, 4, 5), 0.0);
        assert!((s.k_hat() - DMatrix::identity(6, 6)).norm() < 1e-14);
    }
}
