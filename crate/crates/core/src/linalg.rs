//! Small dense complex linear algebra: Hermitian matrices up to a few dozen
//! rows, which is all the per-frequency FCP and MVDR problems need.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{bail, Result};
use crate::math;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_rows(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            bail!(ShapeMismatch, "expected {} entries for a {n}x{n} matrix, got {}", n * n, data.len());
        }
        Ok(Self { n, data })
    }

    /// `v vᴴ`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        m.add_outer(v, 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// `self += scale · v vᴴ`, touching the lower triangle and mirroring.
    pub fn add_outer(&mut self, v: &[Complex64], scale: f64) {
        debug_assert_eq!(v.len(), self.n);
        let n = self.n;
        for i in 0..n {
            let vi = v[i] * scale;
            for (j, vj) in v.iter().enumerate().take(i + 1) {
                self.data[i * n + j] += vi * vj.conj();
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                self.data[i * n + j] = self.data[j * n + i].conj();
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Real part of the trace; for Hermitian matrices this is the trace.
    pub fn trace_re(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)].re).sum()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.n {
            self[(i, i)] += value;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n).map(|i| self.data[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `xᴴ A x`, real part.
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        dot(x, &self.matvec(x)).re
    }

    /// Largest `|a_ij − conj(a_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max(math::abs(self[(i, j)] - self[(j, i)].conj()));
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> f64 {
        math::sqrt(self.data.iter().map(|z| math::norm_sqr(*z)).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}

/// `xᴴ y`.
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    math::sqrt(x.iter().map(|z| math::norm_sqr(*z)).sum())
}

/// Cholesky factor `A = L Lᴴ` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: CMatrix,
}

impl Cholesky {
    /// Fails when a pivot is not strictly positive, i.e. the matrix is not
    /// numerically positive definite.
    pub fn factor(a: &CMatrix) -> Result<Self> {
        let n = a.dim();
        let mut l = CMatrix::zeros(n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= math::norm_sqr(l[(j, k)]);
            }
            if !(d > 0.0) || !d.is_finite() {
                bail!(Numerical, "matrix is not positive definite (pivot {j} = {d:e})");
            }
            let d = math::sqrt(d);
            l[(j, j)] = Complex64::new(d, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.l.dim();
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * y[k];
            }
            y[i] = s / l[(i, i)].re;
        }
        y
    }
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` (as `vectors[k]`) pairs with `values[k]`; unit norm.
    pub vectors: Vec<Vec<Complex64>>,
}

/// Cyclic complex Jacobi. Each rotation first removes the phase of the
/// pivot, then applies the real symmetric Jacobi rotation.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    if !a.is_finite() {
        bail!(Numerical, "non-finite matrix entries");
    }
    let n = a.dim();
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
    }
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm();
    if scale == 0.0 {
        return Ok(HermitianEigen {
            values: vec![0.0; n],
            vectors: (0..n)
                .map(|k| (0..n).map(|i| if i == k { Complex64::new(1.0, 0.0) } else { ZERO }).collect())
                .collect(),
        });
    }

    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += math::norm_sqr(m[(i, j)]);
            }
        }
        if math::sqrt(off) <= 1e-16 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = math::abs(apq);
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let (app, aqq) = (m[(p, p)].re, m[(q, q)].re);
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + math::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + math::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                // J = [[c, s], [-s·conj(phase), c·conj(phase)]] on (p, q).
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for k in 0..n {
                    let (akp, akq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = akp * c + akq * jqp;
                    m[(k, q)] = akp * s + akq * jqq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = apk * c + aqk * jqp.conj();
                    m[(q, k)] = apk * s + aqk * jqq.conj();
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * c + vkq * jqp;
                    v[(k, q)] = vkp * s + vkq * jqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|i| v[(i, k)]).collect()).collect();
    Ok(HermitianEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn cholesky_solves_small_system() {
        let a = CMatrix::from_rows(2, vec![c(4.0, 0.0), c(1.0, -1.0), c(1.0, 1.0), c(3.0, 0.0)]).unwrap();
        let x = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        let b = a.matvec(&x);
        let got = Cholesky::factor(&a).unwrap().solve(&b);
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-14);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(Cholesky::factor(&a).is_err());
        assert!(Cholesky::factor(&CMatrix::zeros(2)).is_err());
    }

    #[test]
    fn jacobi_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let a = CMatrix::from_rows(2, vec![c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]).unwrap();
        let e = hermitian_eigen(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] - 3.0).abs() < 1e-14);
        for (k, vec) in e.vectors.iter().enumerate() {
            let av = a.matvec(vec);
            for i in 0..2 {
                assert!((av[i] - vec[i] * e.values[k]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_zero_matrix() {
        let e = hermitian_eigen(&CMatrix::zeros(3)).unwrap();
        assert_eq!(e.values, vec![0.0; 3]);
    }

    #[test]
    fn outer_is_hermitian() {
        let m = CMatrix::outer(&[c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(m[(0, 1)], c(0.0, -1.0));
        assert_eq!(m[(1, 0)], c(0.0, 1.0));
        assert_eq!(m.hermitian_defect(), 0.0);
    }
}
