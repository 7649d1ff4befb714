//! Symmetric matrices and their spectral calculus.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use libm::{fabs, sqrt};

/// Dense symmetric `D x D` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat {
    dim: usize,
    data: Vec<f64>,
}

/// Number of orthonormal coordinates of a symmetric `d x d` matrix.
pub const fn n_coords(d: usize) -> usize {
    d * (d + 1) / 2
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        SymMat {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c;
        }
        m
    }

    /// A `1 x 1` matrix.
    pub fn scalar(x: f64) -> Self {
        SymMat {
            dim: 1,
            data: vec![x],
        }
    }

    /// Build from rows, symmetrizing as `(a + a^T) / 2`.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            assert_eq!(rows[i].len(), dim, "matrix rows must be square");
            for k in 0..dim {
                m.data[i * dim + k] = 0.5 * (rows[i][k] + rows[k][i]);
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = *v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.dim + k]
    }

    /// Set entries `(i, k)` and `(k, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[i * self.dim + k] = v;
        self.data[k * self.dim + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(fabs(*v)))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> SymMat {
        SymMat {
            dim: self.dim,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &SymMat) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    /// Coordinates in the orthonormal basis `E_ii`, `(E_ik + E_ki)/sqrt 2`, `i < k`.
    pub fn write_coords(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), n_coords(self.dim));
        let mut c = 0;
        for i in 0..self.dim {
            out[c] = self.get(i, i);
            c += 1;
            for k in i + 1..self.dim {
                out[c] = core::f64::consts::SQRT_2 * self.get(i, k);
                c += 1;
            }
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut out = vec![0.0; n_coords(self.dim)];
        self.write_coords(&mut out);
        out
    }

    pub fn from_coords(dim: usize, z: &[f64]) -> SymMat {
        debug_assert_eq!(z.len(), n_coords(dim));
        let mut m = Self::zeros(dim);
        let mut c = 0;
        for i in 0..dim {
            m.data[i * dim + i] = z[c];
            c += 1;
            for k in i + 1..dim {
                m.set(i, k, z[c] / core::f64::consts::SQRT_2);
                c += 1;
            }
        }
        m
    }

    /// Eigen-decomposition: eigenvalues in decreasing order and the matching
    /// unit eigenvectors stored as columns of a row-major `D x D` array.
    pub fn eigh(&self) -> (Vec<f64>, Vec<f64>) {
        match self.dim {
            0 => (Vec::new(), Vec::new()),
            1 => (vec![self.data[0]], vec![1.0]),
            2 => eigh2(self.data[0], self.data[1], self.data[3]),
            _ => jacobi(self),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.dim {
            1 => vec![self.data[0]],
            2 => {
                let (l1, l2) = eig2_values(self.data[0], self.data[1], self.data[3]);
                vec![l1, l2]
            }
            _ => self.eigh().0,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self.dim {
            0 => 0.0,
            1 => self.data[0],
            2 => eig2_values(self.data[0], self.data[1], self.data[3]).1,
            _ => self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    /// `V diag(f(lambda)) V^T`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMat {
        if self.dim == 1 {
            return SymMat::scalar(f(self.data[0]));
        }
        let (vals, vecs) = self.eigh();
        let d = self.dim;
        let mut out = SymMat::zeros(d);
        for (e, lam) in vals.iter().enumerate() {
            let fl = f(*lam);
            if fl == 0.0 {
                continue;
            }
            for i in 0..d {
                let vi = vecs[i * d + e];
                for k in 0..d {
                    out.data[i * d + k] += fl * vi * vecs[k * d + e];
                }
            }
        }
        out
    }

    /// `sum_i f(lambda_i)`.
    pub fn trace_fn(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.eigenvalues().into_iter().map(f).sum()
    }

    /// Frobenius-nearest PSD matrix. A PSD input is returned bit-for-bit.
    pub fn project_psd(&self) -> SymMat {
        if self.dim == 1 {
            return SymMat::scalar(self.data[0].max(0.0));
        }
        if self.min_eigenvalue() >= 0.0 {
            return self.clone();
        }
        self.map_spectrum(|l| l.max(0.0))
    }
}

fn eig2_values(a: f64, b: f64, c: f64) -> (f64, f64) {
    let m = 0.5 * (a + c);
    let r = libm::hypot(0.5 * (a - c), b);
    (m + r, m - r)
}

fn eigh2(a: f64, b: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let (l1, l2) = eig2_values(a, b, c);
    let theta = 0.5 * libm::atan2(2.0 * b, a - c);
    let (s, co) = (libm::sin(theta), libm::cos(theta));
    // columns: (cos, sin) for l1, (-sin, cos) for l2
    (vec![l1, l2], vec![co, -s, s, co])
}

fn jacobi(m: &SymMat) -> (Vec<f64>, Vec<f64>) {
    let d = m.dim;
    let mut a = m.data.clone();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale = m.max_abs_entry().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&k| k != i).map(move |k| (i, k)))
            .map(|(i, k)| a[i * d + k] * a[i * d + k])
            .sum();
        if sqrt(off) <= 1e-15 * scale {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = tau.signum() / (fabs(tau) + sqrt(1.0 + tau * tau));
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| a[y * d + y].total_cmp(&a[x * d + x]));
    let vals = order.iter().map(|&e| a[e * d + e]).collect();
    let mut vecs = vec![0.0; d * d];
    for (new, &old) in order.iter().enumerate() {
        for i in 0..d {
            vecs[i * d + new] = v[i * d + old];
        }
    }
    (vals, vecs)
}

impl Add for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SymMat {
    type Output = SymMat;
    fn mul(self, c: f64) -> SymMat {
        self.scale(c)
    }
}

impl Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(m: &SymMat) -> SymMat {
        m.map_spectrum(|l| l)
    }

    #[test]
    fn coords_are_isometric() {
        let m = SymMat::from_rows(&[&[1.0, 2.0, -1.0], &[2.0, 0.5, 3.0], &[-1.0, 3.0, -2.0]]);
        let z = m.coords();
        let nz: f64 = z.iter().map(|v| v * v).sum();
        assert!((nz - m.dot(&m)).abs() < 1e-12);
        assert!((&SymMat::from_coords(3, &z) - &m).norm() < 1e-14);
    }

    #[test]
    fn two_by_two_spectrum() {
        let m = SymMat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let v = m.eigenvalues();
        assert!((v[0] - 3.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
        let r = reconstruct(&m);
        assert!((&r - &m).norm() < 1e-14);
    }

    #[test]
    fn jacobi_reconstructs() {
        let m = SymMat::from_rows(&[
            &[4.0, 1.0, 0.5, 0.0],
            &[1.0, -3.0, 0.2, 1.0],
            &[0.5, 0.2, 1.0, -0.7],
            &[0.0, 1.0, -0.7, 2.0],
        ]);
        let (vals, _) = m.eigh();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert!((vals.iter().sum::<f64>() - m.trace()).abs() < 1e-12);
        assert!((&reconstruct(&m) - &m).norm() < 1e-12);
    }

    #[test]
    fn psd_projection() {
        let m = SymMat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        let p = m.project_psd();
        // eigenvalues 3, -1 -> keep 3 along (1,1)/sqrt2
        let expect = SymMat::from_rows(&[&[1.5, 1.5], &[1.5, 1.5]]);
        assert!((&p - &expect).norm() < 1e-14);
        let psd = SymMat::from_rows(&[&[2.0, 0.3], &[0.3, 1.0]]);
        assert_eq!(psd.project_psd(), psd);
    }
}
