//! Symmetric matrices stored as a packed upper triangle.
//!
//! Second-order Volterra kernels are symmetric by construction: only the
//! entries with `i <= j` are stored, so `get(i, j) == get(j, i)` always holds.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    packed: Vec<T>,
}

/// Number of free entries of a symmetric `dim x dim` matrix.
pub const fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, packed: vec![T::zero(); packed_len(dim)] }
    }

    /// Builds from packed upper-triangle entries in row-major order
    /// `(0,0), (0,1), .., (0,d-1), (1,1), ..`.
    pub fn from_packed(dim: usize, packed: Vec<T>) -> Result<Self> {
        if packed.len() != packed_len(dim) {
            return Err(Error::Dimension(format!(
                "packed symmetric {dim}x{dim} matrix needs {} entries, got {}",
                packed_len(dim),
                packed.len()
            )));
        }
        Ok(Self { dim, packed })
    }

    /// Builds from a full row-major matrix, rejecting any asymmetry.
    pub fn from_full(dim: usize, full: &[T]) -> Result<Self> {
        if full.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                full.len()
            )));
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let gap = (full[i * dim + j] - full[j * dim + i]).abs();
                if gap != T::zero() {
                    return Err(Error::Asymmetric { i, j, gap: gap.f64() });
                }
            }
        }
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                out.set(i, j, full[i * dim + j]);
            }
        }
        Ok(out)
    }

    /// Symmetric part `(A + A^T) / 2` of an arbitrary square matrix.
    pub fn symmetrized(dim: usize, full: &[T]) -> Result<Self> {
        if full.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                full.len()
            )));
        }
        let half = T::of(0.5);
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                out.set(i, j, (full[i * dim + j] + full[j * dim + i]) * half);
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * self.dim - a * (a + 1) / 2 + b
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.packed[self.offset(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.offset(i, j);
        self.packed[k] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        let k = self.offset(i, j);
        self.packed[k] += v;
    }

    pub fn packed(&self) -> &[T] {
        &self.packed
    }

    pub fn packed_mut(&mut self) -> &mut [T] {
        &mut self.packed
    }

    pub fn to_full(&self) -> Vec<T> {
        let d = self.dim;
        let mut full = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                full[i * d + j] = self.get(i, j);
            }
        }
        full
    }

    pub fn diag(&self, i: usize) -> T {
        self.get(i, i)
    }

    /// `out = H x`.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        let d = self.dim;
        for o in out.iter_mut() {
            *o = T::zero();
        }
        let mut k = 0;
        for i in 0..d {
            out[i] += self.packed[k] * x[i];
            k += 1;
            for j in (i + 1)..d {
                let h = self.packed[k];
                out[i] += h * x[j];
                out[j] += h * x[i];
                k += 1;
            }
        }
    }

    /// `x^T H x` using the full double sum.
    pub fn quad_form(&self, x: &[T]) -> T {
        let d = self.dim;
        let mut acc = T::zero();
        let mut k = 0;
        let two = T::of(2.0);
        for i in 0..d {
            acc += self.packed[k] * x[i] * x[i];
            k += 1;
            for j in (i + 1)..d {
                acc += two * self.packed[k] * x[i] * x[j];
                k += 1;
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.packed.iter().all(|v| *v == T::zero())
    }
}
