//! Row-major matrix with gemm hooks.

use alloc::vec::Vec;

use crate::numeric::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: alloc::vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// self += other, elementwise.
    pub fn add_assign(&mut self, other: &Mat<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }
}

/// Whether an operand enters the product transposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

/// c = alpha * op(a) * op(b) + beta * c.
pub fn gemm<T: Real>(alpha: T, a: &Mat<T>, ta: Op, b: &Mat<T>, tb: Op, beta: T, c: &mut Mat<T>) {
    let (m, ka, rsa, csa) = match ta {
        Op::N => (a.rows, a.cols, a.cols as isize, 1),
        Op::T => (a.cols, a.rows, 1, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match tb {
        Op::N => (b.rows, b.cols, b.cols as isize, 1),
        Op::T => (b.cols, b.rows, 1, b.cols as isize),
    };
    assert_eq!(ka, kb, "inner dims");
    assert_eq!((c.rows, c.cols), (m, n), "output shape");
    if m == 0 || n == 0 {
        return;
    }
    unsafe {
        T::gemm(
            m,
            ka,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

/// Dot product of equal-length slices.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Mat<f64> {
        Mat::from_vec(rows, cols, v.to_vec())
    }

    #[test]
    fn gemm_matches_hand_product() {
        let a = m(2, 3, &[1., 2., 3., 4., 5., 6.]);
        let b = m(3, 2, &[7., 8., 9., 10., 11., 12.]);
        let mut c = Mat::zeros(2, 2);
        gemm(1.0, &a, Op::N, &b, Op::N, 0.0, &mut c);
        assert_eq!(c.data, vec![58., 64., 139., 154.]);
    }

    #[test]
    fn gemm_transpose_variants() {
        let a = m(2, 3, &[1., 2., 3., 4., 5., 6.]);
        // a^T a = 3x3
        let mut c = Mat::zeros(3, 3);
        gemm(1.0, &a, Op::T, &a, Op::N, 0.0, &mut c);
        assert_eq!(c.at(0, 0), 17.0);
        assert_eq!(c.at(2, 2), 45.0);
        assert_eq!(c.at(0, 2), 27.0);
        // a a^T = 2x2
        let mut d = Mat::zeros(2, 2);
        gemm(1.0, &a, Op::N, &a, Op::T, 0.0, &mut d);
        assert_eq!(d.data, vec![14., 32., 32., 77.]);
    }

    #[test]
    fn gemm_accumulates_with_beta() {
        let a = m(1, 1, &[2.0]);
        let mut c = m(1, 1, &[10.0]);
        gemm(3.0, &a, Op::N, &a, Op::N, 1.0, &mut c);
        assert_eq!(c.data, vec![22.0]);
    }
}
