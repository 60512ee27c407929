//! Small dense linear algebra: row-major matrices, Cholesky for the `d×d`
//! ridge systems, and LU / Jacobi eigen routines used by the dense oracle.

use crate::error::{Error, Result};
use crate::Scalar;

/// Borrowed row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a, T> {
    rows: usize,
    cols: usize,
    data: &'a [T],
}

impl<'a, T: Scalar> MatRef<'a, T> {
    pub fn new(rows: usize, cols: usize, data: &'a [T]) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer does not match shape");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &'a [T] {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    /// `AᵀA`, accumulated row by row in index order.
    pub fn gram(&self) -> DenseMatrix<T> {
        let d = self.cols;
        let mut g = DenseMatrix::zeros(d, d);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..d {
                let ra = r[a];
                if ra == T::zero() {
                    continue;
                }
                let grow = &mut g.data[a * d..(a + 1) * d];
                for b in a..d {
                    grow[b] += ra * r[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                g.data[a * d + b] = g.data[b * d + a];
            }
        }
        g
    }

    /// `Aᵀx`.
    pub fn t_mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += v * xi;
            }
        }
        out
    }

    /// `A·w` into `out`.
    pub fn mul_vec_into(&self, w: &[T], out: &mut [T]) {
        assert_eq!(w.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = crate::scalar::dot(self.row(i), w);
        }
    }

    pub fn mul_vec(&self, w: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.mul_vec_into(w, &mut out);
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.to_vec(),
        }
    }
}

/// Owned row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn view(&self) -> MatRef<'_, T> {
        MatRef::new(self.rows, self.cols, &self.data)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] += v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in orow.iter_mut().zip(other.view().row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        self.view().mul_vec(x)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch("matrix sum shape mismatch".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::Singular);
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

/// Solves `A X = B` by Gaussian elimination with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let n = a.rows;
    if a.cols != n || b.rows != n {
        return Err(Error::DimensionMismatch("lu_solve shape mismatch".into()));
    }
    let mut a = a.clone();
    let mut x = b.clone();
    let k = b.cols;
    let scale = a.max_abs();
    for col in 0..n {
        let (piv, pval) = (col..n)
            .map(|r| (r, a.get(r, col).abs()))
            .fold((col, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pval <= scale * T::epsilon() * T::of_usize(n) || pval == T::zero() {
            return Err(Error::Singular);
        }
        if piv != col {
            for j in 0..n {
                a.data.swap(piv * n + j, col * n + j);
            }
            for j in 0..k {
                x.data.swap(piv * k + j, col * k + j);
            }
        }
        let d = a.get(col, col);
        for r in col + 1..n {
            let f = a.get(r, col) / d;
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                let v = a.get(col, j);
                a.data[r * n + j] -= f * v;
            }
            for j in 0..k {
                let v = x.get(col, j);
                x.data[r * k + j] -= f * v;
            }
        }
    }
    for col in (0..n).rev() {
        let d = a.get(col, col);
        for j in 0..k {
            let mut s = x.get(col, j);
            for c in col + 1..n {
                s -= a.get(col, c) * x.get(c, j);
            }
            x.set(col, j, s / d);
        }
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues ascending and the matching eigenvectors as columns.
pub fn symmetric_eigen<T: Scalar>(a: &DenseMatrix<T>) -> Result<(Vec<T>, DenseMatrix<T>)> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::DimensionMismatch("eigen needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let tol = T::epsilon() * T::lit(0.5);
    for _sweep in 0..100 {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let s = m.get(i, j) * m.get(i, j);
                total += s;
                if i != j {
                    off += s;
                }
            }
        }
        if off <= tol * tol * total || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m.get(a, a).partial_cmp(&m.get(b, b)).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| m.get(k, k)).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vecs.set(r, new, v.get(r, old));
        }
    }
    Ok((values, vecs))
}
