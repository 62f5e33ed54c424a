use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

/// Dense complex matrix with row-major storage.
///
/// Sizes in this crate are small (a handful of block dimensions), so the
/// representation favours clarity over cache tricks. Shape mismatches are
/// programming errors and panic; data-dependent failures return `Result`
/// from the routines in [`super::linalg`].
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        CMatrix { rows: r, cols: c, data }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Self {
        let conv: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        CMatrix::from_rows(&conv)
    }

    /// Diagonal matrix from real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m[(i, i)] = Complex64::new(x, 0.0);
        }
        m
    }

    pub fn scalar(value: Complex64) -> Self {
        let mut m = CMatrix::zeros(1, 1);
        m[(0, 0)] = value;
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn transpose(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Copy of the `height x width` block with upper-left corner `(row, col)`.
    pub fn block(&self, row: usize, col: usize, height: usize, width: usize) -> Self {
        assert!(row + height <= self.rows && col + width <= self.cols, "block out of range");
        CMatrix::from_fn(height, width, |i, j| self[(row + i, col + j)])
    }

    pub fn set_block(&mut self, row: usize, col: usize, b: &CMatrix) {
        assert!(row + b.rows <= self.rows && col + b.cols <= self.cols, "block out of range");
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(row + i, col + j)] = b[(i, j)];
            }
        }
    }

    pub fn column(&self, j: usize) -> Self {
        self.block(0, j, self.rows, 1)
    }

    pub fn hstack(parts: &[&CMatrix]) -> Self {
        assert!(!parts.is_empty());
        let rows = parts[0].rows;
        assert!(parts.iter().all(|p| p.rows == rows), "row count mismatch in hstack");
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut m = CMatrix::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            m.set_block(0, at, p);
            at += p.cols;
        }
        m
    }

    pub fn vstack(parts: &[&CMatrix]) -> Self {
        assert!(!parts.is_empty());
        let cols = parts[0].cols;
        assert!(parts.iter().all(|p| p.cols == cols), "column count mismatch in vstack");
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut m = CMatrix::zeros(rows, cols);
        let mut at = 0;
        for p in parts {
            m.set_block(at, 0, p);
            at += p.rows;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Max deviation from Hermitian symmetry, `max |m_ij - conj(m_ji)|`.
    pub fn herm_defect(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.herm_defect() <= tol * (1.0 + self.max_abs())
    }

    /// Hermitian part `(m + m*)/2`; exact symmetry for downstream solvers.
    pub fn hermitized(&self) -> Self {
        assert!(self.is_square());
        let adj = self.adjoint();
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = (self[(i, j)] + adj[(i, j)]) * 0.5;
            }
        }
        for i in 0..self.rows {
            m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        }
        m
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of {}x{}", self.rows, self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of {}x{}", self.rows, self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shape mismatch in add");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "shape mismatch in sub");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.map(|z| -z)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert!(self.cols == rhs.rows, "shape mismatch in mul: {}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols);
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mul_and_adjoint() {
        let a = CMatrix::from_rows(&[vec![c(1.0, 1.0), c(0.0, 2.0)], vec![c(3.0, 0.0), c(1.0, -1.0)]]);
        let id = CMatrix::identity(2);
        assert_eq!(&a * &id, a);
        let aa = &a.adjoint() * &a;
        // a* a is Hermitian by construction
        assert!(aa.is_hermitian(1e-14));
    }

    #[test]
    fn block_round_trip() {
        let m = CMatrix::from_fn(4, 6, |i, j| c((i * 10 + j) as f64, 0.0));
        let b = m.block(1, 2, 2, 3);
        assert_eq!(b[(0, 0)], c(12.0, 0.0));
        let mut z = CMatrix::zeros(4, 6);
        z.set_block(1, 2, &b);
        assert_eq!(z[(2, 4)], c(24.0, 0.0));
    }

    #[test]
    fn stack_shapes() {
        let a = CMatrix::identity(2);
        let b = CMatrix::zeros(2, 3);
        let h = CMatrix::hstack(&[&a, &b]);
        assert_eq!((h.rows(), h.cols()), (2, 5));
        let v = CMatrix::vstack(&[&a, &a]);
        assert_eq!((v.rows(), v.cols()), (4, 2));
    }

    #[test]
    fn hermitized_is_exact() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 0.3), c(2.0, 1.0)], vec![c(2.1, -1.0), c(4.0, -0.2)]]);
        let h = m.hermitized();
        assert_eq!(h.herm_defect(), 0.0);
        assert_eq!(h[(0, 0)].im, 0.0);
    }
}
