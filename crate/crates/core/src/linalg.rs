//! Dense complex matrices and tuples of unitaries.
//!
//! Entries are stored row-major. Products go through `matrixmultiply`'s
//! complex GEMM; adjoints are taken as strided views of an entrywise
//! conjugate so that the hot loops never transpose explicitly.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Default entrywise unitarity tolerance applied at construction.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let dim = entries.len();
        let mut m = Self::zeros(dim, dim);
        for (i, &d) in entries.iter().enumerate() {
            m.data[i * dim + i] = d;
        }
        m
    }

    pub fn from_real_diag(entries: &[f64]) -> Self {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&c)
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("empty matrix {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: C64) {
        self.data[r * self.cols + c] = value;
    }

    pub fn scale(&self, s: C64) -> Self {
        let data = self.data.iter().map(|&z| z * s).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(ComplexMatrix { rows: self.rows, cols: self.cols, data })
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Matrix product `self * other`.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        gemm(
            ONE,
            self.view(),
            other.view(),
            ZERO,
            &mut out.data,
            self.rows,
            other.cols,
        );
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    /// Entrywise complex conjugate.
    pub fn conjugate(&self) -> Self {
        let data = self.data.iter().map(|z| z.conj()).collect();
        ComplexMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::Shape(format!(
                "trace of non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok((0..self.rows).map(|i| self.data[i * self.cols + i]).sum())
    }

    /// `tr(a) / N`, the unique tracial state on `M_N`.
    pub fn normalized_trace(&self) -> Result<C64> {
        Ok(self.trace()? / self.rows as f64)
    }

    /// Row-major view usable as a GEMM operand.
    pub(crate) fn view(&self) -> MatView<'_> {
        MatView::new(&self.data, self.rows, self.cols)
    }

    /// Adjoint of `self` as a strided view of `conj`, which must hold the
    /// entrywise conjugate of `self`.
    pub(crate) fn adjoint_view<'a>(&self, conj: &'a ComplexMatrix) -> MatView<'a> {
        debug_assert_eq!((self.rows, self.cols), (conj.rows, conj.cols));
        MatView::adjoint_of(&conj.data, conj.rows, conj.cols)
    }
}

/// Strided read-only matrix operand.
#[derive(Clone, Copy)]
pub(crate) struct MatView<'a> {
    data: &'a [C64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> MatView<'a> {
    pub(crate) fn new(data: &'a [C64], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        MatView { data, rows, cols, row_stride: cols as isize, col_stride: 1 }
    }

    /// Transposed view of a row-major `rows x cols` buffer that already holds
    /// conjugated entries, i.e. the adjoint of the unconjugated matrix.
    pub(crate) fn adjoint_of(conj_data: &'a [C64], rows: usize, cols: usize) -> Self {
        assert_eq!(conj_data.len(), rows * cols);
        MatView {
            data: conj_data,
            rows: cols,
            cols: rows,
            row_stride: 1,
            col_stride: cols as isize,
        }
    }
}

/// `c <- alpha * a * b + beta * c` with `c` row-major `m x n`.
pub(crate) fn gemm(
    alpha: C64,
    a: MatView<'_>,
    b: MatView<'_>,
    beta: C64,
    c: &mut [C64],
    m: usize,
    n: usize,
) {
    assert_eq!(a.rows, m);
    assert_eq!(b.cols, n);
    assert_eq!(a.cols, b.rows);
    assert_eq!(c.len(), m * n);
    let k = a.cols;
    // SAFETY: Complex64 is #[repr(C)] { re, im }, layout-identical to [f64; 2].
    // All strides and extents were checked against the slice lengths above.
    unsafe {
        matrixmultiply::zgemm(
            matrixmultiply::CGemmOption::Standard,
            matrixmultiply::CGemmOption::Standard,
            m,
            k,
            n,
            [alpha.re, alpha.im],
            a.data.as_ptr() as *const [f64; 2],
            a.row_stride,
            a.col_stride,
            b.data.as_ptr() as *const [f64; 2],
            b.row_stride,
            b.col_stride,
            [beta.re, beta.im],
            c.as_mut_ptr() as *mut [f64; 2],
            n as isize,
            1,
        );
    }
}

/// `sum_{ij} conj(x_ij) y_ij`, the Hilbert–Schmidt inner product `tr(x* y)`.
pub fn hs_inner(x: &[C64], y: &[C64]) -> C64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn hs_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `tr(a * b)` for square `a`, `b` of equal size in O(N^2).
pub fn trace_of_product(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    let n = a.rows;
    debug_assert!(a.is_square() && b.is_square() && b.rows == n);
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a.data[i * n + j] * b.data[j * n + i];
        }
    }
    acc
}

/// Entrywise max of `|u u* - I|`.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let conj = u.conjugate();
    let mut prod = ComplexMatrix::zeros(u.rows, u.rows);
    gemm(ONE, u.view(), u.adjoint_view(&conj), ZERO, &mut prod.data, u.rows, u.rows);
    for i in 0..u.rows {
        prod.data[i * u.rows + i] -= ONE;
    }
    prod.max_abs()
}

/// An `n`-tuple of `N x N` unitaries with a free-form provenance label.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryTuple {
    dim: usize,
    matrices: Vec<ComplexMatrix>,
    label: String,
}

impl UnitaryTuple {
    /// Validates shapes and unitarity at [`UNITARY_TOL`].
    pub fn new(matrices: Vec<ComplexMatrix>, label: impl Into<String>) -> Result<Self> {
        Self::with_tolerance(matrices, label, UNITARY_TOL)
    }

    pub fn with_tolerance(
        matrices: Vec<ComplexMatrix>,
        label: impl Into<String>,
        tol: f64,
    ) -> Result<Self> {
        let tuple = Self::unchecked(matrices, label)?;
        let check = check_unitary(&tuple, tol);
        if !check.unitary {
            return Err(Error::NotUnitary { defect: check.max_defect, tol });
        }
        Ok(tuple)
    }

    /// Shape-checked but not unitarity-checked; used for diagnostics on
    /// corrupt input and by tests that need non-unitary tuples.
    pub fn unchecked(matrices: Vec<ComplexMatrix>, label: impl Into<String>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Shape("tuple must contain at least one matrix".into()))?;
        let dim = first.rows;
        for (i, m) in matrices.iter().enumerate() {
            if m.rows != dim || m.cols != dim {
                return Err(Error::Shape(format!(
                    "matrix {i} is {}x{}, expected {dim}x{dim}",
                    m.rows, m.cols
                )));
            }
        }
        Ok(UnitaryTuple { dim, matrices, label: label.into() })
    }

    pub fn n(&self) -> usize {
        self.matrices.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrices(&self) -> &[ComplexMatrix] {
        &self.matrices
    }

    pub fn matrix(&self, i: usize) -> &ComplexMatrix {
        &self.matrices[i]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Applies `f` to every matrix; the result is re-validated.
    pub fn map(&self, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Result<Self> {
        Self::new(self.matrices.iter().map(f).collect(), self.label.clone())
    }

    pub fn conjugate(&self) -> Self {
        UnitaryTuple {
            dim: self.dim,
            matrices: self.matrices.iter().map(ComplexMatrix::conjugate).collect(),
            label: self.label.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitarityCheck {
    pub unitary: bool,
    pub max_defect: f64,
}

pub fn check_unitary(t: &UnitaryTuple, tol: f64) -> UnitarityCheck {
    let max_defect = t.matrices.iter().map(unitarity_defect).fold(0.0, f64::max);
    UnitarityCheck { unitary: max_defect <= tol, max_defect }
}
