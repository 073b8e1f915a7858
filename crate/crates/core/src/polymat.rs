//! Polynomial matrices in the delay variable `w = z⁻¹`.
//!
//! A [`PolynomialMatrix`] stores real coefficient matrices `C₀, C₁, …, C_d`
//! with `P(z) = Σ_k C_k z^{-k}`. Polynomials written in ascending powers of
//! `z` (as in `A(z) = A₀ z^p + … + A_p`) are converted on construction via
//! [`PolynomialMatrix::from_z_form`]; the common `z^p` factor cancels in every
//! quotient `A⁻¹B` built from such pairs.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{max_abs, modulus, CMatrix, Real};

/// Matrix polynomial `Σ_k C_k z^{-k}` with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMatrix<T: Real> {
    rows: usize,
    cols: usize,
    coeffs: Vec<DMatrix<T>>,
}

/// Binary operation selector for [`poly_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Mul,
}

impl<T: Real> PolynomialMatrix<T> {
    /// Builds a polynomial matrix from its coefficient list (coefficient of
    /// `z^{-k}` at position `k`). Trailing all-zero coefficients are trimmed.
    pub fn new(coeffs: Vec<DMatrix<T>>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Dimension("empty coefficient list".into()))?;
        let (rows, cols) = first.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("polynomial matrix must be at least 1x1".into()));
        }
        if let Some((k, c)) = coeffs.iter().enumerate().find(|(_, c)| c.shape() != (rows, cols)) {
            return Err(Error::Dimension(format!(
                "coefficient {k} has shape {:?}, expected {:?}",
                c.shape(),
                (rows, cols)
            )));
        }
        let mut p = Self { rows, cols, coeffs };
        p.trim_exact();
        Ok(p)
    }

    /// Constant polynomial matrix.
    pub fn constant(c: DMatrix<T>) -> Self {
        Self::new(vec![c]).expect("nonempty constant matrix")
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    /// 1×1 polynomial from scalar coefficients in powers of `z⁻¹`.
    pub fn scalar(coeffs: &[T]) -> Self {
        let c = if coeffs.is_empty() { vec![T::zero()] } else { coeffs.to_vec() };
        Self::new(c.into_iter().map(|x| DMatrix::from_element(1, 1, x)).collect())
            .expect("scalar polynomial")
    }

    /// Builds a matrix from per-entry scalar polynomials (powers of `z⁻¹`).
    pub fn from_entries(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> Vec<T>) -> Result<Self> {
        let polys: Vec<Vec<T>> = (0..rows * cols).map(|idx| entry(idx / cols, idx % cols)).collect();
        let len = polys.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let coeffs = (0..len)
            .map(|k| {
                DMatrix::from_fn(rows, cols, |i, j| polys[i * cols + j].get(k).copied().unwrap_or_else(T::zero))
            })
            .collect();
        Self::new(coeffs)
    }

    /// Converts a polynomial given in descending powers of `z`,
    /// `D₀ z^p + D₁ z^{p-1} + … + D_p`, into the delay convention by dividing
    /// by `z^p`: the result is `D₀ + D₁ z⁻¹ + … + D_p z^{-p}`.
    pub fn from_z_form(descending: Vec<DMatrix<T>>) -> Result<Self> {
        Self::new(descending)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[DMatrix<T>] {
        &self.coeffs
    }

    /// Coefficient of `z^{-k}`; zero beyond the degree.
    pub fn coeff(&self, k: usize) -> DMatrix<T> {
        self.coeffs.get(k).cloned().unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols))
    }

    /// Scalar polynomial in entry `(i, j)`, ascending powers of `z⁻¹`.
    pub fn entry(&self, i: usize, j: usize) -> Vec<T> {
        let mut e: Vec<T> = self.coeffs.iter().map(|c| c[(i, j)]).collect();
        trim_scalar(&mut e);
        e
    }

    pub fn is_zero(&self) -> bool {
        self.degree() == 0 && self.coeffs[0].iter().all(|x| *x == T::zero())
    }

    /// Largest coefficient magnitude over all lags.
    pub fn max_coeff_abs(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, c| acc.max(max_abs(c)))
    }

    fn trim_exact(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.iter().all(|x| *x == T::zero())) {
            self.coeffs.pop();
        }
    }

    /// Drops trailing coefficients whose magnitude is at most `tol`.
    pub fn trimmed(&self, tol: T) -> Self {
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| max_abs(c) <= tol) {
            coeffs.pop();
        }
        Self { rows: self.rows, cols: self.cols, coeffs }
    }

    /// Evaluates `Σ_k C_k z^{-k}` (Horner in `z⁻¹`).
    pub fn eval(&self, z: Complex<T>) -> Result<CMatrix<T>> {
        if modulus(z) == T::zero() {
            return Err(Error::Domain("evaluation pole at origin".into()));
        }
        let w = z.inv();
        let mut acc = CMatrix::<T>::zeros(self.rows, self.cols);
        for c in self.coeffs.iter().rev() {
            acc *= w;
            acc.zip_apply(c, |a, x| *a += Complex::new(x, T::zero()));
        }
        Ok(acc)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!("cannot add {:?} and {:?}", self.shape(), other.shape())));
        }
        let len = self.coeffs.len().max(other.coeffs.len());
        Self::new((0..len).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    pub fn scale(&self, s: T) -> Self {
        let mut p = Self { rows: self.rows, cols: self.cols, coeffs: self.coeffs.iter().map(|c| c * s).collect() };
        p.trim_exact();
        p
    }

    /// Cauchy product of coefficient lists.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let len = self.coeffs.len() + other.coeffs.len() - 1;
        let mut out = vec![DMatrix::zeros(self.rows, other.cols); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    /// Left multiplication by a constant matrix.
    pub fn premul(&self, m: &DMatrix<T>) -> Result<Self> {
        self.premul_poly(&Self::constant(m.clone()))
    }

    fn premul_poly(&self, m: &Self) -> Result<Self> {
        m.mul(self)
    }

    /// Right multiplication by a constant matrix.
    pub fn postmul(&self, m: &DMatrix<T>) -> Result<Self> {
        self.mul(&Self::constant(m.clone()))
    }

    pub fn transpose(&self) -> Self {
        Self { rows: self.cols, cols: self.rows, coeffs: self.coeffs.iter().map(|c| c.transpose()).collect() }
    }

    /// Multiplies by `z^{-s}`.
    pub fn delay(&self, s: usize) -> Self {
        let mut coeffs = vec![DMatrix::zeros(self.rows, self.cols); s];
        coeffs.extend(self.coeffs.iter().cloned());
        let mut p = Self { rows: self.rows, cols: self.cols, coeffs };
        p.trim_exact();
        p
    }

    fn entry_grid(&self) -> Vec<Vec<Vec<T>>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// Determinant as a scalar polynomial in `z⁻¹`.
    ///
    /// Cofactor expansion up to 4×4, fraction-free (Bareiss) elimination
    /// over polynomial entries above that.
    pub fn det(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Dimension(format!("determinant of non-square {:?}", self.shape())));
        }
        let grid = self.entry_grid();
        let d = if self.rows <= 4 { cofactor_det(&grid) } else { bareiss_det(grid) };
        Ok(Self::scalar(&d))
    }

    /// Classical adjugate `adj(P)` with `P · adj(P) = det(P) · I`.
    pub fn adjugate(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Dimension(format!("adjugate of non-square {:?}", self.shape())));
        }
        let n = self.rows;
        if n == 1 {
            return Ok(Self::identity(1));
        }
        let grid = self.entry_grid();
        let mut adj = vec![vec![vec![T::zero()]; n]; n];
        for (i, adj_row) in adj.iter_mut().enumerate() {
            for (j, slot) in adj_row.iter_mut().enumerate() {
                // adj[i][j] = (-1)^{i+j} det(minor with row j and column i removed)
                let minor: Vec<Vec<Vec<T>>> = grid
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != j)
                    .map(|(_, row)| row.iter().enumerate().filter(|(c, _)| *c != i).map(|(_, e)| e.clone()).collect())
                    .collect();
                let d = if n - 1 <= 4 { cofactor_det(&minor) } else { bareiss_det(minor) };
                *slot = if (i + j) % 2 == 0 { d } else { pscale(&d, -T::one()) };
            }
        }
        Self::from_entries(n, n, |i, j| adj[i][j].clone())
    }

    /// Unimodularity test: the determinant is a nonzero constant.
    ///
    /// `tol` defaults to `1e-9` times the largest determinant coefficient.
    pub fn is_unimodular(&self, tol: Option<T>) -> Result<bool> {
        let det = self.det()?;
        let d = det.entry(0, 0);
        let scale = d.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        let tol = tol.unwrap_or(T::lit(1e-9) * scale);
        let constant = d[0].abs();
        let higher_vanish = d.iter().skip(1).all(|c| c.abs() <= tol);
        Ok(higher_vanish && constant > tol && constant > T::zero())
    }
}

/// Sum or product of two polynomial matrices.
pub fn poly_arith<T: Real>(p: &PolynomialMatrix<T>, q: &PolynomialMatrix<T>, op: ArithOp) -> Result<PolynomialMatrix<T>> {
    match op {
        ArithOp::Add => p.add(q),
        ArithOp::Mul => p.mul(q),
    }
}

/// Pseudo-derivative of order `k` of a monic polynomial given by its
/// descending coefficients `[1, a₁, …, a_m]` (that is `z^m + a₁z^{m-1} + … + a_m`):
/// returns `[1, a₁, …, a_{m-k}]`.
pub fn pseudo_derivative<T: Real>(descending: &[T], k: usize) -> Result<Vec<T>> {
    let lead = descending.first().ok_or_else(|| Error::Domain("empty polynomial".into()))?;
    if *lead != T::one() {
        return Err(Error::Domain("pseudo-derivative requires a monic polynomial".into()));
    }
    pseudo_derivative_formal(descending, k)
}

/// Pseudo-derivative for a polynomial of formal degree `m = len - 1` whose
/// leading coefficient may vanish: the last `k` coefficients are dropped.
pub fn pseudo_derivative_formal<T: Real>(descending: &[T], k: usize) -> Result<Vec<T>> {
    let m = descending.len().saturating_sub(1);
    if k == 0 || k > m {
        return Err(Error::Domain(format!("pseudo-derivative order {k} outside 1..={m}")));
    }
    Ok(descending[..descending.len() - k].to_vec())
}

// ---- scalar polynomial helpers (ascending powers of z⁻¹) ----

pub(crate) fn trim_scalar<T: Real>(p: &mut Vec<T>) {
    while p.len() > 1 && p.last().is_some_and(|x| *x == T::zero()) {
        p.pop();
    }
    if p.is_empty() {
        p.push(T::zero());
    }
}

pub(crate) fn padd<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let n = a.len().max(b.len());
    let mut out: Vec<T> =
        (0..n).map(|k| a.get(k).copied().unwrap_or_else(T::zero) + b.get(k).copied().unwrap_or_else(T::zero)).collect();
    trim_scalar(&mut out);
    out
}

pub(crate) fn pscale<T: Real>(a: &[T], s: T) -> Vec<T> {
    let mut out: Vec<T> = a.iter().map(|x| *x * s).collect();
    trim_scalar(&mut out);
    out
}

pub(crate) fn psub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    padd(a, &pscale(b, -T::one()))
}

pub(crate) fn pmul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += *x * *y;
        }
    }
    trim_scalar(&mut out);
    out
}

fn is_zero_poly<T: Real>(a: &[T], tol: T) -> bool {
    a.iter().all(|x| x.abs() <= tol)
}

/// Quotient of `a / b` assuming `b` divides `a`; the remainder is discarded.
fn pdiv_exact<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut b = b.to_vec();
    let scale = b.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    while b.len() > 1 && b.last().is_some_and(|x| x.abs() <= scale * T::eps()) {
        b.pop();
    }
    let db = b.len() - 1;
    let lead = b[db];
    if a.len() <= db {
        return vec![T::zero()];
    }
    let mut rem = a.to_vec();
    let mut q = vec![T::zero(); a.len() - db];
    for k in (0..q.len()).rev() {
        let c = rem[k + db] / lead;
        q[k] = c;
        for (j, bj) in b.iter().enumerate() {
            rem[k + j] -= c * *bj;
        }
    }
    trim_scalar(&mut q);
    q
}

fn cofactor_det<T: Real>(m: &[Vec<Vec<T>>]) -> Vec<T> {
    let n = m.len();
    match n {
        0 => vec![T::one()],
        1 => m[0][0].clone(),
        2 => psub(&pmul(&m[0][0], &m[1][1]), &pmul(&m[0][1], &m[1][0])),
        _ => {
            let mut acc = vec![T::zero()];
            for c in 0..n {
                let minor: Vec<Vec<Vec<T>>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, e)| e.clone()).collect())
                    .collect();
                let term = pmul(&m[0][c], &cofactor_det(&minor));
                acc = if c % 2 == 0 { padd(&acc, &term) } else { psub(&acc, &term) };
            }
            acc
        }
    }
}

fn bareiss_det<T: Real>(mut m: Vec<Vec<Vec<T>>>) -> Vec<T> {
    let n = m.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter().flat_map(|e| e.iter()))
        .fold(T::zero(), |acc, x| acc.max(x.abs()));
    let tiny = scale * T::eps() * T::lit(16.0);
    let mut sign = T::one();
    let mut prev = vec![T::one()];
    for k in 0..n {
        let pivot = (k..n)
            .filter(|&i| !is_zero_poly(&m[i][k], tiny))
            .max_by(|&i, &j| {
                let ni = m[i][k].iter().fold(T::zero(), |a, x| a.max(x.abs()));
                let nj = m[j][k].iter().fold(T::zero(), |a, x| a.max(x.abs()));
                ni.partial_cmp(&nj).unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(p) = pivot else {
            return vec![T::zero()];
        };
        if p != k {
            m.swap(p, k);
            sign = -sign;
        }
        if k + 1 == n {
            break;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = psub(&pmul(&m[k][k], &m[i][j]), &pmul(&m[i][k], &m[k][j]));
                m[i][j] = pdiv_exact(&num, &prev);
            }
            m[i][k] = vec![T::zero()];
        }
        prev = m[k][k].clone();
    }
    pscale(&m[n - 1][n - 1], sign)
}
