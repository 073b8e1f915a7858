//! Overlapping parametrizations indexed by per-output structure indices.
//!
//! A chart with indices `n₁ … n_m` covers the systems whose Hankel rows
//! `h_jk` (output `j`, block row `k ≤ n_j`) form a basis of the row space.
//! Its coordinates are the coefficients `α_ijk` expressing the first
//! dependent row of each output, `h_{i,n_i+1} = Σ_jk α_ijk h_jk`, and the
//! `n × m` matrix `K` whose row `(i, j)` is the leading block of `h_ij`,
//! that is the `i`-th row of `H_j`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lsys::{spectral_radius, LinearSystem};
use crate::polymat::{pseudo_derivative_formal, PolynomialMatrix};
use crate::scalar::Real;

/// Structure indices of a chart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChartId {
    indices: Vec<usize>,
}

impl ChartId {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Dimension("a chart needs at least one output".into()));
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of outputs.
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// State dimension `Σ n_i`.
    pub fn n(&self) -> usize {
        self.indices.iter().sum()
    }

    /// Largest index.
    pub fn p(&self) -> usize {
        self.indices.iter().copied().max().unwrap_or(0)
    }

    /// Coordinate count `2nm`.
    pub fn dim(&self) -> usize {
        2 * self.n() * self.m()
    }

    /// Zero-based state position of `(i, j)`, `j` counted from one.
    pub fn state(&self, i: usize, j: usize) -> usize {
        debug_assert!(j >= 1 && j <= self.indices[i]);
        self.indices[..i].iter().sum::<usize>() + j - 1
    }

    /// `(i, j)` pairs in state order.
    pub fn states(&self) -> Vec<(usize, usize)> {
        self.indices.iter().enumerate().flat_map(|(i, &ni)| (1..=ni).map(move |j| (i, j))).collect()
    }

    /// `(i, j, k)` keys of the α block in coordinate order.
    pub fn alpha_keys(&self) -> Vec<(usize, usize, usize)> {
        let m = self.m();
        (0..m)
            .flat_map(|i| (0..m).flat_map(move |j| (1..=self.indices[j]).map(move |k| (i, j, k))))
            .collect()
    }

    /// Human-readable coordinate labels (one-based).
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> =
            self.alpha_keys().iter().map(|(i, j, k)| format!("alpha[{},{},{}]", i + 1, j + 1, k)).collect();
        for (i, j) in self.states() {
            for k in 0..self.m() {
                out.push(format!("K[({},{}),{}]", i + 1, j, k + 1));
            }
        }
        out
    }
}

/// A point in a chart: α block followed by `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartCoordinates<T: Real> {
    chart: ChartId,
    alpha: Vec<T>,
    kmat: DMatrix<T>,
}

impl<T: Real> ChartCoordinates<T> {
    /// `alpha` in [`ChartId::alpha_keys`] order, `kmat` of shape `n × m`.
    pub fn new(chart: ChartId, alpha: Vec<T>, kmat: DMatrix<T>) -> Result<Self> {
        let (n, m) = (chart.n(), chart.m());
        if alpha.len() != n * m {
            return Err(Error::Dimension(format!("expected {} alpha entries, got {}", n * m, alpha.len())));
        }
        if kmat.shape() != (n, m) {
            return Err(Error::Dimension(format!("K has shape {:?}, expected {:?}", kmat.shape(), (n, m))));
        }
        Ok(Self { chart, alpha, kmat })
    }

    /// Coordinates from the flat vector `θ = (α, vec_rowmajor(K))`.
    pub fn from_theta(chart: ChartId, theta: &[T]) -> Result<Self> {
        let (n, m) = (chart.n(), chart.m());
        if theta.len() != 2 * n * m {
            return Err(Error::Dimension(format!("expected {} coordinates, got {}", 2 * n * m, theta.len())));
        }
        let alpha = theta[..n * m].to_vec();
        let kmat = DMatrix::from_row_slice(n, m, &theta[n * m..]);
        Self::new(chart, alpha, kmat)
    }

    pub fn chart(&self) -> &ChartId {
        &self.chart
    }

    pub fn theta(&self) -> Vec<T> {
        let mut t = self.alpha.clone();
        for r in 0..self.kmat.nrows() {
            t.extend(self.kmat.row(r).iter().copied());
        }
        t
    }

    pub fn alpha_values(&self) -> &[T] {
        &self.alpha
    }

    pub fn kmat(&self) -> &DMatrix<T> {
        &self.kmat
    }

    /// `α_ijk` (zero-based outputs, one-based `k`).
    pub fn alpha(&self, i: usize, j: usize, k: usize) -> T {
        let pos = self.chart.alpha_keys().iter().position(|&key| key == (i, j, k));
        pos.map(|p| self.alpha[p]).unwrap_or_else(T::zero)
    }

    /// α block as an `m × n` matrix; row `i`, column `state(j, k)`.
    pub fn alpha_matrix(&self) -> DMatrix<T> {
        let (n, m) = (self.chart.n(), self.chart.m());
        DMatrix::from_row_slice(m, n, &self.alpha)
    }
}

/// Dependence rows and shift structure of the chart's state-space form.
pub fn ss_matrices<T: Real>(c: &ChartCoordinates<T>) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let chart = &c.chart;
    let (n, m) = (chart.n(), chart.m());
    let alpha = c.alpha_matrix();
    let mut a = DMatrix::zeros(n, n);
    let mut cm = DMatrix::zeros(m, n);
    for (i, &ni) in chart.indices.iter().enumerate() {
        if ni == 0 {
            // h_i1 itself depends on the basis rows
            cm.row_mut(i).copy_from(&alpha.row(i));
            continue;
        }
        for j in 1..ni {
            a[(chart.state(i, j), chart.state(i, j + 1))] = T::one();
        }
        a.row_mut(chart.state(i, ni)).copy_from(&alpha.row(i));
        cm[(i, chart.state(i, 1))] = T::one();
    }
    (a, c.kmat.clone(), cm, DMatrix::identity(m, m))
}

/// State-space realization `(A, K, C, I)` of a chart point.
pub fn ss_from_chart<T: Real>(c: &ChartCoordinates<T>) -> Result<LinearSystem<T>> {
    let (a, b, cm, d) = ss_matrices(c);
    LinearSystem::from_state_space(a, b, cm, Some(d))
}

/// Polynomial factors of the ARMA realization, all in `z⁻¹` after division
/// by `z^p`: `B = A + M K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaChart<T: Real> {
    pub a: PolynomialMatrix<T>,
    pub m: PolynomialMatrix<T>,
    pub k: DMatrix<T>,
    pub b: PolynomialMatrix<T>,
}

/// Descending z-form coefficients of `a_ij` padded to formal degree `n_j`:
/// `[δ_ij, −α_{ij n_j}, …, −α_{ij1}]`.
fn a_entry_descending<T: Real>(c: &ChartCoordinates<T>, i: usize, j: usize) -> Vec<T> {
    let nj = c.chart.indices[j];
    let mut d = Vec::with_capacity(nj + 1);
    d.push(if i == j { T::one() } else { T::zero() });
    for k in (1..=nj).rev() {
        d.push(-c.alpha(i, j, k));
    }
    d
}

/// Converts a descending z-form polynomial into ascending `z⁻¹` coefficients
/// after division by `z^p`.
fn to_delay_form<T: Real>(descending: &[T], p: usize) -> Vec<T> {
    let deg = descending.len() - 1;
    let mut out = vec![T::zero(); p + 1];
    for (idx, &c) in descending.iter().enumerate() {
        let power = deg - idx;
        out[p - power] = c;
    }
    out
}

/// `A(z)` and `M(z)` of a chart point in the `z⁻¹` convention.
pub fn arma_factors<T: Real>(c: &ChartCoordinates<T>) -> Result<(PolynomialMatrix<T>, PolynomialMatrix<T>)> {
    let chart = &c.chart;
    let (n, m, p) = (chart.n(), chart.m(), chart.p());
    let a = PolynomialMatrix::from_entries(m, m, |i, j| to_delay_form(&a_entry_descending(c, i, j), p))?;
    if n == 0 {
        return Ok((a, PolynomialMatrix::zeros(m, 1)));
    }
    let states = chart.states();
    let entries: Vec<Vec<Vec<T>>> = (0..m)
        .map(|i| {
            states
                .iter()
                .map(|&(j, l)| {
                    let d = pseudo_derivative_formal(&a_entry_descending(c, i, j), l)
                        .expect("order within formal degree");
                    to_delay_form(&d, p)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mpoly = PolynomialMatrix::from_entries(m, n, |i, s| entries[i][s].clone())?;
    Ok((a, mpoly))
}

/// ARMA realization of a chart point with its factors.
pub fn arma_chart<T: Real>(c: &ChartCoordinates<T>) -> Result<ArmaChart<T>> {
    let (a, m) = arma_factors(c)?;
    let b = if c.chart.n() == 0 { a.clone() } else { a.add(&m.postmul(&c.kmat)?)? };
    Ok(ArmaChart { a, m, k: c.kmat.clone(), b })
}

/// ARMA realization `(A, A + M K)`. The leading coefficient of `A` is
/// singular when the indices differ, so the pair is stored unnormalized.
pub fn arma_from_chart<T: Real>(c: &ChartCoordinates<T>) -> Result<LinearSystem<T>> {
    let f = arma_chart(c)?;
    LinearSystem::from_arma_unnormalized(f.a, f.b)
}

/// Reads chart coordinates off the Hankel rows of `s`.
///
/// Rows have `4nm` entries. `tol` (default `1e-8`) is relative: a basis row
/// whose Gram–Schmidt residual falls below `tol` times the largest basis row
/// norm, or a dependence relation whose least-squares residual exceeds `tol`
/// times the target norm, makes the chart inapplicable.
pub fn extract_chart<T: Real>(s: &LinearSystem<T>, chart: &ChartId, tol: Option<T>) -> Result<ChartCoordinates<T>> {
    let tol = tol.unwrap_or_else(|| T::tol_floor(1e-8, 64.0));
    let (n, m, p) = (chart.n(), chart.m(), chart.p());
    if s.outputs() != m || s.inputs() != m {
        return Err(Error::Dimension(format!(
            "chart with {m} outputs applied to a {}x{} system",
            s.outputs(),
            s.inputs()
        )));
    }
    if n == 0 {
        return ChartCoordinates::new(chart.clone(), Vec::new(), DMatrix::zeros(0, m));
    }
    let report = s.is_stable()?;
    if !report.stable {
        return Err(Error::Divergence(format!("chart extraction from an unstable system (radius {})", report.radius)));
    }
    let block_cols = 4 * n;
    let terms = s.markov_terms(p + 1 + block_cols)?;
    // Hankel row of output i at block row k (one-based): [H_k(i,:), H_{k+1}(i,:), …]
    let row = |i: usize, k: usize| -> DVector<T> {
        let mut v = DVector::zeros(block_cols * m);
        for b in 0..block_cols {
            for c in 0..m {
                v[b * m + c] = terms[k + b][(i, c)];
            }
        }
        v
    };
    let states = chart.states();
    let basis: Vec<DVector<T>> = states.iter().map(|&(j, k)| row(j, k)).collect();
    let scale = basis.iter().fold(T::zero(), |a, v| a.max(v.norm()));
    let mut ortho: Vec<DVector<T>> = Vec::new();
    for (&(j, k), v) in states.iter().zip(&basis) {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &ortho {
                let c = q.dot(&w);
                w.axpy(-c, q, T::one());
            }
        }
        let r = w.norm();
        if !(r > tol * scale) {
            return Err(Error::ChartNotApplicable(format!(
                "basis row h[{},{}] is dependent on the preceding rows (relative residual {:e})",
                j + 1,
                k,
                (r / scale).as_f64()
            )));
        }
        ortho.push(w / r);
    }
    let mut bmat = DMatrix::zeros(n, block_cols * m);
    for (r, v) in basis.iter().enumerate() {
        bmat.row_mut(r).copy_from(&v.transpose());
    }
    let svd = bmat.transpose().svd(true, true);
    let mut alpha_mat = DMatrix::zeros(m, n);
    for i in 0..m {
        let target = row(i, chart.indices[i] + 1);
        let coef = svd
            .solve(&target, T::eps())
            .map_err(|e| Error::ChartNotApplicable(format!("least squares failed: {e}")))?;
        let resid = (bmat.transpose() * &coef - &target).norm();
        let tnorm = target.norm().max(scale);
        if resid > tol * tnorm {
            return Err(Error::ChartNotApplicable(format!(
                "row h[{},{}] is not in the span of the basis rows (relative residual {:e})",
                i + 1,
                chart.indices[i] + 1,
                (resid / tnorm).as_f64()
            )));
        }
        alpha_mat.row_mut(i).copy_from(&coef.transpose());
    }
    let mut kmat = DMatrix::zeros(n, m);
    for (r, &(i, j)) in states.iter().enumerate() {
        for c in 0..m {
            kmat[(r, c)] = terms[j][(i, c)];
        }
    }
    let alpha = alpha_mat.transpose().iter().copied().collect();
    ChartCoordinates::new(chart.clone(), alpha, kmat)
}

/// Random chart point whose state matrix has spectral radius at most
/// `max_radius`. α entries are drawn uniformly with half-width `alpha_scale`
/// (halved after every hundred rejections); `K` is uniform in `[−1, 1]`.
pub fn random_chart_point<T: Real, R: Rng + ?Sized>(
    chart: &ChartId,
    rng: &mut R,
    max_radius: f64,
    alpha_scale: f64,
) -> Result<ChartCoordinates<T>> {
    let (n, m) = (chart.n(), chart.m());
    let mut scale = alpha_scale;
    for attempt in 0..2000 {
        if attempt > 0 && attempt % 100 == 0 {
            scale *= 0.5;
        }
        let alpha: Vec<T> = (0..n * m).map(|_| T::lit(rng.random_range(-scale..=scale))).collect();
        let kmat = DMatrix::from_fn(n, m, |_, _| T::lit(rng.random_range(-1.0..=1.0)));
        let c = ChartCoordinates::new(chart.clone(), alpha, kmat)?;
        let (a, ..) = ss_matrices(&c);
        if spectral_radius(&a).as_f64() <= max_radius {
            return Ok(c);
        }
    }
    Err(Error::Domain(format!("no chart point with spectral radius below {max_radius} found")))
}
