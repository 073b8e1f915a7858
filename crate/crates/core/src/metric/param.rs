//! Coordinate systems on model sets and their tangent transfer functions.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::charts::{arma_chart, arma_from_chart, ss_from_chart, ss_matrices, ChartCoordinates, ChartId};
use crate::error::{Error, Result};
use crate::lsys::{state_resolvent, LinearSystem, SeriesSolver, Truncation};
use crate::polymat::PolynomialMatrix;
use crate::scalar::{complexify, CMatrix, Real};

/// Monic ARMA(p, p) with every entry of `A₁ … A_p, B₁ … B_p` free.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaFull<T: Real> {
    a: PolynomialMatrix<T>,
    b: PolynomialMatrix<T>,
    p: usize,
}

/// State space with every entry of `A` and `B` free and `C`, `D` fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SsEntries<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
}

/// A model point together with the coordinate system used to differentiate.
#[derive(Debug, Clone, PartialEq)]
pub enum Parametrization<T: Real> {
    ArmaFull(ArmaFull<T>),
    SsChart(ChartCoordinates<T>),
    SsEntries(SsEntries<T>),
    ArmaChart(ChartCoordinates<T>),
}

/// Derivative scheme for [`dh_numeric`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiniteDifference {
    Central,
    ComplexStep,
}

/// Matrix slot touched by one coordinate of an affine state-space layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    A(usize, usize),
    B(usize, usize),
    C(usize, usize),
}

/// Central-difference step scale (`1e-6` in double precision).
pub fn central_step<T: Real>() -> T {
    if T::eps() > T::lit(1e-10) {
        T::eps().powf(T::lit(1.0 / 3.0))
    } else {
        T::lit(1e-6)
    }
}

/// Complex-step size (`1e-30` in double precision).
pub fn complex_step<T: Real>() -> T {
    if T::eps() > T::lit(1e-10) {
        T::lit(1e-20)
    } else {
        T::lit(1e-30)
    }
}

fn unit<T: Real>(rows: usize, cols: usize, r: usize, c: usize) -> DMatrix<T> {
    let mut e = DMatrix::zeros(rows, cols);
    e[(r, c)] = T::one();
    e
}

fn delay_powers<T: Real>(z: Complex<T>, max: usize) -> Vec<Complex<T>> {
    let w = z.inv();
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = Complex::new(T::one(), T::zero());
    for _ in 0..=max {
        out.push(acc);
        acc *= w;
    }
    out
}

impl<T: Real> ArmaFull<T> {
    /// Full layout at lag count `p`; `a` must have identity leading coefficient.
    pub fn new(a: PolynomialMatrix<T>, b: PolynomialMatrix<T>, p: usize) -> Result<Self> {
        if !a.is_square() || b.rows() != a.rows() {
            return Err(Error::Dimension("ARMA layout needs square A and matching B".into()));
        }
        if a.coeff(0) != DMatrix::identity(a.rows(), a.rows()) {
            return Err(Error::Domain("full ARMA layout needs a monic AR polynomial".into()));
        }
        if a.degree() > p || b.degree() > p {
            return Err(Error::Dimension(format!(
                "degrees ({}, {}) exceed the layout lag count {p}",
                a.degree(),
                b.degree()
            )));
        }
        Ok(Self { a, b, p })
    }

    pub fn a(&self) -> &PolynomialMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &PolynomialMatrix<T> {
        &self.b
    }

    pub fn lags(&self) -> usize {
        self.p
    }

    fn shape(&self) -> (usize, usize) {
        (self.a.rows(), self.b.cols())
    }

    /// `(is_ma, lag, row, col)` of a coordinate.
    fn locate(&self, idx: usize) -> (bool, usize, usize, usize) {
        let (m, r) = self.shape();
        let ar = self.p * m * m;
        if idx < ar {
            (false, idx / (m * m) + 1, (idx % (m * m)) / m, idx % m)
        } else {
            let j = idx - ar;
            (true, j / (m * r) + 1, (j % (m * r)) / r, j % r)
        }
    }
}

impl<T: Real> Parametrization<T> {
    /// Full monic ARMA layout of an ARMA system, lag count defaulting to the
    /// larger of its two degrees.
    pub fn arma_full(sys: &LinearSystem<T>, p: Option<usize>) -> Result<Self> {
        let (a, b) = sys
            .as_arma()
            .ok_or_else(|| Error::Domain("arma-full parametrization needs an ARMA system".into()))?;
        let normalized = LinearSystem::from_arma(a.clone(), b.clone())?;
        let (a, b) = normalized.as_arma().expect("ARMA representation");
        let p = p.unwrap_or(a.degree().max(b.degree())).max(1);
        Ok(Self::ArmaFull(ArmaFull::new(a.clone(), b.clone(), p)?))
    }

    /// Entry-wise state-space layout.
    pub fn ss_entries(sys: &LinearSystem<T>) -> Result<Self> {
        let (a, b, c, d) = sys
            .as_state_space()
            .ok_or_else(|| Error::Domain("ss-entries parametrization needs a state-space system".into()))?;
        Ok(Self::SsEntries(SsEntries { a: a.clone(), b: b.clone(), c: c.clone(), d: d.clone() }))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ArmaFull(_) => "arma-full",
            Self::SsChart(_) => "ss-chart",
            Self::SsEntries(_) => "ss-entries",
            Self::ArmaChart(_) => "arma-chart",
        }
    }

    pub fn chart(&self) -> Option<&ChartId> {
        match self {
            Self::SsChart(c) | Self::ArmaChart(c) => Some(c.chart()),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ArmaFull(f) => {
                let (m, r) = f.shape();
                f.p * (m * m + m * r)
            }
            Self::SsChart(c) | Self::ArmaChart(c) => c.chart().dim(),
            Self::SsEntries(s) => s.a.len() + s.b.len(),
        }
    }

    pub fn theta(&self) -> Vec<T> {
        match self {
            Self::ArmaFull(f) => {
                let mut t = Vec::with_capacity(self.dim());
                for poly in [&f.a, &f.b] {
                    for lag in 1..=f.p {
                        let c = poly.coeff(lag);
                        for r in 0..c.nrows() {
                            t.extend(c.row(r).iter().copied());
                        }
                    }
                }
                t
            }
            Self::SsChart(c) | Self::ArmaChart(c) => c.theta(),
            Self::SsEntries(s) => {
                let mut t = Vec::with_capacity(self.dim());
                for mat in [&s.a, &s.b] {
                    for r in 0..mat.nrows() {
                        t.extend(mat.row(r).iter().copied());
                    }
                }
                t
            }
        }
    }

    pub fn labels(&self) -> Vec<String> {
        match self {
            Self::ArmaFull(f) => (0..self.dim())
                .map(|i| {
                    let (ma, lag, r, c) = f.locate(i);
                    format!("{}{}[{},{}]", if ma { "B" } else { "A" }, lag, r + 1, c + 1)
                })
                .collect(),
            Self::SsChart(c) | Self::ArmaChart(c) => c.chart().labels(),
            Self::SsEntries(s) => {
                let mut out = Vec::with_capacity(self.dim());
                for (name, mat) in [("A", &s.a), ("B", &s.b)] {
                    for r in 0..mat.nrows() {
                        for c in 0..mat.ncols() {
                            out.push(format!("{name}[{},{}]", r + 1, c + 1));
                        }
                    }
                }
                out
            }
        }
    }

    /// Same layout at another coordinate vector.
    pub fn with_theta(&self, theta: &[T]) -> Result<Self> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension(format!("expected {} coordinates, got {}", self.dim(), theta.len())));
        }
        Ok(match self {
            Self::ArmaFull(f) => {
                let (m, r) = f.shape();
                let ar = f.p * m * m;
                let mut a = vec![DMatrix::identity(m, m)];
                let mut b = vec![f.b.coeff(0)];
                for lag in 0..f.p {
                    a.push(DMatrix::from_row_slice(m, m, &theta[lag * m * m..(lag + 1) * m * m]));
                    b.push(DMatrix::from_row_slice(m, r, &theta[ar + lag * m * r..ar + (lag + 1) * m * r]));
                }
                Self::ArmaFull(ArmaFull::new(PolynomialMatrix::new(a)?, PolynomialMatrix::new(b)?, f.p)?)
            }
            Self::SsChart(c) => Self::SsChart(ChartCoordinates::from_theta(c.chart().clone(), theta)?),
            Self::ArmaChart(c) => Self::ArmaChart(ChartCoordinates::from_theta(c.chart().clone(), theta)?),
            Self::SsEntries(s) => {
                let n = s.a.nrows();
                let r = s.b.ncols();
                Self::SsEntries(SsEntries {
                    a: DMatrix::from_row_slice(n, n, &theta[..n * n]),
                    b: DMatrix::from_row_slice(n, r, &theta[n * n..]),
                    c: s.c.clone(),
                    d: s.d.clone(),
                })
            }
        })
    }

    /// The system at this point.
    pub fn system(&self) -> Result<LinearSystem<T>> {
        match self {
            Self::ArmaFull(f) => LinearSystem::from_arma(f.a.clone(), f.b.clone()),
            Self::SsChart(c) => ss_from_chart(c),
            Self::ArmaChart(c) => arma_from_chart(c),
            Self::SsEntries(s) => LinearSystem::from_state_space(s.a.clone(), s.b.clone(), s.c.clone(), Some(s.d.clone())),
        }
    }

    /// State-space matrices and coordinate slots of affine layouts.
    fn affine(&self) -> Option<((DMatrix<T>, DMatrix<T>, DMatrix<T>, DMatrix<T>), Vec<Slot>)> {
        match self {
            Self::SsEntries(s) => {
                let (n, r) = (s.a.nrows(), s.b.ncols());
                let mut slots: Vec<Slot> = (0..n * n).map(|k| Slot::A(k / n, k % n)).collect();
                slots.extend((0..n * r).map(|k| Slot::B(k / r, k % r)));
                Some(((s.a.clone(), s.b.clone(), s.c.clone(), s.d.clone()), slots))
            }
            Self::SsChart(c) => {
                let chart = c.chart();
                let m = chart.m();
                let mut slots: Vec<Slot> = chart
                    .alpha_keys()
                    .into_iter()
                    .map(|(i, j, k)| {
                        let col = chart.state(j, k);
                        match chart.indices()[i] {
                            0 => Slot::C(i, col),
                            ni => Slot::A(chart.state(i, ni), col),
                        }
                    })
                    .collect();
                slots.extend((0..chart.n() * m).map(|k| Slot::B(k / m, k % m)));
                Some((ss_matrices(c), slots))
            }
            _ => None,
        }
    }

    /// Analytic `∂H/∂θ_i (z)` for every coordinate.
    pub fn tangents(&self, z: Complex<T>) -> Result<Vec<CMatrix<T>>> {
        if let Some(((a, b, c, _), slots)) = self.affine() {
            let m = c.nrows();
            let r = b.ncols();
            let res = state_resolvent(&a, z)?;
            let cr = complexify(&c) * &res;
            let rb = &res * complexify(&b);
            return Ok(slots
                .iter()
                .map(|slot| match *slot {
                    Slot::A(i, j) => cr.column(i) * rb.row(j),
                    Slot::B(i, j) => {
                        let mut out = CMatrix::zeros(m, r);
                        out.column_mut(j).copy_from(&cr.column(i));
                        out
                    }
                    Slot::C(i, j) => {
                        let mut out = CMatrix::zeros(m, r);
                        out.row_mut(i).copy_from(&rb.row(j));
                        out
                    }
                })
                .collect());
        }
        match self {
            Self::ArmaFull(f) => {
                let (m, r) = f.shape();
                let az = f.a.eval(z)?;
                let ainv = az
                    .try_inverse()
                    .ok_or_else(|| Error::Evaluation(format!("AR polynomial singular at z = {z}")))?;
                let h = &ainv * f.b.eval(z)?;
                let w = delay_powers(z, f.p);
                Ok((0..self.dim())
                    .map(|idx| {
                        let (ma, lag, row, col) = f.locate(idx);
                        if ma {
                            let mut out = CMatrix::zeros(m, r);
                            out.column_mut(col).copy_from(&(ainv.column(row) * w[lag]));
                            out
                        } else {
                            ainv.column(row) * h.row(col) * (-w[lag])
                        }
                    })
                    .collect())
            }
            Self::ArmaChart(c) => {
                let f = arma_chart(c)?;
                let chart = c.chart();
                let (m, p) = (chart.m(), chart.p());
                let az = f.a.eval(z)?;
                let ainv = az
                    .try_inverse()
                    .ok_or_else(|| Error::Evaluation(format!("AR polynomial singular at z = {z}")))?;
                let h = &ainv * f.b.eval(z)?;
                let ih = CMatrix::identity(m, m) - &h;
                let mz = f.m.eval(z)?;
                let ainv_m = &ainv * &mz;
                let kc = complexify(&f.k);
                let w = delay_powers(z, 2 * p + 1);
                let mut out = Vec::with_capacity(self.dim());
                for (i, j, k) in chart.alpha_keys() {
                    // ∂A = −E_ij z^{-(p−k+1)}; ∂M[i,(j,l)] = −z^{-(p−k+1+l)} for l < k
                    let mut x = CMatrix::zeros(m, m);
                    let shift = p + 1 - k;
                    x.row_mut(i).copy_from(&(ih.row(j) * (-w[shift])));
                    for l in 1..k {
                        let s = chart.state(j, l);
                        let krow = kc.row(s) * (-w[shift + l]);
                        let mut row = x.row(i).clone_owned();
                        row += krow;
                        x.row_mut(i).copy_from(&row);
                    }
                    out.push(&ainv * x);
                }
                for s in 0..chart.n() {
                    for col in 0..m {
                        let mut d = CMatrix::zeros(m, m);
                        d.column_mut(col).copy_from(&ainv_m.column(s));
                        out.push(d);
                    }
                }
                Ok(out)
            }
            _ => unreachable!("affine layouts handled above"),
        }
    }

    /// `∂H_k/∂θ_i` for `k < count`, indexed `[i][k]`.
    pub fn markov_tangents(&self, count: usize) -> Result<Vec<Vec<DMatrix<T>>>> {
        if let Some(((a, b, c, _), slots)) = self.affine() {
            let (m, r, n) = (c.nrows(), b.ncols(), a.nrows());
            // P_k = A^{k−1} B for k ≥ 1
            let mut powers = Vec::with_capacity(count);
            let mut x = b.clone();
            for _ in 1..count {
                powers.push(x.clone());
                x = &a * x;
            }
            return Ok(slots
                .iter()
                .map(|slot| {
                    let mut out = vec![DMatrix::zeros(m, r)];
                    let mut q = DMatrix::<T>::zeros(n, r);
                    for k in 1..count {
                        let pk = &powers[k - 1];
                        let dh = match *slot {
                            Slot::A(i, j) => {
                                if k >= 2 {
                                    q = &a * &q;
                                    let mut upd = q.row(i).clone_owned();
                                    upd += powers[k - 2].row(j);
                                    q.row_mut(i).copy_from(&upd);
                                }
                                &c * &q
                            }
                            Slot::B(i, j) => {
                                if k == 1 {
                                    q[(i, j)] = T::one();
                                } else {
                                    q = &a * &q;
                                }
                                &c * &q
                            }
                            Slot::C(i, j) => {
                                let mut d = DMatrix::zeros(m, r);
                                d.row_mut(i).copy_from(&pk.row(j));
                                d
                            }
                        };
                        out.push(dh);
                    }
                    out.truncate(count);
                    out
                })
                .collect());
        }
        match self {
            Self::ArmaFull(f) => {
                let (m, r) = f.shape();
                let h = LinearSystem::from_arma(f.a.clone(), f.b.clone())?.markov_terms(count)?;
                let solver = SeriesSolver::new(&f.a)?;
                Ok((0..self.dim())
                    .map(|idx| {
                        let (ma, lag, row, col) = f.locate(idx);
                        let rhs: Vec<DMatrix<T>> = (0..count)
                            .map(|k| {
                                if k < lag {
                                    return DMatrix::zeros(m, r);
                                }
                                if ma {
                                    if k == lag {
                                        unit(m, r, row, col)
                                    } else {
                                        DMatrix::zeros(m, r)
                                    }
                                } else {
                                    let mut x = DMatrix::zeros(m, r);
                                    x.row_mut(row).copy_from(&(-h[k - lag].row(col)));
                                    x
                                }
                            })
                            .collect();
                        solver.solve(&rhs, count)
                    })
                    .collect())
            }
            Self::ArmaChart(c) => {
                let f = arma_chart(c)?;
                let chart = c.chart();
                let (m, p) = (chart.m(), chart.p());
                let solver = SeriesSolver::new(&f.a)?;
                let len = count + solver.lookahead();
                let h = LinearSystem::from_arma_unnormalized(f.a.clone(), f.b.clone())?.markov_terms(len)?;
                let ih = |t: usize| -> DMatrix<T> {
                    let mut x = -&h[t];
                    if t == 0 {
                        x += DMatrix::<T>::identity(m, m);
                    }
                    x
                };
                let mut out = Vec::with_capacity(self.dim());
                for (i, j, k) in chart.alpha_keys() {
                    let shift = p + 1 - k;
                    let rhs: Vec<DMatrix<T>> = (0..len)
                        .map(|t| {
                            let mut x = DMatrix::zeros(m, m);
                            if t >= shift {
                                x.row_mut(i).copy_from(&(-ih(t - shift).row(j)));
                            }
                            for l in 1..k {
                                if t == shift + l {
                                    let upd = x.row(i) - f.k.row(chart.state(j, l));
                                    x.row_mut(i).copy_from(&upd);
                                }
                            }
                            x
                        })
                        .collect();
                    out.push(solver.solve(&rhs, count));
                }
                for s in 0..chart.n() {
                    for col in 0..m {
                        let rhs: Vec<DMatrix<T>> = (0..len)
                            .map(|t| {
                                let mut x = DMatrix::zeros(m, m);
                                x.column_mut(col).copy_from(&f.m.coeff(t).column(s));
                                x
                            })
                            .collect();
                        out.push(solver.solve(&rhs, count));
                    }
                }
                Ok(out)
            }
            _ => unreachable!("affine layouts handled above"),
        }
    }

    /// Whether [`Parametrization::complex_step_markov`] is available.
    pub fn supports_complex_step(&self) -> bool {
        !matches!(self, Self::ArmaChart(_))
    }

    /// Complex-step derivative `Im H_k(θ + i h e_idx)/h` of the Markov terms.
    pub fn complex_step_markov(&self, idx: usize, count: usize, h: T) -> Result<Vec<DMatrix<T>>> {
        if idx >= self.dim() {
            return Err(Error::Dimension(format!("coordinate {idx} out of range {}", self.dim())));
        }
        let bump = Complex::new(T::zero(), h);
        let im = |x: &CMatrix<T>| x.map(|v| v.im / h);
        if let Some(((a, b, c, d), slots)) = self.affine() {
            let (mut a, mut b, mut c) = (complexify(&a), complexify(&b), complexify(&c));
            match slots[idx] {
                Slot::A(i, j) => a[(i, j)] += bump,
                Slot::B(i, j) => b[(i, j)] += bump,
                Slot::C(i, j) => c[(i, j)] += bump,
            }
            let mut out = vec![im(&complexify(&d))];
            let mut x = b;
            for _ in 1..count {
                out.push(im(&(&c * &x)));
                x = &a * x;
            }
            out.truncate(count);
            return Ok(out);
        }
        match self {
            Self::ArmaFull(f) => {
                let (ma, lag, row, col) = f.locate(idx);
                let mut ac: Vec<CMatrix<T>> = (0..=f.p).map(|k| complexify(&f.a.coeff(k))).collect();
                let mut bc: Vec<CMatrix<T>> = (0..=f.p).map(|k| complexify(&f.b.coeff(k))).collect();
                if ma {
                    bc[lag][(row, col)] += bump;
                } else {
                    ac[lag][(row, col)] += bump;
                }
                let mut hs: Vec<CMatrix<T>> = Vec::with_capacity(count);
                for k in 0..count {
                    let mut acc = bc.get(k).cloned().unwrap_or_else(|| CMatrix::zeros(f.a.rows(), f.b.cols()));
                    for j in 1..=f.p.min(k) {
                        acc -= &ac[j] * &hs[k - j];
                    }
                    hs.push(acc);
                }
                Ok(hs.iter().map(im).collect())
            }
            _ => Err(Error::NotApplicable("complex-step derivative is not available for arma-chart".into())),
        }
    }
}

/// Numerical `∂H/∂θ_idx (z)` by central differences or by complex step on
/// the Markov expansion.
pub fn dh_numeric<T: Real>(
    param: &Parametrization<T>,
    idx: usize,
    z: Complex<T>,
    scheme: FiniteDifference,
) -> Result<CMatrix<T>> {
    let theta = param.theta();
    if idx >= theta.len() {
        return Err(Error::Dimension(format!("coordinate {idx} out of range {}", theta.len())));
    }
    match scheme {
        FiniteDifference::Central => {
            let h = central_step::<T>() * T::one().max(theta[idx].abs());
            let mut plus = theta.clone();
            plus[idx] += h;
            let mut minus = theta;
            minus[idx] -= h;
            let hp = param.with_theta(&plus)?.system()?.transfer(z)?;
            let hm = param.with_theta(&minus)?.system()?.transfer(z)?;
            Ok((hp - hm) / Complex::new(h + h, T::zero()))
        }
        FiniteDifference::ComplexStep => {
            let count = param.system()?.markov_expand(Truncation::Adaptive)?.terms.len();
            let terms = param.complex_step_markov(idx, count, complex_step::<T>())?;
            let w = z.inv();
            let (m, r) = terms[0].shape();
            let mut acc = CMatrix::<T>::zeros(m, r);
            for t in terms.iter().rev() {
                acc *= w;
                acc += complexify(t);
            }
            Ok(acc)
        }
    }
}
