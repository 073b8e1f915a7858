//! Linear systems as elements of the Hilbert space of Markov sequences.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::metric::quadrature::{circle_average_scalar, Quadrature};
use crate::polymat::PolynomialMatrix;
use crate::scalar::{complexify, frobenius_pairing, modulus, CMatrix, Real};

/// Largest condition number accepted for the constant AR coefficient.
pub const MAX_LEAD_CONDITION: f64 = 1e12;
/// Default distance from the unit circle below which a pole is unstable.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-9;
/// Hard cap on adaptive Markov truncation.
pub const MAX_TRUNCATION: usize = 100_000;

/// Storage form of a transfer function.
#[derive(Debug, Clone, PartialEq)]
pub enum Representation<T: Real> {
    /// `H(z) = A(z)⁻¹ B(z)`.
    Arma { a: PolynomialMatrix<T>, b: PolynomialMatrix<T> },
    /// `H(z) = C (zI − A)⁻¹ B + D`.
    StateSpace { a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T> },
    /// `H(z) = Σ_{i ≤ N} H_i z^{-i}` with `‖H_N‖ ≤ decay_bound`.
    Markov { terms: Vec<DMatrix<T>>, decay_bound: T },
}

/// A discrete-time linear system with `outputs` outputs and `inputs` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<T: Real> {
    outputs: usize,
    inputs: usize,
    repr: Representation<T>,
}

/// Impulse response `H₀ … H_N` with the geometric tail estimate used to
/// certify truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSequence<T: Real> {
    pub terms: Vec<DMatrix<T>>,
    /// Spectral radius of the pole set.
    pub rho: T,
    /// `C ρ^{N+1} / (1 − ρ)` for the envelope `C ρ^i` fitted on the last half.
    pub tail_bound: T,
}

impl<T: Real> MarkovSequence<T> {
    /// Wraps an explicit finite sequence (zero tail).
    pub fn finite(terms: Vec<DMatrix<T>>) -> Self {
        Self { terms, rho: T::zero(), tail_bound: T::zero() }
    }

    /// Index `N` of the last stored term.
    pub fn truncation(&self) -> usize {
        self.terms.len().saturating_sub(1)
    }

    /// `sqrt(Σ ‖H_i‖²)` over the stored terms.
    pub fn partial_norm(&self) -> T {
        self.terms.iter().fold(T::zero(), |acc, h| acc + h.norm_squared()).sqrt()
    }
}

/// How many Markov terms to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Terms `H₀ … H_N`.
    Fixed(usize),
    /// Smallest doubling `N` whose tail bound is below `1e-14` of the partial norm.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport<T: Real> {
    pub stable: bool,
    pub radius: T,
    /// Radius within the margin of one.
    pub marginal: bool,
}

/// Time-domain trace sum or frequency-domain circle integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProductMethod {
    Time,
    Frequency,
}

fn condition_number<T: Real>(m: &DMatrix<T>) -> T {
    let sv = m.clone().singular_values();
    let max = sv.iter().fold(T::zero(), |a, &x| a.max(x));
    let min = sv.iter().fold(T::lit(f64::INFINITY), |a, &x| a.min(x));
    if min <= T::zero() {
        T::lit(f64::INFINITY)
    } else {
        max / min
    }
}

impl<T: Real> LinearSystem<T> {
    /// ARMA pair normalized to `A₀ = I`.
    pub fn from_arma(a: PolynomialMatrix<T>, b: PolynomialMatrix<T>) -> Result<Self> {
        check_arma_shapes(&a, &b)?;
        let a0 = a.coeff(0);
        let cond = condition_number(&a0);
        if !(cond <= T::lit(MAX_LEAD_CONDITION)) {
            return Err(Error::DegenerateModel(format!(
                "leading AR coefficient is singular (condition number {:e})",
                cond.as_f64()
            )));
        }
        let inv = a0
            .try_inverse()
            .ok_or_else(|| Error::DegenerateModel("leading AR coefficient is singular".into()))?;
        let a = a.premul(&inv)?;
        let b = b.premul(&inv)?;
        Ok(Self { outputs: a.rows(), inputs: b.cols(), repr: Representation::Arma { a, b } })
    }

    /// ARMA pair stored as given. `A₀` may be singular (as for pairs built
    /// from z-form polynomials of unequal row degrees) provided `det A` is
    /// not identically zero.
    pub fn from_arma_unnormalized(a: PolynomialMatrix<T>, b: PolynomialMatrix<T>) -> Result<Self> {
        check_arma_shapes(&a, &b)?;
        if a.det()?.is_zero() {
            return Err(Error::DegenerateModel("AR polynomial has identically zero determinant".into()));
        }
        Ok(Self { outputs: a.rows(), inputs: b.cols(), repr: Representation::Arma { a, b } })
    }

    /// State-space quadruple; `d` defaults to the identity.
    pub fn from_state_space(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: Option<DMatrix<T>>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("state matrix is {:?}, not square", a.shape())));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "B {:?} and C {:?} inconsistent with state dimension {n}",
                b.shape(),
                c.shape()
            )));
        }
        let (m, r) = (c.nrows(), b.ncols());
        if m == 0 || r == 0 {
            return Err(Error::Dimension("system needs at least one input and output".into()));
        }
        let d = match d {
            Some(d) if d.shape() != (m, r) => {
                return Err(Error::Dimension(format!("D has shape {:?}, expected {:?}", d.shape(), (m, r))))
            }
            Some(d) => d,
            None if m == r => DMatrix::identity(m, r),
            None => return Err(Error::Dimension("default D = I needs as many inputs as outputs".into())),
        };
        Ok(Self { outputs: m, inputs: r, repr: Representation::StateSpace { a, b, c, d } })
    }

    /// Explicit truncated impulse response.
    pub fn from_markov(terms: Vec<DMatrix<T>>, decay_bound: T) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Dimension("empty Markov sequence".into()))?;
        let (m, r) = first.shape();
        if m == 0 || r == 0 || terms.iter().any(|h| h.shape() != (m, r)) {
            return Err(Error::Dimension("Markov terms must share a nonempty shape".into()));
        }
        let last = terms.last().map(|h| h.norm()).unwrap_or_else(T::zero);
        if last > decay_bound {
            return Err(Error::Truncation(format!(
                "last Markov term norm {:e} exceeds the decay bound {:e}",
                last.as_f64(),
                decay_bound.as_f64()
            )));
        }
        Ok(Self { outputs: m, inputs: r, repr: Representation::Markov { terms, decay_bound } })
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    pub fn as_arma(&self) -> Option<(&PolynomialMatrix<T>, &PolynomialMatrix<T>)> {
        match &self.repr {
            Representation::Arma { a, b } => Some((a, b)),
            _ => None,
        }
    }

    pub fn as_state_space(&self) -> Option<(&DMatrix<T>, &DMatrix<T>, &DMatrix<T>, &DMatrix<T>)> {
        match &self.repr {
            Representation::StateSpace { a, b, c, d } => Some((a, b, c, d)),
            _ => None,
        }
    }

    /// Upper bound on the McMillan degree read off the representation.
    pub fn degree_bound(&self) -> usize {
        match &self.repr {
            Representation::Arma { a, b } => self.outputs * a.degree().max(b.degree()),
            Representation::StateSpace { a, .. } => a.nrows(),
            Representation::Markov { terms, .. } => terms.len() / 4,
        }
    }

    /// Number of leading Markov terms after which an FIR response must vanish.
    fn finite_support_bound(&self) -> usize {
        match &self.repr {
            Representation::Arma { a, b } => (self.outputs.saturating_sub(1) + 1) * a.degree() + b.degree() + 1,
            Representation::StateSpace { a, .. } => a.nrows() + 1,
            Representation::Markov { terms, .. } => terms.len(),
        }
    }

    /// Transfer function value at `z ≠ 0`.
    pub fn transfer(&self, z: Complex<T>) -> Result<CMatrix<T>> {
        match &self.repr {
            Representation::Arma { a, b } => {
                let az = a.eval(z)?;
                let bz = b.eval(z)?;
                az.lu()
                    .solve(&bz)
                    .ok_or_else(|| Error::Evaluation(format!("AR polynomial singular at z = {z}")))
            }
            Representation::StateSpace { a, b, c, d } => {
                let n = a.nrows();
                if n == 0 {
                    return Ok(complexify(d));
                }
                let resolvent = state_resolvent(a, z)?;
                Ok(complexify(c) * resolvent * complexify(b) + complexify(d))
            }
            Representation::Markov { terms, .. } => {
                if modulus(z) == T::zero() {
                    return Err(Error::Domain("evaluation pole at origin".into()));
                }
                let w = z.inv();
                let mut acc = CMatrix::<T>::zeros(self.outputs, self.inputs);
                for h in terms.iter().rev() {
                    acc *= w;
                    acc += complexify(h);
                }
                Ok(acc)
            }
        }
    }

    /// Spectral radius of the pole set and the stability verdict.
    pub fn stability(&self, margin: T) -> Result<StabilityReport<T>> {
        let radius = match &self.repr {
            Representation::StateSpace { a, .. } => spectral_radius(a),
            Representation::Arma { a, .. } => {
                let det = a.det()?;
                polynomial_root_radius(&det.entry(0, 0))
            }
            Representation::Markov { terms, .. } => empirical_decay(terms),
        };
        let one = T::one();
        Ok(StabilityReport {
            stable: radius < one - margin,
            radius,
            marginal: (radius - one).abs() <= margin,
        })
    }

    /// Stability with the default margin.
    pub fn is_stable(&self) -> Result<StabilityReport<T>> {
        self.stability(T::lit(DEFAULT_STABILITY_MARGIN))
    }

    /// `H₀ … H_{count−1}`.
    pub fn markov_terms(&self, count: usize) -> Result<Vec<DMatrix<T>>> {
        let (m, r) = (self.outputs, self.inputs);
        match &self.repr {
            Representation::Arma { a, b } => {
                let solver = SeriesSolver::new(a)?;
                Ok(solver.solve(b.coeffs(), count))
            }
            Representation::StateSpace { a, b, c, d } => {
                let mut out = Vec::with_capacity(count);
                if count > 0 {
                    out.push(d.clone());
                }
                let mut x = b.clone();
                for _ in 1..count {
                    out.push(c * &x);
                    x = a * x;
                }
                Ok(out)
            }
            Representation::Markov { terms, .. } => {
                Ok((0..count).map(|i| terms.get(i).cloned().unwrap_or_else(|| DMatrix::zeros(m, r))).collect())
            }
        }
    }

    /// Markov expansion with a fixed or adaptively certified truncation.
    pub fn markov_expand(&self, truncation: Truncation) -> Result<MarkovSequence<T>> {
        let report = self.is_stable()?;
        match truncation {
            Truncation::Fixed(n) => {
                let terms = self.markov_terms(n + 1)?;
                let tail_bound = geometric_tail(&terms, report.radius);
                Ok(MarkovSequence { terms, rho: report.radius, tail_bound })
            }
            Truncation::Adaptive => {
                if let Representation::Markov { terms, decay_bound } = &self.repr {
                    let tail = geometric_tail(terms, report.radius).max(*decay_bound * T::zero());
                    return Ok(MarkovSequence { terms: terms.clone(), rho: report.radius, tail_bound: tail });
                }
                if !report.stable {
                    return Err(Error::Divergence(format!(
                        "adaptive Markov expansion of an unstable system (spectral radius {})",
                        report.radius
                    )));
                }
                let rel = T::tol_floor(1e-14, 1.0);
                let mut n = (2 * self.finite_support_bound()).clamp(64, MAX_TRUNCATION);
                loop {
                    let terms = self.markov_terms(n + 1)?;
                    let seq = MarkovSequence { tail_bound: geometric_tail(&terms, report.radius), terms, rho: report.radius };
                    if seq.tail_bound <= rel * seq.partial_norm() || n >= MAX_TRUNCATION {
                        return Ok(seq);
                    }
                    n = (2 * n).min(MAX_TRUNCATION);
                }
            }
        }
    }

    /// Realization in observer form (`A₀` must be invertible).
    pub fn to_state_space(&self) -> Result<Self> {
        match &self.repr {
            Representation::StateSpace { .. } => Ok(self.clone()),
            Representation::Markov { terms, .. } => {
                // FIR shift realization of the stored terms
                let (m, r) = (self.outputs, self.inputs);
                let k = terms.len() - 1;
                let n = k * r;
                let mut a = DMatrix::zeros(n, n);
                for i in 1..k {
                    a.view_mut((i * r, (i - 1) * r), (r, r)).copy_from(&DMatrix::<T>::identity(r, r));
                }
                let mut b = DMatrix::zeros(n, r);
                if k > 0 {
                    b.view_mut((0, 0), (r, r)).copy_from(&DMatrix::<T>::identity(r, r));
                }
                let mut c = DMatrix::zeros(m, n);
                for i in 0..k {
                    c.view_mut((0, i * r), (m, r)).copy_from(&terms[i + 1]);
                }
                Self::from_state_space(a, b, c, Some(terms[0].clone()))
            }
            Representation::Arma { a, b } => {
                let inv = a.coeff(0).try_inverse().ok_or_else(|| {
                    Error::DegenerateModel("observer realization needs an invertible leading AR coefficient".into())
                })?;
                let (a, b) = (a.premul(&inv)?, b.premul(&inv)?);
                let (m, r) = (self.outputs, self.inputs);
                let k = a.degree().max(b.degree());
                let n = m * k;
                let b0 = b.coeff(0);
                let mut ass = DMatrix::zeros(n, n);
                let mut bss = DMatrix::zeros(n, r);
                for i in 0..k {
                    let ai = a.coeff(i + 1);
                    ass.view_mut((i * m, 0), (m, m)).copy_from(&(-&ai));
                    if i + 1 < k {
                        ass.view_mut((i * m, (i + 1) * m), (m, m)).copy_from(&DMatrix::<T>::identity(m, m));
                    }
                    bss.view_mut((i * m, 0), (m, r)).copy_from(&(b.coeff(i + 1) - &ai * &b0));
                }
                let mut c = DMatrix::zeros(m, n);
                if k > 0 {
                    c.view_mut((0, 0), (m, m)).copy_from(&DMatrix::<T>::identity(m, m));
                }
                Self::from_state_space(ass, bss, c, Some(b0))
            }
        }
    }
}

fn check_arma_shapes<T: Real>(a: &PolynomialMatrix<T>, b: &PolynomialMatrix<T>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("AR polynomial is {:?}, not square", a.shape())));
    }
    if b.rows() != a.rows() {
        return Err(Error::Dimension(format!(
            "MA polynomial has {} rows, AR polynomial has {}",
            b.rows(),
            a.rows()
        )));
    }
    Ok(())
}

/// `(zI − A)⁻¹`.
pub(crate) fn state_resolvent<T: Real>(a: &DMatrix<T>, z: Complex<T>) -> Result<CMatrix<T>> {
    let n = a.nrows();
    let shifted = CMatrix::<T>::from_diagonal_element(n, n, z) - complexify(a);
    shifted
        .try_inverse()
        .ok_or_else(|| Error::Evaluation(format!("zI - A singular at z = {z} (pole on contour)")))
}

pub(crate) fn spectral_radius<T: Real>(a: &DMatrix<T>) -> T {
    if a.nrows() == 0 {
        return T::zero();
    }
    a.complex_eigenvalues().iter().fold(T::zero(), |acc, &e| acc.max(modulus(e)))
}

/// Largest root modulus of the z-form of a scalar polynomial in `z⁻¹`.
///
/// Leading coefficients that vanish relative to the largest one are dropped
/// (they lower the z-degree without adding poles); trailing zeros are roots
/// at the origin.
pub(crate) fn polynomial_root_radius<T: Real>(coeffs: &[T]) -> T {
    let scale = coeffs.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    if scale == T::zero() {
        return T::lit(f64::INFINITY);
    }
    let tiny = T::tol_floor(1e-13, 16.0) * scale;
    let first = coeffs.iter().position(|x| x.abs() > tiny).unwrap_or(0);
    let last = coeffs.iter().rposition(|x| x.abs() > tiny).unwrap_or(first);
    let c = &coeffs[first..=last];
    let deg = c.len() - 1;
    if deg == 0 {
        return T::zero();
    }
    let mut companion = DMatrix::<T>::zeros(deg, deg);
    for k in 0..deg {
        companion[(0, k)] = -c[k + 1] / c[0];
    }
    for k in 1..deg {
        companion[(k, k - 1)] = T::one();
    }
    spectral_radius(&companion)
}

/// Decay-rate estimate `exp(slope)` of `log ‖H_i‖` over the last half of a
/// stored sequence.
fn empirical_decay<T: Real>(terms: &[DMatrix<T>]) -> T {
    let n = terms.len();
    let pts: Vec<(T, T)> = (n / 2..n)
        .filter_map(|i| {
            let v = terms[i].norm();
            (v > T::zero()).then(|| (T::lit(i as f64), v.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return T::zero();
    }
    let k = T::lit(pts.len() as f64);
    let mx = pts.iter().fold(T::zero(), |a, p| a + p.0) / k;
    let my = pts.iter().fold(T::zero(), |a, p| a + p.1) / k;
    let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.1 - my));
    let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - mx) * (p.0 - mx));
    (sxy / sxx).exp().min(T::one())
}

/// `C ρ^{N+1}/(1 − ρ)` with `log C = max_i (log‖H_i‖ − i log ρ)` over the last
/// half of the sequence, computed in the log domain.
pub(crate) fn geometric_tail<T: Real>(terms: &[DMatrix<T>], rho: T) -> T {
    if rho >= T::one() {
        return T::lit(f64::INFINITY);
    }
    let n = terms.len().saturating_sub(1);
    let log_rho = rho.max(T::min_value().unwrap_or_else(T::eps)).ln();
    let mut log_c: Option<T> = None;
    for (i, h) in terms.iter().enumerate().skip(n - n / 2) {
        let v = h.norm();
        if v > T::zero() {
            let c = v.ln() - T::lit(i as f64) * log_rho;
            log_c = Some(log_c.map_or(c, |x: T| x.max(c)));
        }
    }
    match log_c {
        None => T::zero(),
        Some(lc) => (lc + T::lit((n + 1) as f64) * log_rho).exp() / (T::one() - rho),
    }
}

/// Power-series solver for `A(z) G(z) = X(z)` in `z⁻¹`.
///
/// With an invertible leading coefficient this is the forward recursion
/// `G_i = A₀⁻¹(X_i − Σ_{j≥1} A_j G_{i−j})`. Otherwise it uses
/// `G = adj(A) X / det A`, dividing by the first nonvanishing determinant
/// coefficient after shifting out its leading zeros.
pub(crate) enum SeriesSolver<T: Real> {
    Direct { a: PolynomialMatrix<T>, lead_inv: DMatrix<T> },
    Adjugate { adj: PolynomialMatrix<T>, det: Vec<T>, shift: usize },
}

impl<T: Real> SeriesSolver<T> {
    pub(crate) fn new(a: &PolynomialMatrix<T>) -> Result<Self> {
        let a0 = a.coeff(0);
        if condition_number(&a0) <= T::lit(MAX_LEAD_CONDITION) {
            if let Some(lead_inv) = a0.try_inverse() {
                return Ok(Self::Direct { a: a.clone(), lead_inv });
            }
        }
        let det = a.det()?.entry(0, 0);
        let scale = det.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
        let tiny = T::tol_floor(1e-13, 16.0) * scale;
        let shift = det
            .iter()
            .position(|x| x.abs() > tiny)
            .ok_or_else(|| Error::DegenerateModel("AR polynomial has identically zero determinant".into()))?;
        Ok(Self::Adjugate { adj: a.adjugate()?, det: det[shift..].to_vec(), shift })
    }

    /// Extra right-hand-side terms consumed beyond the requested count.
    pub(crate) fn lookahead(&self) -> usize {
        match self {
            Self::Direct { .. } => 0,
            Self::Adjugate { shift, .. } => *shift,
        }
    }

    /// First `count` coefficients of `A⁻¹ X`; `rhs` is zero past its end.
    pub(crate) fn solve(&self, rhs: &[DMatrix<T>], count: usize) -> Vec<DMatrix<T>> {
        let Some(first) = rhs.first() else { return Vec::new() };
        let (rows, cols) = first.shape();
        let x = |k: usize| rhs.get(k);
        let mut out: Vec<DMatrix<T>> = Vec::with_capacity(count);
        match self {
            Self::Direct { a, lead_inv } => {
                let p = a.degree();
                let coeffs = a.coeffs();
                for i in 0..count {
                    let mut acc = x(i).cloned().unwrap_or_else(|| DMatrix::zeros(rows, cols));
                    for j in 1..=p.min(i) {
                        acc -= &coeffs[j] * &out[i - j];
                    }
                    out.push(lead_inv * acc);
                }
            }
            Self::Adjugate { adj, det, shift } => {
                let adj_c = adj.coeffs();
                let y = |k: usize| {
                    let mut acc = DMatrix::zeros(adj.rows(), cols);
                    for (j, aj) in adj_c.iter().enumerate().take(k + 1) {
                        if let Some(xk) = x(k - j) {
                            acc += aj * xk;
                        }
                    }
                    acc
                };
                for i in 0..count {
                    let mut acc = y(i + shift);
                    for j in 1..det.len().min(i + 1) {
                        acc -= &out[i - j] * det[j];
                    }
                    out.push(acc / det[0]);
                }
            }
        }
        out
    }
}

fn check_compatible<T: Real>(s1: &LinearSystem<T>, s2: &LinearSystem<T>) -> Result<()> {
    if (s1.outputs, s1.inputs) != (s2.outputs, s2.inputs) {
        return Err(Error::Dimension(format!(
            "systems have shapes {:?} and {:?}",
            (s1.outputs, s1.inputs),
            (s2.outputs, s2.inputs)
        )));
    }
    for s in [s1, s2] {
        let report = s.is_stable()?;
        if !report.stable {
            return Err(Error::Divergence(format!("unstable operand (spectral radius {})", report.radius)));
        }
    }
    Ok(())
}

/// Markov sequences of both systems certified and padded to a common length.
fn paired_sequences<T: Real>(s1: &LinearSystem<T>, s2: &LinearSystem<T>) -> Result<(Vec<DMatrix<T>>, Vec<DMatrix<T>>)> {
    let n1 = s1.markov_expand(Truncation::Adaptive)?;
    let n2 = s2.markov_expand(Truncation::Adaptive)?;
    let n = n1.terms.len().max(n2.terms.len());
    Ok((s1.markov_terms(n)?, s2.markov_terms(n)?))
}

/// `⟨s₁, s₂⟩ = tr Σ H_i⁽¹⁾ H_i⁽²⁾ᵀ`, equivalently the circle mean of
/// `tr[H₁(z) H₂ᵀ(z⁻¹)]`.
pub fn inner_product<T: Real>(
    s1: &LinearSystem<T>,
    s2: &LinearSystem<T>,
    method: InnerProductMethod,
    quad: &Quadrature<T>,
) -> Result<T> {
    check_compatible(s1, s2)?;
    match method {
        InnerProductMethod::Time => {
            let (h1, h2) = paired_sequences(s1, s2)?;
            Ok(h1.iter().zip(&h2).fold(T::zero(), |acc, (x, y)| acc + x.dot(y)))
        }
        InnerProductMethod::Frequency => {
            let (v, _) = circle_average_scalar(|z| Ok(frobenius_pairing(&s1.transfer(z)?, &s2.transfer(z)?)), quad)?;
            Ok(v.re)
        }
    }
}

pub fn norm<T: Real>(s: &LinearSystem<T>, method: InnerProductMethod, quad: &Quadrature<T>) -> Result<T> {
    Ok(inner_product(s, s, method, quad)?.max(T::zero()).sqrt())
}

/// `‖s₁ − s₂‖`.
pub fn distance<T: Real>(
    s1: &LinearSystem<T>,
    s2: &LinearSystem<T>,
    method: InnerProductMethod,
    quad: &Quadrature<T>,
) -> Result<T> {
    check_compatible(s1, s2)?;
    let sq = match method {
        InnerProductMethod::Time => {
            let (h1, h2) = paired_sequences(s1, s2)?;
            h1.iter().zip(&h2).fold(T::zero(), |acc, (x, y)| acc + (x - y).norm_squared())
        }
        InnerProductMethod::Frequency => {
            let (v, _) = circle_average_scalar(
                |z| {
                    let d = s1.transfer(z)? - s2.transfer(z)?;
                    Ok(frobenius_pairing(&d, &d))
                },
                quad,
            )?;
            v.re
        }
    };
    Ok(sq.max(T::zero()).sqrt())
}
