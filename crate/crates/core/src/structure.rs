//! Structural theory of ARMA representations: canonical zero patterns,
//! irreducibility, unimodular order changes and the rank-deficient
//! tangent phenomenon.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::{analyze_system, numerical_rank};
use crate::lsys::LinearSystem;
use crate::metric::param::{ArmaFull, Parametrization};
use crate::polymat::PolynomialMatrix;
use crate::scalar::{circle_node, max_abs, max_modulus, Real};

/// Status of one coefficient position in a canonical pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Entry {
    Free,
    Zero,
    One,
}

/// Zero pattern of the canonical ARMA form for given structure indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalPattern {
    pub indices: Vec<usize>,
    pub p: usize,
    /// Allowed AR lag count per `(i, j)`.
    pub lag_counts: Vec<Vec<usize>>,
    /// `ar[lag][i][j]` for lags `0 … p`.
    pub ar: Vec<Vec<Vec<Entry>>>,
    /// `ma[lag][i][j]` for lags `0 … p`.
    pub ma: Vec<Vec<Vec<Entry>>>,
}

impl CanonicalPattern {
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn free_count(&self) -> usize {
        self.ar.iter().chain(&self.ma).flatten().flatten().filter(|e| **e == Entry::Free).count()
    }

    /// True when row `i` of both lag-`p` masks has no free entry.
    pub fn top_row_vanishes(&self, i: usize) -> bool {
        self.ar[self.p][i].iter().chain(&self.ma[self.p][i]).all(|e| *e != Entry::Free)
    }

    /// Fills the free positions (AR lags first, then MA, each lag row-major)
    /// with `values`.
    pub fn assemble<T: Real>(&self, values: &[T]) -> Result<(PolynomialMatrix<T>, PolynomialMatrix<T>)> {
        if values.len() != self.free_count() {
            return Err(Error::Dimension(format!("expected {} free values, got {}", self.free_count(), values.len())));
        }
        let m = self.m();
        let mut it = values.iter().copied();
        let mut fill = |masks: &Vec<Vec<Vec<Entry>>>| -> Vec<DMatrix<T>> {
            masks
                .iter()
                .map(|mask| {
                    DMatrix::from_fn(m, m, |i, j| match mask[i][j] {
                        Entry::Free => it.next().expect("length checked"),
                        Entry::One => T::one(),
                        Entry::Zero => T::zero(),
                    })
                })
                .collect()
        };
        let a = fill(&self.ar);
        let b = fill(&self.ma);
        Ok((PolynomialMatrix::new(a)?, PolynomialMatrix::new(b)?))
    }
}

/// Allowed AR lag count: `n_i` on the diagonal, `min(n_i + 1, n_j)` below it
/// and `min(n_i, n_j)` above it.
pub fn lag_count(indices: &[usize], i: usize, j: usize) -> usize {
    let (ni, nj) = (indices[i], indices[j]);
    match i.cmp(&j) {
        std::cmp::Ordering::Equal => ni,
        std::cmp::Ordering::Greater => (ni + 1).min(nj),
        std::cmp::Ordering::Less => ni.min(nj),
    }
}

/// Canonical zero pattern. AR entry `(i, j)` is free at lags
/// `n_i − n_ij + 1 … n_i` (lag 0 only occurs below the diagonal, where `A₀`
/// is unit lower triangular); MA row `i` is free at lags `1 … n_i` and `B₀ = I`.
pub fn canonical_pattern(indices: &[usize]) -> Result<CanonicalPattern> {
    if indices.is_empty() || indices.iter().all(|&n| n == 0) {
        return Err(Error::Domain("canonical pattern needs at least one positive index".into()));
    }
    let m = indices.len();
    let p = indices.iter().copied().max().unwrap_or(0);
    let lag_counts: Vec<Vec<usize>> = (0..m).map(|i| (0..m).map(|j| lag_count(indices, i, j)).collect()).collect();
    let ar = (0..=p)
        .map(|lag| {
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| {
                            let ni = indices[i];
                            let lo = (ni + 1).saturating_sub(lag_counts[i][j]);
                            if lag == 0 && i == j {
                                Entry::One
                            } else if lag >= lo && lag <= ni && lag_counts[i][j] > 0 && (lag > 0 || i > j) {
                                Entry::Free
                            } else {
                                Entry::Zero
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let ma = (0..=p)
        .map(|lag| {
            (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| match lag {
                            0 if i == j => Entry::One,
                            0 => Entry::Zero,
                            l if l <= indices[i] => Entry::Free,
                            _ => Entry::Zero,
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(CanonicalPattern { indices: indices.to_vec(), p, lag_counts, ar, ma })
}

/// Outcome of the irreducibility test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrreducibilityReport {
    pub irreducible: bool,
    /// `(deg A, deg B)`.
    pub orders: (usize, usize),
    pub indices: Vec<usize>,
    pub mcmillan_degree: usize,
}

fn arma_system<T: Real>(a: &PolynomialMatrix<T>, b: &PolynomialMatrix<T>) -> Result<LinearSystem<T>> {
    LinearSystem::from_arma(a.clone(), b.clone()).or_else(|_| LinearSystem::from_arma_unnormalized(a.clone(), b.clone()))
}

/// `(A, B)` is ARMA(p, p)-irreducible when its common degree equals the
/// largest Kronecker index of `A⁻¹B`.
pub fn is_irreducible<T: Real>(a: &PolynomialMatrix<T>, b: &PolynomialMatrix<T>, tol: Option<T>) -> Result<IrreducibilityReport> {
    let sys = arma_system(a, b)?;
    let an = analyze_system(&sys, tol)?;
    let p = a.degree().max(b.degree());
    let max_index = an.indices.iter().copied().max().unwrap_or(0);
    Ok(IrreducibilityReport {
        irreducible: max_index == p,
        orders: (a.degree(), b.degree()),
        mcmillan_degree: an.degree,
        indices: an.indices,
    })
}

/// `(U A, U B)` for unimodular `U`: same transfer function, raised degrees.
pub fn unimodular_inflate<T: Real>(
    a: &PolynomialMatrix<T>,
    b: &PolynomialMatrix<T>,
    u: &PolynomialMatrix<T>,
) -> Result<(PolynomialMatrix<T>, PolynomialMatrix<T>)> {
    if !u.is_unimodular(None)? {
        return Err(Error::Domain("transformation is not unimodular".into()));
    }
    Ok((u.mul(a)?, u.mul(b)?))
}

/// Elementary factor `I + c E_ij z⁻¹` of a unimodular product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transvection {
    pub row: usize,
    pub col: usize,
    pub coef: f64,
}

/// Two ARMA representations of one unimodular transfer function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonInvarianceReport {
    pub q: usize,
    pub m: usize,
    pub factors: Vec<Transvection>,
    /// `(deg A, deg B)` of `(I, H)`.
    pub moving_average_orders: (usize, usize),
    /// `(deg A, deg B)` of `(H⁻¹, I)`.
    pub autoregressive_orders: (usize, usize),
    pub markov_residual: f64,
    pub transfer_unimodular: bool,
    pub inverse_unimodular: bool,
    pub moving_average_irreducible: IrreducibilityReport,
    pub autoregressive_irreducible: IrreducibilityReport,
    /// First Markov terms of the moving-average form (row-major blocks).
    pub markov_head: Vec<Vec<f64>>,
}

/// Product of transvections; `I + c E_ij z⁻¹` each.
pub fn transvection_product<T: Real>(m: usize, factors: &[Transvection]) -> Result<PolynomialMatrix<T>> {
    let mut h = PolynomialMatrix::identity(m);
    for f in factors {
        if f.row == f.col || f.row >= m || f.col >= m {
            return Err(Error::Domain(format!("invalid transvection position ({}, {})", f.row, f.col)));
        }
        let mut e = DMatrix::zeros(m, m);
        e[(f.row, f.col)] = T::lit(f.coef);
        h = h.mul(&PolynomialMatrix::new(vec![DMatrix::identity(m, m), e])?)?;
    }
    Ok(h)
}

/// Builds the ARMA(0, q) and ARMA(q, 0) forms of the given product and
/// compares them.
pub fn noninvariance_with_factors<T: Real>(m: usize, factors: &[Transvection]) -> Result<NonInvarianceReport> {
    let q = factors.len();
    if q == 0 {
        return Err(Error::Domain("degree q must be at least 1".into()));
    }
    let h = transvection_product::<T>(m, factors)?;
    let det = h.det()?;
    let d0 = det.coeff(0)[(0, 0)];
    let inv = h.adjugate()?.scale(T::one() / d0).trimmed(T::tol_floor(1e-13, 16.0) * h.max_coeff_abs());
    let eye = PolynomialMatrix::identity(m);
    let ma = LinearSystem::from_arma(eye.clone(), h.clone())?;
    let ar = LinearSystem::from_arma(inv.clone(), eye.clone())?;
    let count = 4 * q + 16;
    let h1 = ma.markov_terms(count)?;
    let h2 = ar.markov_terms(count)?;
    let markov_residual = h1.iter().zip(&h2).map(|(x, y)| max_abs(&(x - y))).fold(T::zero(), |a, x| a.max(x));
    Ok(NonInvarianceReport {
        q,
        m,
        factors: factors.to_vec(),
        moving_average_orders: (0, h.degree()),
        autoregressive_orders: (inv.degree(), 0),
        markov_residual: markov_residual.as_f64(),
        transfer_unimodular: h.is_unimodular(None)?,
        inverse_unimodular: inv.is_unimodular(None)?,
        moving_average_irreducible: is_irreducible(&eye, &h, None)?,
        autoregressive_irreducible: is_irreducible(&inv, &eye, None)?,
        markov_head: h1.iter().take(q + 2).map(|x| x.transpose().iter().map(|v| v.as_f64()).collect()).collect(),
    })
}

/// Random unimodular `H` of exact degree `q` as a chain of transvections
/// `I + c_k E_{i_k i_{k+1}} z⁻¹` (consecutive positions share an index, so
/// the top coefficient `Π c_k E_{i_0 i_q}` never vanishes), with `m = 2`.
pub fn noninvariance_demo<T: Real>(q: usize, seed: u64) -> Result<NonInvarianceReport> {
    if q == 0 {
        return Err(Error::Domain("degree q must be at least 1 (q = 0 is ARMA(0,0) both ways)".into()));
    }
    let m = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at = rng.random_range(0..m);
    let factors: Vec<Transvection> = (0..q)
        .map(|_| {
            let next = (at + 1) % m;
            let mag: f64 = rng.random_range(0.5..1.5);
            let coef = if rng.random_bool(0.5) { mag } else { -mag };
            let t = Transvection { row: at, col: next, coef };
            at = next;
            t
        })
        .collect();
    noninvariance_with_factors::<T>(m, &factors)
}

/// Outcome of the tangent-rank experiment on a rank-deficient top coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentProbeReport {
    pub indices: Vec<usize>,
    pub canonical_free_count: usize,
    /// `2 p m²`, the coordinate count of the full ARMA(p, p) layout.
    pub layout_dim: usize,
    /// `m − rank [A_p, B_p]` after monic normalization.
    pub left_null_dim: usize,
    pub betas: Vec<f64>,
    /// Largest deviation of `H` from the β = 0 system over the probe nodes.
    pub transfer_deviation: f64,
    pub rank_per_beta: Vec<usize>,
    pub rank_at_zero: usize,
    pub stacked_rank: usize,
    pub rank_grows: bool,
    pub observed_indices: Vec<usize>,
    pub nodes: usize,
}

/// Real matrix whose columns are the tangents of the full layout sampled at
/// `nodes` circle points (real and imaginary parts stacked).
fn tangent_columns<T: Real>(param: &Parametrization<T>, nodes: usize) -> Result<DMatrix<T>> {
    let d = param.dim();
    let mut cols: Vec<Vec<T>> = vec![Vec::new(); d];
    for k in 0..nodes {
        let z = circle_node(k, nodes);
        for (i, t) in param.tangents(z)?.iter().enumerate() {
            cols[i].extend(t.iter().map(|v| v.re));
            cols[i].extend(t.iter().map(|v| v.im));
        }
    }
    let rows = cols[0].len();
    Ok(DMatrix::from_fn(rows, d, |r, c| cols[c][r]))
}

/// Deforms a canonical system by `M(z) = I + β u vᵀ z⁻¹` with `v` in the
/// left null space of `[A_p, B_p]`, which keeps `H` and the degree `p`
/// fixed, and compares the rank of the full-layout tangent family at β = 0
/// with its rank stacked over all β.
pub fn degenerate_tangent_probe<T: Real>(indices: &[usize], betas: &[f64], seed: u64) -> Result<TangentProbeReport> {
    let pattern = canonical_pattern(indices)?;
    if indices.iter().all(|&n| n == pattern.p) {
        return Err(Error::NotApplicable("all indices equal: [A_p, B_p] has full rank".into()));
    }
    let m = pattern.m();
    let p = pattern.p;
    let nodes = 64;
    let rank_tol = T::tol_floor(1e-9, 1e3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b) = loop {
        let vals: Vec<T> = (0..pattern.free_count()).map(|_| T::lit(rng.random_range(-0.4..0.4))).collect();
        let (a, b) = pattern.assemble(&vals)?;
        let a0 = a.coeff(0);
        let inv = a0.clone().try_inverse().ok_or_else(|| Error::DegenerateModel("singular A0".into()))?;
        // monic AR part and input redefined so that B₀ = I as well
        let a = a.premul(&inv)?;
        let b = b.premul(&inv)?.postmul(&a0)?;
        let sys = LinearSystem::from_arma(a.clone(), b.clone())?;
        if sys.is_stable()?.radius < T::lit(0.8) {
            break (a, b);
        }
    };
    let mut top = DMatrix::zeros(m, 2 * m);
    top.view_mut((0, 0), (m, m)).copy_from(&a.coeff(p));
    top.view_mut((0, m), (m, m)).copy_from(&b.coeff(p));
    let svd = top.clone().svd(true, false);
    let u_mat = svd.u.ok_or_else(|| Error::Evaluation("SVD failed".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(T::zero(), |acc, &s| acc.max(s));
    let rank = sv.iter().filter(|&&s| s > rank_tol * smax).count();
    let left_null_dim = m - rank;
    let smallest = (0..sv.len()).min_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap_or(std::cmp::Ordering::Equal)).unwrap_or(0);
    let v: DVector<T> = u_mat.column(smallest).into_owned();

    let base = LinearSystem::from_arma(a.clone(), b.clone())?;
    let observed_indices = analyze_system(&base, None)?.indices;
    let trim = T::tol_floor(1e-13, 16.0);
    let mut deviation = T::zero();
    let mut blocks = Vec::new();
    let mut rank_per_beta = Vec::new();
    let mut rank_at_zero = None;
    for &beta in betas {
        let mb = &v * v.transpose() * T::lit(beta);
        let mz = PolynomialMatrix::new(vec![DMatrix::identity(m, m), mb])?;
        let scale = a.max_coeff_abs().max(b.max_coeff_abs());
        let ab = mz.mul(&a)?.trimmed(trim * scale);
        let bb = mz.mul(&b)?.trimmed(trim * scale);
        let param = Parametrization::ArmaFull(ArmaFull::new(ab, bb, p)?);
        let sys = param.system()?;
        for k in 0..nodes {
            let z = circle_node(k, nodes);
            deviation = deviation.max(max_modulus(&(sys.transfer(z)? - base.transfer(z)?)));
        }
        let cols = tangent_columns(&param, nodes)?;
        let r = numerical_rank(&cols, rank_tol);
        if beta == 0.0 {
            rank_at_zero = Some(r);
        }
        rank_per_beta.push(r);
        blocks.push(cols);
    }
    let rank_at_zero = rank_at_zero.ok_or_else(|| Error::Domain("the β grid must contain 0".into()))?;
    let rows = blocks[0].nrows();
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut stacked = DMatrix::zeros(rows, total);
    let mut at = 0;
    for blk in &blocks {
        stacked.view_mut((0, at), (rows, blk.ncols())).copy_from(blk);
        at += blk.ncols();
    }
    let stacked_rank = numerical_rank(&stacked, rank_tol);
    Ok(TangentProbeReport {
        indices: indices.to_vec(),
        canonical_free_count: pattern.free_count(),
        layout_dim: 2 * p * m * m,
        left_null_dim,
        betas: betas.to_vec(),
        transfer_deviation: deviation.as_f64(),
        rank_per_beta,
        rank_at_zero,
        stacked_rank,
        rank_grows: stacked_rank > rank_at_zero,
        observed_indices,
        nodes,
    })
}
