//! Block Hankel matrices, Kronecker indices and McMillan degree.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lsys::{LinearSystem, MarkovSequence};
use crate::scalar::Real;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Result of the top-down row search on a block Hankel matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HankelAnalysis<T: Real> {
    /// Retained row count per output channel.
    pub indices: Vec<usize>,
    /// Total retained rows; equals the sum of the indices.
    pub degree: usize,
    /// Zero-based positions of the retained rows.
    pub selected_rows: Vec<usize>,
    pub tolerance: T,
    pub singular_values: Vec<T>,
}

/// Block Hankel matrix with block `(i, j)` equal to `H_{i+j+1}` (zero-based
/// block indices), so `H₀` never appears.
pub fn build_hankel<T: Real>(seq: &MarkovSequence<T>, block_rows: usize, block_cols: usize) -> Result<DMatrix<T>> {
    if block_rows == 0 || block_cols == 0 {
        return Err(Error::Domain("Hankel matrix needs at least one block row and column".into()));
    }
    let needed = block_rows + block_cols - 1;
    if seq.truncation() < needed {
        return Err(Error::Truncation(format!(
            "Hankel with {block_rows}x{block_cols} blocks needs H_1..H_{needed}, sequence ends at H_{}",
            seq.truncation()
        )));
    }
    let (m, r) = seq.terms[0].shape();
    let mut h = DMatrix::zeros(block_rows * m, block_cols * r);
    for i in 0..block_rows {
        for j in 0..block_cols {
            h.view_mut((i * m, j * r), (m, r)).copy_from(&seq.terms[i + j + 1]);
        }
    }
    Ok(h)
}

fn singular_values<T: Real>(h: &DMatrix<T>) -> Vec<T> {
    if h.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<T> = h.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Count of singular values above `tol` times the largest.
pub fn numerical_rank<T: Real>(h: &DMatrix<T>, tol: T) -> usize {
    let sv = singular_values(h);
    match sv.first() {
        Some(&max) if max > T::zero() => sv.iter().filter(|&&s| s > tol * max).count(),
        _ => 0,
    }
}

/// Kronecker indices by scanning the rows of `h` top-down and keeping those
/// independent of the rows already kept.
///
/// A row survives when its Gram–Schmidt residual exceeds `tol` times both
/// its own norm and the largest singular value of `h`. Once a row of some
/// channel is rejected, the later rows of that channel are rejected too.
pub fn kronecker_indices<T: Real>(h: &DMatrix<T>, m: usize, tol: Option<T>) -> Result<HankelAnalysis<T>> {
    let tol = tol.unwrap_or_else(|| T::tol_floor(DEFAULT_RANK_TOL, 64.0));
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("rank tolerance must be positive, got {tol}")));
    }
    if m == 0 || !h.nrows().is_multiple_of(m) {
        return Err(Error::Dimension(format!("{} rows do not split into blocks of height {m}", h.nrows())));
    }
    let sv = singular_values(h);
    let sigma_max = sv.first().copied().unwrap_or_else(T::zero);
    let mut basis: Vec<DVector<T>> = Vec::new();
    let mut dead = vec![false; m];
    let mut indices = vec![0usize; m];
    let mut selected = Vec::new();
    for row in 0..h.nrows() {
        let channel = row % m;
        if dead[channel] {
            continue;
        }
        let original: DVector<T> = h.row(row).transpose();
        let row_norm = original.norm();
        let mut v = original;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, T::one());
            }
        }
        let residual = v.norm();
        if residual > tol * row_norm && residual > tol * sigma_max {
            basis.push(v / residual);
            indices[channel] += 1;
            selected.push(row);
        } else {
            dead[channel] = true;
        }
    }
    Ok(HankelAnalysis { degree: selected.len(), indices, selected_rows: selected, tolerance: tol, singular_values: sv })
}

/// Hankel truncation size used for a system: twice its degree bound, at
/// least one block.
fn truncation_blocks<T: Real>(s: &LinearSystem<T>) -> usize {
    (2 * s.degree_bound()).max(1)
}

fn system_hankel<T: Real>(s: &LinearSystem<T>) -> Result<DMatrix<T>> {
    let report = s.is_stable()?;
    if !report.stable {
        return Err(Error::Divergence(format!(
            "Hankel truncation of an unstable system (spectral radius {})",
            report.radius
        )));
    }
    let blocks = truncation_blocks(s);
    let seq = MarkovSequence::finite(s.markov_terms(2 * blocks)?);
    build_hankel(&seq, blocks, blocks)
}

/// McMillan degree as the numerical rank of the truncated Hankel matrix.
pub fn mcmillan_degree<T: Real>(s: &LinearSystem<T>, tol: Option<T>) -> Result<usize> {
    let tol = tol.unwrap_or_else(|| T::tol_floor(DEFAULT_RANK_TOL, 64.0));
    if !(tol > T::zero()) {
        return Err(Error::Domain(format!("rank tolerance must be positive, got {tol}")));
    }
    Ok(numerical_rank(&system_hankel(s)?, tol))
}

/// Kronecker indices of a system from its truncated Hankel matrix.
pub fn analyze_system<T: Real>(s: &LinearSystem<T>, tol: Option<T>) -> Result<HankelAnalysis<T>> {
    kronecker_indices(&system_hankel(s)?, s.outputs(), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::PolynomialMatrix;

    fn scalar_ss(a: f64, b: f64) -> LinearSystem<f64> {
        let s = |x| DMatrix::from_element(1, 1, x);
        LinearSystem::from_state_space(s(a), s(b), s(1.0), Some(s(0.0))).unwrap()
    }

    #[test]
    fn scalar_hankel_entries() {
        let (a, b) = (0.5, 2.0);
        let seq = scalar_ss(a, b).markov_expand(crate::lsys::Truncation::Fixed(5)).unwrap();
        let h = build_hankel(&seq, 3, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((h[(i, j)] - a.powi((i + j) as i32) * b).abs() < 1e-15);
            }
        }
        assert!(matches!(build_hankel(&seq, 3, 4), Err(Error::Truncation(_))));
    }

    #[test]
    fn zero_sequence_gives_zero_hankel() {
        let seq = MarkovSequence::finite(vec![DMatrix::<f64>::zeros(2, 2); 8]);
        let h = build_hankel(&seq, 3, 3).unwrap();
        assert!(h.iter().all(|x| *x == 0.0));
        let an = kronecker_indices(&h, 2, None).unwrap();
        assert_eq!((an.indices.clone(), an.degree), (vec![0, 0], 0));
    }

    #[test]
    fn scalar_first_order() {
        let s = scalar_ss(0.5, 1.0);
        let an = analyze_system(&s, None).unwrap();
        assert_eq!(an.indices, vec![1]);
        assert_eq!(mcmillan_degree(&s, None).unwrap(), 1);
    }

    #[test]
    fn unimodular_example() {
        let u = PolynomialMatrix::new(vec![
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        ])
        .unwrap();
        let s = LinearSystem::from_arma(PolynomialMatrix::identity(2), u).unwrap();
        let seq = s.markov_expand(crate::lsys::Truncation::Fixed(6)).unwrap();
        let h = build_hankel(&seq, 3, 3).unwrap();
        assert_eq!(h.iter().filter(|x| **x != 0.0).count(), 1);
        let an = kronecker_indices(&h, 2, None).unwrap();
        assert_eq!(an.indices, vec![1, 0]);
        assert_eq!(an.degree, 1);
        assert_eq!(mcmillan_degree(&s, None).unwrap(), 1);
    }

    #[test]
    fn diagonal_pair_and_identity() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.3]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let s = LinearSystem::from_state_space(a, b, DMatrix::identity(2, 2), None).unwrap();
        assert_eq!(mcmillan_degree(&s, None).unwrap(), 2);
        assert_eq!(analyze_system(&s, None).unwrap().indices, vec![1, 1]);
        let id = LinearSystem::<f64>::from_arma(PolynomialMatrix::identity(3), PolynomialMatrix::identity(3)).unwrap();
        assert_eq!(mcmillan_degree(&id, None).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_tolerance_and_unstable() {
        let h = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(kronecker_indices(&h, 1, Some(0.0)), Err(Error::Domain(_))));
        assert!(matches!(mcmillan_degree(&scalar_ss(1.5, 1.0), None), Err(Error::Divergence(_))));
    }
}
