//! Riemannian metric tensors on model sets.
//!
//! `g_ij` is the circle mean of `tr[D_i(z) D_jᵀ(z⁻¹)]`, where `D_i` is the
//! tangent of some transfer function along coordinate `i`. For real systems
//! `D_j(z⁻¹) = conj D_j(z)` on the unit circle, so one evaluation per node
//! suffices.

pub mod param;
pub mod quadrature;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{frobenius_pairing, max_abs, CMatrix, Real};
pub use param::{dh_numeric, ArmaFull, FiniteDifference, Parametrization, SsEntries};
pub use quadrature::{circle_average, circle_average_scalar, circle_mean_fixed, CircleMean, Quadrature};

/// Smallest distance from the unit circle accepted for tensor computation.
pub const TENSOR_STABILITY_MARGIN: f64 = 1e-6;

/// How tangents are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivativeMode {
    Analytic,
    Numeric,
}

impl DerivativeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::Numeric => "numeric",
        }
    }
}

/// Provenance and quality figures of a tensor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorMeta {
    /// Parametrization name.
    pub parametrization: String,
    /// `deterministic`, `one_sided_U` or `two_sided_T`.
    pub kind: String,
    pub derivative: DerivativeMode,
    pub nodes: usize,
    pub quadrature_delta: f64,
    /// Markov/covariance truncation length when a series was summed.
    pub truncation: Option<usize>,
    /// `max |g_ij − g_ji|` before symmetrization.
    pub asymmetry: f64,
    /// Largest imaginary residue of the quadrature.
    pub max_imaginary: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Symmetric metric tensor with coordinate labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor<T: Real> {
    pub entries: DMatrix<T>,
    pub labels: Vec<String>,
    pub meta: TensorMeta,
}

impl<T: Real> MetricTensor<T> {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest entry magnitude.
    pub fn scale(&self) -> T {
        max_abs(&self.entries)
    }

    pub fn det(&self) -> T {
        self.entries.determinant()
    }
}

/// Circle mean of the Gram matrix of the tangents returned by `tangents`.
pub(crate) fn assemble<T, F>(
    labels: Vec<String>,
    parametrization: &str,
    kind: &str,
    derivative: DerivativeMode,
    truncation: Option<usize>,
    mut tangents: F,
    quad: &Quadrature<T>,
) -> Result<MetricTensor<T>>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<Vec<CMatrix<T>>>,
{
    let d = labels.len();
    if d == 0 {
        return Err(Error::Dimension("tensor over zero coordinates".into()));
    }
    let mean = circle_average(
        |z| {
            let t = tangents(z)?;
            let mut g = CMatrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let v = frobenius_pairing(&t[i], &t[j]);
                    g[(i, j)] = v;
                    g[(j, i)] = v.conj();
                }
            }
            Ok(g)
        },
        quad,
    )?;
    let raw = mean.value.map(|v| v.re);
    let max_imaginary = mean.value.iter().fold(T::zero(), |a, v| a.max(v.im.abs()));
    let asymmetry = max_abs(&(&raw - raw.transpose()));
    let entries = (&raw + raw.transpose()) * T::lit(0.5);
    let eig = entries.clone().symmetric_eigenvalues();
    let min_eigenvalue = eig.iter().fold(T::lit(f64::INFINITY), |a, &x| a.min(x));
    let max_eigenvalue = eig.iter().fold(T::lit(f64::NEG_INFINITY), |a, &x| a.max(x));
    Ok(MetricTensor {
        entries,
        labels,
        meta: TensorMeta {
            parametrization: parametrization.to_string(),
            kind: kind.to_string(),
            derivative,
            nodes: mean.nodes,
            quadrature_delta: mean.delta.as_f64(),
            truncation,
            asymmetry: asymmetry.as_f64(),
            max_imaginary: max_imaginary.as_f64(),
            min_eigenvalue: min_eigenvalue.as_f64(),
            max_eigenvalue: max_eigenvalue.as_f64(),
        },
    })
}

/// Central-difference tangents of `f` at `z`, given the systems rebuilt at
/// `θ ± h e_i`.
pub(crate) fn perturbed_points<T: Real>(param: &Parametrization<T>) -> Result<Vec<(Parametrization<T>, Parametrization<T>, T)>> {
    let theta = param.theta();
    (0..theta.len())
        .map(|i| {
            let h = param::central_step::<T>() * T::one().max(theta[i].abs());
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            Ok((param.with_theta(&plus)?, param.with_theta(&minus)?, h))
        })
        .collect()
}

pub(crate) fn require_tensor_stability<T: Real>(param: &Parametrization<T>) -> Result<()> {
    let report = param.system()?.stability(T::lit(TENSOR_STABILITY_MARGIN))?;
    if !report.stable {
        return Err(Error::Divergence(format!(
            "tensor requires poles inside radius 1 - {TENSOR_STABILITY_MARGIN:e}; spectral radius is {}",
            report.radius
        )));
    }
    Ok(())
}

/// Deterministic metric tensor `g_ij = mean_z tr[∂_i H(z) ∂_j H(z)^*]`.
pub fn metric_tensor<T: Real>(
    param: &Parametrization<T>,
    mode: DerivativeMode,
    quad: &Quadrature<T>,
) -> Result<MetricTensor<T>> {
    require_tensor_stability(param)?;
    let labels = param.labels();
    match mode {
        DerivativeMode::Analytic => {
            assemble(labels, param.name(), "deterministic", mode, None, |z| param.tangents(z), quad)
        }
        DerivativeMode::Numeric => {
            let pts = perturbed_points(param)?;
            let systems = pts
                .iter()
                .map(|(p, m, h)| Ok((p.system()?, m.system()?, *h)))
                .collect::<Result<Vec<_>>>()?;
            assemble(
                labels,
                param.name(),
                "deterministic",
                mode,
                None,
                |z| {
                    systems
                        .iter()
                        .map(|(p, m, h)| Ok((p.transfer(z)? - m.transfer(z)?) / Complex::new(*h + *h, T::zero())))
                        .collect()
                },
                quad,
            )
        }
    }
}
