//! Stochastic systems `[H(z), R]`: covariances, spectral density and the
//! two stochastic metric tensors.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lsys::{geometric_tail, LinearSystem, Truncation};
use crate::metric::param::central_step;
use crate::metric::{assemble, require_tensor_stability, DerivativeMode, MetricTensor, Parametrization, Quadrature};
use crate::scalar::{complexify, max_abs, max_modulus, circle_node, CMatrix, Real};

/// Which generating function the tensor differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochasticMode {
    /// One-sided `U(z) = Σ_{k≥0} Γ_k z^{-k}`.
    OneSidedU,
    /// Spectral density `T(z) = H(z) R Hᵀ(z⁻¹)`.
    TwoSidedT,
}

impl StochasticMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OneSidedU => "one_sided_U",
            Self::TwoSidedT => "two_sided_T",
        }
    }
}

/// A stable square system driven by white noise with covariance `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticSystem<T: Real> {
    system: LinearSystem<T>,
    r: DMatrix<T>,
    r_coords: bool,
}

/// `Γ₀ … Γ_K` with `Γ_k = E[y_t y_{t+k}ᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSequence<T: Real> {
    pub gammas: Vec<DMatrix<T>>,
    pub tail_bound: T,
}

impl<T: Real> CovarianceSequence<T> {
    pub fn truncation(&self) -> usize {
        self.gammas.len().saturating_sub(1)
    }

    /// `Σ_k Γ_k z^{-k}`.
    pub fn eval(&self, z: Complex<T>) -> CMatrix<T> {
        series_eval(&self.gammas, z)
    }

    /// `Σ_k Γ_kᵀ z^{k}`, that is `Uᵀ(z⁻¹)`.
    pub fn eval_reflected(&self, z: Complex<T>) -> CMatrix<T> {
        let (m, r) = self.gammas[0].shape();
        let mut acc = CMatrix::<T>::zeros(r, m);
        for g in self.gammas.iter().rev() {
            acc *= z;
            acc += complexify(&g.transpose());
        }
        acc
    }
}

fn series_eval<T: Real>(terms: &[DMatrix<T>], z: Complex<T>) -> CMatrix<T> {
    let (m, r) = terms[0].shape();
    let w = z.inv();
    let mut acc = CMatrix::<T>::zeros(m, r);
    for t in terms.iter().rev() {
        acc *= w;
        acc += complexify(t);
    }
    acc
}

fn check_covariance<T: Real>(r: &DMatrix<T>, m: usize) -> Result<()> {
    if r.shape() != (m, m) {
        return Err(Error::Dimension(format!("R has shape {:?}, expected {:?}", r.shape(), (m, m))));
    }
    let scale = max_abs(r).max(T::one());
    if max_abs(&(r - r.transpose())) > T::tol_floor(1e-12, 16.0) * scale {
        return Err(Error::Domain("R is not symmetric".into()));
    }
    if r.clone().cholesky().is_none() {
        return Err(Error::Domain("R is not positive definite".into()));
    }
    Ok(())
}

/// `Γ_k = Σ_i H_i R H_{i+k}ᵀ` for `k = 0 … count−1`.
fn covariances<T: Real>(h: &[DMatrix<T>], r: &DMatrix<T>, count: usize) -> Vec<DMatrix<T>> {
    let hr: Vec<DMatrix<T>> = h.iter().map(|x| x * r).collect();
    let ht: Vec<DMatrix<T>> = h.iter().map(|x| x.transpose()).collect();
    (0..count)
        .map(|k| {
            let mut g = DMatrix::zeros(r.nrows(), r.nrows());
            for i in 0..h.len().saturating_sub(k) {
                g += &hr[i] * &ht[i + k];
            }
            g
        })
        .collect()
}

/// Symmetric unit direction for the upper-triangle coordinate `(a, b)`.
fn sym_unit<T: Real>(m: usize, a: usize, b: usize) -> DMatrix<T> {
    let mut e = DMatrix::zeros(m, m);
    e[(a, b)] = T::one();
    e[(b, a)] = T::one();
    e
}

fn upper_pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m).flat_map(|a| (a..m).map(move |b| (a, b))).collect()
}

impl<T: Real> StochasticSystem<T> {
    pub fn new(system: LinearSystem<T>, r: DMatrix<T>, r_coords: bool) -> Result<Self> {
        let m = system.outputs();
        if system.inputs() != m {
            return Err(Error::Dimension(format!("stochastic system needs r = m, got {}x{}", m, system.inputs())));
        }
        check_covariance(&r, m)?;
        let report = system.is_stable()?;
        if !report.stable {
            return Err(Error::Divergence(format!("stochastic system is unstable (spectral radius {})", report.radius)));
        }
        Ok(Self { system, r, r_coords })
    }

    pub fn system(&self) -> &LinearSystem<T> {
        &self.system
    }

    pub fn noise_covariance(&self) -> &DMatrix<T> {
        &self.r
    }

    pub fn r_coords(&self) -> bool {
        self.r_coords
    }

    /// Covariances up to lag `k`, defaulting to the certified Markov length.
    pub fn covariance_sequence(&self, k: Option<usize>) -> Result<CovarianceSequence<T>> {
        let seq = self.system.markov_expand(Truncation::Adaptive)?;
        let count = k.map_or(seq.terms.len(), |k| k + 1);
        let h = if count > seq.terms.len() { self.system.markov_terms(count)? } else { seq.terms };
        let gammas = covariances(&h, &self.r, count);
        let g0 = &gammas[0];
        debug_assert!(max_abs(&(g0 - g0.transpose())) <= T::tol_floor(1e-10, 64.0) * max_abs(g0).max(T::one()));
        let tail_bound = geometric_tail(&gammas, seq.rho);
        Ok(CovarianceSequence { gammas, tail_bound })
    }

    /// `U(z)` by the truncated covariance series.
    pub fn u_eval(&self, z: Complex<T>) -> Result<CMatrix<T>> {
        Ok(self.covariance_sequence(None)?.eval(z))
    }

    /// `T(z) = H(z) R Hᵀ(z⁻¹)`.
    pub fn t_eval(&self, z: Complex<T>) -> Result<CMatrix<T>> {
        let h = self.system.transfer(z)?;
        let hr = self.system.transfer(z.inv())?.transpose();
        Ok(h * complexify(&self.r) * hr)
    }

    /// Largest entry of `Tᵀ − U − Uᵀ(z⁻¹) + Γ₀` over `nodes` circle points.
    ///
    /// With `Γ_k = Σ H_i R H_{i+k}ᵀ` the series `U(z) + Uᵀ(z⁻¹) − Γ₀` carries
    /// `Γ_k` at `z^{-k}`, which is the lag structure of `T(z⁻¹) = Tᵀ(z)`. The
    /// transpose is invisible for scalar systems.
    pub fn tm_identity_residual(&self, nodes: usize) -> Result<T> {
        let cov = self.covariance_sequence(None)?;
        let g0 = complexify(&cov.gammas[0]);
        let mut worst = T::zero();
        for k in 0..nodes {
            let z = circle_node(k, nodes);
            let resid = self.t_eval(z)?.transpose() - cov.eval(z) - cov.eval_reflected(z) + &g0;
            worst = worst.max(max_modulus(&resid));
        }
        Ok(worst)
    }
}

/// Stochastic metric tensor for `param` driven by noise covariance `r`.
///
/// With `r_coords` the upper triangle of `R` is appended to the coordinates.
pub fn metric_tensor_stochastic<T: Real>(
    param: &Parametrization<T>,
    r: &DMatrix<T>,
    r_coords: bool,
    mode: StochasticMode,
    derivative: DerivativeMode,
    quad: &Quadrature<T>,
) -> Result<MetricTensor<T>> {
    require_tensor_stability(param)?;
    let sys = param.system()?;
    let m = sys.outputs();
    if sys.inputs() != m {
        return Err(Error::Dimension("stochastic tensor needs a square system".into()));
    }
    check_covariance(r, m)?;
    let mut labels = param.labels();
    let pairs = if r_coords { upper_pairs(m) } else { Vec::new() };
    labels.extend(pairs.iter().map(|(a, b)| format!("R[{},{}]", a + 1, b + 1)));
    let d = param.dim();
    let kind = mode.as_str();
    let count = sys.markov_expand(Truncation::Adaptive)?.terms.len();
    let rc = complexify(r);

    match (mode, derivative) {
        (StochasticMode::TwoSidedT, DerivativeMode::Analytic) => assemble(
            labels,
            param.name(),
            kind,
            derivative,
            None,
            |z| {
                let h = sys.transfer(z)?;
                let hs = h.adjoint();
                let hr = &h * &rc;
                let rhs = &rc * &hs;
                let mut out: Vec<CMatrix<T>> = param
                    .tangents(z)?
                    .iter()
                    .map(|dh| dh * &rhs + &hr * dh.adjoint())
                    .collect();
                out.extend(pairs.iter().map(|&(a, b)| &h * complexify(&sym_unit::<T>(m, a, b)) * &hs));
                Ok(out)
            },
            quad,
        ),
        (StochasticMode::OneSidedU, DerivativeMode::Analytic) => {
            let h = sys.markov_terms(count)?;
            let hr: Vec<DMatrix<T>> = h.iter().map(|x| x * r).collect();
            let mut series: Vec<Vec<DMatrix<T>>> = Vec::with_capacity(d + pairs.len());
            for dh in param.markov_tangents(count)? {
                let dhr: Vec<DMatrix<T>> = dh.iter().map(|x| x * r).collect();
                let g = (0..count)
                    .map(|k| {
                        let mut acc = DMatrix::zeros(m, m);
                        for i in 0..count - k {
                            acc += &dhr[i] * h[i + k].transpose() + &hr[i] * dh[i + k].transpose();
                        }
                        acc
                    })
                    .collect();
                series.push(g);
            }
            for &(a, b) in &pairs {
                series.push(covariances(&h, &sym_unit(m, a, b), count));
            }
            assemble(
                labels,
                param.name(),
                kind,
                derivative,
                Some(count - 1),
                |z| Ok(series.iter().map(|s| series_eval(s, z)).collect()),
                quad,
            )
        }
        (_, DerivativeMode::Numeric) => {
            let theta = param.theta();
            let mut points: Vec<(LinearSystem<T>, DMatrix<T>, LinearSystem<T>, DMatrix<T>, T)> = Vec::new();
            for i in 0..d {
                let h = central_step::<T>() * T::one().max(theta[i].abs());
                let mut plus = theta.clone();
                plus[i] += h;
                let mut minus = theta.clone();
                minus[i] -= h;
                points.push((
                    param.with_theta(&plus)?.system()?,
                    r.clone(),
                    param.with_theta(&minus)?.system()?,
                    r.clone(),
                    h,
                ));
            }
            for &(a, b) in &pairs {
                let h = central_step::<T>() * T::one().max(r[(a, b)].abs());
                let mut step = DMatrix::zeros(m, m);
                step[(a, b)] = h;
                step[(b, a)] = h;
                points.push((sys.clone(), r + &step, sys.clone(), r - &step, h));
            }
            match mode {
                StochasticMode::TwoSidedT => {
                    let t_of = |s: &LinearSystem<T>, rr: &DMatrix<T>, z: Complex<T>| -> Result<CMatrix<T>> {
                        let hz = s.transfer(z)?;
                        Ok(&hz * complexify(rr) * hz.adjoint())
                    };
                    assemble(
                        labels,
                        param.name(),
                        kind,
                        derivative,
                        None,
                        |z| {
                            points
                                .iter()
                                .map(|(sp, rp, sm, rm, h)| {
                                    Ok((t_of(sp, rp, z)? - t_of(sm, rm, z)?) / Complex::new(*h + *h, T::zero()))
                                })
                                .collect()
                        },
                        quad,
                    )
                }
                StochasticMode::OneSidedU => {
                    let diffs = points
                        .iter()
                        .map(|(sp, rp, sm, rm, h)| {
                            let gp = covariances(&sp.markov_terms(count)?, rp, count);
                            let gm = covariances(&sm.markov_terms(count)?, rm, count);
                            Ok(gp.iter().zip(&gm).map(|(x, y)| (x - y) / (*h + *h)).collect::<Vec<_>>())
                        })
                        .collect::<Result<Vec<_>>>()?;
                    assemble(
                        labels,
                        param.name(),
                        kind,
                        derivative,
                        Some(count - 1),
                        |z| Ok(diffs.iter().map(|s| series_eval(s, z)).collect()),
                        quad,
                    )
                }
            }
        }
    }
}

impl<T: Real> StochasticSystem<T> {
    /// Stochastic tensor of this system in the coordinates of `param`, which
    /// must describe the same transfer function.
    pub fn metric_tensor(
        &self,
        param: &Parametrization<T>,
        mode: StochasticMode,
        derivative: DerivativeMode,
        quad: &Quadrature<T>,
    ) -> Result<MetricTensor<T>> {
        let other = param.system()?;
        let z = circle_node(1, 7);
        let gap = max_modulus(&(other.transfer(z)? - self.system.transfer(z)?));
        let scale = max_modulus(&self.system.transfer(z)?).max(T::one());
        if gap > T::tol_floor(1e-9, 1e4) * scale {
            return Err(Error::Domain("parametrization does not describe the stochastic system".into()));
        }
        metric_tensor_stochastic(param, &self.r, self.r_coords, mode, derivative, quad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::PolynomialMatrix;

    fn s(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    fn strictly_proper(a: f64, b: f64) -> StochasticSystem<f64> {
        let sys = LinearSystem::from_state_space(s(a), s(b), s(1.0), Some(s(0.0))).unwrap();
        StochasticSystem::new(sys, s(1.0), false).unwrap()
    }

    #[test]
    fn strictly_proper_covariance_and_generating_functions() {
        let (a, b) = (0.5, 1.0);
        let ss = strictly_proper(a, b);
        let cov = ss.covariance_sequence(None).unwrap();
        assert!((cov.gammas[0][(0, 0)] + b * b / (a * a - 1.0)).abs() < 1e-14);
        let z = circle_node::<f64>(3, 11);
        let u = -b * b * z / ((a * a - 1.0) * (z - a));
        assert!((ss.u_eval(z).unwrap()[(0, 0)] - u).norm() < 1e-13);
        let t = -b * b * z / ((z - a) * (a * z - 1.0));
        assert!((ss.t_eval(z).unwrap()[(0, 0)] - t).norm() < 1e-13);
        assert!(ss.tm_identity_residual(64).unwrap() < 1e-12);
    }

    #[test]
    fn arma11_covariances() {
        let (a, b) = (0.5, 0.3);
        let sys =
            LinearSystem::from_arma(PolynomialMatrix::scalar(&[1.0, a]), PolynomialMatrix::scalar(&[1.0, b])).unwrap();
        let ss = StochasticSystem::new(sys, s(1.0), false).unwrap();
        let g0 = ss.covariance_sequence(None).unwrap().gammas[0][(0, 0)];
        assert!((g0 - (2.0 * b * a - b * b - 1.0) / (a * a - 1.0)).abs() < 1e-14);
        let z = circle_node::<f64>(2, 9);
        let u = (b * a * a - b + 2.0 * b * a * z - b * b * z - z) / ((a * a - 1.0) * (a + z));
        assert!((ss.u_eval(z).unwrap()[(0, 0)] - u).norm() < 1e-13);
        let t = (z + b) * (1.0 + b * z) / ((a * z + 1.0) * (a + z));
        assert!((ss.t_eval(z).unwrap()[(0, 0)] - t).norm() < 1e-13);
    }

    #[test]
    fn white_noise() {
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let sys = LinearSystem::from_arma(PolynomialMatrix::identity(2), PolynomialMatrix::identity(2)).unwrap();
        let ss = StochasticSystem::new(sys, r.clone(), false).unwrap();
        let z = circle_node::<f64>(1, 5);
        assert!(max_modulus(&(ss.u_eval(z).unwrap() - complexify(&r))) < 1e-15);
        assert!(max_modulus(&(ss.t_eval(z).unwrap() - complexify(&r))) < 1e-15);
        assert!(ss.tm_identity_residual(16).unwrap() < 1e-15);
    }

    #[test]
    fn identity_orientation_for_vector_systems() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, -0.2, 0.4]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 0.7]);
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.4, 1.0]);
        let sys = LinearSystem::from_state_space(a, b, c, None).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let ss = StochasticSystem::new(sys, r, false).unwrap();
        assert!(ss.tm_identity_residual(64).unwrap() < 1e-12);
        let cov = ss.covariance_sequence(None).unwrap();
        let z = circle_node::<f64>(3, 16);
        let untransposed = ss.t_eval(z).unwrap() - cov.eval(z) - cov.eval_reflected(z) + complexify(&cov.gammas[0]);
        assert!(max_modulus(&untransposed) > 1e-3);
    }

    #[test]
    fn rejects_bad_covariance() {
        let sys = LinearSystem::from_arma(PolynomialMatrix::identity(1), PolynomialMatrix::identity(1)).unwrap();
        assert!(StochasticSystem::new(sys.clone(), s(-1.0), false).is_err());
        let sys2 = LinearSystem::from_arma(PolynomialMatrix::identity(2), PolynomialMatrix::identity(2)).unwrap();
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(StochasticSystem::new(sys2, asym, false).is_err());
    }

    #[test]
    fn strictly_proper_tensors_at_spot() {
        let (a, b) = (0.5, 1.0);
        let ss = strictly_proper(a, b);
        let p = Parametrization::ss_entries(ss.system()).unwrap();
        let q = Quadrature::default();
        let g1 = ss.metric_tensor(&p, StochasticMode::TwoSidedT, DerivativeMode::Analytic, &q).unwrap();
        let g2 = ss.metric_tensor(&p, StochasticMode::OneSidedU, DerivativeMode::Analytic, &q).unwrap();
        let d = a * a - 1.0;
        let g1_expect = [
            -2.0 * (2.0 * a.powi(4) + 7.0 * a * a + 1.0) * b.powi(4) / d.powi(5),
            4.0 * a * b.powi(3) * (a * a + 2.0) / d.powi(4),
            -4.0 * b * b * (a * a + 1.0) / d.powi(3),
        ];
        let g2_expect = [-(9.0 * a * a + 1.0) * b.powi(4) / d.powi(5), 6.0 * a * b.powi(3) / d.powi(4), -4.0 * b * b / d.powi(3)];
        for (g, e) in [(&g1, g1_expect), (&g2, g2_expect)] {
            let got = [g.entries[(0, 0)], g.entries[(0, 1)], g.entries[(1, 1)]];
            for (x, y) in got.iter().zip(e) {
                assert!((x - y).abs() < 1e-10 * y.abs(), "{x} vs {y}");
            }
        }
        for mode in [StochasticMode::TwoSidedT, StochasticMode::OneSidedU] {
            let a_ = ss.metric_tensor(&p, mode, DerivativeMode::Analytic, &q).unwrap();
            let n_ = ss.metric_tensor(&p, mode, DerivativeMode::Numeric, &q).unwrap();
            assert!((&a_.entries - &n_.entries).abs().max() < 1e-5 * a_.scale());
        }
    }

    #[test]
    fn r_coordinates_and_scaling() {
        let (a, b) = (0.4, 0.7);
        let sys = LinearSystem::from_state_space(s(a), s(b), s(1.0), None).unwrap();
        let p = Parametrization::ss_entries(&sys).unwrap();
        let q = Quadrature::default();
        for mode in [StochasticMode::TwoSidedT, StochasticMode::OneSidedU] {
            let g = metric_tensor_stochastic(&p, &s(1.0), true, mode, DerivativeMode::Analytic, &q).unwrap();
            assert_eq!(g.labels.last().unwrap(), "R[1,1]");
            let n = metric_tensor_stochastic(&p, &s(1.0), true, mode, DerivativeMode::Numeric, &q).unwrap();
            assert!((&g.entries - &n.entries).abs().max() < 1e-6 * g.scale());
            let g3 = metric_tensor_stochastic(&p, &s(3.0), false, mode, DerivativeMode::Analytic, &q).unwrap();
            let g1 = metric_tensor_stochastic(&p, &s(1.0), false, mode, DerivativeMode::Analytic, &q).unwrap();
            assert!((&g3.entries - &g1.entries * 9.0).abs().max() < 1e-11 * g3.scale());
        }
    }
}
