//! Mean value of a function over the unit circle.
//!
//! `(1/2πi)∮ f(z) z⁻¹ dz` is the average of `f` over `|z| = 1`; the N-point
//! rule with equispaced nodes is exact for Laurent polynomials of degree
//! below N and converges geometrically for functions analytic on an annulus
//! around the circle.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{circle_node, max_modulus, CMatrix, Real};

/// Node-doubling policy for [`circle_average`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T: Real> {
    /// Starting node count; must be a power of two.
    pub initial_nodes: usize,
    /// Largest node count tried before giving up.
    pub max_nodes: usize,
    /// Relative change between successive doublings accepted as converged.
    pub rel_tol: T,
}

impl<T: Real> Default for Quadrature<T> {
    fn default() -> Self {
        Self { initial_nodes: 512, max_nodes: 1 << 16, rel_tol: T::tol_floor(1e-11, 64.0) }
    }
}

impl<T: Real> Quadrature<T> {
    pub fn with_nodes(initial_nodes: usize) -> Self {
        Self { initial_nodes, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !self.initial_nodes.is_power_of_two() || !self.max_nodes.is_power_of_two() {
            return Err(Error::Domain("node counts must be powers of two".into()));
        }
        if self.initial_nodes > self.max_nodes {
            return Err(Error::Domain(format!(
                "initial node count {} exceeds the maximum {}",
                self.initial_nodes, self.max_nodes
            )));
        }
        Ok(())
    }
}

/// Converged circle mean together with the node count that produced it and
/// the relative change of the last doubling.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleMean<T: Real> {
    pub value: CMatrix<T>,
    pub nodes: usize,
    pub delta: T,
}

/// `(1/N) Σ_k f(e^{2πik/N})` at a fixed node count.
pub fn circle_mean_fixed<T, F>(mut f: F, nodes: usize) -> Result<CMatrix<T>>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<CMatrix<T>>,
{
    let (sum, _) = accumulate(&mut f, nodes, 0, 1)?;
    Ok(sum / Complex::new(T::lit(nodes as f64), T::zero()))
}

/// Sum of `f` over the nodes `exp(2πi (offset + stride·k) / total)`.
fn accumulate<T, F>(f: &mut F, total: usize, offset: usize, stride: usize) -> Result<(CMatrix<T>, T)>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<CMatrix<T>>,
{
    let mut sum: Option<CMatrix<T>> = None;
    let mut magnitude = T::zero();
    let mut k = offset;
    while k < total {
        let v = f(circle_node(k, total))?;
        magnitude += max_modulus(&v);
        match sum.as_mut() {
            Some(s) => *s += &v,
            None => sum = Some(v),
        }
        k += stride;
    }
    let sum = sum.ok_or_else(|| Error::Domain("no quadrature nodes".into()))?;
    Ok((sum, magnitude))
}

/// Circle mean with node doubling until successive estimates agree.
///
/// The relative change is measured against the larger of the result and the
/// mean integrand magnitude, so integrals that cancel to zero still converge.
pub fn circle_average<T, F>(mut f: F, q: &Quadrature<T>) -> Result<CircleMean<T>>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<CMatrix<T>>,
{
    q.validate()?;
    let mut n = q.initial_nodes;
    let (mut sum, mut magnitude) = accumulate(&mut f, n, 0, 1)?;
    let mut mean = &sum / Complex::new(T::lit(n as f64), T::zero());
    loop {
        let total = 2 * n;
        let (odd, odd_mag) = accumulate(&mut f, total, 1, 2)?;
        sum += odd;
        magnitude += odd_mag;
        let next = &sum / Complex::new(T::lit(total as f64), T::zero());
        let scale = max_modulus(&next).max(magnitude / T::lit(total as f64));
        let change = max_modulus(&(&next - &mean));
        let delta = if scale > T::zero() { change / scale } else { T::zero() };
        mean = next;
        n = total;
        if delta <= q.rel_tol {
            return Ok(CircleMean { value: mean, nodes: n, delta });
        }
        if n >= q.max_nodes {
            return Err(Error::Quadrature { nodes: n, delta: delta.as_f64() });
        }
    }
}

/// Scalar convenience wrapper around [`circle_average`].
pub fn circle_average_scalar<T, F>(mut f: F, q: &Quadrature<T>) -> Result<(Complex<T>, CircleMean<T>)>
where
    T: Real,
    F: FnMut(Complex<T>) -> Result<Complex<T>>,
{
    let mean = circle_average(|z| Ok(CMatrix::from_element(1, 1, f(z)?)), q)?;
    Ok((mean.value[(0, 0)], mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    fn avg(f: impl Fn(C) -> C) -> C {
        circle_average_scalar(|z| Ok(f(z)), &Quadrature::default()).unwrap().0
    }

    #[test]
    fn harmonics_are_orthogonal() {
        for k in [-3i32, -1, 1, 2, 7] {
            let v = avg(|z| z.powi(k));
            assert!(v.norm() < 1e-14, "k={k}: {v}");
        }
        let v = avg(|_| C::new(1.0, 0.0));
        assert!((v - 1.0).norm() < 1e-15);
    }

    #[test]
    fn simple_pole_product() {
        let a = 0.5;
        let v = avg(|z| 1.0 / ((z + a) * (1.0 / z + a)));
        assert!((v.re - 4.0 / 3.0).abs() < 1e-13);
        assert!(v.im.abs() < 1e-14);
    }

    #[test]
    fn double_pole_residue() {
        // residue at z = -a of (z+b)/(z+a)^2 * z/(1+az) * z^{-1}
        let (a, b) = (0.5, 0.3);
        let v = avg(|z| (z + b) / ((z + a) * (z + a)) * z / (1.0 + a * z));
        let expect = (1.0 - a * b) / (1.0 - a * a) / (1.0 - a * a);
        assert!((expect - 1.511_111_111_111_111).abs() < 1e-12);
        assert!((v.re - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn poles_on_the_circle_do_not_converge() {
        let q = Quadrature { initial_nodes: 8, max_nodes: 64, rel_tol: 1e-11 };
        let r = circle_average_scalar(|z: C| Ok(1.0 / (z - C::new(0.999_999, 0.0))), &q);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn rejects_non_power_of_two() {
        let q = Quadrature { initial_nodes: 100, max_nodes: 1 << 16, rel_tol: 1e-11 };
        assert!(circle_average_scalar(|_z: C| Ok(C::new(1.0, 0.0)), &q).is_err());
    }

    #[test]
    fn single_precision_converges() {
        let (v, _) = circle_average_scalar(
            |z: Complex<f32>| Ok(Complex::new(1.0f32, 0.0) / ((z + 0.5) * (z.inv() + 0.5))),
            &Quadrature::default(),
        )
        .unwrap();
        assert!((v.re - 4.0 / 3.0).abs() < 1e-5);
    }
}
