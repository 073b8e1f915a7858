use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lsgeom::charts::{extract_chart, random_chart_point, ss_from_chart, ChartCoordinates, ChartId};
use lsgeom::hankel::analyze_system;
use lsgeom::lsys::LinearSystem;
use lsgeom::metric::{metric_tensor, DerivativeMode, Parametrization, Quadrature};
use lsgeom::polymat::PolynomialMatrix;
use lsgeom::stochastic::{metric_tensor_stochastic, StochasticMode};

fn arma11(a: f32, b: f32) -> Parametrization<f32> {
    let sys = LinearSystem::from_arma(PolynomialMatrix::scalar(&[1.0, a]), PolynomialMatrix::scalar(&[1.0, b])).unwrap();
    Parametrization::arma_full(&sys, None).unwrap()
}

#[test]
fn deterministic_tensor_in_f32() {
    let g = metric_tensor(&arma11(0.5, 0.3), DerivativeMode::Analytic, &Quadrature::default()).unwrap();
    assert!((g.entries[(0, 0)] - 1.807_407_4).abs() < 1e-4);
    assert!((g.entries[(0, 1)] + 1.511_111_1).abs() < 1e-4);
    assert!((g.entries[(1, 1)] - 1.333_333_3).abs() < 1e-4);
    let n = metric_tensor(&arma11(0.5, 0.3), DerivativeMode::Numeric, &Quadrature::default()).unwrap();
    assert!((&n.entries - &g.entries).abs().max() < 1e-2);
}

#[test]
fn stochastic_tensor_in_f32() {
    let d = nalgebra::DMatrix::from_element(1, 1, 1.0f32);
    let g = metric_tensor_stochastic(
        &arma11(0.5, 0.3),
        &d,
        false,
        StochasticMode::OneSidedU,
        DerivativeMode::Analytic,
        &Quadrature::default(),
    )
    .unwrap();
    assert!(g.meta.min_eigenvalue > 0.0);
    assert!(g.meta.asymmetry < 1e-4);
}

#[test]
fn chart_machinery_in_f32() {
    let chart = ChartId::new(vec![2, 1]).unwrap();
    let c: ChartCoordinates<f32> = random_chart_point(&chart, &mut ChaCha8Rng::seed_from_u64(3), 0.7, 0.5).unwrap();
    let ss = ss_from_chart(&c).unwrap();
    assert_eq!(analyze_system(&ss, Some(1e-4)).unwrap().indices, vec![2, 1]);
    let back = extract_chart(&ss, &chart, Some(1e-4)).unwrap();
    for (x, y) in back.theta().iter().zip(c.theta()) {
        assert!((x - y).abs() < 1e-3);
    }
}
