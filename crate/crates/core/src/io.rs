//! JSON encodings of systems, charts, tensors and analysis reports.
//!
//! Matrices are row-major nested arrays. Polynomial matrices list their
//! coefficients by lag, `coeffs[k]` multiplying `z^{-k}`. Chart keys
//! `(i, j, k)` are one-based.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::charts::{ss_from_chart, ChartCoordinates, ChartId};
use crate::error::{Error, Result};
use crate::hankel::HankelAnalysis;
use crate::lsys::{LinearSystem, Representation};
use crate::metric::{MetricTensor, TensorMeta};
use crate::polymat::PolynomialMatrix;
use crate::stochastic::StochasticSystem;

pub type MatrixJson = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyJson {
    pub rows: usize,
    pub cols: usize,
    pub coeffs: Vec<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaJson {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartJson {
    pub indices: Vec<usize>,
    pub alpha: Vec<AlphaJson>,
    #[serde(rename = "K")]
    pub k: MatrixJson,
}

/// Tagged system encoding. `chart` builds the state-space system of a chart
/// point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemJson {
    Arma {
        #[serde(rename = "A")]
        a: PolyJson,
        #[serde(rename = "B")]
        b: PolyJson,
    },
    Ss {
        #[serde(rename = "A")]
        a: MatrixJson,
        #[serde(rename = "B")]
        b: MatrixJson,
        #[serde(rename = "C")]
        c: MatrixJson,
        #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
        d: Option<MatrixJson>,
    },
    Markov {
        terms: Vec<MatrixJson>,
        decay_bound: f64,
    },
    Chart(ChartJson),
}

/// System plus optional noise covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInputJson {
    #[serde(flatten)]
    pub system: SystemJson,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<MatrixJson>,
    #[serde(default)]
    pub r_coords: bool,
}

/// Two systems for inner-product queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPairJson {
    pub left: SystemInputJson,
    pub right: SystemInputJson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorJson {
    pub dim: usize,
    pub entries: MatrixJson,
    pub labels: Vec<String>,
    pub meta: TensorMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HankelJson {
    pub indices: Vec<usize>,
    pub degree: usize,
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
}

/// Decoded system input.
#[derive(Debug, Clone)]
pub struct SystemInput {
    pub system: LinearSystem<f64>,
    pub chart: Option<ChartCoordinates<f64>>,
    pub r: Option<DMatrix<f64>>,
    pub r_coords: bool,
}

impl SystemInput {
    /// Stochastic view; `R` defaults to the identity.
    pub fn stochastic(&self) -> Result<StochasticSystem<f64>> {
        let m = self.system.outputs();
        let r = self.r.clone().unwrap_or_else(|| DMatrix::identity(m, m));
        StochasticSystem::new(self.system.clone(), r, self.r_coords)
    }
}

pub fn matrix_to_json(m: &DMatrix<f64>) -> MatrixJson {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::Input("ragged matrix rows".into()));
    }
    if n == 0 || c == 0 {
        return Err(Error::Input("empty matrix".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite matrix entry".into()));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

pub fn poly_to_json(p: &PolynomialMatrix<f64>) -> PolyJson {
    PolyJson { rows: p.rows(), cols: p.cols(), coeffs: p.coeffs().iter().map(matrix_to_json).collect() }
}

pub fn poly_from_json(p: &PolyJson) -> Result<PolynomialMatrix<f64>> {
    let coeffs = p.coeffs.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?;
    if coeffs.iter().any(|c| c.shape() != (p.rows, p.cols)) {
        return Err(Error::Input(format!("coefficient shape differs from declared {}x{}", p.rows, p.cols)));
    }
    PolynomialMatrix::new(coeffs).map_err(|e| Error::Input(e.to_string()))
}

pub fn chart_to_json(c: &ChartCoordinates<f64>) -> ChartJson {
    ChartJson {
        indices: c.chart().indices().to_vec(),
        alpha: c
            .chart()
            .alpha_keys()
            .into_iter()
            .zip(c.alpha_values())
            .map(|((i, j, k), &v)| AlphaJson { i: i + 1, j: j + 1, k, v })
            .collect(),
        k: matrix_to_json(c.kmat()),
    }
}

/// Missing α entries are zero; unknown keys are rejected.
pub fn chart_from_json(c: &ChartJson) -> Result<ChartCoordinates<f64>> {
    let chart = ChartId::new(c.indices.clone()).map_err(|e| Error::Input(e.to_string()))?;
    let keys = chart.alpha_keys();
    let mut alpha = vec![0.0; keys.len()];
    for a in &c.alpha {
        let key = (a.i.wrapping_sub(1), a.j.wrapping_sub(1), a.k);
        let pos = keys
            .iter()
            .position(|&k| k == key)
            .ok_or_else(|| Error::Input(format!("alpha key ({}, {}, {}) not in chart", a.i, a.j, a.k)))?;
        alpha[pos] = a.v;
    }
    let kmat = if chart.n() == 0 { DMatrix::zeros(0, chart.m()) } else { matrix_from_json(&c.k)? };
    ChartCoordinates::new(chart, alpha, kmat).map_err(|e| Error::Input(e.to_string()))
}

pub fn system_to_json(s: &LinearSystem<f64>) -> SystemJson {
    match s.representation() {
        Representation::Arma { a, b } => SystemJson::Arma { a: poly_to_json(a), b: poly_to_json(b) },
        Representation::StateSpace { a, b, c, d } => SystemJson::Ss {
            a: matrix_to_json(a),
            b: matrix_to_json(b),
            c: matrix_to_json(c),
            d: Some(matrix_to_json(d)),
        },
        Representation::Markov { terms, decay_bound } => {
            SystemJson::Markov { terms: terms.iter().map(matrix_to_json).collect(), decay_bound: *decay_bound }
        }
    }
}

fn input_err(e: Error) -> Error {
    match e {
        Error::Input(_) => e,
        other => Error::Input(other.to_string()),
    }
}

/// Builds the system; any construction failure counts as bad input.
pub fn system_from_json(s: &SystemJson) -> Result<(LinearSystem<f64>, Option<ChartCoordinates<f64>>)> {
    let sys = match s {
        SystemJson::Arma { a, b } => LinearSystem::from_arma(poly_from_json(a)?, poly_from_json(b)?),
        SystemJson::Ss { a, b, c, d } => LinearSystem::from_state_space(
            matrix_from_json(a)?,
            matrix_from_json(b)?,
            matrix_from_json(c)?,
            d.as_ref().map(matrix_from_json).transpose()?,
        ),
        SystemJson::Markov { terms, decay_bound } => LinearSystem::from_markov(
            terms.iter().map(matrix_from_json).collect::<Result<Vec<_>>>()?,
            *decay_bound,
        ),
        SystemJson::Chart(c) => {
            let coords = chart_from_json(c)?;
            let sys = ss_from_chart(&coords).map_err(input_err)?;
            return Ok((sys, Some(coords)));
        }
    };
    Ok((sys.map_err(input_err)?, None))
}

pub fn parse_system(text: &str) -> Result<SystemInput> {
    let raw: SystemInputJson = serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed system JSON: {e}")))?;
    let (system, chart) = system_from_json(&raw.system)?;
    let r = raw.r.as_ref().map(matrix_from_json).transpose()?;
    Ok(SystemInput { system, chart, r, r_coords: raw.r_coords })
}

pub fn parse_pair(text: &str) -> Result<(LinearSystem<f64>, LinearSystem<f64>)> {
    let raw: SystemPairJson =
        serde_json::from_str(text).map_err(|e| Error::Input(format!("malformed system pair JSON: {e}")))?;
    Ok((system_from_json(&raw.left.system)?.0, system_from_json(&raw.right.system)?.0))
}

pub fn stochastic_to_json(s: &StochasticSystem<f64>) -> SystemInputJson {
    SystemInputJson {
        system: system_to_json(s.system()),
        r: Some(matrix_to_json(s.noise_covariance())),
        r_coords: s.r_coords(),
    }
}

pub fn tensor_to_json(g: &MetricTensor<f64>) -> TensorJson {
    TensorJson { dim: g.dim(), entries: matrix_to_json(&g.entries), labels: g.labels.clone(), meta: g.meta.clone() }
}

pub fn hankel_to_json(h: &HankelAnalysis<f64>) -> HankelJson {
    HankelJson {
        indices: h.indices.clone(),
        degree: h.degree,
        tolerance: h.tolerance,
        singular_values: h.singular_values.clone(),
    }
}

/// Pretty JSON; floats use the shortest representation that round-trips
/// exactly.
pub fn to_json_string<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Evaluation(format!("serialization failed: {e}")))
}
