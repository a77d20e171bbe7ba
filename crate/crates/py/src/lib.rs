//! Python bindings. Configs cross the boundary as JSON text in the same
//! schema the CLI reads under `estimator`; results come back as dicts.

use std::collections::HashMap;

use longidose_core::dose_response::{posterior_apo as core_posterior, EstimatorConfig};
use longidose_core::gee::{fit_gee as core_fit_gee, CorrelationKind, Design, LinkFamily, WorkingCorrelation};
use longidose_core::panel::{apply_transform, parse_panel_csv, Column, PanelDataset, PanelSchema, Transform, Trajectory};
use longidose_core::sim::{replicate_dataset, run_replications, true_apo as core_true_apo, DgpSpec, Example, SecondParam};
use longidose_core::spline::build_basis;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;

create_exception!(longidose, LongidoseError, PyException);

fn core_err(e: longidose_core::Error) -> PyErr {
    LongidoseError::new_err(e.to_string())
}

/// Parses a snake_case enum name the way the JSON config does.
fn parse_name<T: DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {name:?}")))
}

fn example_of(n: u8) -> PyResult<Example> {
    match n {
        1 => Ok(Example::One),
        2 => Ok(Example::Two),
        _ => Err(PyValueError::new_err(format!("unknown example {n}; expected 1 or 2"))),
    }
}

fn estimator_config(config: Option<&str>) -> PyResult<EstimatorConfig> {
    let cfg: EstimatorConfig = match config {
        Some(text) => serde_json::from_str(text).map_err(|e| PyValueError::new_err(format!("invalid config: {e}")))?,
        None => EstimatorConfig::default(),
    };
    cfg.validate().map_err(core_err)?;
    Ok(cfg)
}

/// A validated longitudinal panel.
#[pyclass(frozen, module = "longidose")]
pub struct Panel {
    inner: PanelDataset,
}

#[pymethods]
impl Panel {
    #[staticmethod]
    #[pyo3(signature = (path, covariates, unit_id="unit_id", time="time", outcome="outcome", dose="dose", family="gaussian_identity"))]
    fn from_csv(
        path: &str,
        covariates: Vec<String>,
        unit_id: &str,
        time: &str,
        outcome: &str,
        dose: &str,
        family: &str,
    ) -> PyResult<Self> {
        let schema = PanelSchema {
            unit_id: unit_id.into(),
            time: time.into(),
            outcome: outcome.into(),
            dose: dose.into(),
            covariates,
        };
        let family: LinkFamily = parse_name("family", family)?;
        Ok(Panel { inner: parse_panel_csv(path, &schema, family).map_err(core_err)? })
    }

    /// Long-form rows; units keep their order of first appearance and rows are
    /// sorted by time within a unit.
    #[staticmethod]
    #[pyo3(signature = (unit_ids, times, outcomes, doses, covariates, covariate_names, family="gaussian_identity"))]
    fn from_rows(
        unit_ids: Vec<String>,
        times: Vec<i64>,
        outcomes: Vec<f64>,
        doses: Vec<f64>,
        covariates: Vec<Vec<f64>>,
        covariate_names: Vec<String>,
        family: &str,
    ) -> PyResult<Self> {
        let n = unit_ids.len();
        if [times.len(), outcomes.len(), doses.len(), covariates.len()].iter().any(|&l| l != n) {
            return Err(PyValueError::new_err("row columns differ in length"));
        }
        let family: LinkFamily = parse_name("family", family)?;
        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, id) in unit_ids.iter().enumerate() {
            rows.entry(id.as_str()).or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            }).push(i);
        }
        let trajectories = order
            .iter()
            .map(|id| {
                let mut idx = rows[id.as_str()].clone();
                idx.sort_by_key(|&i| times[i]);
                Trajectory::new(
                    id.clone(),
                    idx.iter().map(|&i| times[i]).collect(),
                    idx.iter().map(|&i| outcomes[i]).collect(),
                    idx.iter().map(|&i| doses[i]).collect(),
                    idx.iter().map(|&i| covariates[i].clone()).collect(),
                )
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(core_err)?;
        Ok(Panel { inner: PanelDataset::new(trajectories, family, covariate_names).map_err(core_err)? })
    }

    #[getter]
    fn n_units(&self) -> usize {
        self.inner.n_units()
    }

    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn family(&self) -> String {
        serde_json::to_value(self.inner.family()).unwrap().as_str().unwrap_or_default().to_string()
    }

    #[getter]
    fn covariate_names(&self) -> Vec<String> {
        self.inner.covariate_names().to_vec()
    }

    fn doses(&self) -> Vec<f64> {
        self.inner.doses()
    }

    fn outcomes(&self) -> Vec<f64> {
        self.inner.pooled_rows().map(|r| r.y).collect()
    }

    /// `column` is "outcome", "dose" or a covariate name; `kind` is
    /// "identity", "log" or "log1p".
    fn transform(&self, column: &str, kind: &str) -> PyResult<Panel> {
        let t: Transform = parse_name("transform", kind)?;
        Ok(Panel { inner: apply_transform(&self.inner, &Column::parse(column), t).map_err(core_err)? })
    }

    fn with_family(&self, family: &str) -> PyResult<Panel> {
        let family: LinkFamily = parse_name("family", family)?;
        Ok(Panel { inner: self.inner.with_family(family).map_err(core_err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.n_units()
    }

    fn __repr__(&self) -> String {
        format!("Panel(n_units={}, n_rows={}, family={:?})", self.inner.n_units(), self.inner.n_rows(), self.family())
    }
}

/// One replicate dataset of a simulation example; Example 1 outcomes are
/// returned on the log scale.
#[pyfunction]
#[pyo3(signature = (example, seed=1, replicate=1, n=100, k=10, second_param="variance"))]
fn simulate_panel(example: u8, seed: u64, replicate: usize, n: usize, k: usize, second_param: &str) -> PyResult<Panel> {
    let spec = DgpSpec { example: example_of(example)?, n, k, seed, second_param: parse_name("second_param", second_param)? };
    spec.validate().map_err(core_err)?;
    Ok(Panel { inner: replicate_dataset(&spec, replicate).map_err(core_err)? })
}

#[pyfunction]
#[pyo3(signature = (example, dose, second_param="variance"))]
fn true_apo(example: u8, dose: f64, second_param: &str) -> PyResult<f64> {
    let sp: SecondParam = parse_name("second_param", second_param)?;
    Ok(core_true_apo(example_of(example)?, dose, sp))
}

/// Posterior APO draws. `config` is optional estimator JSON; its family
/// must match the panel.
#[pyfunction]
#[pyo3(signature = (panel, config=None))]
fn posterior_apo<'py>(py: Python<'py>, panel: &Panel, config: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = estimator_config(config)?;
    let data = &panel.inner;
    let post = py.detach(|| core_posterior(data, &cfg)).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("dose_grid", &post.dose_grid)?;
    out.set_item("samples", &post.samples)?;
    out.set_item("draw_ids", &post.draw_ids)?;
    let failures: Vec<(usize, String)> = post.failures.iter().map(|f| (f.draw, f.message.clone())).collect();
    out.set_item("failures", failures)?;
    let summary = post
        .summary
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            for (k, v) in [("dose", s.dose), ("mean", s.mean), ("var", s.var), ("median", s.median), ("q025", s.q025), ("q975", s.q975)] {
                d.set_item(k, v)?;
            }
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("summary", summary)?;
    Ok(out)
}

/// Repeated-sampling study: truth, average estimate, average posterior
/// variance and interval coverage per dose.
#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (example, replicates, config=None, seed=1, n=100, k=10, second_param="variance"))]
fn run_simulation<'py>(
    py: Python<'py>,
    example: u8,
    replicates: usize,
    config: Option<&str>,
    seed: u64,
    n: usize,
    k: usize,
    second_param: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = estimator_config(config)?;
    let spec = DgpSpec { example: example_of(example)?, n, k, seed, second_param: parse_name("second_param", second_param)? };
    let report = py.detach(|| run_replications(&spec, &cfg, replicates)).map_err(core_err)?;
    report
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", report.method.name())?;
            d.set_item("resampler", report.resampler.name())?;
            for (key, v) in [("dose", r.dose), ("truth", r.truth), ("av_est", r.av_est), ("av_est_var", r.av_est_var), ("coverage_pct", r.coverage_pct)] {
                d.set_item(key, v)?;
            }
            d.set_item("R", report.replicates)?;
            d.set_item("S", report.draws)?;
            Ok(d)
        })
        .collect()
}

type SplineDesign = (Vec<f64>, (f64, f64), Vec<Vec<f64>>);

/// Cubic B-spline design on `values` with interior knots at equally spaced
/// quantiles; the first basis column is dropped. Returns (interior knots,
/// boundary, rows).
#[pyfunction]
#[pyo3(signature = (values, n_interior=2))]
fn bspline_design(values: Vec<f64>, n_interior: usize) -> PyResult<SplineDesign> {
    let basis = build_basis(&values, n_interior).map_err(core_err)?;
    let rows = values
        .iter()
        .map(|&v| {
            let mut row = vec![0.0; basis.design_dim()];
            basis.eval_design_into(v, &mut row);
            row
        })
        .collect();
    Ok((basis.interior_knots().to_vec(), basis.boundary(), rows))
}

/// Weighted GEE of `y` on the rows of `x` (include an intercept column
/// yourself). `units` defaults to one cluster per row, `weights` to ones.
#[pyfunction]
#[pyo3(signature = (x, y, units=None, weights=None, family="gaussian_identity", correlation="independent"))]
fn fit_gee<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    units: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
    family: &str,
    correlation: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("rows of x differ in length"));
    }
    let n = y.len();
    let units = units.unwrap_or_else(|| (0..n).collect());
    let weights = weights.unwrap_or_else(|| vec![1.0; n]);
    let family: LinkFamily = parse_name("family", family)?;
    let corr: CorrelationKind = parse_name("correlation", correlation)?;
    let design = Design::from_parts(x.concat(), p, y, units).map_err(core_err)?;
    let fit = core_fit_gee(&design, family, corr, &weights).map_err(core_err)?;
    let out = PyDict::new(py);
    out.set_item("coefficients", &fit.xi)?;
    out.set_item("dispersion", fit.dispersion)?;
    out.set_item("converged", fit.converged)?;
    out.set_item("iterations", fit.iterations)?;
    let rho = match fit.corr {
        WorkingCorrelation::Independent => None,
        WorkingCorrelation::Exchangeable { rho } => Some(rho),
    };
    out.set_item("rho", rho)?;
    Ok(out)
}

#[pymodule]
fn longidose(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LongidoseError", m.py().get_type::<LongidoseError>())?;
    m.add_class::<Panel>()?;
    m.add_function(wrap_pyfunction!(simulate_panel, m)?)?;
    m.add_function(wrap_pyfunction!(true_apo, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_apo, m)?)?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(bspline_design, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gee, m)?)?;
    Ok(())
}
