//! Python bindings: signals are flat lists of samples, optionally on a grid.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use tlp_core::analysis::{classical_mds, relative_stress};
use tlp_core::cost::{ot_normalize, CostParams, Lambda};
use tlp_core::distance::{
    distance as core_distance, lambda_heuristic as core_heuristic, pairwise_matrix, tlp_transport,
    DistanceMatrix, DistanceSpec, Method, SolverChoice, SolverSettings,
};
use tlp_core::measure::Signal;
use tlp_core::synth::{dataset_1d, dataset_2d, OneDClass, OneDClassSpec};
use tlp_core::TlpError;

create_exception!(tlp, ComputationError, PyException);

type Coupling = Vec<(usize, usize, f64)>;

fn py_err(e: TlpError) -> PyErr {
    match e {
        TlpError::InvalidArgument(_) | TlpError::Parse { .. } | TlpError::Io { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => ComputationError::new_err(other.to_string()),
    }
}

fn signal(values: Vec<f64>, shape: Option<&[usize]>) -> PyResult<Signal> {
    match shape {
        Some(s) => Signal::on_grid(s, 1, values),
        None => Signal::from_samples(values),
    }
    .map_err(py_err)
}

fn signals(data: Vec<Vec<f64>>, shape: Option<&[usize]>) -> PyResult<Vec<Signal>> {
    data.into_iter().map(|v| signal(v, shape)).collect()
}

fn spec(
    method: &str,
    p: f64,
    lam: Option<f64>,
    solver: &str,
    dataset: &[Signal],
) -> PyResult<DistanceSpec> {
    let method: Method = method.parse().map_err(py_err)?;
    let lambda = match lam {
        Some(l) => l,
        None => core_heuristic(dataset, p).map_err(py_err)?,
    };
    let params = CostParams::new(p, Lambda::from_f64(lambda).map_err(py_err)?).map_err(py_err)?;
    let choice: SolverChoice = solver.parse().map_err(py_err)?;
    let spec = DistanceSpec::new(method, params).with_solver(SolverSettings::new(choice));
    spec.validate().map_err(py_err)?;
    Ok(spec)
}

fn prepared(spec: &DistanceSpec, s: Vec<Signal>) -> PyResult<Vec<Signal>> {
    if spec.method == Method::Ot {
        ot_normalize(&s).map_err(py_err)
    } else {
        Ok(s)
    }
}

/// Distance between two signals. `lam=None` uses the length-scale heuristic.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (f, g, *, method = "tlp", p = 2.0, lam = None, solver = "auto", shape = None))]
fn distance(
    py: Python<'_>,
    f: Vec<f64>,
    g: Vec<f64>,
    method: &str,
    p: f64,
    lam: Option<f64>,
    solver: &str,
    shape: Option<Vec<usize>>,
) -> PyResult<f64> {
    let pair = signals(vec![f, g], shape.as_deref())?;
    let spec = spec(method, p, lam, solver, &pair)?;
    let pair = prepared(&spec, pair)?;
    py.detach(|| core_distance(&pair[0], &pair[1], &spec))
        .map_err(py_err)
}

/// Optimal TL^p coupling as `(distance, [(i, j, mass), ...])`.
#[pyfunction]
#[pyo3(signature = (f, g, *, lam, p = 2.0, solver = "exact", shape = None))]
fn transport(
    py: Python<'_>,
    f: Vec<f64>,
    g: Vec<f64>,
    lam: f64,
    p: f64,
    solver: &str,
    shape: Option<Vec<usize>>,
) -> PyResult<(f64, Coupling)> {
    let (f, g) = (signal(f, shape.as_deref())?, signal(g, shape.as_deref())?);
    let params = CostParams::finite(p, lam).map_err(py_err)?;
    let settings = SolverSettings::new(solver.parse().map_err(py_err)?);
    let t = py
        .detach(|| tlp_transport(&f, &g, &params, &settings))
        .map_err(py_err)?;
    let plan = t
        .plan
        .entries()
        .iter()
        .map(|e| (e.source, e.target, e.mass))
        .collect();
    Ok((t.cost.powf(1.0 / p), plan))
}

/// Symmetric distance matrix of a list of signals.
#[pyfunction]
#[pyo3(signature = (data, *, method = "tlp", p = 2.0, lam = None, solver = "auto", shape = None))]
fn pairwise(
    py: Python<'_>,
    data: Vec<Vec<f64>>,
    method: &str,
    p: f64,
    lam: Option<f64>,
    solver: &str,
    shape: Option<Vec<usize>>,
) -> PyResult<Vec<Vec<f64>>> {
    let s = signals(data, shape.as_deref())?;
    let spec = spec(method, p, lam, solver, &s)?;
    let s = prepared(&spec, s)?;
    let labels: Vec<String> = (0..s.len()).map(|i| i.to_string()).collect();
    let m = py
        .detach(|| pairwise_matrix(&s, &labels, &spec))
        .map_err(py_err)?;
    Ok(m.values()
        .chunks(m.len().max(1))
        .map(<[f64]>::to_vec)
        .collect())
}

/// `(1 / mean max |f|)^p` over a dataset.
#[pyfunction]
#[pyo3(signature = (data, p = 2.0, shape = None))]
fn lambda_heuristic(data: Vec<Vec<f64>>, p: f64, shape: Option<Vec<usize>>) -> PyResult<f64> {
    core_heuristic(&signals(data, shape.as_deref())?, p).map_err(py_err)
}

/// Classical MDS as `(coordinates, relative_stress)`.
#[pyfunction]
#[pyo3(signature = (matrix, k = 2))]
fn mds(matrix: Vec<Vec<f64>>, k: usize) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let n = matrix.len();
    if matrix.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    let labels = (0..n).map(|i| i.to_string()).collect();
    let m = DistanceMatrix::new(labels, matrix.concat(), None).map_err(py_err)?;
    let e = classical_mds(&m, k).map_err(py_err)?;
    let rel = relative_stress(&m, &e.coordinates, k).map_err(py_err)?;
    Ok((e.coordinates.chunks(k).map(<[f64]>::to_vec).collect(), rel))
}

/// The three 1-D classes as `(signals, labels)`.
#[pyfunction]
#[pyo3(signature = (count, seed = 0, n = 256))]
fn synth_1d(count: usize, seed: u64, n: usize) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let base = OneDClassSpec {
        n,
        ..OneDClassSpec::new(OneDClass::Hump)
    };
    let ds = dataset_1d(&base, count, seed).map_err(py_err)?;
    let values = ds.signals().iter().map(|s| s.values().to_vec()).collect();
    Ok((values, ds.labels().to_vec()))
}

/// The two 2-D classes as `(signals, labels)`, each signal row-major on `width x height`.
#[pyfunction]
#[pyo3(signature = (count, seed = 0, width = 32, height = 32))]
fn synth_2d(
    count: usize,
    seed: u64,
    width: usize,
    height: usize,
) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let ds = dataset_2d(count, width, height, seed).map_err(py_err)?;
    let values = ds.signals().iter().map(|s| s.values().to_vec()).collect();
    Ok((values, ds.labels().to_vec()))
}

#[pymodule]
fn tlp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ComputationError", m.py().get_type::<ComputationError>())?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(transport, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(mds, m)?)?;
    m.add_function(wrap_pyfunction!(synth_1d, m)?)?;
    m.add_function(wrap_pyfunction!(synth_2d, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_resolves_lambda() {
        let pair = signals(vec![vec![0.0, 2.0], vec![0.0, -2.0]], None).unwrap();
        let s = spec("tlp", 2.0, None, "exact", &pair).unwrap();
        assert!((s.params.lambda.as_f64() - 0.25).abs() < 1e-15);
        let s = spec("lp", 1.0, Some(3.0), "auto", &pair).unwrap();
        assert_eq!(s.method, Method::Lp);
        assert!(spec("nope", 2.0, Some(1.0), "exact", &pair).is_err());
        assert!(spec("tlp", 2.0, Some(1.0), "simplex", &pair).is_err());
    }

    #[test]
    fn grid_shape_must_match_the_samples() {
        assert!(signal(vec![0.0; 6], Some(&[2, 3])).is_ok());
        assert!(signal(vec![0.0; 6], Some(&[2, 2])).is_err());
    }
}
