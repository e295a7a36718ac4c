//! Python bindings for the semi-infinite lower bounding toolkit.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use siplb_core::cli::{load_instance, to_file_text, write_trace};
use siplb_core::globalopt::grid_min;
use siplb_core::{
    AffineMap, AlphaConfig, AlphaOracle, BoxRegion, Discretization, ExactOracle, LlpOracle,
    OptConfig, OracleOutcome, PointVec, ScriptedOracle, SipConfig, VarAssignment,
};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_box(bounds: &[(f64, f64)]) -> PyResult<BoxRegion> {
    BoxRegion::from_bounds(bounds).map_err(value_err)
}

fn bounds_of(b: &BoxRegion) -> Vec<(f64, f64)> {
    b.dims().iter().map(|iv| (iv.lo(), iv.hi())).collect()
}

/// A parsed expression over x1..xN and y1..yM.
#[pyclass(frozen, skip_from_py_object, module = "siplb")]
#[derive(Clone)]
struct Expr {
    inner: siplb_core::Expr,
}

#[pymethods]
impl Expr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        siplb_core::parse(text)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[pyo3(signature = (x, y = Vec::new()))]
    fn eval(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner
            .eval_point(&VarAssignment::new(&x, &y))
            .map_err(value_err)
    }

    /// Interval enclosure over boxes given as lists of `(lo, hi)` pairs.
    #[pyo3(signature = (x_bounds, y_bounds = Vec::new()))]
    fn eval_interval(&self, x_bounds: Vec<(f64, f64)>, y_bounds: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
        let to_ivs = |b: &[(f64, f64)]| {
            b.iter()
                .map(|&(lo, hi)| siplb_core::Interval::new(lo, hi))
                .collect::<Result<Vec<_>, _>>()
                .map_err(value_err)
        };
        let (xs, ys) = (to_ivs(&x_bounds)?, to_ivs(&y_bounds)?);
        let iv = self
            .inner
            .eval_interval_in(&siplb_core::expr::IntervalAssignment { x: &xs, y: &ys })
            .map_err(value_err)?;
        Ok((iv.lo(), iv.hi()))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Expr('{}')", self.inner)
    }

    fn __str__(&self) -> String {
        self.inner.to_text()
    }

    fn __eq__(&self, other: &Expr) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(frozen, skip_from_py_object, module = "siplb")]
#[derive(Clone)]
struct SipInstance {
    inner: siplb_core::SipInstance,
}

#[pymethods]
impl SipInstance {
    #[new]
    fn new(
        name: String,
        objective: &str,
        constraint: &str,
        x_bounds: Vec<(f64, f64)>,
        y_bounds: Vec<(f64, f64)>,
    ) -> PyResult<Self> {
        let objective = siplb_core::parse(objective).map_err(value_err)?;
        let constraint = siplb_core::parse(constraint).map_err(value_err)?;
        let inner = siplb_core::SipInstance::new(name, objective, constraint, to_box(&x_bounds)?, to_box(&y_bounds)?)
            .map_err(value_err)?;
        Ok(Self { inner })
    }

    /// The built-in instance `min -x s.t. 2x - y <= 0 for all y in [-1, 1]`.
    #[staticmethod]
    fn counterexample() -> Self {
        Self {
            inner: siplb_core::builtin_counterexample(),
        }
    }

    /// Parses the text of an instance file.
    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        load_instance(text).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_file_text(&self) -> String {
        to_file_text(&self.inner)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn objective(&self) -> Expr {
        Expr {
            inner: self.inner.objective().clone(),
        }
    }

    #[getter]
    fn constraint(&self) -> Expr {
        Expr {
            inner: self.inner.constraint().clone(),
        }
    }

    #[getter]
    fn x_bounds(&self) -> Vec<(f64, f64)> {
        bounds_of(self.inner.x_box())
    }

    #[getter]
    fn y_bounds(&self) -> Vec<(f64, f64)> {
        bounds_of(self.inner.y_box())
    }

    fn f(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner
            .f(&x)
            .ok_or_else(|| PyValueError::new_err("objective undefined at this point"))
    }

    fn g(&self, x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
        self.inner
            .g(&x, &y)
            .ok_or_else(|| PyValueError::new_err("constraint undefined at this point"))
    }

    fn __eq__(&self, other: &SipInstance) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("SipInstance(name='{}')", self.inner.name())
    }
}

/// One iteration of the lower bounding procedure.
#[pyclass(frozen, get_all, module = "siplb")]
struct Iteration {
    k: usize,
    x_bar: Option<Vec<f64>>,
    f_lbd: f64,
    incumbent_value: Option<f64>,
    /// "feasible", "violation" or "lbd-infeasible".
    oracle_status: String,
    y: Option<Vec<f64>>,
    g_value: Option<f64>,
    g_star_estimate: Option<f64>,
    certified_max: Option<f64>,
}

#[pymethods]
impl Iteration {
    fn __repr__(&self) -> String {
        format!(
            "Iteration(k={}, f_lbd={}, oracle_status='{}')",
            self.k, self.f_lbd, self.oracle_status
        )
    }
}

#[pyclass(frozen, module = "siplb")]
struct SolveReport {
    report: siplb_core::SolveReport,
    instance: siplb_core::SipInstance,
}

#[pymethods]
impl SolveReport {
    /// "converged-optimal", "infeasible-sip", "max-iter-reached" or
    /// "subsolver-failure".
    #[getter]
    fn status(&self) -> &'static str {
        self.report.status.as_str()
    }

    #[getter]
    fn final_lower_bound(&self) -> f64 {
        self.report.final_lower_bound
    }

    #[getter]
    fn optimal_point(&self) -> Option<Vec<f64>> {
        self.report.optimal_point.clone().map(PointVec::into_inner)
    }

    #[getter]
    fn diagnostic(&self) -> Option<String> {
        self.report.diagnostic.clone()
    }

    #[getter]
    fn discretization(&self) -> Vec<Vec<f64>> {
        self.report
            .discretization
            .points()
            .iter()
            .map(|p| p.coords().to_vec())
            .collect()
    }

    #[getter]
    fn lower_bounds(&self) -> Vec<f64> {
        self.report.iterations.iter().map(|r| r.f_lbd).collect()
    }

    #[getter]
    fn iterations(&self) -> Vec<Iteration> {
        self.report
            .iterations
            .iter()
            .map(|r| {
                let mut it = Iteration {
                    k: r.k,
                    x_bar: r.x_bar.clone().map(PointVec::into_inner),
                    f_lbd: r.f_lbd,
                    incumbent_value: r.incumbent_value,
                    oracle_status: "lbd-infeasible".into(),
                    y: None,
                    g_value: None,
                    g_star_estimate: None,
                    certified_max: None,
                };
                match &r.oracle {
                    Some(OracleOutcome::Violation {
                        y,
                        g_value,
                        g_star_estimate,
                    }) => {
                        it.oracle_status = "violation".into();
                        it.y = Some(y.coords().to_vec());
                        it.g_value = Some(*g_value);
                        it.g_star_estimate = *g_star_estimate;
                    }
                    Some(OracleOutcome::Feasible { certified_max }) => {
                        it.oracle_status = "feasible".into();
                        it.certified_max = Some(*certified_max);
                    }
                    None => {}
                }
                it
            })
            .collect()
    }

    /// The per-iteration trace in CSV form.
    fn trace_csv(&self) -> String {
        write_trace(&self.report, &self.instance)
    }

    fn __len__(&self) -> usize {
        self.report.iterations.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SolveReport(status='{}', iterations={}, final_lower_bound={})",
            self.report.status,
            self.report.iterations.len(),
            self.report.final_lower_bound
        )
    }
}

/// Runs the lower bounding procedure.
///
/// `oracle` is "exact", "alpha" (requires `alpha`) or "scripted" (uses the
/// flat row-major `affine_map` entries followed by the offset, or the
/// identity when omitted).
#[pyfunction]
#[pyo3(signature = (
    instance,
    oracle = "exact",
    alpha = None,
    affine_map = None,
    eps_feas = 1e-6,
    eps_obj = 1e-6,
    max_iter = 100,
    initial_points = None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    instance: &SipInstance,
    oracle: &str,
    alpha: Option<f64>,
    affine_map: Option<Vec<f64>>,
    eps_feas: f64,
    eps_obj: f64,
    max_iter: usize,
    initial_points: Option<Vec<Vec<f64>>>,
) -> PyResult<SolveReport> {
    let inst = instance.inner.clone();
    let oracle: Box<dyn LlpOracle + Send + Sync> = match oracle {
        "exact" => Box::new(ExactOracle),
        "alpha" => {
            let alpha = alpha.ok_or_else(|| PyValueError::new_err("oracle 'alpha' needs alpha"))?;
            Box::new(AlphaOracle::new(AlphaConfig::new(alpha).map_err(value_err)?))
        }
        "scripted" => {
            let (rows, cols) = (inst.y_box().dim(), inst.x_box().dim());
            let map = match affine_map {
                Some(entries) => AffineMap::from_flat(rows, cols, &entries).map_err(value_err)?,
                None if rows == cols => AffineMap::identity(rows),
                None => return Err(PyValueError::new_err("scripted oracle needs affine_map when dims differ")),
            };
            Box::new(ScriptedOracle::new(map))
        }
        other => return Err(PyValueError::new_err(format!("unknown oracle '{other}'"))),
    };
    let initial = initial_points
        .unwrap_or_default()
        .into_iter()
        .map(|p| PointVec::new(p).map_err(value_err))
        .collect::<PyResult<Vec<_>>>()?;
    let defaults = SipConfig::default();
    let cfg = SipConfig {
        eps_feas,
        max_iter,
        opt: OptConfig {
            eps_obj,
            ..defaults.opt
        },
        initial_discretization: Discretization::from_points(initial),
    };
    let report = py
        .detach(|| siplb_core::run_lower_bounding(&inst, oracle.as_ref(), &cfg))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(SolveReport { report, instance: inst })
}

/// Certified global minimum of `objective` over the box, subject to
/// `c(x) <= 0` for each constraint. Returns a dict with `incumbent`,
/// `incumbent_value`, `lower_bound`, `status` and `nodes`.
#[pyfunction]
#[pyo3(signature = (objective, bounds, constraints = Vec::new(), eps_obj = 1e-6, eps_feas = 1e-8, max_nodes = 1_000_000))]
fn minimize<'py>(
    py: Python<'py>,
    objective: &str,
    bounds: Vec<(f64, f64)>,
    constraints: Vec<String>,
    eps_obj: f64,
    eps_feas: f64,
    max_nodes: usize,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let obj = siplb_core::parse(objective).map_err(value_err)?;
    let cons = constraints
        .iter()
        .map(|c| siplb_core::parse(c).map_err(value_err))
        .collect::<PyResult<Vec<_>>>()?;
    let region = to_box(&bounds)?;
    let cfg = OptConfig {
        eps_obj,
        eps_feas,
        max_nodes,
    };
    let m = py
        .detach(|| siplb_core::minimize(&obj, &region, &cons, &cfg))
        .map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("incumbent", m.incumbent.map(PointVec::into_inner))?;
    d.set_item("incumbent_value", m.incumbent_value)?;
    d.set_item("lower_bound", m.lower_bound)?;
    let status = match m.status {
        siplb_core::MinStatus::Solved => "solved",
        siplb_core::MinStatus::Infeasible => "infeasible",
        siplb_core::MinStatus::DepthCapReached => "depth-cap-reached",
    };
    d.set_item("status", status)?;
    d.set_item("nodes", m.nodes)?;
    Ok(d)
}

/// Brute-force grid minimum, `inf` when no grid point is feasible.
#[pyfunction(name = "grid_min")]
#[pyo3(signature = (objective, bounds, constraints = Vec::new(), points_per_dim = 101))]
fn py_grid_min(
    objective: &str,
    bounds: Vec<(f64, f64)>,
    constraints: Vec<String>,
    points_per_dim: usize,
) -> PyResult<f64> {
    let obj = siplb_core::parse(objective).map_err(value_err)?;
    let cons = constraints
        .iter()
        .map(|c| siplb_core::parse(c).map_err(value_err))
        .collect::<PyResult<Vec<_>>>()?;
    grid_min(&obj, &to_box(&bounds)?, &cons, points_per_dim).map_err(value_err)
}

#[pyfunction]
fn parse(text: &str) -> PyResult<Expr> {
    Expr::new(text)
}

#[pymodule]
pub fn siplb(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Expr>()?;
    m.add_class::<SipInstance>()?;
    m.add_class::<Iteration>()?;
    m.add_class::<SolveReport>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(py_grid_min, m)?)?;
    Ok(())
}
