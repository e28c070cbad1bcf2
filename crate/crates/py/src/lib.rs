//! Python bindings. Arrival rates are plain floats, splits are lists of group
//! probabilities, and every library error surfaces as `ValueError`.

use halo_core::{
    activation_thresholds, closed_form_optimal_t, mean_response_time, optimal_split,
    oracle_optimal_split, per_server_weights, proportional_split, regime, run_simulation,
    utilization, ArrivalRate, ClusterSpec, LoadSplit, PolicyConfig, PolicyName,
    ServiceDistribution, SimConfig, SplitSolution,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rate(lambda: f64) -> PyResult<ArrivalRate> {
    ArrivalRate::new(lambda).map_err(value_error)
}

/// Server groups as `(count, speed)` pairs.
#[pyclass(name = "Cluster", frozen, module = "halosim")]
pub struct Cluster {
    inner: ClusterSpec,
}

#[pymethods]
impl Cluster {
    #[new]
    fn new(groups: Vec<(u32, f64)>) -> PyResult<Self> {
        ClusterSpec::from_pairs(&groups)
            .map(|inner| Self { inner })
            .map_err(value_error)
    }

    #[getter]
    fn groups(&self) -> Vec<(u32, f64)> {
        self.inner.groups().iter().map(|g| (g.count, g.speed)).collect()
    }

    #[getter]
    fn total_capacity(&self) -> f64 {
        self.inner.total_capacity()
    }

    #[getter]
    fn total_servers(&self) -> usize {
        self.inner.total_servers()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Cluster({:?})", self.groups())
    }
}

/// An optimal split and its mean response time.
#[pyclass(name = "Split", frozen, get_all, module = "halosim")]
pub struct Split {
    probabilities: Vec<f64>,
    response_time: f64,
    active_groups: Vec<usize>,
    regime: &'static str,
}

#[pymethods]
impl Split {
    fn __repr__(&self) -> String {
        format!(
            "Split(probabilities={:?}, response_time={}, regime={:?})",
            self.probabilities, self.response_time, self.regime
        )
    }
}

impl Split {
    fn new(cluster: &ClusterSpec, r: ArrivalRate, s: SplitSolution) -> Self {
        Self {
            probabilities: s.split.probabilities().to_vec(),
            response_time: s.response_time,
            active_groups: s.active_groups,
            regime: regime(cluster, r).as_str(),
        }
    }
}

/// Summary of a multi-replication simulation.
#[pyclass(name = "SimulationResult", frozen, get_all, module = "halosim")]
pub struct SimulationResult {
    mean_response_time: f64,
    ci_halfwidth: f64,
    jobs_counted: usize,
    per_server_throughput: Vec<f64>,
    replication_means: Vec<f64>,
    seed: u64,
}

#[pymethods]
impl SimulationResult {
    fn __repr__(&self) -> String {
        format!(
            "SimulationResult(mean_response_time={}, ci_halfwidth={}, jobs_counted={})",
            self.mean_response_time, self.ci_halfwidth, self.jobs_counted
        )
    }
}

#[pyfunction]
fn rho(cluster: &Cluster, lam: f64) -> PyResult<f64> {
    Ok(utilization(&cluster.inner, rate(lam)?))
}

/// Mean response time for a split given as one probability per group.
#[pyfunction]
fn response_time(cluster: &Cluster, lam: f64, split: Vec<f64>) -> PyResult<f64> {
    let split = LoadSplit::new(split).map_err(value_error)?;
    mean_response_time(&cluster.inner, rate(lam)?, &split).map_err(value_error)
}

/// Capacity-proportional split.
#[pyfunction]
fn proportional(cluster: &Cluster) -> Vec<f64> {
    proportional_split(&cluster.inner).probabilities().to_vec()
}

/// Optimal mean response time when every group is active; `ValueError` otherwise.
#[pyfunction]
fn closed_form(cluster: &Cluster, lam: f64) -> PyResult<f64> {
    closed_form_optimal_t(&cluster.inner, rate(lam)?).map_err(value_error)
}

#[pyfunction]
fn thresholds(cluster: &Cluster) -> Vec<f64> {
    activation_thresholds(&cluster.inner)
}

#[pyfunction]
fn optimal(cluster: &Cluster, lam: f64) -> PyResult<Split> {
    let r = rate(lam)?;
    let s = optimal_split(&cluster.inner, r).map_err(value_error)?;
    Ok(Split::new(&cluster.inner, r, s))
}

/// Brute-force search for the optimal split.
#[pyfunction]
#[pyo3(signature = (cluster, lam, resolution = 1e-3))]
fn oracle(cluster: &Cluster, lam: f64, resolution: f64) -> PyResult<Split> {
    let r = rate(lam)?;
    let s = oracle_optimal_split(&cluster.inner, r, resolution).map_err(value_error)?;
    Ok(Split::new(&cluster.inner, r, s))
}

/// Per-server routing probabilities for a group split.
#[pyfunction]
fn server_weights(cluster: &Cluster, split: Vec<f64>) -> PyResult<Vec<f64>> {
    let split = LoadSplit::new(split).map_err(value_error)?;
    if split.probabilities().len() != cluster.inner.len() {
        return Err(value_error("split length does not match the number of groups"));
    }
    Ok(per_server_weights(&cluster.inner, &split))
}

fn service_from(kind: &str, sigma: Option<f64>, shape: Option<f64>, bound_ratio: Option<f64>) -> PyResult<ServiceDistribution> {
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| value_error(format!("{kind} needs {name}")));
    let service = match kind {
        "exponential" => ServiceDistribution::Exponential,
        "deterministic" => ServiceDistribution::Deterministic,
        "lognormal" => ServiceDistribution::Lognormal { sigma: need(sigma, "sigma")? },
        "bounded_pareto" => ServiceDistribution::BoundedPareto {
            shape: need(shape, "shape")?,
            bound_ratio: need(bound_ratio, "bound_ratio")?,
        },
        other => return Err(value_error(format!("unknown service distribution {other:?}"))),
    };
    service.validate().map_err(value_error)?;
    Ok(service)
}

/// Simulates the cluster under a named dispatch policy. The GIL is released
/// while the replications run.
#[pyfunction]
#[pyo3(signature = (
    cluster, lam, policy, service = "exponential", *, sigma = None, shape = None,
    bound_ratio = None, total_jobs = 100_000, warmup_fraction = 0.1, replications = 10,
    seed = 1, batch_count = 30
))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    cluster: &Cluster,
    lam: f64,
    policy: &str,
    service: &str,
    sigma: Option<f64>,
    shape: Option<f64>,
    bound_ratio: Option<f64>,
    total_jobs: usize,
    warmup_fraction: f64,
    replications: usize,
    seed: u64,
    batch_count: usize,
) -> PyResult<SimulationResult> {
    let r = rate(lam)?;
    let name: PolicyName = policy.parse().map_err(value_error)?;
    let policy = PolicyConfig::for_policy(name, &cluster.inner, r).map_err(value_error)?;
    let service = service_from(service, sigma, shape, bound_ratio)?;
    let sim = SimConfig {
        total_jobs,
        warmup_fraction,
        replications,
        seed,
        batch_count,
    };
    sim.validate().map_err(value_error)?;
    let spec = &cluster.inner;
    let result = py
        .detach(|| run_simulation(spec, r, &service, &policy, &sim))
        .map_err(value_error)?;
    Ok(SimulationResult {
        mean_response_time: result.mean_response_time,
        ci_halfwidth: result.ci_halfwidth,
        jobs_counted: result.jobs_counted,
        per_server_throughput: result.per_server_throughput,
        replication_means: result.replication_means,
        seed: result.seed,
    })
}

#[pymodule]
fn halosim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Cluster>()?;
    m.add_class::<Split>()?;
    m.add_class::<SimulationResult>()?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(response_time, m)?)?;
    m.add_function(wrap_pyfunction!(proportional, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(optimal, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(server_weights, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add("POLICIES", PolicyName::ALL.map(PolicyName::as_str).to_vec())?;
    Ok(())
}
