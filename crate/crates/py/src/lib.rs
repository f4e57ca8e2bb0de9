//! Python bindings: model specs, forests, ladder processes, the stable limit
//! and the verification reports.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use cmj_core::forest::{simulate_forest, ForestOptions, ForestPaths, SiblingOrder};
use cmj_core::ladder::{ladder_decompose, AgeConvention};
use cmj_core::models::{self, CharacteristicSpec};
use cmj_core::report::TestReport;
use cmj_core::rng::{substream, tag};
use cmj_core::stable_limit::{self, StableParams};
use cmj_core::verify::{self, Tolerances};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn order(name: &str) -> PyResult<SiblingOrder> {
    match name {
        "increasing" => Ok(SiblingOrder::Increasing),
        "decreasing" => Ok(SiblingOrder::Decreasing),
        _ => Err(value_err(format!("order must be 'increasing' or 'decreasing', got '{name}'"))),
    }
}

fn convention(name: &str) -> PyResult<AgeConvention> {
    match name {
        "atom_rank" => Ok(AgeConvention::AtomRank),
        "verbatim" => Ok(AgeConvention::Verbatim),
        _ => Err(value_err(format!("convention must be 'atom_rank' or 'verbatim', got '{name}'"))),
    }
}

fn tolerances(json: Option<&str>) -> PyResult<Tolerances> {
    json.map_or(Ok(Tolerances::default()), |j| serde_json::from_str(j).map_err(value_err))
}

/// Law of a life and its birth point process.
#[pyclass(name = "CharacteristicSpec", module = "cmjlab", from_py_object)]
#[derive(Clone)]
struct PySpec {
    inner: CharacteristicSpec,
}

#[pymethods]
impl PySpec {
    /// Parses the JSON form, e.g. `{"variant": {"kind": "binary_homogeneous", "rate": 1.0},
    /// "life": {"law": "pareto", "gamma": 1.5, "x0": 0.5}}`.
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        let inner: CharacteristicSpec = serde_json::from_str(json).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn binary_homogeneous(rate: f64, gamma: f64, x0: f64) -> PyResult<Self> {
        CharacteristicSpec::binary_homogeneous(rate, gamma, x0)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("spec serializes")
    }

    /// `a` with `μ(t)/t → 1/a`, or `None`.
    fn drift_constant(&self) -> Option<f64> {
        self.inner.drift_constant()
    }

    #[getter]
    fn gamma(&self) -> Option<f64> {
        self.inner.gamma()
    }

    fn mean_life(&self) -> f64 {
        self.inner.life.mean()
    }

    fn mean_offspring_exact(&self) -> Option<f64> {
        self.inner.mean_offspring_exact()
    }

    /// Copy rescaled so that `E μ(V) = 1`.
    #[pyo3(signature = (tol=1e-3, budget=200_000, seed=0))]
    fn calibrate(&self, tol: f64, budget: u64, seed: u64) -> PyResult<Self> {
        models::calibrate_criticality(&self.inner, tol, budget, seed)
            .map(|c| Self { inner: c.spec })
            .map_err(value_err)
    }

    fn scaling_vp(&self, p: u64) -> PyResult<f64> {
        models::scaling_vp(&self.inner, p).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("CharacteristicSpec({})", self.to_json())
    }
}

/// Lukasiewicz path, heights and contour of a simulated forest.
#[pyclass(name = "Forest", module = "cmjlab")]
struct PyForest {
    inner: ForestPaths,
}

#[pymethods]
impl PyForest {
    #[getter]
    fn s(&self) -> Vec<i64> {
        self.inner.walk.s.clone()
    }

    #[getter]
    fn h(&self) -> Vec<f64> {
        self.inner.h.clone()
    }

    #[getter]
    fn lives(&self) -> Vec<f64> {
        self.inner.walk.lives.clone()
    }

    /// Parent index of each individual, `None` for roots.
    #[getter]
    fn parent(&self) -> Vec<Option<usize>> {
        self.inner.tree_table().parent
    }

    /// Breakpoints `(t, C(t))` of the contour, if it was built.
    #[getter]
    fn contour(&self) -> Option<Vec<(f64, f64)>> {
        self.inner.contour.as_ref().map(|c| c.points.clone())
    }

    #[getter]
    fn tree_ends(&self) -> Vec<f64> {
        self.inner.tree_ends.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Weak ascending ladder epochs, heights and ages of the walk.
    #[pyo3(signature = (convention="atom_rank"))]
    fn ladder(&self, convention: &str) -> PyResult<(Vec<usize>, Vec<i64>, Vec<f64>)> {
        let tr = ladder_decompose(&self.inner.walk, usize::MAX - 1, self::convention(convention)?);
        Ok((tr.t_epochs, tr.z_heights, tr.r_ages))
    }
}

#[pyfunction]
#[pyo3(signature = (spec, n, seed, order="decreasing", contour=true))]
fn simulate(spec: &PySpec, n: usize, seed: u64, order: &str, contour: bool) -> PyResult<PyForest> {
    let sampler = spec.inner.sampler().map_err(value_err)?;
    let opts = ForestOptions {
        order: self::order(order)?,
        contour,
        ..ForestOptions::default()
    };
    let mut rng = substream(seed, tag("simulate"), 0);
    simulate_forest(&sampler, n, &opts, &mut rng)
        .map(|inner| PyForest { inner })
        .map_err(value_err)
}

/// Laplace exponent `ψ(λ) = c (λ/a)^γ` of a spectrally positive stable law.
#[pyclass(name = "StableParams", module = "cmjlab", from_py_object)]
#[derive(Clone)]
struct PyStable {
    inner: StableParams,
}

#[pymethods]
impl PyStable {
    /// `c = 1/(−Γ(1−γ))`.
    #[new]
    fn new(gamma: f64, a: f64) -> PyResult<Self> {
        StableParams::new(gamma, a).map(|inner| Self { inner }).map_err(value_err)
    }

    /// `c = −Γ(1−γ)`, the exponent of the scaled Lukasiewicz path.
    #[staticmethod]
    fn lukasiewicz_limit(gamma: f64, a: f64) -> PyResult<Self> {
        StableParams::lukasiewicz_limit(gamma, a)
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    #[getter]
    fn coefficient(&self) -> f64 {
        self.inner.coefficient
    }

    fn psi(&self, lam: f64) -> f64 {
        self.inner.psi(lam)
    }

    fn laplace(&self, lam: f64) -> f64 {
        self.inner.laplace(lam)
    }

    /// One path on a grid of `horizon/mesh` steps: `(values, reflected)`.
    fn sample_path(&self, horizon: f64, mesh: f64, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mut rng = substream(seed, tag("limit-sample"), 0);
        let p = stable_limit::simulate_reflected_limit(&self.inner, horizon, mesh, &mut rng).map_err(value_err)?;
        Ok((p.values, p.reflected))
    }
}

/// Outcome of one check.
#[pyclass(name = "TestReport", module = "cmjlab")]
struct PyReport {
    inner: TestReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    /// `"PASS"`, `"FAIL"` or `"INCONCLUSIVE"`.
    #[getter]
    fn verdict(&self) -> String {
        self.inner.verdict.to_string()
    }

    /// `(label, x, estimate, target, ci_lo, ci_hi, verdict, kind)` per row.
    #[getter]
    fn rows(&self) -> Vec<(String, f64, f64, f64, f64, f64, String, String)> {
        self.inner
            .rows
            .iter()
            .map(|r| {
                (
                    r.label.clone(),
                    r.x,
                    r.estimate,
                    r.target,
                    r.ci_lo,
                    r.ci_hi,
                    r.verdict.to_string(),
                    r.kind.to_string(),
                )
            })
            .collect()
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.inner.notes.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        self.inner.summary_line()
    }
}

fn report(r: Result<TestReport, impl std::fmt::Display>) -> PyResult<PyReport> {
    r.map(|inner| PyReport { inner }).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (spec, p_grid, x_grid, n_samples, seed, tolerances=None))]
fn tail_check_mu_v(
    spec: &PySpec,
    p_grid: Vec<u64>,
    x_grid: Vec<f64>,
    n_samples: u64,
    seed: u64,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    report(verify::tail_check_mu_v(&spec.inner, &p_grid, &x_grid, n_samples, seed, &tol))
}

#[pyfunction]
#[pyo3(signature = (spec, p, lambda_grid, n_replicas, seed, tolerances=None))]
fn laplace_check_s(
    spec: &PySpec,
    p: u64,
    lambda_grid: Vec<f64>,
    n_replicas: usize,
    seed: u64,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    report(verify::laplace_check_s(&spec.inner, p, &lambda_grid, n_replicas, seed, &tol))
}

#[pyfunction]
#[pyo3(signature = (spec, n_samples, seed, max_steps=1_000_000, n_boot=200, tolerances=None))]
fn ladder_law_check(
    spec: &PySpec,
    n_samples: usize,
    seed: u64,
    max_steps: u64,
    n_boot: usize,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    let opts = verify::LadderLawOptions {
        max_steps,
        n_boot,
        ..Default::default()
    };
    report(verify::ladder_law_check(&spec.inner, n_samples, &opts, seed, &tol))
}

#[pyfunction]
#[pyo3(signature = (spec, p, xy_grid, seed, walks_per_pvp=4000.0, max_steps=10_000_000, tolerances=None))]
fn joint_tail_rz(
    spec: &PySpec,
    p: u64,
    xy_grid: Vec<(f64, f64)>,
    seed: u64,
    walks_per_pvp: f64,
    max_steps: u64,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    let opts = verify::JointTailOptions {
        walks_per_pvp,
        max_steps,
        ..Default::default()
    };
    report(verify::joint_tail_rz(&spec.inner, p, &xy_grid, &opts, seed, &tol))
}

#[pyfunction]
#[pyo3(signature = (spec, p, t, n_replicas, seed, order="decreasing", tolerances=None))]
fn identity_in_law_check(
    spec: &PySpec,
    p: u64,
    t: f64,
    n_replicas: usize,
    seed: u64,
    order: &str,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    let opts = verify::IdentityOptions {
        order: self::order(order)?,
        ..Default::default()
    };
    report(verify::identity_in_law_check(&spec.inner, p, t, n_replicas, &opts, seed, &tol))
}

#[pyfunction]
#[pyo3(signature = (spec, p_grid, t_grid, n_replicas, seed, mesh=1e-3, tolerances=None))]
fn fdd_main_check(
    spec: &PySpec,
    p_grid: Vec<u64>,
    t_grid: Vec<f64>,
    n_replicas: usize,
    seed: u64,
    mesh: f64,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    report(verify::fdd_main_check(
        &spec.inner,
        &p_grid,
        &t_grid,
        n_replicas,
        mesh,
        &verify::FddOptions::default(),
        seed,
        &tol,
    ))
}

#[pyfunction]
#[pyo3(signature = (gamma, gamma_prime, p_grid, n_replicas, seed, tolerances=None))]
fn counterexample_divergence(
    gamma: f64,
    gamma_prime: f64,
    p_grid: Vec<u64>,
    n_replicas: usize,
    seed: u64,
    tolerances: Option<&str>,
) -> PyResult<PyReport> {
    let tol = self::tolerances(tolerances)?;
    report(verify::counterexample_divergence(gamma, gamma_prime, &p_grid, n_replicas, seed, &tol))
}

#[pyfunction]
#[pyo3(signature = (spec, t_grid, n_samples, seed, threshold=0.05))]
fn estimate_r1(spec: &PySpec, t_grid: Vec<f64>, n_samples: u64, seed: u64, threshold: f64) -> PyResult<PyReport> {
    report(models::estimate_r1(
        &spec.inner,
        &t_grid,
        n_samples,
        &models::R1Options { threshold },
        seed,
    ))
}

#[pyfunction]
#[pyo3(signature = (spec, p_grid, x, a_prime, n_samples, seed, threshold=0.1))]
fn estimate_r2(
    spec: &PySpec,
    p_grid: Vec<u64>,
    x: f64,
    a_prime: f64,
    n_samples: u64,
    seed: u64,
    threshold: f64,
) -> PyResult<PyReport> {
    let opts = models::R2Options {
        threshold,
        ..Default::default()
    };
    report(models::estimate_r2(&spec.inner, &p_grid, x, a_prime, n_samples, &opts, seed))
}

/// Two-sample KS statistic and asymptotic p-value.
#[pyfunction]
fn ks_two_sample(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    verify::ks_two_sample(&xs, &ys)
        .map(|r| (r.statistic, r.p_value))
        .map_err(value_err)
}

#[pymodule]
fn cmjlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpec>()?;
    m.add_class::<PyForest>()?;
    m.add_class::<PyStable>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(tail_check_mu_v, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_check_s, m)?)?;
    m.add_function(wrap_pyfunction!(ladder_law_check, m)?)?;
    m.add_function(wrap_pyfunction!(joint_tail_rz, m)?)?;
    m.add_function(wrap_pyfunction!(identity_in_law_check, m)?)?;
    m.add_function(wrap_pyfunction!(fdd_main_check, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_r1, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_r2, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    Ok(())
}
