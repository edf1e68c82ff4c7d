use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use budgetci_core::bounds;
use budgetci_core::distances;
use budgetci_core::exact_dists::{self, PoiBinSpec};
use budgetci_core::harness::{self, ConfigFile, ExperimentConfig, Procedure};
use budgetci_core::oracle;
use budgetci_core::orderstats::{self, BudgetSpec, IntervalKind, RuleName, Sided};
use budgetci_core::procedures::{self, CiSpec, CiVariant, ConformalVariant, Root};
use budgetci_core::resampling::SeedSpec;
use budgetci_core::Error;

create_exception!(budgetci, BudgetTooSmallError, PyValueError);
create_exception!(budgetci, ConfigError, PyValueError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::BudgetTooSmall { .. } => BudgetTooSmallError::new_err(e.to_string()),
        Error::Config { .. } => ConfigError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn kind_name(kind: IntervalKind) -> &'static str {
    match kind {
        IntervalKind::Closed => "closed",
        IntervalKind::LeftClosedRightOpen => "left_closed_right_open",
        IntervalKind::LeftOpenRightClosed => "left_open_right_closed",
        IntervalKind::OneSidedUpper => "one_sided_upper",
    }
}

fn parse_kind(s: &str) -> PyResult<IntervalKind> {
    Ok(match s {
        "closed" => IntervalKind::Closed,
        "left_closed_right_open" | "lcro" => IntervalKind::LeftClosedRightOpen,
        "left_open_right_closed" | "lorc" => IntervalKind::LeftOpenRightClosed,
        "one_sided_upper" => IntervalKind::OneSidedUpper,
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown interval kind `{s}`"
            )))
        }
    })
}

fn parse_sided(s: &str) -> PyResult<Sided> {
    match s {
        "one" => Ok(Sided::One),
        "two" => Ok(Sided::Two),
        _ => Err(PyValueError::new_err(format!(
            "sided must be `one` or `two`, got `{s}`"
        ))),
    }
}

fn parse_procedure(s: &str) -> PyResult<Procedure> {
    Ok(match s {
        "bootstrap" => Procedure::Bootstrap,
        "subsample" => Procedure::Subsample,
        "sgd" => Procedure::Sgd,
        "permutation" => Procedure::Permutation,
        "randomization" => Procedure::Randomization,
        "conformal" => Procedure::Conformal,
        _ => return Err(PyValueError::new_err(format!("unknown procedure `{s}`"))),
    })
}

/// Ranks and membership kind of `W_(lower) .. W_(upper)`.
#[pyclass(frozen, name = "IndexRule")]
struct PyIndexRule {
    #[pyo3(get)]
    lower_rank: i64,
    #[pyo3(get)]
    upper_rank: i64,
    #[pyo3(get)]
    kind: &'static str,
    #[pyo3(get)]
    rule: &'static str,
    #[pyo3(get)]
    budget: usize,
}

#[pymethods]
impl PyIndexRule {
    fn __repr__(&self) -> String {
        format!(
            "IndexRule(rule={}, B={}, lower_rank={}, upper_rank={}, kind={})",
            self.rule, self.budget, self.lower_rank, self.upper_rank, self.kind
        )
    }
}

impl From<orderstats::IntervalIndexRule> for PyIndexRule {
    fn from(r: orderstats::IntervalIndexRule) -> Self {
        Self {
            lower_rank: r.lower_rank,
            upper_rank: r.upper_rank,
            kind: kind_name(r.kind),
            rule: r.rule.as_str(),
            budget: r.budget,
        }
    }
}

#[pyclass(frozen, name = "CoverageBound")]
struct PyCoverageBound {
    #[pyo3(get)]
    lower: f64,
    /// `inf` when no upper bound applies.
    #[pyo3(get)]
    upper: f64,
    #[pyo3(get)]
    base: f64,
    #[pyo3(get)]
    slack_terms: Vec<(String, f64)>,
}

#[pymethods]
impl PyCoverageBound {
    fn brackets(&self, p: f64, tol: f64) -> bool {
        self.lower - tol <= p && p <= self.upper + tol
    }

    fn __repr__(&self) -> String {
        format!(
            "CoverageBound(lower={}, upper={}, base={})",
            self.lower, self.upper, self.base
        )
    }
}

impl From<bounds::CoverageBound> for PyCoverageBound {
    fn from(b: bounds::CoverageBound) -> Self {
        Self {
            lower: b.lower,
            upper: b.upper,
            base: b.base,
            slack_terms: b.slack_terms,
        }
    }
}

/// Scalar confidence interval `(lo, hi]` with the order statistics behind it.
#[pyclass(frozen, name = "Interval")]
struct PyInterval {
    #[pyo3(get)]
    theta_hat: f64,
    #[pyo3(get)]
    lo: f64,
    #[pyo3(get)]
    hi: f64,
    #[pyo3(get)]
    lower_stat: f64,
    #[pyo3(get)]
    upper_stat: f64,
    #[pyo3(get)]
    rule: Py<PyIndexRule>,
    /// `(u, tau, ceil_branch)` for the randomized variant.
    #[pyo3(get)]
    randomized_branch: Option<(f64, f64, bool)>,
    inner: procedures::ScalarInterval,
}

#[pymethods]
impl PyInterval {
    fn contains(&self, theta: f64) -> bool {
        self.inner.contains(theta)
    }

    #[getter]
    fn width(&self) -> f64 {
        self.inner.width()
    }

    fn __repr__(&self) -> String {
        format!(
            "Interval(({}, {}], theta_hat={})",
            self.lo, self.hi, self.theta_hat
        )
    }
}

#[pyclass(frozen, name = "PredictionSet")]
struct PyPredictionSet {
    #[pyo3(get)]
    threshold: f64,
    #[pyo3(get)]
    rank: i64,
    #[pyo3(get)]
    rule: &'static str,
}

#[pymethods]
impl PyPredictionSet {
    fn contains_score(&self, s: f64) -> bool {
        s <= self.threshold
    }

    fn __repr__(&self) -> String {
        format!(
            "PredictionSet(threshold={}, rank={}, rule={})",
            self.threshold, self.rank, self.rule
        )
    }
}

fn rule_by_name(name: &str) -> PyResult<RuleName> {
    name.parse::<RuleName>().map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (alpha, sided = "two"))]
fn min_budget(alpha: f64, sided: &str) -> PyResult<usize> {
    orderstats::min_budget(alpha, parse_sided(sided)?).map_err(py_err)
}

/// Ranks for a named rule; raises `BudgetTooSmallError` when infeasible.
#[pyfunction]
#[pyo3(signature = (budget, alpha, rule = "mod_two_sided"))]
fn index_rule(budget: usize, alpha: f64, rule: &str) -> PyResult<PyIndexRule> {
    let spec = BudgetSpec::new(budget, alpha).map_err(py_err)?;
    orderstats::index_rule(&spec, rule_by_name(rule)?)
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn rule_names() -> Vec<&'static str> {
    RuleName::ALL.iter().map(|r| r.as_str()).collect()
}

#[pyfunction]
#[pyo3(signature = (budget, a, b, delta, delta_tilde = None, kind = "closed"))]
fn iid_bracket(
    budget: usize,
    a: i64,
    b: i64,
    delta: f64,
    delta_tilde: Option<f64>,
    kind: &str,
) -> PyResult<PyCoverageBound> {
    bounds::thm1_bounds(
        budget,
        a,
        b,
        delta,
        delta_tilde.unwrap_or(delta),
        parse_kind(kind)?,
    )
    .map(Into::into)
    .map_err(py_err)
}

#[pyfunction]
fn independent_bracket(
    budget: usize,
    a: i64,
    b: i64,
    d_tilde: f64,
    kappas: Vec<f64>,
) -> PyResult<PyCoverageBound> {
    bounds::thm2_bounds(budget, a, b, d_tilde, &kappas)
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn ordering_lower_bound(budget: usize, a: i64, b: i64, d_ks: f64) -> PyResult<f64> {
    bounds::thm3_lower(budget, a, b, d_ks).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (budget, gamma, beta, big_gamma, continuous = true))]
fn exchangeable_bracket(
    budget: usize,
    gamma: f64,
    beta: f64,
    big_gamma: f64,
    continuous: bool,
) -> PyResult<PyCoverageBound> {
    bounds::thm4_bounds(budget, gamma, beta, big_gamma, continuous)
        .map(Into::into)
        .map_err(py_err)
}

#[pyfunction]
fn ks_uniform(u: Vec<f64>) -> PyResult<f64> {
    distances::ks_uniform(&u).map(|d| d.value).map_err(py_err)
}

#[pyfunction]
fn mod_ks_uniform(u: Vec<f64>) -> PyResult<f64> {
    distances::mod_ks_uniform(&u)
        .map(|d| d.value)
        .map_err(py_err)
}

#[pyfunction]
fn i_b(budget: usize) -> f64 {
    exact_dists::i_b(budget)
}

/// `(upper, r)`: the total-variation bound to `Bin(B, p̄)` and the
/// heterogeneity ratio.
#[pyfunction]
fn ehm_tv_bound(probs: Vec<f64>) -> PyResult<(f64, f64)> {
    let spec = PoiBinSpec::new(probs).map_err(py_err)?;
    let b = exact_dists::ehm_tv_bound(&spec).map_err(py_err)?;
    Ok((b.upper, b.r))
}

#[pyfunction]
fn tv_poibin_binomial(probs: Vec<f64>) -> PyResult<f64> {
    let spec = PoiBinSpec::new(probs).map_err(py_err)?;
    Ok(exact_dists::tv_poibin_binomial(&spec))
}

#[pyfunction]
fn poisson_binomial_pmf(probs: Vec<f64>) -> PyResult<Vec<f64>> {
    let spec = PoiBinSpec::new(probs).map_err(py_err)?;
    Ok(exact_dists::poisson_binomial_pmf(&spec))
}

/// `(numerator, denominator)` of the exact coverage of `W_(a) .. W_(B−b)`
/// for IID continuous draws.
#[pyfunction]
fn exact_coverage_continuous_iid(budget: usize, a: i64, b: i64) -> PyResult<(i64, i64)> {
    let r = oracle::exact_coverage_continuous_iid(budget, a, b).map_err(py_err)?;
    Ok((*r.numer(), *r.denom()))
}

/// `(rank, coverage, bound)` of the modified conformal rule on a grid of
/// `m + 1` equally likely tied scores.
#[pyfunction]
fn conformal_grid_example(m: usize, alpha: f64) -> PyResult<(i64, f64, f64)> {
    let ex = oracle::conformal_grid_example(m, alpha).map_err(py_err)?;
    Ok((ex.rank, ex.coverage, ex.bound))
}

#[pyfunction]
fn group_test_size(n: usize, budget: usize, rank: i64) -> f64 {
    oracle::group_test_size(n, budget, rank)
}

fn mean(x: &[f64]) -> Result<Vec<f64>, String> {
    if x.is_empty() {
        return Err("empty sample".into());
    }
    Ok(vec![x.iter().sum::<f64>() / x.len() as f64])
}

fn call_estimator(f: &Bound<'_, PyAny>, x: &[f64]) -> Result<Vec<f64>, String> {
    let out = f.call1((x.to_vec(),)).map_err(|e| e.to_string())?;
    out.extract::<f64>()
        .map(|v| vec![v])
        .map_err(|e| format!("estimator must return a float: {e}"))
}

fn interval_from(py: Python<'_>, r: procedures::CiResult) -> PyResult<PyInterval> {
    let iv = r
        .interval
        .ok_or_else(|| PyValueError::new_err("no scalar interval for this root"))?;
    Ok(PyInterval {
        theta_hat: r.theta_hat[0],
        lo: iv.lo,
        hi: iv.hi,
        lower_stat: r.lower_stat(),
        upper_stat: r.upper_stat(),
        rule: Py::new(py, PyIndexRule::from(r.rule))?,
        randomized_branch: r.randomized_branch.map(|b| (b.u, b.tau, b.ceil_branch)),
        inner: iv,
    })
}

fn ci_spec(budget: usize, alpha: f64, variant: &str) -> PyResult<CiSpec> {
    Ok(CiSpec {
        budget,
        alpha,
        variant: variant.parse::<CiVariant>().map_err(py_err)?,
    })
}

/// Bootstrap interval for a scalar statistic (the mean unless `estimator`
/// is given). `tau` defaults to `√m`.
#[pyfunction]
#[pyo3(signature = (data, budget, alpha, variant = "modified", seed = 0, estimator = None, tau = None))]
#[allow(clippy::too_many_arguments)]
fn ci_boot(
    py: Python<'_>,
    data: Vec<f64>,
    budget: usize,
    alpha: f64,
    variant: &str,
    seed: u64,
    estimator: Option<Bound<'_, PyAny>>,
    tau: Option<f64>,
) -> PyResult<PyInterval> {
    let spec = ci_spec(budget, alpha, variant)?;
    let tau = tau.unwrap_or((data.len() as f64).sqrt());
    let seed = SeedSpec::new(seed, 0);
    let r = match &estimator {
        Some(f) => procedures::ci_boot(
            &data,
            |x: &[f64]| call_estimator(f, x),
            Root::Identity,
            tau,
            &spec,
            seed,
        ),
        None => procedures::ci_boot(&data, mean, Root::Identity, tau, &spec, seed),
    }
    .map_err(py_err)?;
    interval_from(py, r)
}

/// Subsampling interval with subsample size `k` (default `⌈m^{2/3}⌉`) and
/// `√·` rates unless `tau_m`/`tau_k` are given.
#[pyfunction]
#[pyo3(signature = (data, budget, alpha, variant = "modified", seed = 0, k = None, estimator = None, tau_m = None, tau_k = None))]
#[allow(clippy::too_many_arguments)]
fn ci_subsample(
    py: Python<'_>,
    data: Vec<f64>,
    budget: usize,
    alpha: f64,
    variant: &str,
    seed: u64,
    k: Option<usize>,
    estimator: Option<Bound<'_, PyAny>>,
    tau_m: Option<f64>,
    tau_k: Option<f64>,
) -> PyResult<PyInterval> {
    let spec = ci_spec(budget, alpha, variant)?;
    let m = data.len();
    let k = k.unwrap_or_else(|| (m as f64).powf(2.0 / 3.0).ceil() as usize);
    let tau_m = tau_m.unwrap_or((m as f64).sqrt());
    let tau_k = tau_k.unwrap_or((k as f64).sqrt());
    let seed = SeedSpec::new(seed, 0);
    let r = match &estimator {
        Some(f) => procedures::ci_subsample(
            &data,
            |x: &[f64]| call_estimator(f, x),
            Root::Identity,
            tau_m,
            tau_k,
            k,
            &spec,
            seed,
        ),
        None => procedures::ci_subsample(&data, mean, Root::Identity, tau_m, tau_k, k, &spec, seed),
    }
    .map_err(py_err)?;
    interval_from(py, r)
}

#[pyfunction]
#[pyo3(signature = (scores, alpha, variant = "modified"))]
fn conformal_set(scores: Vec<f64>, alpha: f64, variant: &str) -> PyResult<PyPredictionSet> {
    let variant = match variant {
        "split" => ConformalVariant::Split,
        "modified" => ConformalVariant::Modified,
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown conformal variant `{variant}`"
            )))
        }
    };
    let set = procedures::conformal_set(&scores, alpha, variant).map_err(py_err)?;
    Ok(PyPredictionSet {
        threshold: set.threshold,
        rank: set.rank,
        rule: set.rule.as_str(),
    })
}

/// Runs a coverage experiment and returns the CSV table. `config` is a JSON
/// object with the same keys as the CLI config file.
#[pyfunction]
#[pyo3(signature = (procedure, config = None))]
fn run_experiment(py: Python<'_>, procedure: &str, config: Option<&str>) -> PyResult<String> {
    let procedure = parse_procedure(procedure)?;
    let file = match config {
        Some(text) => ConfigFile::from_json(text).map_err(py_err)?,
        None => ConfigFile::default(),
    };
    let table = py.detach(|| {
        let cfg = ExperimentConfig::resolve(procedure, &file)?;
        harness::run_experiment(&cfg)
    });
    let table = table.map_err(py_err)?;
    let mut buf = Vec::new();
    harness::write_csv(&table, &mut buf).map_err(py_err)?;
    String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn budgetci(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("BudgetTooSmallError", py.get_type::<BudgetTooSmallError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add_class::<PyIndexRule>()?;
    m.add_class::<PyCoverageBound>()?;
    m.add_class::<PyInterval>()?;
    m.add_class::<PyPredictionSet>()?;
    m.add_function(wrap_pyfunction!(min_budget, m)?)?;
    m.add_function(wrap_pyfunction!(index_rule, m)?)?;
    m.add_function(wrap_pyfunction!(rule_names, m)?)?;
    m.add_function(wrap_pyfunction!(iid_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(independent_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(ordering_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(exchangeable_bracket, m)?)?;
    m.add_function(wrap_pyfunction!(ks_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(mod_ks_uniform, m)?)?;
    m.add_function(wrap_pyfunction!(i_b, m)?)?;
    m.add_function(wrap_pyfunction!(ehm_tv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(tv_poibin_binomial, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_binomial_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(exact_coverage_continuous_iid, m)?)?;
    m.add_function(wrap_pyfunction!(conformal_grid_example, m)?)?;
    m.add_function(wrap_pyfunction!(group_test_size, m)?)?;
    m.add_function(wrap_pyfunction!(ci_boot, m)?)?;
    m.add_function(wrap_pyfunction!(ci_subsample, m)?)?;
    m.add_function(wrap_pyfunction!(conformal_set, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
