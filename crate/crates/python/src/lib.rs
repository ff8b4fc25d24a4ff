//! Python bindings: rating matrices, the collaborative-filtering pipeline,
//! session workflow over a persisted dataset, analytics and the simulator.
//!
//! Structured results (sessions, reports) are returned as plain dicts and
//! lists. Domain errors raise `reqrec.ReqRecError(code, message)`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;
use serde_json::Value;

use reqrec_core::analytics::{
    self, PopulationSpec, SelectionMode, SimulatedPopulation, HUMAN_STUDY_SATISFACTION_PERCENT,
};
use reqrec_core::datastore::{self, seed_catalog};
use reqrec_core::{
    cf, ConstructPair, Dataset, EducationLevel, Error, FeedbackRecord, PredictionForm, RatingScale,
    RecommendParams, Requirement as CoreRequirement, RequirementId, SessionConfig, SessionId,
    Stakeholder, StakeholderId,
};

create_exception!(
    reqrec,
    ReqRecError,
    PyValueError,
    "Domain error carrying `(code, message)`."
);

fn err(e: Error) -> PyErr {
    ReqRecError::new_err((e.code(), e.to_string()))
}

fn json_to_py(py: Python<'_>, value: &Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any().unbind(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any().unbind(),
            _ => py.None(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| err(Error::Io(e.to_string())))?;
    json_to_py(py, &v)
}

fn parse_form(form: &str) -> PyResult<PredictionForm> {
    form.parse().map_err(err)
}

fn parse_level(level: &str) -> PyResult<EducationLevel> {
    level.parse().map_err(err)
}

/// One catalog entry with its bipolar construct.
#[pyclass(frozen, get_all, from_py_object, module = "reqrec")]
#[derive(Clone)]
pub struct Requirement {
    id: String,
    label: String,
    left_pole: String,
    right_pole: String,
    description: String,
}

#[pymethods]
impl Requirement {
    #[new]
    #[pyo3(signature = (id, label, left_pole, right_pole, description = String::new()))]
    fn py_new(
        id: String,
        label: String,
        left_pole: String,
        right_pole: String,
        description: String,
    ) -> PyResult<Self> {
        let r = Self {
            id,
            label,
            left_pole,
            right_pole,
            description,
        };
        r.to_core()?;
        Ok(r)
    }

    fn __repr__(&self) -> String {
        format!("Requirement({:?}, {:?})", self.id, self.label)
    }
}

impl Requirement {
    fn from_core(r: &CoreRequirement) -> Self {
        Self {
            id: r.id.to_string(),
            label: r.label.clone(),
            left_pole: r.construct_pair.left_pole.clone(),
            right_pole: r.construct_pair.right_pole.clone(),
            description: r.description.clone(),
        }
    }

    fn to_core(&self) -> PyResult<CoreRequirement> {
        let pair =
            ConstructPair::new(self.left_pole.as_str(), self.right_pole.as_str()).map_err(err)?;
        CoreRequirement::new(
            self.id.as_str(),
            self.label.as_str(),
            self.description.as_str(),
            pair,
        )
        .map_err(err)
    }
}

fn core_catalog(catalog: Option<Vec<Requirement>>) -> PyResult<Vec<CoreRequirement>> {
    match catalog {
        Some(items) => items.iter().map(Requirement::to_core).collect(),
        None => Ok(seed_catalog()),
    }
}

/// A ranked prediction.
#[pyclass(frozen, get_all, skip_from_py_object, module = "reqrec")]
#[derive(Clone)]
pub struct Prediction {
    requirement: String,
    raw_value: f64,
    clamped_value: f64,
    neighbor_support: usize,
}

#[pymethods]
impl Prediction {
    #[getter]
    fn is_fallback(&self) -> bool {
        self.neighbor_support == 0
    }

    fn __repr__(&self) -> String {
        format!(
            "Prediction({:?}, raw={:.4}, clamped={:.4}, support={})",
            self.requirement, self.raw_value, self.clamped_value, self.neighbor_support
        )
    }
}

impl From<&cf::Prediction> for Prediction {
    fn from(p: &cf::Prediction) -> Self {
        Self {
            requirement: p.requirement.to_string(),
            raw_value: p.raw_value,
            clamped_value: p.clamped_value,
            neighbor_support: p.neighbor_support,
        }
    }
}

/// Sparse stakeholder × requirement matrix of integer scores.
#[pyclass(skip_from_py_object, module = "reqrec")]
#[derive(Clone)]
pub struct RatingMatrix {
    inner: reqrec_core::RatingMatrix,
}

#[pymethods]
impl RatingMatrix {
    #[new]
    #[pyo3(signature = (min = 1, max = 5))]
    fn py_new(min: i32, max: i32) -> PyResult<Self> {
        let scale = RatingScale::new(min, max).map_err(err)?;
        Ok(Self {
            inner: reqrec_core::RatingMatrix::new(scale),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (catalog = None, min = 1, max = 5))]
    fn from_catalog(catalog: Option<Vec<Requirement>>, min: i32, max: i32) -> PyResult<Self> {
        let scale = RatingScale::new(min, max).map_err(err)?;
        let inner =
            reqrec_core::RatingMatrix::with_catalog(scale, &core_catalog(catalog)?).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn scale(&self) -> (i32, i32) {
        let s = self.inner.scale();
        (s.min(), s.max())
    }

    fn add_requirement(&mut self, id: &str) -> PyResult<()> {
        self.inner.register_requirement(id.into()).map_err(err)
    }

    #[pyo3(signature = (id, education_level = "unspecified"))]
    fn add_stakeholder(&mut self, id: &str, education_level: &str) -> PyResult<()> {
        let level = parse_level(education_level)?;
        self.inner
            .register_stakeholder(Stakeholder::new(id, level))
            .map_err(err)
    }

    /// Stores a score and returns the one it replaced, if any.
    fn rate(&mut self, stakeholder: &str, requirement: &str, score: i64) -> PyResult<Option<i32>> {
        self.inner
            .rate(&stakeholder.into(), &requirement.into(), score)
            .map_err(err)
    }

    fn score(&self, stakeholder: &str, requirement: &str) -> Option<i32> {
        self.inner.score(&stakeholder.into(), &requirement.into())
    }

    fn mean_rating(&self, stakeholder: &str) -> PyResult<f64> {
        self.inner.mean_rating(&stakeholder.into()).map_err(err)
    }

    fn corated_items(&self, a: &str, b: &str) -> Vec<String> {
        self.inner
            .corated_items(&a.into(), &b.into())
            .iter()
            .map(|r| r.to_string())
            .collect()
    }

    fn stakeholders(&self) -> Vec<String> {
        self.inner
            .stakeholders()
            .map(|s| s.id.to_string())
            .collect()
    }

    fn requirements(&self) -> Vec<String> {
        self.inner
            .requirement_ids()
            .map(|r| r.to_string())
            .collect()
    }

    fn row(&self, stakeholder: &str) -> Vec<(String, i32)> {
        self.inner
            .row(&stakeholder.into())
            .map(|(r, s)| (r.to_string(), s))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "RatingMatrix({} stakeholders, {} requirements, {} ratings)",
            self.inner.stakeholders().count(),
            self.inner.requirement_ids().count(),
            self.inner.len()
        )
    }
}

#[pyfunction]
#[pyo3(name = "seed_catalog")]
fn seed_catalog_py() -> Vec<Requirement> {
    seed_catalog().iter().map(Requirement::from_core).collect()
}

#[pyfunction]
fn load_catalog(path: PathBuf) -> PyResult<Vec<Requirement>> {
    let catalog = datastore::load_catalog_file(path).map_err(err)?;
    Ok(catalog.iter().map(Requirement::from_core).collect())
}

/// Loads a ratings CSV against `catalog` (the built-in one by default).
#[pyfunction]
#[pyo3(signature = (path, catalog = None, min = 1, max = 5))]
fn load_ratings(
    path: PathBuf,
    catalog: Option<Vec<Requirement>>,
    min: i32,
    max: i32,
) -> PyResult<RatingMatrix> {
    let scale = RatingScale::new(min, max).map_err(err)?;
    let loaded = datastore::load_ratings_file(path, &core_catalog(catalog)?, scale).map_err(err)?;
    Ok(RatingMatrix {
        inner: loaded.matrix,
    })
}

#[pyfunction]
#[pyo3(signature = (size = 50, seed = 2024, catalog = None))]
fn synthetic_ratings(
    size: usize,
    seed: u64,
    catalog: Option<Vec<Requirement>>,
) -> PyResult<RatingMatrix> {
    let inner =
        analytics::synthetic_ratings(&core_catalog(catalog)?, RatingScale::default(), size, seed)
            .map_err(err)?;
    Ok(RatingMatrix { inner })
}

/// `(value, corated_count)`.
#[pyfunction]
fn pearson_similarity(matrix: &RatingMatrix, a: &str, b: &str) -> PyResult<(f64, usize)> {
    let s = cf::pearson_similarity(&matrix.inner, &a.into(), &b.into()).map_err(err)?;
    Ok((s.value, s.corated_count))
}

/// `[(neighbor, value), ...]`, most similar first.
#[pyfunction]
#[pyo3(signature = (matrix, target, m = 5))]
fn select_neighbors(matrix: &RatingMatrix, target: &str, m: usize) -> PyResult<Vec<(String, f64)>> {
    let set = cf::select_neighbors(&matrix.inner, &target.into(), m).map_err(err)?;
    Ok(set
        .neighbors
        .iter()
        .map(|n| (n.neighbor.to_string(), n.value))
        .collect())
}

#[pyfunction]
#[pyo3(signature = (matrix, target, requirement, m = 5, form = "standard"))]
fn predict_rating(
    matrix: &RatingMatrix,
    target: &str,
    requirement: &str,
    m: usize,
    form: &str,
) -> PyResult<Prediction> {
    let target = StakeholderId::new(target);
    let neighbors = cf::select_neighbors(&matrix.inner, &target, m).map_err(err)?;
    let p = cf::predict_rating(
        &matrix.inner,
        &target,
        &requirement.into(),
        &neighbors,
        parse_form(form)?,
    )
    .map_err(err)?;
    Ok(Prediction::from(&p))
}

#[pyfunction]
#[pyo3(signature = (matrix, target, m = 5, k = 5, form = "standard"))]
fn recommend(
    matrix: &RatingMatrix,
    target: &str,
    m: usize,
    k: usize,
    form: &str,
) -> PyResult<Vec<Prediction>> {
    let params = RecommendParams {
        neighbors: m,
        top_k: k,
        ..RecommendParams::default()
    };
    let rec =
        cf::recommend(&matrix.inner, &target.into(), params, parse_form(form)?).map_err(err)?;
    Ok(rec.items.iter().map(Prediction::from).collect())
}

/// Report over `(session_id, education_level, stars)` tuples.
#[pyfunction]
fn satisfaction_report(py: Python<'_>, records: Vec<(String, String, u8)>) -> PyResult<Py<PyAny>> {
    let feedback = records
        .into_iter()
        .enumerate()
        .map(|(i, (session, level, stars))| {
            Ok(FeedbackRecord {
                session_id: SessionId::new(session),
                requirement_id: RequirementId::new(format!("item-{i}")),
                stars,
                education_level: parse_level(&level)?,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &reqrec_core::analytics::satisfaction_report(&feedback))
}

/// Runs a seeded simulated study; returns hit rates and the report.
#[pyfunction]
#[pyo3(signature = (seed = 42, trials = 127, core = 50, clusters = 2, noise = 0.0, n = 3, m = 5, k = 5, form = "standard", baseline = true))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    seed: u64,
    trials: usize,
    core: usize,
    clusters: usize,
    noise: f64,
    n: usize,
    m: usize,
    k: usize,
    form: &str,
    baseline: bool,
) -> PyResult<Py<PyAny>> {
    let catalog = seed_catalog();
    let config = SessionConfig {
        n_seeds: n,
        m_neighbors: m,
        k_recommendations: k,
        prediction_form: parse_form(form)?,
        ..SessionConfig::default()
    };
    let spec = PopulationSpec {
        seed,
        core_size: core,
        participants: trials,
        clusters,
        noise_level: noise,
    };
    let outcome = py
        .detach(|| -> reqrec_core::Result<_> {
            let pop = SimulatedPopulation::generate(spec, &catalog, n, config.scale)?;
            let cf =
                analytics::simulate_study(&catalog, &config, &pop, SelectionMode::Collaborative)?;
            let random = if baseline {
                Some(
                    analytics::simulate_study(
                        &catalog,
                        &config,
                        &pop,
                        SelectionMode::RandomBaseline,
                    )?
                    .hit_rate,
                )
            } else {
                None
            };
            Ok((cf.hit_rate, random, cf.report))
        })
        .map_err(err)?;
    let out = serde_json::json!({
        "hit_rate": outcome.0,
        "baseline_hit_rate": outcome.1,
        "report": outcome.2,
        "human_study_reference_percent": HUMAN_STUDY_SATISFACTION_PERCENT,
    });
    json_to_py(py, &out)
}

/// Catalog, ratings and sessions with the session workflow; sessions are
/// returned as dicts.
#[pyclass(module = "reqrec")]
pub struct Store {
    inner: Dataset,
}

#[pymethods]
impl Store {
    #[new]
    #[pyo3(signature = (catalog = None, ratings = None, n = 3, m = 5, k = 5, form = "standard"))]
    fn py_new(
        catalog: Option<Vec<Requirement>>,
        ratings: Option<&RatingMatrix>,
        n: usize,
        m: usize,
        k: usize,
        form: &str,
    ) -> PyResult<Self> {
        let config = SessionConfig {
            n_seeds: n,
            m_neighbors: m,
            k_recommendations: k,
            prediction_form: parse_form(form)?,
            scale: ratings.map_or_else(RatingScale::default, |r| r.inner.scale()),
        };
        let catalog = core_catalog(catalog)?;
        let inner = match ratings {
            Some(r) => Dataset::with_matrix(catalog, config, r.inner.clone()),
            None => Dataset::new(catalog, config),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: datastore::load_state(path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        datastore::save_state(path, &self.inner).map_err(err)
    }

    #[getter]
    fn matrix(&self) -> RatingMatrix {
        RatingMatrix {
            inner: self.inner.matrix.clone(),
        }
    }

    #[pyo3(signature = (stakeholder_id, education_level = "unspecified"))]
    fn start_session(
        &mut self,
        py: Python<'_>,
        stakeholder_id: &str,
        education_level: &str,
    ) -> PyResult<Py<PyAny>> {
        let stakeholder = Stakeholder::new(stakeholder_id, parse_level(education_level)?);
        let s = self
            .inner
            .start_session(stakeholder, chrono::Utc::now())
            .map_err(err)?;
        to_py(py, s)
    }

    fn submit_seed_ratings(
        &mut self,
        py: Python<'_>,
        session_id: &str,
        ratings: Vec<(String, i64)>,
    ) -> PyResult<Py<PyAny>> {
        let ratings: Vec<_> = ratings
            .into_iter()
            .map(|(r, s)| (RequirementId::new(r), s))
            .collect();
        let s = self
            .inner
            .submit_seed_ratings(&SessionId::new(session_id), &ratings, chrono::Utc::now())
            .map_err(err)?;
        to_py(py, s)
    }

    fn recommend(&mut self, py: Python<'_>, session_id: &str) -> PyResult<Py<PyAny>> {
        let s = self
            .inner
            .recommend(&SessionId::new(session_id), chrono::Utc::now())
            .map_err(err)?;
        to_py(py, s)
    }

    fn submit_feedback(
        &mut self,
        py: Python<'_>,
        session_id: &str,
        feedback: Vec<(String, i64)>,
    ) -> PyResult<Py<PyAny>> {
        let feedback: Vec<_> = feedback
            .into_iter()
            .map(|(r, s)| (RequirementId::new(r), s))
            .collect();
        let s = self
            .inner
            .submit_feedback(&SessionId::new(session_id), &feedback, chrono::Utc::now())
            .map_err(err)?;
        to_py(py, s)
    }

    fn session(&self, py: Python<'_>, session_id: &str) -> PyResult<Py<PyAny>> {
        to_py(
            py,
            self.inner
                .session(&SessionId::new(session_id))
                .map_err(err)?,
        )
    }

    fn satisfaction_report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(
            py,
            &reqrec_core::analytics::satisfaction_report(&self.inner.feedback()),
        )
    }
}

#[pymodule]
fn reqrec(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ReqRecError", m.py().get_type::<ReqRecError>())?;
    m.add_class::<Requirement>()?;
    m.add_class::<Prediction>()?;
    m.add_class::<RatingMatrix>()?;
    m.add_class::<Store>()?;
    m.add_function(wrap_pyfunction!(seed_catalog_py, m)?)?;
    m.add_function(wrap_pyfunction!(load_catalog, m)?)?;
    m.add_function(wrap_pyfunction!(load_ratings, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_ratings, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(select_neighbors, m)?)?;
    m.add_function(wrap_pyfunction!(predict_rating, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(satisfaction_report, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
