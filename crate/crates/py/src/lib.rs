//! Python bindings for the edemarad pipeline.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edemarad::config::PipelineConfig;
use edemarad::gbdt::{self, Dataset, HyperParams};
use edemarad::grid::{Geometry, Grid};
use edemarad::io::Datatype;
use edemarad::radiomics::{self, TextureConfig, FEATURE_NAMES};
use edemarad::roi::BoundingBox;
use edemarad::{eval, io, phantom, pipeline, preprocess, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn json_loads(py: Python<'_>, text: &str) -> PyResult<PyObject> {
    Ok(py.import_bound("json")?.call_method1("loads", (text,))?.unbind())
}

fn geometry(dims: [usize; 3], spacing: [f64; 3]) -> PyResult<Geometry> {
    Geometry::new(dims, spacing).map_err(py_err)
}

/// A 3D scalar image; voxels are listed x-fastest.
#[pyclass(name = "Volume")]
#[derive(Clone)]
struct PyVolume {
    inner: edemarad::Volume,
}

#[pymethods]
impl PyVolume {
    #[new]
    #[pyo3(signature = (dims, data, spacing=[1.0, 1.0, 1.0]))]
    fn new(dims: [usize; 3], data: Vec<f64>, spacing: [f64; 3]) -> PyResult<Self> {
        let inner = Grid::new(geometry(dims, spacing)?, data).map_err(py_err)?;
        Ok(PyVolume { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyVolume {
            inner: io::load_volume(path).map_err(py_err)?,
        })
    }

    /// Writes a float32 NIfTI-1 file.
    fn save(&self, path: &str) -> PyResult<()> {
        io::save_volume(&self.inner, path, Datatype::Float32).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.inner.dims()
    }

    #[getter]
    fn spacing(&self) -> [f64; 3] {
        self.inner.spacing()
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn get(&self, x: usize, y: usize, z: usize) -> PyResult<f64> {
        let [nx, ny, nz] = self.inner.dims();
        if x >= nx || y >= ny || z >= nz {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(*self.inner.get(x, y, z))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Volume(dims={:?}, spacing={:?})", self.inner.dims(), self.inner.spacing())
    }
}

/// A binary 3D mask aligned with a volume.
#[pyclass(name = "Mask")]
#[derive(Clone)]
struct PyMask {
    inner: edemarad::Mask,
}

#[pymethods]
impl PyMask {
    #[new]
    #[pyo3(signature = (dims, data, spacing=[1.0, 1.0, 1.0]))]
    fn new(dims: [usize; 3], data: Vec<bool>, spacing: [f64; 3]) -> PyResult<Self> {
        let inner = Grid::new(geometry(dims, spacing)?, data).map_err(py_err)?;
        Ok(PyMask { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyMask {
            inner: io::load_mask(path).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        io::save_mask(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn dims(&self) -> [usize; 3] {
        self.inner.dims()
    }

    fn count(&self) -> usize {
        self.inner.count()
    }

    fn data(&self) -> Vec<bool> {
        self.inner.data().to_vec()
    }

    /// Inclusive `(lo, hi)` voxel bounds of the foreground.
    fn bounding_box(&self) -> PyResult<([usize; 3], [usize; 3])> {
        let b = edemarad::roi::mask_bounding_box(&self.inner).map_err(py_err)?;
        Ok((b.lo, b.hi))
    }

    fn __repr__(&self) -> String {
        format!("Mask(dims={:?}, count={})", self.inner.dims(), self.inner.count())
    }
}

fn parse_config(config_json: Option<&str>) -> PyResult<PipelineConfig> {
    match config_json {
        Some(text) => PipelineConfig::from_json(text).map_err(py_err),
        None => Ok(PipelineConfig::default()),
    }
}

fn feature_dict<'py>(py: Python<'py>, fv: &radiomics::FeatureVector) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new_bound(py);
    for (name, value) in fv.iter() {
        d.set_item(name, value)?;
    }
    Ok(d)
}

/// The 107 canonical feature names.
#[pyfunction]
fn feature_names() -> Vec<&'static str> {
    FEATURE_NAMES.to_vec()
}

/// Features of `volume` over `mask` with no preprocessing, as an ordered
/// dict. `config_json` holds `TextureConfig` fields.
#[pyfunction]
#[pyo3(signature = (volume, mask, config_json=None))]
fn extract_features<'py>(py: Python<'py>, volume: &PyVolume, mask: &PyMask, config_json: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg: TextureConfig = match config_json {
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => TextureConfig::default(),
    };
    let fv = radiomics::extract_all(&volume.inner, &mask.inner, &cfg).map_err(py_err)?;
    feature_dict(py, &fv)
}

/// Full per-case pipeline (reorient, denoise, expanded ROI, features) under a
/// pipeline config JSON.
#[pyfunction]
#[pyo3(signature = (volume, mask, config_json=None))]
fn case_features<'py>(py: Python<'py>, volume: &PyVolume, mask: &PyMask, config_json: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = parse_config(config_json)?;
    let fv = pipeline::case_features(&volume.inner, &mask.inner, &cfg).map_err(py_err)?;
    feature_dict(py, &fv)
}

#[pyfunction]
#[pyo3(signature = (volume, sigma_mm=0.5, truncation=3.0))]
fn gaussian_denoise(volume: &PyVolume, sigma_mm: f64, truncation: f64) -> PyResult<PyVolume> {
    let params = preprocess::GaussianParams::isotropic(sigma_mm, truncation);
    Ok(PyVolume {
        inner: preprocess::gaussian_denoise(&volume.inner, &params).map_err(py_err)?,
    })
}

#[pyfunction]
fn reorient_to_canonical(volume: &PyVolume) -> PyResult<PyVolume> {
    Ok(PyVolume {
        inner: preprocess::reorient_to_canonical(&volume.inner).map_err(py_err)?,
    })
}

/// Proportionally expanded inclusive box, clamped to `dims`.
#[pyfunction]
fn expand_box(lo: [usize; 3], hi: [usize; 3], fraction: f64, dims: [usize; 3]) -> PyResult<([usize; 3], [usize; 3])> {
    let b = BoundingBox::new(lo, hi).map_err(py_err)?;
    let e = edemarad::roi::expand_box(&b, fraction, dims).map_err(py_err)?;
    Ok((e.lo, e.hi))
}

#[pyfunction]
fn dice(a: &PyMask, b: &PyMask) -> PyResult<f64> {
    eval::dice(&a.inner, &b.inner).map_err(py_err)
}

#[pyfunction]
fn miou(a: &PyMask, b: &PyMask) -> PyResult<f64> {
    eval::miou(&a.inner, &b.inner).map_err(py_err)
}

/// Mean and population std of `(accuracy, precision, recall)` rows.
#[pyfunction]
fn aggregate(per_fold: Vec<(f64, f64, f64)>) -> PyResult<((f64, f64, f64), (f64, f64, f64))> {
    let rows: Vec<eval::MetricTriple> = per_fold
        .into_iter()
        .map(|(accuracy, precision, recall)| eval::MetricTriple {
            accuracy,
            precision,
            recall,
        })
        .collect();
    let (m, s) = eval::aggregate(&rows).map_err(py_err)?;
    Ok(((m.accuracy, m.precision, m.recall), (s.accuracy, s.precision, s.recall)))
}

/// Fold index per case, in input order.
#[pyfunction]
fn stratified_kfold(case_ids: Vec<String>, labels: Vec<u8>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    Ok(eval::stratified_kfold(&case_ids, &labels, k, seed).map_err(py_err)?.fold)
}

fn hyperparams(json: Option<&str>) -> PyResult<HyperParams> {
    match json {
        Some(t) => {
            let hp: HyperParams = serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string()))?;
            hp.validate().map_err(py_err)?;
            Ok(hp)
        }
        None => Ok(HyperParams::default()),
    }
}

fn dataset(rows: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Option<Vec<String>>) -> PyResult<Dataset> {
    let width = rows.first().map_or(0, Vec::len);
    let names = feature_names.unwrap_or_else(|| (0..width).map(|i| format!("f{i}")).collect());
    Dataset::new(names, rows, labels).map_err(py_err)
}

/// Stratified k-fold CV; returns the JSON report as a dict (metrics in
/// percent).
#[pyfunction]
#[pyo3(signature = (rows, labels, k=5, seed=0, feature_names=None, hyperparams_json=None))]
fn cross_validate(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    labels: Vec<u8>,
    k: usize,
    seed: u64,
    feature_names: Option<Vec<String>>,
    hyperparams_json: Option<&str>,
) -> PyResult<PyObject> {
    let data = dataset(rows, labels, feature_names)?;
    let hp = hyperparams(hyperparams_json)?;
    let summary = eval::cross_validate(&data, &hp, k, seed).map_err(py_err)?;
    json_loads(py, &summary.to_json())
}

/// Gradient boosted tree ensemble for binary labels.
#[pyclass(name = "GbdtModel")]
struct PyModel {
    inner: gbdt::Model,
}

#[pymethods]
impl PyModel {
    /// Fits on `rows` (one list of floats per sample). Hyperparameters are a
    /// JSON object with any of the `gbdt` config keys.
    #[staticmethod]
    #[pyo3(signature = (rows, labels, feature_names=None, hyperparams_json=None))]
    fn train(rows: Vec<Vec<f64>>, labels: Vec<u8>, feature_names: Option<Vec<String>>, hyperparams_json: Option<&str>) -> PyResult<Self> {
        let data = dataset(rows, labels, feature_names)?;
        let hp = hyperparams(hyperparams_json)?;
        Ok(PyModel {
            inner: gbdt::train(&data, &hp).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: gbdt::Model::from_json(text).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: gbdt::Model::load(path.as_ref()).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn predict_proba(&self, row: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_row(&row).map_err(py_err)
    }

    fn predict(&self, row: Vec<f64>) -> PyResult<u8> {
        self.inner.predict_class(&row).map_err(py_err)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.inner.trees.len()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names.clone()
    }
}

/// One synthetic case: `(volume, mask)`. Label 1 adds the peri-organ halo.
#[pyfunction]
#[pyo3(signature = (seed, label))]
fn phantom_case(seed: u64, label: u8) -> PyResult<(PyVolume, PyMask)> {
    let c = phantom::generate_case(&phantom::PhantomParams::with_seed(seed), label, "phantom").map_err(py_err)?;
    Ok((PyVolume { inner: c.volume }, PyMask { inner: c.mask }))
}

/// Writes a phantom dataset and returns its manifest rows
/// `(case_id, label, seed)`.
#[pyfunction]
fn phantom_dataset(n_pos: usize, n_neg: usize, seed: u64, out_dir: &str) -> PyResult<Vec<(String, u8, u64)>> {
    let plan = phantom::generate_dataset(n_pos, n_neg, seed, out_dir.as_ref(), &phantom::PhantomParams::default()).map_err(py_err)?;
    Ok(plan.into_iter().map(|e| (e.case_id, e.label, e.seed)).collect())
}

#[pymodule]
fn edemarad_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVolume>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(extract_features, m)?)?;
    m.add_function(wrap_pyfunction!(case_features, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_denoise, m)?)?;
    m.add_function(wrap_pyfunction!(reorient_to_canonical, m)?)?;
    m.add_function(wrap_pyfunction!(expand_box, m)?)?;
    m.add_function(wrap_pyfunction!(dice, m)?)?;
    m.add_function(wrap_pyfunction!(miou, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_kfold, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(phantom_case, m)?)?;
    m.add_function(wrap_pyfunction!(phantom_dataset, m)?)?;
    Ok(())
}
