//! Python bindings: frames, the synthetic plant, detector training and
//! analysis, and the scoring functions. Matrices cross the boundary as lists
//! of rows.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tagwatch::dataset::{
    load_csv, synth_generate_split, write_csv, ColumnSchema, SynthConfig, TimeSeriesFrame,
    WindowSpec,
};
use tagwatch::detector::{self, ErrorConfig, ErrorSeries, ResidualMatrix};
use tagwatch::ga;
use tagwatch::metrics::{self, DetectionSet, GroundTruth, NabProfile};
use tagwatch::nn::{Activation, LayerConfig, OptimizerConfig, TrainConfig};
use tagwatch::pipeline::{attack_table, fit_detector, DetectorBundle};

fn py_err(e: tagwatch::Error) -> PyErr {
    match e {
        tagwatch::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Array2::from_shape_vec((rows.len(), cols), rows.concat())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `(start, end, targets, suspects of the first overlapping event, delay)`.
type AttackTuple = (usize, usize, Vec<String>, Vec<String>, Option<f64>);

fn rows_of(a: ndarray::ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// A multivariate series: timestamps, one column per tag, optional labels.
#[pyclass(name = "Frame", module = "tagwatch_py")]
struct PyFrame {
    inner: TimeSeriesFrame,
}

#[pymethods]
impl PyFrame {
    #[new]
    #[pyo3(signature = (timestamps, values, tag_names, labels=None))]
    fn new(
        timestamps: Vec<f64>,
        values: Vec<Vec<f64>>,
        tag_names: Vec<String>,
        labels: Option<Vec<bool>>,
    ) -> PyResult<Self> {
        let values = matrix(&values)?;
        let inner = match labels {
            Some(l) => {
                TimeSeriesFrame::with_labels(timestamps, values, tag_names, Some(l), Vec::new())
            }
            None => TimeSeriesFrame::new(timestamps, values, tag_names),
        }
        .map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_csv(&path, &ColumnSchema::default()).map_err(py_err)?,
        })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        write_csv(&self.inner, &path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Frame(rows={}, tags={:?})",
            self.inner.len(),
            self.inner.tag_names()
        )
    }

    #[getter]
    fn tag_names(&self) -> Vec<String> {
        self.inner.tag_names().to_vec()
    }

    #[getter]
    fn timestamps(&self) -> Vec<f64> {
        self.inner.timestamps().to_vec()
    }

    #[getter]
    fn labels(&self) -> Option<Vec<bool>> {
        self.inner.labels().map(<[bool]>::to_vec)
    }

    /// `(start, end, target tag names)` per attack, inclusive bounds.
    #[getter]
    fn attacks(&self) -> Vec<(usize, usize, Vec<String>)> {
        let names = self.inner.tag_names();
        self.inner
            .attack_intervals()
            .iter()
            .map(|a| {
                (
                    a.start,
                    a.end,
                    a.targets.iter().map(|&t| names[t].clone()).collect(),
                )
            })
            .collect()
    }

    fn values(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.values())
    }
}

/// Train and test frames of the built-in demo plant.
#[pyfunction]
#[pyo3(signature = (seed, length=None, train_length=None))]
fn synth_demo(
    seed: u64,
    length: Option<usize>,
    train_length: Option<usize>,
) -> PyResult<(PyFrame, PyFrame)> {
    let mut cfg = SynthConfig::demo();
    if let Some(n) = length {
        cfg.length = n;
        cfg.injections.retain(|inj| inj.end <= n);
    }
    if let Some(n) = train_length {
        cfg.train_length = n;
    }
    let (train, test) = synth_generate_split(&cfg, seed).map_err(py_err)?;
    Ok((PyFrame { inner: train }, PyFrame { inner: test }))
}

/// A trained forecaster with its scaler, tag weights and threshold.
#[pyclass(name = "Detector", module = "tagwatch_py")]
struct PyDetector {
    inner: DetectorBundle,
}

#[pymethods]
impl PyDetector {
    /// Trains Dense(relu) hidden layers plus a linear decoder on `train`
    /// and calibrates on the same frame. Returns the detector and the
    /// per-epoch training losses.
    #[staticmethod]
    #[pyo3(signature = (
        train, input_len=50, horizon=10, forecast_len=4, hidden=vec![64, 64], epochs=10,
        batch_size=32, learning_rate=1e-3, seed=0, power=6.0, half_life=None, use_weights=true,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        train: &PyFrame,
        input_len: usize,
        horizon: usize,
        forecast_len: usize,
        hidden: Vec<usize>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
        power: f64,
        half_life: Option<usize>,
        use_weights: bool,
    ) -> PyResult<(Self, Vec<f64>)> {
        let spec = WindowSpec::new(input_len, horizon, forecast_len).map_err(py_err)?;
        let layers: Vec<LayerConfig> = hidden
            .iter()
            .map(|&u| LayerConfig::dense(u, Activation::Relu))
            .collect();
        let tc = TrainConfig {
            epochs,
            batch_size,
            seed,
            optimizer: OptimizerConfig::adam(learning_rate),
        };
        let error = ErrorConfig {
            power,
            half_life: Some(half_life.unwrap_or(forecast_len)),
            use_weights,
        };
        let (inner, losses) =
            fit_detector(&train.inner, spec, &layers, &tc, error).map_err(py_err)?;
        Ok((Self { inner }, losses))
    }

    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: DetectorBundle::load(&dir).map_err(py_err)?,
        })
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.save(&dir).map_err(py_err)
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.calibration.threshold
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.calibration.weights.w.clone()
    }

    #[getter]
    fn tag_names(&self) -> Vec<String> {
        self.inner.calibration.tag_names.clone()
    }

    fn summary(&self) -> String {
        self.inner.network.summary()
    }

    /// Error series, flags, events with ranked suspects, and the per-attack
    /// table when the frame carries attacks.
    #[pyo3(signature = (frame, top_k=5))]
    fn analyze<'py>(
        &self,
        py: Python<'py>,
        frame: &PyFrame,
        top_k: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let a = self.inner.analyze(&frame.inner, top_k).map_err(py_err)?;
        let names = frame.inner.tag_names();
        let out = PyDict::new(py);
        out.set_item("series", a.series.values.clone())?;
        out.set_item("threshold", a.threshold)?;
        out.set_item("flags", a.flags.clone())?;
        out.set_item("scored", (a.scored.start, a.scored.end))?;
        let mut events = Vec::new();
        for (ev, diag) in a.events.iter().zip(&a.diagnoses) {
            let d = PyDict::new(py);
            d.set_item("start", ev.start)?;
            d.set_item("end", ev.end)?;
            d.set_item("peak", ev.peak_value)?;
            d.set_item("peak_time", ev.peak_time)?;
            let suspects: Vec<(String, f64)> = diag
                .suspects
                .iter()
                .map(|s| (names[s.tag].clone(), s.score))
                .collect();
            d.set_item("suspects", suspects)?;
            events.push(d);
        }
        out.set_item("events", events)?;
        let attacks: Vec<AttackTuple> = attack_table(&frame.inner, &a)
            .into_iter()
            .map(|r| (r.start, r.end, r.targets, r.detected_tags, r.delay_seconds))
            .collect();
        out.set_item("attacks", attacks)?;
        Ok(out)
    }
}

/// Per-tag weights from a residual matrix (rows = time, columns = tags).
#[pyfunction]
fn tag_weights(residuals: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let m = ResidualMatrix::from_matrix(matrix(&residuals)?).map_err(py_err)?;
    Ok(detector::tag_weights(&m).map_err(py_err)?.w)
}

#[pyfunction]
fn ewma_alpha(half_life: usize) -> f64 {
    detector::ewma_alpha(half_life)
}

#[pyfunction]
fn ewma(values: Vec<f64>, half_life: usize) -> PyResult<Vec<f64>> {
    Ok(detector::ewma(&ErrorSeries { values }, half_life)
        .map_err(py_err)?
        .values)
}

/// Per-bit majority; exact ties take the bit from `tie_bits`.
#[pyfunction]
#[pyo3(signature = (values, tie_bits=0))]
fn bitwise_vote(values: Vec<u64>, tie_bits: u64) -> u64 {
    ga::bitwise_vote(&values, tie_bits)
}

fn truth(length: usize, windows: Vec<(usize, usize)>, step_seconds: f64) -> PyResult<GroundTruth> {
    GroundTruth::new(length, windows, step_seconds).map_err(py_err)
}

fn detection_set(mut points: Vec<usize>, length: usize) -> PyResult<DetectionSet> {
    points.sort_unstable();
    points.dedup();
    DetectionSet::new(points, length).map_err(py_err)
}

/// NAB score (standard profile) of detection timepoints against inclusive
/// anomaly windows.
#[pyfunction]
#[pyo3(signature = (length, windows, detections, a_tp=1.0, a_fp=0.11, a_fn=1.0))]
fn nab_score(
    length: usize,
    windows: Vec<(usize, usize)>,
    detections: Vec<usize>,
    a_tp: f64,
    a_fp: f64,
    a_fn: f64,
) -> PyResult<f64> {
    let g = truth(length, windows, 1.0)?;
    let profile = NabProfile { a_tp, a_fp, a_fn };
    metrics::nab_score(&g, &detection_set(detections, length)?, &profile).map_err(py_err)
}

/// Full score report as a dict: NAB, pointwise precision/recall/F1,
/// coverage, window recall and mean delay.
#[pyfunction]
#[pyo3(signature = (windows, detections, flags, step_seconds=1.0))]
fn score<'py>(
    py: Python<'py>,
    windows: Vec<(usize, usize)>,
    detections: Vec<usize>,
    flags: Vec<bool>,
    step_seconds: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let len = flags.len();
    let g = truth(len, windows, step_seconds)?;
    let r = metrics::score(
        &g,
        &detection_set(detections, len)?,
        &flags,
        &NabProfile::default(),
    )
    .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("nab", r.nab)?;
    out.set_item("precision", r.precision)?;
    out.set_item("recall", r.recall)?;
    out.set_item("f1", r.f1)?;
    out.set_item("tp", r.tp)?;
    out.set_item("fp", r.fp)?;
    out.set_item("fn", r.fn_)?;
    out.set_item("anomalous_time_coverage", r.anomalous_time_coverage)?;
    out.set_item("window_recall", r.window_recall)?;
    out.set_item("mean_delay_seconds", r.delay.mean_delay_seconds)?;
    Ok(out)
}

#[pymodule]
fn tagwatch_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFrame>()?;
    m.add_class::<PyDetector>()?;
    m.add_function(wrap_pyfunction!(synth_demo, m)?)?;
    m.add_function(wrap_pyfunction!(tag_weights, m)?)?;
    m.add_function(wrap_pyfunction!(ewma_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(ewma, m)?)?;
    m.add_function(wrap_pyfunction!(bitwise_vote, m)?)?;
    m.add_function(wrap_pyfunction!(nab_score, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
