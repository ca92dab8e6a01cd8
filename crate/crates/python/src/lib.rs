//! Python bindings for `polconv`.
//!
//! Angles are in degrees at this boundary, path differences in um.

#![allow(clippy::useless_conversion)]

use std::collections::BTreeMap;

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use polconv::analysis::{self, ChshEntry, FringeSample};
use polconv::{apparatus, detection, elements, io, modes};
use polconv::{ApparatusConfig, EffectiveSource, FringeFit, FringeKind, FringeScan, ScanTable, TwoPhotonState};

fn to_py(e: polconv::Error) -> PyErr {
    match e {
        polconv::Error::Io(_) => PyIOError::new_err(e.to_string()),
        polconv::Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_mode(label: &str, pathset: modes::PathSet) -> PyResult<modes::SingleMode> {
    let (pol, path) = label
        .split_once('.')
        .ok_or_else(|| PyValueError::new_err(format!("bad mode label {label:?}, expected e.g. \"H.Aout\"")))?;
    let pol = match pol {
        "H" => modes::Polarization::H,
        "V" => modes::Polarization::V,
        _ => return Err(PyValueError::new_err(format!("bad polarization in {label:?}"))),
    };
    let path = modes::PathMode::from_label(path)
        .filter(|p| p.path_set() == pathset)
        .ok_or_else(|| PyValueError::new_err(format!("mode {label:?} not in this state's path set")))?;
    Ok(modes::SingleMode { pol, path })
}

fn kind_from_str(kind: &str) -> PyResult<FringeKind> {
    match kind {
        "angle" => Ok(FringeKind::AngleScan),
        "dl" => Ok(FringeKind::DlScan),
        _ => Err(PyValueError::new_err(format!(
            "kind must be \"angle\" or \"dl\", got {kind:?}"
        ))),
    }
}

fn kind_str(kind: FringeKind) -> &'static str {
    match kind {
        FringeKind::AngleScan => "angle",
        FringeKind::DlScan => "dl",
    }
}

/// Two-photon polarization/path state.
#[pyclass(name = "State", module = "pypolconv", frozen)]
#[derive(Clone)]
struct PyState(TwoPhotonState);

#[pymethods]
impl PyState {
    /// Uniform superposition over both slits and both polarizations.
    #[staticmethod]
    fn eq1() -> Self {
        Self(modes::make_state_eq1())
    }

    /// Imbalanced two-slit state with mixing angle `epsilon` (radians).
    #[staticmethod]
    fn eq2(epsilon: f64) -> PyResult<Self> {
        modes::make_state_eq2(epsilon).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn bell(phase: f64) -> Self {
        Self(modes::make_bell(phase))
    }

    #[getter]
    fn pathset(&self) -> &'static str {
        match self.0.pathset() {
            modes::PathSet::Input => "input",
            modes::PathSet::Output => "output",
        }
    }

    /// Nonzero terms keyed as `"H.Aout|V.Bout"`.
    fn terms(&self) -> BTreeMap<String, Complex64> {
        self.0
            .terms()
            .into_iter()
            .map(|(m1, m2, c)| (io::pair_label(m1, m2), c))
            .collect()
    }

    fn term_coefficient(&self, m1: &str, m2: &str) -> PyResult<Complex64> {
        let ps = self.0.pathset();
        Ok(self.0.term_coefficient(parse_mode(m1, ps)?, parse_mode(m2, ps)?))
    }

    fn norm_sqr(&self) -> f64 {
        self.0.norm_sqr()
    }

    fn inner(&self, other: &PyState) -> PyResult<Complex64> {
        modes::inner_product(&self.0, &other.0).map_err(to_py)
    }

    #[pyo3(signature = (other, tol = 1e-9))]
    fn approx_eq_up_to_phase(&self, other: &PyState, tol: f64) -> bool {
        self.0.approx_eq_up_to_phase(&other.0, tol)
    }

    fn __repr__(&self) -> String {
        format!("State({})", self.0)
    }
}

/// Linear optical element acting on single-photon modes.
#[pyclass(name = "Element", module = "pypolconv", frozen)]
#[derive(Clone)]
struct PyElement(polconv::OpticalElement);

#[pymethods]
impl PyElement {
    #[staticmethod]
    fn roof_mirror() -> Self {
        Self(elements::roof_mirror_arm1())
    }

    #[staticmethod]
    fn mirror_tilt(phi: f64) -> Self {
        Self(elements::mirror_tilt(phi))
    }

    #[staticmethod]
    fn qwp_flip() -> Self {
        Self(elements::qwp_flip())
    }

    /// Polarization rotation by `theta` radians.
    #[staticmethod]
    fn hwp_rotation(theta: f64) -> Self {
        Self(elements::hwp_rotation(theta))
    }

    #[getter]
    fn label(&self) -> String {
        self.0.label().to_string()
    }

    /// `self` followed by `next`.
    fn then(&self, next: &PyElement) -> PyResult<Self> {
        self.0.then(&next.0).map(Self).map_err(to_py)
    }

    fn apply(&self, state: &PyState) -> PyResult<PyState> {
        elements::lift_apply(&self.0, &state.0).map(PyState).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Element({:?})", self.0.label())
    }
}

/// Apparatus parameters; path differences in um, phases in radians.
#[pyclass(name = "Config", module = "pypolconv")]
#[derive(Clone)]
struct PyConfig(ApparatusConfig);

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (
        delta_l = 0.0,
        tilt_phase = 0.0,
        imbalance = std::f64::consts::FRAC_PI_4,
        spatial_visibility = 1.0,
        pair_rate = 1000.0,
        center_wavelength = 800.0,
        fwhm = 3.0,
    ))]
    fn new(
        delta_l: f64,
        tilt_phase: f64,
        imbalance: f64,
        spatial_visibility: f64,
        pair_rate: f64,
        center_wavelength: f64,
        fwhm: f64,
    ) -> PyResult<Self> {
        let mut cfg = ApparatusConfig::ideal();
        cfg.delta_l = delta_l;
        cfg.tilt_phase = tilt_phase;
        cfg.imbalance = imbalance;
        cfg.spatial_visibility = spatial_visibility;
        cfg.pair_rate = pair_rate;
        cfg.filter.center_wavelength = center_wavelength;
        cfg.filter.fwhm = fwhm;
        cfg.validate().map_err(to_py)?;
        Ok(Self(cfg))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ApparatusConfig::from_json_str(text).map(Self).map_err(to_py)
    }

    #[getter]
    fn delta_l(&self) -> f64 {
        self.0.delta_l
    }
    #[getter]
    fn tilt_phase(&self) -> f64 {
        self.0.tilt_phase
    }
    #[getter]
    fn imbalance(&self) -> f64 {
        self.0.imbalance
    }
    #[getter]
    fn spatial_visibility(&self) -> f64 {
        self.0.spatial_visibility
    }
    #[getter]
    fn pair_rate(&self) -> f64 {
        self.0.pair_rate
    }

    /// Standard deviation of the path-difference envelope in um.
    fn envelope_sigma_um(&self) -> f64 {
        self.0.filter.envelope_sigma_um()
    }

    fn envelope_fwhm_um(&self) -> f64 {
        self.0.filter.envelope_fwhm_um()
    }

    fn __repr__(&self) -> String {
        let c = &self.0;
        format!(
            "Config(delta_l={}, tilt_phase={}, imbalance={}, spatial_visibility={}, pair_rate={})",
            c.delta_l, c.tilt_phase, c.imbalance, c.spatial_visibility, c.pair_rate
        )
    }
}

/// Post-selected output state plus its cross-term factor.
#[pyclass(name = "Source", module = "pypolconv", frozen)]
#[derive(Clone)]
struct PySource(EffectiveSource);

#[pymethods]
impl PySource {
    #[new]
    fn new(state: &PyState, cross_factor: f64) -> PyResult<Self> {
        EffectiveSource::new(state.0.clone(), cross_factor)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn state(&self) -> PyState {
        PyState(self.0.state.clone())
    }

    #[getter]
    fn cross_factor(&self) -> f64 {
        self.0.cross_factor
    }

    fn with_cross_factor(&self, cross_factor: f64) -> PyResult<Self> {
        self.0.with_cross_factor(cross_factor).map(Self).map_err(to_py)
    }

    fn coincidence_probability(&self, theta_a_deg: f64, theta_b_deg: f64) -> f64 {
        let setting = polconv::AnalyzerSetting::from_degrees(theta_a_deg, theta_b_deg);
        detection::coincidence_probability(&self.0, &setting)
    }

    /// Returns `{"singles_a", "singles_b", "coincidences", "duration", "seed"}`.
    fn simulate(
        &self,
        theta_a_deg: f64,
        theta_b_deg: f64,
        pair_rate: f64,
        duration: f64,
        seed: u64,
    ) -> PyResult<BTreeMap<&'static str, f64>> {
        let setting = polconv::AnalyzerSetting::from_degrees(theta_a_deg, theta_b_deg);
        let r = detection::simulate_counts(&self.0, &setting, pair_rate, duration, seed).map_err(to_py)?;
        Ok(BTreeMap::from([
            ("singles_a", r.singles_a as f64),
            ("singles_b", r.singles_b as f64),
            ("coincidences", r.coincidences as f64),
            ("duration", r.duration),
            ("seed", r.seed as f64),
        ]))
    }

    /// JSON dump in the same format as `polconv prepare`.
    fn dump(&self) -> PyResult<String> {
        io::to_pretty_json(&io::source_dump(&self.0)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Source({}, cross_factor={})", self.0.state, self.0.cross_factor)
    }
}

/// Simulated counts table from a scan.
#[pyclass(name = "Scan", module = "pypolconv", frozen)]
struct PyScan(ScanTable);

#[pymethods]
impl PyScan {
    #[getter]
    fn kind(&self) -> &'static str {
        kind_str(self.0.kind)
    }

    fn x(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.x).collect()
    }

    fn coincidences(&self) -> Vec<u64> {
        self.0.rows.iter().map(|r| r.record.coincidences).collect()
    }

    fn probability_model(&self) -> Vec<f64> {
        self.0.rows.iter().map(|r| r.probability_model).collect()
    }

    fn to_csv(&self) -> String {
        self.0.to_csv()
    }

    fn fit(&self) -> PyResult<PyFit> {
        analysis::fit_fringe(&self.0.to_fringe_scan()).map(PyFit).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.rows.len()
    }
}

#[pyclass(name = "Fit", module = "pypolconv", frozen)]
struct PyFit(FringeFit);

#[pymethods]
impl PyFit {
    #[getter]
    fn kind(&self) -> &'static str {
        kind_str(self.0.kind)
    }
    #[getter]
    fn offset(&self) -> f64 {
        self.0.offset
    }
    #[getter]
    fn amplitude(&self) -> f64 {
        self.0.amplitude
    }
    #[getter]
    fn phase(&self) -> f64 {
        self.0.phase
    }
    #[getter]
    fn visibility(&self) -> f64 {
        self.0.visibility
    }
    #[getter]
    fn residual_rms(&self) -> f64 {
        self.0.residual_rms
    }
    #[getter]
    fn width(&self) -> Option<f64> {
        self.0.width
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.0.iterations
    }

    fn evaluate(&self, x: f64) -> f64 {
        self.0.evaluate(x)
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(kind={:?}, visibility={:.4}, residual_rms={:.4})",
            kind_str(self.0.kind),
            self.0.visibility,
            self.0.residual_rms
        )
    }
}

#[pyclass(name = "ChshResult", module = "pypolconv", frozen)]
struct PyChsh(polconv::ChshResult);

#[pymethods]
impl PyChsh {
    #[getter(S)]
    fn s(&self) -> f64 {
        self.0.s_value
    }
    #[getter(S_sigma)]
    fn s_sigma(&self) -> f64 {
        self.0.s_error
    }
    #[getter(E)]
    fn e(&self) -> [f64; 4] {
        self.0.e_values
    }
    #[getter(E_sigma)]
    fn e_sigma(&self) -> [f64; 4] {
        self.0.e_sigma
    }
    #[getter]
    fn pattern(&self) -> String {
        self.0.pattern.clone()
    }

    fn to_json(&self) -> PyResult<String> {
        io::to_pretty_json(&self.0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("ChshResult(S={:.4}, S_sigma={:.4})", self.0.s_value, self.0.s_error)
    }
}

#[pyfunction]
fn build_source(config: &PyConfig) -> PyResult<PySource> {
    apparatus::build_source(&config.0).map(PySource).map_err(to_py)
}

/// Envelope factor for path difference `delta_l_um`.
#[pyfunction]
#[pyo3(signature = (delta_l_um, center_wavelength = 800.0, fwhm = 3.0))]
fn overlap_factor(delta_l_um: f64, center_wavelength: f64, fwhm: f64) -> PyResult<f64> {
    let filter = polconv::FilterSpec {
        center_wavelength,
        fwhm,
        ..Default::default()
    };
    filter.validate().map_err(to_py)?;
    Ok(apparatus::overlap_factor(delta_l_um, &filter))
}

#[pyfunction]
fn scan_angle(
    source: &PySource,
    theta_b_deg: f64,
    theta_a_deg: Vec<f64>,
    pair_rate: f64,
    duration: f64,
    seed: u64,
) -> PyResult<PyScan> {
    let radians: Vec<f64> = theta_a_deg.iter().map(|d| d.to_radians()).collect();
    detection::scan_angle(&source.0, theta_b_deg.to_radians(), &radians, pair_rate, duration, seed)
        .map(PyScan)
        .map_err(to_py)
}

#[pyfunction]
fn scan_delta_l(
    config: &PyConfig,
    delta_l_um: Vec<f64>,
    theta_a_deg: f64,
    theta_b_deg: f64,
    duration: f64,
    seed: u64,
) -> PyResult<PyScan> {
    detection::scan_delta_l_counts(
        &config.0,
        &delta_l_um,
        theta_a_deg.to_radians(),
        theta_b_deg.to_radians(),
        duration,
        seed,
    )
    .map(PyScan)
    .map_err(to_py)
}

/// Fits raw samples; `kind` is `"angle"` (x in degrees) or `"dl"` (x in um).
#[pyfunction]
#[pyo3(signature = (kind, x, counts, durations = None))]
fn fit_fringe(kind: &str, x: Vec<f64>, counts: Vec<f64>, durations: Option<Vec<f64>>) -> PyResult<PyFit> {
    let durations = durations.unwrap_or_else(|| vec![1.0; x.len()]);
    if counts.len() != x.len() || durations.len() != x.len() {
        return Err(PyValueError::new_err("x, counts and durations must have equal length"));
    }
    let scan = FringeScan {
        kind: kind_from_str(kind)?,
        samples: x
            .iter()
            .zip(&counts)
            .zip(&durations)
            .map(|((&x, &counts), &duration)| FringeSample { x, counts, duration })
            .collect(),
    };
    analysis::fit_fringe(&scan).map(PyFit).map_err(to_py)
}

/// CHSH from `(theta_a_deg, theta_b_deg, coincidences, duration_s)` rows.
#[pyfunction]
fn chsh(rows: Vec<(f64, f64, f64, f64)>) -> PyResult<PyChsh> {
    let table: Vec<ChshEntry> = rows
        .into_iter()
        .map(|(theta_a_deg, theta_b_deg, coincidences, duration_s)| ChshEntry {
            theta_a_deg,
            theta_b_deg,
            coincidences,
            duration_s,
        })
        .collect();
    analysis::chsh_s(&table).map(PyChsh).map_err(to_py)
}

/// Simulates the sixteen CHSH settings and evaluates S.
#[pyfunction]
fn simulate_chsh(source: &PySource, pair_rate: f64, duration: f64, seed: u64) -> PyResult<PyChsh> {
    let angles = analysis::chsh_settings_deg();
    let settings: Vec<_> = angles
        .iter()
        .map(|&(a, b)| polconv::AnalyzerSetting::from_degrees(a, b))
        .collect();
    let records = detection::simulate_settings(&source.0, &settings, pair_rate, duration, seed).map_err(to_py)?;
    let table: Vec<ChshEntry> = angles
        .iter()
        .zip(&records)
        .map(|(&(a, b), r)| ChshEntry {
            theta_a_deg: a,
            theta_b_deg: b,
            coincidences: r.coincidences as f64,
            duration_s: r.duration,
        })
        .collect();
    analysis::chsh_s(&table).map(PyChsh).map_err(to_py)
}

#[pymodule]
pub fn pypolconv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyElement>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PySource>()?;
    m.add_class::<PyScan>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyChsh>()?;
    m.add_function(wrap_pyfunction!(build_source, m)?)?;
    m.add_function(wrap_pyfunction!(overlap_factor, m)?)?;
    m.add_function(wrap_pyfunction!(scan_angle, m)?)?;
    m.add_function(wrap_pyfunction!(scan_delta_l, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fringe, m)?)?;
    m.add_function(wrap_pyfunction!(chsh, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_chsh, m)?)?;
    Ok(())
}
