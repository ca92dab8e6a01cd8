//! Source plus interferometer as one parameterized model.
//!
//! The path-length difference never changes the relative phase of the two
//! output terms; it only reduces their temporal overlap, which enters the
//! detection model as a multiplicative factor on interference cross-terms.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::{coincidence_probability, AnalyzerSetting};
use crate::elements::{lift_apply, mirror_tilt, roof_mirror_arm1};
use crate::modes::{make_state_eq2, TwoPhotonState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterShape {
    #[default]
    Gaussian,
}

/// Bandpass filter in front of each detector. Wavelengths in nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    pub center_wavelength: f64,
    pub fwhm: f64,
    pub shape: FilterShape,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            center_wavelength: 800.0,
            fwhm: 3.0,
            shape: FilterShape::Gaussian,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_wavelength > 0.0) || !self.center_wavelength.is_finite() {
            return Err(Error::out_of_range(
                "filter.center_wavelength",
                self.center_wavelength,
                "center > 0",
            ));
        }
        if !(self.fwhm > 0.0 && self.fwhm < self.center_wavelength) {
            return Err(Error::out_of_range("filter.fwhm", self.fwhm, "0 < fwhm < center"));
        }
        Ok(())
    }

    /// Standard deviation of the overlap envelope in path difference, in um.
    ///
    /// A gaussian spectrum of FWHM `dl` around `l0` has a gaussian field
    /// autocorrelation with `sigma_L = l0^2 / (2 pi sigma_lambda)`, so the
    /// envelope FWHM is `(4 ln 2 / pi) l0^2 / dl`.
    pub fn envelope_sigma_um(&self) -> f64 {
        match self.shape {
            FilterShape::Gaussian => {
                let sigma_lambda = self.fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt());
                let sigma_nm = self.center_wavelength.powi(2) / (2.0 * PI * sigma_lambda);
                sigma_nm * 1e-3
            }
        }
    }

    /// Envelope FWHM in path difference, um.
    pub fn envelope_fwhm_um(&self) -> f64 {
        self.envelope_sigma_um() * 2.0 * (2.0 * 2f64.ln()).sqrt()
    }
}

/// Every physical knob of the experiment.
///
/// Units: `delta_l` in um, `tilt_phase` and `imbalance` in radians,
/// `pair_rate` in pairs per second reaching the analyzers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApparatusConfig {
    pub delta_l: f64,
    pub tilt_phase: f64,
    pub imbalance: f64,
    pub spatial_visibility: f64,
    pub filter: FilterSpec,
    pub pair_rate: f64,
}

impl Default for ApparatusConfig {
    fn default() -> Self {
        ApparatusConfig {
            delta_l: 0.0,
            tilt_phase: 0.0,
            imbalance: FRAC_PI_4,
            spatial_visibility: 1.0,
            filter: FilterSpec::default(),
            pair_rate: 1000.0,
        }
    }
}

impl ApparatusConfig {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta_l.is_finite() {
            return Err(Error::out_of_range("delta_l", self.delta_l, "finite"));
        }
        if !self.tilt_phase.is_finite() {
            return Err(Error::out_of_range("tilt_phase", self.tilt_phase, "finite"));
        }
        if !(0.0..=FRAC_PI_2).contains(&self.imbalance) {
            return Err(Error::out_of_range(
                "imbalance",
                self.imbalance,
                "0 <= imbalance <= pi/2",
            ));
        }
        if !(0.0..=1.0).contains(&self.spatial_visibility) {
            return Err(Error::out_of_range(
                "spatial_visibility",
                self.spatial_visibility,
                "0 <= v_s <= 1",
            ));
        }
        if !(self.pair_rate > 0.0) || !self.pair_rate.is_finite() {
            return Err(Error::out_of_range("pair_rate", self.pair_rate, "pair_rate > 0"));
        }
        self.filter.validate()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ApparatusConfig = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn with_delta_l(mut self, delta_l: f64) -> Self {
        self.delta_l = delta_l;
        self
    }
}

/// Output pair state together with the factor that scales its interference
/// cross-terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveSource {
    pub state: TwoPhotonState,
    pub cross_factor: f64,
}

impl EffectiveSource {
    pub fn new(state: TwoPhotonState, cross_factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cross_factor) {
            return Err(Error::out_of_range(
                "cross_factor",
                cross_factor,
                "0 <= cross_factor <= 1",
            ));
        }
        Ok(EffectiveSource { state, cross_factor })
    }

    pub fn with_cross_factor(&self, cross_factor: f64) -> Result<Self> {
        Self::new(self.state.clone(), cross_factor)
    }
}

/// Temporal overlap `gamma(dl)` of the two output terms for a path-length
/// difference `delta_l_um`.
pub fn overlap_factor(delta_l_um: f64, filter: &FilterSpec) -> f64 {
    let sigma = filter.envelope_sigma_um();
    (-(delta_l_um * delta_l_um) / (2.0 * sigma * sigma)).exp()
}

/// Slit state -> mirror tilt -> net interferometer map, with the cross factor
/// `v_s * gamma(dl)`.
pub fn build_source(cfg: &ApparatusConfig) -> Result<EffectiveSource> {
    cfg.validate()?;
    let input = make_state_eq2(cfg.imbalance)?;
    let net = mirror_tilt(cfg.tilt_phase).then(&roof_mirror_arm1())?;
    let state = lift_apply(&net, &input)?;
    let cross = cfg.spatial_visibility * overlap_factor(cfg.delta_l, &cfg.filter);
    EffectiveSource::new(state, cross.clamp(0.0, 1.0))
}

/// Model coincidence probability along a path-difference scan at fixed
/// analyzer angles (radians). The `delta_l` in `cfg` is ignored.
pub fn scan_delta_l(cfg: &ApparatusConfig, dl_values: &[f64], theta_a: f64, theta_b: f64) -> Result<Vec<(f64, f64)>> {
    if dl_values.is_empty() {
        return Err(Error::InvalidScan("no path-difference values".into()));
    }
    let base = build_source(cfg)?;
    let setting = AnalyzerSetting::new(theta_a, theta_b);
    dl_values
        .iter()
        .map(|&dl| {
            if !dl.is_finite() {
                return Err(Error::out_of_range("delta_l", dl, "finite"));
            }
            let gamma = cfg.spatial_visibility * overlap_factor(dl, &cfg.filter);
            let src = base.with_cross_factor(gamma)?;
            Ok((dl, coincidence_probability(&src, &setting)))
        })
        .collect()
}
