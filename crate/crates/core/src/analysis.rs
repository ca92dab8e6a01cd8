//! Fringe fitting and the CHSH estimator.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::apparatus::EffectiveSource;
use crate::detection::{coincidence_probability, AnalyzerSetting};
use crate::{Error, Result};

pub const MIN_ANGLE_SAMPLES: usize = 8;
pub const MIN_DL_SAMPLES: usize = 4;
pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOL: f64 = 1e-10;

/// Analyzer angles of the Bell test, degrees.
pub const CHSH_A_DEG: [f64; 4] = [0.0, 45.0, 90.0, 135.0];
pub const CHSH_B_DEG: [f64; 4] = [22.5, 67.5, 112.5, 157.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FringeKind {
    AngleScan,
    DlScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeSample {
    /// Analyzer angle in degrees, or path difference in um.
    pub x: f64,
    pub counts: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    pub kind: FringeKind,
    pub samples: Vec<FringeSample>,
}

impl FringeScan {
    pub fn validate(&self) -> Result<()> {
        let required = match self.kind {
            FringeKind::AngleScan => MIN_ANGLE_SAMPLES,
            FringeKind::DlScan => MIN_DL_SAMPLES,
        };
        if self.samples.len() < required {
            return Err(Error::Underdetermined {
                samples: self.samples.len(),
                required,
            });
        }
        for s in &self.samples {
            if !s.x.is_finite() || !s.counts.is_finite() || s.counts < 0.0 {
                return Err(Error::InvalidScan(format!("bad sample at x = {}", s.x)));
            }
            if !(s.duration > 0.0) {
                return Err(Error::InvalidScan(format!("non-positive duration at x = {}", s.x)));
            }
        }
        let mut xs: Vec<f64> = self.samples.iter().map(|s| s.x).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidScan("x values must be distinct".into()));
        }
        Ok(())
    }

    /// Counts rescaled to the mean duration, so mixed integration times fit
    /// on one curve.
    fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let mean_dur = self.samples.iter().map(|s| s.duration).sum::<f64>() / self.samples.len() as f64;
        self.samples
            .iter()
            .map(|s| (s.x, s.counts * mean_dur / s.duration))
            .unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub kind: FringeKind,
    pub offset: f64,
    /// Nonnegative for angle fits; signed for envelope fits (negative for a
    /// dip).
    pub amplitude: f64,
    /// Radians. Angle fits only; zero for envelope fits.
    pub phase: f64,
    pub visibility: f64,
    pub residual_rms: f64,
    /// Envelope standard deviation in um, envelope fits only.
    pub width: Option<f64>,
    pub iterations: usize,
}

impl FringeFit {
    pub fn evaluate(&self, x: f64) -> f64 {
        match self.kind {
            FringeKind::AngleScan => self.offset + self.amplitude * (2.0 * x.to_radians() - self.phase).cos(),
            FringeKind::DlScan => {
                let s = self.width.unwrap_or(1.0);
                self.offset + self.amplitude * (-(x * x) / (2.0 * s * s)).exp()
            }
        }
    }
}

pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    scan.validate()?;
    match scan.kind {
        FringeKind::AngleScan => fit_sinusoid(scan),
        FringeKind::DlScan => fit_envelope(scan),
    }
}

/// `C(theta) = offset + a cos 2theta + b sin 2theta`, solved linearly.
fn fit_sinusoid(scan: &FringeScan) -> Result<FringeFit> {
    let (xs, ys) = scan.normalized();
    let n = xs.len();
    let design = DMatrix::from_fn(n, 3, |i, j| {
        let t = 2.0 * xs[i].to_radians();
        match j {
            0 => 1.0,
            1 => t.cos(),
            _ => t.sin(),
        }
    });
    let y = DVector::from_vec(ys.clone());
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::InvalidScan(e.to_string()))?;
    let (offset, a, b) = (coef[0], coef[1], coef[2]);
    // Rank-deficient designs (all angles congruent mod 90) leave a, b free.
    let gram = design.transpose() * &design;
    if gram.determinant().abs() < 1e-9 * (n as f64).powi(3) {
        return Err(Error::Underdetermined {
            samples: n,
            required: MIN_ANGLE_SAMPLES,
        });
    }
    if !(offset > 0.0) {
        return Err(Error::InvalidScan(format!("fitted offset {offset} is not positive")));
    }
    let amplitude = a.hypot(b);
    let residual = &y - &design * &coef;
    Ok(FringeFit {
        kind: FringeKind::AngleScan,
        offset,
        amplitude,
        phase: b.atan2(a),
        visibility: amplitude / offset,
        residual_rms: (residual.norm_squared() / n as f64).sqrt(),
        width: None,
        iterations: 1,
    })
}

fn envelope_model(p: &Vector3<f64>, x: f64) -> (f64, Vector3<f64>) {
    let (base, amp, s) = (p[0], p[1], p[2]);
    let g = (-(x * x) / (2.0 * s * s)).exp();
    let value = base + amp * g;
    let grad = Vector3::new(1.0, g, amp * g * x * x / (s * s * s));
    (value, grad)
}

fn sse(p: &Vector3<f64>, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (y - envelope_model(p, x).0).powi(2))
        .sum()
}

/// `C(dl) = base + amp exp(-dl^2 / 2 s^2)` by Levenberg-Marquardt.
fn fit_envelope(scan: &FringeScan) -> Result<FringeFit> {
    let (xs, ys) = scan.normalized();
    let mut p = envelope_initial_guess(&xs, &ys);
    let mut cost = sse(&p, &xs, &ys);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&x, &y) in xs.iter().zip(&ys) {
            let (v, g) = envelope_model(&p, x);
            jtj += g * g.transpose();
            jtr += g * (y - v);
        }
        let mut damped = jtj;
        for k in 0..3 {
            damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
        }
        let Some(step) = damped.lu().solve(&jtr) else {
            lambda *= 10.0;
            continue;
        };
        let mut trial = p + step;
        trial[2] = trial[2].abs();
        let trial_cost = sse(&trial, &xs, &ys);
        if trial_cost.is_finite() && trial_cost <= cost {
            let rel = (0..3)
                .map(|k| step[k].abs() / p[k].abs().max(1e-12))
                .fold(0.0, f64::max);
            p = trial;
            cost = trial_cost;
            lambda = (lambda / 10.0).max(1e-12);
            if rel < CONVERGENCE_TOL {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            // No descent direction left at any damping: a minimum.
            if lambda > 1e12 {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }

    let (base, amp, width) = (p[0], p[1], p[2]);
    if !(base > 0.0) {
        return Err(Error::InvalidScan(format!("fitted baseline {base} is not positive")));
    }
    Ok(FringeFit {
        kind: FringeKind::DlScan,
        offset: base,
        amplitude: amp,
        phase: 0.0,
        visibility: amp.abs() / base,
        residual_rms: (cost / xs.len() as f64).sqrt(),
        width: Some(width),
        iterations,
    })
}

fn envelope_initial_guess(xs: &[f64], ys: &[f64]) -> Vector3<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].abs().total_cmp(&xs[j].abs()));
    let outer = (xs.len() / 4).max(1);
    let base = order[xs.len() - outer..].iter().map(|&i| ys[i]).sum::<f64>() / outer as f64;
    let amp = ys[order[0]] - base;
    let span = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let half = order
        .iter()
        .find(|&&i| (ys[i] - base).abs() < amp.abs() / 2.0)
        .map(|&i| xs[i].abs() / (2.0 * 2f64.ln()).sqrt())
        .filter(|&s| s > 0.0)
        .unwrap_or(span / 4.0);
    Vector3::new(base, amp, half.max(1e-9))
}

/// Visibility `(C_max - C_min)/(C_max + C_min)` from a constructive and a
/// destructive envelope fit, using their fitted values at zero delay.
pub fn pair_visibility(constructive: &FringeFit, destructive: &FringeFit) -> f64 {
    let c_max = constructive.evaluate(0.0);
    let c_min = destructive.evaluate(0.0);
    (c_max - c_min) / (c_max + c_min)
}

/// Polarization correlation from the four outcome counts at one setting
/// pair, with first-order Poisson error: `sigma^2 = (1 - E^2) / N`.
pub fn correlation_e(c_ab: f64, c_ab90: f64, c_a90b: f64, c_a90b90: f64) -> Result<(f64, f64)> {
    correlation_from_rates([c_ab, c_ab90, c_a90b, c_a90b90], [1.0; 4])
}

/// As [`correlation_e`], with each count integrated over its own duration.
/// `E` is formed from rates; the Poisson variance of a rate is `c / d^2`.
fn correlation_from_rates(counts: [f64; 4], durations: [f64; 4]) -> Result<(f64, f64)> {
    if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err(Error::InvalidCounts("counts must be finite and nonnegative".into()));
    }
    let rates: Vec<f64> = counts.iter().zip(&durations).map(|(c, d)| c / d).collect();
    let total: f64 = rates.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidCounts("zero total counts in a setting group".into()));
    }
    let signs = [1.0, -1.0, -1.0, 1.0];
    let e = rates.iter().zip(&signs).map(|(r, s)| r * s).sum::<f64>() / total;
    let var = (0..4)
        .map(|i| ((signs[i] - e) / total).powi(2) * counts[i] / (durations[i] * durations[i]))
        .sum::<f64>();
    Ok((e, var.sqrt()))
}

/// One row of a Bell-test count table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshEntry {
    pub theta_a_deg: f64,
    pub theta_b_deg: f64,
    pub coincidences: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub format_version: u32,
    /// `E(a,b), E(a,b'), E(a',b), E(a',b')`.
    #[serde(rename = "E")]
    pub e_values: [f64; 4],
    #[serde(rename = "E_sigma")]
    pub e_sigma: [f64; 4],
    #[serde(rename = "S")]
    pub s_value: f64,
    #[serde(rename = "S_sigma")]
    pub s_error: f64,
    /// Sign arrangement that attained `S`.
    pub pattern: String,
}

pub const PATTERNS: [&str; 4] = [
    "-E(a,b)+E(a,b')+E(a',b)+E(a',b')",
    "E(a,b)-E(a,b')+E(a',b)+E(a',b')",
    "E(a,b)+E(a,b')-E(a',b)+E(a',b')",
    "E(a,b)+E(a,b')+E(a',b)-E(a',b')",
];

fn same_angle(x: f64, y: f64) -> bool {
    let d = (x - y).rem_euclid(180.0);
    d < 1e-6 || 180.0 - d < 1e-6
}

/// The sixteen settings `a x b` of [`CHSH_A_DEG`] and [`CHSH_B_DEG`].
pub fn chsh_settings_deg() -> Vec<(f64, f64)> {
    CHSH_A_DEG
        .iter()
        .flat_map(|&a| CHSH_B_DEG.iter().map(move |&b| (a, b)))
        .collect()
}

/// Bell parameter from the sixteen-setting count table.
///
/// With `a = 0, a' = 45, b = 22.5, b' = 67.5` degrees, each `E` uses the
/// counts at the setting and its three 90-degree-rotated partners. `S` is the
/// largest `|.|` over the four patterns with one term negated.
pub fn chsh_s(table: &[ChshEntry]) -> Result<ChshResult> {
    let lookup = |a: f64, b: f64| -> Result<(f64, f64)> {
        let mut hits = table
            .iter()
            .filter(|e| same_angle(e.theta_a_deg, a) && same_angle(e.theta_b_deg, b));
        let first = hits
            .next()
            .ok_or_else(|| Error::InvalidCounts(format!("missing setting ({a}, {b})")))?;
        if hits.next().is_some() {
            return Err(Error::InvalidCounts(format!("duplicate setting ({a}, {b})")));
        }
        if !(first.duration_s > 0.0) {
            return Err(Error::InvalidCounts(format!("non-positive duration at ({a}, {b})")));
        }
        Ok((first.coincidences, first.duration_s))
    };
    if table.len() != 16 {
        return Err(Error::InvalidCounts(format!(
            "expected 16 settings, got {}",
            table.len()
        )));
    }

    let (a, a2) = (CHSH_A_DEG[0], CHSH_A_DEG[1]);
    let (b, b2) = (CHSH_B_DEG[0], CHSH_B_DEG[1]);
    let mut e_values = [0.0; 4];
    let mut e_sigma = [0.0; 4];
    for (k, &(x, y)) in [(a, b), (a, b2), (a2, b), (a2, b2)].iter().enumerate() {
        let group = [(x, y), (x, y + 90.0), (x + 90.0, y), (x + 90.0, y + 90.0)];
        let mut counts = [0.0; 4];
        let mut durations = [0.0; 4];
        for (i, &(p, q)) in group.iter().enumerate() {
            (counts[i], durations[i]) = lookup(p, q)?;
        }
        (e_values[k], e_sigma[k]) = correlation_from_rates(counts, durations)?;
    }

    let sum: f64 = e_values.iter().sum();
    let (best, s_value) = (0..4)
        .map(|k| (k, (sum - 2.0 * e_values[k]).abs()))
        .fold((0, f64::MIN), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
    let s_error = e_sigma.iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(ChshResult {
        format_version: 1,
        e_values,
        e_sigma,
        s_value,
        s_error,
        pattern: PATTERNS[best].to_string(),
    })
}

/// Noise-free count table: `pairs * p` at each of the sixteen settings.
pub fn expected_chsh_table(src: &EffectiveSource, pairs: f64, duration_s: f64) -> Vec<ChshEntry> {
    chsh_settings_deg()
        .into_iter()
        .map(|(a, b)| ChshEntry {
            theta_a_deg: a,
            theta_b_deg: b,
            coincidences: pairs * coincidence_probability(src, &AnalyzerSetting::from_degrees(a, b)),
            duration_s,
        })
        .collect()
}

/// `2 sqrt 2`, the largest quantum value of `S`.
pub const TSIRELSON: f64 = 2.0 * SQRT_2;
