//! Analyzer projections and simulated coincidence counting.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::analysis::{FringeKind, FringeSample, FringeScan};
use crate::apparatus::{overlap_factor, ApparatusConfig, EffectiveSource};
use crate::modes::{Polarization, MODE_DIM};
use crate::{Error, Result};

/// Analyzer angles (radians from the H axis) in the two output paths.
/// Stored reduced to `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSetting {
    theta_a: f64,
    theta_b: f64,
}

fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    // rem_euclid can round up to exactly PI for tiny negative inputs
    if r >= PI {
        0.0
    } else {
        r
    }
}

impl AnalyzerSetting {
    pub fn new(theta_a: f64, theta_b: f64) -> Self {
        AnalyzerSetting {
            theta_a: reduce_angle(theta_a),
            theta_b: reduce_angle(theta_b),
        }
    }

    pub fn from_degrees(theta_a_deg: f64, theta_b_deg: f64) -> Self {
        Self::new(theta_a_deg.to_radians(), theta_b_deg.to_radians())
    }

    pub fn theta_a(&self) -> f64 {
        self.theta_a
    }

    pub fn theta_b(&self) -> f64 {
        self.theta_b
    }

    /// The setting with the A-side analyzer turned by 90 degrees.
    pub fn perp_a(&self) -> Self {
        Self::new(self.theta_a + FRAC_PI_2, self.theta_b)
    }

    pub fn perp_b(&self) -> Self {
        Self::new(self.theta_a, self.theta_b + FRAC_PI_2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: AnalyzerSetting,
    pub duration: f64,
    pub singles_a: u64,
    pub singles_b: u64,
    pub coincidences: u64,
    pub seed: u64,
}

fn analyzer_vector(theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c, s]
}

/// Probability that the photon in the A-side output passes `theta_a` and the
/// photon in the B-side output passes `theta_b`.
///
/// Each polarization configuration `(p1 on A, p2 on B)` contributes an
/// amplitude `c(p1,p2)`; interference between different configurations is
/// scaled by the source's cross factor:
/// `p = 2 [ sum |c|^2 + gamma (|sum c|^2 - sum |c|^2) ]`.
/// The factor 2 counts both photon orderings of the symmetric state.
pub fn coincidence_probability(src: &EffectiveSource, setting: &AnalyzerSetting) -> f64 {
    let a = analyzer_vector(setting.theta_a);
    let b = analyzer_vector(setting.theta_b);
    let amp = src.state.amplitudes();
    let mut coherent = num_complex::Complex64::new(0.0, 0.0);
    let mut incoherent = 0.0;
    for p1 in Polarization::ALL {
        for p2 in Polarization::ALL {
            let i = p1.index() * 2;
            let j = p2.index() * 2 + 1;
            debug_assert!(i < MODE_DIM && j < MODE_DIM);
            let c = amp[i][j] * (a[p1.index()] * b[p2.index()]);
            coherent += c;
            incoherent += c.norm_sqr();
        }
    }
    let gamma = src.cross_factor;
    let p = 2.0 * (incoherent + gamma * (coherent.norm_sqr() - incoherent));
    p.clamp(0.0, 1.0)
}

/// Probability that the A-side photon passes its analyzer, regardless of
/// the B-side outcome.
pub fn marginal_a(src: &EffectiveSource, theta_a: f64) -> f64 {
    let s = AnalyzerSetting::new(theta_a, 0.0);
    (coincidence_probability(src, &s) + coincidence_probability(src, &s.perp_b())).min(1.0)
}

pub fn marginal_b(src: &EffectiveSource, theta_b: f64) -> f64 {
    let s = AnalyzerSetting::new(0.0, theta_b);
    (coincidence_probability(src, &s) + coincidence_probability(src, &s.perp_a())).min(1.0)
}

/// Seed for sample `index` of a scan started from `base`: a splitmix64
/// finalizer applied to `base + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

/// One counting run.
///
/// Coincidences are `Poisson(N p)` with `N = pair_rate * duration`. Singles
/// are the coincidences plus an independent `Poisson(N (p_marginal - p))`
/// excess, so each singles count is still Poisson with the marginal mean and
/// never falls below the coincidences.
pub fn simulate_counts(
    src: &EffectiveSource,
    setting: &AnalyzerSetting,
    pair_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<CountRecord> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::out_of_range("duration", duration, "duration > 0"));
    }
    if !(pair_rate > 0.0) || !pair_rate.is_finite() {
        return Err(Error::out_of_range("pair_rate", pair_rate, "pair_rate > 0"));
    }
    let n = pair_rate * duration;
    let p = coincidence_probability(src, setting);
    let pa = marginal_a(src, setting.theta_a);
    let pb = marginal_b(src, setting.theta_b);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coincidences = poisson(&mut rng, n * p);
    let singles_a = coincidences + poisson(&mut rng, n * (pa - p).max(0.0));
    let singles_b = coincidences + poisson(&mut rng, n * (pb - p).max(0.0));
    Ok(CountRecord {
        setting: *setting,
        duration,
        singles_a,
        singles_b,
        coincidences,
        seed,
    })
}

/// Simulates each setting with a per-index derived seed.
pub fn simulate_settings(
    src: &EffectiveSource,
    settings: &[AnalyzerSetting],
    pair_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    settings
        .iter()
        .enumerate()
        .map(|(i, s)| simulate_counts(src, s, pair_rate, duration, derive_seed(seed, i as u64)))
        .collect()
}

/// One row of a simulated scan: the scanned coordinate in its CSV unit
/// (degrees for angle scans, um for path-difference scans).
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub x: f64,
    pub record: CountRecord,
    pub probability_model: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTable {
    pub kind: FringeKind,
    pub rows: Vec<ScanRow>,
}

impl ScanTable {
    pub fn header(kind: FringeKind) -> &'static str {
        match kind {
            FringeKind::AngleScan => "setting_deg,duration_s,singles_a,singles_b,coincidences,probability_model",
            FringeKind::DlScan => "delta_l_um,duration_s,singles_a,singles_b,coincidences,probability_model",
        }
    }

    /// Fixed-format CSV: coordinate with 4 decimals, probability with 10.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::header(self.kind));
        out.push('\n');
        for row in &self.rows {
            let r = &row.record;
            let _ = writeln!(
                out,
                "{:.4},{},{},{},{},{:.10}",
                row.x, r.duration, r.singles_a, r.singles_b, r.coincidences, row.probability_model
            );
        }
        out
    }

    pub fn to_fringe_scan(&self) -> FringeScan {
        FringeScan {
            kind: self.kind,
            samples: self
                .rows
                .iter()
                .map(|r| FringeSample {
                    x: r.x,
                    counts: r.record.coincidences as f64,
                    duration: r.record.duration,
                })
                .collect(),
        }
    }
}

/// Angle scan with the B-side analyzer fixed; angles in radians.
pub fn scan_angle(
    src: &EffectiveSource,
    theta_b_fixed: f64,
    theta_a_values: &[f64],
    pair_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<ScanTable> {
    if theta_a_values.is_empty() {
        return Err(Error::InvalidScan("no analyzer angles".into()));
    }
    let rows = theta_a_values
        .iter()
        .enumerate()
        .map(|(i, &theta_a)| {
            let setting = AnalyzerSetting::new(theta_a, theta_b_fixed);
            let record = simulate_counts(src, &setting, pair_rate, duration, derive_seed(seed, i as u64))?;
            Ok(ScanRow {
                x: theta_a.to_degrees(),
                probability_model: coincidence_probability(src, &setting),
                record,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable {
        kind: FringeKind::AngleScan,
        rows,
    })
}

/// Path-difference scan at fixed analyzers (radians); `dl_values` in um.
/// Uses `cfg.pair_rate`; `cfg.delta_l` is ignored.
pub fn scan_delta_l_counts(
    cfg: &ApparatusConfig,
    dl_values: &[f64],
    theta_a: f64,
    theta_b: f64,
    duration: f64,
    seed: u64,
) -> Result<ScanTable> {
    if dl_values.is_empty() {
        return Err(Error::InvalidScan("no path-difference values".into()));
    }
    let base = crate::apparatus::build_source(cfg)?;
    let setting = AnalyzerSetting::new(theta_a, theta_b);
    let rows = dl_values
        .iter()
        .enumerate()
        .map(|(i, &dl)| {
            let gamma = cfg.spatial_visibility * overlap_factor(dl, &cfg.filter);
            let src = base.with_cross_factor(gamma)?;
            let record = simulate_counts(&src, &setting, cfg.pair_rate, duration, derive_seed(seed, i as u64))?;
            Ok(ScanRow {
                x: dl,
                probability_model: coincidence_probability(&src, &setting),
                record,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanTable {
        kind: FringeKind::DlScan,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apparatus::build_source;
    use crate::modes::{make_bell, PathSet, SingleMode, TwoPhotonState};
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_4;

    use proptest::prelude::*;

    /// Projector oracle on the full 16-dimensional ordered pair space:
    /// `P = Pa (x) Pb + Pb (x) Pa` with `Pa` the rank-one projector onto the
    /// analyzer state in the A-side path.
    fn projection_oracle(state: &TwoPhotonState, theta_a: f64, theta_b: f64) -> f64 {
        let mut va = [0.0; 4];
        let mut vb = [0.0; 4];
        va[0] = theta_a.cos(); // H, A-side
        va[2] = theta_a.sin(); // V, A-side
        vb[1] = theta_b.cos(); // H, B-side
        vb[3] = theta_b.sin(); // V, B-side
        let amp = state.amplitudes();
        let mut total = 0.0;
        for (x, y) in [(&va, &vb), (&vb, &va)] {
            let mut ov = Complex64::new(0.0, 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    ov += amp[i][j] * (x[i] * y[j]);
                }
            }
            total += ov.norm_sqr();
        }
        total
    }

    fn closed_form(eps: f64, phi: f64, gamma: f64, ta: f64, tb: f64) -> f64 {
        let (se, ce) = eps.sin_cos();
        let (sa, ca) = ta.sin_cos();
        let (sb, cb) = tb.sin_cos();
        ce * ce * ca * ca * sb * sb
            + se * se * sa * sa * cb * cb
            + 2.0 * gamma * ce * se * ca * sa * cb * sb * phi.cos()
    }

    fn source(eps: f64, phi: f64, gamma: f64) -> EffectiveSource {
        let cfg = ApparatusConfig {
            imbalance: eps,
            tilt_phase: phi,
            spatial_visibility: gamma,
            ..ApparatusConfig::ideal()
        };
        build_source(&cfg).unwrap()
    }

    #[test]
    fn triplet_spot_values() {
        let t = EffectiveSource::new(make_bell(0.0), 1.0).unwrap();
        let q = FRAC_PI_4;
        assert!((coincidence_probability(&t, &AnalyzerSetting::new(q, q)) - 0.5).abs() < 1e-12);
        assert!(coincidence_probability(&t, &AnalyzerSetting::new(-q, q)).abs() < 1e-12);
        let s = AnalyzerSetting::from_degrees(30.0, 30.0);
        let p = coincidence_probability(&t, &s);
        assert!((p - 0.375).abs() < 1e-12);
        assert!((projection_oracle(&t.state, 30f64.to_radians(), 30f64.to_radians()) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_no_interference() {
        let st = TwoPhotonState::from_terms(
            PathSet::Output,
            &[(
                SingleMode::new(Polarization::H, crate::PathMode::Aout),
                SingleMode::new(Polarization::V, crate::PathMode::Bout),
                Complex64::new(1.0, 0.0),
            )],
        )
        .unwrap();
        let src = EffectiveSource::new(st, 0.3).unwrap();
        let p = coincidence_probability(&src, &AnalyzerSetting::new(0.0, FRAC_PI_2));
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn angle_reduction() {
        let s = AnalyzerSetting::from_degrees(-45.0, 225.0);
        assert!((s.theta_a() - 135f64.to_radians()).abs() < 1e-12);
        assert!((s.theta_b() - 45f64.to_radians()).abs() < 1e-12);
        assert!(AnalyzerSetting::new(-1e-18, 0.0).theta_a() < PI);
    }

    #[test]
    fn zero_probability_gives_zero_counts() {
        let t = EffectiveSource::new(make_bell(0.0), 1.0).unwrap();
        let s = AnalyzerSetting::from_degrees(-45.0, 45.0);
        for seed in 0..20 {
            let r = simulate_counts(&t, &s, 1e4, 10.0, seed).unwrap();
            assert_eq!(r.coincidences, 0);
        }
    }

    #[test]
    fn counts_within_five_sigma_and_deterministic() {
        let t = EffectiveSource::new(make_bell(0.0), 1.0).unwrap();
        let s = AnalyzerSetting::from_degrees(45.0, 45.0);
        for seed in 0..50 {
            let r = simulate_counts(&t, &s, 1000.0, 10.0, seed).unwrap();
            assert!((r.coincidences as f64 - 5000.0).abs() <= 354.0);
            assert!(r.coincidences <= r.singles_a.min(r.singles_b));
            assert_eq!(r, simulate_counts(&t, &s, 1000.0, 10.0, seed).unwrap());
        }
    }

    #[test]
    fn zero_duration_rejected() {
        let t = EffectiveSource::new(make_bell(0.0), 1.0).unwrap();
        assert!(simulate_counts(&t, &AnalyzerSetting::new(0.0, 0.0), 1.0, 0.0, 1).is_err());
        assert!(scan_angle(&t, FRAC_PI_4, &[0.0, 0.1], 1000.0, 0.0, 1).is_err());
        assert!(scan_angle(&t, FRAC_PI_4, &[], 1000.0, 1.0, 1).is_err());
    }

    #[test]
    fn angle_scan_law_and_asymmetry() {
        let t = source(FRAC_PI_4, 0.0, 1.0);
        let angles: Vec<f64> = (0..36).map(|k| (k as f64 * 5.0).to_radians()).collect();
        let scan = scan_angle(&t, FRAC_PI_4, &angles, 1000.0, 1.0, 9).unwrap();
        for (row, th) in scan.rows.iter().zip(&angles) {
            assert!((row.probability_model - (1.0 + (2.0 * th).sin()) / 4.0).abs() < 1e-12);
        }

        // Unequal slit intensities: the fringes for B fixed at +45 and -45
        // peak at +eps and -eps, so they are no longer 90 degrees apart.
        let fine: Vec<f64> = (0..180).map(|k| (k as f64 - 90.0).to_radians()).collect();
        let argmax = |t: &ScanTable| {
            t.rows
                .iter()
                .max_by(|a, b| a.probability_model.total_cmp(&b.probability_model))
                .unwrap()
                .x
        };
        let separation = |eps: f64| {
            let src = source(eps, 0.0, 1.0);
            let plus = scan_angle(&src, FRAC_PI_4, &fine, 1000.0, 1.0, 1).unwrap();
            let minus = scan_angle(&src, -FRAC_PI_4, &fine, 1000.0, 1.0, 1).unwrap();
            (argmax(&plus) - argmax(&minus)).abs()
        };
        assert!((separation(FRAC_PI_4) - 90.0).abs() < 1e-9);
        let skewed = separation(0.6);
        assert!((skewed - 2.0 * 0.6f64.to_degrees()).abs() <= 1.0, "{skewed}");
        assert!((skewed - 90.0).abs() > 10.0);
    }

    #[test]
    fn scan_seeds_follow_split_rule() {
        let t = source(FRAC_PI_4, 0.0, 1.0);
        let scan = scan_angle(&t, FRAC_PI_4, &[0.0, 0.5, 1.0], 1000.0, 1.0, 77).unwrap();
        for (i, row) in scan.rows.iter().enumerate() {
            assert_eq!(row.record.seed, derive_seed(77, i as u64));
        }
        assert_ne!(derive_seed(77, 0), derive_seed(77, 1));
        assert_ne!(derive_seed(0, 0), derive_seed(1, 0));
    }

    #[test]
    fn csv_format_is_fixed() {
        let t = source(FRAC_PI_4, 0.0, 1.0);
        let scan = scan_angle(&t, FRAC_PI_4, &[FRAC_PI_4, -FRAC_PI_4], 1000.0, 10.0, 3).unwrap();
        let csv = scan.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "setting_deg,duration_s,singles_a,singles_b,coincidences,probability_model"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "45.0000");
        assert_eq!(first[1], "10");
        assert_eq!(first[5], "0.5000000000");
        let second: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(second[0], "-45.0000");
        assert_eq!(second[4], "0");
        assert_eq!(second[5], "0.0000000000");
    }

    #[test]
    fn monte_carlo_frequency_bound() {
        // Each check has a 5.7e-7 chance of failing for a correct sampler.
        let t = source(0.5, 0.4, 0.8);
        let n = 1e5;
        for k in 0..40 {
            let s = AnalyzerSetting::new(k as f64 * 0.13, 0.7 - k as f64 * 0.05);
            let p = coincidence_probability(&t, &s);
            if n * p < 100.0 {
                continue;
            }
            let r = simulate_counts(&t, &s, n, 1.0, derive_seed(4242, k)).unwrap();
            let freq = r.coincidences as f64 / n;
            assert!(
                (freq - p).abs() <= 5.0 * (p * (1.0 - p) / n).sqrt(),
                "k={k} p={p} f={freq}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_form_matches_projection(
            eps in 0.0..=FRAC_PI_2,
            phi in -PI..PI,
            ta in -PI..PI,
            tb in -PI..PI,
        ) {
            let src = source(eps, phi, 1.0);
            let p = coincidence_probability(&src, &AnalyzerSetting::new(ta, tb));
            prop_assert!((p - closed_form(eps, phi, 1.0, ta, tb)).abs() < 1e-12);
            prop_assert!((p - projection_oracle(&src.state, ta, tb)).abs() < 1e-12);
        }

        #[test]
        fn closed_form_with_partial_coherence(
            eps in 0.0..=FRAC_PI_2,
            phi in -PI..PI,
            gamma in 0.0..=1.0f64,
            ta in -PI..PI,
            tb in -PI..PI,
        ) {
            let src = source(eps, phi, gamma);
            let p = coincidence_probability(&src, &AnalyzerSetting::new(ta, tb));
            prop_assert!((p - closed_form(eps, phi, gamma, ta, tb)).abs() < 1e-12);
        }

        #[test]
        fn outcomes_complete_and_pi_periodic(
            eps in 0.0..=FRAC_PI_2,
            phi in -PI..PI,
            gamma in 0.0..=1.0f64,
            ta in -PI..PI,
            tb in -PI..PI,
        ) {
            let src = source(eps, phi, gamma);
            let s = AnalyzerSetting::new(ta, tb);
            let total: f64 = [s, s.perp_a(), s.perp_b(), s.perp_a().perp_b()]
                .iter()
                .map(|x| coincidence_probability(&src, x))
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let p = coincidence_probability(&src, &s);
            let shifted = coincidence_probability(&src, &AnalyzerSetting::new(ta + PI, tb - PI));
            prop_assert!((p - shifted).abs() < 1e-12);
        }
    }
}
