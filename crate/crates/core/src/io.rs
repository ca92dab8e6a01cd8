//! File artifacts: state dumps (JSON), scan tables and Bell count tables (CSV).

use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::analysis::{ChshEntry, FringeKind, FringeSample, FringeScan};
use crate::apparatus::EffectiveSource;
use crate::modes::{PathMode, PathSet, Polarization, SingleMode, TwoPhotonState};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// `"H.Aout|V.Bout"`.
pub fn pair_label(m1: SingleMode, m2: SingleMode) -> String {
    format!("{m1}|{m2}")
}

fn parse_mode(text: &str) -> Option<SingleMode> {
    let (pol, path) = text.split_once('.')?;
    let pol = match pol {
        "H" => Polarization::H,
        "V" => Polarization::V,
        _ => return None,
    };
    Some(SingleMode::new(pol, PathMode::from_label(path)?))
}

/// Term coefficients (transposed term implicit) keyed by pair label, plus
/// `pathset`. Near-zero terms are omitted.
pub fn state_to_json(state: &TwoPhotonState) -> Map<String, Value> {
    let mut map = Map::new();
    for (m1, m2, c) in state.terms() {
        map.insert(pair_label(m1, m2), json!([c.re, c.im]));
    }
    map.insert("pathset".into(), serde_json::to_value(state.pathset()).expect("enum"));
    map
}

pub fn state_from_json(map: &Map<String, Value>) -> Result<TwoPhotonState> {
    let pathset: PathSet = map
        .get("pathset")
        .cloned()
        .ok_or_else(|| Error::InvalidConfig("state dump without pathset".into()))
        .and_then(|v| serde_json::from_value(v).map_err(Error::from))?;
    let mut terms = Vec::new();
    for (key, value) in map {
        if key == "pathset" || key == "format_version" || key == "cross_factor" {
            continue;
        }
        let (a, b) = key
            .split_once('|')
            .and_then(|(a, b)| Some((parse_mode(a)?, parse_mode(b)?)))
            .ok_or_else(|| Error::InvalidConfig(format!("bad mode-pair label `{key}`")))?;
        let [re, im]: [f64; 2] = serde_json::from_value(value.clone())?;
        // a stored term coefficient c covers both orderings: slot amplitude c/sqrt2
        let c = if a == b {
            Complex64::new(re, im)
        } else {
            Complex64::new(re, im) / std::f64::consts::SQRT_2
        };
        terms.push((a, b, c));
    }
    // from_terms adds both orderings; halve the diagonal to compensate
    let terms: Vec<_> = terms
        .into_iter()
        .map(|(a, b, c)| if a == b { (a, b, c * 0.5) } else { (a, b, c) })
        .collect();
    TwoPhotonState::from_terms(pathset, &terms)
}

/// Output of the `prepare` command.
pub fn source_dump(src: &EffectiveSource) -> Value {
    let mut map = state_to_json(&src.state);
    map.insert("cross_factor".into(), json!(src.cross_factor));
    map.insert("format_version".into(), json!(FORMAT_VERSION));
    Value::Object(map)
}

pub fn to_pretty_json(value: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Reads a scan CSV written by the scan commands. The first header column
/// (`setting_deg` or `delta_l_um`) decides the kind.
pub fn read_scan_csv(text: &str) -> Result<FringeScan> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let kind = match headers.get(0) {
        Some("setting_deg") => FringeKind::AngleScan,
        Some("delta_l_um") => FringeKind::DlScan,
        other => return Err(Error::InvalidScan(format!("unexpected first column {other:?}"))),
    };
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidScan(format!("missing column `{name}`")))
    };
    let (dur_col, coinc_col) = (col("duration_s")?, col("coincidences")?);
    let mut samples = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::InvalidScan(format!("bad number in column {i}")))
        };
        samples.push(FringeSample {
            x: num(0)?,
            counts: num(coinc_col)?,
            duration: num(dur_col)?,
        });
    }
    Ok(FringeScan { kind, samples })
}

pub const CHSH_CSV_HEADER: &str = "theta_a_deg,theta_b_deg,coincidences,duration_s";

pub fn chsh_table_to_csv(rows: &[ChshEntry]) -> String {
    let mut out = String::from(CHSH_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.4},{:.4},{},{}",
            r.theta_a_deg, r.theta_b_deg, r.coincidences, r.duration_s
        );
    }
    out
}

pub fn read_chsh_csv(text: &str) -> Result<Vec<ChshEntry>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let rows = reader
        .deserialize::<ChshEntry>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(rows)
}
