//! Feature table CSV.
//!
//! Header: `case_id,label,` followed by the 107 canonical feature names.
//! One row per case, sorted by `case_id`, reals printed with 10 significant
//! digits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::radiomics::{FeatureVector, FEATURE_NAMES};

/// One patient or phantom case. Label 1 is edema-positive, 0 negative.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub case_id: String,
    pub label: u8,
    pub features: Option<FeatureVector>,
}

impl CaseRecord {
    pub fn new(case_id: impl Into<String>, label: u8) -> Self {
        CaseRecord {
            case_id: case_id.into(),
            label,
            features: None,
        }
    }

    pub fn with_features(mut self, features: FeatureVector) -> Self {
        self.features = Some(features);
        self
    }
}

/// Formats a real with 10 significant digits, trimming trailing zeros.
pub fn format_real(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn header() -> Vec<&'static str> {
    let mut h = vec!["case_id", "label"];
    h.extend(FEATURE_NAMES.iter().copied());
    h
}

/// Writes the feature table to any writer.
pub fn write_features<W: Write>(records: &[CaseRecord], writer: W) -> Result<()> {
    for r in records {
        let fv = r
            .features
            .as_ref()
            .ok_or_else(|| Error::Schema(format!("case `{}` has no feature vector", r.case_id)))?;
        if fv.len() != FEATURE_NAMES.len() || fv.names().zip(FEATURE_NAMES.iter()).any(|(a, b)| a != *b) {
            return Err(Error::Schema(format!(
                "case `{}` does not carry the canonical {}-feature set",
                r.case_id,
                FEATURE_NAMES.len()
            )));
        }
        if let Some((name, _)) = fv.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{name} (case `{}`)", r.case_id)));
        }
    }
    let mut sorted: Vec<&CaseRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Schema(format!("csv write failed: {e}"));
    w.write_record(header()).map_err(csv_err)?;
    for r in sorted {
        let fv = r.features.as_ref().expect("checked above");
        let mut row = Vec::with_capacity(FEATURE_NAMES.len() + 2);
        row.push(r.case_id.clone());
        row.push(r.label.to_string());
        row.extend(fv.values().map(format_real));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("csv flush failed: {e}")))?;
    Ok(())
}

pub fn save_features(records: &[CaseRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_features(records, &mut buf)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a feature table, validating its header against the canonical
/// feature list.
pub fn read_features<R: Read>(reader: R) -> Result<Vec<CaseRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |location: String, e: csv::Error| Error::Parse {
        location,
        detail: e.to_string(),
    };
    let head = rdr.headers().map_err(|e| parse_err("header".into(), e))?.clone();
    let expected = header();
    if head.len() != expected.len() {
        return Err(Error::Schema(format!(
            "expected {} columns ({} features), found {}",
            expected.len(),
            FEATURE_NAMES.len(),
            head.len()
        )));
    }
    if let Some((i, (got, want))) = head
        .iter()
        .zip(expected.iter())
        .enumerate()
        .find(|(_, (g, w))| g != *w)
    {
        return Err(Error::Schema(format!(
            "column {i} is `{got}`, expected `{want}`"
        )));
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (row_idx, row) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let row = row.map_err(|e| parse_err(format!("line {line}"), e))?;
        let case_id = row[0].to_string();
        if !seen.insert(case_id.clone()) {
            return Err(Error::DuplicateCase(case_id));
        }
        let label = match row[1].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    location: format!("line {line}, column label"),
                    detail: format!("`{other}` is not 0 or 1"),
                })
            }
        };
        let mut values = Vec::with_capacity(FEATURE_NAMES.len());
        for (col, name) in FEATURE_NAMES.iter().enumerate() {
            let cell = &row[col + 2];
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                location: format!("line {line}, column {name}"),
                detail: format!("`{cell}` is not a number"),
            })?;
            values.push(v);
        }
        records.push(CaseRecord {
            case_id,
            label,
            features: Some(FeatureVector::from_canonical(values)?),
        });
    }
    Ok(records)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<CaseRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_features(f)
}
