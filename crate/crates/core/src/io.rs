//! Tensor interchange formats.
//!
//! Long CSV: header `context,action,f1,...,fp`, one row per measurement.
//! Replicate rows for the same pair are averaged coordinate-wise.
//!
//! JSON: `{"p": .., "entries": [{"context": .., "action": .., "values": [..]}]}`
//! with optional `contexts` / `actions` lists for identifiers that have no
//! observations.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_store::{ObservationTensor, PairKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    LongCsv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long-csv" | "csv" => Ok(Format::LongCsv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidParameter(format!("unknown format `{other}`"))),
        }
    }
}

impl Format {
    /// Guess from the file extension, defaulting to long CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::LongCsv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonEntry {
    pub context: String,
    pub action: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonTensor {
    pub p: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contexts: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<String>,
    pub entries: Vec<JsonEntry>,
}

impl From<&ObservationTensor> for JsonTensor {
    fn from(t: &ObservationTensor) -> Self {
        JsonTensor {
            p: t.p(),
            contexts: t.contexts().map(str::to_string).collect(),
            actions: t.actions().map(str::to_string).collect(),
            entries: t
                .entries()
                .map(|(k, v)| JsonEntry { context: k.context.clone(), action: k.action.clone(), values: v.to_vec() })
                .collect(),
        }
    }
}

impl TryFrom<JsonTensor> for ObservationTensor {
    type Error = Error;

    fn try_from(j: JsonTensor) -> Result<Self> {
        let mut t = ObservationTensor::with_ids(j.p, j.contexts, j.actions)?;
        for e in j.entries {
            t.insert(e.context, e.action, e.values)?;
        }
        Ok(t)
    }
}

pub fn read_json<R: Read>(reader: R) -> Result<ObservationTensor> {
    let j: JsonTensor = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    j.try_into()
}

pub fn to_json_string(tensor: &ObservationTensor) -> String {
    serde_json::to_string_pretty(&JsonTensor::from(tensor)).expect("tensor serializes")
}

/// Parses long CSV, averaging replicate rows.
pub fn read_long_csv<R: Read>(reader: R) -> Result<ObservationTensor> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    if headers.len() < 3 {
        return Err(Error::Parse {
            line: 1,
            message: "header must be `context,action,f1,...,fp` with at least one feature".into(),
        });
    }
    let p = headers.len() - 2;
    let mut sums: BTreeMap<PairKey, (Vec<f64>, usize)> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != p + 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", p + 2, record.len()),
            });
        }
        let values = record
            .iter()
            .skip(2)
            .enumerate()
            .map(|(k, s)| {
                s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line,
                    message: format!("feature {} is not a finite number: `{s}`", k + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let key = PairKey::new(record[0].trim(), record[1].trim());
        let slot = sums.entry(key).or_insert_with(|| (vec![0.0; p], 0));
        for (s, v) in slot.0.iter_mut().zip(values) {
            *s += v;
        }
        slot.1 += 1;
    }
    let mut t = ObservationTensor::new(p)?;
    for (key, (sum, n)) in sums {
        t.insert(key.context, key.action, sum.into_iter().map(|s| s / n as f64).collect())?;
    }
    Ok(t)
}

pub fn write_long_csv<W: Write>(tensor: &ObservationTensor, writer: W) -> Result<()> {
    write_long_csv_rows(tensor.p(), tensor.entries(), writer)
}

/// Writes `(pair, vector)` rows in long CSV.
pub fn write_long_csv_rows<'a, W: Write>(
    p: usize,
    rows: impl Iterator<Item = (&'a PairKey, &'a [f64])>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["context".to_string(), "action".to_string()];
    header.extend((1..=p).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for (key, values) in rows {
        let mut rec = vec![key.context.clone(), key.action.clone()];
        rec.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn ingest(path: &Path, format: Format) -> Result<ObservationTensor> {
    let file = File::open(path)?;
    match format {
        Format::LongCsv => read_long_csv(file),
        Format::Json => read_json(file),
    }
}

pub fn export(tensor: &ObservationTensor, path: &Path, format: Format) -> Result<()> {
    let mut file = File::create(path)?;
    match format {
        Format::LongCsv => write_long_csv(tensor, file),
        Format::Json => {
            file.write_all(to_json_string(tensor).as_bytes())?;
            Ok(())
        }
    }
}
