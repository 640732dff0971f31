//! Dataset manifests, signal payload files, feature tables and landmark
//! files.
//!
//! A manifest is a JSON array of entries `{id, path, fs, label, aux, meta}`.
//! Paths are relative to the manifest's directory. Payloads hold one value
//! per line (`.csv`) or raw little-endian `f32` (`.f32`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::matrix::Matrix;
use crate::signal::{SignalRecord, Split};
use crate::synth::GroundTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    pub fs: f64,
    pub label: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadFormat {
    #[default]
    Csv,
    F32,
}

impl PayloadFormat {
    pub fn extension(self) -> &'static str {
        match self {
            PayloadFormat::Csv => "csv",
            PayloadFormat::F32 => "f32",
        }
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?).map_err(|_| Error::Data(format!("{} is not UTF-8 text", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// Reads a payload, choosing the format by extension.
pub fn read_signal(path: &Path) -> Result<Vec<f64>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let text = read_text(path)?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, l)| {
                    l.trim().parse::<f64>().map_err(|_| {
                        Error::Data(format!("{}:{}: not a number: {l:?}", path.display(), i + 1))
                    })
                })
                .collect()
        }
        Some("f32") => {
            let bytes = read_bytes(path)?;
            if bytes.len() % 4 != 0 {
                return Err(Error::Data(format!(
                    "{}: length {} is not a multiple of 4",
                    path.display(),
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                .collect())
        }
        _ => Err(Error::Data(format!(
            "{}: unknown signal format (expected .csv or .f32)",
            path.display()
        ))),
    }
}

pub fn write_signal(path: &Path, samples: &[f64]) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => {
            let mut s = String::with_capacity(samples.len() * 12);
            for v in samples {
                s.push_str(&v.to_string());
                s.push('\n');
            }
            write_text(path, &s)
        }
        Some("f32") => {
            let bytes: Vec<u8> = samples.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        _ => Err(Error::invalid(format!(
            "{}: unknown signal format (expected .csv or .f32)",
            path.display()
        ))),
    }
}

/// Loads every record of a manifest, dropping those marked excluded.
pub fn load_manifest(path: &Path, k: usize) -> Result<Vec<SignalRecord>> {
    let entries: Vec<ManifestEntry> = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut records = Vec::with_capacity(entries.len());
    for e in entries {
        let mut r = SignalRecord::new(e.id, read_signal(&base.join(&e.path))?, e.fs, e.label);
        r.meta = e.meta;
        if r.is_excluded() {
            continue;
        }
        for (name, p) in e.aux {
            r.aux.insert(name, read_signal(&base.join(p))?);
        }
        r.validate(k)?;
        records.push(r);
    }
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no usable records", path.display())));
    }
    Ok(records)
}

/// Writes payloads under `dir/signals/` and the manifest to
/// `dir/manifest.json`; returns the manifest path.
pub fn write_manifest(dir: &Path, records: &[SignalRecord], format: PayloadFormat) -> Result<PathBuf> {
    let ext = format.extension();
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let rel = PathBuf::from("signals").join(format!("{}.{ext}", r.id));
        write_signal(&dir.join(&rel), &r.samples)?;
        let mut aux = BTreeMap::new();
        for (name, ch) in &r.aux {
            let rel = PathBuf::from("signals").join(format!("{}.{name}.{ext}", r.id));
            write_signal(&dir.join(&rel), ch)?;
            aux.insert(name.clone(), rel);
        }
        entries.push(ManifestEntry {
            id: r.id.clone(),
            path: rel,
            fs: r.fs,
            label: r.label,
            aux,
            meta: r.meta.clone(),
        });
    }
    let path = dir.join("manifest.json");
    write_json(&path, &entries)?;
    Ok(path)
}

pub fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    write_json(path, &truth)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    read_json(path)
}

/// Feature table: `id`, the feature columns, then `label` and `split`.
pub fn write_features_csv(
    path: &Path,
    rows: &[FeatureVector],
    labels: &[usize],
    splits: &[Split],
) -> Result<()> {
    if rows.len() != labels.len() || rows.len() != splits.len() {
        return Err(Error::invalid("one label and split per feature row is required"));
    }
    let names = rows.first().map(|r| r.names.clone()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["label".to_string(), "split".to_string()]);
    w.write_record(&header).map_err(csv_err)?;
    for ((r, l), s) in rows.iter().zip(labels).zip(splits) {
        if r.names != names {
            return Err(Error::Data(format!("record {}: feature names differ from the first row", r.record_id)));
        }
        let mut rec = vec![r.record_id.clone()];
        rec.extend(r.values.iter().map(|v| v.to_string()));
        rec.extend([l.to_string(), s.as_str().to_string()]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

/// Parsed feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    pub values: Matrix,
}

impl FeatureTable {
    /// Rows reordered to follow `ids`; every id must be present.
    pub fn aligned(&self, ids: &[String]) -> Result<Matrix> {
        let pos: BTreeMap<&str, usize> = self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let idx = ids
            .iter()
            .map(|id| {
                pos.get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::Data(format!("no feature row for record {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.values.select_rows(&idx))
    }
}

/// Reads a table written by [`write_features_csv`]; `label` and `split`
/// columns are ignored.
pub fn read_features_csv(path: &Path) -> Result<FeatureTable> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.first().map(String::as_str) != Some("id") {
        return Err(Error::Data(format!("{}: first column must be id", path.display())));
    }
    let keep: Vec<usize> = (1..header.len())
        .filter(|&j| header[j] != "label" && header[j] != "split")
        .collect();
    let names: Vec<String> = keep.iter().map(|&j| header[j].clone()).collect();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        ids.push(rec.get(0).unwrap_or_default().to_string());
        for &j in &keep {
            let cell = rec.get(j).unwrap_or_default();
            data.push(cell.parse::<f64>().map_err(|_| {
                Error::Data(format!("{}: row {}: column {} is not a number", path.display(), line + 2, header[j]))
            })?);
        }
    }
    Ok(FeatureTable {
        values: Matrix::from_vec(ids.len(), names.len(), data)?,
        ids,
        names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_payload_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let v = vec![0.1, -2.5e-7, 3.0, 1.0 / 3.0];
        write_signal(&p, &v).unwrap();
        assert_eq!(read_signal(&p).unwrap(), v);
    }

    #[test]
    fn f32_payload_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.f32");
        write_signal(&p, &[1.5, -0.25]).unwrap();
        assert_eq!(fs::read(&p).unwrap().len(), 8);
        assert_eq!(read_signal(&p).unwrap(), vec![1.5, -0.25]);
    }

    #[test]
    fn unknown_extension_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_signal(&dir.path().join("x.wav")),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            read_signal(&dir.path().join("x.csv")),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn manifest_drops_excluded_and_keeps_aux() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = SignalRecord::new("a", vec![1.0, 2.0], 10.0, 0);
        a.aux.insert("eog".into(), vec![0.5, 0.25]);
        let mut b = SignalRecord::new("b", vec![3.0], 10.0, 1);
        b.meta.insert("exclude".into(), "true".into());
        let path = write_manifest(dir.path(), &[a.clone(), b], PayloadFormat::Csv).unwrap();
        let back = load_manifest(&path, 2).unwrap();
        assert_eq!(back, vec![a]);
    }

    #[test]
    fn features_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let rows = vec![
            FeatureVector::new("r1", "s", &["x", "y"], vec![1.0, 2.0]),
            FeatureVector::new("r2", "s", &["x", "y"], vec![0.5, -1.0]),
        ];
        write_features_csv(&p, &rows, &[0, 1], &[Split::Train, Split::Test]).unwrap();
        let t = read_features_csv(&p).unwrap();
        assert_eq!(t.names, vec!["x", "y"]);
        let m = t.aligned(&["r2".to_string(), "r1".to_string()]).unwrap();
        assert_eq!(m.data, vec![0.5, -1.0, 1.0, 2.0]);
        assert!(t.aligned(&["zz".to_string()]).is_err());
    }
}
