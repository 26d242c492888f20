//! On-disk place database: a directory of RFRD files plus `manifest.csv`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MatchResult, PlaceEntry};
use crate::descriptor::{self, DescriptorError};
use crate::scalar::Scalar;

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Descriptor {
        path: PathBuf,
        #[source]
        source: DescriptorError,
    },
    #[error("{file}: manifest says scan {manifest_id} @ {manifest_ts}, file holds scan {file_id} @ {file_ts}")]
    Inconsistent {
        file: PathBuf,
        manifest_id: u64,
        manifest_ts: i64,
        file_id: u64,
        file_ts: i64,
    },
}

/// One `manifest.csv` row. Position columns are empty when unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub scan_id: u64,
    pub timestamp: i64,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub file: String,
}

impl ManifestRow {
    pub fn position(&self) -> Option<(f64, f64)> {
        self.x.zip(self.y)
    }
}

pub fn write_manifest(dir: &Path, rows: &[ManifestRow]) -> Result<(), StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let csv_err = |source| StoreError::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    if rows.is_empty() {
        w.write_record(["scan_id", "timestamp", "x", "y", "file"])
            .map_err(csv_err)?;
    }
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| StoreError::Io {
        path: path.clone(),
        source,
    })
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>, StoreError> {
    let path = dir.join(MANIFEST_FILE);
    let mut r = csv::Reader::from_path(&path).map_err(|source| StoreError::Csv {
        path: path.clone(),
        source,
    })?;
    r.deserialize()
        .collect::<Result<Vec<ManifestRow>, _>>()
        .map_err(|source| StoreError::Csv { path, source })
}

/// Loads every entry listed in a database directory's manifest.
pub fn load_entries<T: Scalar>(dir: &Path) -> Result<Vec<PlaceEntry<T>>, StoreError> {
    read_manifest(dir)?
        .into_iter()
        .map(|row| {
            let file = dir.join(&row.file);
            let desc = descriptor::load_descriptor::<T>(&file).map_err(|source| {
                StoreError::Descriptor {
                    path: file.clone(),
                    source,
                }
            })?;
            if desc.source_scan_id != row.scan_id || desc.timestamp != row.timestamp {
                return Err(StoreError::Inconsistent {
                    file,
                    manifest_id: row.scan_id,
                    manifest_ts: row.timestamp,
                    file_id: desc.source_scan_id,
                    file_ts: desc.timestamp,
                });
            }
            Ok(PlaceEntry {
                scan_id: row.scan_id,
                timestamp: row.timestamp,
                position: row.position(),
                descriptor: desc,
            })
        })
        .collect()
}

/// Writes `query_id,match_id,d_s,d_t,accepted`. Queries without a candidate
/// get empty match fields and `accepted = 0`.
pub fn write_match_results<T: Scalar, W: io::Write>(
    out: W,
    results: &[(u64, Option<MatchResult<T>>)],
) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["query_id", "match_id", "d_s", "d_t", "accepted"])?;
    for (query_id, m) in results {
        let record = match m {
            Some(m) => [
                query_id.to_string(),
                m.matched_scan_id.to_string(),
                m.d_s.to_string(),
                m.d_t.map(|d| d.to_string()).unwrap_or_default(),
                u8::from(m.accepted).to_string(),
            ],
            None => [
                query_id.to_string(),
                String::new(),
                String::new(),
                String::new(),
                "0".into(),
            ],
        };
        w.write_record(&record)?;
    }
    w.flush()
}

pub fn ensure_dir(dir: &Path) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        path: dir.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{save_descriptor, Descriptor};

    #[test]
    fn manifest_round_trip_with_missing_positions() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            ManifestRow {
                scan_id: 0,
                timestamp: 10,
                x: Some(1.5),
                y: Some(-2.0),
                file: "000000.rfrd".into(),
            },
            ManifestRow {
                scan_id: 1,
                timestamp: 20,
                x: None,
                y: None,
                file: "000001.rfrd".into(),
            },
        ];
        write_manifest(dir.path(), &rows).unwrap();
        assert_eq!(read_manifest(dir.path()).unwrap(), rows);
    }

    #[test]
    fn empty_manifest_has_header() {
        let dir = tempfile::tempdir().unwrap();
        write_manifest(dir.path(), &[]).unwrap();
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(text.trim(), "scan_id,timestamp,x,y,file");
        assert!(read_manifest(dir.path()).unwrap().is_empty());
    }

    #[test]
    fn load_entries_checks_consistency() {
        let dir = tempfile::tempdir().unwrap();
        let d = Descriptor::new(3, 30, vec![0.5f64, 0.25]).unwrap();
        save_descriptor(&d, &dir.path().join("a.rfrd")).unwrap();
        let mut row = ManifestRow {
            scan_id: 3,
            timestamp: 30,
            x: Some(1.0),
            y: Some(2.0),
            file: "a.rfrd".into(),
        };
        write_manifest(dir.path(), std::slice::from_ref(&row)).unwrap();
        let entries = load_entries::<f64>(dir.path()).unwrap();
        assert_eq!(entries[0].position, Some((1.0, 2.0)));
        assert_eq!(entries[0].descriptor, d);

        row.scan_id = 4;
        write_manifest(dir.path(), &[row]).unwrap();
        assert!(matches!(
            load_entries::<f64>(dir.path()),
            Err(StoreError::Inconsistent { .. })
        ));
    }

    #[test]
    fn match_results_csv() {
        let results = vec![
            (
                5u64,
                Some(MatchResult {
                    query_scan_id: 5,
                    matched_scan_id: 1,
                    d_s: 0.25f64,
                    d_t: None,
                    accepted: true,
                }),
            ),
            (6, None),
        ];
        let mut buf = Vec::new();
        write_match_results(&mut buf, &results).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "query_id,match_id,d_s,d_t,accepted\n5,1,0.25,,1\n6,,,,0\n"
        );
    }
}
