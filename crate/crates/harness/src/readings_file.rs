//! Text readings files.
//!
//! One record per line:
//!
//! ```text
//! device_id,board_type,nominal_temp_c,sensor_temp_c,run_index,fingerprint_hex
//! ```
//!
//! Lines starting with `#` and blank lines are ignored. Fields are plain
//! comma-separated values without quoting. The fingerprint is the packed
//! byte string in hex, cell `i` at bit `i % 8` of byte `i / 8`; every record
//! in a file must have the same length.
//!
//! Enrolled references use the same layout with `.ref` appended to the board
//! type. For those records `nominal_temp_c` is the enrollment temperature
//! and `run_index` the number of readings that were aggregated.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use puf_core::{BoardType, Fingerprint, Reading, ReferenceFingerprint};

use crate::error::{HarnessError, Result};

pub const REFERENCE_SUFFIX: &str = ".ref";

/// A parsed line: a raw reading or an enrolled reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub reading: Reading,
    pub is_reference: bool,
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<Record>> {
    let mut records = Vec::new();
    let mut width: Option<usize> = None;
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| HarnessError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let [device_id, board, nominal, sensor, run, hex_fp] = fields[..] else {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        };
        if device_id.is_empty() {
            return Err(err("empty device id".into()));
        }
        let (board, is_reference) = match board.strip_suffix(REFERENCE_SUFFIX) {
            Some(b) => (b, true),
            None => (board, false),
        };
        let board_type: BoardType = board.parse().map_err(|e| err(format!("{e}")))?;
        let nominal_temp_c: i32 = nominal
            .parse()
            .map_err(|e| err(format!("nominal temperature {nominal:?}: {e}")))?;
        let sensor_temp_c: f64 = sensor
            .parse()
            .map_err(|e| err(format!("sensor temperature {sensor:?}: {e}")))?;
        if !sensor_temp_c.is_finite() {
            return Err(err(format!("sensor temperature {sensor:?} is not finite")));
        }
        let run_index: u32 = run.parse().map_err(|e| err(format!("run index {run:?}: {e}")))?;
        let bytes = hex::decode(hex_fp).map_err(|e| err(format!("fingerprint hex: {e}")))?;
        if bytes.is_empty() {
            return Err(err("empty fingerprint".into()));
        }
        match width {
            None => width = Some(bytes.len()),
            Some(w) if w != bytes.len() => {
                return Err(err(format!(
                    "fingerprint has {} bytes, earlier records have {w}",
                    bytes.len()
                )))
            }
            Some(_) => {}
        }
        if !seen.insert((is_reference, device_id.to_string(), nominal_temp_c, run_index)) {
            return Err(err(format!(
                "duplicate run {run_index} for device {device_id} at {nominal_temp_c} °C"
            )));
        }
        records.push(Record {
            reading: Reading {
                fingerprint: Fingerprint::from_byte_vec(bytes)?,
                device_id: device_id.to_string(),
                board_type,
                nominal_temp_c,
                sensor_temp_c,
                run_index,
            },
            is_reference,
        });
    }
    Ok(records)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

fn sort_readings(readings: &mut [Reading]) {
    readings.sort_by(|a, b| {
        (&a.device_id, a.nominal_temp_c, a.run_index).cmp(&(&b.device_id, b.nominal_temp_c, b.run_index))
    });
}

/// Raw readings of a file, ordered by `(device_id, nominal_temp_c,
/// run_index)`. Reference records are skipped.
pub fn ingest_readings(path: impl AsRef<Path>) -> Result<Vec<Reading>> {
    let path = path.as_ref();
    let mut readings: Vec<Reading> = parse_records(&read_text(path)?, path)?
        .into_iter()
        .filter(|r| !r.is_reference)
        .map(|r| r.reading)
        .collect();
    sort_readings(&mut readings);
    Ok(readings)
}

/// Enrolled references of a file, ordered by device id.
pub fn ingest_references(path: impl AsRef<Path>) -> Result<Vec<ReferenceFingerprint>> {
    let path = path.as_ref();
    let mut refs = Vec::new();
    for rec in parse_records(&read_text(path)?, path)? {
        if !rec.is_reference {
            continue;
        }
        let r = rec.reading;
        refs.push(ReferenceFingerprint {
            tie_mask: Fingerprint::zeros(r.fingerprint.len())?,
            fingerprint: r.fingerprint,
            device_id: r.device_id,
            board_type: r.board_type,
            source_temp_c: r.nominal_temp_c,
            source_count: r.run_index,
        });
    }
    refs.sort_by(|a, b| a.device_id.cmp(&b.device_id));
    Ok(refs)
}

fn format_line(out: &mut String, device: &str, board: &str, nominal: i32, sensor: f64, run: u32, fp: &Fingerprint) {
    // `{}` on f64 prints the shortest string that parses back to the same value.
    writeln!(out, "{device},{board},{nominal},{sensor},{run},{}", hex::encode(fp.as_bytes()))
        .expect("writing to a String");
}

pub fn format_readings(readings: &[Reading]) -> String {
    let mut out = String::from(
        "# device_id,board_type,nominal_temp_c,sensor_temp_c,run_index,fingerprint_hex\n",
    );
    for r in readings {
        format_line(
            &mut out,
            &r.device_id,
            r.board_type.as_str(),
            r.nominal_temp_c,
            r.sensor_temp_c,
            r.run_index,
            &r.fingerprint,
        );
    }
    out
}

pub fn format_references(references: &[ReferenceFingerprint]) -> String {
    let mut out = String::from(
        "# enrolled references: board_type carries the .ref suffix, run_index is the number of aggregated readings\n",
    );
    for r in references {
        let board = format!("{}{REFERENCE_SUFFIX}", r.board_type);
        format_line(
            &mut out,
            &r.device_id,
            &board,
            r.source_temp_c,
            f64::from(r.source_temp_c),
            r.source_count,
            &r.fingerprint,
        );
    }
    out
}

/// Writes `contents` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| HarnessError::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(".tmp");
    let tmp: PathBuf = path.with_file_name(tmp_name);
    let mut f = fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    f.write_all(contents)
        .and_then(|()| f.sync_all())
        .map_err(|e| HarnessError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_readings(path: impl AsRef<Path>, readings: &[Reading]) -> Result<()> {
    write_atomic(path, format_readings(readings).as_bytes())
}

pub fn write_references(path: impl AsRef<Path>, references: &[ReferenceFingerprint]) -> Result<()> {
    write_atomic(path, format_references(references).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Vec<Record>> {
        parse_records(text, Path::new("test.csv"))
    }

    #[test]
    fn single_record() {
        let recs = parse("# header\n\ndev1,F401RE,25,24.6,0,a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5\n").unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0].reading;
        assert_eq!(r.fingerprint.len(), 128);
        assert_eq!(r.board_type, BoardType::F401RE);
        assert_eq!(r.sensor_temp_c, 24.6);
        // 0xa5 = 1010_0101, cell 0 is the least significant bit
        assert!(r.fingerprint.bit(0) && !r.fingerprint.bit(1) && r.fingerprint.bit(2));
        assert!(!recs[0].is_reference);
    }

    #[test]
    fn length_mismatch_names_line() {
        let text = "a,F401RE,25,25,0,00112233445566778899aabbccddeeff\n\
                    a,F401RE,25,25,1,00112233445566778899aabbccddee\n";
        match parse(text) {
            Err(HarnessError::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("15 bytes"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_lines() {
        for bad in [
            "a,F401RE,25,25,0",
            "a,F401RE,x,25,0,00",
            "a,F401RE,25,hot,0,00",
            "a,F401RE,25,NaN,0,00",
            "a,F401RE,25,25,-1,00",
            "a,F401RE,25,25,0,0g",
            "a,F401RE,25,25,0,",
            ",F401RE,25,25,0,00",
            "a,,25,25,0,00",
        ] {
            let text = format!("# c\n{bad}\n");
            match parse(&text) {
                Err(HarnessError::Parse { line: 2, .. }) => {}
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_run_rejected() {
        let text = "a,SIM,25,25,0,00\na,SIM,25,26,0,01\n";
        assert!(matches!(parse(text), Err(HarnessError::Parse { line: 2, .. })));
        // same run index at another temperature is fine
        assert!(parse("a,SIM,25,25,0,00\na,SIM,10,10,0,01\n").is_ok());
    }

    #[test]
    fn reference_suffix() {
        let recs = parse("a,F446RE.ref,25,25,50,ff\n").unwrap();
        assert!(recs[0].is_reference);
        assert_eq!(recs[0].reading.board_type, BoardType::F446RE);
    }

    #[test]
    fn references_round_trip_through_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("refs.csv");
        let r = ReferenceFingerprint {
            fingerprint: Fingerprint::from_byte_vec(vec![0x12, 0x34]).unwrap(),
            device_id: "d7".into(),
            board_type: BoardType::F401RE,
            source_temp_c: 25,
            source_count: 50,
            tie_mask: Fingerprint::zeros(16).unwrap(),
        };
        write_references(&path, std::slice::from_ref(&r)).unwrap();
        assert_eq!(ingest_references(&path).unwrap(), vec![r]);
        assert!(ingest_readings(&path).unwrap().is_empty());
    }
}
