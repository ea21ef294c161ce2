//! PAMAP2 protocol file parsing.
//!
//! Each line holds 54 whitespace-separated columns: timestamp, activity id,
//! heart rate, then three 17-column IMU blocks (hand, chest, ankle). An IMU
//! block is temperature, 16g accelerometer xyz, 6g accelerometer xyz,
//! gyroscope xyz, magnetometer xyz and four orientation columns that the
//! dataset marks invalid. Missing readings are the literal `NaN`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::{ClassLabel, ClassSet, RawSlot, Sensor, SensorAddress, Stream, StreamDescriptor};
use crate::{Error, Result};

pub const COLUMNS: usize = 54;
pub const IMU_RATE_HZ: f64 = 100.0;
pub const HEART_RATE_HZ: f64 = 9.0;

const IMU_BLOCK: usize = 17;
const IMU_OFFSETS: [usize; 3] = [3, 20, 37];
/// Offsets inside an IMU block of the 13 channels kept (orientation dropped).
const BLOCK_CHANNELS: usize = 13;

/// Which activities to keep and how long a subject must perform each one.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityFilter {
    pub nordic_walking_id: u32,
    pub stairs_id: u32,
    pub min_nordic_s: f64,
    pub min_stairs_s: f64,
}

impl Default for ActivityFilter {
    fn default() -> Self {
        Self {
            nordic_walking_id: 7,
            stairs_id: 12,
            min_nordic_s: 250.0,
            min_stairs_s: 150.0,
        }
    }
}

impl ActivityFilter {
    /// Keeps every Nordic walking and stairs row regardless of duration.
    pub fn permissive() -> Self {
        Self {
            min_nordic_s: 0.0,
            min_stairs_s: 0.0,
            ..Self::default()
        }
    }

    fn label(&self, activity: u32) -> Option<ClassLabel> {
        if activity == self.nordic_walking_id {
            Some(ClassLabel(0))
        } else if activity == self.stairs_id {
            Some(ClassLabel(1))
        } else {
            None
        }
    }

    fn activity_id(&self, label: ClassLabel) -> u32 {
        if label.0 == 0 {
            self.nordic_walking_id
        } else {
            self.stairs_id
        }
    }
}

pub fn descriptor() -> StreamDescriptor {
    let mut rates = BTreeMap::new();
    for s in [
        Sensor::Accelerometer16g,
        Sensor::Accelerometer6g,
        Sensor::Gyroscope,
        Sensor::Magnetometer,
        Sensor::Temperature,
    ] {
        rates.insert(s, IMU_RATE_HZ);
    }
    rates.insert(Sensor::HeartRate, HEART_RATE_HZ);
    StreamDescriptor::new(SensorAddress::pamap2_set(), rates, ClassSet::pamap2())
}

struct Row {
    timestamp: f64,
    label: ClassLabel,
    values: Vec<Option<f64>>,
}

fn parse_field(field: &str, line: usize, column: usize) -> Result<Option<f64>> {
    if field.eq_ignore_ascii_case("nan") {
        return Ok(None);
    }
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("column {column}: `{field}` is not a number"),
    })?;
    Ok(if v.is_nan() { None } else { Some(v) })
}

/// Parses one subject's protocol file.
///
/// Rows for other activities are dropped; an activity is kept only if the
/// subject performed it for at least the filter's minimum duration. Slot
/// indices are renumbered from zero over the kept rows.
pub fn parse_pamap2<R: BufRead>(reader: R, filter: &ActivityFilter) -> Result<Stream> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != COLUMNS {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {COLUMNS} columns, found {}", fields.len()),
            });
        }
        let timestamp = parse_field(fields[0], line_no, 0)?.ok_or_else(|| Error::Parse {
            line: line_no,
            message: "missing timestamp".into(),
        })?;
        let activity = fields[1].parse::<u32>().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("column 1: `{}` is not an activity id", fields[1]),
        })?;
        let Some(label) = filter.label(activity) else {
            continue;
        };
        let mut values = Vec::with_capacity(40);
        values.push(parse_field(fields[2], line_no, 2)?);
        for &offset in &IMU_OFFSETS {
            for c in 0..BLOCK_CHANNELS {
                values.push(parse_field(fields[offset + c], line_no, offset + c)?);
            }
        }
        rows.push(Row {
            timestamp,
            label,
            values,
        });
    }

    let nordic_s = rows.iter().filter(|r| r.label.0 == 0).count() as f64 / IMU_RATE_HZ;
    let stairs_s = rows.iter().filter(|r| r.label.0 == 1).count() as f64 / IMU_RATE_HZ;
    let keep_nordic = nordic_s > 0.0 && nordic_s >= filter.min_nordic_s;
    let keep_stairs = stairs_s > 0.0 && stairs_s >= filter.min_stairs_s;
    if !keep_nordic && !keep_stairs {
        return Err(Error::EmptyStream(format!(
            "no qualifying activity (nordic walking {nordic_s:.1} s, stairs {stairs_s:.1} s)"
        )));
    }

    let slots: Vec<RawSlot> = rows
        .into_iter()
        .filter(|r| {
            if r.label.0 == 0 {
                keep_nordic
            } else {
                keep_stairs
            }
        })
        .filter(|r| r.values.iter().any(Option::is_some))
        .enumerate()
        .map(|(n, r)| RawSlot {
            n: n as u64,
            timestamp: r.timestamp,
            values: r.values,
            ground_truth: Some(r.label),
        })
        .collect();
    if slots.is_empty() {
        return Err(Error::EmptyStream("every qualifying row was empty".into()));
    }
    Ok(Stream::new(descriptor(), slots))
}

pub fn parse_pamap2_file(path: &Path, filter: &ActivityFilter) -> Result<Stream> {
    let file = std::fs::File::open(path)?;
    parse_pamap2(std::io::BufReader::new(file), filter)
}

/// Loads every `*.dat` file under `dir` as one session per subject.
/// Subjects with no qualifying activity are skipped.
pub fn load_dir(dir: &Path, filter: &ActivityFilter) -> Result<Vec<(PathBuf, Stream)>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "dat"))
        .collect();
    files.sort();
    let mut sessions = Vec::new();
    for path in files {
        match parse_pamap2_file(&path, filter) {
            Ok(stream) => sessions.push((path, stream)),
            Err(Error::EmptyStream(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    if sessions.is_empty() {
        return Err(Error::EmptyStream(format!(
            "no qualifying subject under {}",
            dir.display()
        )));
    }
    Ok(sessions)
}

fn push_value(out: &mut String, v: Option<f64>) {
    match v {
        Some(v) => write!(out, " {v}").unwrap(),
        None => out.push_str(" NaN"),
    }
}

/// Writes slots back in the 54-column layout. Orientation columns are `NaN`.
pub fn to_pamap2_text(stream: &Stream, filter: &ActivityFilter) -> String {
    let mut out = String::new();
    for slot in &stream.slots {
        let activity = slot
            .ground_truth
            .map(|l| filter.activity_id(l))
            .unwrap_or(0);
        write!(out, "{} {}", slot.timestamp, activity).unwrap();
        push_value(&mut out, slot.values[0]);
        for block in 0..3 {
            for c in 0..BLOCK_CHANNELS {
                push_value(&mut out, slot.values[1 + block * BLOCK_CHANNELS + c]);
            }
            for _ in BLOCK_CHANNELS..IMU_BLOCK {
                out.push_str(" NaN");
            }
        }
        out.push('\n');
    }
    out
}
