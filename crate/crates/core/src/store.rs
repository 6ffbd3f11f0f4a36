//! On-disk persistence: an append-only JSON Lines event log plus optional
//! snapshots of the materialized state.
//!
//! A data directory holds `events.jsonl` (the full log, one record per line)
//! and `snapshot.jsonl`. A snapshot is a header line, the state, every
//! record up to the snapshot point, and a closing marker; a file missing
//! any part of that is rejected whole.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Clock, Engine, LogSink};
use crate::error::{HillError, Result};
use crate::events::EventRecord;
use crate::instrument::Instrument;
use crate::model::ModelState;
use crate::state::State;

pub const LOG_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.jsonl";
const SNAPSHOT_FORMAT: &str = "hill-snapshot";
const SNAPSHOT_VERSION: u32 = 1;

fn to_line<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| HillError::Malformed(e.to_string()))
}

/// Appends records to a log file, syncing after each batch.
#[derive(Debug)]
pub struct JsonlSink {
    file: File,
}

impl JsonlSink {
    pub fn open(path: &Path) -> Result<JsonlSink> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JsonlSink { file })
    }
}

impl LogSink for JsonlSink {
    fn append(&mut self, records: &[EventRecord]) -> Result<()> {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&to_line(r)?);
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.sync_data()?;
        Ok(())
    }
}

/// Reads a whole log. Any undecodable line, or a gap in sequence numbers,
/// fails with the last sequence number read intact.
pub fn read_log(path: &Path) -> Result<Vec<EventRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out: Vec<EventRecord> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let last_valid_seq = out.last().map_or(0, |r| r.seq);
        let corrupt = |reason: String| HillError::CorruptLog {
            last_valid_seq,
            reason,
        };
        let line = line.map_err(|e| corrupt(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord =
            serde_json::from_str(&line).map_err(|e| corrupt(format!("line {}: {e}", i + 1)))?;
        if rec.seq != last_valid_seq + 1 {
            return Err(corrupt(format!("line {}: seq {} out of order", i + 1, rec.seq)));
        }
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    format: String,
    version: u32,
    last_seq: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotEnd {
    end: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: State,
    pub events: Vec<EventRecord>,
}

/// Writes to a temporary sibling and renames it into place.
pub fn write_snapshot(path: &Path, state: &State, events: &[EventRecord]) -> Result<()> {
    if events.last().map_or(0, |r| r.seq) != state.last_seq {
        return Err(HillError::Malformed("snapshot state and log disagree".into()));
    }
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        let header = SnapshotHeader {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            last_seq: state.last_seq,
        };
        writeln!(w, "{}", to_line(&header)?)?;
        writeln!(w, "{}", to_line(state)?)?;
        for r in events {
            writeln!(w, "{}", to_line(r)?)?;
        }
        writeln!(w, "{}", to_line(&SnapshotEnd { end: state.last_seq })?)?;
        w.flush()?;
        w.get_ref().sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path).map_err(|e| HillError::CorruptSnapshot {
        last_valid_seq: 0,
        reason: e.to_string(),
    })?;
    let mut lines = text.lines();
    let mut last_valid_seq = 0;
    let corrupt = |last_valid_seq: u64, reason: String| HillError::CorruptSnapshot {
        last_valid_seq,
        reason,
    };

    let header: SnapshotHeader = lines
        .next()
        .ok_or_else(|| corrupt(0, "empty file".into()))
        .and_then(|l| serde_json::from_str(l).map_err(|e| corrupt(0, format!("header: {e}"))))?;
    if header.format != SNAPSHOT_FORMAT || header.version != SNAPSHOT_VERSION {
        return Err(corrupt(
            0,
            format!("unsupported snapshot {} v{}", header.format, header.version),
        ));
    }
    let state: State = lines
        .next()
        .ok_or_else(|| corrupt(0, "missing state".into()))
        .and_then(|l| serde_json::from_str(l).map_err(|e| corrupt(0, format!("state: {e}"))))?;

    let mut events = Vec::new();
    let mut ended = false;
    for line in lines {
        if ended {
            return Err(corrupt(last_valid_seq, "data after end marker".into()));
        }
        if let Ok(end) = serde_json::from_str::<SnapshotEnd>(line) {
            if end.end != header.last_seq {
                return Err(corrupt(last_valid_seq, "end marker mismatch".into()));
            }
            ended = true;
            continue;
        }
        let rec: EventRecord =
            serde_json::from_str(line).map_err(|e| corrupt(last_valid_seq, e.to_string()))?;
        if rec.seq != last_valid_seq + 1 {
            return Err(corrupt(last_valid_seq, format!("seq {} out of order", rec.seq)));
        }
        last_valid_seq = rec.seq;
        events.push(rec);
    }
    if !ended {
        return Err(corrupt(last_valid_seq, "missing end marker (truncated)".into()));
    }
    if last_valid_seq != header.last_seq || state.last_seq != header.last_seq {
        return Err(corrupt(last_valid_seq, "record count does not match header".into()));
    }
    Ok(Snapshot { state, events })
}

/// Location of the log and snapshot files.
#[derive(Debug, Clone)]
pub struct DataDir {
    root: PathBuf,
}

impl DataDir {
    pub fn new(root: impl Into<PathBuf>) -> DataDir {
        DataDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join(LOG_FILE)
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.root.join(SNAPSHOT_FILE)
    }

    /// Opens the engine persisted here, creating a new log from `init` when
    /// none exists. State comes from the snapshot when present, with later
    /// log records applied on top.
    pub fn open(
        &self,
        clock: Box<dyn Clock>,
        init: impl FnOnce() -> Result<(Instrument, ModelState)>,
    ) -> Result<Engine> {
        fs::create_dir_all(&self.root)?;
        let log_path = self.log_path();
        if !log_path.exists() {
            let (instrument, model) = init()?;
            let sink = JsonlSink::open(&log_path)?;
            return Engine::create(instrument, model, clock, Some(Box::new(sink)));
        }
        let log = read_log(&log_path)?;
        let snap_path = self.snapshot_path();
        let state = if snap_path.exists() {
            let snap = read_snapshot(&snap_path)?;
            let n = snap.events.len();
            if log.len() < n || log[..n] != snap.events[..] {
                return Err(HillError::CorruptSnapshot {
                    last_valid_seq: snap.state.last_seq,
                    reason: "snapshot is not a prefix of the event log".into(),
                });
            }
            let mut state = snap.state;
            for rec in &log[n..] {
                state.apply(rec)?;
            }
            state
        } else {
            State::replay(&log)?
        };
        let sink = JsonlSink::open(&log_path)?;
        Ok(Engine::from_parts(state, log, clock, Some(Box::new(sink))))
    }

    pub fn snapshot(&self, engine: &Engine) -> Result<PathBuf> {
        let path = self.snapshot_path();
        write_snapshot(&path, engine.state(), engine.log())?;
        Ok(path)
    }
}
