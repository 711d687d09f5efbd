//! JSONL session log: one header line, then one [`SuggestionRecord`] per line
//! with keys in declaration order.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::SuggestionRecord;

pub const LOG_FORMAT: &str = "egoassist/session-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionLogError {
    #[error("session log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing or invalid header line")]
    Header,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

pub fn render_session_log(records: &[SuggestionRecord]) -> String {
    let mut out = serde_json::to_string(&Header {
        format: LOG_FORMAT.into(),
        version: LOG_VERSION,
    })
    .expect("header serialises");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialises"));
        out.push('\n');
    }
    out
}

pub fn write_session_log(
    records: &[SuggestionRecord],
    path: impl AsRef<Path>,
) -> Result<(), SessionLogError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render_session_log(records).as_bytes())?;
    Ok(())
}

pub fn parse_session_log(reader: impl BufRead) -> Result<Vec<SuggestionRecord>, SessionLogError> {
    let mut lines = reader.lines();
    let header = lines.next().ok_or(SessionLogError::Header)??;
    match serde_json::from_str::<Header>(&header) {
        Ok(h) if h.format == LOG_FORMAT && h.version == LOG_VERSION => {}
        _ => return Err(SessionLogError::Header),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SuggestionRecord =
            serde_json::from_str(&line).map_err(|e| SessionLogError::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_session_log(path: impl AsRef<Path>) -> Result<Vec<SuggestionRecord>, SessionLogError> {
    parse_session_log(BufReader::new(std::fs::File::open(path)?))
}
