//! JSON-lines reading and writing shared by the pipeline stages.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut sink: W) -> Result<u64> {
    let mut written = 0u64;
    for item in items {
        let mut line = serde_json::to_vec(item)?;
        line.push(b'\n');
        sink.write_all(&line)
            .map_err(|source| Error::Write { written, source })?;
        written += line.len() as u64;
    }
    sink.flush().map_err(|source| Error::Write { written, source })?;
    Ok(written)
}

pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(src: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("line {}: {e}", n + 1)))?;
        out.push(item);
    }
    Ok(out)
}
