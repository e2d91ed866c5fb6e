use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::simkernel::Trace;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("truncated record at line {line}")]
    Truncated { line: usize },
    #[error("corrupt record: {0}")]
    Corrupt(String),
}

/// Writes the trace as newline-delimited JSON. The file is written next to
/// its destination and renamed into place, so readers never see a partial
/// trace.
pub fn persist(trace: &Trace, path: &Path) -> Result<(), StoreError> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "store path has no file name"))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(trace.to_ndjson().as_bytes())?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Trace, StoreError> {
    let text = fs::read_to_string(path)?;
    if !text.is_empty() && !text.ends_with('\n') {
        return Err(StoreError::Truncated {
            line: text.lines().count(),
        });
    }
    Trace::from_ndjson(&text).map_err(|e| StoreError::Corrupt(e.to_string()))
}
