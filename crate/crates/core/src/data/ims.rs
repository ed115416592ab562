use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::RawRecording;

/// Parses IMS-style ASCII: whitespace-separated numeric columns, one row per
/// time sample. Blank lines are skipped.
pub fn parse_ims_file(bytes: &[u8], expected_channels: usize) -> Result<RawRecording> {
    if expected_channels == 0 {
        return Err(Error::InvalidConfig("expected_channels must be >= 1".into()));
    }
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        message: format!("not text: {e}"),
    })?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let before = samples.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric token '{tok}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-finite value '{tok}'"),
                });
            }
            samples.push(v);
        }
        let fields = samples.len() - before;
        if fields != 0 && fields != expected_channels {
            return Err(Error::Parse {
                line: line_no,
                message: format!("ragged row: {fields} fields, expected {expected_channels}"),
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::Data("empty recording".into()));
    }
    RawRecording::new(samples, expected_channels, 0)
}

/// One entry of a data directory; unreadable files are kept as gaps.
#[derive(Debug)]
pub struct LoadedFile {
    pub file_index: usize,
    pub path: PathBuf,
    pub recording: Result<RawRecording>,
}

/// Non-hidden regular files of `dir` in lexicographic file-name order. The
/// position in this list is the file index.
pub fn list_data_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

pub fn load_ims_file(path: &Path, file_index: usize, expected_channels: usize) -> LoadedFile {
    let recording = fs::read(path)
        .map_err(|e| Error::io(path, e))
        .and_then(|bytes| parse_ims_file(&bytes, expected_channels))
        .map(|mut r| {
            r.file_index = file_index;
            r
        });
    LoadedFile {
        file_index,
        path: path.to_path_buf(),
        recording,
    }
}

/// Loads every file of [`list_data_files`].
pub fn load_ims_dir(dir: &Path, expected_channels: usize) -> Result<Vec<LoadedFile>> {
    Ok(list_data_files(dir)?
        .iter()
        .enumerate()
        .map(|(i, p)| load_ims_file(p, i, expected_channels))
        .collect())
}
