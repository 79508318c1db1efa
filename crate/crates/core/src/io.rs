//! CSV/JSON emission and configuration parsing.
//!
//! Configs are either JSON objects or flat `key = value` text with `#`
//! comments. In the flat form each value is read as a JSON literal when it
//! parses as one (`0.8`, `true`, `[0.2, 0.8]`, `"text"`) and as a bare string
//! otherwise, so `filter = rectangular` works without quotes.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug)]
pub enum IoError {
    Io { path: PathBuf, source: std::io::Error },
    Parse { origin: String, line: Option<usize>, message: String },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            IoError::Parse { origin, line: Some(l), message } => write!(f, "{origin}:{l}: {message}"),
            IoError::Parse { origin, line: None, message } => write!(f, "{origin}: {message}"),
        }
    }
}

impl std::error::Error for IoError {}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Number format for emitted tables: 15 significant digits, round-trips through text.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.14e}")
}

/// Writes `contents` to `path` through a sibling temporary file and a rename,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    drop(f);
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Renders equal-length columns as CSV with an optional leading `#` comment line.
pub fn csv_string(comment: Option<&str>, header: &[&str], columns: &[&[f64]]) -> String {
    assert_eq!(header.len(), columns.len());
    let rows = columns.first().map_or(0, |c| c.len());
    assert!(columns.iter().all(|c| c.len() == rows), "ragged CSV columns");
    let mut out = String::with_capacity(rows * columns.len() * 24 + 64);
    if let Some(c) = comment {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..rows {
        for (k, col) in columns.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            out.push_str(&fmt_num(col[r]));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, comment: Option<&str>, header: &[&str], columns: &[&[f64]]) -> Result<(), IoError> {
    write_atomic(path, csv_string(comment, header, columns).as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reads a CSV written by [`write_csv`]: skips `#` lines, returns header and columns.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let origin = path.display().to_string();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#'));
    let header: Vec<String> = match lines.next() {
        Some((_, h)) => h.split(',').map(str::to_owned).collect(),
        None => return Err(IoError::Parse { origin, line: None, message: "empty file".into() }),
    };
    let mut cols = vec![Vec::new(); header.len()];
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(IoError::Parse {
                origin,
                line: Some(n + 1),
                message: format!("expected {} fields, found {}", header.len(), fields.len()),
            });
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(f.trim().parse().map_err(|e| IoError::Parse {
                origin: origin.clone(),
                line: Some(n + 1),
                message: format!("bad number {f:?}: {e}"),
            })?);
        }
    }
    Ok((header, cols))
}

/// Parses flat `key = value` text into a JSON object, remembering each key's line.
pub fn parse_key_values(text: &str, origin: &str) -> Result<(Map<String, Value>, Vec<(String, usize)>), IoError> {
    let mut map = Map::new();
    let mut lines = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| IoError::Parse {
            origin: origin.to_owned(),
            line: Some(n + 1),
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("invalid key {key:?}")));
        }
        let value = value.trim();
        if value.is_empty() {
            return Err(err(format!("missing value for `{key}`")));
        }
        let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_owned()));
        if map.insert(key.to_owned(), parsed).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
        lines.push((key.to_owned(), n + 1));
    }
    Ok((map, lines))
}

// `#` starts a comment unless it sits inside a double-quoted string
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Parses a config from JSON (text starting with `{`) or flat `key = value` text.
///
/// Deserialization errors are reported at the line of the offending key when
/// it can be identified.
pub fn parse_config<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, IoError> {
    if text.trim_start().starts_with('{') {
        return serde_json::from_str(text).map_err(|e| IoError::Parse {
            origin: origin.to_owned(),
            line: Some(e.line()),
            message: e.to_string(),
        });
    }
    let (map, lines) = parse_key_values(text, origin)?;
    serde_json::from_value(Value::Object(map)).map_err(|e| {
        let message = e.to_string();
        // the offending key is named before serde's list of expected fields
        let head = message.split(", expected").next().unwrap_or(&message);
        let line = lines
            .iter()
            .find(|(k, _)| head.contains(&format!("`{k}`")))
            .map(|(_, l)| *l);
        IoError::Parse {
            origin: origin.to_owned(),
            line,
            message,
        }
    })
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, &path.display().to_string())
}
