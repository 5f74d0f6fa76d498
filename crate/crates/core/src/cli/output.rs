use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use tempfile::NamedTempFile;

use rcl::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputMode {
    Json,
    Csv,
    Both,
}

/// What a command produced. CSV is absent for commands without tabular data.
pub struct Artifacts {
    pub json: String,
    pub csv: Option<String>,
}

impl Artifacts {
    pub fn new(value: &impl Serialize) -> Result<Self> {
        Ok(Self {
            json: to_json(value)?,
            csv: None,
        })
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

pub fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Header plus one line per row; floats use Rust's shortest round-trip form.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            buf: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) {
        for (k, f) in fields.iter().enumerate() {
            if k > 0 {
                self.buf.push(',');
            }
            write!(self.buf, "{f}").expect("writing to a String");
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Writes through a temp file in the target directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Without `out` everything goes to stdout, JSON first. With `out`, a single
/// artifact is written to that path and `both` writes `<out>.json` and
/// `<out>.csv`.
pub fn emit(a: &Artifacts, mode: OutputMode, out: Option<&Path>, command: &str) -> Result<()> {
    let csv = || {
        a.csv.as_deref().ok_or_else(|| {
            Error::InvalidInput(format!("`{command}` has no CSV output; use --output json"))
        })
    };
    match (mode, out) {
        (OutputMode::Json, None) => print!("{}", a.json),
        (OutputMode::Csv, None) => print!("{}", csv()?),
        (OutputMode::Both, None) => {
            let c = csv()?;
            print!("{}{}", a.json, c);
        }
        (OutputMode::Json, Some(p)) => write_atomic(p, &a.json)?,
        (OutputMode::Csv, Some(p)) => write_atomic(p, csv()?)?,
        (OutputMode::Both, Some(p)) => {
            let c = csv()?;
            write_atomic(&p.with_extension("json"), &a.json)?;
            write_atomic(&p.with_extension("csv"), c)?;
        }
    }
    Ok(())
}

/// Numbers from a text file. A first line containing letters is a header,
/// and `column` is taken from it when present (else the first column).
/// Without a header every comma- or whitespace-separated token is a value.
pub fn read_numbers(path: &Path, column: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();
    let parse = |tok: &str, line: usize| {
        tok.trim().parse::<f64>().map_err(|_| {
            Error::InvalidInput(format!("{}: line {line}: not a number: `{tok}`", path.display()))
        })
    };
    let has_header = lines
        .peek()
        .is_some_and(|l| l.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E'));
    let mut out = Vec::new();
    if has_header {
        let header = lines.next().expect("peeked");
        let idx = header
            .split(',')
            .position(|h| h.trim() == column)
            .unwrap_or(0);
        for (k, line) in lines.enumerate() {
            let tok = line.split(',').nth(idx).ok_or_else(|| {
                Error::InvalidInput(format!("{}: line {}: missing column", path.display(), k + 2))
            })?;
            out.push(parse(tok, k + 2)?);
        }
    } else {
        for (k, line) in lines.enumerate() {
            for tok in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                out.push(parse(tok, k + 1)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no numbers", path.display())));
    }
    Ok(out)
}
