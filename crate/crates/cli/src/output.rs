//! Error type, exit codes and output-file plumbing shared by all commands.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use betaproc_core::VERSION;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<betaproc_core::Error> for CliError {
    fn from(e: betaproc_core::Error) -> Self {
        use betaproc_core::Error as E;
        match e {
            E::Numerical { .. } => CliError::Numerical(e.to_string()),
            E::Io(_) => CliError::Io(e.to_string()),
            E::Domain(_) | E::Parameter(_) | E::Parse { .. } => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// The comment line that opens every CSV output.
pub fn comment_line(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# betaproc {VERSION} seed={s}\n"),
        None => format!("# betaproc {VERSION} seed=none\n"),
    }
}

/// Writes files into one output directory and remembers their names.
pub struct Outputs {
    dir: PathBuf,
    seed: Option<u64>,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path, seed: Option<u64>) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf(), seed, written: Vec::new() })
    }

    pub fn text(&mut self, name: &str, content: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| io_error(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// A CSV file: comment line, then whatever `body` writes (header first).
    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<()> {
        let mut buf = comment_line(self.seed).into_bytes();
        body(&mut buf).map_err(|e| io_error(&self.dir.join(name), e))?;
        let content = String::from_utf8(buf).map_err(|e| CliError::Io(e.to_string()))?;
        self.text(name, &content)
    }

    pub fn into_names(self) -> Vec<String> {
        self.written
    }
}

/// Shortest decimal form that round-trips, so CSVs are stable and exact.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// File-name tag for a parameter value, e.g. `0.3` stays `0.3`.
pub fn tag(x: f64) -> String {
    let s = format!("{x}");
    s.replace('-', "m")
}

/// `n` log-spaced integers from 1 to `max`, deduplicated.
pub fn log_spaced(max: usize, n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 1.0 };
            ((max as f64).powf(t).round() as usize).clamp(1, max.max(1))
        })
        .collect();
    out.dedup();
    out
}

/// Parsed numeric table: column names plus rows.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a comma-separated numeric table, skipping `#` comment lines.
/// A first row that is not entirely numeric is taken as the header.
pub fn read_table(path: &Path) -> CliResult<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    let mut columns: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line()) as usize;
        let fields: Vec<&str> = rec.iter().collect();
        if i == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            columns = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        }
        let expected = columns.as_ref().map(|c| c.len()).or_else(|| rows.first().map(|r| r.len()));
        if let Some(n) = expected {
            if fields.len() != n {
                return Err(parse_error(path, line, fields.len().min(n) + 1, &format!("expected {n} fields, found {}", fields.len())));
            }
        }
        let mut row = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| parse_error(path, line, c + 1, &format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, c + 1, "value is not finite"));
            }
            row.push(v);
        }
        rows.push(row);
    }
    let width = columns.as_ref().map(|c| c.len()).or_else(|| rows.first().map(|r| r.len())).unwrap_or(0);
    let columns = columns.unwrap_or_else(|| (1..=width).map(|c| format!("c{c}")).collect());
    Ok(Table { columns, rows })
}

fn parse_error(path: &Path, row: usize, column: usize, message: &str) -> CliError {
    let e = betaproc_core::Error::Parse { row, column, message: message.to_string() };
    CliError::Usage(format!("{}: {e}", path.display()))
}
