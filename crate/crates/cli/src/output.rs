use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::Context;
use srlprune::model::{ConfigError, ModelError};
use srlprune::neural::NumericError;

/// Bad flags or a configuration that cannot be honoured.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// A numeric check that ran to completion but failed its tolerance.
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NumericFailure {}

/// Exit code and kind for an error: 2 usage, 3 data, 4 numeric.
pub fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<ConfigError>() {
            return (2, "usage");
        }
        if cause.is::<NumericFailure>() || cause.is::<NumericError>() {
            return (4, "numeric");
        }
        if let Some(m) = cause.downcast_ref::<ModelError>() {
            match m {
                ModelError::Numeric(_) | ModelError::Diverged { .. } => return (4, "numeric"),
                ModelError::Config(_) | ModelError::Mode(_) => return (2, "usage"),
                _ => {}
            }
        }
    }
    (3, "data")
}

pub fn error_line(code: u8, kind: &str, message: &str) -> String {
    let flat = message.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("error code={code} kind={kind} message={}", quote(&flat))
}

fn quote(value: &str) -> String {
    if value.is_empty() || value.contains(|c: char| c.is_whitespace() || c == '"' || c == '=') {
        format!("{value:?}")
    } else {
        value.to_owned()
    }
}

/// One `key=value` record on stderr.
pub fn log(fields: &[(&str, &dyn fmt::Display)]) {
    let line: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("{k}={}", quote(&v.to_string())))
        .collect();
    eprintln!("{}", line.join(" "));
}

/// Writes `bytes` to `path`, or to stdout when `path` is `None` or `-`.
pub fn emit(path: Option<&str>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        None | Some("-") => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
        Some(p) => {
            let file = File::create(p).with_context(|| format!("creating {p}"))?;
            let mut w = BufWriter::new(file);
            w.write_all(bytes)
                .and_then(|_| w.flush())
                .with_context(|| format!("writing {p}"))?;
        }
    }
    Ok(())
}

/// `#key=value` header lines followed by a tab-separated table.
pub fn report(header: &[(String, String)], columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for (k, v) in header {
        out.push_str(&format!("#{k}={v}\n"));
    }
    out.push_str(&columns.join("\t"));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}
