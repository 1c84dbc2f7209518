//! Versioned CSV and JSON result files.
//!
//! CSV layout:
//!
//! ```text
//! # netstress-output v1
//! # experiment: fig2
//! # config: {...}        run configuration, one line of JSON
//! # metadata: {...}      sweep metadata, one line of JSON
//! axis,mc_mean,mc_stderr,theory,n_diverged[,extra...]
//! 5.0000000000000000e-1,...
//! ```
//!
//! Reals are written with 17 significant digits and `.` as decimal
//! separator; missing values are `NaN`. The JSON form is a single object
//! with `format`, `config` and `result` keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::experiments::{Column, SweepResult};

/// Format tag on the first line of every output file.
pub const FORMAT_TAG: &str = "netstress-output v1";

const BASE_COLUMNS: [&str; 5] = ["axis", "mc_mean", "mc_stderr", "theory", "n_diverged"];

/// On-disk output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// Comment header plus comma-separated table.
    Csv,
    /// Single JSON document.
    Json,
}

#[derive(Serialize, Deserialize)]
struct JsonDocument {
    format: String,
    config: RunConfig,
    result: SweepResult,
}

fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

/// Renders a sweep as CSV with the provenance header.
pub fn to_csv(config: &RunConfig, result: &SweepResult) -> Result<String> {
    result.validate().map_err(AppError::Serialize)?;
    let cfg = serde_json::to_string(config).map_err(|e| AppError::Serialize(e.to_string()))?;
    let meta = serde_json::to_string(&result.metadata).map_err(|e| AppError::Serialize(e.to_string()))?;
    let mut s = String::new();
    let _ = writeln!(s, "# {FORMAT_TAG}");
    let _ = writeln!(s, "# experiment: {}", result.experiment);
    let _ = writeln!(s, "# axis: {}", result.axis_name);
    let _ = writeln!(s, "# config: {cfg}");
    let _ = writeln!(s, "# metadata: {meta}");
    let mut header: Vec<&str> = BASE_COLUMNS.to_vec();
    header.extend(result.extra.iter().map(|c| c.name.as_str()));
    let _ = writeln!(s, "{}", header.join(","));
    for i in 0..result.len() {
        let mut row = vec![
            real(result.axis[i]),
            real(result.mc_mean[i]),
            real(result.mc_stderr[i]),
            real(result.theory[i]),
            result.n_diverged[i].to_string(),
        ];
        row.extend(result.extra.iter().map(|c| real(c.values[i])));
        let _ = writeln!(s, "{}", row.join(","));
    }
    Ok(s)
}

/// Renders a sweep as a JSON document.
pub fn to_json(config: &RunConfig, result: &SweepResult) -> Result<String> {
    result.validate().map_err(AppError::Serialize)?;
    let doc = JsonDocument {
        format: FORMAT_TAG.into(),
        config: config.clone(),
        result: result.clone(),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| AppError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Renders in the requested format.
pub fn render(config: &RunConfig, result: &SweepResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Csv => to_csv(config, result),
        OutputFormat::Json => to_json(config, result),
    }
}

fn parse_err(path: &Path, reason: impl Into<String>) -> AppError {
    AppError::Parse {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_real(tok: &str, path: &Path, line: usize) -> Result<f64> {
    if tok == "NaN" {
        return Ok(f64::NAN);
    }
    tok.parse::<f64>()
        .map_err(|_| parse_err(path, format!("line {line}: `{tok}` is not a number")))
}

/// Parses CSV output; `path` is used in error messages only.
pub fn parse_csv(text: &str, path: &Path) -> Result<(RunConfig, SweepResult)> {
    let mut lines = text.lines().enumerate();
    let mut header_fields: BTreeMap<String, String> = BTreeMap::new();
    let mut columns: Option<Vec<String>> = None;
    match lines.next() {
        Some((_, l)) if l == format!("# {FORMAT_TAG}") => {}
        _ => return Err(parse_err(path, format!("missing `# {FORMAT_TAG}` header"))),
    }
    for (_, line) in lines.by_ref() {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| parse_err(path, format!("malformed header line `{line}`")))?;
            header_fields.insert(k.to_string(), v.to_string());
        } else {
            columns = Some(line.split(',').map(str::to_string).collect());
            break;
        }
    }
    let columns = columns.ok_or_else(|| parse_err(path, "missing column header"))?;
    if columns.len() < BASE_COLUMNS.len() || columns[..BASE_COLUMNS.len()] != BASE_COLUMNS {
        return Err(parse_err(path, format!("unexpected columns {columns:?}")));
    }
    let field = |k: &str| {
        header_fields
            .get(k)
            .cloned()
            .ok_or_else(|| parse_err(path, format!("missing `{k}` header")))
    };
    let config: RunConfig =
        serde_json::from_str(&field("config")?).map_err(|e| parse_err(path, format!("config header: {e}")))?;
    let metadata: BTreeMap<String, Value> =
        serde_json::from_str(&field("metadata")?).map_err(|e| parse_err(path, format!("metadata header: {e}")))?;
    let n_extra = columns.len() - BASE_COLUMNS.len();
    let mut result = SweepResult {
        experiment: field("experiment")?,
        axis_name: field("axis")?,
        axis: Vec::new(),
        mc_mean: Vec::new(),
        mc_stderr: Vec::new(),
        theory: Vec::new(),
        n_diverged: Vec::new(),
        extra: columns[BASE_COLUMNS.len()..]
            .iter()
            .map(|name| Column {
                name: name.clone(),
                values: Vec::new(),
            })
            .collect(),
        metadata,
    };
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != columns.len() {
            return Err(parse_err(path, format!("line {lineno}: {} fields, expected {}", toks.len(), columns.len())));
        }
        result.axis.push(parse_real(toks[0], path, lineno)?);
        result.mc_mean.push(parse_real(toks[1], path, lineno)?);
        result.mc_stderr.push(parse_real(toks[2], path, lineno)?);
        result.theory.push(parse_real(toks[3], path, lineno)?);
        result.n_diverged.push(
            toks[4]
                .parse()
                .map_err(|_| parse_err(path, format!("line {lineno}: bad n_diverged `{}`", toks[4])))?,
        );
        for c in 0..n_extra {
            let v = parse_real(toks[BASE_COLUMNS.len() + c], path, lineno)?;
            result.extra[c].values.push(v);
        }
    }
    Ok((config, result))
}

/// Parses JSON output.
pub fn parse_json(text: &str, path: &Path) -> Result<(RunConfig, SweepResult)> {
    let doc: JsonDocument = serde_json::from_str(text).map_err(|e| parse_err(path, e.to_string()))?;
    if doc.format != FORMAT_TAG {
        return Err(parse_err(path, format!("unsupported format `{}`", doc.format)));
    }
    Ok((doc.config, doc.result))
}

/// Reads an output file of either format.
pub fn read_output(path: &Path) -> Result<(RunConfig, SweepResult)> {
    let text = std::fs::read_to_string(path).map_err(|source| AppError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if text.starts_with('{') {
        parse_json(&text, path)
    } else {
        parse_csv(&text, path)
    }
}
