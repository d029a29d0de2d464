//! Code files and the CSV/JSON table emitters.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use dcc_core::Code;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn read_code(path: &Path) -> anyhow::Result<Code> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Code::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_code(path: &Path, code: &Code) -> anyhow::Result<()> {
    fs::write(path, code.to_text()).with_context(|| format!("writing {}", path.display()))
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn to_json<T: Serialize>(rows: &[T]) -> String {
    let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
    s.push('\n');
    s
}

pub fn render<T: Serialize>(rows: &[T], format: Format) -> anyhow::Result<String> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => Ok(to_json(rows)),
    }
}

/// Writes `rows` to stdout in `format`, or to `out` with `.csv` and `.json`
/// side by side. Returns the files written.
pub fn emit<T: Serialize>(rows: &[T], format: Format, out: Option<&Path>) -> anyhow::Result<Vec<PathBuf>> {
    match out {
        None => {
            std::io::stdout().write_all(render(rows, format)?.as_bytes())?;
            Ok(Vec::new())
        }
        Some(out) => {
            let csv_path = out.with_extension("csv");
            let json_path = out.with_extension("json");
            fs::write(&csv_path, to_csv(rows)?).with_context(|| format!("writing {}", csv_path.display()))?;
            fs::write(&json_path, to_json(rows)).with_context(|| format!("writing {}", json_path.display()))?;
            Ok(vec![csv_path, json_path])
        }
    }
}
