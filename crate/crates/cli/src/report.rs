//! CSV reports: `task,fold,metric,value` rows with shortest round-trip numbers.

use std::io::Write;
use std::path::Path;

use artist_embed::{Error, Result};

pub const HEADER: &str = "task,fold,metric,value";

#[derive(Debug, Default)]
pub struct Report {
    lines: Vec<String>,
}

impl Report {
    pub fn row(&mut self, task: &str, fold: impl std::fmt::Display, metric: &str, value: f64) {
        self.lines.push(format!("{task},{fold},{metric},{value}"));
    }

    pub fn render(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str(HEADER);
            out.push('\n');
        }
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }
}

/// Writes `text` to `out`, or stdout when `out` is `None`.
pub fn emit(text: &str, out: Option<&Path>, append: bool) -> Result<()> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            let mut file = std::fs::OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            file.write_all(text.as_bytes())
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
        }
    }
}

/// Writes a report, skipping the header when appending to a non-empty file.
pub fn emit_report(report: &Report, out: Option<&Path>, append: bool) -> Result<()> {
    let has_content = append && out.is_some_and(|p| std::fs::metadata(p).is_ok_and(|m| m.len() > 0));
    emit(&report.render(!has_content), out, append)
}
