//! CSV and JSON files written by the runner.
//!
//! All CSV files use LF line endings, `.` decimals and a header row. Values are
//! numbers or fixed identifiers, so no field ever needs quoting. Floats are
//! printed in Rust's shortest round-trip form, which makes the files
//! byte-stable across runs and thread counts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Bumped whenever a column is added, removed or reordered.
pub const RESULTS_SCHEMA: u32 = 1;

pub const RESULTS_HEADER: &str =
    "sweep_axis,sweep_index,sweep_value,estimator,trial,seed,l2_error,linf_error,success_rate,support_size";
pub const TIMING_HEADER: &str = "sweep_index,estimator,trial,wall_time_ms";
pub const TRACE_HEADER: &str = "method,t,coordinate,value,beta";
pub const BENCH_HEADER: &str = "d,estimator,n,iterations,repeats,wall_time_ms";

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const BENCH_FILE: &str = "bench.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Prefix of the last line of a completed results file.
pub const END_MARKER: &str = "# end rows=";

/// A CSV file written line by line.
pub struct CsvSink {
    path: PathBuf,
    out: BufWriter<File>,
    rows: usize,
}

impl CsvSink {
    pub fn create(path: &Path, header: &str) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut sink = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            rows: 0,
        };
        sink.raw(header)?;
        Ok(sink)
    }

    fn raw(&mut self, line: &str) -> CliResult<()> {
        writeln!(self.out, "{line}").map_err(|e| CliError::io(&self.path, e))
    }

    pub fn row(&mut self, line: &str) -> CliResult<()> {
        self.raw(line)?;
        self.rows += 1;
        Ok(())
    }

    /// Pushes buffered rows to disk so a crash leaves every completed row behind.
    pub fn flush(&mut self) -> CliResult<()> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Appends the end marker and flushes.
    pub fn finish_with_marker(mut self) -> CliResult<()> {
        let marker = format!("{END_MARKER}{}", self.rows);
        self.raw(&marker)?;
        self.flush()
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.flush()
    }
}

/// Whether a results file ends with a well-formed end marker matching its row count.
pub fn is_complete(text: &str) -> bool {
    let mut lines: Vec<&str> = text.lines().collect();
    let Some(last) = lines.pop() else {
        return false;
    };
    let Some(count) = last.strip_prefix(END_MARKER) else {
        return false;
    };
    count.parse::<usize>().ok() == Some(lines.len().saturating_sub(1))
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub command: &'a str,
    pub threads: Option<usize>,
    pub planned_runs: usize,
    pub results_schema: u32,
    pub outputs: Vec<&'static str>,
    pub config: &'a ExperimentConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a ExperimentConfig, threads: Option<usize>, outputs: Vec<&'static str>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: sparse_mom::VERSION,
            command,
            threads,
            planned_runs: config.planned_runs(),
            results_schema: RESULTS_SCHEMA,
            outputs,
            config,
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn end_marker_detection() {
        assert!(is_complete("a,b\n1,2\n3,4\n# end rows=2\n"));
        assert!(is_complete("a,b\n# end rows=0\n"));
        assert!(!is_complete("a,b\n1,2\n3,4\n"));
        assert!(!is_complete("a,b\n1,2\n# end rows=2\n"));
        assert!(!is_complete(""));
    }

    #[test]
    fn sink_counts_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let mut sink = CsvSink::create(&path, "a,b").unwrap();
        sink.row("1,2").unwrap();
        assert_eq!(sink.rows(), 1);
        sink.finish_with_marker().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1,2\n# end rows=1\n");
        assert!(is_complete(&text));
    }

    #[test]
    fn optional_values() {
        assert_eq!(fmt_opt(None), "");
        assert_eq!(fmt_opt(Some(0.1)), "0.1");
    }
}
