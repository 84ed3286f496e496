//! Result rows and the sinks that persist them.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Bumped whenever the row layout changes.
pub const RESULT_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub schema: u32,
    pub experiment: String,
    pub parameters: String,
    pub statistic: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub seed: u64,
    /// Seconds since the experiment started; only recorded on request, since
    /// it breaks byte-identical reruns.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

pub trait RowSink {
    fn push(&mut self, row: ResultRow) -> Result<()>;

    fn finish(&mut self, _report: Option<&serde_json::Value>) -> Result<()> {
        Ok(())
    }
}

/// Collects rows in memory.
#[derive(Default)]
pub struct VecSink {
    pub rows: Vec<ResultRow>,
    pub report: Option<serde_json::Value>,
}

impl RowSink for VecSink {
    fn push(&mut self, row: ResultRow) -> Result<()> {
        self.rows.push(row);
        Ok(())
    }

    fn finish(&mut self, report: Option<&serde_json::Value>) -> Result<()> {
        self.report = report.cloned();
        Ok(())
    }
}

/// CSV rows, flushed one at a time so partial runs leave usable output.
pub struct CsvSink<W: Write> {
    out: csv::Writer<W>,
    timing: bool,
    header_written: bool,
}

impl<W: Write> CsvSink<W> {
    pub fn new(w: W, timing: bool) -> Self {
        Self { out: csv::WriterBuilder::new().has_headers(false).from_writer(w), timing, header_written: false }
    }

    fn header(&mut self) -> Result<()> {
        let mut cols = vec!["schema", "experiment", "parameters", "statistic", "value", "stderr", "seed"];
        if self.timing {
            cols.push("wall_time");
        }
        self.out.write_record(&cols)?;
        self.header_written = true;
        Ok(())
    }
}

impl<W: Write> RowSink for CsvSink<W> {
    fn push(&mut self, row: ResultRow) -> Result<()> {
        if !self.header_written {
            self.header()?;
        }
        let mut rec = vec![
            row.schema.to_string(),
            row.experiment,
            row.parameters,
            row.statistic,
            format!("{:e}", row.value),
            row.stderr.map(|s| format!("{s:e}")).unwrap_or_default(),
            row.seed.to_string(),
        ];
        if self.timing {
            rec.push(row.wall_time.map(|t| format!("{t:.3}")).unwrap_or_default());
        }
        self.out.write_record(&rec)?;
        self.out.flush()?;
        Ok(())
    }

    fn finish(&mut self, _report: Option<&serde_json::Value>) -> Result<()> {
        if !self.header_written {
            self.header()?;
        }
        self.out.flush()?;
        Ok(())
    }
}

/// One JSON document `{ "rows": [...], "report": {...} }` written at the end.
pub struct JsonSink<W: Write> {
    out: W,
    rows: Vec<ResultRow>,
}

impl<W: Write> JsonSink<W> {
    pub fn new(out: W) -> Self {
        Self { out, rows: Vec::new() }
    }
}

impl<W: Write> RowSink for JsonSink<W> {
    fn push(&mut self, row: ResultRow) -> Result<()> {
        self.rows.push(row);
        Ok(())
    }

    fn finish(&mut self, report: Option<&serde_json::Value>) -> Result<()> {
        let doc = serde_json::json!({ "schema": RESULT_SCHEMA, "rows": self.rows, "report": report });
        serde_json::to_writer_pretty(&mut self.out, &doc)?;
        writeln!(self.out)?;
        self.out.flush()?;
        Ok(())
    }
}
